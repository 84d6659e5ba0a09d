"""Experiment drivers: strong-error study, divergence contrast, moment-bound
verification, long-horizon stability, and first-exit tracking.

All studies are Monte Carlo over independent paths.  Path p is always driven
by the stream keyed (seed, p), work is processed in fixed-size blocks of
consecutive paths, and per-block partial results are merged in block order,
so every reported number is bit-identical for any worker count.

Levels are dyadic step-size exponents: level l means dt = 2^-l, so level
l has 2^l * T steps.  A strong-error study integrates a reference path at
a fine level, coarsens the same Brownian increments to each test level
(coupling), and measures squared endpoint differences.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .analysis import (ConditionAudit, audit_condition,
                       scheme_second_moment_bound, solution_second_moment_bound)
from .errors import ConfigError
from .models import ModelCatalogEntry
from .noise import TimePartition, generate_increments, pairwise_group_sum
from .schemes import SchemeConfig, check_step_admissibility, run_path_batch
from .solvers import SolverConfig

__all__ = [
    "BLOCK_SIZE",
    "LevelError",
    "StrongErrorReport",
    "strong_error_study",
    "DivergenceRow",
    "DivergenceReport",
    "divergence_demo",
    "MomentBoundReport",
    "moment_bound_study",
    "StabilityReport",
    "stability_study",
    "first_exit_step",
    "fit_loglog_slope",
]

# paths are processed in fixed blocks so reduction trees cannot depend on
# the worker count
BLOCK_SIZE = 256


def _blocks(n_paths: int):
    return [(lo, min(lo + BLOCK_SIZE, n_paths))
            for lo in range(0, n_paths, BLOCK_SIZE)]


def _run_blocks(n_paths: int, workers: int, fn):
    """Apply ``fn(lo, hi)`` to every path block; results in block order."""
    blocks = _blocks(n_paths)
    if workers <= 1 or len(blocks) <= 1:
        return [fn(lo, hi) for lo, hi in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in blocks]
        return [f.result() for f in futures]


def fit_loglog_slope(xs, ys):
    """Unweighted least-squares slope and intercept of log(y) against log(x).

    Hand-rolled so the arithmetic is plain elementwise work with a fixed
    reduction order.
    """
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    mx = float(np.mean(lx))
    my = float(np.mean(ly))
    sxx = float(np.sum((lx - mx) ** 2))
    sxy = float(np.sum((lx - mx) * (ly - my)))
    slope = sxy / sxx
    return slope, my - slope * mx


def _level_dt(level: int) -> float:
    return 2.0 ** (-int(level))


def _level_partition(T: float, level: int) -> TimePartition:
    dt = _level_dt(level)
    steps = T / dt
    if abs(steps - round(steps)) > 1e-9:
        raise ConfigError(f"T={T} is not an integer multiple of dt=2^-{level}")
    return TimePartition(T, int(round(steps)))


@dataclass(frozen=True)
class LevelError:
    """Endpoint error statistics at one step size."""

    dt: float
    mse: float
    ci_halfwidth: float
    n_paths: int
    err_s1: float
    err_s15: float


@dataclass(frozen=True)
class StrongErrorReport:
    levels: tuple
    fitted_slope: float
    fit_intercept: float
    reference_dt: float
    seed: int


def strong_error_study(entry: ModelCatalogEntry, scheme_cfg: SchemeConfig,
                       T: float, ref_level: int, test_levels, n_paths: int,
                       x0, seed: int, workers: int = 1) -> StrongErrorReport:
    """Coupled endpoint-error study against a fine-step reference run.

    Every path integrates the reference scheme on its fine grid and the
    test scheme on dyadic coarsenings of the same grid; squared endpoint
    differences are averaged per level and a log-log line fitted across
    levels.  The per-level 95% halfwidth is 1.96 * std / sqrt(n_paths) of
    the squared-error samples.  Levels equal to the reference are allowed
    and reproduce the reference bit for bit (mse exactly 0).
    """
    test_levels = tuple(int(l) for l in test_levels)
    ref_level = int(ref_level)
    if any(l > ref_level for l in test_levels):
        raise ConfigError("test levels must be coarser than the reference level")
    ref_part = _level_partition(T, ref_level)
    parts = {l: _level_partition(T, l) for l in test_levels}
    for level in (ref_level,) + test_levels:
        check_step_admissibility(replace(scheme_cfg, dt=_level_dt(level)),
                                 entry.profile)
    model = entry.model
    x0 = np.asarray(x0, dtype=float).reshape(model.state_dim)

    def block(lo, hi):
        inc = generate_increments(ref_part, model.noise_dim, seed,
                                  range(lo, hi))
        ref_cfg = replace(scheme_cfg, dt=ref_part.dt)
        ref = run_path_batch(model, ref_cfg, inc, x0)
        if np.any(ref.blowup_steps >= 0):
            raise ConfigError(
                "reference run blew up; the configuration is outside the "
                "regime this study supports")
        out = {}
        for level in test_levels:
            factor = 2 ** (ref_level - level)
            coarse = inc if factor == 1 else pairwise_group_sum(inc, factor,
                                                                axis=1)
            cfg_l = replace(scheme_cfg, dt=parts[level].dt)
            res = run_path_batch(model, cfg_l, coarse, x0)
            if np.any(res.blowup_steps >= 0):
                raise ConfigError(f"level {level} run blew up; aborting study")
            diff = res.final_states - ref.final_states
            out[level] = np.sqrt(np.sum(np.square(diff), axis=-1))
        return out

    partials = _run_blocks(n_paths, workers, block)
    stats = []
    for level in sorted(test_levels, reverse=True):
        err = np.concatenate([p[level] for p in partials])
        sq = err ** 2
        mse = float(np.mean(sq))
        ci = float(1.96 * np.std(sq, ddof=1) / np.sqrt(n_paths)) \
            if n_paths > 1 else 0.0
        stats.append(LevelError(dt=parts[level].dt, mse=mse, ci_halfwidth=ci,
                                n_paths=n_paths,
                                err_s1=float(np.mean(err)),
                                err_s15=float(np.mean(err ** 1.5))))
    positive = [s for s in stats if s.mse > 0.0]
    if len(positive) >= 2:
        slope, intercept = fit_loglog_slope([s.dt for s in positive],
                                            [s.mse for s in positive])
    else:
        slope, intercept = float("nan"), float("nan")
    return StrongErrorReport(levels=tuple(stats), fitted_slope=slope,
                             fit_intercept=intercept,
                             reference_dt=ref_part.dt, seed=seed)


@dataclass(frozen=True)
class DivergenceRow:
    scheme: str
    dt: float
    blowup_fraction: float
    max_finite_norm: float
    endpoint_second_moment: float
    moment_is_infinite: bool


@dataclass(frozen=True)
class DivergenceReport:
    rows: tuple
    n_paths: int
    seed: int


def _superlinear_diffusion(model) -> bool:
    ref = np.full((1, model.state_dim), 10.0)
    g1 = np.sqrt(np.sum(np.square(model.diffusion(ref))))
    g2 = np.sqrt(np.sum(np.square(model.diffusion(2.0 * ref))))
    if g1 == 0.0 and g2 == 0.0:
        return True  # degenerate noiseless dynamics: nothing to guard
    return bool(g1 > 0.0 and g2 / g1 > 2.0 ** 1.1)


def divergence_demo(entry: ModelCatalogEntry, dt_list, n_paths: int, x0,
                    T: float, seed: int, theta: float = 1.0,
                    workers: int = 1) -> DivergenceReport:
    """Explicit EM against the theta scheme on shared Brownian grids.

    For each step size both schemes integrate the same increments; the
    report gives per-scheme blow-up fractions, the largest finite state
    norm seen, and the endpoint second moment (infinite once any path of
    that scheme blew up).  Requires a super-linearly growing diffusion,
    the regime where the explicit scheme loses moment bounds.
    """
    model = entry.model
    if not _superlinear_diffusion(model):
        raise ConfigError(
            "divergence contrast requires a super-linearly growing diffusion")
    x0 = np.asarray(x0, dtype=float).reshape(model.state_dim)
    solver = SolverConfig()
    rows = []
    for dt in dt_list:
        steps = T / dt
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError(f"T={T} is not an integer multiple of dt={dt}")
        part = TimePartition(T, int(round(steps)))
        explicit_cfg = SchemeConfig("explicit_em", 0.0, part.dt, solver)
        implicit_cfg = SchemeConfig("theta_em", theta, part.dt, solver)
        check_step_admissibility(implicit_cfg, entry.profile)

        def block(lo, hi):
            inc = generate_increments(part, model.noise_dim, seed,
                                      range(lo, hi))
            out = {}
            for name, cfg in (("explicit_em", explicit_cfg),
                              ("theta_em", implicit_cfg)):
                res = run_path_batch(model, cfg, inc, x0)
                endpoint_sq = np.sum(np.square(res.final_states), axis=-1)
                out[name] = (res.blowup_steps >= 0, res.max_finite_norm,
                             endpoint_sq)
            return out

        partials = _run_blocks(n_paths, workers, block)
        for name in ("explicit_em", "theta_em"):
            blown = np.concatenate([p[name][0] for p in partials])
            max_norm = np.concatenate([p[name][1] for p in partials])
            end_sq = np.concatenate([p[name][2] for p in partials])
            infinite = bool(np.any(blown))
            rows.append(DivergenceRow(
                scheme=name, dt=part.dt,
                blowup_fraction=float(np.mean(blown)),
                max_finite_norm=float(np.max(max_norm)),
                endpoint_second_moment=float("inf") if infinite
                else float(np.mean(end_sq)),
                moment_is_infinite=infinite))
    return DivergenceReport(rows=tuple(rows), n_paths=n_paths, seed=seed)


class _MomentAccumulator:
    """Per-step sums of ||x||^2 and ||x||^4 across a block of paths."""

    def __init__(self, n_steps):
        self.sum_sq = np.zeros(n_steps + 1)
        self.sum_quad = np.zeros(n_steps + 1)

    def __call__(self, k, t, x):
        nsq = np.sum(np.square(x), axis=-1)
        self.sum_sq[k] += float(np.sum(nsq))
        self.sum_quad[k] += float(np.sum(nsq ** 2))


@dataclass(frozen=True)
class MomentBoundReport:
    times: np.ndarray
    second_moments: np.ndarray
    ci_halfwidths: np.ndarray
    sup_moment: float
    sup_ci: float
    scheme_bound: float
    solution_bound: float
    fine_dt: float
    fine_sup_moment: float
    n_paths: int
    seed: int

    @property
    def passes_scheme_bound(self) -> bool:
        return self.sup_moment + self.sup_ci <= self.scheme_bound

    @property
    def passes_solution_bound(self) -> bool:
        return self.fine_sup_moment <= self.solution_bound


def moment_bound_study(entry: ModelCatalogEntry, scheme_cfg: SchemeConfig,
                       T: float, n_paths: int, x0, seed: int,
                       fine_factor: int = 16,
                       workers: int = 1) -> MomentBoundReport:
    """Empirical grid-time second moments against the closed-form bounds.

    The configured run is compared with the scheme moment bound; an
    additional run at dt / fine_factor stands in for the exact solution
    and is compared with the solution moment bound.
    """
    model = entry.model
    check_step_admissibility(scheme_cfg, entry.profile)
    x0 = np.asarray(x0, dtype=float).reshape(model.state_dim)
    steps = T / scheme_cfg.dt
    if abs(steps - round(steps)) > 1e-9:
        raise ConfigError(f"T={T} is not an integer multiple of dt={scheme_cfg.dt}")
    part = TimePartition(T, int(round(steps)))
    fine_part = TimePartition(T, part.steps * int(fine_factor))
    fine_cfg = replace(scheme_cfg, dt=fine_part.dt)

    def block(lo, hi):
        inc = generate_increments(part, model.noise_dim, seed, range(lo, hi))
        acc = _MomentAccumulator(part.steps)
        res = run_path_batch(model, scheme_cfg, inc, x0, callbacks=(acc,))
        if np.any(res.blowup_steps >= 0):
            raise ConfigError("implicit moment run blew up; aborting study")
        fine_inc = generate_increments(fine_part, model.noise_dim, seed,
                                       range(lo, hi))
        fine_acc = _MomentAccumulator(fine_part.steps)
        fres = run_path_batch(model, fine_cfg, fine_inc, x0,
                              callbacks=(fine_acc,))
        if np.any(fres.blowup_steps >= 0):
            raise ConfigError("fine proxy run blew up; aborting study")
        return acc, fine_acc

    partials = _run_blocks(n_paths, workers, block)
    sum_sq = np.sum([p[0].sum_sq for p in partials], axis=0)
    sum_quad = np.sum([p[0].sum_quad for p in partials], axis=0)
    mean_sq = sum_sq / n_paths
    var = np.maximum(sum_quad / n_paths - mean_sq ** 2, 0.0)
    ci = 1.96 * np.sqrt(var / n_paths)
    k_sup = int(np.argmax(mean_sq))
    fine_mean = np.sum([p[1].sum_sq for p in partials], axis=0) / n_paths

    return MomentBoundReport(
        times=part.times(), second_moments=mean_sq, ci_halfwidths=ci,
        sup_moment=float(mean_sq[k_sup]), sup_ci=float(ci[k_sup]),
        scheme_bound=scheme_second_moment_bound(
            model, entry.profile, scheme_cfg.theta, scheme_cfg.dt, T, x0).value,
        solution_bound=solution_second_moment_bound(entry.profile, x0, T).value,
        fine_dt=fine_part.dt, fine_sup_moment=float(np.max(fine_mean)),
        n_paths=n_paths, seed=seed)


class _StabilityAccumulator:
    """Running stability observables for a block of paths.

    Tracks the per-path minimum of the decay term

        A_k = -(2<x,f(x)> + ||g(x)||^2 + (1-2*theta)*||f(x)||^2*dt)

    (nonnegative A_k at every step is exactly a nondecreasing partial-sum
    trace), the supremum of ||x|| over the trailing 10% of steps, and
    downsampled norm and sum-of-A traces.
    """

    def __init__(self, model, theta, dt, z, n_steps, stride):
        self.model, self.theta, self.dt, self.z = model, theta, dt, z
        self.n_steps, self.stride = n_steps, stride
        self.tail_start = int(np.ceil(0.9 * n_steps))
        self.min_A = None
        self.tail_sup = None
        self.a_sum = None
        self.trace_steps = []
        self.trace_norms = []
        self.trace_asum = []
        self.final_z = None

    def __call__(self, k, t, x):
        norms = np.sqrt(np.sum(np.square(x), axis=-1))
        if self.min_A is None:
            self.min_A = np.full(x.shape[0], np.inf)
            self.tail_sup = np.zeros(x.shape[0])
            self.a_sum = np.zeros(x.shape[0])
        if k < self.n_steps:
            fx = self.model.drift(x)
            gx = self.model.diffusion(x)
            a_term = -(2.0 * np.sum(x * fx, axis=-1)
                       + np.sum(np.square(gx), axis=(-2, -1))
                       + (1.0 - 2.0 * self.theta)
                       * np.sum(np.square(fx), axis=-1) * self.dt)
            self.min_A = np.minimum(self.min_A, a_term)
            self.a_sum = self.a_sum + a_term * self.dt
        if k >= self.tail_start:
            self.tail_sup = np.maximum(self.tail_sup, norms)
        if k % self.stride == 0 or k == self.n_steps:
            self.trace_steps.append(k)
            self.trace_norms.append(norms.copy())
            self.trace_asum.append(self.a_sum.copy())
        if k == self.n_steps:
            self.final_z = np.asarray(self.z(x), dtype=float)


@dataclass(frozen=True)
class StabilityReport:
    final_norms: np.ndarray
    sup_tail_norms: np.ndarray
    z_finals: np.ndarray
    min_A: np.ndarray
    fraction_converged: float
    tol_stab: float
    audit: ConditionAudit
    trace_steps: np.ndarray
    trace_norms: np.ndarray      # (record, path)
    trace_lasalle: np.ndarray    # cumulative sum of A*dt, (record, path)
    n_paths: int
    seed: int

    @property
    def lasalle_nondecreasing(self) -> bool:
        return bool(np.all(self.min_A >= -1e-12))


def stability_study(entry: ModelCatalogEntry, scheme_cfg: SchemeConfig,
                    z: Callable, horizon_steps: int, n_paths: int, x0,
                    seed: int, tol_stab: float = 1e-2,
                    trace_stride: Optional[int] = None,
                    workers: int = 1) -> StabilityReport:
    """Long-horizon decay test of the implicit scheme.

    The scheme-stability condition is audited first and must pass.  A path
    counts as converged when its final norm is below ``tol_stab``.
    """
    model = entry.model
    check_step_admissibility(scheme_cfg, entry.profile)
    audit = audit_condition(model, entry.profile, "scheme_stability",
                            theta=scheme_cfg.theta, dt=scheme_cfg.dt, z=z)
    if not audit.passed:
        raise ConfigError(
            "scheme-stability condition fails at the requested step: worst "
            f"margin {audit.worst_margin:.3e} at {audit.worst_point}")
    if horizon_steps < 1:
        raise ConfigError("horizon_steps must be positive")
    stride = trace_stride or max(1, horizon_steps // 500)
    part = TimePartition(horizon_steps * scheme_cfg.dt, horizon_steps)
    x0 = np.asarray(x0, dtype=float).reshape(model.state_dim)

    def block(lo, hi):
        inc = generate_increments(part, model.noise_dim, seed, range(lo, hi))
        acc = _StabilityAccumulator(model, scheme_cfg.theta, scheme_cfg.dt,
                                    z, horizon_steps, stride)
        res = run_path_batch(model, scheme_cfg, inc, x0, callbacks=(acc,))
        if np.any(res.blowup_steps >= 0):
            raise ConfigError("stability run blew up; aborting study")
        final_norms = np.sqrt(np.sum(np.square(res.final_states), axis=-1))
        return acc, final_norms

    partials = _run_blocks(n_paths, workers, block)
    final_norms = np.concatenate([p[1] for p in partials])
    sup_tail = np.concatenate([p[0].tail_sup for p in partials])
    z_finals = np.concatenate([p[0].final_z for p in partials])
    min_A = np.concatenate([p[0].min_A for p in partials])
    trace_steps = np.asarray(partials[0][0].trace_steps)
    trace_norms = np.concatenate(
        [np.asarray(p[0].trace_norms) for p in partials], axis=1)
    trace_lasalle = np.concatenate(
        [np.asarray(p[0].trace_asum) for p in partials], axis=1)
    return StabilityReport(
        final_norms=final_norms, sup_tail_norms=sup_tail, z_finals=z_finals,
        min_A=min_A,
        fraction_converged=float(np.mean(final_norms < tol_stab)),
        tol_stab=tol_stab, audit=audit, trace_steps=trace_steps,
        trace_norms=trace_norms, trace_lasalle=trace_lasalle,
        n_paths=n_paths, seed=seed)


def first_exit_step(states: np.ndarray, radius: float) -> Optional[int]:
    """First grid index with state norm above ``radius``, or None.

    ``states`` is a (steps+1, n) trajectory array (or a Trajectory's
    ``states`` attribute).
    """
    if not (radius > 0.0):
        raise ConfigError(f"radius must be positive, got {radius}")
    norms = np.sqrt(np.sum(np.square(np.asarray(states, dtype=float)),
                           axis=-1))
    hits = np.nonzero(norms > radius)[0]
    return int(hits[0]) if hits.size else None
