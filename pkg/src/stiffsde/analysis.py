"""Numerical audits of model growth conditions and explicit moment bounds.

Audits are sampled, never symbolic: a condition is evaluated on a
deterministic grid plus a seeded random cloud, and the verdict means "no
counterexample found among these probes", with the probe count and radius
recorded.  The conditions quantify over all of R^n, which no finite probe
set can certify; violations of super-linear conditions nevertheless appear
at moderate radius, so the default windows catch realistic mistakes.

Bound calculators return closed-form values:

solution_second_moment_bound
    (||x0||^2 + 2*alpha*T) * exp(2*beta*T), bounding E||x(T)||^2 for the
    exact solution under the dissipativity constants.
exit_probability_bound
    The same quantity divided by radius^2, bounding P(sup_{t<=T} ||x|| >
    radius) via the first-exit time.
state_norm_bound
    ||x||^2 <= (1 - 2*beta*theta*dt)^{-1} (||F(x)||^2 + 2*theta*alpha*dt)
    with F(x) = x - theta*f(x)*dt, converting transform-space moment bounds
    back to state space.
scheme_second_moment_bound
    A fully explicit bound on sup over grid points of E||X_k||^2 for the
    implicit scheme: a discrete Gronwall estimate in transform space,
    converted through state_norm_bound.  Its derivation assumes beta >= 0;
    for beta < 0 the same expression is evaluated as written.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .models import ModelCatalogEntry, MonotoneProfile, SdeModel

__all__ = [
    "ProbeSpec",
    "ConditionAudit",
    "BoundReport",
    "CONDITION_IDS",
    "default_probe_spec",
    "audit_condition",
    "solution_second_moment_bound",
    "exit_probability_bound",
    "state_norm_bound",
    "scheme_second_moment_bound",
    "estimate_profile",
    "audit_catalog_entry",
]

CONDITION_IDS = ("monotone", "one_sided_lipschitz", "poly_growth",
                 "split_monotone", "scheme_stability")


@dataclass(frozen=True)
class ProbeSpec:
    """Where a condition is probed: a per-axis grid on [-radius, radius]^n
    (n <= 3), a seeded uniform cloud, and for scalar models an additional
    wide sweep.  Positive-domain models probe (domain_cut, radius] instead.
    """

    radius: float = 10.0
    grid_points: int = 101
    n_random: int = 10_000
    seed: int = 0
    scalar_sweep_radius: float = 100.0
    domain_cut: Optional[float] = None


def default_probe_spec(model: SdeModel) -> ProbeSpec:
    if model.domain_lower is not None:
        return ProbeSpec(domain_cut=model.domain_lower + 0.05)
    return ProbeSpec()


@dataclass(frozen=True)
class ConditionAudit:
    """Outcome of a sampled condition check.

    ``worst_margin`` is min over probes of (RHS - LHS); the verdict is
    "pass" exactly when it is nonnegative.
    """

    condition_id: str
    worst_margin: float
    worst_point: np.ndarray
    probes: int
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


@dataclass(frozen=True)
class BoundReport:
    """A computed bound value together with the inputs that produced it."""

    bound_id: str
    value: float
    inputs: tuple

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value >= 0.0):
            raise ConfigError(
                f"bound {self.bound_id} evaluated to {self.value!r}")


def _probe_points(model: SdeModel, spec: ProbeSpec) -> np.ndarray:
    n = model.state_dim
    lo = spec.domain_cut if spec.domain_cut is not None else -spec.radius
    rng = np.random.default_rng(spec.seed)
    clouds = [rng.uniform(lo, spec.radius, size=(spec.n_random, n))]
    if n <= 3:
        axis = np.linspace(lo, spec.radius, spec.grid_points)
        mesh = np.meshgrid(*([axis] * n), indexing="ij")
        clouds.append(np.stack([m.ravel() for m in mesh], axis=-1))
    if n == 1:
        sweep_lo = spec.domain_cut if spec.domain_cut is not None \
            else -spec.scalar_sweep_radius
        clouds.append(np.linspace(sweep_lo, spec.scalar_sweep_radius,
                                  2001)[:, None])
    pts = np.concatenate(clouds, axis=0)
    if spec.domain_cut is not None:
        pts = pts[np.all(pts > spec.domain_cut - 1e-300, axis=-1)]
    return pts


def _probe_pairs(model: SdeModel, spec: ProbeSpec):
    """Point pairs for two-point conditions: independent clouds, plus small
    perturbation pairs that expose local slope."""
    n = model.state_dim
    lo = spec.domain_cut if spec.domain_cut is not None else -spec.radius
    rng = np.random.default_rng(spec.seed + 1)
    x = rng.uniform(lo, spec.radius, size=(spec.n_random, n))
    y = rng.uniform(lo, spec.radius, size=(spec.n_random, n))
    eps = 1e-4 * rng.standard_normal((spec.n_random, n))
    y_near = x + eps
    if spec.domain_cut is not None:
        y_near = np.maximum(y_near, spec.domain_cut + 1e-6)
    return np.concatenate([x, x]), np.concatenate([y, y_near])


def _norm_sq(v: np.ndarray) -> np.ndarray:
    return np.sum(np.square(v), axis=-1)


def _frobenius_sq(m: np.ndarray) -> np.ndarray:
    return np.sum(np.square(m), axis=(-2, -1))


def _dissipation(model: SdeModel, x: np.ndarray) -> np.ndarray:
    """<x, f(x)> + 0.5 * ||g(x)||_F^2 at each probe row."""
    return (np.sum(x * model.drift(x), axis=-1)
            + 0.5 * _frobenius_sq(model.diffusion(x)))


def audit_condition(model: SdeModel, profile: MonotoneProfile,
                    condition_id: str, probe_spec: Optional[ProbeSpec] = None,
                    *, theta: Optional[float] = None,
                    dt: Optional[float] = None,
                    z: Optional[Callable] = None) -> ConditionAudit:
    """Probe one growth/stability condition; see CONDITION_IDS.

    ``split_monotone`` and ``scheme_stability`` are step-dependent and
    require theta and dt; ``scheme_stability`` additionally needs the
    nonnegative decay observable ``z`` (vectorized (..., n) -> (...,)).
    A found counterexample yields a "fail" verdict, never an exception.
    """
    if condition_id not in CONDITION_IDS:
        raise ConfigError(f"unknown condition {condition_id!r}; "
                          f"known: {CONDITION_IDS}")
    spec = probe_spec or default_probe_spec(model)

    if condition_id == "one_sided_lipschitz":
        x, y = _probe_pairs(model, spec)
        dx = x - y
        lhs = np.sum(dx * (model.drift(x) - model.drift(y)), axis=-1)
        rhs = profile.one_sided_lipschitz * _norm_sq(dx)
        margins = rhs - lhs
        worst = int(np.argmin(margins))
        return _verdict(condition_id, margins, x, worst)

    pts = _probe_points(model, spec)
    if condition_id == "monotone":
        margins = profile.alpha + profile.beta * _norm_sq(pts) \
            - _dissipation(model, pts)
    elif condition_id == "poly_growth":
        fmag = np.sqrt(_norm_sq(model.drift(pts)))
        gmag = np.sqrt(_frobenius_sq(model.diffusion(pts)))
        lhs = np.maximum(fmag, gmag)
        norms = np.sqrt(_norm_sq(pts))
        margins = profile.poly_c * (1.0 + norms ** profile.poly_h) - lhs
    elif condition_id == "split_monotone":
        _require_step_args(condition_id, theta, dt)
        if model.drift_split is None:
            raise ConfigError(f"model {model.label!r} has no drift split")
        f1, f2 = model.drift_split
        f1x, f2x = f1(pts), f2(pts)
        step_terms = ((1.0 - theta) * np.sum(f1x * f2x, axis=-1)
                      + 0.5 * _norm_sq(f2x)
                      + 0.5 * (1.0 - 2.0 * theta) * _norm_sq(f1x)) * dt
        lhs = _dissipation(model, pts) + step_terms
        margins = profile.alpha + profile.beta * _norm_sq(pts) - lhs
    elif condition_id == "scheme_stability":
        _require_step_args(condition_id, theta, dt)
        if z is None:
            raise ConfigError("scheme_stability requires the decay observable z")
        fx = model.drift(pts)
        lhs = (_dissipation(model, pts)
               + 0.5 * (1.0 - 2.0 * theta) * _norm_sq(fx) * dt)
        margins = -np.asarray(z(pts), dtype=float) - lhs
    worst = int(np.argmin(margins))
    return _verdict(condition_id, margins, pts, worst)


def _require_step_args(condition_id, theta, dt):
    if theta is None or dt is None:
        raise ConfigError(f"condition {condition_id!r} requires theta and dt")


def _verdict(condition_id, margins, points, worst) -> ConditionAudit:
    margin = float(margins[worst])
    return ConditionAudit(condition_id=condition_id, worst_margin=margin,
                          worst_point=np.array(points[worst]),
                          probes=int(margins.shape[0]),
                          verdict="pass" if margin >= 0.0 else "fail")


def solution_second_moment_bound(profile: MonotoneProfile, x0, T: float
                                 ) -> BoundReport:
    """Bound E||x(T)||^2 <= (||x0||^2 + 2*alpha*T) * exp(2*beta*T)."""
    if not (T > 0.0):
        raise ConfigError(f"T must be positive, got {T}")
    x0sq = float(_norm_sq(np.atleast_1d(np.asarray(x0, dtype=float))))
    value = (x0sq + 2.0 * profile.alpha * T) * np.exp(2.0 * profile.beta * T)
    return BoundReport("sde_moment", float(value),
                       (("x0_norm_sq", x0sq), ("alpha", profile.alpha),
                        ("beta", profile.beta), ("T", T)))


def exit_probability_bound(profile: MonotoneProfile, x0, T: float,
                           radius: float) -> BoundReport:
    """Bound P(||x|| exceeds ``radius`` before T) by moment / radius^2."""
    if not (radius > 0.0):
        raise ConfigError(f"radius must be positive, got {radius}")
    moment = solution_second_moment_bound(profile, x0, T)
    return BoundReport("exit_probability", moment.value / radius ** 2,
                       moment.inputs + (("radius", radius),))


def _transform_guard(profile: MonotoneProfile, theta: float, dt: float) -> float:
    shrink = 1.0 - 2.0 * profile.beta * theta * dt
    if not (shrink > 0.0):
        raise ConfigError(
            f"2*beta*theta*dt = {2.0 * profile.beta * theta * dt:.6g} >= 1: "
            "outside the admissible step range")
    return shrink


def state_norm_bound(profile: MonotoneProfile, theta: float, dt: float,
                     transform_norm_sq: float) -> float:
    """||x||^2 bound from ||F(x)||^2, F(x) = x - theta*f(x)*dt."""
    shrink = _transform_guard(profile, theta, dt)
    return (transform_norm_sq + 2.0 * theta * profile.alpha * dt) / shrink


def scheme_second_moment_bound(model: SdeModel, profile: MonotoneProfile,
                               theta: float, dt: float, T: float, x0
                               ) -> BoundReport:
    """Explicit bound on sup over grid points t_k <= T of E||X_k||^2.

    Transform-space Gronwall estimate: with F(x) = x - theta*f(x)*dt,
    shrink = 1 - 2*beta*theta*dt and rate = 2*beta/shrink,

        E||F(X_k)||^2 <= [||F(x0)||^2 + (2*alpha + rate*2*theta*alpha*dt)
                          * (T + dt)] * exp(rate * (T + dt)),

    converted to state space through :func:`state_norm_bound`.
    """
    if not (T > 0.0):
        raise ConfigError(f"T must be positive, got {T}")
    shrink = _transform_guard(profile, theta, dt)
    x0 = np.asarray(x0, dtype=float).reshape(model.state_dim)
    f0 = model.drift(x0)
    F0_sq = float(_norm_sq(x0 - theta * dt * f0))
    rate = 2.0 * profile.beta / shrink
    transform_bound = (F0_sq + (2.0 * profile.alpha
                                + rate * 2.0 * theta * profile.alpha * dt)
                       * (T + dt)) * np.exp(rate * (T + dt))
    value = state_norm_bound(profile, theta, dt, float(transform_bound))
    return BoundReport("scheme_moment", float(value),
                       (("F0_norm_sq", F0_sq), ("alpha", profile.alpha),
                        ("beta", profile.beta), ("theta", theta),
                        ("dt", dt), ("T", T)))


def estimate_profile(model: SdeModel,
                     probe_spec: Optional[ProbeSpec] = None) -> MonotoneProfile:
    """Fit growth constants from probe data when none are known analytically.

    alpha/beta: least squares of <x,f> + ||g||^2/2 against (1, ||x||^2),
    with alpha then raised to the probe envelope so the inequality holds at
    every probe.  L: envelope of the two-point quotient.  poly_h: log-log
    slope of max(||f||, ||g||) on the outer half of the radius, floored at
    1.  poly_c: envelope given h.  All constants are inflated by 10% toward
    the safe side and the result is flagged empirical.
    """
    spec = probe_spec or default_probe_spec(model)
    if spec.radius < 10.0:
        raise ConfigError("profile estimation requires probe radius >= 10")
    pts = _probe_points(model, spec)
    nsq = _norm_sq(pts)
    v = _dissipation(model, pts)

    design = np.stack([np.ones_like(nsq), nsq], axis=-1)
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    alpha_ls, beta = float(coef[0]), float(coef[1])
    alpha = alpha_ls + max(float(np.max(v - (alpha_ls + beta * nsq))), 0.0)
    alpha = max(alpha, 0.0) * 1.1 + 1e-12
    beta = beta + 0.1 * abs(beta)

    x, y = _probe_pairs(model, spec)
    dx = x - y
    denom = _norm_sq(dx)
    keep = denom > 1e-16
    quot = np.sum(dx * (model.drift(x) - model.drift(y)), axis=-1)[keep] \
        / denom[keep]
    lips = max(float(np.max(quot)), 1e-9) * 1.1

    norms = np.sqrt(nsq)
    mags = np.maximum(np.sqrt(_norm_sq(model.drift(pts))),
                      np.sqrt(_frobenius_sq(model.diffusion(pts))))
    outer = norms >= 0.5 * spec.radius
    safe = outer & (mags > 0.0) & (norms > 0.0)
    if np.count_nonzero(safe) >= 2:
        slope = np.polyfit(np.log(norms[safe]), np.log(mags[safe]), 1)[0]
        poly_h = max(float(slope), 1.0)
    else:
        poly_h = 1.0
    poly_c = float(np.max(mags / (1.0 + norms ** poly_h))) * 1.1 + 1e-12
    return MonotoneProfile(alpha=alpha, beta=beta, one_sided_lipschitz=lips,
                           poly_h=poly_h, poly_c=poly_c, empirical=True)


def audit_catalog_entry(entry: ModelCatalogEntry,
                        probe_spec: Optional[ProbeSpec] = None,
                        *, theta: Optional[float] = None,
                        dt: Optional[float] = None,
                        z: Optional[Callable] = None) -> list:
    """All audits applicable to a catalog entry, in a fixed order."""
    model, profile = entry.model, entry.profile
    audits = [
        audit_condition(model, profile, "monotone", probe_spec),
        audit_condition(model, profile, "one_sided_lipschitz", probe_spec),
        audit_condition(model, profile, "poly_growth", probe_spec),
    ]
    if model.drift_split is not None and theta is not None and dt is not None:
        audits.append(audit_condition(model, profile, "split_monotone",
                                      probe_spec, theta=theta, dt=dt))
    if z is not None and theta is not None and dt is not None:
        audits.append(audit_condition(model, profile, "scheme_stability",
                                      probe_spec, theta=theta, dt=dt, z=z))
    return audits
