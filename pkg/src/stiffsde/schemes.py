"""Time-stepping schemes: explicit EM, theta-EM, and the split-drift variant.

One step of the theta scheme solves

    X_{k+1} = X_k + theta*f(X_{k+1})*dt + (1-theta)*f(X_k)*dt + g(X_k)*dw_k,

i.e. X_{k+1} = F^{-1}(rhs) with F(x) = x - theta*f(x)*dt.  theta = 0 recovers
the explicit Euler-Maruyama step bit-exactly; theta = 1 is the backward
(fully drift-implicit) scheme.  The split variant treats only the stiff
part f1 of a drift f = f1 + f2 implicitly.

Alongside the implicit iterates an explicit companion recursion

    Xhat_{k+1} = Xhat_k + f(X_k)*dt + g(X_k)*dw_k,   Xhat_0 = X_0,

can be tracked.  Summing both recursions telescopes to the exact identity

    Xhat_N - X_N = theta*(f(X_0) - f(X_N))*dt,

which holds at every step up to solver residuals and is used as a
correctness audit of implicit paths.

Step kernels are pure and shape-agnostic: a state of shape (n,) advances a
single path, a state of shape (paths, n) advances a coupled batch with one
vectorized solve per step.  All per-sample arithmetic is elementwise or
masked, so a path's result never depends on which batch it was computed in.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .models import MonotoneProfile, SdeModel
from .noise import BrownianGrid
from .solvers import SolveOutcome, SolverConfig, solve_implicit

__all__ = [
    "BLOWUP_NORM",
    "SchemeConfig",
    "PathState",
    "Trajectory",
    "BatchResult",
    "explicit_em_step",
    "theta_em_step",
    "split_theta_em_step",
    "run_path",
    "run_path_batch",
    "check_step_admissibility",
    "max_admissible_dt",
]

# a trajectory is declared blown up once any component is non-finite or the
# state norm exceeds this cap; the cap makes detection deterministic before
# floating-point overflow
BLOWUP_NORM = 1e12

_KINDS = ("explicit_em", "theta_em", "split_theta_em")


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme kind, implicitness parameter, step size and solver settings.

    theta < 0.5 on an implicit kind is outside the supported convergence
    regime and requires ``allow_unsafe=True``.
    """

    kind: str
    theta: float
    dt: float
    solver: SolverConfig = field(default_factory=SolverConfig)
    allow_unsafe: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown scheme kind {self.kind!r}; "
                              f"expected one of {_KINDS}")
        if not (0.0 <= self.theta <= 1.0):
            raise ConfigError(f"theta must lie in [0, 1], got {self.theta}")
        if not (self.dt > 0.0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if (self.kind != "explicit_em" and self.theta < 0.5
                and not self.allow_unsafe):
            raise ConfigError(
                f"theta={self.theta} < 0.5 is outside the supported regime "
                "for implicit kinds; pass allow_unsafe=True for exploratory runs")


def max_admissible_dt(theta: float, profile: MonotoneProfile) -> float:
    """Upper end of the admissible step range, 1 / (theta * max(L, 2*beta))."""
    if theta <= 0.0:
        return float("inf")
    denom = max(profile.one_sided_lipschitz, 2.0 * profile.beta)
    if denom <= 0.0:
        return float("inf")
    return 1.0 / (theta * denom)


def check_step_admissibility(cfg: SchemeConfig, profile: MonotoneProfile) -> None:
    """Reject step sizes outside the admissible range of the implicit solve.

    For theta >= 0.5 the full guard dt < 1/(theta*max(L, 2*beta)) applies;
    unsafe theta in (0, 0.5) still requires theta*dt*L < 1 so the per-step
    root is unique.  ``allow_unsafe`` bypasses the guard for demonstration
    runs (the explicit kind is never guarded: divergence demos must run).
    """
    if cfg.kind == "explicit_em" or cfg.theta == 0.0:
        return
    if cfg.allow_unsafe:
        return
    if cfg.theta >= 0.5:
        cap = max_admissible_dt(cfg.theta, profile)
        if not (cfg.dt < cap):
            raise ConfigError(
                f"dt={cfg.dt:.6g} >= 1/(theta*max{{L,2*beta}})={cap:.6g} "
                f"(theta={cfg.theta:.6g}, L={profile.one_sided_lipschitz:.6g}, "
                f"beta={profile.beta:.6g})")
    else:
        lips = profile.one_sided_lipschitz
        if not (cfg.theta * cfg.dt * lips < 1.0):
            raise ConfigError(
                f"theta*dt*L = {cfg.theta * cfg.dt * lips:.6g} >= 1: the "
                "implicit step has no guaranteed unique solution")


@dataclass
class PathState:
    """State carried between steps: index k, iterate x, optional explicit
    companion x_hat and the cached initial drift f(X_0)."""

    k: int
    x: np.ndarray
    x_hat: Optional[np.ndarray] = None
    f0_cache: Optional[np.ndarray] = None


def _noise_term(model: SdeModel, x: np.ndarray, dw: np.ndarray) -> np.ndarray:
    g = model.diffusion(x)
    return np.einsum("...nd,...d->...n", g, dw)


def explicit_em_step(state: PathState, dw: np.ndarray, model: SdeModel,
                     cfg: SchemeConfig) -> PathState:
    """x' = x + f(x)*dt + g(x)*dw.  No admissibility guard by design."""
    fx = model.drift(state.x)
    gdw = _noise_term(model, state.x, dw)
    x_new = state.x + fx * cfg.dt + gdw
    x_hat = None
    if state.x_hat is not None:
        x_hat = state.x_hat + fx * cfg.dt + gdw
    return PathState(state.k + 1, x_new, x_hat, state.f0_cache)


def _implicit_solve(model: SdeModel, drift, cubic, theta: float, dt: float,
                    rhs: np.ndarray, cfg: SchemeConfig,
                    guess: np.ndarray) -> SolveOutcome:
    return solve_implicit(drift, theta, dt, rhs, cfg.solver, guess,
                          jacobian=model.drift_jacobian if drift is model.drift
                          else None,
                          cubic=cubic, domain_lower=model.domain_lower)


def theta_em_step(state: PathState, dw: np.ndarray, model: SdeModel,
                  cfg: SchemeConfig) -> PathState:
    """Solve F(x') = x + (1-theta)*f(x)*dt + g(x)*dw, F(x) = x - theta*f(x)*dt.

    At theta = 0 the solve degenerates to the explicit update and the result
    matches :func:`explicit_em_step` bit for bit.
    """
    fx = model.drift(state.x)
    gdw = _noise_term(model, state.x, dw)
    rhs = state.x + (1.0 - cfg.theta) * fx * cfg.dt + gdw
    if cfg.theta == 0.0:
        x_new = rhs
    else:
        outcome = _implicit_solve(model, model.drift, model.drift_cubic,
                                  cfg.theta, cfg.dt, rhs, cfg, state.x)
        x_new = outcome.root
    x_hat = None
    if state.x_hat is not None:
        x_hat = state.x_hat + fx * cfg.dt + gdw
    return PathState(state.k + 1, x_new, x_hat, state.f0_cache)


def split_theta_em_step(state: PathState, dw: np.ndarray, model: SdeModel,
                        cfg: SchemeConfig) -> PathState:
    """Partially implicit step treating only the stiff drift part implicitly:

    x' = H^{-1}(x + (1-theta)*f1(x)*dt + f2(x)*dt + g(x)*dw),
    H(x) = x - theta*f1(x)*dt.
    """
    if model.drift_split is None:
        raise ConfigError(f"model {model.label!r} has no drift split")
    f1, f2 = model.drift_split
    f1x = f1(state.x)
    f2x = f2(state.x)
    gdw = _noise_term(model, state.x, dw)
    rhs = state.x + (1.0 - cfg.theta) * f1x * cfg.dt + f2x * cfg.dt + gdw
    if cfg.theta == 0.0:
        x_new = rhs
    else:
        outcome = _implicit_solve(model, f1, model.split_cubic,
                                  cfg.theta, cfg.dt, rhs, cfg, state.x)
        x_new = outcome.root
    x_hat = None
    if state.x_hat is not None:
        x_hat = state.x_hat + (f1x + f2x) * cfg.dt + gdw
    return PathState(state.k + 1, x_new, x_hat, state.f0_cache)


_STEP_KERNELS = {
    "explicit_em": explicit_em_step,
    "theta_em": theta_em_step,
    "split_theta_em": split_theta_em_step,
}


def _is_blown(x: np.ndarray) -> np.ndarray:
    """Per-sample blow-up flag: non-finite component or norm above the cap."""
    finite = np.all(np.isfinite(x), axis=-1)
    with np.errstate(over="ignore", invalid="ignore"):
        norm = np.sqrt(np.sum(np.square(np.where(np.isfinite(x), x, 0.0)),
                              axis=-1))
    return (~finite) | (norm > BLOWUP_NORM)


@dataclass
class Trajectory:
    """Grid values of one path plus bookkeeping.

    ``states`` has one row per visited grid point; if the path blew up at
    step k the last row is the offending state and ``blowup_step == k``.
    ``observables`` maps monitor names to per-step arrays.
    """

    times: np.ndarray
    states: np.ndarray
    blowup_step: Optional[int] = None
    companion: Optional[np.ndarray] = None
    observables: dict = field(default_factory=dict)
    residual_audit_max: Optional[float] = None
    audited_steps: int = 0

    @property
    def blown_up(self) -> bool:
        return self.blowup_step is not None

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]


def _check_grid(model: SdeModel, cfg: SchemeConfig, grid: BrownianGrid) -> None:
    if grid.noise_dim != model.noise_dim:
        raise ConfigError(f"grid noise_dim {grid.noise_dim} does not match "
                          f"model noise_dim {model.noise_dim}")
    if grid.partition.steps > 0:
        dt = grid.partition.dt
        if abs(dt - cfg.dt) > 1e-12 * max(abs(cfg.dt), 1.0):
            raise ConfigError(
                f"grid dt {dt!r} does not match scheme dt {cfg.dt!r}")


def run_path(model: SdeModel, cfg: SchemeConfig, grid: BrownianGrid,
             x0, monitors=None, track_companion: bool = False) -> Trajectory:
    """Iterate the configured step kernel over the whole grid.

    ``monitors`` maps names to callables ``(k, x) -> float`` evaluated at
    every visited grid point.  Blow-up stops the path and is recorded, not
    raised; solver failures propagate with the step index attached.

    For implicit kinds roughly one percent of the steps (deterministically
    subsampled from the grid seed) are re-audited after the run: the
    implicit residual is recomputed from the stored states and the worst
    value recorded.
    """
    _check_grid(model, cfg, grid)
    kernel = _STEP_KERNELS[cfg.kind]
    x0 = np.asarray(x0, dtype=float).reshape(model.state_dim)
    n_steps = grid.partition.steps
    monitors = monitors or {}

    states = [x0]
    companions = [x0.copy()] if track_companion else None
    obs = {name: [fn(0, x0)] for name, fn in monitors.items()}
    state = PathState(0, x0, x_hat=x0.copy() if track_companion else None,
                      f0_cache=model.drift(x0))
    blowup_step = None
    for k in range(n_steps):
        try:
            state = kernel(state, grid.increments[k], model, cfg)
        except Exception as exc:
            raise type(exc)(f"step {k}: {exc}") from exc
        states.append(state.x)
        if companions is not None:
            companions.append(state.x_hat)
        for name, fn in monitors.items():
            obs[name].append(fn(state.k, state.x))
        if bool(_is_blown(state.x)):
            blowup_step = state.k
            break

    n_rec = len(states) - 1
    traj = Trajectory(
        times=np.arange(n_rec + 1) * cfg.dt,
        states=np.asarray(states),
        blowup_step=blowup_step,
        companion=np.asarray(companions) if companions is not None else None,
        observables={name: np.asarray(vals) for name, vals in obs.items()},
    )
    if cfg.kind != "explicit_em" and cfg.theta > 0.0 and n_rec > 0:
        _audit_residuals(traj, model, cfg, grid)
    return traj


def _audit_residuals(traj: Trajectory, model: SdeModel, cfg: SchemeConfig,
                     grid: BrownianGrid) -> None:
    n_rec = traj.states.shape[0] - 1
    stride = max(1, n_rec // 100)
    offset = int(grid.seed % stride) if stride > 1 else 0
    idx = np.arange(offset, n_rec, stride)
    if idx.size == 0:
        return
    xk = traj.states[idx]
    xk1 = traj.states[idx + 1]
    dw = grid.increments[idx]
    gdw = _noise_term(model, xk, dw)
    if cfg.kind == "split_theta_em":
        f1, f2 = model.drift_split
        rhs = xk + (1.0 - cfg.theta) * f1(xk) * cfg.dt + f2(xk) * cfg.dt + gdw
        resid = xk1 - cfg.theta * cfg.dt * f1(xk1) - rhs
    else:
        rhs = xk + (1.0 - cfg.theta) * model.drift(xk) * cfg.dt + gdw
        resid = xk1 - cfg.theta * cfg.dt * model.drift(xk1) - rhs
    norms = np.sqrt(np.sum(np.square(resid), axis=-1))
    traj.residual_audit_max = float(np.max(norms))
    traj.audited_steps = int(idx.size)


@dataclass
class BatchResult:
    """Endpoint data of a coupled batch of paths.

    ``blowup_steps[p]`` is the 1-based step at which path p blew up, or -1.
    Blown paths are frozen at their last finite state in ``final_states``.
    """

    final_states: np.ndarray
    blowup_steps: np.ndarray
    max_finite_norm: np.ndarray
    final_companion: Optional[np.ndarray] = None
    residual_audit_max: float = 0.0


def run_path_batch(model: SdeModel, cfg: SchemeConfig, increments: np.ndarray,
                   x0, callbacks=(), track_companion: bool = False,
                   audit_stride: int = 0) -> BatchResult:
    """Advance a batch of paths, one vectorized kernel call per step.

    ``increments`` has shape (paths, steps, noise_dim); row p drives path p.
    ``callbacks`` are called as ``cb(k, t, x)`` with the full (paths, n)
    state after every step and once with the initial state.  Blown-up paths
    freeze at their last finite state; subsequent updates are masked out so
    the remaining paths are unaffected.
    """
    paths, n_steps, noise_dim = increments.shape
    if noise_dim != model.noise_dim:
        raise ConfigError(f"increments noise_dim {noise_dim} does not match "
                          f"model noise_dim {model.noise_dim}")
    kernel = _STEP_KERNELS[cfg.kind]
    x0 = np.asarray(x0, dtype=float).reshape(model.state_dim)
    x = np.broadcast_to(x0, (paths, model.state_dim)).copy()

    state = PathState(0, x, x_hat=x.copy() if track_companion else None,
                      f0_cache=model.drift(x))
    blowup_steps = np.full(paths, -1, dtype=int)
    max_norm = np.sqrt(np.sum(np.square(x), axis=-1))
    worst_resid = 0.0
    for cb in callbacks:
        cb(0, 0.0, state.x)

    for k in range(n_steps):
        alive = blowup_steps < 0
        if not np.any(alive):
            break
        prev = state
        with np.errstate(all="ignore"):
            try:
                nxt = kernel(prev, increments[:, k, :], model, cfg)
            except Exception as exc:
                raise type(exc)(f"step {k}: {exc}") from exc
        blown_now = _is_blown(nxt.x) & alive
        keep = (~blown_now) & alive
        x_new = np.where(keep[:, None], nxt.x, prev.x)
        blowup_steps[blown_now] = k + 1
        x_hat_new = None
        if track_companion and nxt.x_hat is not None:
            x_hat_new = np.where(keep[:, None], nxt.x_hat, prev.x_hat)
        state = PathState(k + 1, x_new, x_hat_new, prev.f0_cache)
        alive_norm = np.sqrt(np.sum(np.square(x_new), axis=-1))
        max_norm = np.where(keep, np.maximum(max_norm, alive_norm), max_norm)
        if audit_stride and cfg.kind != "explicit_em" and cfg.theta > 0.0 \
                and (k % audit_stride == 0):
            worst_resid = max(worst_resid,
                              _batch_residual(model, cfg, prev.x, x_new,
                                              increments[:, k, :], keep))
        for cb in callbacks:
            cb(k + 1, (k + 1) * cfg.dt, state.x)

    return BatchResult(final_states=state.x, blowup_steps=blowup_steps,
                       max_finite_norm=max_norm,
                       final_companion=state.x_hat,
                       residual_audit_max=worst_resid)


def _batch_residual(model, cfg, xk, xk1, dw, keep) -> float:
    if not np.any(keep):
        return 0.0
    gdw = _noise_term(model, xk, dw)
    if cfg.kind == "split_theta_em":
        f1, f2 = model.drift_split
        rhs = xk + (1.0 - cfg.theta) * f1(xk) * cfg.dt + f2(xk) * cfg.dt + gdw
        resid = xk1 - cfg.theta * cfg.dt * f1(xk1) - rhs
    else:
        rhs = xk + (1.0 - cfg.theta) * model.drift(xk) * cfg.dt + gdw
        resid = xk1 - cfg.theta * cfg.dt * model.drift(xk1) - rhs
    norms = np.sqrt(np.sum(np.square(resid), axis=-1))
    return float(np.max(norms[keep]))
