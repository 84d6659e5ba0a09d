"""Per-step nonlinear solves for the implicit schemes.

Each implicit step requires the root of

    G(x) = x - theta * dt * f(x) - b = 0,

where f is the implicitly treated drift (the full drift, or its stiff part
for split schemes).  When ``theta * dt * L < 1`` for a one-sided Lipschitz
constant L of f, G is strictly monotone and the root is unique; all methods
here assume that regime and verify the residual of whatever they return.

Methods
-------
newton
    Damped Newton with an analytic derivative when cubic coefficients or a
    Jacobian are available, finite differences otherwise.  Scalar problems
    fall back to safeguarded bisection if the iteration stalls.
fixed_point
    Picard iteration x <- b + theta*dt*f(x); only contractive for mildly
    stiff right-hand sides.
scalar_hybrid
    Bracket expansion followed by bisection; scalar problems only.
closed_form_cubic
    Direct radical formula when the implicit drift is a cubic polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SolverError

__all__ = ["SolverConfig", "SolveOutcome", "solve_implicit", "solve_cubic_closed_form"]

_METHODS = ("newton", "fixed_point", "scalar_hybrid", "closed_form_cubic")


@dataclass(frozen=True)
class SolverConfig:
    """Residual tolerance and iteration budget for implicit steps.

    ``tolerance`` is relative: a solve for right-hand side b targets a
    residual norm of ``tolerance * (1 + ||b||)``.
    """

    tolerance: float = 1e-12
    max_iterations: int = 50
    method: str = "newton"

    def __post_init__(self):
        if not (self.tolerance >= 1e-14):
            raise ConfigError(f"tolerance must be >= 1e-14, got {self.tolerance}")
        if not (1 <= self.max_iterations <= 10_000):
            raise ConfigError(
                f"max_iterations must lie in [1, 10^4], got {self.max_iterations}")
        if self.method not in _METHODS:
            raise ConfigError(f"unknown solver method {self.method!r}; "
                              f"expected one of {_METHODS}")


@dataclass(frozen=True)
class SolveOutcome:
    """Root, the worst per-sample residual norm, and iterations used."""

    root: np.ndarray
    residual_norm: float
    iterations: int


def solve_cubic_closed_form(a_coef: float, b_rhs):
    """Unique real root of ``a_coef * x**3 + x - b_rhs = 0`` with a_coef > 0.

    Uses the depressed-cubic radical formula.  The discriminant is positive,
    so there is exactly one real root; the branch is chosen so the cube root
    is taken of a sum of same-signed terms (no cancellation) and the
    companion term recovered from the product relation.  The map is exactly
    odd in ``b_rhs``.
    """
    if not (a_coef > 0.0):
        raise ConfigError(f"cubic coefficient must be positive, got {a_coef}")
    b = np.asarray(b_rhs, dtype=float)
    p = 1.0 / a_coef
    q = -b / a_coef
    disc = np.sqrt((q / 2.0) ** 2 + (p / 3.0) ** 3)
    # q <= 0 branch: -q/2 + disc adds nonnegative terms
    u = np.cbrt(-q / 2.0 + disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        root_pos = u - p / (3.0 * u)
        v = -np.cbrt(q / 2.0 + disc)
        root_neg = v - p / (3.0 * v)
    root = np.where(q <= 0.0, root_pos, root_neg)
    root = np.where(b == 0.0, 0.0, root)
    if np.ndim(b_rhs) == 0:
        return float(root)
    return root


def _sample_norm(v: np.ndarray) -> np.ndarray:
    """Euclidean norm over the state axis (the last one)."""
    return np.sqrt(np.sum(np.square(v), axis=-1))


def solve_implicit(drift, theta: float, dt: float, b: np.ndarray,
                   config: SolverConfig, guess: np.ndarray, *,
                   jacobian=None, cubic=None, domain_lower=None) -> SolveOutcome:
    """Solve ``x - theta*dt*drift(x) = b`` for x.

    Parameters
    ----------
    drift : callable
        Implicitly treated drift, vectorized over leading axes:
        (..., n) -> (..., n).
    b : ndarray
        Right-hand side(s), shape (n,) or (batch, n).  Batched solves are
        elementwise independent: masking guarantees each sample's result
        does not depend on the other samples in the batch.
    guess : ndarray
        Initial iterate, same shape as ``b`` (typically the previous state).
    jacobian : callable, optional
        Drift Jacobian (..., n) -> (..., n, n); used by Newton when given.
    cubic : tuple, optional
        ``(c0, c1, c3)`` with drift(x) = c0 + c1*x + c3*x**3 (scalar models);
        enables the closed-form method and analytic Newton derivatives.
    domain_lower : float, optional
        Open lower bound of the model domain; iterates are kept above it.
    """
    b = np.asarray(b, dtype=float)
    guess = np.broadcast_to(np.asarray(guess, dtype=float), b.shape).copy()
    if not np.all(np.isfinite(guess)):
        raise ConfigError("initial guess must be finite")
    td = theta * dt
    tol = config.tolerance * (1.0 + _sample_norm(b))

    if td == 0.0:
        return SolveOutcome(root=b.copy(), residual_norm=0.0, iterations=0)

    def residual(x):
        return x - td * drift(x) - b

    method = config.method
    if method == "closed_form_cubic":
        root, iters = _solve_cubic_drift(td, b, cubic), 0
    elif method == "fixed_point":
        root, iters = _solve_fixed_point(drift, td, b, guess, tol, config)
    elif method == "scalar_hybrid":
        _require_scalar(b, method)
        root, iters = _solve_bisect(drift, td, b, guess, tol, domain_lower)
    elif method == "newton":
        if b.shape[-1] == 1:
            root, iters = _solve_newton_scalar(drift, td, b, guess, tol,
                                               config, cubic, jacobian,
                                               domain_lower)
        else:
            root, iters = _solve_newton_nd(drift, td, b, guess, tol, config,
                                           jacobian)
    else:  # pragma: no cover - guarded by SolverConfig
        raise ConfigError(f"unknown method {method!r}")

    res = _sample_norm(residual(root))
    worst = float(np.max(res)) if res.size else 0.0
    if np.any(res > tol) or not np.all(np.isfinite(root)):
        raise SolverError(
            f"implicit solve ({method}) did not converge: worst residual "
            f"{worst:.3e} exceeds tolerance", residual=worst,
            iterations=iters)
    return SolveOutcome(root=root, residual_norm=worst, iterations=iters)


def _require_scalar(b, method):
    if b.shape[-1] != 1:
        raise ConfigError(f"method {method!r} supports scalar states only")


def _solve_cubic_drift(td, b, cubic):
    """Closed-form solve when the implicit drift is c0 + c1*x + c3*x**3."""
    if cubic is None:
        raise ConfigError("closed_form_cubic requires cubic drift coefficients")
    _require_scalar(b, "closed_form_cubic")
    c0, c1, c3 = cubic
    a_coef = -td * c3
    lin = 1.0 - td * c1
    if not (a_coef > 0.0):
        raise ConfigError("closed_form_cubic requires a negative cubic drift term")
    if not (lin > 0.0):
        raise ConfigError(
            "closed_form_cubic requires theta*dt within the admissible range "
            "of the linear drift term")
    rhs = (b[..., 0] + td * c0) / lin
    root = solve_cubic_closed_form(a_coef / lin, rhs)
    return np.asarray(root)[..., None] if b.ndim > 1 else np.array([float(root)])


def _solve_fixed_point(drift, td, b, guess, tol, config):
    x = guess
    used = 0
    with np.errstate(all="ignore"):
        for it in range(config.max_iterations):
            x_new = b + td * drift(x)
            if not np.all(np.isfinite(x_new)):
                raise SolverError(
                    "fixed-point iteration diverged to non-finite values",
                    residual=float("inf"), iterations=it)
            res = _sample_norm(x_new - td * drift(x_new) - b)
            x = x_new
            used = it + 1
            if np.all(res <= tol):
                break
    return x, used


def _scalar_fprime(drift, x, cubic, jacobian):
    if cubic is not None:
        c0, c1, c3 = cubic
        return c1 + 3.0 * c3 * np.square(x[..., 0])
    if jacobian is not None:
        return jacobian(x)[..., 0, 0]
    h = 1e-7 * (1.0 + np.abs(x))
    xp = x.copy(); xp[..., 0] = x[..., 0] + h[..., 0]
    xm = x.copy(); xm[..., 0] = x[..., 0] - h[..., 0]
    return (drift(xp)[..., 0] - drift(xm)[..., 0]) / (2.0 * h[..., 0])


def _solve_newton_scalar(drift, td, b, guess, tol, config, cubic, jacobian,
                         domain_lower):
    """Vectorized damped Newton on scalar states, bisection fallback."""
    x = guess.copy()
    res_fn = lambda z: z - td * drift(z) - b
    r = res_fn(x)
    rn = np.abs(r[..., 0])
    done = rn <= tol
    used = 0
    for it in range(config.max_iterations):
        if np.all(done):
            break
        used = it + 1
        deriv = 1.0 - td * _scalar_fprime(drift, x, cubic, jacobian)
        deriv = np.where(np.abs(deriv) < 1e-300, 1.0, deriv)
        step = r[..., 0] / deriv
        lam = np.ones_like(step)
        x_try = x.copy()
        r_try = r.copy()
        for _ in range(40):
            cand = x[..., 0] - lam * step
            if domain_lower is not None:
                cand = np.where(cand <= domain_lower,
                                0.5 * (x[..., 0] + domain_lower), cand)
            x_try[..., 0] = cand
            with np.errstate(all="ignore"):
                r_try = res_fn(x_try)
            rt = np.abs(r_try[..., 0])
            ok = done | (np.isfinite(rt) & (rt < rn))
            if np.all(ok):
                break
            lam = np.where(ok, lam, lam / 2.0)
        x = np.where(done[..., None], x, x_try)
        r = np.where(done[..., None], r, r_try)
        rn = np.abs(r[..., 0])
        done = rn <= tol
    if not np.all(done):
        # stalled samples: monotone bracket + bisection is guaranteed
        fallback, extra = _solve_bisect(drift, td, b, guess, tol, domain_lower)
        x = np.where(done[..., None], x, fallback)
        r = res_fn(x)
        rn = np.abs(r[..., 0])
        used += extra
    # one polishing update: quadratic convergence pushes residuals from the
    # stopping tolerance down to rounding level, which keeps residual sums
    # over long paths negligible
    deriv = 1.0 - td * _scalar_fprime(drift, x, cubic, jacobian)
    deriv = np.where(np.abs(deriv) < 1e-300, 1.0, deriv)
    cand = x.copy()
    cand[..., 0] = x[..., 0] - r[..., 0] / deriv
    if domain_lower is not None:
        cand[..., 0] = np.where(cand[..., 0] <= domain_lower, x[..., 0],
                                cand[..., 0])
    with np.errstate(all="ignore"):
        r_cand = res_fn(cand)
    better = np.abs(r_cand[..., 0]) <= rn
    return np.where(better[..., None], cand, x), used + 1


def _solve_bisect(drift, td, b, guess, tol, domain_lower):
    """Expand a bracket around the unique root of the monotone scalar map,
    then bisect.  Vectorized over the batch with per-sample masks."""
    g = lambda z: z - td * drift(z) - b
    lo = guess.copy()
    hi = guess.copy()
    with np.errstate(all="ignore"):
        flo = g(lo)[..., 0]
        fhi = g(hi)[..., 0]
    span = np.maximum(1.0, np.abs(guess[..., 0]))
    for _ in range(200):
        need_lo = flo > 0.0
        need_hi = fhi < 0.0
        if not (np.any(need_lo) or np.any(need_hi)):
            break
        if domain_lower is not None:
            lo[..., 0] = np.where(need_lo,
                                  domain_lower + 0.5 * (lo[..., 0] - domain_lower),
                                  lo[..., 0])
        else:
            lo[..., 0] = np.where(need_lo, lo[..., 0] - span, lo[..., 0])
        hi[..., 0] = np.where(need_hi, hi[..., 0] + span, hi[..., 0])
        span = np.where(need_lo | need_hi, span * 2.0, span)
        with np.errstate(all="ignore"):
            flo = np.where(need_lo, g(lo)[..., 0], flo)
            fhi = np.where(need_hi, g(hi)[..., 0], fhi)
    else:
        raise SolverError("bisection failed to bracket the implicit-step root",
                          residual=float(np.max(np.abs(flo))))
    mid = 0.5 * (lo + hi)
    for it in range(200):
        with np.errstate(all="ignore"):
            fm = g(mid)[..., 0]
        if np.all(np.abs(fm) <= tol):
            return mid, it
        take_hi = fm > 0.0
        hi[..., 0] = np.where(take_hi, mid[..., 0], hi[..., 0])
        lo[..., 0] = np.where(take_hi, lo[..., 0], mid[..., 0])
        mid = 0.5 * (lo + hi)
    return mid, 200


def _solve_newton_nd(drift, td, b, guess, tol, config, jacobian):
    """Damped Newton on n-dimensional states, one sample at a time."""
    single = b.ndim == 1
    bs = b[None, :] if single else b.reshape(-1, b.shape[-1])
    gs = guess[None, :] if single else guess.reshape(-1, b.shape[-1])
    tols = np.atleast_1d(tol).ravel()
    n = bs.shape[-1]
    eye = np.eye(n)
    out = np.empty_like(bs)
    used = 0
    for i in range(bs.shape[0]):
        bi, xi, ti = bs[i], gs[i].copy(), tols[i if tols.size > 1 else 0]
        r = xi - td * drift(xi) - bi
        rn = np.linalg.norm(r)
        converged = rn <= ti
        for it in range(config.max_iterations):
            if converged:
                break
            used = max(used, it + 1)
            if jacobian is not None:
                jf = jacobian(xi)
            else:
                jf = _fd_jacobian(drift, xi)
            jg = eye - td * jf
            try:
                delta = np.linalg.solve(jg, r)
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"singular Newton system: {exc}",
                                  residual=float(rn)) from exc
            lam = 1.0
            for _ in range(40):
                x_try = xi - lam * delta
                r_try = x_try - td * drift(x_try) - bi
                rtn = np.linalg.norm(r_try)
                if np.isfinite(rtn) and rtn < rn:
                    xi, r, rn = x_try, r_try, rtn
                    break
                lam *= 0.5
            else:
                raise SolverError(
                    "damped Newton stalled; the step size likely violates the "
                    "one-sided Lipschitz admissibility range",
                    residual=float(rn))
            converged = rn <= ti
        if not converged:
            raise SolverError("Newton did not converge within the iteration budget",
                              residual=float(rn),
                              iterations=config.max_iterations)
        out[i] = xi
    return (out[0] if single else out.reshape(b.shape)), used


def _fd_jacobian(drift, x):
    """Central finite-difference Jacobian, columnwise step 1e-7*(1+|x_i|)."""
    n = x.shape[-1]
    jac = np.empty((n, n))
    for j in range(n):
        h = 1e-7 * (1.0 + abs(float(x[j])))
        xp = x.copy(); xp[j] += h
        xm = x.copy(); xm[j] -= h
        jac[:, j] = (drift(xp) - drift(xm)) / (2.0 * h)
    return jac
