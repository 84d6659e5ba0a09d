"""SDE problem definitions dx = f(x) dt + g(x) dw and a model catalog.

All coefficient maps are vectorized over leading axes: drift maps
``(..., n) -> (..., n)`` and diffusion maps ``(..., n) -> (..., n, d)``,
so whole path batches evaluate in single numpy calls.

Each catalog constructor derives a set of growth constants for its model:

alpha, beta
    Dissipativity constants with <x, f(x)> + 0.5*||g(x)||^2 <= alpha +
    beta*||x||^2.  Derivations are documented per constructor; they are
    re-verified numerically by the analysis module.
one_sided_lipschitz
    L with <x - y, f(x) - f(y)> <= L*||x - y||^2.  For split models the
    constant refers to the implicitly treated part of the drift, which is
    what the per-step solve needs.
poly_h, poly_c
    Polynomial envelope max(||f||, ||g||) <= poly_c * (1 + ||x||^poly_h).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "SdeModel",
    "MonotoneProfile",
    "ModelCatalogEntry",
    "make_cubic_model",
    "make_electricity_model",
    "make_lotka_volterra_model",
    "make_ait_sahalia_model",
    "make_dissipative_model",
    "build_entry",
    "catalog_labels",
    "catalog_defaults",
]


@dataclass(frozen=True)
class SdeModel:
    """Autonomous SDE coefficients plus solver-facing metadata.

    ``drift_cubic`` / ``split_cubic`` hold ``(c0, c1, c3)`` when the drift
    (resp. its implicitly treated part f1) equals c0 + c1*x + c3*x**3 on a
    scalar state; the implicit step then has a closed-form inverse.
    ``domain_lower`` is the open lower bound of the state domain, if any.
    """

    label: str
    state_dim: int
    noise_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    drift_split: Optional[tuple] = None
    drift_jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    drift_cubic: Optional[tuple] = None
    split_cubic: Optional[tuple] = None
    domain_lower: Optional[float] = None

    def __post_init__(self):
        if self.state_dim < 1:
            raise ConfigError(f"state_dim must be positive, got {self.state_dim}")
        if self.noise_dim < 1:
            raise ConfigError(f"noise_dim must be positive, got {self.noise_dim}")


@dataclass(frozen=True)
class MonotoneProfile:
    """Growth constants attached to a model (see module docstring).

    ``empirical`` flags constants fitted from probe data rather than
    derived analytically.
    """

    alpha: float
    beta: float
    one_sided_lipschitz: float
    poly_h: float
    poly_c: float
    empirical: bool = False

    def __post_init__(self):
        if not (self.alpha >= 0.0):
            raise ConfigError(f"alpha must be nonnegative, got {self.alpha}")
        if not (self.one_sided_lipschitz > 0.0):
            raise ConfigError("one_sided_lipschitz must be positive, got "
                              f"{self.one_sided_lipschitz}")
        if not (self.poly_h >= 1.0):
            raise ConfigError(f"poly_h must be >= 1, got {self.poly_h}")
        if not (self.poly_c > 0.0):
            raise ConfigError(f"poly_c must be positive, got {self.poly_c}")


@dataclass(frozen=True)
class ModelCatalogEntry:
    """Immutable (model, profile, parameters) triple.

    ``parameters`` is a tuple of (name, value) pairs in declaration order.
    """

    model: SdeModel
    profile: MonotoneProfile
    parameters: tuple

    def parameter(self, name: str) -> float:
        for key, value in self.parameters:
            if key == name:
                return value
        raise KeyError(name)


def _scalar_component(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 1:
        raise ConfigError(f"scalar model evaluated on state_dim {x.shape[-1]}")
    return x[..., 0]


def make_cubic_model(mu: float, a: float, b: float) -> ModelCatalogEntry:
    """Scalar model  dx = (mu - a*x^3) dt + b*x^2 dw.

    Requires a > b^2/2 so the cubic drift dominates the quadratic noise;
    outside that regime no dissipativity constants exist.

    Derived constants: with c = a - b^2/2 > 0,
        <x,f> + 0.5 g^2 = mu*x - c*x^4 <= (|mu|/2)(1 + x^2),
    using mu*x <= (|mu|/2)(1 + x^2) and dropping the nonpositive quartic,
    so alpha = beta = |mu|/2 exactly ((0.25, 0.25) for the reference
    parameters (0.5, 0.2, sqrt(0.2))).  The drift is nonincreasing plus a
    constant, so any positive one-sided Lipschitz constant is valid; 2*beta
    is recorded to keep the step-size guard driven by beta.
    """
    if not (a > 0.0):
        raise ConfigError(f"cubic coefficient a must be positive, got {a}")
    if not (a > 0.5 * b * b):
        raise ConfigError(
            f"parameter regime violated: need a > b^2/2, got a={a}, b^2/2={0.5*b*b}")

    def drift(x):
        s = _scalar_component(x)
        return (mu - a * s ** 3)[..., None]

    def diffusion(x):
        s = _scalar_component(x)
        return (b * s ** 2)[..., None, None]

    def jacobian(x):
        s = _scalar_component(x)
        return (-3.0 * a * s ** 2)[..., None, None]

    alpha = beta = 0.5 * abs(mu)
    # any L > 0 is one-sided Lipschitz for a nonincreasing drift
    lips = max(2.0 * beta, 1e-6)
    poly_c = max(abs(mu), a, abs(b)) * 1.001
    profile = MonotoneProfile(alpha=alpha, beta=beta, one_sided_lipschitz=lips,
                              poly_h=3.0, poly_c=poly_c)
    model = SdeModel(label="cubic", state_dim=1, noise_dim=1, drift=drift,
                     diffusion=diffusion, drift_jacobian=jacobian,
                     drift_cubic=(mu, 0.0, -a))
    return ModelCatalogEntry(model, profile, (("mu", mu), ("a", a), ("b", b)))


def make_electricity_model(a: float, alpha: float, beta: float) -> ModelCatalogEntry:
    """Scalar model  dx = (a + sin(x)^2 - alpha*x^3) dt + beta*x^2 dw.

    The drift splits into a stiff cubic part f1(x) = -alpha*x^3 and a
    bounded part f2(x) = a + sin(x)^2 with |f2| <= a + 1, which is the
    natural choice for a partially implicit step.

    Requires alpha > beta^2/2 (same reasoning as the cubic model).  The
    recorded alpha covers the split-scheme growth condition up to step
    sizes of 2 / L: the step-dependent terms are bounded by
    (a+1)*alpha*|x|^3 + (a+1)^2 for theta >= 1/2, and the resulting
    quartic envelope is maximized exactly.
    """
    if not (a > 0.0):
        raise ConfigError(f"offset a must be positive, got {a}")
    if not (alpha > 0.0):
        raise ConfigError(f"cubic coefficient alpha must be positive, got {alpha}")
    if not (alpha > 0.5 * beta * beta):
        raise ConfigError(
            "parameter regime violated: need alpha > beta^2/2, got "
            f"alpha={alpha}, beta^2/2={0.5*beta*beta}")

    def f1(x):
        s = _scalar_component(x)
        return (-alpha * s ** 3)[..., None]

    def f2(x):
        s = _scalar_component(x)
        return (a + np.sin(s) ** 2)[..., None]

    def drift(x):
        s = _scalar_component(x)
        return (a + np.sin(s) ** 2 - alpha * s ** 3)[..., None]

    def diffusion(x):
        s = _scalar_component(x)
        return (beta * s ** 2)[..., None, None]

    def jacobian(x):
        s = _scalar_component(x)
        return (np.sin(2.0 * s) - 3.0 * alpha * s ** 2)[..., None, None]

    c = alpha - 0.5 * beta * beta
    # envelope covering <x,f> + g^2/2 plus split-step terms up to dt <= 2/L
    alpha_mono = _max_scalar_envelope(
        lambda s: (a + 1.0) * np.abs(s) + (a + 1.0) * alpha * np.abs(s) ** 3
        - c * s ** 4)
    alpha_mono = (max(alpha_mono, 0.0) + (a + 1.0) ** 2) * 1.02 + 1e-12
    lips = 1.0  # f' <= sin(2x) <= 1; the cubic part only helps
    poly_c = (a + 1.0 + alpha + abs(beta)) * 1.001
    profile = MonotoneProfile(alpha=alpha_mono, beta=0.0, one_sided_lipschitz=lips,
                              poly_h=3.0, poly_c=poly_c)
    model = SdeModel(label="electricity", state_dim=1, noise_dim=1, drift=drift,
                     diffusion=diffusion, drift_split=(f1, f2),
                     drift_jacobian=jacobian, split_cubic=(0.0, 0.0, -alpha))
    return ModelCatalogEntry(model, profile,
                             (("a", a), ("alpha", alpha), ("beta", beta)))


def make_lotka_volterra_model(b_vec, a_mat) -> ModelCatalogEntry:
    """Stochastic Lotka-Volterra system with one shared scalar noise:

        dx_i = x_i * (b_i + sum_j a_ij x_j^2) dt + x_i^2 dw.

    Requires lambda_max(A + A^T) < 0 (checked via a symmetric eigenvalue
    estimate); additionally the quartic noise term demands
    lambda_max(A + A^T) < -1 for dissipativity constants to exist, and
    construction is rejected otherwise.

    With lam = lambda_max(A + A^T) < -1 and u = x^2 (componentwise),
        <x,f> + 0.5*||g||^2 = b.u + 0.5 u'(A+A')u + 0.5||u||^2
                           <= ||b||*||u|| - 0.5*|1+lam|*||u||^2,
    so alpha = ||b||^2 / (2*|1+lam|), beta = 0.  A global one-sided
    Lipschitz constant exists when the off-diagonal entries of A are
    nonpositive (L = max b_i); otherwise the recorded constant is a probe
    envelope over radius 10 and the profile is flagged empirical.
    """
    b = np.asarray(b_vec, dtype=float).ravel()
    A = np.asarray(a_mat, dtype=float)
    n = b.size
    if A.shape != (n, n):
        raise ConfigError(f"matrix shape {A.shape} does not match b length {n}")
    lam = float(np.max(np.linalg.eigvalsh(A + A.T)))
    if lam >= 0.0:
        raise ConfigError(
            f"stability condition violated: lambda_max(A + A^T) = {lam:.6g} >= 0")
    if lam >= -1.0:
        raise ConfigError(
            "parameter regime violated: the quadratic noise requires "
            f"lambda_max(A + A^T) < -1, got {lam:.6g}")

    def drift(x):
        x = np.asarray(x, dtype=float)
        u = x ** 2
        return x * (b + u @ A.T)

    def diffusion(x):
        x = np.asarray(x, dtype=float)
        return (x ** 2)[..., :, None]

    def jacobian(x):
        x = np.asarray(x, dtype=float)
        u = x ** 2
        diag = np.zeros(x.shape + (n,))
        idx = np.arange(n)
        diag[..., idx, idx] = b + u @ A.T
        outer = 2.0 * x[..., :, None] * A * x[..., None, :]
        return diag + outer

    alpha = float(b @ b) / (2.0 * abs(1.0 + lam)) * 1.02 + 1e-12
    offdiag = A - np.diag(np.diag(A))
    empirical = bool(np.any(offdiag > 0.0))
    if empirical:
        lips = _probe_one_sided_envelope(drift, n, radius=10.0) * 1.1 + 1e-6
    else:
        lips = max(float(np.max(b)), 1e-6)
    poly_c = (float(np.linalg.norm(b)) + float(np.linalg.norm(A)) + 1.0) * 1.001
    profile = MonotoneProfile(alpha=alpha, beta=0.0, one_sided_lipschitz=lips,
                              poly_h=3.0, poly_c=poly_c, empirical=empirical)
    cubic = (0.0, float(b[0]), float(A[0, 0])) if n == 1 else None
    model = SdeModel(label=f"lotka{n}", state_dim=n, noise_dim=1, drift=drift,
                     diffusion=diffusion, drift_jacobian=jacobian,
                     drift_cubic=cubic)
    params = tuple((f"b{i+1}", float(b[i])) for i in range(n)) + tuple(
        (f"a{i+1}{j+1}", float(A[i, j])) for i in range(n) for j in range(n))
    return ModelCatalogEntry(model, profile, params)


def make_ait_sahalia_model(a_m1: float, a0: float, a1: float, a2: float,
                           sigma: float, r: float, rho: float) -> ModelCatalogEntry:
    """Interest-rate model on the positive half-line:

        dx = (a_m1/x - a0 + a1*x - a2*x^r) dt + sigma*x^rho dw,  x > 0.

    Requires r, rho > 1 and positive rate constants, plus the dissipativity
    regime r + 1 > 2*rho (or equality with a2 > sigma^2/2) so the drift
    dominates the noise at infinity.  Evaluation at x <= 0 raises
    DomainError; the rejection/abort policy is the caller's.

    The x^-1 term rules out a global polynomial envelope near 0, so poly_c
    is an envelope over the audit window [0.05, 100] (documented scope) and
    the profile is flagged empirical.  alpha is the exact maximum of
    <x,f> + g^2/2 - beta*x^2 over the window with beta = a1.
    """
    for name, value in (("a_m1", a_m1), ("a0", a0), ("a1", a1), ("a2", a2),
                        ("sigma", sigma)):
        if not (value > 0.0):
            raise ConfigError(f"rate constant {name} must be positive, got {value}")
    if not (r > 1.0 and rho > 1.0):
        raise ConfigError(f"exponents must exceed 1, got r={r}, rho={rho}")
    if not (r + 1.0 > 2.0 * rho or (r + 1.0 == 2.0 * rho and a2 > 0.5 * sigma ** 2)):
        raise ConfigError(
            "parameter regime violated: need r+1 > 2*rho, or equality with "
            f"a2 > sigma^2/2; got r={r}, rho={rho}, a2={a2}, sigma={sigma}")

    def _checked(x):
        s = _scalar_component(x)
        if np.any(s <= 0.0):
            raise DomainError("model is defined on x > 0 only")
        return s

    def drift(x):
        s = _checked(x)
        return (a_m1 / s - a0 + a1 * s - a2 * s ** r)[..., None]

    def diffusion(x):
        s = _checked(x)
        return (sigma * s ** rho)[..., None, None]

    def jacobian(x):
        s = _checked(x)
        return (-a_m1 / s ** 2 + a1 - r * a2 * s ** (r - 1.0))[..., None, None]

    beta = a1
    grid = np.geomspace(0.05, 100.0, 40001)
    vals = (a_m1 - a0 * grid + a1 * grid ** 2 - a2 * grid ** (r + 1.0)
            + 0.5 * sigma ** 2 * grid ** (2.0 * rho)) - beta * grid ** 2
    alpha = max(float(vals.max()), 0.0) * 1.02 + 1e-12
    f_env = np.abs(a_m1 / grid - a0 + a1 * grid - a2 * grid ** r)
    g_env = sigma * grid ** rho
    poly_h = max(r, rho)
    poly_c = float(np.max(np.maximum(f_env, g_env) / (1.0 + grid ** poly_h))) * 1.1
    profile = MonotoneProfile(alpha=alpha, beta=beta, one_sided_lipschitz=a1,
                              poly_h=poly_h, poly_c=poly_c, empirical=True)
    model = SdeModel(label="ait-sahalia", state_dim=1, noise_dim=1, drift=drift,
                     diffusion=diffusion, drift_jacobian=jacobian,
                     domain_lower=0.0)
    return ModelCatalogEntry(model, profile,
                             (("a_m1", a_m1), ("a0", a0), ("a1", a1), ("a2", a2),
                              ("sigma", sigma), ("r", r), ("rho", rho)))


def make_dissipative_model(lin: float = 1.0, cub: float = 1.0,
                           noise: float = 1.0) -> ModelCatalogEntry:
    """Strictly dissipative scalar test model  dx = -(lin*x + cub*x^3) dt
    + noise*x dw, the standard long-time stability benchmark.

    <x,f> + 0.5 g^2 = (noise^2/2 - lin) x^2 - cub x^4, so alpha = 0 and
    beta = noise^2/2 - lin exactly.  The drift has f' <= -lin < 0; a unit
    one-sided Lipschitz constant is recorded.
    """
    if not (lin > 0.0 and cub > 0.0):
        raise ConfigError("dissipative model requires positive lin and cub")

    def drift(x):
        s = _scalar_component(x)
        return (-lin * s - cub * s ** 3)[..., None]

    def diffusion(x):
        s = _scalar_component(x)
        return (noise * s)[..., None, None]

    def jacobian(x):
        s = _scalar_component(x)
        return (-lin - 3.0 * cub * s ** 2)[..., None, None]

    beta = 0.5 * noise ** 2 - lin
    poly_c = max(lin + cub, abs(noise), 1.0) * 1.001
    profile = MonotoneProfile(alpha=0.0, beta=beta, one_sided_lipschitz=1.0,
                              poly_h=3.0, poly_c=poly_c)
    model = SdeModel(label="dissipative", state_dim=1, noise_dim=1, drift=drift,
                     diffusion=diffusion, drift_jacobian=jacobian,
                     drift_cubic=(0.0, -lin, -cub))
    return ModelCatalogEntry(model, profile,
                             (("lin", lin), ("cub", cub), ("noise", noise)))


def _max_scalar_envelope(fn) -> float:
    """Exact-ish maximum of a smooth scalar envelope: dense grid plus local
    refinement around the best point."""
    grid = np.linspace(-100.0, 100.0, 200001)
    vals = fn(grid)
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    fine = np.linspace(lo, hi, 20001)
    return float(np.max(fn(fine)))


def _probe_one_sided_envelope(drift, n, radius) -> float:
    """max <x-y, f(x)-f(y)> / ||x-y||^2 over a deterministic probe cloud."""
    rng = np.random.default_rng(0)
    x = rng.uniform(-radius, radius, size=(4000, n))
    y = rng.uniform(-radius, radius, size=(4000, n))
    dx = x - y
    df = drift(x) - drift(y)
    denom = np.sum(dx * dx, axis=-1)
    keep = denom > 1e-12
    return float(np.max(np.sum(dx * df, axis=-1)[keep] / denom[keep]))


_CATALOG = {
    "cubic": (make_cubic_model,
              (("mu", 0.5), ("a", 0.2), ("b", float(np.sqrt(0.2))))),
    "electricity": (make_electricity_model,
                    (("a", 1.0), ("alpha", 0.2), ("beta", 0.1))),
    "lotka2": (None,
               (("b1", 1.0), ("b2", 1.0), ("a11", -2.0), ("a12", 0.5),
                ("a21", 0.5), ("a22", -2.0))),
    "ait-sahalia": (make_ait_sahalia_model,
                    (("a_m1", 1.0), ("a0", 1.0), ("a1", 1.0), ("a2", 1.0),
                     ("sigma", 1.0), ("r", 2.0), ("rho", 1.5))),
    "dissipative": (make_dissipative_model,
                    (("lin", 1.0), ("cub", 1.0), ("noise", 1.0))),
}


def catalog_labels() -> tuple:
    return tuple(_CATALOG)


def catalog_defaults(label: str) -> tuple:
    if label not in _CATALOG:
        raise ConfigError(f"unknown model label {label!r}; "
                          f"known: {', '.join(_CATALOG)}")
    return _CATALOG[label][1]


def build_entry(label: str, **overrides) -> ModelCatalogEntry:
    """Construct a catalog entry by label with named-real overrides."""
    defaults = dict(catalog_defaults(label))
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown parameters for {label!r}: {sorted(unknown)}")
    params = {**defaults, **{k: float(v) for k, v in overrides.items()}}
    if label == "lotka2":
        b = [params["b1"], params["b2"]]
        A = [[params["a11"], params["a12"]], [params["a21"], params["a22"]]]
        return make_lotka_volterra_model(b, A)
    maker = _CATALOG[label][0]
    return maker(**params)
