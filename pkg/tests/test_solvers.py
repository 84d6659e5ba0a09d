import numpy as np
import pytest
from scipy.optimize import brentq

from stiffsde import (ConfigError, SolverConfig, SolverError,
                      make_cubic_model, solve_cubic_closed_form,
                      solve_implicit)

# root of 0.05 x^3 + x - 1 = 0, frozen from a bisection oracle run to 1e-15
ROOT_CUBIC_B1 = 0.9562760099588581


def cubic_drift(x):
    return -0.2 * x ** 3


def test_zero_implicit_weight_returns_rhs():
    b = np.array([3.5])
    out = solve_implicit(cubic_drift, 0.0, 0.25, b, SolverConfig(), b)
    np.testing.assert_array_equal(out.root, b)
    out = solve_implicit(cubic_drift, 1.0, 0.0, b, SolverConfig(), b)
    np.testing.assert_array_equal(out.root, b)


@pytest.mark.parametrize("method", ["newton", "scalar_hybrid", "fixed_point"])
def test_cubic_drift_root_matches_bisection_oracle(method):
    cfg = SolverConfig(method=method)
    out = solve_implicit(cubic_drift, 1.0, 0.25, np.array([1.0]), cfg,
                         np.array([1.0]))
    assert abs(out.root[0] - ROOT_CUBIC_B1) < 1e-11


def test_linear_drift_closed_form():
    out = solve_implicit(lambda x: -x, 1.0, 0.5, np.array([1.0]),
                         SolverConfig(), np.array([1.0]))
    assert abs(out.root[0] - 2.0 / 3.0) < 1e-14


def test_closed_form_cubic_basics():
    assert solve_cubic_closed_form(0.05, 0.0) == 0.0
    assert abs(solve_cubic_closed_form(0.05, 1.0) - ROOT_CUBIC_B1) < 1e-12
    with pytest.raises(ConfigError):
        solve_cubic_closed_form(0.0, 1.0)
    with pytest.raises(ConfigError):
        solve_cubic_closed_form(-0.1, 1.0)


def test_closed_form_cubic_exactly_odd():
    rng = np.random.default_rng(5)
    b = rng.uniform(0.0, 50.0, size=500)
    plus = solve_cubic_closed_form(0.3, b)
    minus = solve_cubic_closed_form(0.3, -b)
    np.testing.assert_array_equal(minus, -plus)


def test_closed_form_cubic_against_brentq():
    rng = np.random.default_rng(6)
    for a_coef in (0.05, 1.0, 17.5):
        for b in rng.uniform(-100.0, 100.0, size=40):
            ours = solve_cubic_closed_form(a_coef, b)
            ref = brentq(lambda x: a_coef * x ** 3 + x - b, -100.0, 100.0,
                         xtol=1e-14)
            assert abs(ours - ref) <= 1e-10 * (1.0 + abs(ref))


def test_method_agreement_on_cubic_model():
    entry = make_cubic_model(0.5, 0.2, np.sqrt(0.2))
    model = entry.model
    rng = np.random.default_rng(7)
    b = rng.uniform(-10.0, 10.0, size=(1000, 1))
    roots = {}
    for method in ("newton", "scalar_hybrid", "closed_form_cubic"):
        cfg = SolverConfig(method=method)
        roots[method] = solve_implicit(model.drift, 1.0, 0.25, b, cfg, b,
                                       jacobian=model.drift_jacobian,
                                       cubic=model.drift_cubic).root
    for method in ("scalar_hybrid", "closed_form_cubic"):
        assert np.max(np.abs(roots[method] - roots["newton"])) < 1e-10


def test_residual_contract_reverified_independently():
    entry = make_cubic_model(0.5, 0.2, np.sqrt(0.2))
    rng = np.random.default_rng(8)
    b = rng.uniform(-10.0, 10.0, size=(200, 1))
    cfg = SolverConfig(tolerance=1e-12, method="newton")
    out = solve_implicit(entry.model.drift, 1.0, 0.25, b, cfg, b,
                         cubic=entry.model.drift_cubic)
    resid = out.root - 0.25 * entry.model.drift(out.root) - b
    tol = cfg.tolerance * (1.0 + np.abs(b[:, 0]))
    assert np.all(np.abs(resid[:, 0]) <= tol)
    assert out.residual_norm <= tol.max()


def test_root_independent_of_initial_guess():
    # strictly increasing implicit map: the root is unique, so wildly
    # different guesses must agree
    cfg = SolverConfig(method="newton")
    b = np.array([2.0])
    r1 = solve_implicit(cubic_drift, 1.0, 0.25, b, cfg, np.array([100.0])).root
    r2 = solve_implicit(cubic_drift, 1.0, 0.25, b, cfg, np.array([-100.0])).root
    assert abs(r1[0] - r2[0]) < 1e-10


def test_fixed_point_divergence_raises():
    cfg = SolverConfig(method="fixed_point", max_iterations=30)
    with pytest.raises(SolverError) as err:
        solve_implicit(cubic_drift, 1.0, 0.25, np.array([50.0]), cfg,
                       np.array([50.0]))
    assert err.value.residual is None or err.value.residual > 0


def test_scalar_hybrid_rejects_vector_states():
    with pytest.raises(ConfigError):
        solve_implicit(lambda x: -x, 1.0, 0.1, np.array([1.0, 2.0]),
                       SolverConfig(method="scalar_hybrid"),
                       np.array([1.0, 2.0]))


def test_newton_multidimensional():
    # two-dimensional dissipative drift; verify the residual directly
    def drift(x):
        return -x - x * np.sum(np.square(x), axis=-1, keepdims=True)

    b = np.array([0.7, -1.3])
    out = solve_implicit(drift, 1.0, 0.1, b, SolverConfig(), b)
    resid = out.root - 0.1 * drift(out.root) - b
    assert np.linalg.norm(resid) <= 1e-12 * (1.0 + np.linalg.norm(b))


def test_solver_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(tolerance=1e-15)
    with pytest.raises(ConfigError):
        SolverConfig(max_iterations=20_000)
    with pytest.raises(ConfigError):
        SolverConfig(method="simplex")


def test_closed_form_requires_cubic_metadata():
    with pytest.raises(ConfigError):
        solve_implicit(cubic_drift, 1.0, 0.25, np.array([1.0]),
                       SolverConfig(method="closed_form_cubic"),
                       np.array([1.0]))
