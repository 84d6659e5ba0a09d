import numpy as np
import pytest

from stiffsde import (ConfigError, DomainError, build_entry, catalog_labels,
                      make_ait_sahalia_model, make_cubic_model,
                      make_dissipative_model, make_electricity_model,
                      make_lotka_volterra_model)


@pytest.fixture(scope="module")
def cubic():
    return make_cubic_model(0.5, 0.2, np.sqrt(0.2))


def test_cubic_reference_values(cubic):
    x = np.array([1.0])
    assert abs(cubic.model.drift(x)[0] - 0.3) < 1e-15
    assert abs(cubic.model.diffusion(x)[0, 0] - np.sqrt(0.2)) < 1e-15
    assert cubic.profile.alpha == 0.25
    assert cubic.profile.beta == 0.25


def test_cubic_zero_offset():
    entry = make_cubic_model(0.0, 1.0, 0.0)
    assert entry.model.drift(np.array([0.0]))[0] == 0.0


def test_cubic_rejects_weak_drift_regime():
    with pytest.raises(ConfigError):
        make_cubic_model(0.5, 0.1, 1.0)  # a <= b^2/2
    with pytest.raises(ConfigError):
        make_cubic_model(0.5, -0.2, 0.1)


def test_cubic_monotone_pair_on_probe_grid(cubic):
    # 0.5*x - 0.1*x^4 <= 0.25 + 0.25*x^2 over [-100, 100]
    xs = np.linspace(-100.0, 100.0, 400001)
    lhs = 0.5 * xs - 0.1 * xs ** 4
    rhs = cubic.profile.alpha + cubic.profile.beta * xs ** 2
    assert np.min(rhs - lhs) >= 0.0


@pytest.mark.parametrize("label", ["cubic", "electricity", "lotka2",
                                   "ait-sahalia", "dissipative"])
def test_jacobian_matches_finite_differences(label):
    entry = build_entry(label)
    model = entry.model
    if model.drift_jacobian is None:
        pytest.skip("no jacobian supplied")
    rng = np.random.default_rng(3)
    lo = 0.2 if model.domain_lower is not None else -5.0
    for _ in range(100):
        x = rng.uniform(lo, 5.0, size=model.state_dim)
        jac = model.drift_jacobian(x)
        fd = np.empty_like(jac)
        for j in range(model.state_dim):
            h = 1e-6
            xp = x.copy(); xp[j] += h
            xm = x.copy(); xm[j] -= h
            fd[:, j] = (model.drift(xp) - model.drift(xm)) / (2 * h)
        assert np.max(np.abs(jac - fd)) <= 1e-5 * (1.0 + np.max(np.abs(jac)))


def test_electricity_reference_values():
    entry = make_electricity_model(1.0, 0.2, 0.1)
    f1, f2 = entry.model.drift_split
    assert f2(np.array([0.0]))[0] == 1.0
    x = np.array([2.0])
    expected = 1.0 + np.sin(2.0) ** 2 - 1.6
    assert abs(entry.model.drift(x)[0] - expected) < 1e-14
    # f2 is bounded by a + 1 on a wide sweep
    sweep = np.linspace(-100.0, 100.0, 20001)[:, None]
    assert np.max(np.abs(f2(sweep))) <= 1.0 + 1.0
    with pytest.raises(ConfigError):
        make_electricity_model(-1.0, 0.2, 0.1)
    with pytest.raises(ConfigError):
        make_electricity_model(1.0, 0.0, 0.1)
    with pytest.raises(ConfigError):
        make_electricity_model(1.0, 0.2, 1.0)  # alpha <= beta^2/2


def test_split_consistency():
    entry = make_electricity_model(1.0, 0.2, 0.1)
    f1, f2 = entry.model.drift_split
    rng = np.random.default_rng(4)
    x = rng.uniform(-50.0, 50.0, size=(1000, 1))
    f = entry.model.drift(x)
    gap = np.abs(f1(x) + f2(x) - f) / (1.0 + np.abs(f))
    assert np.max(gap) <= 1e-12


def test_lotka_volterra_accept_reject():
    entry = make_lotka_volterra_model([1.0], [[-1.0]])
    assert entry.model.drift(np.array([1.0]))[0] == 0.0  # fixed point
    entry2 = make_lotka_volterra_model([1.0, 1.0], [[-2.0, 0.5], [0.5, -2.0]])
    assert entry2.model.state_dim == 2
    with pytest.raises(ConfigError):
        make_lotka_volterra_model([1.0], [[1.0]])  # lambda_max = 2 > 0
    with pytest.raises(ConfigError):
        # lambda_max in [-1, 0): drift stable but quartic noise wins
        make_lotka_volterra_model([1.0], [[-0.25]])


def test_lotka_volterra_componentwise_formula():
    b = np.array([1.0, 1.0])
    A = np.array([[-2.0, 0.5], [0.5, -2.0]])
    entry = make_lotka_volterra_model(b, A)
    rng = np.random.default_rng(5)
    x = rng.uniform(-2.0, 2.0, size=2)
    manual = np.array([x[i] * (b[i] + sum(A[i, j] * x[j] ** 2
                                          for j in range(2)))
                       for i in range(2)])
    np.testing.assert_allclose(entry.model.drift(x), manual, rtol=1e-14)
    g = entry.model.diffusion(x)
    assert g.shape == (2, 1)
    np.testing.assert_allclose(g[:, 0], x ** 2, rtol=1e-15)


def test_ait_sahalia_values_and_domain():
    entry = make_ait_sahalia_model(1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.5)
    assert entry.model.drift(np.array([1.0]))[0] == 0.0
    assert abs(entry.model.diffusion(np.array([4.0]))[0, 0] - 8.0) < 1e-14
    with pytest.raises(DomainError):
        entry.model.drift(np.array([0.0]))
    with pytest.raises(DomainError):
        entry.model.diffusion(np.array([-1.0]))
    with pytest.raises(ConfigError):
        make_ait_sahalia_model(1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 1.8)  # 2*rho > r+1
    with pytest.raises(ConfigError):
        make_ait_sahalia_model(1.0, 1.0, 1.0, 1.0, 1.0, 0.9, 1.5)


def test_dissipative_profile_is_exact():
    entry = make_dissipative_model()
    assert entry.profile.alpha == 0.0
    assert entry.profile.beta == -0.5
    x = np.array([2.0])
    assert entry.model.drift(x)[0] == -(2.0 + 8.0)


def test_catalog_determinism():
    a = build_entry("cubic")
    b = build_entry("cubic")
    rng = np.random.default_rng(6)
    x = rng.uniform(-10.0, 10.0, size=(100, 1))
    np.testing.assert_array_equal(a.model.drift(x), b.model.drift(x))
    np.testing.assert_array_equal(a.model.diffusion(x), b.model.diffusion(x))
    assert a.profile == b.profile


def test_build_entry_plumbing():
    assert set(catalog_labels()) == {"cubic", "electricity", "lotka2",
                                     "ait-sahalia", "dissipative"}
    entry = build_entry("cubic", mu=0.1)
    assert entry.parameter("mu") == 0.1
    assert entry.parameter("a") == 0.2
    with pytest.raises(ConfigError):
        build_entry("heston")
    with pytest.raises(ConfigError):
        build_entry("cubic", kappa=1.0)
