import numpy as np
import pytest

from stiffsde import (BrownianGrid, ConfigError, MonotoneProfile, PathState,
                      SchemeConfig, SdeModel, SolverConfig, TimePartition,
                      check_step_admissibility, explicit_em_step, generate,
                      generate_increments, make_cubic_model,
                      make_dissipative_model, make_electricity_model,
                      max_admissible_dt, run_path, run_path_batch,
                      split_theta_em_step, theta_em_step)

# oracle roots (bisection to 1e-15) for the frozen step examples
ROOT_THETA_STEP = 1.0646602955148912   # 0.05 x^3 + x = 1.125
ROOT_SPLIT_STEP = 0.24922598395730455  # 0.05 x^3 + x = 0.25


def frozen_model():
    zero = lambda x: np.zeros_like(x)
    return SdeModel(label="frozen", state_dim=1, noise_dim=1, drift=zero,
                    diffusion=lambda x: np.zeros(x.shape + (1,)))


@pytest.fixture(scope="module")
def cubic():
    return make_cubic_model(0.5, 0.2, np.sqrt(0.2))


def cfg_for(kind, theta, dt, method="newton", allow_unsafe=False):
    return SchemeConfig(kind, theta, dt, SolverConfig(method=method),
                        allow_unsafe=allow_unsafe)


def test_explicit_step_frozen_dynamics():
    model = frozen_model()
    state = PathState(0, np.array([1.7]))
    out = explicit_em_step(state, np.array([0.3]), model,
                           cfg_for("explicit_em", 0.0, 0.25))
    assert out.x[0] == 1.7
    assert out.k == 1


def test_explicit_step_cubic_arithmetic(cubic):
    cfg = cfg_for("explicit_em", 0.0, 0.25)
    out = explicit_em_step(PathState(0, np.array([1.0])), np.array([0.0]),
                           cubic.model, cfg)
    assert out.x[0] == 1.0 + 0.3 * 0.25
    out = explicit_em_step(PathState(0, np.array([10.0])), np.array([0.0]),
                           cubic.model, cfg)
    assert out.x[0] == 10.0 + (0.5 - 200.0) * 0.25  # -39.875 overshoot


def test_theta_step_matches_bisection_oracle(cubic):
    cfg = cfg_for("theta_em", 1.0, 0.25)
    out = theta_em_step(PathState(0, np.array([1.0])), np.array([0.0]),
                        cubic.model, cfg)
    assert abs(out.x[0] - ROOT_THETA_STEP) < 1e-10


def test_theta_step_linear_drift_closed_form():
    model = SdeModel(label="linear", state_dim=1, noise_dim=1,
                     drift=lambda x: -x,
                     diffusion=lambda x: np.zeros(x.shape + (1,)))
    cfg = cfg_for("theta_em", 1.0, 0.5)
    out = theta_em_step(PathState(0, np.array([1.0])), np.array([0.0]),
                        model, cfg)
    assert abs(out.x[0] - 2.0 / 3.0) < 1e-14


def test_theta_zero_degenerates_to_explicit_bit_exactly(cubic):
    # 10^3 shared steps: theta=0 theta-scheme equals the explicit kernel
    part = TimePartition(1.0, 1000)
    grid = generate(part, 1, 3)
    cfg0 = cfg_for("theta_em", 0.0, part.dt, allow_unsafe=True)
    cfge = cfg_for("explicit_em", 0.0, part.dt)
    t0 = run_path(cubic.model, cfg0, grid, np.array([1.0]))
    te = run_path(cubic.model, cfge, grid, np.array([1.0]))
    assert np.max(np.abs(t0.states - te.states)) <= 1e-12


def test_split_step_matches_bisection_oracle():
    entry = make_electricity_model(1.0, 0.2, 0.1)
    cfg = cfg_for("split_theta_em", 1.0, 0.25)
    out = split_theta_em_step(PathState(0, np.array([0.0])), np.array([0.0]),
                              entry.model, cfg)
    assert abs(out.x[0] - ROOT_SPLIT_STEP) < 1e-10


def test_split_with_zero_smooth_part_equals_theta_on_stiff_part():
    stiff = lambda x: -0.2 * x ** 3
    smooth = lambda x: np.zeros_like(x)
    g = lambda x: 0.1 * x[..., :, None]
    split_model = SdeModel(label="split0", state_dim=1, noise_dim=1,
                           drift=lambda x: stiff(x) + smooth(x), diffusion=g,
                           drift_split=(stiff, smooth),
                           split_cubic=(0.0, 0.0, -0.2),
                           drift_cubic=(0.0, 0.0, -0.2))
    plain_model = SdeModel(label="stiff", state_dim=1, noise_dim=1,
                           drift=stiff, diffusion=g,
                           drift_cubic=(0.0, 0.0, -0.2))
    cfg_split = cfg_for("split_theta_em", 1.0, 0.25)
    cfg_plain = cfg_for("theta_em", 1.0, 0.25)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.uniform(-3.0, 3.0, size=1)
        dw = rng.normal(0.0, 0.5, size=1)
        a = split_theta_em_step(PathState(0, x), dw, split_model, cfg_split)
        b = theta_em_step(PathState(0, x), dw, plain_model, cfg_plain)
        assert abs(a.x[0] - b.x[0]) <= 1e-12


def test_split_theta_zero_equals_explicit_on_summed_drift():
    entry = make_electricity_model(1.0, 0.2, 0.1)
    cfg_split = cfg_for("split_theta_em", 0.0, 0.125, allow_unsafe=True)
    cfg_expl = cfg_for("explicit_em", 0.0, 0.125)
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.uniform(-2.0, 2.0, size=1)
        dw = rng.normal(0.0, 0.3, size=1)
        a = split_theta_em_step(PathState(0, x), dw, entry.model, cfg_split)
        b = explicit_em_step(PathState(0, x), dw, entry.model, cfg_expl)
        assert abs(a.x[0] - b.x[0]) <= 1e-14 * (1.0 + abs(b.x[0]))


def test_split_requires_drift_split(cubic):
    cfg = cfg_for("split_theta_em", 1.0, 0.25)
    with pytest.raises(ConfigError):
        split_theta_em_step(PathState(0, np.array([1.0])), np.array([0.0]),
                            cubic.model, cfg)


def test_run_path_empty_partition(cubic):
    grid = BrownianGrid(TimePartition(0.0, 0), 1, np.zeros((0, 1)), 0)
    cfg = cfg_for("theta_em", 1.0, 0.25)
    traj = run_path(cubic.model, cfg, grid, np.array([1.0]))
    assert traj.states.shape == (1, 1)
    assert traj.states[0, 0] == 1.0
    assert not traj.blown_up


def test_run_path_blowup_recorded_not_raised(cubic):
    # x0 = 8 overshoots deterministically; four explicit steps cross the cap
    part = TimePartition(1.0, 4)
    grid = generate(part, 1, 0)
    cfg = cfg_for("explicit_em", 0.0, 0.25)
    traj = run_path(cubic.model, cfg, grid, np.array([8.0]))
    assert traj.blown_up
    assert traj.blowup_step is not None
    cfg_bem = cfg_for("theta_em", 1.0, 0.25)
    traj_bem = run_path(cubic.model, cfg_bem, grid, np.array([8.0]))
    assert not traj_bem.blown_up
    assert np.isfinite(traj_bem.endpoint).all()


def test_companion_identity_along_path(cubic):
    # Xhat_k - X_k = theta*(f(X_0) - f(X_k))*dt at every step
    part = TimePartition(1.0, 64)
    grid = generate(part, 1, 11)
    cfg = cfg_for("theta_em", 1.0, part.dt, method="closed_form_cubic")
    traj = run_path(cubic.model, cfg, grid, np.array([1.0]),
                    track_companion=True)
    f = cubic.model.drift
    f0 = f(traj.states[0])
    expected = 1.0 * (f0 - f(traj.states)) * part.dt
    gap = np.abs(traj.companion - traj.states - expected)
    rel = gap / (1.0 + np.abs(traj.states))
    assert np.max(rel) <= 1e-10


def test_run_path_monitors_and_audit(cubic):
    part = TimePartition(1.0, 128)
    grid = generate(part, 1, 21)
    cfg = cfg_for("theta_em", 1.0, part.dt)
    traj = run_path(cubic.model, cfg, grid, np.array([1.0]),
                    monitors={"norm_sq": lambda k, x: float(np.sum(x * x))})
    assert traj.observables["norm_sq"].shape == (129,)
    np.testing.assert_allclose(traj.observables["norm_sq"],
                               np.sum(traj.states ** 2, axis=1), rtol=1e-15)
    assert traj.audited_steps > 0
    assert traj.residual_audit_max <= 1e-12 * (1.0 + np.max(np.abs(traj.states)))


def test_run_path_determinism(cubic):
    part = TimePartition(1.0, 200)
    cfg = cfg_for("theta_em", 1.0, part.dt)
    a = run_path(cubic.model, cfg, generate(part, 1, 9), np.array([1.0]))
    b = run_path(cubic.model, cfg, generate(part, 1, 9), np.array([1.0]))
    np.testing.assert_array_equal(a.states, b.states)


def test_batch_matches_single_paths_bit_exactly(cubic):
    part = TimePartition(1.0, 64)
    inc = generate_increments(part, 1, 5, range(4))
    cfg = cfg_for("theta_em", 1.0, part.dt)
    batch = run_path_batch(cubic.model, cfg, inc, np.array([1.0]))
    for p in range(4):
        solo = run_path(cubic.model, cfg, generate(part, 1, 5, path_index=p),
                        np.array([1.0]))
        np.testing.assert_array_equal(batch.final_states[p], solo.endpoint)
    assert np.all(batch.blowup_steps == -1)


def test_batch_freezes_blown_paths(cubic):
    part = TimePartition(1.0, 4)
    inc = generate_increments(part, 1, 0, range(8))
    cfg = cfg_for("explicit_em", 0.0, 0.25)
    res = run_path_batch(cubic.model, cfg, inc, np.array([8.0]))
    # the overshoot cascade from x0 = 8 blows up most paths; noise rescues
    # a few, and every frozen state stays finite
    assert np.sum(res.blowup_steps >= 1) >= 4
    assert np.all(np.isfinite(res.final_states))
    # each path's outcome is independent of its (blown) batch neighbours
    for p in range(8):
        solo = run_path_batch(cubic.model, cfg, inc[p:p + 1], np.array([8.0]))
        np.testing.assert_array_equal(res.final_states[p],
                                      solo.final_states[0])
        assert res.blowup_steps[p] == solo.blowup_steps[0]


def test_admissibility_guard_message(cubic):
    cfg = cfg_for("theta_em", 1.0, 2.5)
    assert max_admissible_dt(1.0, cubic.profile) == 2.0
    with pytest.raises(ConfigError) as err:
        check_step_admissibility(cfg, cubic.profile)
    msg = str(err.value)
    assert "1/(theta*max{L,2*beta})" in msg
    assert "2.5" in msg and "2" in msg
    # admissible dt passes, explicit kind is never guarded
    check_step_admissibility(cfg_for("theta_em", 1.0, 0.25), cubic.profile)
    check_step_admissibility(cfg_for("explicit_em", 0.0, 100.0), cubic.profile)


def test_unsafe_theta_requires_flag():
    with pytest.raises(ConfigError):
        SchemeConfig("theta_em", 0.25, 0.1, SolverConfig())
    cfg = SchemeConfig("theta_em", 0.25, 0.1, SolverConfig(), allow_unsafe=True)
    assert cfg.theta == 0.25


def test_grid_dt_mismatch_rejected(cubic):
    grid = generate(TimePartition(1.0, 64), 1, 0)
    cfg = cfg_for("theta_em", 1.0, 0.25)
    with pytest.raises(ConfigError):
        run_path(cubic.model, cfg, grid, np.array([1.0]))


def test_stability_model_long_run_converges():
    entry = make_dissipative_model()
    part = TimePartition(20.0, 2000)
    grid = generate(part, 1, 13)
    cfg = cfg_for("theta_em", 1.0, 0.01, method="closed_form_cubic")
    traj = run_path(entry.model, cfg, grid, np.array([1.0]))
    assert not traj.blown_up
    assert abs(traj.endpoint[0]) < 1e-2
