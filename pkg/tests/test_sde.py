import numpy as np
import pytest

from bridgekit import (
    DiffusivitySchedule,
    TimeGrid,
    TrajectoryBatch,
    bridge_drift_target,
    bridge_marginal_sample,
    estimate_h_mc,
    mmd,
    read_trajectories,
    simulate_conditioned,
    simulate_sde,
    write_trajectories,
)
from bridgekit.errors import NumericsError

CONST = DiffusivitySchedule.constant(1.0)
ZERO_DRIFT = lambda t, x: np.zeros_like(x)


def test_time_grid():
    grid = TimeGrid(4)
    np.testing.assert_array_equal(grid.times, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid.times[0] == 0.0 and grid.times[-1] == 1.0
    with pytest.raises(ValueError):
        TimeGrid(0)


def test_zero_drift_zero_noise_is_constant():
    # g must be positive, so emulate "no noise" with a tiny diffusivity and
    # check the exact zero-noise case via drift-only displacement instead.
    x0 = np.array([[1.0, -2.0], [0.5, 3.0]])
    tiny = DiffusivitySchedule.constant(1e-12)
    batch = simulate_sde(x0, ZERO_DRIFT, tiny, TimeGrid(8), seed=0)
    np.testing.assert_allclose(batch.states, np.repeat(x0[:, None, :], 9, axis=1), atol=1e-11)
    assert np.array_equal(batch.states[:, 0], x0)


def test_brownian_endpoint_variance():
    # Pure noise, g = 1: endpoint variance is t = 1.
    n = 100_000
    batch = simulate_sde(np.zeros((n, 1)), ZERO_DRIFT, CONST, TimeGrid(100), seed=1)
    var = batch.endpoints[:, 0].var()
    assert abs(var - 1.0) < 0.03


def test_pinned_drift_hits_target():
    n = 2000
    x1 = np.ones((n, 1))

    def pinned(t, x):
        return bridge_drift_target(x, x1[: len(x)], t, CONST)

    batch = simulate_sde(np.zeros((n, 1)), pinned, CONST, TimeGrid(1000), seed=2)
    ends = batch.endpoints[:, 0]
    assert abs(ends.mean() - 1.0) < 0.02
    assert ends.std() <= 0.1


def test_simulation_is_deterministic():
    x0 = np.random.default_rng(0).normal(size=(50, 3))
    drift = lambda t, x: -x
    a = simulate_sde(x0, drift, CONST, TimeGrid(20), seed=9)
    b = simulate_sde(x0, drift, CONST, TimeGrid(20), seed=9)
    assert np.array_equal(a.states, b.states)
    c = simulate_sde(x0, drift, CONST, TimeGrid(20), seed=10)
    assert not np.array_equal(a.states, c.states)


def test_noise_is_per_trajectory_not_per_batch():
    # Simulating trajectories in one batch or in two halves gives identical
    # paths when the trajectory ids are preserved via the offset.
    x0 = np.random.default_rng(1).normal(size=(10, 2))
    drift = lambda t, x: 0.5 - x
    whole = simulate_sde(x0, drift, CONST, TimeGrid(15), seed=4)
    first = simulate_sde(x0[:6], drift, CONST, TimeGrid(15), seed=4)
    second = simulate_sde(x0[6:], drift, CONST, TimeGrid(15), seed=4, traj_offset=6)
    assert np.array_equal(whole.states[:6], first.states)
    assert np.array_equal(whole.states[6:], second.states)


def test_non_finite_drift_reports_step_and_state():
    def bad(t, x):
        return np.full_like(x, np.nan) if t >= 0.5 else np.zeros_like(x)

    with pytest.raises(NumericsError, match=r"step 5"):
        simulate_sde(np.zeros((2, 1)), bad, CONST, TimeGrid(10), seed=0)


def test_conditioned_with_exact_residual_matches_bridge_marginal():
    # Feed the correction term m = pinned drift - b: the conditioned dynamics
    # then are exactly the pinned process, so its time-0.5 marginal must match
    # direct bridge sampling (two-sample MMD below 0.01).
    n = 10_000
    x0 = np.zeros((n, 1))
    x1 = np.ones((n, 1))
    b_fn = lambda t, x: 0.3 * np.ones_like(x)  # arbitrary smooth drift

    def m_fn(t, x, b_value):
        return bridge_drift_target(x, np.ones_like(x), t, CONST) - b_value

    batch = simulate_conditioned(x0, x1, b_fn, m_fn, CONST, TimeGrid(500), seed=5)
    sim_mid = batch.states[:, 250, :]
    direct = bridge_marginal_sample(x0, x1, 0.5, CONST, np.random.default_rng(55))
    assert abs(mmd(sim_mid, direct)) < 0.01


def test_conditioned_zero_init_models_tiny_g_stays_at_start():
    # Zero-initialized networks contribute no drift; with negligible
    # diffusivity the conditioned trajectory stays at its starting point.
    from bridgekit import DoobNet, DriftNet, MlpSpec

    drift = DriftNet(MlpSpec(input_dim=2, output_dim=2, hidden_dim=4, time_embed_dim=4),
                     rng=np.random.default_rng(0))
    doob = DoobNet(MlpSpec(input_dim=2, output_dim=2, hidden_dim=4, time_embed_dim=4,
                           uses_drift_input=True), rng=np.random.default_rng(1))
    x0 = np.array([[0.7, -1.3]])
    tiny = DiffusivitySchedule.constant(1e-12)
    batch = simulate_conditioned(
        x0, x0.copy(), drift, lambda t, x, b: doob(t, x, b_value=b),
        tiny, TimeGrid(10), seed=3,
    )
    np.testing.assert_allclose(batch.states, np.repeat(x0[:, None, :], 11, axis=1),
                               atol=1e-11)


def test_conditioned_dimension_check():
    with pytest.raises(ValueError):
        simulate_conditioned(
            np.zeros((2, 2)), np.zeros(3), ZERO_DRIFT,
            lambda t, x, b: np.zeros_like(x), CONST, TimeGrid(5), seed=0,
        )


def test_h_estimate_near_horizon_limits():
    grid = TimeGrid(100)
    x1 = np.array([0.7, -0.2])
    h_same = estimate_h_mc(x1, 1 - 1e-9, x1, 0.1, ZERO_DRIFT, CONST, grid, seed=1, n_paths=200)
    assert h_same == pytest.approx(1.0, abs=1e-3)
    # ||x - x1||^2 = 2 tau gives e^{-1}.
    tau = 0.1
    x = x1 + np.array([np.sqrt(2 * tau), 0.0])
    h_off = estimate_h_mc(x, 1 - 1e-9, x1, tau, ZERO_DRIFT, CONST, grid, seed=1, n_paths=200)
    assert h_off == pytest.approx(np.exp(-1.0), abs=1e-3)


def test_h_estimate_in_unit_interval():
    grid = TimeGrid(20)
    rng = np.random.default_rng(12)
    for _ in range(10):
        x = rng.normal(size=2)
        x1 = rng.normal(size=2)
        t = float(rng.uniform(0, 0.95))
        h = estimate_h_mc(x, t, x1, 0.5, ZERO_DRIFT, CONST, grid, seed=3, n_paths=50)
        assert 0.0 < h <= 1.0


def test_h_estimate_argument_validation():
    grid = TimeGrid(10)
    with pytest.raises(ValueError):
        estimate_h_mc(np.zeros(1), 1.0, np.zeros(1), 0.1, ZERO_DRIFT, CONST, grid, 0, 10)
    with pytest.raises(ValueError):
        estimate_h_mc(np.zeros(1), 0.5, np.zeros(1), -1.0, ZERO_DRIFT, CONST, grid, 0, 10)
    with pytest.raises(ValueError):
        estimate_h_mc(np.zeros(1), 0.5, np.zeros(1), 0.1, ZERO_DRIFT, CONST, grid, 0, 0)


def test_trained_single_pair_conditioned_simulation(single_pair_model):
    # Endpoint-corrected simulation on a well-trained model lands on the
    # paired target; the bridge itself is the oracle for where paths belong.
    result = single_pair_model.result
    n = 100
    x0 = np.zeros((n, 1))
    x1 = np.ones((n, 1))

    def doob_fn(t, x, b_value):
        return result.doob(t, x, b_value=b_value)

    batch = simulate_conditioned(
        x0, x1, result.drift, doob_fn, DiffusivitySchedule.constant(1.0),
        TimeGrid(1000), seed=77,
    )
    from bridgekit import rmsd

    assert rmsd(batch.endpoints, x1) < 0.15


def test_trained_moon_h_estimates_nondecreasing(moon_model):
    # Along bridge states of a training-style pair, the smoothed hitting
    # weight grows with t: late states pin down the endpoint ever harder.
    result = moon_model.result
    sched = result.config.schedule
    grid = TimeGrid(50)
    dataset_pair_rng = np.random.default_rng(123)
    from bridgekit import generate_moon

    pairs = generate_moon(10, rng=dataset_pair_rng)
    x0, x1 = pairs.x0[3], pairs.x1[3]
    values = []
    for ti, t in enumerate([0.0, 0.15, 0.30, 0.45, 0.60, 0.75, 0.90]):
        states = bridge_marginal_sample(
            np.tile(x0, (4, 1)), np.tile(x1, (4, 1)), t, sched,
            np.random.default_rng(500 + ti),
        )
        ests = [
            estimate_h_mc(s, t, x1, 0.1, result.drift, sched, grid, seed=901, n_paths=2000)
            for s in states
        ]
        values.append(float(np.mean(ests)))
    assert all(values[i] <= values[i + 1] + 5e-3 for i in range(len(values) - 1))
    assert values[-1] > values[0]


def test_trajectory_csv_round_trip(tmp_path):
    batch = simulate_sde(
        np.random.default_rng(3).normal(size=(4, 2)), ZERO_DRIFT, CONST, TimeGrid(6), seed=8
    )
    path = tmp_path / "traj.csv"
    write_trajectories(path, batch)
    again = read_trajectories(path)
    assert np.array_equal(batch.states, again.states)
    assert np.array_equal(batch.times, again.times)
    header = path.read_text().splitlines()[0]
    assert header == "traj_id,step,t,x_0,x_1"


def test_trajectory_csv_header_only_is_empty_batch(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("traj_id,step,t,x_0,x_1\n")
    batch = read_trajectories(path)
    assert batch.n_traj == 0
    assert batch.d == 2


def test_trajectory_batch_validation():
    with pytest.raises(ValueError):
        TrajectoryBatch(states=np.zeros((2, 3)), times=np.zeros(3))
    with pytest.raises(ValueError):
        TrajectoryBatch(states=np.zeros((2, 3, 1)), times=np.zeros(4))
