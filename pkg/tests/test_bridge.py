import numpy as np
import pytest

from bridgekit import (
    BridgeSingularityError,
    DiffusivitySchedule,
    TimeGrid,
    bridge_drift_target,
    bridge_marginal_moments,
    bridge_marginal_sample,
    simulate_sde,
)

CONST = DiffusivitySchedule.constant(1.0)
PIECEWISE = DiffusivitySchedule(g_values=(1.0, 2.0), breakpoints=(0.5,))


def test_endpoints_bit_exact():
    rng = np.random.default_rng(0)
    x0 = np.array([1.5, -2.25, 0.125])
    x1 = np.array([-0.5, 3.75, 1.0])
    for sched in (CONST, PIECEWISE):
        assert np.array_equal(bridge_marginal_sample(x0, x1, 0.0, sched, rng), x0)
        assert np.array_equal(bridge_marginal_sample(x0, x1, 1.0, sched, rng), x1)


def test_endpoints_bit_exact_batched_mixed_times():
    rng = np.random.default_rng(1)
    x0 = np.arange(6.0).reshape(3, 2)
    x1 = x0 + 7.0
    t = np.array([0.0, 0.5, 1.0])
    out = bridge_marginal_sample(x0, x1, t, CONST, rng)
    assert np.array_equal(out[0], x0[0])
    assert np.array_equal(out[2], x1[2])
    assert not np.array_equal(out[1], x0[1])


def test_unit_bridge_moments_at_t03():
    # 1-D, g = 1: mean (1-t) x0 + t x1 = 0.3, variance t (1-t) = 0.21.
    rng = np.random.default_rng(42)
    n = 100_000
    draws = bridge_marginal_sample(
        np.zeros((n, 1)), np.ones((n, 1)), 0.3, CONST, rng
    )[:, 0]
    se_mean = np.sqrt(0.21 / n)
    assert abs(draws.mean() - 0.3) < 4 * se_mean
    assert abs(draws.var() - 0.21) / 0.21 < 0.03


@pytest.mark.parametrize("t", [0.2, 0.5, 0.8])
@pytest.mark.parametrize(
    "sched", [CONST, DiffusivitySchedule.constant(2.0), PIECEWISE], ids=["g1", "g2", "pw"]
)
def test_moments_match_closed_form_on_lattice(sched, t):
    rng = np.random.default_rng(7)
    n = 100_000
    x0 = np.tile([0.5, -1.0], (n, 1))
    x1 = np.tile([2.0, 1.5], (n, 1))
    draws = bridge_marginal_sample(x0, x1, t, sched, rng)
    mean, var = bridge_marginal_moments(x0[0], x1[0], t, sched)
    se_mean = np.sqrt(var / n)
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se_mean)
    assert np.all(np.abs(draws.var(axis=0) - var) / var < 0.03)


def test_general_g_marginal_matches_sde_simulation():
    # Verifies the piecewise-g marginal formula against direct simulation of
    # the pinned SDE itself (independent route: Euler-Maruyama).
    sched = PIECEWISE
    t_check = 0.5
    n_paths, n_steps = 30_000, 500
    x1 = np.ones((n_paths, 1))

    def pinned_drift(t, x):
        return bridge_drift_target(x, x1[: len(x)], t, sched)

    grid = TimeGrid(n_steps)
    batch = simulate_sde(np.zeros((n_paths, 1)), pinned_drift, sched, grid, seed=3)
    k = int(t_check * n_steps)
    sim = batch.states[:, k, 0]
    mean, var = bridge_marginal_moments(np.zeros(1), np.ones(1), t_check, sched)
    se_mean = np.sqrt(var / n_paths)
    assert abs(sim.mean() - mean[0]) < 4 * se_mean + 2.0 / n_steps
    assert abs(sim.var() - var) / var < 0.04


def test_drift_target_values():
    x = np.zeros((1, 1))
    x1 = np.ones((1, 1))
    assert bridge_drift_target(x1, x1, 0.7, CONST) == pytest.approx(0.0)
    assert bridge_drift_target(x, x1, 0.5, CONST)[0, 0] == pytest.approx(2.0)
    g2 = DiffusivitySchedule.constant(2.0)
    # beta(1) = 4, beta(0.5) = 2.
    assert bridge_drift_target(x, x1, 0.5, g2)[0, 0] == pytest.approx(0.5)


def test_drift_target_singularity_guard():
    with pytest.raises(BridgeSingularityError):
        bridge_drift_target(np.zeros(1), np.ones(1), 1.0 - 1e-9, CONST)
    # 1e-4 away from the horizon is still fine with the 1e-6 guard.
    bridge_drift_target(np.zeros(1), np.ones(1), 1.0 - 1e-4, CONST)


def test_dimension_mismatch_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        bridge_marginal_sample(np.zeros(2), np.zeros(3), 0.5, CONST, rng)
    with pytest.raises(ValueError):
        bridge_drift_target(np.zeros(2), np.zeros(3), 0.5, CONST)
