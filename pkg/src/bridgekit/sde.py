"""Diffusivity schedules, bridge sampling, and SDE simulation.

The processes handled here live on the time interval [0, 1]. The reference
dynamics are driven by a time-dependent diffusivity g_t, with accumulated
variance

    beta(t) = integral_0^t g_s^2 ds.

A pair of endpoints (x0, x1) is connected by the pinned diffusion

    dX_t = g_t^2 (x1 - X_t) / (beta(1) - beta(t)) dt + g_t dW_t,  X_0 = x0,

whose marginal at time t is Gaussian with mean
x0 + (beta(t)/beta(1)) (x1 - x0) and isotropic variance
beta(t) (beta(1) - beta(t)) / beta(1). Unconstrained dynamics use a learned
(or user-supplied) drift b(t, x):

    dX_t = g_t^2 b(t, X_t) dt + g_t dW_t,

integrated with fixed-step Euler-Maruyama.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, NumericsError

# Refuse regression targets closer to the terminal singularity than this
# fraction of beta(1).
SINGULARITY_GUARD = 1e-6

# Trajectories are simulated in fixed-size chunks so memory stays bounded and
# results do not depend on how callers batch their starting points.
_SIM_CHUNK = 4096

DriftFn = Callable[[float, np.ndarray], np.ndarray]


class BridgeSingularityError(ValueError):
    """Raised when beta(1) - beta(t) is too small for a stable drift target."""


# ---------------------------------------------------------------------------
# Diffusivity schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffusivitySchedule:
    """Piecewise-constant diffusivity g_t on [0, 1].

    ``g_values[i]`` applies on the interval [breakpoints[i-1], breakpoints[i])
    with implicit outer boundaries 0 and 1. A single g value (no breakpoints)
    is the constant schedule.
    """

    g_values: tuple[float, ...]
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.g_values) == 0:
            raise ValueError("schedule needs at least one g value")
        if any(g <= 0 for g in self.g_values):
            raise ValueError("diffusivity must be positive everywhere")
        if len(self.breakpoints) != len(self.g_values) - 1:
            raise ValueError("need exactly one breakpoint between consecutive g values")
        bps = self.breakpoints
        if any(not 0.0 < b < 1.0 for b in bps) or list(bps) != sorted(set(bps)):
            raise ValueError("breakpoints must be strictly increasing and inside (0, 1)")

    @classmethod
    def constant(cls, g: float) -> "DiffusivitySchedule":
        return cls(g_values=(float(g),))

    @property
    def kind(self) -> str:
        return "constant" if len(self.g_values) == 1 else "piecewise-constant"

    @property
    def _edges(self) -> np.ndarray:
        return np.array((0.0,) + self.breakpoints + (1.0,))

    def g(self, t):
        """Diffusivity at time t (right-continuous; g(1) is the last value)."""
        t = _check_time_domain(t)
        idx = np.minimum(
            np.searchsorted(np.asarray(self.breakpoints), t, side="right"),
            len(self.g_values) - 1,
        )
        return np.asarray(self.g_values)[idx]

    def g_squared(self, t):
        g = self.g(t)
        return g * g

    def cum_beta(self, t):
        """beta(t) = integral of g_s^2 from 0 to t, in closed form."""
        t = _check_time_domain(t)
        edges = self._edges
        g_sq = np.asarray(self.g_values) ** 2
        # Overlap of [0, t] with every segment, summed against g^2.
        t_arr = np.asarray(t, dtype=float)
        overlap = np.clip(t_arr[..., None], edges[:-1], edges[1:]) - edges[:-1]
        beta = overlap @ g_sq
        return beta if t_arr.ndim else float(beta)

    @property
    def beta_total(self) -> float:
        return float(self.cum_beta(1.0))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "g_values": list(self.g_values),
            "breakpoints": list(self.breakpoints),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiffusivitySchedule":
        return cls(g_values=tuple(d["g_values"]), breakpoints=tuple(d.get("breakpoints", ())))


def cum_beta(schedule: DiffusivitySchedule, t):
    """Functional alias for :meth:`DiffusivitySchedule.cum_beta`."""
    return schedule.cum_beta(t)


def _check_time_domain(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f"time must lie in [0, 1], got {t}")
    return t if t.ndim else float(t)


# ---------------------------------------------------------------------------
# Time grids and trajectory containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k / n_steps on the fixed horizon [0, 1]."""

    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) / self.n_steps


@dataclass
class TrajectoryBatch:
    """Discretized sample paths: ``states[i, k]`` is trajectory i at times[k]."""

    states: np.ndarray  # (n_traj, n_steps + 1, d)
    times: np.ndarray  # (n_steps + 1,)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.times = np.asarray(self.times, dtype=float)
        if self.states.ndim != 3:
            raise ValueError("states must have shape (n_traj, n_steps + 1, d)")
        if self.states.shape[1] != self.times.shape[0]:
            raise ValueError("states and times disagree on the number of steps")

    @property
    def n_traj(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.states.shape[1] - 1

    @property
    def d(self) -> int:
        return self.states.shape[2]

    @property
    def endpoints(self) -> np.ndarray:
        return self.states[:, -1, :]


def write_trajectories(path, batch: TrajectoryBatch) -> None:
    """Trajectory CSV: one row per (trajectory, step), 17 significant digits."""
    d = batch.d
    header = "traj_id,step,t," + ",".join(f"x_{j}" for j in range(d))
    lines = [header]
    for i in range(batch.n_traj):
        for k in range(batch.n_steps + 1):
            coords = ",".join(format(v, ".17g") for v in batch.states[i, k])
            lines.append(f"{i},{k},{format(batch.times[k], '.17g')},{coords}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectories(path) -> TrajectoryBatch:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty trajectory file")
    cols = lines[0].split(",")
    if cols[:3] != ["traj_id", "step", "t"] or not all(
        c == f"x_{j}" for j, c in enumerate(cols[3:])
    ):
        raise DataError(f"{path}: malformed trajectory header {lines[0]!r}")
    d = len(cols) - 3
    if d < 1:
        raise DataError(f"{path}: trajectory header has no coordinate columns")
    if len(lines) == 1:  # header only: a valid, empty batch
        return TrajectoryBatch(states=np.empty((0, 1, d)), times=np.zeros(1))
    rows = []
    for ln_no, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(cols):
            raise DataError(f"{path}:{ln_no}: expected {len(cols)} cells, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise DataError(f"{path}:{ln_no}: non-numeric cell ({exc})") from None
    arr = np.asarray(rows)
    ids = arr[:, 0].astype(int)
    steps = arr[:, 1].astype(int)
    n_traj = ids.max() + 1
    n_steps = steps.max()
    states = np.full((n_traj, n_steps + 1, d), np.nan)
    times = np.full(n_steps + 1, np.nan)
    states[ids, steps] = arr[:, 3:]
    times[steps] = arr[:, 2]
    if not np.all(np.isfinite(states)):
        raise DataError(f"{path}: missing or non-finite trajectory rows")
    return TrajectoryBatch(states=states, times=times)


# ---------------------------------------------------------------------------
# Bridge sampling and drift targets
# ---------------------------------------------------------------------------


def bridge_marginal_moments(x0, x1, t, schedule: DiffusivitySchedule):
    """Mean and per-coordinate variance of the pinned process at time t."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x0.shape != x1.shape:
        raise ValueError(f"endpoint shapes differ: {x0.shape} vs {x1.shape}")
    beta_t = np.asarray(schedule.cum_beta(t), dtype=float)
    beta_1 = schedule.beta_total
    frac = (beta_t / beta_1)[..., None] if beta_t.ndim else beta_t / beta_1
    mean = x0 + frac * (x1 - x0)
    var = beta_t * (beta_1 - beta_t) / beta_1
    return mean, var


def bridge_marginal_sample(x0, x1, t, schedule: DiffusivitySchedule, rng: np.random.Generator):
    """Draw from the bridge marginal at time t; exact endpoints at t in {0, 1}.

    ``x0``/``x1`` may be single states or batches of rows; ``t`` may be a
    scalar or one value per row. One standard-normal block is always consumed,
    so the rng stream advances identically regardless of the t values.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    mean, var = bridge_marginal_moments(x0, x1, t, schedule)
    eps = rng.standard_normal(mean.shape)
    std = np.sqrt(var)
    draw = mean + (std[..., None] if np.ndim(std) else std) * eps
    # Pin the endpoints bit-exactly rather than relying on 0-variance algebra.
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        if t_arr == 0.0:
            return x0.copy()
        if t_arr == 1.0:
            return x1.copy()
        return draw
    draw = np.where((t_arr == 0.0)[..., None], x0, draw)
    draw = np.where((t_arr == 1.0)[..., None], x1, draw)
    return draw


def bridge_drift_target(x, x1, t, schedule: DiffusivitySchedule):
    """Regression target (x1 - x) / (beta(1) - beta(t)).

    Raises :class:`BridgeSingularityError` when t is too close to the horizon;
    callers are expected to clip their training times.
    """
    x = np.asarray(x, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x.shape != x1.shape:
        raise ValueError(f"state shapes differ: {x.shape} vs {x1.shape}")
    beta_t = np.asarray(schedule.cum_beta(t), dtype=float)
    beta_1 = schedule.beta_total
    remaining = beta_1 - beta_t
    if np.any(remaining < SINGULARITY_GUARD * beta_1):
        raise BridgeSingularityError(
            f"beta(1) - beta(t) = {np.min(remaining):g} is below the singularity "
            f"guard {SINGULARITY_GUARD * beta_1:g}; clip t away from 1"
        )
    return (x1 - x) / (remaining[..., None] if remaining.ndim else remaining)


# ---------------------------------------------------------------------------
# Euler-Maruyama simulation
# ---------------------------------------------------------------------------


def _trajectory_noise(seed: int, traj_ids: np.ndarray, n_steps: int, d: int) -> np.ndarray:
    """Per-trajectory Gaussian increments, addressable by (seed, id, step).

    Each trajectory owns a Philox stream keyed by (run seed, trajectory id);
    step k reads positions k*d .. (k+1)*d - 1 of that stream. The values for a
    given trajectory therefore never depend on which other trajectories are
    simulated alongside it.
    """
    key_hi = np.uint64(seed % (1 << 64))
    out = np.empty((len(traj_ids), n_steps, d))
    for row, tid in enumerate(traj_ids):
        bitgen = np.random.Philox(key=np.array([key_hi, np.uint64(int(tid))], dtype=np.uint64))
        out[row] = np.random.Generator(bitgen).standard_normal((n_steps, d))
    return out


def _simulate_times(
    x0: np.ndarray,
    drift_fn: DriftFn,
    schedule: DiffusivitySchedule,
    times: np.ndarray,
    seed: int,
    traj_offset: int,
    record: bool,
) -> np.ndarray:
    """Core EM loop over an explicit time array. Returns full paths or endpoints."""
    n_traj, d = x0.shape
    n_steps = len(times) - 1
    if record:
        states = np.empty((n_traj, n_steps + 1, d))
        states[:, 0] = x0
    else:
        states = None
    endpoints = np.empty_like(x0)

    g_vals = np.asarray(schedule.g(times[:-1]), dtype=float)
    dts = np.diff(times)
    for lo in range(0, n_traj, _SIM_CHUNK):
        hi = min(lo + _SIM_CHUNK, n_traj)
        ids = np.arange(lo, hi) + traj_offset
        noise = _trajectory_noise(seed, ids, n_steps, d)
        x = x0[lo:hi].copy()
        for k in range(n_steps):
            t_k = float(times[k])
            drift = np.asarray(drift_fn(t_k, x), dtype=float)
            if drift.shape != x.shape:
                raise ValueError(
                    f"drift_fn returned shape {drift.shape}, expected {x.shape}"
                )
            if not np.all(np.isfinite(drift)):
                raise NumericsError(
                    f"non-finite drift at step {k} (t = {t_k:g}); "
                    f"max |state| = {np.max(np.abs(x)):g}"
                )
            g_k = g_vals[k]
            x = x + (g_k * g_k) * drift * dts[k] + g_k * math.sqrt(dts[k]) * noise[:, k, :]
            if record:
                states[lo:hi, k + 1] = x
        endpoints[lo:hi] = x
    if record:
        return states
    return endpoints


def simulate_sde(
    x0_batch,
    drift_fn: DriftFn,
    schedule: DiffusivitySchedule,
    grid: TimeGrid,
    seed: int,
    traj_offset: int = 0,
) -> TrajectoryBatch:
    """Euler-Maruyama simulation of dX = g^2 b(t, X) dt + g dW on [0, 1].

    Deterministic given ``seed``; trajectory i + traj_offset always sees the
    same noise no matter how the batch is split.
    """
    x0 = np.atleast_2d(np.asarray(x0_batch, dtype=float))
    grid_times = grid.times
    states = _simulate_times(x0, drift_fn, schedule, grid_times, seed, traj_offset, record=True)
    states[:, 0] = x0  # starting points are the caller's, bit for bit
    return TrajectoryBatch(states=states, times=grid_times)


def simulate_conditioned(
    x0,
    x1,
    drift_model,
    doob_model,
    schedule: DiffusivitySchedule,
    grid: TimeGrid,
    seed: int,
    traj_offset: int = 0,
) -> TrajectoryBatch:
    """Simulate under the endpoint-corrected drift g^2 (b + m).

    ``drift_model`` is called as ``drift_model(t, x)`` and ``doob_model`` as
    ``doob_model(t, x, b_value)``; the correction term receives the drift value
    as a constant input. ``x1`` fixes the expected dimension (the conditioning
    itself lives inside the models) and is validated against ``x0``.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    x1 = np.asarray(x1, dtype=float)
    if x1.shape[-1] != x0.shape[-1]:
        raise ValueError(f"x0 has dimension {x0.shape[-1]} but x1 has {x1.shape[-1]}")

    def total_drift(t, x):
        b = np.asarray(drift_model(t, x), dtype=float)
        m = np.asarray(doob_model(t, x, b), dtype=float)
        return b + m

    return simulate_sde(x0, total_drift, schedule, grid, seed, traj_offset)


def estimate_h_mc(
    x,
    t: float,
    x1,
    tau: float,
    drift_fn: DriftFn,
    schedule: DiffusivitySchedule,
    grid: TimeGrid,
    seed: int,
    n_paths: int,
) -> float:
    """Monte-Carlo estimate of the smoothed endpoint-hitting weight.

    Runs ``n_paths`` unconditioned simulations from state ``x`` at time ``t``
    to the horizon and averages exp(-||X_1 - x1||^2 / (2 tau)). The estimate
    is always in (0, 1].
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if not 0.0 <= t < 1.0:
        raise ValueError("t must lie in [0, 1)")
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    if x.shape != x1.shape:
        raise ValueError(f"state shapes differ: {x.shape} vs {x1.shape}")

    later = grid.times[grid.times > t]
    times = np.concatenate(([t], later))
    if times[-1] != 1.0:
        times = np.concatenate((times, [1.0]))
    x0 = np.tile(x, (n_paths, 1))
    ends = _simulate_times(x0, drift_fn, schedule, times, seed, 0, record=False)
    sq = np.sum((ends - x1) ** 2, axis=1)
    return float(np.mean(np.exp(-sq / (2.0 * tau))))
