"""Distributional and alignment metrics.

All functions are deterministic (no RNG): multi-scale unbiased MMD with RBF
kernels, entropy-regularized transport cost via log-domain Sinkhorn, RMSD over
index-aligned rows, and the mean-shift (perturbation-signature) distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MMD_SCALES = (2.0, 1.0, 0.5, 0.1, 0.01, 0.005)

_MMD_CHUNK = 2000


def _as_cloud(x, name: str) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"{name} must be a nonempty (n, d) array")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.maximum(d2, 0.0)


def _kernel_sums(a: np.ndarray, b: np.ndarray, scales) -> np.ndarray:
    """Total sum of exp(-d^2 / (2 s^2)) over all (i, j), one value per scale."""
    sums = np.zeros(len(scales))
    for lo in range(0, len(a), _MMD_CHUNK):
        a_chunk = a[lo : lo + _MMD_CHUNK]
        for lo2 in range(0, len(b), _MMD_CHUNK):
            d2 = _sq_dists(a_chunk, b[lo2 : lo2 + _MMD_CHUNK])
            for si, s in enumerate(scales):
                sums[si] += np.sum(np.exp(-d2 / (2.0 * s * s)))
    return sums


def mmd(x, y, scales=DEFAULT_MMD_SCALES) -> float:
    """Unbiased squared-MMD estimate averaged over RBF length scales.

    Within-sample terms average the off-diagonal kernel values, the cross term
    the full kernel matrix; the estimate may be negative. Requires at least
    two points per side.
    """
    x = _as_cloud(x, "x")
    y = _as_cloud(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    n, m = len(x), len(y)
    if n < 2 or m < 2:
        raise ValueError("unbiased MMD needs at least 2 points per sample")
    # Canonical operand order makes mmd(x, y) == mmd(y, x) bit-exactly.
    if (m, y.tobytes()) < (n, x.tobytes()):
        x, y, n, m = y, x, m, n
    scales = tuple(float(s) for s in scales)
    s_xx = _kernel_sums(x, x, scales)
    s_yy = _kernel_sums(y, y, scales)
    s_xy = _kernel_sums(x, y, scales)
    # Diagonal kernel values are exactly 1.
    within_x = (s_xx - n) / (n * (n - 1))
    within_y = (s_yy - m) / (m * (m - 1))
    cross = s_xy / (n * m)
    return float(np.mean(within_x + within_y - 2.0 * cross))


# ---------------------------------------------------------------------------
# Entropic optimal transport
# ---------------------------------------------------------------------------


@dataclass
class SinkhornResult:
    value: float  # <P, C>: transport cost under the converged plan
    plan: np.ndarray  # (n, m), rows sum to a, columns to b
    n_iters: int
    marginal_violation: float
    converged: bool


def sinkhorn_w(
    x, y, eps: float = 0.1, max_iters: int = 5000, tol: float = 1e-6,
    warm_start: bool = True,
) -> SinkhornResult:
    """Log-domain Sinkhorn on the squared-distance cost with uniform weights.

    Iterates dual potentials until the worse of the two L1 marginal violations
    drops below ``tol``; the reported scalar is the plain transport cost
    <P, C> of the converged plan. ``warm_start`` initializes the potentials by
    annealing from a large regularization down to ``eps`` (deterministic, and
    essential for convergence when eps is far below the cost scale); the
    annealing sweeps count toward ``max_iters``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = _as_cloud(x, "x")
    y = _as_cloud(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    n, m = len(x), len(y)
    a = np.full(n, 1.0 / n)
    b = np.full(m, 1.0 / m)
    log_a = np.log(a)
    log_b = np.log(b)
    cost = _sq_dists(x, y)

    def sweep(f, g, e):
        # f-update makes rows feasible, the g-update then fixes columns.
        f = -e * _logsumexp((g[None, :] - cost) / e + log_b[None, :], axis=1)
        g = -e * _logsumexp((f[:, None] - cost) / e + log_a[:, None], axis=0)
        return f, g

    def plan_of(f, g):
        log_plan = (f[:, None] + g[None, :] - cost) / eps + log_a[:, None] + log_b[None, :]
        # Feasible plans have log entries <= 0; the clamp only tames the
        # overflow of far-from-converged iterates (reported as such).
        return np.exp(np.minimum(log_plan, 50.0))

    def violation_of(plan):
        return max(
            float(np.abs(plan.sum(axis=1) - a).sum()),
            float(np.abs(plan.sum(axis=0) - b).sum()),
        )

    f = np.zeros(n)
    g = np.zeros(m)
    it = 0
    cost_scale = float(np.max(cost)) if cost.size else 1.0
    if warm_start and cost_scale > 0 and eps < cost_scale / 4:
        e = cost_scale / 4
        while e > eps and it < max_iters:
            for _ in range(10):
                if it >= max_iters:
                    break
                f, g = sweep(f, g, e)
                it += 1
            e = max(eps, e / 2)

    violation = np.inf
    converged = False
    while it < max_iters:
        f, g = sweep(f, g, eps)
        it += 1
        violation = violation_of(plan_of(f, g))
        if violation < tol:
            converged = True
            break
    plan = plan_of(f, g)
    if violation is np.inf:
        violation = violation_of(plan)
    return SinkhornResult(
        value=float(np.sum(plan * cost)),
        plan=plan,
        n_iters=it,
        marginal_violation=violation,
        converged=converged,
    )


def _logsumexp(z: np.ndarray, axis: int) -> np.ndarray:
    zmax = np.max(z, axis=axis, keepdims=True)
    out = zmax + np.log(np.sum(np.exp(z - zmax), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


# ---------------------------------------------------------------------------
# Alignment metrics
# ---------------------------------------------------------------------------


def rmsd(pred, ref) -> float:
    """sqrt(mean ||ref_i - pred_i||^2) over index-aligned rows.

    Row order carries the alignment; this is deliberately not permutation
    invariant.
    """
    pred = _as_cloud(pred, "pred")
    ref = _as_cloud(ref, "ref")
    if pred.shape != ref.shape:
        raise ValueError(
            f"rmsd needs index-aligned clouds of equal shape, got {pred.shape} vs {ref.shape}"
        )
    return float(np.sqrt(np.mean(np.sum((ref - pred) ** 2, axis=1))))


def ps_l2(pred, ref, control=None) -> float:
    """L2 distance between the mean shifts of ``pred`` and ``ref``.

    The control population cancels in the difference of the two signatures, so
    this equals ||mean(ref) - mean(pred)||; ``control`` is accepted for
    interface fidelity and only checked for shape.
    """
    pred = _as_cloud(pred, "pred")
    ref = _as_cloud(ref, "ref")
    if pred.shape[1] != ref.shape[1]:
        raise ValueError(f"dimension mismatch: {pred.shape[1]} vs {ref.shape[1]}")
    if control is not None:
        control = _as_cloud(control, "control")
        if control.shape[1] != pred.shape[1]:
            raise ValueError(
                f"control dimension {control.shape[1]} does not match {pred.shape[1]}"
            )
    return float(np.linalg.norm(ref.mean(axis=0) - pred.mean(axis=0)))
