"""Feed-forward drift and endpoint-score networks with hand-rolled backprop.

Both networks share one layout:

  * ``x_enc``  - 3 linear layers lifting the state (and, for the correction
    network, the drift value) into the hidden width;
  * ``t_enc``  - sinusoidal time features followed by 2 linear layers;
  * ``head``   - 3 linear layers mapping the concatenated encodings back to
    state dimension.

Every linear layer except the final head layer is followed by the chosen
activation and dropout. Forward passes return caches that ``backward``
consumes to produce exact parameter gradients; no autodiff framework is
involved, which keeps eval-mode passes pure functions of (params, t, x).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericsError

X_ENC_LAYERS = 3
T_ENC_LAYERS = 2
HEAD_LAYERS = 3


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

_SELU_ALPHA = 1.6732632423543772
_SELU_SCALE = 1.0507009873554805
_LEAKY_SLOPE = 0.01


def _selu(z):
    neg = np.minimum(z, 0.0)  # keeps expm1 off the overflowing branch
    return _SELU_SCALE * np.where(z > 0, z, _SELU_ALPHA * np.expm1(neg))


def _selu_grad(z):
    neg = np.minimum(z, 0.0)
    return _SELU_SCALE * np.where(z > 0, 1.0, _SELU_ALPHA * np.exp(neg))


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _silu(z):
    return z * _sigmoid(z)


def _silu_grad(z):
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z):
    return (z > 0).astype(float)


def _leaky_relu(z):
    return np.where(z > 0, z, _LEAKY_SLOPE * z)


def _leaky_relu_grad(z):
    return np.where(z > 0, 1.0, _LEAKY_SLOPE)


ACTIVATIONS = {
    "selu": (_selu, _selu_grad),
    "silu": (_silu, _silu_grad),
    "relu": (_relu, _relu_grad),
    "leaky_relu": (_leaky_relu, _leaky_relu_grad),
}


# ---------------------------------------------------------------------------
# Specs and parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpSpec:
    """Architecture hyperparameters for one network.

    ``hidden_dim`` and ``time_embed_dim`` are typically chosen in 64..256;
    smaller values are allowed (tests use tiny nets). ``uses_drift_input``
    makes the state encoder consume the concatenation (x, b) so the
    correction network can condition on the drift value.
    """

    input_dim: int
    output_dim: int
    hidden_dim: int = 64
    time_embed_dim: int = 64
    activation: str = "selu"
    dropout_rate: float = 0.1
    uses_drift_input: bool = False

    def __post_init__(self):
        for name in ("input_dim", "output_dim", "hidden_dim", "time_embed_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.time_embed_dim % 2 != 0:
            raise ValueError("time_embed_dim must be even")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.activation not in ACTIVATIONS:
            raise ValueError(
                f"unknown activation {self.activation!r}; choose from {sorted(ACTIVATIONS)}"
            )

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden_dim": self.hidden_dim,
            "time_embed_dim": self.time_embed_dim,
            "activation": self.activation,
            "dropout_rate": self.dropout_rate,
            "uses_drift_input": self.uses_drift_input,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(**d)


class ParamSet:
    """Named parameter arrays plus flat-vector and byte views."""

    def __init__(self, names: list[str], arrays: list[np.ndarray]):
        if len(names) != len(arrays):
            raise ValueError("names and arrays must align")
        self.names = list(names)
        self.arrays = [np.asarray(a, dtype=float) for a in arrays]

    def __len__(self) -> int:
        return len(self.arrays)

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays)

    @property
    def shape_table(self) -> list[tuple[str, tuple[int, ...]]]:
        return [(n, a.shape) for n, a in zip(self.names, self.arrays)]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays])

    def set_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_params:
            raise ValueError(f"expected {self.n_params} values, got {vec.size}")
        pos = 0
        for a in self.arrays:
            a[...] = vec[pos : pos + a.size].reshape(a.shape)
            pos += a.size

    def copy_arrays(self) -> list[np.ndarray]:
        return [a.copy() for a in self.arrays]

    def tobytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in self.arrays)


# ---------------------------------------------------------------------------
# Time features
# ---------------------------------------------------------------------------


def time_embed(t, dim: int) -> np.ndarray:
    """Sinusoidal features: out[2i] = sin(t w_i), out[2i+1] = cos(t w_i),
    with w_i = 10000^(-2i/dim)."""
    if dim < 2 or dim % 2 != 0:
        raise ValueError("embedding dimension must be an even integer >= 2")
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    i = np.arange(dim // 2)
    omega = 10000.0 ** (-2.0 * i / dim)
    phase = t[:, None] * omega[None, :]
    out = np.empty((t.shape[0], dim))
    out[:, 0::2] = np.sin(phase)
    out[:, 1::2] = np.cos(phase)
    return out[0] if scalar else out


# ---------------------------------------------------------------------------
# Linear stacks
# ---------------------------------------------------------------------------


class _Block:
    """A stack of linear layers; all but (optionally) the last carry
    activation + dropout."""

    def __init__(self, sizes, activation, dropout_rate, bare_last, rng, zero_last=False):
        act, act_grad = ACTIVATIONS[activation]
        self._act, self._act_grad = act, act_grad
        self.dropout_rate = dropout_rate
        self.bare_last = bare_last
        self.weights = []
        self.biases = []
        n_layers = len(sizes) - 1
        for li in range(n_layers):
            fan_in, fan_out = sizes[li], sizes[li + 1]
            bound = np.sqrt(1.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            if zero_last and li == n_layers - 1:
                w = np.zeros((fan_out, fan_in))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x, train, rng, where):
        """Returns (output, cache). ``where`` labels errors."""
        cache = []
        h = x
        for li, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            last = li == self.n_layers - 1
            if last and self.bare_last:
                a, mask = z, None
            else:
                a = self._act(z)
                if train and self.dropout_rate > 0.0:
                    keep = rng.random(a.shape) >= self.dropout_rate
                    mask = keep / (1.0 - self.dropout_rate)
                    a = a * mask
                else:
                    mask = None
            if not np.all(np.isfinite(a)):
                raise NumericsError(f"non-finite activation in {where} layer {li}")
            cache.append((h, z, mask))
            h = a
        return h, cache

    def backward(self, cache, grad_out):
        """Returns (list of (dW, db) per layer, grad wrt block input)."""
        grads = [None] * self.n_layers
        g = grad_out
        for li in range(self.n_layers - 1, -1, -1):
            h, z, mask = cache[li]
            last = li == self.n_layers - 1
            if not (last and self.bare_last):
                if mask is not None:
                    g = g * mask
                g = g * self._act_grad(z)
            dw = g.T @ h
            db = g.sum(axis=0)
            grads[li] = (dw, db)
            g = g @ self.weights[li]
        return grads, g


class _TimeConditionedNet:
    """Shared machinery for the drift and correction networks."""

    block_names = ("x_enc", "t_enc", "head")

    def __init__(self, spec: MlpSpec, rng: Optional[np.random.Generator] = None):
        if rng is None:
            rng = np.random.default_rng(0)
        self.spec = spec
        h = spec.hidden_dim
        state_in = spec.input_dim * (2 if spec.uses_drift_input else 1)
        self.x_enc = _Block(
            [state_in] + [h] * X_ENC_LAYERS,
            spec.activation, spec.dropout_rate, bare_last=False, rng=rng,
        )
        self.t_enc = _Block(
            [spec.time_embed_dim] + [h] * T_ENC_LAYERS,
            spec.activation, spec.dropout_rate, bare_last=False, rng=rng,
        )
        self.head = _Block(
            [2 * h] + [h] * (HEAD_LAYERS - 1) + [spec.output_dim],
            spec.activation, spec.dropout_rate, bare_last=True, rng=rng, zero_last=True,
        )

    # -- parameters ---------------------------------------------------------

    def _blocks(self):
        return (self.x_enc, self.t_enc, self.head)

    def params(self) -> ParamSet:
        names, arrays = [], []
        for bname, block in zip(self.block_names, self._blocks()):
            for li in range(block.n_layers):
                names.append(f"{bname}/{li}/W")
                arrays.append(block.weights[li])
                names.append(f"{bname}/{li}/b")
                arrays.append(block.biases[li])
        return ParamSet(names, arrays)

    def set_param_arrays(self, arrays: list[np.ndarray]) -> None:
        own = self.params().arrays
        if len(arrays) != len(own):
            raise ValueError(f"expected {len(own)} parameter arrays, got {len(arrays)}")
        for dst, src in zip(own, arrays):
            src = np.asarray(src, dtype=float)
            if dst.shape != src.shape:
                raise ValueError(f"parameter shape mismatch: {dst.shape} vs {src.shape}")
            dst[...] = src

    # -- forward / backward -------------------------------------------------

    def _prepare(self, t, x, extra):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise ValueError("x must be a 2-D batch of states")
        if x.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"state dimension {x.shape[1]} does not match spec input_dim "
                f"{self.spec.input_dim}"
            )
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            t = np.full(x.shape[0], float(t))
        if t.shape != (x.shape[0],):
            raise ValueError("t must be a scalar or one value per row of x")
        if self.spec.uses_drift_input:
            if extra is None:
                raise ValueError("this network expects a drift value input")
            extra = np.asarray(extra, dtype=float)
            if extra.shape != x.shape:
                raise ValueError("drift value input must match the state shape")
            net_in = np.concatenate([x, extra], axis=1)
        else:
            net_in = x
        return t, net_in

    def forward(self, t, x, extra=None, train=False, rng=None):
        """Returns (output, cache)."""
        if train and self.spec.dropout_rate > 0.0 and rng is None:
            raise ValueError("train-mode forward with dropout needs an rng")
        t, net_in = self._prepare(t, x, extra)
        emb = time_embed(t, self.spec.time_embed_dim)
        hx, cx = self.x_enc.forward(net_in, train, rng, "x_enc")
        ht, ct = self.t_enc.forward(emb, train, rng, "t_enc")
        joint = np.concatenate([hx, ht], axis=1)
        out, ch = self.head.forward(joint, train, rng, "head")
        return out, (cx, ct, ch)

    def backward(self, cache, grad_out) -> list[np.ndarray]:
        """Parameter gradients (same order as :meth:`params`) from an output
        cotangent."""
        cx, ct, ch = cache
        h = self.spec.hidden_dim
        head_grads, g_joint = self.head.backward(ch, grad_out)
        x_grads, _ = self.x_enc.backward(cx, g_joint[:, :h])
        t_grads, _ = self.t_enc.backward(ct, g_joint[:, h:])
        out = []
        for grads in (x_grads, t_grads, head_grads):
            for dw, db in grads:
                out.append(dw)
                out.append(db)
        return out


class DriftNet(_TimeConditionedNet):
    """Learned drift b(t, x). Zero final layer makes the initial net return 0."""

    def __init__(self, spec: MlpSpec, rng=None):
        if spec.uses_drift_input:
            raise ValueError("drift networks do not take a drift input")
        super().__init__(spec, rng)

    def __call__(self, t, x, train=False, rng=None):
        out, _ = self.forward(t, x, train=train, rng=rng)
        return out


class DoobNet(_TimeConditionedNet):
    """Endpoint-score correction m(t, x[, b]).

    The drift value ``b`` is consumed as a constant feature: no gradient is
    ever propagated from this network back into the drift parameters.
    """

    def __call__(self, t, x, b_value=None, train=False, rng=None):
        extra = b_value if self.spec.uses_drift_input else None
        out, _ = self.forward(t, x, extra=extra, train=train, rng=rng)
        return out


def make_drift_spec(d: int, **overrides) -> MlpSpec:
    return MlpSpec(input_dim=d, output_dim=d, **overrides)


def make_doob_spec(d: int, uses_drift_input: bool = True, **overrides) -> MlpSpec:
    return MlpSpec(input_dim=d, output_dim=d, uses_drift_input=uses_drift_input, **overrides)
