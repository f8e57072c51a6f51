"""Dense ReLU multilayer perceptron with hand-written backprop and Adam.

Parameters are stored as float32; matrix products run in the dtype of the
inputs and parameters, so casting both to float64 gives a wide-precision
evaluation of the same network (used by the gradient checks).
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

from padfall.errors import ConfigError, UsageError

ACTOR_HIDDEN = (512, 512, 256, 128)
MAGIC = b"PADFALL1"
FORMAT_VERSION = 1
_ACT_CODES = {"relu": 0, "linear": 1, "tanh": 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dims: tuple = ACTOR_HIDDEN
    output_dim: int = 3
    hidden_activation: str = "relu"
    output_activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigError("all layer sizes must be >= 1")
        if self.hidden_activation != "relu":
            raise ConfigError("hidden layers use relu")
        if self.output_activation not in ("tanh", "linear"):
            raise ConfigError("output_activation must be 'tanh' or 'linear'")

    @property
    def layer_dims(self) -> list:
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        return list(zip(dims[:-1], dims[1:]))

    @classmethod
    def actor(cls, obs_dim: int = 15, action_dim: int = 3, hidden=ACTOR_HIDDEN) -> "MlpSpec":
        return cls(obs_dim, tuple(hidden), action_dim, "relu", "tanh")

    @classmethod
    def critic(cls, obs_dim: int = 15, action_dim: int = 3, hidden=ACTOR_HIDDEN) -> "MlpSpec":
        return cls(obs_dim + action_dim, tuple(hidden), 1, "relu", "linear")


_uid = itertools.count()


@dataclass(frozen=True, eq=False)
class ParamSet:
    """Per-layer ``(weights, bias)``; weights are ``(fan_in, fan_out)``."""

    weights: tuple
    biases: tuple
    uid: int = field(default_factory=lambda: next(_uid))

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_arrays(cls, arrays) -> "ParamSet":
        arrays = list(arrays)
        return cls(tuple(arrays[0::2]), tuple(arrays[1::2]))

    def astype(self, dtype) -> "ParamSet":
        return ParamSet.from_arrays(a.astype(dtype) for a in self.arrays())

    def copy(self) -> "ParamSet":
        return ParamSet.from_arrays(a.copy() for a in self.arrays())

    def count(self) -> int:
        return sum(a.size for a in self.arrays())

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def equals(self, other: "ParamSet") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def check_shapes(params: ParamSet, spec: MlpSpec) -> None:
    dims = spec.layer_dims
    if len(params.weights) != len(dims):
        raise UsageError(f"expected {len(dims)} layers, got {len(params.weights)}")
    for (n_in, n_out), w, b in zip(dims, params.weights, params.biases):
        if w.shape != (n_in, n_out) or b.shape != (n_out,):
            raise UsageError(f"layer shape {w.shape}/{b.shape} does not match ({n_in}, {n_out})")


def init_params(spec: MlpSpec, rng: np.random.Generator) -> ParamSet:
    """Kaiming-uniform hidden layers (variance 2/fan_in), zero biases.

    The output layer uses the smaller ``U(+-1/sqrt(fan_in))`` range so a fresh
    tanh actor does not start saturated.
    """
    weights, biases = [], []
    dims = spec.layer_dims
    for i, (n_in, n_out) in enumerate(dims):
        bound = np.sqrt(6.0 / n_in) if i < len(dims) - 1 else 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)).astype(np.float32))
        biases.append(np.zeros(n_out, dtype=np.float32))
    return ParamSet(tuple(weights), tuple(biases))


@dataclass(frozen=True)
class ForwardCache:
    params_uid: int
    inputs: tuple  # input to each layer
    pre_activations: tuple
    output: np.ndarray
    squeeze: bool


def forward(params: ParamSet, spec: MlpSpec, x):
    """Return ``(output, cache)``; ``x`` is a single row or a batch."""
    x = np.asarray(x)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[-1] != spec.input_dim:
        raise UsageError(f"input has {x.shape[-1]} features, network expects {spec.input_dim}")
    if x.dtype != params.weights[0].dtype:
        x = x.astype(params.weights[0].dtype)
    inputs, pres = [], []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w + b
        pres.append(z)
        if i < last:
            h = np.maximum(z, 0)
        elif spec.output_activation == "tanh":
            h = np.tanh(z)
        else:
            h = z
    cache = ForwardCache(params.uid, tuple(inputs), tuple(pres), h, squeeze)
    return (h[0] if squeeze else h), cache


def predict(params: ParamSet, spec: MlpSpec, x):
    return forward(params, spec, x)[0]


def backward(params: ParamSet, spec: MlpSpec, cache: ForwardCache, output_gradient):
    """Reverse-mode gradients of ``sum(output * output_gradient)``.

    Returns ``(grads, input_gradient)`` with ``grads`` a ``ParamSet`` of the
    same shapes as ``params``.
    """
    if cache.params_uid != params.uid:
        raise UsageError("cache was produced by a different parameter set")
    g = np.asarray(output_gradient, dtype=cache.output.dtype)
    if cache.squeeze and g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.output.shape:
        raise UsageError(f"output gradient shape {g.shape} != output shape {cache.output.shape}")
    if spec.output_activation == "tanh":
        g = g * (1.0 - cache.output * cache.output)
    n = len(params.weights)
    gw, gb = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        gw[i] = cache.inputs[i].T @ g
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i].T
        if i > 0:
            g = g * (cache.pre_activations[i - 1] > 0)
    grads = ParamSet(tuple(gw), tuple(gb))
    return grads, (g[0] if cache.squeeze else g)


@dataclass(frozen=True)
class AdamState:
    step: int
    m: tuple
    v: tuple
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: ParamSet, learning_rate: float = 1e-4, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        zeros = tuple(np.zeros_like(a) for a in params.arrays())
        return cls(0, zeros, zeros, learning_rate, beta1, beta2, epsilon)


def adam_update(params: ParamSet, grads: ParamSet, state: AdamState):
    """One bias-corrected Adam step; returns new ``(params, state)``."""
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        if p.shape != g.shape:
            raise UsageError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        g = g.astype(p.dtype, copy=False)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        step = state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
        new_p.append((p - step).astype(p.dtype, copy=False))
        new_m.append(m.astype(p.dtype, copy=False))
        new_v.append(v.astype(p.dtype, copy=False))
    new_state = AdamState(t, tuple(new_m), tuple(new_v), state.learning_rate, b1, b2, state.epsilon)
    return ParamSet.from_arrays(new_p), new_state


def soft_update(target: ParamSet, online: ParamSet, tau: float) -> ParamSet:
    """``tau * online + (1 - tau) * target`` per coordinate."""
    return ParamSet.from_arrays(
        (tau * o + (1.0 - tau) * t).astype(t.dtype, copy=False) for t, o in zip(target.arrays(), online.arrays())
    )


def save_checkpoint(path, params: ParamSet, spec: MlpSpec) -> None:
    """Binary layout (all little-endian):

    ``PADFALL1`` | u32 version | u32 input_dim | u32 output_dim | u32 n_hidden |
    u32 hidden_dims[n_hidden] | u8 hidden_act | u8 output_act | then per layer
    the weight matrix row-major ``(fan_in, fan_out)`` followed by its bias, as f32.
    """
    check_shapes(params, spec)
    header = MAGIC + struct.pack(
        f"<4I{len(spec.hidden_dims)}I2B",
        FORMAT_VERSION,
        spec.input_dim,
        spec.output_dim,
        len(spec.hidden_dims),
        *spec.hidden_dims,
        _ACT_CODES[spec.hidden_activation],
        _ACT_CODES[spec.output_activation],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(params, spec)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ConfigError(f"{path}: not a checkpoint (bad magic)")
    version, n_in, n_out, n_hidden = struct.unpack_from("<4I", data, 8)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {version}")
    offset = 8 + 16
    hidden = struct.unpack_from(f"<{n_hidden}I", data, offset)
    offset += 4 * n_hidden
    hid_act, out_act = struct.unpack_from("<2B", data, offset)
    offset += 2
    spec = MlpSpec(n_in, hidden, n_out, _ACT_NAMES[hid_act], _ACT_NAMES[out_act])
    arrays = []
    for fan_in, fan_out in spec.layer_dims:
        for shape in ((fan_in, fan_out), (fan_out,)):
            count = int(np.prod(shape))
            arrays.append(np.frombuffer(data, dtype="<f4", count=count, offset=offset).astype(np.float32).reshape(shape))
            offset += 4 * count
    if offset != len(data):
        raise ConfigError(f"{path}: trailing bytes after parameters")
    return ParamSet.from_arrays(arrays), spec
