"""Feed-forward networks with hand-written backprop and flat parameter vectors.

Weights are stored as ``(fan_in, fan_out)`` so a batch ``x @ W + b`` works for
both a single observation (1-D) and a minibatch (2-D).
"""
from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

_MAGIC = b"EXPLFLAT"
_VERSION = 1


def relu(x):
    return np.maximum(x, 0.0)


class MlpNet:
    """Fully connected ReLU net with a linear output layer."""

    def __init__(self, sizes, params=None, rng=None):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if params is None:
            if rng is None:
                raise ValueError("either params or rng is required")
            params = []
            for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
                bound = 1.0 / math.sqrt(fan_in)
                params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
                params.append(rng.uniform(-bound, bound, size=(fan_out,)))
        self.params = [np.asarray(p, dtype=np.float64) for p in params]
        for p, (name, shape) in zip(self.params, self.layout("")):
            if p.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {p.shape}")

    @classmethod
    def zeros(cls, sizes):
        sizes = tuple(sizes)
        params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            params += [np.zeros((fan_in, fan_out)), np.zeros(fan_out)]
        return cls(sizes, params)

    @property
    def input_dim(self):
        return self.sizes[0]

    @property
    def output_dim(self):
        return self.sizes[-1]

    @property
    def num_params(self):
        return sum(p.size for p in self.params)

    def layout(self, prefix):
        entries = []
        n_layers = len(self.sizes) - 1
        for k, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            part = "head" if k == n_layers - 1 else f"trunk.{k}"
            entries.append((f"{prefix}{part}.weight", (fan_in, fan_out)))
            entries.append((f"{prefix}{part}.bias", (fan_out,)))
        return entries

    def forward(self, x):
        """Return ``(output, cache)``; the cache feeds :meth:`backward`."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"input has dimension {x.shape[-1]}, expected {self.input_dim}")
        acts = [x]
        h = x
        n_layers = len(self.params) // 2
        for k in range(n_layers):
            z = h @ self.params[2 * k] + self.params[2 * k + 1]
            h = relu(z) if k < n_layers - 1 else z
            acts.append(h)
        return h, acts

    def __call__(self, x):
        """Forward pass without the backprop cache."""
        p = self.params
        h = x
        last = len(p) - 2
        for k in range(0, last, 2):
            h = h @ p[k] + p[k + 1]
            np.maximum(h, 0.0, out=h)
        return h @ p[last] + p[last + 1]

    def backward(self, cache, dout):
        """Gradients of a scalar loss w.r.t. every parameter, given dL/d(output).

        ``cache`` holds post-activation values; ``h > 0`` is the ReLU mask
        because ``relu(z) > 0`` iff ``z > 0``.
        """
        n_layers = len(self.params) // 2
        grads = [None] * len(self.params)
        delta = np.asarray(dout, dtype=np.float64)
        for k in reversed(range(n_layers)):
            h_in = cache[k]
            if h_in.ndim == 1:
                grads[2 * k] = np.outer(h_in, delta)
                grads[2 * k + 1] = delta.copy()
            else:
                grads[2 * k] = h_in.T @ delta
                grads[2 * k + 1] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.params[2 * k].T) * (h_in > 0.0)
        return grads


class GaussianPolicy:
    """Diagonal Gaussian policy with a state-independent learnable log-std."""

    def __init__(self, mean_net, log_std, action_low, action_high):
        self.mean_net = mean_net
        self.log_std = np.asarray(log_std, dtype=np.float64)
        self.action_low = np.asarray(action_low, dtype=np.float64)
        self.action_high = np.asarray(action_high, dtype=np.float64)
        if self.log_std.shape != (mean_net.output_dim,):
            raise ValueError("log_std length must equal the action dimension")

    @classmethod
    def create(cls, obs_dim, act_dim, action_low, action_high, rng, hidden=(64, 64)):
        net = MlpNet((obs_dim, *hidden, act_dim), rng=rng)
        return cls(net, np.zeros(act_dim), action_low, action_high)

    @property
    def obs_dim(self):
        return self.mean_net.input_dim

    @property
    def act_dim(self):
        return self.mean_net.output_dim

    def layout(self):
        return self.mean_net.layout("policy.") + [("policy.log_std", (self.act_dim,))]

    @property
    def params(self):
        return self.mean_net.params + [self.log_std]

    def clip_action(self, action):
        return np.clip(action, self.action_low, self.action_high)


class ValueNet:
    def __init__(self, net):
        if net.output_dim != 1:
            raise ValueError("value network must have a scalar output")
        self.net = net

    @classmethod
    def create(cls, obs_dim, rng, hidden=(64, 64)):
        return cls(MlpNet((obs_dim, *hidden, 1), rng=rng))

    def layout(self):
        return self.net.layout("value.")

    @property
    def params(self):
        return self.net.params

    def forward(self, obs):
        out, cache = self.net.forward(obs)
        return out[..., 0], cache

    def __call__(self, obs):
        return self.forward(obs)[0]


def policy_forward(policy, obs):
    """Mean action and (state-independent) log-std for ``obs``."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape[-1] != policy.obs_dim:
        raise ValueError(f"observation has dimension {obs.shape[-1]}, expected {policy.obs_dim}")
    mean = policy.mean_net(obs)
    if not np.all(np.isfinite(mean)):
        raise FloatingPointError("policy produced a non-finite mean")
    return mean, policy.log_std


def gaussian_log_prob(mean, log_std, action):
    """Log density of a diagonal Gaussian, summed over the last axis."""
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if mean.shape[-1] != action.shape[-1] or log_std.shape[-1] != mean.shape[-1]:
        raise ValueError("mean, log_std and action must have equal trailing length")
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(log_std)) and np.all(np.isfinite(action))):
        raise ValueError("non-finite input to gaussian_log_prob")
    z = (action - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - HALF_LOG_2PI, axis=-1)


def gaussian_entropy(log_std):
    log_std = np.asarray(log_std, dtype=np.float64)
    if not np.all(np.isfinite(log_std)):
        raise ValueError("non-finite log_std")
    return float(np.sum(0.5 + HALF_LOG_2PI + log_std))


@dataclass(frozen=True)
class FlatParams:
    values: np.ndarray
    layout: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("FlatParams values must be a 1-D vector")
        layout = tuple((str(name), tuple(int(d) for d in shape)) for name, shape in self.layout)
        expected = sum(_prod(shape) for _, shape in layout)
        if values.size != expected:
            raise ValueError(f"layout describes {expected} values but vector has {values.size}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "layout", layout)

    def __len__(self):
        return self.values.size

    def with_values(self, values):
        return FlatParams(np.array(values, dtype=np.float64), self.layout)

    def arrays(self):
        out = {}
        offset = 0
        for name, shape in self.layout:
            n = _prod(shape)
            out[name] = self.values[offset:offset + n].reshape(shape)
            offset += n
        return out

    def checksum(self):
        return hashlib.sha256(self.values.tobytes()).hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, FlatParams):
            return NotImplemented
        return self.layout == other.layout and np.array_equal(self.values, other.values)

    __hash__ = None


def _prod(shape):
    n = 1
    for d in shape:
        n *= d
    return n


def flatten(policy, value=None):
    """Concatenate parameters in the fixed order: policy trunk, head, log_std, value."""
    layout = policy.layout()
    arrays = policy.params
    if value is not None:
        layout = layout + value.layout()
        arrays = arrays + value.params
    values = np.concatenate([np.ravel(a) for a in arrays]) if arrays else np.zeros(0)
    return FlatParams(values, tuple(layout))


def flatten_grads(grads):
    return np.concatenate([np.ravel(g) for g in grads])


def _sizes_from_layout(layout, prefix):
    weights = [shape for name, shape in layout if name.startswith(prefix) and name.endswith(".weight")]
    if not weights:
        raise ValueError(f"layout has no '{prefix}' weights")
    return (weights[0][0],) + tuple(s[1] for s in weights)


def unflatten(flat, action_low=None, action_high=None):
    """Rebuild ``(policy, value_or_None)``; arrays are copies of ``flat.values``."""
    arrays = flat.arrays()
    names = [name for name, _ in flat.layout]
    sizes = _sizes_from_layout(flat.layout, "policy.")
    expected = MlpNet.zeros(sizes).layout("policy.") + [("policy.log_std", (sizes[-1],))]
    has_value = any(n.startswith("value.") for n in names)
    if has_value:
        vsizes = _sizes_from_layout(flat.layout, "value.")
        expected = expected + MlpNet.zeros(vsizes).layout("value.")
    if list(flat.layout) != expected:
        raise ValueError("layout does not match the policy/value structure")
    policy_arrays = [arrays[n].copy() for n, _ in expected if n.startswith("policy.")]
    act_dim = sizes[-1]
    low = -np.inf * np.ones(act_dim) if action_low is None else action_low
    high = np.inf * np.ones(act_dim) if action_high is None else action_high
    policy = GaussianPolicy(MlpNet(sizes, policy_arrays[:-1]), policy_arrays[-1], low, high)
    value = None
    if has_value:
        value = ValueNet(MlpNet(vsizes, [arrays[n].copy() for n, _ in expected if n.startswith("value.")]))
    return policy, value


def policy_param_count(obs_dim, act_dim, hidden=(64, 64)):
    sizes = (obs_dim, *hidden, act_dim)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])) + act_dim


# -- serialization -----------------------------------------------------------

def save_flat(flat, path):
    """Binary format: magic(8) + version u32 + entry count u32, layout table, float64 LE data."""
    parts = [_MAGIC, struct.pack("<II", _VERSION, len(flat.layout))]
    for name, shape in flat.layout:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<q", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<q", len(shape)))
        parts.append(struct.pack(f"<{len(shape)}q", *shape))
    parts.append(flat.values.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_flat(path):
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != _MAGIC:
        raise ValueError(f"{path}: not a FlatParams file")
    version, count = struct.unpack_from("<II", data, 8)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    pos = 16
    layout = []
    for _ in range(count):
        (n,) = struct.unpack_from("<q", data, pos)
        pos += 8
        name = data[pos:pos + n].decode("utf-8")
        pos += n
        (rank,) = struct.unpack_from("<q", data, pos)
        pos += 8
        shape = struct.unpack_from(f"<{rank}q", data, pos)
        pos += 8 * rank
        layout.append((name, tuple(shape)))
    values = np.frombuffer(data, dtype="<f8", offset=pos).astype(np.float64)
    return FlatParams(values, tuple(layout))


def flat_to_json(flat):
    return json.dumps({
        "layout": [[name, list(shape)] for name, shape in flat.layout],
        "values": flat.values.tolist(),
    })


def flat_from_json(text):
    obj = json.loads(text)
    return FlatParams(np.array(obj["values"], dtype=np.float64),
                      tuple((name, tuple(shape)) for name, shape in obj["layout"]))
