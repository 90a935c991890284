"""Actor and critic networks in plain numpy with analytic gradients.

Layout: each history vector goes through its own width-3 1-D convolution,
each scalar feature through its own dense layer; the ReLU outputs are
concatenated into a single dense output layer.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .state import HISTORY, N_ACTIONS

N_HIST = 5
N_SCALAR = 4
KERNEL = 3
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class NetShape:
    history: int = HISTORY
    filters: int = 128
    hidden: int = 128
    n_out: int = N_ACTIONS

    @property
    def conv_len(self) -> int:
        return self.history - KERNEL + 1

    @property
    def concat(self) -> int:
        return N_HIST * self.conv_len * self.filters + N_SCALAR * self.hidden


PARAM_NAMES = ("conv_w", "conv_b", "dense_w", "dense_b", "out_w", "out_b")


class Network:
    """Shared trunk plus a linear output layer; ``params`` is a name->array dict."""

    def __init__(self, shape: NetShape, params: dict):
        self.shape = shape
        self.params = params

    @classmethod
    def init(cls, shape: NetShape, rng: np.random.Generator, dtype=np.float32, zero_output=False):
        def unif(fan_in, size):
            lim = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-lim, lim, size=size).astype(dtype)

        p = {
            "conv_w": unif(KERNEL, (N_HIST, shape.filters, KERNEL)),
            "conv_b": np.zeros((N_HIST, shape.filters), dtype=dtype),
            "dense_w": unif(1, (N_SCALAR, shape.hidden)),
            "dense_b": np.zeros((N_SCALAR, shape.hidden), dtype=dtype),
            "out_w": unif(shape.concat, (shape.concat, shape.n_out)),
            "out_b": np.zeros(shape.n_out, dtype=dtype),
        }
        if zero_output:
            p["out_w"][:] = 0
        return cls(shape, p)

    def copy(self) -> "Network":
        return Network(self.shape, {k: v.copy() for k, v in self.params.items()})

    @property
    def dtype(self):
        return self.params["out_w"].dtype

    def _windows(self, hist):
        k = self.shape.conv_len
        return np.stack([hist[:, :, i:i + KERNEL] for i in range(k)], axis=2)  # (B, 5, k, 3)

    def forward(self, hist, scal):
        """Return output ``(B, n_out)`` and a cache for :meth:`backward`."""
        p = self.params
        hist = np.asarray(hist, dtype=self.dtype)
        scal = np.asarray(scal, dtype=self.dtype)
        if hist.ndim == 2:
            hist, scal = hist[None], scal[None]
        X = self._windows(hist)
        conv = np.einsum("bjkw,jfw->bjkf", X, p["conv_w"]) + p["conv_b"][None, :, None, :]
        conv = np.maximum(conv, 0)
        dense = np.maximum(scal[:, :, None] * p["dense_w"][None] + p["dense_b"][None], 0)
        B = hist.shape[0]
        z = np.concatenate([conv.reshape(B, -1), dense.reshape(B, -1)], axis=1)
        out = z @ p["out_w"] + p["out_b"]
        return out, (X, scal, conv, dense, z)

    def backward(self, dout, cache) -> dict:
        X, scal, conv, dense, z = cache
        p = self.params
        B = z.shape[0]
        g = {"out_w": z.T @ dout, "out_b": dout.sum(axis=0)}
        dz = dout @ p["out_w"].T
        n_conv = conv[0].size
        dconv = dz[:, :n_conv].reshape(conv.shape) * (conv > 0)
        ddense = dz[:, n_conv:].reshape(dense.shape) * (dense > 0)
        g["conv_w"] = np.einsum("bjkf,bjkw->jfw", dconv, X)
        g["conv_b"] = dconv.sum(axis=(0, 2))
        g["dense_w"] = (ddense * scal[:, :, None]).sum(axis=0)
        g["dense_b"] = ddense.sum(axis=0)
        return g


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class PolicyParams:
    actor: Network
    critic: Network

    @classmethod
    def init(cls, seed: int = 0, shape: NetShape = NetShape(), dtype=np.float32, zero_output=False):
        rng = np.random.default_rng(seed)
        actor = Network.init(shape, rng, dtype, zero_output)
        critic = Network.init(NetShape(shape.history, shape.filters, shape.hidden, 1), rng, dtype, zero_output)
        return cls(actor, critic)

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.actor.copy(), self.critic.copy())

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for net in (self.actor, self.critic) for v in net.params.values())


def policy_forward(state, params: PolicyParams) -> np.ndarray:
    """Action distribution for one :class:`AbrState`."""
    h, s = state.features()
    logits, _ = params.actor.forward(h, s)
    return softmax(logits.astype(np.float64))[0]


def critic_forward(state, params: PolicyParams) -> float:
    h, s = state.features()
    v, _ = params.critic.forward(h, s)
    return float(v[0, 0])


# Binary layout: b"OFBP", u32 version, u32 layer count, then per array
# u32 ndim, ndim x u32 dims, little-endian float32 data. Actor arrays come
# first, then critic arrays, each in PARAM_NAMES order.
MAGIC = b"OFBP"
VERSION = 1


def save_params(params: PolicyParams, path):
    arrays = [params.actor.params[n] for n in PARAM_NAMES] + [params.critic.params[n] for n in PARAM_NAMES]
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<II", VERSION, len(arrays)))
        for a in arrays:
            f.write(struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_params(path) -> PolicyParams:
    from ..flowfield import InputError

    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise InputError(f"{path}: not a policy file")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION or count != 2 * len(PARAM_NAMES):
        raise InputError(f"{path}: unsupported policy file (version {version}, {count} arrays)")
    off = 12
    arrays = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<I", data, off)
        shape = struct.unpack_from(f"<{ndim}I", data, off + 4)
        off += 4 + 4 * ndim
        n = int(np.prod(shape))
        arrays.append(np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(shape).astype(np.float32))
        off += 4 * n
    actor = dict(zip(PARAM_NAMES, arrays[:6]))
    critic = dict(zip(PARAM_NAMES, arrays[6:]))
    conv_w, dense_w, out_w = actor["conv_w"], actor["dense_w"], actor["out_w"]
    history = (out_w.shape[0] - N_SCALAR * dense_w.shape[1]) // (N_HIST * conv_w.shape[1]) + KERNEL - 1
    shape = NetShape(history, conv_w.shape[1], dense_w.shape[1], out_w.shape[1])
    cshape = NetShape(history, conv_w.shape[1], dense_w.shape[1], 1)
    return PolicyParams(Network(shape, actor), Network(cshape, critic))
