"""DeepHV: a hypervolume model equivariant to objective scalings and to
permutations of objectives and solutions.

The input set is divided by its row scale, pushed through five equivariant
layers, mean-pooled, squashed by a logistic function and multiplied back by
the product of the row scales.

Batches of sets with different N are packed side by side along the column
axis; per-set reductions (row scales, column means) are segment reductions, so
no padding enters any mean.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from hvkit.hypervolume import as_solution_set

LEAK = 0.01
N_LAYERS = 5
#: Set sizes above this were never seen in training.
TRAINED_MAX_POINTS = 100

MAGIC = b"DHV1"
FORMAT_VERSION = 1


class CapacityWarning(UserWarning):
    """Input set is larger than anything the model was trained on."""


class WeightFileError(ValueError):
    pass


@dataclass
class LayerWeights:
    """One equivariant layer.

    ``w[k]`` is the ``(out, in)`` matrix for term ``k + 1``: the element-wise
    term, the mean over objectives, the mean over solutions and the grand
    mean.  ``bias`` is per output channel and, like the other terms, is
    multiplied by the input channels' row scales.
    """

    w: np.ndarray
    bias: np.ndarray

    @property
    def in_channels(self) -> int:
        return self.w.shape[2]

    @property
    def out_channels(self) -> int:
        return self.w.shape[1]

    @classmethod
    def zeros(cls, in_channels: int, out_channels: int) -> LayerWeights:
        return cls(np.zeros((4, out_channels, in_channels)), np.zeros(out_channels))


@dataclass
class NetworkWeights:
    channels: int
    layers: list[LayerWeights] = field(default_factory=list)
    leak: float = LEAK

    def __post_init__(self):
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if len(self.layers) != N_LAYERS:
            raise ValueError(f"expected {N_LAYERS} layers, got {len(self.layers)}")
        for k, (lw, (i, o)) in enumerate(zip(self.layers, layer_shapes(self.channels))):
            if lw.w.shape != (4, o, i) or lw.bias.shape != (o,):
                raise ValueError(
                    f"layer {k}: expected w {(4, o, i)} and bias {(o,)}, "
                    f"got {lw.w.shape} and {lw.bias.shape}"
                )

    @classmethod
    def zeros(cls, channels: int, leak: float = LEAK) -> NetworkWeights:
        return cls(channels, [LayerWeights.zeros(i, o) for i, o in layer_shapes(channels)], leak)

    def params(self) -> list[np.ndarray]:
        """The parameter arrays, in a fixed order (views, not copies)."""
        out = []
        for lw in self.layers:
            out.extend((lw.w, lw.bias))
        return out

    def copy(self) -> NetworkWeights:
        return NetworkWeights(
            self.channels,
            [LayerWeights(lw.w.copy(), lw.bias.copy()) for lw in self.layers],
            self.leak,
        )

    def n_params(self) -> int:
        return sum(p.size for p in self.params())


def layer_shapes(channels: int) -> list[tuple[int, int]]:
    """``(in, out)`` channel counts of the five layers."""
    c = channels
    return [(1, c), (c, c), (c, c), (c, c), (c, 1)]


def param_count(channels: int) -> int:
    """Number of trainable parameters of a DeepHV-``channels`` model.

    Each layer has four weights per (output, input) channel pair and one bias
    per output channel: ``12 c^2 + 12 c + 1`` in total.
    """
    if channels < 1:
        raise ValueError("channels must be >= 1")
    return sum(4 * i * o + o for i, o in layer_shapes(channels))


def init_weights(channels: int, seed: int = 0, leak: float = LEAK) -> NetworkWeights:
    """Uniform ``[-a, a]`` weights with ``a = sqrt(in_channels / 5)``, biases in ``[-b, b]``.

    The weight bound is the usual ``1 / sqrt(fan_in)`` with ``fan_in = 5 * in``,
    multiplied by ``in`` because each layer averages (rather than sums) over
    its input channels.  A bias multiplies the mean row scale of the input, a
    single term, so its bound ``b = 1 / sqrt(5)`` does not grow with width;
    otherwise activations grow like ``sqrt(in / 5)`` per layer and wide models
    start with vanishing inner gradients.
    """
    rng = np.random.default_rng(seed)
    layers = []
    b = np.sqrt(1.0 / 5.0)
    for i, o in layer_shapes(channels):
        a = np.sqrt(i / 5.0)
        layers.append(LayerWeights(rng.uniform(-a, a, (4, o, i)), rng.uniform(-b, b, o)))
    return NetworkWeights(channels, layers, leak)


def row_scale(values) -> np.ndarray:
    """Per-objective maximum absolute value."""
    Y = as_solution_set(values)
    if Y.shape[1] == 0:
        return np.zeros(Y.shape[0])
    return np.abs(Y).max(axis=1)


def rescale(values) -> tuple[np.ndarray, np.ndarray]:
    """Divide every row by its row scale; returns ``(unit_set, scale)``."""
    Y = as_solution_set(values)
    s = row_scale(Y)
    if Y.shape[1] == 0 or np.any(s == 0):
        raise ValueError("cannot rescale a set with an all-zero row")
    return Y / s[:, None], s


# -- packed batch machinery ---------------------------------------------------


@dataclass
class _Segments:
    starts: np.ndarray  # (R,)
    counts: np.ndarray  # (R,)
    col_rec: np.ndarray  # (T,)

    @classmethod
    def from_counts(cls, counts) -> _Segments:
        counts = np.asarray(counts, dtype=np.intp)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.intp)
        return cls(starts, counts, np.repeat(np.arange(counts.size), counts))

    def max(self, A: np.ndarray) -> np.ndarray:
        return np.maximum.reduceat(A, self.starts, axis=-1)

    def min(self, A: np.ndarray) -> np.ndarray:
        return np.minimum.reduceat(A, self.starts, axis=-1)

    def sum(self, A: np.ndarray) -> np.ndarray:
        return np.add.reduceat(A, self.starts, axis=-1)

    def expand(self, A: np.ndarray) -> np.ndarray:
        return np.repeat(A, self.counts, axis=-1)


def _mix(w: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Channel mixing: ``out[o, ...] = sum_i w[o, i] * A[i, ...]``."""
    return (w @ A.reshape(A.shape[0], -1)).reshape((w.shape[0],) + A.shape[1:])


def _contract(G: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Weight gradient: ``out[o, i] = sum G[o, ...] * A[i, ...]``."""
    return G.reshape(G.shape[0], -1) @ A.reshape(A.shape[0], -1).T


def _inverse(s: np.ndarray) -> np.ndarray:
    return np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)


def _layer_fwd(H, lw: LayerWeights, leak: float, seg: _Segments, pool: str = "mean"):
    n_in, m_dim, _ = H.shape
    s = seg.max(np.abs(H))
    S = seg.expand(s)
    # zero rows (all-zero channel) stay zero rather than dividing by zero
    X = H * seg.expand(_inverse(s))
    if pool == "mean":
        rm = X.mean(axis=1)
        cm = seg.sum(X) / seg.counts.astype(X.dtype)
        gm = cm.mean(axis=1)
    elif pool == "max":
        rm = X.max(axis=1)
        cm = seg.max(X)
        gm = cm.max(axis=1)
    elif pool == "min":
        rm = X.min(axis=1)
        cm = seg.min(X)
        gm = cm.min(axis=1)
    else:
        raise ValueError(f"unknown pooling {pool!r}")
    Q = S * rm[:, None, :]
    A3 = s * cm
    A4 = s * gm[:, None, :]
    A5 = s.sum(axis=0)
    w1, w2, w3, w4 = lw.w
    P = _mix(w1, H)
    P += _mix(w2, Q)
    Pr = _mix(w3, A3) + _mix(w4, A4) + lw.bias[:, None, None] * A5[None]
    P += seg.expand(Pr)
    P *= 1.0 / n_in
    Z = np.maximum(P, leak * P) if 0.0 <= leak <= 1.0 else np.where(P > 0, P, leak * P)
    cache = (H, s, S, X, rm, cm, gm, Q, A3, A4, A5, P)
    return Z, cache


def _layer_bwd(dZ, cache, lw: LayerWeights, leak: float, seg: _Segments, need_input: bool):
    H, s, S, X, rm, cm, gm, Q, A3, A4, A5, P = cache
    n_in, m_dim, _ = H.shape
    # kink at exactly zero takes the negative-branch slope
    slope = np.greater(P, 0).astype(P.dtype)
    slope *= (1.0 - leak) / n_in
    slope += leak / n_in
    dP = dZ * slope
    dPr = seg.sum(dP)
    gw = np.empty_like(lw.w)
    gw[0] = _contract(dP, H)
    gw[1] = _contract(dP, Q)
    gw[2] = _contract(dPr, A3)
    gw[3] = _contract(dPr, A4)
    gb = np.einsum("omr,mr->o", dPr, A5)
    if not need_input:
        return None, gw, gb
    w1, w2, w3, w4 = lw.w
    dH = _mix(w1.T, dP)
    dQ = _mix(w2.T, dP)
    dA3 = _mix(w3.T, dPr)
    dA4 = _mix(w4.T, dPr)
    dA5 = np.tensordot(lw.bias, dPr, axes=1)
    ds = dA3 * cm + dA4 * gm[:, None, :] + dA5[None]
    dcm = dA3 * s + (dA4 * s).sum(axis=1, keepdims=True) / m_dim
    drm = np.einsum("imt,imt->it", dQ, S)
    inv_s = _inverse(s)
    # dX = expand(dcm / counts) + drm / M, pushed through X = H / S
    dX = seg.expand(dcm / seg.counts.astype(dcm.dtype))
    dX += drm[:, None, :] * (1.0 / m_dim)
    dX *= seg.expand(inv_s)
    dH += dX
    # gradient w.r.t. the row scale: Q term plus the X = H / S term
    dS = dQ
    dS *= rm[:, None, :]
    dX *= X
    dS -= dX
    ds += seg.sum(dS)
    # row scale is a max of |H|: route its gradient to the arg-max entries
    hit = np.equal(np.abs(H), S)
    hit &= S > 0
    hit = hit.astype(H.dtype)
    ties = seg.sum(hit)
    share = np.divide(ds, ties, out=np.zeros_like(ds), where=ties > 0)
    hit *= np.sign(H)
    hit *= seg.expand(share)
    dH += hit
    return dH, gw, gb


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class PackedBatch:
    """Unit-scaled sets laid side by side: ``unit`` is ``(M, sum N)``."""

    unit: np.ndarray
    scale_prod: np.ndarray
    seg: _Segments
    m_dim: int

    @classmethod
    def from_sets(cls, sets: Sequence[np.ndarray]) -> PackedBatch:
        sets = [as_solution_set(Y) for Y in sets]
        if not sets:
            raise ValueError("empty batch")
        m_dim = sets[0].shape[0]
        units, prods = [], []
        for Y in sets:
            if Y.shape[0] != m_dim:
                raise ValueError("all sets in a batch must share M")
            U, s = rescale(Y)
            units.append(U)
            prods.append(float(np.prod(s)))
        counts = [U.shape[1] for U in units]
        return cls(np.hstack(units), np.asarray(prods), _Segments.from_counts(counts), m_dim)

    @classmethod
    def from_packed(cls, values: np.ndarray, counts) -> PackedBatch:
        """Build from already-concatenated raw sets (``values`` is ``(M, sum N)``)."""
        seg = _Segments.from_counts(counts)
        s = seg.max(np.abs(values))
        if np.any(s == 0):
            raise ValueError("cannot rescale a set with an all-zero row")
        unit = values / seg.expand(s)
        return cls(unit, np.prod(s, axis=0), seg, values.shape[0])


def _run(batch: PackedBatch, weights: NetworkWeights, pool: str = "mean", keep: bool = False):
    H = batch.unit[None]
    caches = []
    for lw in weights.layers:
        H, cache = _layer_fwd(H, lw, weights.leak, batch.seg, pool)
        if keep:
            caches.append(cache)
    z = batch.seg.sum(H[0]).sum(axis=0) / (batch.m_dim * batch.seg.counts).astype(H.dtype)
    sig = _sigmoid(z)
    return sig * batch.scale_prod, sig, caches


def predict_packed(batch: PackedBatch, weights: NetworkWeights, pool: str = "mean") -> np.ndarray:
    return _run(batch, weights, pool)[0]


def loss_and_grad(batch: PackedBatch, targets, weights: NetworkWeights):
    """Batch-mean absolute percentage error and its gradient.

    Returns ``(loss, grads, predictions)`` where ``grads`` is a
    :class:`NetworkWeights` of partial derivatives.  At ``pred == target`` the
    subgradient 0 is used.
    """
    targets = np.asarray(targets, dtype=batch.unit.dtype)
    if np.any(targets <= 0):
        raise ValueError("targets must be strictly positive")
    pred, sig, caches = _run(batch, weights, keep=True)
    n_rec = targets.size
    loss = float(np.mean(np.abs(pred - targets) / targets))
    dpred = np.sign(pred - targets) / targets / n_rec
    dz = dpred * batch.scale_prod * sig * (1.0 - sig)
    dZ = batch.seg.expand(dz / (batch.m_dim * batch.seg.counts).astype(dz.dtype))
    dZ = np.broadcast_to(dZ, (1, batch.m_dim, dZ.size)).copy()
    grads = NetworkWeights.zeros(weights.channels, weights.leak)
    for k in range(N_LAYERS - 1, -1, -1):
        dZ, gw, gb = _layer_bwd(dZ, caches[k], weights.layers[k], weights.leak, batch.seg, k > 0)
        grads.layers[k].w[...] = gw
        grads.layers[k].bias[...] = gb
    return loss, grads, pred


def layer_forward(inputs, weights: LayerWeights, leak: float = LEAK, pool: str = "mean") -> np.ndarray:
    """Apply one equivariant layer to a single set.

    ``inputs`` is an ``(in_channels, M, N)`` array or a sequence of ``(M, N)``
    arrays; the result is ``(out_channels, M, N)``.
    """
    H = np.asarray(inputs, dtype=np.float64)
    if H.ndim == 2:
        H = H[None]
    if H.ndim != 3:
        raise ValueError("inputs must be (channels, M, N)")
    if H.shape[0] != weights.in_channels:
        raise ValueError(f"layer expects {weights.in_channels} input channels, got {H.shape[0]}")
    seg = _Segments.from_counts([H.shape[2]])
    return _layer_fwd(H, weights, leak, seg, pool)[0]


def _check_size(n: int):
    if n > TRAINED_MAX_POINTS:
        warnings.warn(
            f"set has {n} solutions; the model was trained on at most {TRAINED_MAX_POINTS}",
            CapacityWarning,
            stacklevel=3,
        )


def forward(values, weights: NetworkWeights, pool: str = "mean") -> float:
    """Predicted hypervolume (reference point at the origin) of a clean set."""
    Y = as_solution_set(values)
    if Y.shape[1] == 0:
        return 0.0
    if np.any(row_scale(Y) == 0):
        return 0.0
    _check_size(Y.shape[1])
    return float(predict_packed(PackedBatch.from_sets([Y]), weights, pool)[0])


def forward_batch(sets: Sequence[np.ndarray], weights: NetworkWeights, pool: str = "mean") -> np.ndarray:
    """:func:`forward` over many sets in one packed pass."""
    out = np.zeros(len(sets))
    live = []
    for k, Y in enumerate(sets):
        Y = as_solution_set(Y)
        if Y.shape[1] and np.all(row_scale(Y) > 0):
            _check_size(Y.shape[1])
            live.append(k)
    if live:
        batch = PackedBatch.from_sets([sets[k] for k in live])
        out[live] = predict_packed(batch, weights, pool)
    return out


def backward(values, target_hv: float, weights: NetworkWeights):
    """Loss ``|pred - target| / target`` of one set and its weight gradients."""
    if not target_hv > 0:
        raise ValueError("target_hv must be > 0")
    loss, grads, _ = loss_and_grad(PackedBatch.from_sets([values]), [target_hv], weights)
    return loss, grads


# -- weight files -------------------------------------------------------------


def save_weights(weights: NetworkWeights, path) -> None:
    """Write the little-endian ``DHV1`` weight file."""
    parts = [MAGIC, struct.pack("<IId", FORMAT_VERSION, weights.channels, weights.leak)]
    for lw in weights.layers:
        parts.append(struct.pack("<II", lw.in_channels, lw.out_channels))
        for k in range(4):
            parts.append(np.ascontiguousarray(lw.w[k], dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(lw.bias, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_weights(path) -> NetworkWeights:
    data = Path(path).read_bytes()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise WeightFileError(f"{path}: truncated while reading {what} at byte {pos}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise WeightFileError(f"{path}: not a DHV1 weight file")
    version, channels, leak = struct.unpack("<IId", take(16, "header"))
    if version != FORMAT_VERSION:
        raise WeightFileError(f"{path}: unsupported format version {version}")
    if channels < 1:
        raise WeightFileError(f"{path}: invalid channel count {channels}")
    layers = []
    for k, (i, o) in enumerate(layer_shapes(channels)):
        fi, fo = struct.unpack("<II", take(8, f"layer {k} shape"))
        if (fi, fo) != (i, o):
            raise WeightFileError(
                f"{path}: layer {k} has shape {fi}->{fo}, expected {i}->{o} for {channels} channels"
            )
        w = np.frombuffer(take(4 * o * i * 8, f"layer {k} weights"), dtype="<f8")
        b = np.frombuffer(take(o * 8, f"layer {k} bias"), dtype="<f8")
        layers.append(LayerWeights(w.reshape(4, o, i).astype(np.float64), b.astype(np.float64)))
    if pos != len(data):
        raise WeightFileError(f"{path}: {len(data) - pos} unexpected trailing bytes")
    return NetworkWeights(channels, layers, leak)
