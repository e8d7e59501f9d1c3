"""Binary wire format for federation messages.

Frame: ``u32`` payload length, then the payload. ``Done`` is the empty
frame. Any other payload starts with ``u8 version, u8 tag``. All integers
and floats are little-endian. The per-message layouts are listed in
docs/wire_format.md.
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import SerializationError
from ..models.forest import Forest
from ..models.linear import LinearModel
from ..models.tree import Tree
from .messages import (
    Done,
    ForestContribution,
    GlobalModel,
    HistogramReport,
    LinearParams,
    MakeLeaf,
    NodeRequest,
    RangeReport,
    SplitDecision,
    Start,
    ThresholdGrid,
)

WIRE_VERSION = 1
FRAME_HEADER = struct.Struct("<I")

TAGS = {
    Start: 1,
    LinearParams: 2,
    ForestContribution: 3,
    RangeReport: 4,
    ThresholdGrid: 5,
    NodeRequest: 6,
    HistogramReport: 7,
    SplitDecision: 8,
    MakeLeaf: 9,
    GlobalModel: 10,
}
TYPES = {tag: cls for cls, tag in TAGS.items()}

_TASKS = ("regression", "classification")


def linear_params_size(n_features: int) -> int:
    """Payload bytes of a LinearParams message (frame adds 4)."""
    return 2 + 2 + 8 + 8 + 4 + 8 * n_features


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def pack(self, fmt: str, *values):
        self.parts.append(struct.pack("<" + fmt, *values))

    def array(self, values, dtype: str):
        self.parts.append(np.ascontiguousarray(values, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())

    def bytes(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.buf = memoryview(payload)
        self.pos = 0

    def unpack(self, fmt: str):
        s = struct.Struct("<" + fmt)
        if self.pos + s.size > len(self.buf):
            raise SerializationError("truncated payload")
        values = s.unpack_from(self.buf, self.pos)
        self.pos += s.size
        return values if len(values) > 1 else values[0]

    def array(self, count: int, dtype: str) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        end = self.pos + count * dt.itemsize
        if end > len(self.buf):
            raise SerializationError("truncated payload")
        arr = np.frombuffer(self.buf[self.pos:end], dtype=dt).astype(dt.newbyteorder("="))
        self.pos = end
        return arr

    def finish(self):
        if self.pos != len(self.buf):
            raise SerializationError(f"{len(self.buf) - self.pos} trailing bytes")


def _write_tree(w: _Writer, tree: Tree):
    w.pack("I", tree.n_nodes)
    w.array(tree.feature, "i4")
    w.array(tree.threshold, "f8")
    w.array(tree.left, "i4")
    w.array(tree.right, "i4")
    w.array(tree.value, "f8")
    w.array(tree.weight, "f8")
    w.array(tree.positives, "f8")


def _read_tree(r: _Reader) -> Tree:
    n = r.unpack("I")
    return Tree(r.array(n, "i4"), r.array(n, "f8"), r.array(n, "i4"), r.array(n, "i4"),
                r.array(n, "f8"), r.array(n, "f8"), r.array(n, "f8"))


def encode(msg) -> bytes:
    """Payload bytes for ``msg`` (without the length prefix)."""
    if isinstance(msg, Done):
        return b""
    tag = TAGS.get(type(msg))
    if tag is None:
        raise SerializationError(f"cannot encode {type(msg).__name__}")
    w = _Writer()
    w.pack("BB", WIRE_VERSION, tag)
    try:
        _ENCODERS[type(msg)](w, msg)
    except (struct.error, OverflowError, ValueError) as exc:
        raise SerializationError(f"cannot encode {type(msg).__name__}: {exc}") from exc
    return w.bytes()


def decode(payload: bytes):
    if len(payload) == 0:
        return Done()
    r = _Reader(payload)
    version, tag = r.unpack("BB")
    if version != WIRE_VERSION:
        raise SerializationError(f"unsupported wire version {version}")
    cls = TYPES.get(tag)
    if cls is None:
        raise SerializationError(f"unknown message tag {tag}")
    try:
        msg = _DECODERS[cls](r)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, SerializationError):
            raise
        raise SerializationError(f"malformed {cls.__name__}: {exc}") from exc
    r.finish()
    return msg


def encode_frame(msg) -> bytes:
    payload = encode(msg)
    return FRAME_HEADER.pack(len(payload)) + payload


def decode_frame(frame: bytes):
    if len(frame) < FRAME_HEADER.size:
        raise SerializationError("frame shorter than its header")
    (length,) = FRAME_HEADER.unpack_from(frame)
    if length != len(frame) - FRAME_HEADER.size:
        raise SerializationError(f"frame announces {length} bytes, carries {len(frame) - FRAME_HEADER.size}")
    return decode(frame[FRAME_HEADER.size:])


def _enc_start(w, m: Start):
    w.pack("H", m.client_id)


def _dec_start(r):
    return Start(r.unpack("H"))


def _enc_linear(w, m: LinearParams):
    w.pack("HQdI", m.client_id, m.n, m.intercept, m.coefficients.shape[0])
    w.array(m.coefficients, "f8")


def _dec_linear(r):
    client, n, intercept, k = r.unpack("HQdI")
    return LinearParams(client, intercept, r.array(k, "f8"), n)


def _enc_forest_contrib(w, m: ForestContribution):
    w.pack("HI", m.client_id, len(m.trees))
    for tree in m.trees:
        _write_tree(w, tree)


def _dec_forest_contrib(r):
    client, count = r.unpack("HI")
    return ForestContribution(client, tuple(_read_tree(r) for _ in range(count)))


def _enc_range(w, m: RangeReport):
    w.pack("HI", m.client_id, m.minima.shape[0])
    w.array(m.minima, "f8")
    w.array(m.maxima, "f8")


def _dec_range(r):
    client, k = r.unpack("HI")
    return RangeReport(client, r.array(k, "f8"), r.array(k, "f8"))


def _enc_grid(w, m: ThresholdGrid):
    w.pack("I", len(m.thresholds))
    for t in m.thresholds:
        w.pack("I", t.shape[0])
        w.array(t, "f8")


def _dec_grid(r):
    k = r.unpack("I")
    return ThresholdGrid(tuple(r.array(r.unpack("I"), "f8") for _ in range(k)))


def _enc_request(w, m: NodeRequest):
    w.pack("III", m.tree_id, m.node_id, m.features.shape[0])
    w.array(m.features, "u4")


def _dec_request(r):
    tree, node, k = r.unpack("III")
    return NodeRequest(tree, node, r.array(k, "u4"))


def _enc_hist(w, m: HistogramReport):
    w.pack("HIIQQI", m.client_id, m.tree_id, m.node_id, m.node_neg, m.node_pos, m.features.shape[0])
    w.array(m.features, "u4")
    w.array(m.sizes, "u4")
    w.array(m.counts, "u8")


def _dec_hist(r):
    client, tree, node, neg, pos, k = r.unpack("HIIQQI")
    features = r.array(k, "u4")
    sizes = r.array(k, "u4")
    counts = r.array(4 * int(sizes.sum(dtype=np.int64)), "u8")
    return HistogramReport(client, tree, node, neg, pos, features, counts, sizes)


def _enc_split(w, m: SplitDecision):
    w.pack("IIIdII", m.tree_id, m.node_id, m.feature_index, m.threshold, m.left_id, m.right_id)


def _dec_split(r):
    return SplitDecision(*r.unpack("IIIdII"))


def _enc_leaf(w, m: MakeLeaf):
    w.pack("IIdd", m.tree_id, m.node_id, m.neg, m.pos)


def _dec_leaf(r):
    return MakeLeaf(*r.unpack("IIdd"))


def _enc_global(w, m: GlobalModel):
    model = m.model
    if isinstance(model, LinearModel):
        w.pack("BdIB", 0, model.intercept, model.n_features, int(model.ridge))
        w.array(model.coefficients, "f8")
    elif isinstance(model, Forest):
        w.pack("BBIII", 1, _TASKS.index(model.task), model.n_features, len(model.trees), len(model.tree_keys))
        w.array(model.tree_keys, "u8")
        for tree in model.trees:
            _write_tree(w, tree)
    else:
        raise SerializationError(f"cannot encode model {type(model).__name__}")


def _dec_global(r):
    kind = r.unpack("B")
    if kind == 0:
        intercept, m, ridge = r.unpack("dIB")
        return GlobalModel(LinearModel(intercept, r.array(m, "f8"), bool(ridge)))
    if kind == 1:
        task, m, count, n_keys = r.unpack("BIII")
        keys = tuple(int(k) for k in r.array(n_keys, "u8"))
        trees = tuple(_read_tree(r) for _ in range(count))
        return GlobalModel(Forest(trees, _TASKS[task], m, keys))
    raise SerializationError(f"unknown model kind {kind}")


_ENCODERS = {
    Start: _enc_start, LinearParams: _enc_linear, ForestContribution: _enc_forest_contrib,
    RangeReport: _enc_range, ThresholdGrid: _enc_grid, NodeRequest: _enc_request,
    HistogramReport: _enc_hist, SplitDecision: _enc_split, MakeLeaf: _enc_leaf, GlobalModel: _enc_global,
}
_DECODERS = {
    Start: _dec_start, LinearParams: _dec_linear, ForestContribution: _dec_forest_contrib,
    RangeReport: _dec_range, ThresholdGrid: _dec_grid, NodeRequest: _dec_request,
    HistogramReport: _dec_hist, SplitDecision: _dec_split, MakeLeaf: _dec_leaf, GlobalModel: _dec_global,
}
