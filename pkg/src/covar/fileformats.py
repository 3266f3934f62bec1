"""On-disk formats: binary paired datasets and JSON model files.

Dataset layout (all little-endian)::

    b"CVL1"  u16 version  u16 flags  u64 n  u32 d1  u32 d2
    n*d1 float32 (s1 rows)  n*d2 float32 (s2 rows)
    [n float64 hidden_x]            if flags & 1
    [n float64 hidden_y, hidden_z]  if flags & 2
    [n float64 hidden_x2]           if flags & 8

``flags & 4`` marks a negative dataset.  ``hidden_x2`` is the common
variable behind sensor 2 when it differs from ``hidden_x`` (negative pairs).

Model files are JSON with every float written to 17 significant digits, which
round-trips float64 exactly.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .mlp import LayerParams, SubNetwork
from .pairing import NEGATIVE, POSITIVE, PairedDataset
from .siamese import JointNetwork, Standardizer

MAGIC = b"CVL1"
VERSION = 1
HEADER = struct.Struct("<4sHHQII")
FLAG_X, FLAG_YZ, FLAG_NEG, FLAG_X2 = 1, 2, 4, 8
MODEL_FORMAT = "covar-model"


class FormatError(ValueError):
    pass


def atomic_write(path, data):
    """Write bytes (or text) via a temp file in the same directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dataset_bytes(ds):
    flags = 0
    if ds.hidden_x is not None:
        flags |= FLAG_X
    if ds.hidden_y is not None and ds.hidden_z is not None:
        flags |= FLAG_YZ
    if ds.label == NEGATIVE:
        flags |= FLAG_NEG
    if ds.hidden_x2 is not None:
        flags |= FLAG_X2
    parts = [HEADER.pack(MAGIC, VERSION, flags, ds.n, ds.d1, ds.d2),
             np.ascontiguousarray(ds.s1, dtype="<f4").tobytes(),
             np.ascontiguousarray(ds.s2, dtype="<f4").tobytes()]
    if flags & FLAG_X:
        parts.append(np.asarray(ds.hidden_x, dtype="<f8").tobytes())
    if flags & FLAG_YZ:
        parts.append(np.asarray(ds.hidden_y, dtype="<f8").tobytes())
        parts.append(np.asarray(ds.hidden_z, dtype="<f8").tobytes())
    if flags & FLAG_X2:
        parts.append(np.asarray(ds.hidden_x2, dtype="<f8").tobytes())
    return b"".join(parts)


def save_dataset(path, ds):
    atomic_write(path, dataset_bytes(ds))


def load_dataset(path):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, flags, n, d1, d2 = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = HEADER.size

    def take(count, dtype):
        nonlocal offset
        size = count * np.dtype(dtype).itemsize
        if offset + size > len(raw):
            raise FormatError(f"{path}: truncated data")
        out = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
        offset += size
        return out

    s1 = take(n * d1, "<f4").reshape(n, d1).astype(np.float32)
    s2 = take(n * d2, "<f4").reshape(n, d2).astype(np.float32)
    hx = take(n, "<f8").astype(np.float64) if flags & FLAG_X else None
    hy = hz = None
    if flags & FLAG_YZ:
        hy, hz = take(n, "<f8").astype(np.float64), take(n, "<f8").astype(np.float64)
    hx2 = take(n, "<f8").astype(np.float64) if flags & FLAG_X2 else None
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return PairedDataset(s1, s2, hidden_x=hx, hidden_y=hy, hidden_z=hz, hidden_x2=hx2,
                         label=NEGATIVE if flags & FLAG_NEG else POSITIVE)


# --- model files --------------------------------------------------------------

def _fmt(v):
    if not np.isfinite(v):
        raise FormatError(f"cannot serialise non-finite value {v}")
    return format(float(v), ".17g")


def _emit(obj, indent=0):
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, np.ndarray):
        return "[" + ", ".join(_fmt(v) for v in obj.ravel()) + "]"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool)
               for v in obj):
            return "[" + ", ".join(_emit(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _emit(v, indent + 1) for v in obj) + "\n" + "  " * indent + "]"
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    return json.dumps(obj)


def _network_dict(net, norm):
    return {
        "dims": net.dims,
        "layers": [{"activation": l.activation, "weights": l.weights, "biases": l.biases}
                   for l in net.layers],
        "standardization": None if norm is None else {"mean": norm.mean, "scale": norm.scale},
    }


def model_text(jn, metadata=None):
    doc = {
        "format": MODEL_FORMAT,
        "version": VERSION,
        "net1": _network_dict(jn.net1, jn.norm1),
        "net2": _network_dict(jn.net2, jn.norm2),
        "metadata": metadata or {},
    }
    return _emit(doc) + "\n"


def save_model(path, jn, metadata=None):
    atomic_write(path, model_text(jn, metadata))


def _network_from(doc):
    dims = doc["dims"]
    layers = []
    for i, spec in enumerate(doc["layers"]):
        w = np.array(spec["weights"], dtype=np.float64).reshape(dims[i + 1], dims[i])
        layers.append(LayerParams(w, np.array(spec["biases"], dtype=np.float64), spec["activation"]))
    norm = doc.get("standardization")
    if norm is not None:
        norm = Standardizer(np.array(norm["mean"], dtype=np.float64),
                            np.array(norm["scale"], dtype=np.float64))
    return SubNetwork(layers), norm


def load_model(path):
    """Return ``(JointNetwork, metadata)``."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"{path}: not a {MODEL_FORMAT} file")
    try:
        net1, norm1 = _network_from(doc["net1"])
        net2, norm2 = _network_from(doc["net2"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: malformed network ({exc})") from exc
    return JointNetwork(net1, net2, norm1, norm2), doc.get("metadata", {})
