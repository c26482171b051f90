"""Flat binary container for trajectory datasets and model checkpoints.

Layout (all integers little-endian):

    bytes 0..3   magic "SKDS"
    bytes 4..5   u16 format version (currently 1)
    byte  6      u8 payload dtype: 0 = float32, 1 = float64
    byte  7      u8 rank
    next 8*rank  u64 extents
    payload      row-major array data
    trailer      u32 entry count, then per entry u32 byte length +
                 that many UTF-8 bytes of "key=value"

Datasets are rank-5 float32 tensors (samples, frames, X, Y, C) with the
generator provenance in the trailer.  Checkpoints are rank-1 float64
payloads concatenating every model array (complex ones as interleaved
real/imag pairs), with per-tensor offsets, shapes, the model config, and
the token normalizer state all recorded as trailer entries.
"""

import struct

import numpy as np

from . import kan, model, pde
from .util import named_arrays, set_by_path

MAGIC = b"SKDS"
VERSION = 1
_DTYPES = {0: np.float32, 1: np.float64}
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class FormatError(ValueError):
    """Raised when a file is not a well-formed container."""


def write_skds(path, array, meta):
    array = np.asarray(array)
    if not array.flags["C_CONTIGUOUS"]:
        array = np.ascontiguousarray(array)
    if array.dtype not in _DTYPE_CODES:
        raise FormatError(f"unsupported payload dtype {array.dtype}")
    for key, value in meta.items():
        if "=" in key:
            raise FormatError(f"metadata key {key!r} must not contain '='")
        str(value).encode("utf-8")  # force encodability up front
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HBB", VERSION, _DTYPE_CODES[array.dtype],
                             array.ndim))
        fh.write(struct.pack(f"<{array.ndim}Q", *array.shape))
        fh.write(array.tobytes("C"))
        items = sorted(meta.items())
        fh.write(struct.pack("<I", len(items)))
        for key, value in items:
            line = f"{key}={value}".encode("utf-8")
            fh.write(struct.pack("<I", len(line)))
            fh.write(line)


def read_skds(path):
    """Returns (array, meta dict of strings); raises FormatError on damage."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, not a SKDS file")
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated header")
    version, dcode, rank = struct.unpack_from("<HBB", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dcode not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype code {dcode}")
    off = 8
    if len(raw) < off + 8 * rank:
        raise FormatError(f"{path}: truncated extents")
    shape = struct.unpack_from(f"<{rank}Q", raw, off)
    off += 8 * rank
    dtype = np.dtype(_DTYPES[dcode])
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    nbytes = count * dtype.itemsize
    if len(raw) < off + nbytes + 4:
        raise FormatError(f"{path}: truncated payload")
    array = np.frombuffer(raw, dtype=dtype, count=count, offset=off).reshape(shape)
    off += nbytes
    (n_entries,) = struct.unpack_from("<I", raw, off)
    off += 4
    meta = {}
    for _ in range(n_entries):
        if len(raw) < off + 4:
            raise FormatError(f"{path}: truncated metadata")
        (ln,) = struct.unpack_from("<I", raw, off)
        off += 4
        if len(raw) < off + ln:
            raise FormatError(f"{path}: truncated metadata entry")
        line = raw[off:off + ln].decode("utf-8")
        off += ln
        key, _, value = line.partition("=")
        meta[key] = value
    return array.copy(), meta


# -- trajectory datasets ----------------------------------------------------


def save_trajectories(path, ts):
    meta = {"format": "trajectories", "kind": ts.kind, "seed": ts.seed}
    for key, value in ts.meta.items():
        meta[f"gen.{key}"] = value
    write_skds(path, ts.data.astype(np.float32), meta)


def _parse_scalar(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_trajectories(path):
    array, meta = read_skds(path)
    if meta.get("format") != "trajectories":
        raise FormatError(f"{path}: not a trajectory file")
    if array.ndim != 5:
        raise FormatError(f"{path}: trajectory payload must be rank 5")
    gen = {k[4:]: _parse_scalar(v) for k, v in meta.items()
           if k.startswith("gen.")}
    return pde.TrajectorySet(array.astype(np.float64), meta["kind"],
                             int(meta["seed"]), gen)


# -- model checkpoints ------------------------------------------------------


def _flat_f64(arr):
    """Rank-1 float64 view data; complex arrays interleave (re, im)."""
    arr = np.ascontiguousarray(arr)
    if np.iscomplexobj(arr):
        return arr.view(np.float64).ravel(), "c"
    return arr.astype(np.float64).ravel(), "f"


def save_checkpoint(path, m, extra_meta=None):
    meta = {"format": "checkpoint"}
    for f_name, value in vars(m.cfg).items():
        meta[f"cfg.{f_name}"] = value
    chunks = []
    offset = 0
    entries = list(named_arrays(m.params))
    entries.append(("state.norm", m.normalizer.state()))
    for name, arr in entries:
        flat, kind = _flat_f64(arr)
        shape = "x".join(str(s) for s in arr.shape)
        meta[f"tensor.{name}"] = f"{offset}:{kind}:{shape}"
        chunks.append(flat)
        offset += flat.size
    if extra_meta:
        meta.update(extra_meta)
    write_skds(path, np.concatenate(chunks), meta)


def _cfg_from_meta(meta):
    import dataclasses

    kwargs = {}
    for f in dataclasses.fields(model.ModelConfig):
        key = f"cfg.{f.name}"
        if key not in meta:
            raise FormatError(f"checkpoint missing config entry {key}")
        text = meta[key]
        if f.type is bool:
            kwargs[f.name] = text == "True"
        elif f.type is int:
            kwargs[f.name] = int(text)
        elif f.type is float:
            kwargs[f.name] = float(text)
        else:
            kwargs[f.name] = text
    return model.ModelConfig(**kwargs)


def load_checkpoint(path):
    payload, meta = read_skds(path)
    if meta.get("format") != "checkpoint":
        raise FormatError(f"{path}: not a checkpoint file")
    if payload.ndim != 1 or payload.dtype != np.float64:
        raise FormatError(f"{path}: checkpoint payload must be rank-1 float64")
    cfg = _cfg_from_meta(meta)
    m = model.Model.init(cfg, seed=0)

    def fetch(name, expect_shape=None):
        key = f"tensor.{name}"
        if key not in meta:
            raise FormatError(f"{path}: checkpoint missing tensor {name}")
        off_s, kind, shape_s = meta[key].split(":")
        shape = tuple(int(s) for s in shape_s.split("x")) if shape_s else ()
        size = int(np.prod(shape, dtype=np.int64)) * (2 if kind == "c" else 1)
        off = int(off_s)
        if off + size > payload.size:
            raise FormatError(f"{path}: tensor {name} overruns the payload")
        flat = payload[off:off + size]
        arr = flat.view(np.complex128) if kind == "c" else flat
        arr = arr.reshape(shape).copy()
        if expect_shape is not None and arr.shape != expect_shape:
            raise FormatError(
                f"{path}: tensor {name} has shape {arr.shape}, "
                f"model built from the stored config expects {expect_shape}")
        return arr

    for name, arr in named_arrays(m.params):
        set_by_path(m.params, name, fetch(name, arr.shape))
    m.normalizer = kan.TokenNormalizer.from_state(
        fetch("state.norm", (2, cfg.token_in_dim())))
    return m
