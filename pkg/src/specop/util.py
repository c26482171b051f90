"""Shared plumbing: labeled seed derivation and parameter-tree walking.

Parameter containers are nested dataclasses whose array fields hold numpy
arrays at rest and Tensor leaves during a taped forward pass; the helpers
here flatten, address, and tape-wrap those trees by dotted path.
"""

import dataclasses
import hashlib

import numpy as np

from .autodiff import Tensor


def derive_seed(root_seed, label):
    """Stable 63-bit subsystem seed from a root seed and a text label."""
    digest = hashlib.sha256(f"{int(root_seed)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)


_field_info_cache = {}


def _field_info(cls):
    """Cached (name, is_constant) pairs for a dataclass type."""
    info = _field_info_cache.get(cls)
    if info is None:
        info = tuple(
            (f.name, bool(f.metadata.get("constant")))
            for f in dataclasses.fields(cls)
        )
        _field_info_cache[cls] = info
    return info


def named_arrays(obj, prefix="", trainable_only=False):
    """Yield (dotted path, array) for every numpy array in a params tree.

    Fields marked with metadata {"constant": True} (fixed structure such as
    knot grids) are skipped when trainable_only is set.
    """
    if isinstance(obj, np.ndarray):
        yield prefix, obj
    elif isinstance(obj, Tensor):
        yield prefix, obj.data
    elif dataclasses.is_dataclass(obj):
        for name, constant in _field_info(type(obj)):
            if trainable_only and constant:
                continue
            sub = getattr(obj, name)
            yield from named_arrays(sub, f"{prefix}.{name}" if prefix else name,
                                    trainable_only)
    elif isinstance(obj, (list, tuple)):
        for i, sub in enumerate(obj):
            yield from named_arrays(sub, f"{prefix}.{i}" if prefix else str(i),
                                    trainable_only)
    # scalars / None / strings carry no parameters


def set_by_path(obj, path, value):
    """Replace the array at a dotted path, in place."""
    parts = path.split(".")
    for p in parts[:-1]:
        obj = obj[int(p)] if isinstance(obj, (list, tuple)) else getattr(obj, p)
    last = parts[-1]
    if isinstance(obj, (list, tuple)):
        obj[int(last)] = value
    else:
        setattr(obj, last, value)


def tensorize(obj, tape, prefix=""):
    """Structural clone of a params tree with arrays wrapped as tape leaves.

    With tape=None arrays are wrapped as constants (inference path).
    """
    if isinstance(obj, np.ndarray):
        return tape.leaf(obj, prefix) if tape is not None else Tensor(obj)
    if dataclasses.is_dataclass(obj):
        kwargs = {}
        for name, constant in _field_info(type(obj)):
            sub = getattr(obj, name)
            sub_tape = None if constant else tape
            kwargs[name] = tensorize(sub, sub_tape,
                                     f"{prefix}.{name}" if prefix else name)
        return type(obj)(**kwargs)
    if isinstance(obj, list):
        return [tensorize(s, tape, f"{prefix}.{i}" if prefix else str(i))
                for i, s in enumerate(obj)]
    if isinstance(obj, tuple):
        return tuple(tensorize(s, tape, f"{prefix}.{i}" if prefix else str(i))
                     for i, s in enumerate(obj))
    return obj
