"""
Flat binary tables with JSON sidecars, CSV cell lists, and manifests.

Tables are stored as little-endian 64-bit floats in row-major order.  The
sidecar ``<path>.json`` records the shape and the axis names; reading a
table back is bit-exact.
"""

from __future__ import annotations

import csv
import json
import os
import platform
from pathlib import Path

import numpy as np

from .errors import FormatError

DTYPE = "<f8"
FORMAT_VERSION = 1


def _sidecar(path):
    return Path(str(path) + ".json")


def write_field(path, table, axes=None, extra=None):
    """Write ``table`` to ``path`` plus a sidecar manifest.

    :arg axes: optional list of axis names, one per dimension.
    :arg extra: optional JSON-serializable metadata stored in the sidecar.
    """
    path = Path(path)
    table = np.ascontiguousarray(np.asarray(table, dtype=DTYPE))
    if axes is None:
        axes = [f"axis{i}" for i in range(table.ndim)]
    axes = list(axes)
    if len(axes) != table.ndim:
        raise FormatError(f"{len(axes)} axis names for a {table.ndim}-d table")
    path.parent.mkdir(parents=True, exist_ok=True)
    table.tofile(path)
    meta = {"format_version": FORMAT_VERSION, "dtype": DTYPE,
            "order": "C", "shape": list(table.shape), "axes": axes}
    if extra:
        meta["extra"] = extra
    _sidecar(path).write_text(json.dumps(meta, indent=1, sort_keys=True))
    return path


def read_meta(path):
    side = _sidecar(path)
    if not side.exists():
        raise FormatError(f"missing sidecar {side}")
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable sidecar {side}: {exc}") from None
    for key in ("dtype", "shape", "axes"):
        if key not in meta:
            raise FormatError(f"sidecar {side} lacks {key!r}")
    if meta["dtype"] != DTYPE:
        raise FormatError(f"unsupported dtype {meta['dtype']!r}")
    if len(meta["axes"]) != len(meta["shape"]):
        raise FormatError("axis names do not match the number of dimensions")
    return meta


def read_field(path, expect=None):
    """Read a table written by :func:`write_field`.

    :arg expect: optional mapping ``axis name -> length``; a mismatch raises
        :class:`FormatError` naming the axis.
    """
    path = Path(path)
    meta = read_meta(path)
    shape = tuple(int(s) for s in meta["shape"])
    if expect:
        lengths = dict(zip(meta["axes"], shape))
        for name, n in expect.items():
            if name not in lengths:
                raise FormatError(f"axis {name!r} missing from manifest")
            if lengths[name] != n:
                raise FormatError(
                    f"axis {name!r} has length {lengths[name]}, expected {n}")
    if not path.exists():
        raise FormatError(f"missing data file {path}")
    count = int(np.prod(shape)) if shape else 1
    nbytes = os.path.getsize(path)
    if nbytes != 8 * count:
        raise FormatError(
            f"{path} holds {nbytes} bytes, manifest implies {8 * count}")
    return np.fromfile(path, dtype=DTYPE, count=count).reshape(shape)


def environment_info():
    import scipy

    from . import __version__
    return {"kinlaw": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "python": platform.python_version()}


def write_manifest(directory, payload):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = dict(payload)
    payload.setdefault("versions", environment_info())
    path = directory / "manifest.json"
    path.write_text(json.dumps(_jsonable(payload), indent=1, sort_keys=True))
    return path


def read_manifest(directory):
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise FormatError(f"missing manifest in {directory}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"unreadable manifest {path}: {exc}") from None


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj
