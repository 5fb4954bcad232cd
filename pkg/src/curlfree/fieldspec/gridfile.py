"""Binary grid files.

Layout, all little-endian::

    b"CFGR"            magic
    u32 version        = 1
    u32 n              dimension
    u32 shape[n]       nodes per axis
    f64 origin[n]
    f64 h              lattice spacing
    f64 values[...]    node values, row-major (last axis fastest)

One file holds one scalar grid; vector fields use one file per component.
"""

import os
import struct
import tempfile

import numpy as np

from ..errors import ConfigError
from .fields import GridField

MAGIC = b"CFGR"
VERSION = 1


def encode_grid(values, origin, h):
    values = np.asarray(values, dtype="<f8")
    origin = np.atleast_1d(np.asarray(origin, dtype="<f8"))
    n = origin.size
    if values.ndim != n:
        raise ValueError("grid files hold scalar grids only")
    header = MAGIC + struct.pack(f"<II{n}I", VERSION, n, *values.shape)
    header += origin.tobytes() + struct.pack("<d", float(h))
    return header + np.ascontiguousarray(values).tobytes()


def decode_grid(data):
    if data[:4] != MAGIC:
        raise ConfigError("not a grid file (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ConfigError(f"unsupported grid file version {version}")
    pos = 12
    shape = struct.unpack_from(f"<{n}I", data, pos)
    pos += 4 * n
    origin = np.frombuffer(data, dtype="<f8", count=n, offset=pos)
    pos += 8 * n
    (h,) = struct.unpack_from("<d", data, pos)
    pos += 8
    count = int(np.prod(shape))
    if len(data) - pos != 8 * count:
        raise ConfigError("grid file size does not match its header")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape)
    return values.astype(float), origin.astype(float), h


def write_grid(path, values, origin, h):
    """Write atomically (temporary file in the same directory, then rename)."""
    payload = encode_grid(values, origin, h)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_grid(path):
    with open(path, "rb") as fh:
        values, origin, h = decode_grid(fh.read())
    return GridField(values, origin, h)
