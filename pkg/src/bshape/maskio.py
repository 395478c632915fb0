"""Mask file formats: bit-exact BSMK rasters and quantized 8-bit PNGs.

BSMK layout: magic b"BSMK", one version byte (0x01), height and width as
little-endian uint32, then height * width little-endian float32 values in
row-major order. Values survive a write/read round trip bit for bit.

The PNG alternative stores round(255 * value) in an 8-bit grayscale channel
and reads back value / 255, so it quantizes to steps of 1/255 and is lossy
for scored masks (binary masks survive exactly as 0 and 255).

All writers are atomic: bytes go to a temporary file in the destination
directory, which is then renamed over the target path.
"""

from __future__ import annotations

import io
import os
import struct
import tempfile

import numpy as np
from PIL import Image

from .errors import MaskFileError

BSMK_MAGIC = b"BSMK"
BSMK_VERSION = 1
_HEADER = struct.Struct("<4sBII")

MASK_FORMATS = ("bsmk", "png")


def _atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bshape-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_bsmk(path, values) -> None:
    """Write a 2-D float raster as BSMK (values cast to float32)."""
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise MaskFileError("BSMK rasters must be 2-D")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    h, w = arr.shape
    _atomic_write_bytes(path, _HEADER.pack(BSMK_MAGIC, BSMK_VERSION, h, w) + arr.tobytes())


def read_bsmk(path) -> np.ndarray:
    """Read a BSMK raster back as a float32 array."""
    with open(path, "rb") as handle:
        data = handle.read()
    if len(data) < _HEADER.size:
        raise MaskFileError(f"{path}: truncated BSMK header")
    magic, version, h, w = _HEADER.unpack_from(data)
    if magic != BSMK_MAGIC:
        raise MaskFileError(f"{path}: bad magic {magic!r}")
    if version != BSMK_VERSION:
        raise MaskFileError(f"{path}: unsupported BSMK version {version}")
    expected = _HEADER.size + 4 * h * w
    if len(data) != expected:
        raise MaskFileError(f"{path}: payload is {len(data)} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return flat.reshape((h, w)).copy()


def write_mask_png(path, values) -> None:
    """Write a [0, 1] raster as 8-bit grayscale PNG, quantized to 1/255 steps."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise MaskFileError("PNG rasters must be 2-D")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise MaskFileError("PNG rasters must hold values in [0, 1]")
    quantized = np.round(arr * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(quantized, mode="L").save(buf, format="PNG")
    _atomic_write_bytes(path, buf.getvalue())


def read_mask_png(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG back as float32 values in [0, 1]."""
    try:
        with Image.open(path) as img:
            if img.mode != "L":
                img = img.convert("L")
            arr = np.asarray(img, dtype=np.float32)
    except Exception as err:
        raise MaskFileError(f"{path}: not a readable PNG mask ({err})") from err
    return arr / np.float32(255.0)


def write_mask(path, values, fmt: str) -> None:
    """Write a raster in the named format ("bsmk" or "png")."""
    if fmt == "bsmk":
        write_bsmk(path, values)
    elif fmt == "png":
        write_mask_png(path, values)
    else:
        raise MaskFileError(f"unknown mask format {fmt!r}")


def read_mask(path) -> np.ndarray:
    """Read a mask file, dispatching on its extension."""
    suffix = os.path.splitext(os.fspath(path))[1].lower()
    if suffix == ".bsmk":
        return read_bsmk(path)
    if suffix == ".png":
        return read_mask_png(path)
    raise MaskFileError(f"{path}: unknown mask file extension")
