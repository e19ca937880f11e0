"""Stack files, shift logs and mean images.

Two stack formats are supported:

* multi-page grayscale TIFF, 8- or 16-bit unsigned, one sample per pixel
  (32-bit float pages are read and written too, for mean images);
* a raw planar format: a 20-byte little-endian header ``b"MOCO"``, then u32
  ``m``, ``n``, ``T`` and a bit-depth code (8, 16, or 64 for float64), followed
  by the ``T`` frames row-major.

The format is chosen from the file suffix (``.tif``/``.tiff`` or ``.raw``) unless
given explicitly.
"""

from __future__ import annotations

import csv
import os
import struct
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import tifffile

from .core import Shift, Stack, max_intensity

RAW_MAGIC = b"MOCO"
RAW_HEADER = struct.Struct("<4sIIII")
RAW_DTYPES = {8: np.dtype("<u1"), 16: np.dtype("<u2"), 64: np.dtype("<f8")}

SHIFT_LOG_HEADER = ("frame", "s", "t", "score", "flags")


class StackIOError(Exception):
    """Base class for stack file problems."""


class UnsupportedFormatError(StackIOError):
    pass


class InconsistentPagesError(StackIOError):
    def __init__(self, page: int, message: str):
        super().__init__(f"page {page}: {message}")
        self.page = page


class TruncatedFileError(StackIOError):
    def __init__(self, message: str, page: Optional[int] = None):
        super().__init__(message if page is None else f"page {page}: {message}")
        self.page = page


def detect_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".tif", ".tiff"):
        return "tiff"
    if suffix == ".raw":
        return "raw"
    raise UnsupportedFormatError(f"cannot infer stack format from suffix {suffix!r}")


def load_stack(path, fmt: Optional[str] = None) -> Stack:
    fmt = fmt or detect_format(path)
    if fmt == "tiff":
        return _load_tiff(path)
    if fmt == "raw":
        return _load_raw(path)
    raise UnsupportedFormatError(f"unknown format {fmt!r}")


def _page_bit_depth(page, index):
    if page.samplesperpixel != 1:
        raise UnsupportedFormatError(f"page {index}: {page.samplesperpixel} samples per pixel")
    if page.dtype == np.uint8:
        return 8
    if page.dtype == np.uint16:
        return 16
    if page.dtype in (np.float32, np.float64):
        return "float"
    raise UnsupportedFormatError(f"page {index}: unsupported pixel type {page.dtype}")


def _load_tiff(path) -> Stack:
    try:
        tif = tifffile.TiffFile(path)
    except tifffile.TiffFileError as exc:
        raise UnsupportedFormatError(f"{path}: {exc}") from exc
    with tif:
        pages = list(tif.pages)
        if not pages:
            raise UnsupportedFormatError(f"{path}: no pages")
        shape = depth = None
        frames = []
        for k, page in enumerate(pages):
            page_depth = _page_bit_depth(page, k)
            if len(page.shape) != 2:
                raise UnsupportedFormatError(f"page {k}: expected a 2D page, got {page.shape}")
            if shape is None:
                shape, depth = page.shape, page_depth
            elif page.shape != shape:
                raise InconsistentPagesError(k, f"dims {page.shape} differ from {shape}")
            elif page_depth != depth:
                raise InconsistentPagesError(k, f"bit depth {page_depth} differs from {depth}")
            try:
                frames.append(page.asarray())
            except (ValueError, OSError, EOFError) as exc:
                raise TruncatedFileError(str(exc), k) from exc
    return Stack(np.stack(frames).astype(np.float64), depth)


def _load_raw(path) -> Stack:
    with open(path, "rb") as fh:
        head = fh.read(RAW_HEADER.size)
        if len(head) < RAW_HEADER.size:
            raise TruncatedFileError(f"{path}: header is {len(head)} bytes")
        magic, m, n, count, code = RAW_HEADER.unpack(head)
        if magic != RAW_MAGIC:
            raise UnsupportedFormatError(f"{path}: bad magic {magic!r}")
        if code not in RAW_DTYPES:
            raise UnsupportedFormatError(f"{path}: unknown bit-depth code {code}")
        if m == 0 or n == 0 or count == 0:
            raise UnsupportedFormatError(f"{path}: empty stack {m}x{n}x{count}")
        dtype = RAW_DTYPES[code]
        payload = fh.read()
    frame_bytes = m * n * dtype.itemsize
    if len(payload) < count * frame_bytes:
        raise TruncatedFileError(
            f"{path}: payload holds {len(payload)} bytes, need {count * frame_bytes}",
            len(payload) // frame_bytes,
        )
    data = np.frombuffer(payload, dtype=dtype, count=count * m * n).reshape(count, m, n)
    return Stack(data.astype(np.float64), "float" if code == 64 else code)


def to_storage(frames: np.ndarray, bit_depth) -> np.ndarray:
    """Round half-to-even and clip to the integer range of ``bit_depth``."""
    top = max_intensity(bit_depth)
    if top is None:
        return np.asarray(frames, dtype=np.float64)
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    return np.clip(np.rint(frames), 0, top).astype(dtype)


def save_stack(stack: Stack, path, fmt: Optional[str] = None) -> None:
    fmt = fmt or detect_format(path)
    data = to_storage(stack.frames, stack.bit_depth)
    if fmt == "tiff":
        if data.dtype == np.float64:
            data = data.astype(np.float32)
        with tifffile.TiffWriter(path) as tw:
            for frame in data:
                tw.write(frame, photometric="minisblack")
    elif fmt == "raw":
        code = 64 if stack.bit_depth == "float" else stack.bit_depth
        T, m, n = data.shape
        with open(path, "wb") as fh:
            fh.write(RAW_HEADER.pack(RAW_MAGIC, m, n, T, code))
            fh.write(np.ascontiguousarray(data, dtype=RAW_DTYPES[code]).tobytes())
    else:
        raise UnsupportedFormatError(f"unknown format {fmt!r}")


def format_score(score: float) -> str:
    return f"{score:#.9g}"


def write_shift_log(shifts: Iterable[Shift], path) -> None:
    """CSV ``frame,s,t,score,flags``; flags joined with ``;``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SHIFT_LOG_HEADER)
        for k, sh in enumerate(shifts):
            writer.writerow([k, sh.s, sh.t, format_score(sh.score), ";".join(sh.flags)])


def read_shift_log(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        Shift(int(r["s"]), int(r["t"]), float(r["score"]), tuple(f for f in r["flags"].split(";") if f))
        for r in rows
    ]


def write_mean_image(stack: Stack, path, fmt: Optional[str] = None) -> np.ndarray:
    """Write the pixel-wise mean over frames as a single float image."""
    mean = stack.mean_image()
    save_stack(Stack(mean[None], "float"), path, fmt)
    return mean


def ensure_parent(path) -> None:
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
