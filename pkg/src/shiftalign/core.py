"""Shared types: stacks, shifts and alignment configuration.

Frames are plain 2D ``numpy.float64`` arrays indexed ``[row, col]``. A
:class:`Stack` wraps a read-only ``(T, m, n)`` array together with the bit
depth the pixels came from, so corrected output can be written back at the
same depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

BitDepth = Union[int, str]
VALID_BIT_DEPTHS = (8, 16, "float")

# Deeper pyramids lose too much detail at the coarsest level to be trusted.
MAX_DOWNSAMPLE_LEVELS = 2

# Images larger than this (in either dimension) are aligned one level down.
AUTO_DOWNSAMPLE_ABOVE = 256


class ConfigError(ValueError):
    """Invalid alignment configuration for the data it is applied to."""


class AlignmentError(RuntimeError):
    """A single frame could not be aligned."""


def as_frame(x) -> np.ndarray:
    """Coerce ``x`` to a finite 2D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"frame must be 2D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("frame must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("frame contains NaN or Inf")
    return arr


def max_intensity(bit_depth: BitDepth) -> Optional[int]:
    """Largest representable value for an integer bit depth, else ``None``."""
    if bit_depth == "float":
        return None
    return 2 ** int(bit_depth) - 1


@dataclass(frozen=True)
class Stack:
    """An ordered, immutable sequence of equally sized frames.

    Attributes:
        frames: ``(T, m, n)`` float64 array; made read-only on construction.
        bit_depth: 8, 16 or ``"float"``; the depth of the source pixels.
    """

    frames: np.ndarray
    bit_depth: BitDepth = "float"

    def __post_init__(self):
        if self.bit_depth not in VALID_BIT_DEPTHS:
            raise ValueError(f"bit_depth must be one of {VALID_BIT_DEPTHS}")
        arr = np.array(self.frames, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError(f"stack must have shape (T, m, n) with T >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("stack contains NaN or Inf")
        top = max_intensity(self.bit_depth)
        if top is not None and (arr.min() < 0 or arr.max() > top):
            raise ValueError(f"intensities outside [0, {top}] for {self.bit_depth}-bit data")
        arr.flags.writeable = False
        object.__setattr__(self, "frames", arr)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        """Frame dimensions ``(m, n)``."""
        return self.frames.shape[1], self.frames.shape[2]

    def __len__(self):
        return self.frame_count

    def __getitem__(self, k) -> np.ndarray:
        return self.frames[k]

    def mean_image(self) -> np.ndarray:
        return self.frames.mean(axis=0)


@dataclass(frozen=True)
class Shift:
    """Integer displacement ``(s, t)`` and its area-normalized L2 score.

    A shift ``(s, t)`` pairs frame pixel ``(i + s, j + t)`` with template pixel
    ``(i, j)``; ``apply_shift`` with the same shift moves the frame into
    template coordinates.
    """

    s: int
    t: int
    score: float = 0.0
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        if not self.score >= 0:
            raise ValueError(f"score must be nonnegative, got {self.score}")

    @property
    def offset(self) -> Tuple[int, int]:
        return self.s, self.t

    def chebyshev(self, other: "Shift") -> int:
        return max(abs(self.s - other.s), abs(self.t - other.t))

    def inverse(self) -> "Shift":
        return Shift(-self.s, -self.t, self.score, self.flags)


@dataclass(frozen=True)
class AlignConfig:
    """Parameters of one alignment run.

    Attributes:
        max_shift: bound ``w``; only shifts with ``max(|s|, |t|) < w`` are searched.
        template_index: frame used as template, or ``None`` when an external
            template array is supplied to :func:`~shiftalign.aligner.align_stack`.
        downsample_levels: number of 2x pyramid levels below full resolution.

    Ties between equally scored shifts always go to the smallest ``|s| + |t|``,
    then the lexicographically smallest ``(s, t)``.
    """

    max_shift: int
    template_index: Optional[int] = 0
    downsample_levels: int = 0
    tie_break: str = field(default="least-motion", init=False)

    def __post_init__(self):
        if int(self.max_shift) != self.max_shift or self.max_shift < 1:
            raise ConfigError(f"max_shift must be a positive integer, got {self.max_shift}")
        if self.downsample_levels not in range(MAX_DOWNSAMPLE_LEVELS + 1):
            raise ConfigError(
                f"downsample_levels must be 0..{MAX_DOWNSAMPLE_LEVELS}, got "
                f"{self.downsample_levels}; 3 or more levels cause severe alignment errors"
            )
        if self.template_index is not None and self.template_index < 0:
            raise ConfigError("template_index must be nonnegative")

    def level_shift_bound(self, level: int) -> int:
        return max(1, self.max_shift // 2**level)

    def validate_for(self, shape: Tuple[int, int], frame_count: Optional[int] = None) -> None:
        """Raise :class:`ConfigError` unless this config can run on ``shape`` frames."""
        m, n = shape
        if self.max_shift >= min(m, n):
            raise ConfigError(f"max_shift {self.max_shift} must be < min(m, n) = {min(m, n)}")
        for level in range(self.downsample_levels + 1):
            lm, ln = m >> level, n >> level
            wl = self.level_shift_bound(level)
            if wl >= min(lm, ln):
                raise ConfigError(
                    f"level {level} frames are {lm}x{ln}, too small for shift bound {wl}"
                )
        if (
            frame_count is not None
            and self.template_index is not None
            and self.template_index >= frame_count
        ):
            raise ConfigError(
                f"template_index {self.template_index} out of range for {frame_count} frames"
            )


def make_auto_config(frame_dims: Tuple[int, int]) -> AlignConfig:
    """Default configuration: template = first frame, w = min(m, n) // 3,
    one downsampling level when either side exceeds 256 pixels."""
    m, n = frame_dims
    if m < 3 or n < 3:
        raise ConfigError(f"frames must be at least 3x3 for automatic config, got {m}x{n}")
    levels = 1 if (m > AUTO_DOWNSAMPLE_ABOVE or n > AUTO_DOWNSAMPLE_ABOVE) else 0
    return AlignConfig(max_shift=min(m, n) // 3, template_index=0, downsample_levels=levels)
