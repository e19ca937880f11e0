"""Cross term ``h[s, t] = sum_D a[i+s, j+t] * b[i, j]`` for all shifts at once.

Zero-pad ``a`` and the 180-degree-rotated template to at least ``(m+w, n+w)``,
multiply their spectra and invert. The resulting circular convolution holds
``h[s, t]`` at position ``(m - 1 + s, n - 1 + t)``: the linear convolution has
support ``[0, 2m - 2]`` per axis, so with a transform length ``M >= m + w`` the
wrapped tail reaches at most index ``m - w - 2`` and never touches the needed
lags ``m - w .. m + w - 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import fft as sfft

from .core import as_frame
from .overlap import _check_bound, _check_pair, overlap


@dataclass(frozen=True)
class CorrGrid:
    """``(2w-1, 2w-1)`` table of ``h[s, t]`` and the transform size used."""

    w: int
    values: np.ndarray
    fft_dims: Tuple[int, int]

    def at(self, s: int, t: int) -> float:
        return float(self.values[s + self.w - 1, t + self.w - 1])


def rotate_180(b) -> np.ndarray:
    return np.ascontiguousarray(as_frame(b)[::-1, ::-1])


def fft_dims_for(m: int, n: int, w: int) -> Tuple[int, int]:
    """Smallest 5-smooth transform size covering ``(m + w, n + w)``."""
    return sfft.next_fast_len(m + w, real=True), sfft.next_fast_len(n + w, real=True)


@dataclass(frozen=True)
class TemplateSpectrum:
    """Padded spectrum of the rotated template, reusable across frames."""

    shape: Tuple[int, int]
    w: int
    fft_dims: Tuple[int, int]
    spectrum: np.ndarray

    @classmethod
    def build(cls, b, w: int, fft_dims: Optional[Tuple[int, int]] = None):
        b = as_frame(b)
        m, n = b.shape
        _check_bound(b.shape, w)
        if fft_dims is None:
            fft_dims = fft_dims_for(m, n, w)
        if fft_dims[0] < m + w or fft_dims[1] < n + w:
            raise ValueError(f"fft_dims {fft_dims} smaller than required {(m + w, n + w)}")
        spec = sfft.rfft2(rotate_180(b), s=fft_dims)
        spec.flags.writeable = False
        return cls((m, n), w, tuple(fft_dims), spec)

    def correlate(self, a) -> CorrGrid:
        a = as_frame(a)
        if a.shape != self.shape:
            raise ValueError(f"frame {a.shape} does not match template {self.shape}")
        m, n = self.shape
        w = self.w
        conv = sfft.irfft2(sfft.rfft2(a, s=self.fft_dims) * self.spectrum, s=self.fft_dims)
        return CorrGrid(w, conv[m - w:m + w - 1, n - w:n + w - 1].copy(), self.fft_dims)


def compute_corr_grid(a, b, w: int, fft_dims: Optional[Tuple[int, int]] = None) -> CorrGrid:
    a, b = _check_pair(a, b)
    return TemplateSpectrum.build(b, w, fft_dims).correlate(a)


def direct_corr(a, b, s: int, t: int) -> float:
    """``h[s, t]`` by direct summation over the overlap."""
    a, b = _check_pair(a, b)
    region = overlap(*a.shape, s, t)
    return float(np.sum(a[region.frame_slices()] * b[region.template_slices()]))
