"""Overlap geometry, the brute-force score oracle and the squared-sum tables.

For a frame ``a`` and template ``b`` (both ``m x n``) the score of shift
``(s, t)`` is::

    f[s, t] = sum_{(i, j) in D} (a[i+s, j+t] - b[i, j])**2 / |D|

where ``D`` holds the template indices that stay inside both images. Expanding
the square splits ``|D| * f`` into ``sum a**2 + sum b**2 - 2 * sum a*b``. The two
squared terms come from corner-anchored cumulative sums (this module); the
cross term comes from an FFT correlation (:mod:`shiftalign.xcorr`).

Shift-indexed tables are ``(2w - 1, 2w - 1)`` arrays; entry ``[s + w - 1, t + w - 1]``
belongs to shift ``(s, t)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import as_frame

# Tolerance (relative to the mean squared intensity) under which two scores
# count as tied; well above FFT round-off, far below any real score gap.
TIE_RTOL = 1e-10

# Assembled scores closer than this (relative to the largest) to zero are zero.
SNAP_RTOL = 1e-9


class EmptyOverlapError(ValueError):
    """The requested shift leaves no pixels shared by frame and template."""


@dataclass(frozen=True)
class OverlapRegion:
    """Template-coordinate rectangle ``rows x cols`` (0-based, half open)
    shared by template and frame at shift ``(s, t)``."""

    s: int
    t: int
    rows: Tuple[int, int]
    cols: Tuple[int, int]

    @property
    def area(self) -> int:
        return (self.rows[1] - self.rows[0]) * (self.cols[1] - self.cols[0])

    def template_slices(self):
        return slice(*self.rows), slice(*self.cols)

    def frame_slices(self):
        return (
            slice(self.rows[0] + self.s, self.rows[1] + self.s),
            slice(self.cols[0] + self.t, self.cols[1] + self.t),
        )


def overlap(m: int, n: int, s: int, t: int) -> OverlapRegion:
    if abs(s) >= m or abs(t) >= n or m < 1 or n < 1:
        raise EmptyOverlapError(f"shift ({s}, {t}) leaves no overlap in a {m}x{n} frame")
    return OverlapRegion(
        s, t, (max(0, -s), min(m, m - s)), (max(0, -t), min(n, n - t))
    )


def _check_pair(a, b) -> Tuple[np.ndarray, np.ndarray]:
    a = as_frame(a)
    b = as_frame(b)
    if a.shape != b.shape:
        raise ValueError(f"frame {a.shape} and template {b.shape} differ in shape")
    return a, b


def score_oracle(a, b, s: int, t: int) -> float:
    """Score of a single shift by direct summation over the overlap.

    This is the reference every fast path is checked against; it never uses
    the squared-sum decomposition.
    """
    a, b = _check_pair(a, b)
    region = overlap(*a.shape, s, t)
    diff = a[region.frame_slices()] - b[region.template_slices()]
    return float(np.sum(diff * diff)) / region.area


def oracle_score_grid(a, b, w: int) -> np.ndarray:
    """Exhaustive :func:`score_oracle` over every shift with ``max(|s|,|t|) < w``."""
    a, b = _check_pair(a, b)
    out = np.empty((2 * w - 1, 2 * w - 1))
    for s in range(-(w - 1), w):
        for t in range(-(w - 1), w):
            out[s + w - 1, t + w - 1] = score_oracle(a, b, s, t)
    return out


def _check_bound(shape, w):
    # every shift with max(|s|, |t|) < w must keep a nonempty overlap
    m, n = shape
    if int(w) != w or w < 1 or w > min(m, n):
        raise ValueError(f"shift bound w={w} must satisfy 1 <= w <= min(m, n) = {min(m, n)}")


def corner_sum_table(x: np.ndarray, w: int) -> np.ndarray:
    """``T[s, t] = sum of x**2`` over the frame-side overlap at shift ``(s, t)``.

    For ``s <= 0`` the kept rows are the top ``m + s`` rows, for ``s >= 0`` the
    bottom ``m - s``; likewise for columns. Each of the four sign quadrants is
    therefore a rectangle anchored at one corner of ``x``. Flipping ``x`` so that
    corner sits at the origin reduces every quadrant to the recurrence::

        g[p, q] = g[p-1, q] + g[p, q-1] - g[p-1, q-1] + x[p, q]**2

    with ``g = 0`` outside the image, i.e. a cumulative sum along both axes.
    Only the last ``w`` rows and columns of ``g`` are ever read, so the leading
    ``m - w`` rows (and ``n - w`` columns) are collapsed into one base-case sum
    and the recurrence runs over the ``w``-wide band alone. Integer-valued
    inputs give exact results.
    """
    m, n = x.shape
    _check_bound(x.shape, w)
    sq = x * x
    out = np.empty((2 * w - 1, 2 * w - 1))
    # flipping rows anchors the s >= 0 quadrant (trailing rows kept) at the origin
    for row_flip in (False, True):
        g = sq[::-1] if row_flip else sq
        # band[k] = column sums of the leading m - w + 1 + k rows
        band = g[: m - w].sum(axis=0) + np.cumsum(g[m - w:], axis=0)
        for col_flip in (False, True):
            h = band[:, ::-1] if col_flip else band
            c = h[:, : n - w].sum(axis=1, keepdims=True) + np.cumsum(h[:, n - w:], axis=1)
            # corner[k, l] = sum of the leading (m - k) x (n - l) block,
            # i.e. shift (-k or +k, -l or +l) depending on the flips
            corner = c[::-1, ::-1]
            if row_flip:
                rows = slice(w - 1, None)
            else:
                rows = slice(0, w)
                corner = corner[::-1]
            if col_flip:
                cols = slice(w - 1, None)
            else:
                cols = slice(0, w)
                corner = corner[:, ::-1]
            out[rows, cols] = corner
    return out


@dataclass(frozen=True)
class PrefixTables:
    """Squared-sum tables over the overlap for every shift in range.

    ``sq_a[s, t] = sum_D a[i+s, j+t]**2`` and ``sq_b[s, t] = sum_D b[i, j]**2``.
    """

    w: int
    sq_a: np.ndarray
    sq_b: np.ndarray

    def at(self, s: int, t: int) -> Tuple[float, float]:
        k = self.w - 1
        return float(self.sq_a[s + k, t + k]), float(self.sq_b[s + k, t + k])


def template_sum_table(b: np.ndarray, w: int) -> np.ndarray:
    """``sq_b`` for template ``b``.

    The template-side overlap at ``(s, t)`` is the frame-side overlap at
    ``(-s, -t)``, so this is :func:`corner_sum_table` reversed on both axes.
    """
    return corner_sum_table(b, w)[::-1, ::-1].copy()


def build_prefix_tables(a, b, w: int) -> PrefixTables:
    a, b = _check_pair(a, b)
    return PrefixTables(w, corner_sum_table(a, w), template_sum_table(b, w))


def area_table(m: int, n: int, w: int) -> np.ndarray:
    k = np.abs(np.arange(-(w - 1), w))
    return np.outer(m - k, n - k).astype(np.float64)


@dataclass(frozen=True)
class ScoreGrid:
    """Dense table of scores ``f[s, t]`` for ``-(w-1) <= s, t <= w-1``."""

    w: int
    values: np.ndarray

    def at(self, s: int, t: int) -> float:
        return float(self.values[s + self.w - 1, t + self.w - 1])

    def best(self, tie_scale: float = 0.0) -> Tuple[int, int, float]:
        """Argmin under the least-motion tie-break.

        Scores within ``TIE_RTOL * tie_scale`` of the minimum are treated as
        tied; ``tie_scale`` should be the squared-intensity scale of the data.
        """
        return pick_best(self.values, self.w - 1, self.w - 1, tie_scale)


def pick_best(values: np.ndarray, s_origin: int, t_origin: int, tie_scale: float = 0.0):
    """Index the smallest finite entry of ``values`` and return ``(s, t, score)``.

    ``values[r, c]`` belongs to shift ``(r - s_origin, c - t_origin)``. Among
    near-ties the smallest ``|s| + |t|`` wins, then the smallest ``(s, t)``.
    """
    finite = np.isfinite(values)
    if not finite.any():
        raise ValueError("no admissible shift to choose from")
    fmin = values[finite].min()
    tied_r, tied_c = np.nonzero(finite & (values <= fmin + TIE_RTOL * tie_scale))
    best = min(
        zip(tied_r - s_origin, tied_c - t_origin),
        key=lambda st: (abs(st[0]) + abs(st[1]), st[0], st[1]),
    )
    s, t = int(best[0]), int(best[1])
    return s, t, float(values[s + s_origin, t + t_origin])


def assemble_scores(sq: PrefixTables, h, w: int, dims: Tuple[int, int]) -> ScoreGrid:
    """Combine the squared-sum tables and cross term into scores.

    ``h`` is a :class:`~shiftalign.xcorr.CorrGrid` or a bare array of the same
    shape. Entries within ``SNAP_RTOL * max|f|`` of zero are round-off and
    are set to exactly zero, which also removes negative residue.
    """
    h_values = getattr(h, "values", h)
    h_w = getattr(h, "w", w)
    shape = (2 * w - 1, 2 * w - 1)
    if sq.w != w or h_w != w or sq.sq_a.shape != shape or np.shape(h_values) != shape:
        raise ValueError("prefix tables, correlation grid and bound cover different shift ranges")
    m, n = dims
    f = (sq.sq_a + sq.sq_b - 2.0 * h_values) / area_table(m, n, w)
    eps = SNAP_RTOL * np.max(np.abs(f))
    f[f < eps] = 0.0
    return ScoreGrid(w, f)
