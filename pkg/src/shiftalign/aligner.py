"""Per-frame alignment and the whole-stack driver.

Each frame is block-averaged down the pyramid, searched exhaustively at the
coarsest level with the FFT/prefix-sum score grid, and then walked back up:
at every finer level the shift is doubled and the nine neighbours
``(2s + u, 2t + v)``, ``u, v in {-1, 0, 1}``, are scored directly.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .core import AlignConfig, AlignmentError, ConfigError, Shift, Stack, as_frame
from .overlap import (
    PrefixTables,
    ScoreGrid,
    assemble_scores,
    corner_sum_table,
    oracle_score_grid,
    pick_best,
    score_oracle,
    template_sum_table,
)
from .xcorr import TemplateSpectrum

logger = logging.getLogger(__name__)

ProgressSink = Callable[[int, int], None]

BOUNDARY = "boundary"
FAILED = "failed"

# Template rows processed per pass of the nine-candidate refinement.
REFINE_BAND_ROWS = 64


def downsample(f) -> np.ndarray:
    """2x2 block mean; a trailing odd row or column is dropped."""
    f = as_frame(f)
    m, n = f.shape
    if m < 2 or n < 2:
        raise ValueError(f"cannot downsample a {m}x{n} frame")
    m2, n2 = m // 2, n // 2
    blocks = f[: 2 * m2, : 2 * n2].reshape(m2, 2, n2, 2)
    return blocks.mean(axis=(1, 3))


def _tie_scale(a: np.ndarray, b: np.ndarray) -> float:
    # typical magnitude of the squared terms that cancel in a score
    return float(np.mean(a * a) + np.mean(b * b))


@dataclass(frozen=True)
class _LevelTemplate:
    """Template data at one pyramid level, shared read-only by all workers."""

    level: int
    image: np.ndarray
    w: int
    sq_b: Optional[np.ndarray] = None
    spectrum: Optional[TemplateSpectrum] = None


class TemplatePyramid:
    """Template downsampled ``levels`` times, with the coarse-level spectrum
    and squared-sum table precomputed once per stack."""

    def __init__(self, template, config: AlignConfig):
        template = as_frame(template)
        config.validate_for(template.shape)
        self.config = config
        images = [template]
        for _ in range(config.downsample_levels):
            images.append(downsample(images[-1]))
        top = config.downsample_levels
        levels = []
        for k, img in enumerate(images):
            wk = config.level_shift_bound(k)
            if k == top:
                levels.append(
                    _LevelTemplate(k, img, wk, template_sum_table(img, wk), TemplateSpectrum.build(img, wk))
                )
            else:
                levels.append(_LevelTemplate(k, img, wk))
        self.levels: Tuple[_LevelTemplate, ...] = tuple(levels)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.levels[0].image.shape

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k) -> np.ndarray:
        return self.levels[k].image


def _score_grid(a: np.ndarray, tpl: _LevelTemplate) -> ScoreGrid:
    w = tpl.w
    tables = PrefixTables(w, corner_sum_table(a, w), tpl.sq_b)
    return assemble_scores(tables, tpl.spectrum.correlate(a), w, a.shape)


def coarse_align(a, b, w: int) -> Shift:
    """Exhaustive argmin of the score over ``max(|s|, |t|) < w``.

    The winner is rescored by direct summation, so a perfect match reports
    exactly zero.
    """
    a = as_frame(a)
    b = as_frame(b)
    tpl = _LevelTemplate(0, b, w, template_sum_table(b, w), TemplateSpectrum.build(b, w))
    return _coarse(a, tpl)


def _coarse(a: np.ndarray, tpl: _LevelTemplate) -> Shift:
    grid = _score_grid(a, tpl)
    s, t, _ = grid.best(_tie_scale(a, tpl.image))
    return Shift(s, t, score_oracle(a, tpl.image, s, t))


def nine_candidate_scores(a: np.ndarray, b: np.ndarray, center: Tuple[int, int], w: int) -> np.ndarray:
    """Scores of the 3x3 neighbourhood of ``center``; ``inf`` where out of bounds.

    Template rows are visited in bands; each band feeds all nine accumulators
    before moving on, so the three frame rows a band touches per candidate row
    offset are reused while still in cache.
    """
    m, n = a.shape
    cs, ct = center
    sums = np.zeros((3, 3))
    valid = np.zeros((3, 3), dtype=bool)
    ranges = {}
    for u in (-1, 0, 1):
        for v in (-1, 0, 1):
            p, q = cs + u, ct + v
            if max(abs(p), abs(q)) < w and abs(p) < m and abs(q) < n:
                valid[u + 1, v + 1] = True
                ranges[u, v] = ((max(0, -p), min(m, m - p)), (max(0, -q), min(n, n - q)))
    for r0 in range(0, m, REFINE_BAND_ROWS):
        r1 = min(m, r0 + REFINE_BAND_ROWS)
        for (u, v), ((lo, hi), (c0, c1)) in ranges.items():
            lo, hi = max(lo, r0), min(hi, r1)
            if lo >= hi:
                continue
            p, q = cs + u, ct + v
            d = a[lo + p:hi + p, c0 + q:c1 + q] - b[lo:hi, c0:c1]
            sums[u + 1, v + 1] += np.einsum("ij,ij->", d, d)
    out = np.full((3, 3), np.inf)
    if valid.any():
        k = np.arange(-1, 2)
        areas = np.outer(m - np.abs(cs + k), n - np.abs(ct + k)).astype(np.float64)
        out[valid] = sums[valid] / areas[valid]
    return out


def refine_upsample(shift: Shift, a_fine, b_fine, w: int) -> Shift:
    """Double a coarse shift and pick the best of its nine fine-level neighbours."""
    a_fine = as_frame(a_fine)
    b_fine = as_frame(b_fine)
    center = (2 * shift.s, 2 * shift.t)
    scores = nine_candidate_scores(a_fine, b_fine, center, w)
    if not np.isfinite(scores).any():
        raise AlignmentError(f"no refinement candidate around {center} lies within bound {w}")
    s, t, score = pick_best(scores, 1 - center[0], 1 - center[1], _tie_scale(a_fine, b_fine))
    return Shift(s, t, score)


def _pyramid_of(a: np.ndarray, levels: int) -> List[np.ndarray]:
    out = [a]
    for _ in range(levels):
        out.append(downsample(out[-1]))
    return out


def align_frame(a, template_pyramid, config: AlignConfig) -> Shift:
    """Full-resolution shift of frame ``a`` against the template.

    ``template_pyramid`` is a :class:`TemplatePyramid` or a plain sequence of
    template images, finest first.
    """
    a = as_frame(a)
    if not isinstance(template_pyramid, TemplatePyramid):
        images = list(template_pyramid)
        if len(images) != config.downsample_levels + 1:
            raise ConfigError(
                f"template pyramid has {len(images)} levels, config needs {config.downsample_levels + 1}"
            )
        template_pyramid = TemplatePyramid(images[0], config)
    elif template_pyramid.config.downsample_levels != config.downsample_levels or (
        template_pyramid.config.max_shift != config.max_shift
    ):
        raise ConfigError("template pyramid was built for a different config")
    if a.shape != template_pyramid.shape:
        raise ValueError(f"frame {a.shape} does not match template {template_pyramid.shape}")
    frames = _pyramid_of(a, config.downsample_levels)
    top = config.downsample_levels
    shift = _coarse(frames[top], template_pyramid.levels[top])
    for k in range(top - 1, -1, -1):
        tpl = template_pyramid.levels[k]
        shift = refine_upsample(shift, frames[k], tpl.image, tpl.w)
    w = config.max_shift
    if w > 1 and max(abs(shift.s), abs(shift.t)) == w - 1:
        shift = Shift(shift.s, shift.t, shift.score, (BOUNDARY,))
    return shift


def apply_shift(f, shift) -> np.ndarray:
    """Move frame ``f`` into template coordinates; exposed pixels become 0.

    ``out[i, j] = f[i + s, j + t]`` wherever that source pixel exists.
    """
    f = as_frame(f)
    s, t = (shift.s, shift.t) if isinstance(shift, Shift) else shift
    m, n = f.shape
    out = np.zeros_like(f)
    if abs(s) >= m or abs(t) >= n:
        return out
    r0, r1 = max(0, -s), min(m, m - s)
    c0, c1 = max(0, -t), min(n, n - t)
    out[r0:r1, c0:c1] = f[r0 + s:r1 + s, c0 + t:c1 + t]
    return out


@dataclass(frozen=True)
class AlignmentResult:
    """Shift trajectory, corrected stack and the config that produced them."""

    shifts: Tuple[Shift, ...]
    corrected: Stack
    config: AlignConfig

    @property
    def failed_frames(self) -> List[int]:
        return [k for k, sh in enumerate(self.shifts) if FAILED in sh.flags]

    @property
    def offsets(self) -> np.ndarray:
        """``(T, 2)`` integer array of ``(s, t)``."""
        return np.array([sh.offset for sh in self.shifts], dtype=np.int64).reshape(-1, 2)


def resolve_threads(threads) -> int:
    if threads in (None, "auto"):
        return os.cpu_count() or 1
    threads = int(threads)
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    return threads


def align_stack(
    stack: Stack,
    config: AlignConfig,
    progress_sink: Optional[ProgressSink] = None,
    template=None,
    threads=1,
) -> AlignmentResult:
    """Align every frame of ``stack`` against one template.

    Args:
        stack: frames to correct.
        config: alignment parameters. ``config.template_index`` picks the
            template from the stack unless ``template`` is given.
        progress_sink: called as ``sink(frames_done, frames_total)`` after
            each frame, in frame order.
        template: external template image, used when ``config.template_index``
            is ``None``.
        threads: worker count, or ``"auto"``. Results do not depend on it.

    Frames whose alignment fails keep a zero shift and carry the ``"failed"``
    flag instead of aborting the run.
    """
    if config.template_index is None:
        if template is None:
            raise ConfigError("config has no template_index and no external template was given")
        template = as_frame(template)
        if template.shape != stack.shape:
            raise ConfigError(f"template {template.shape} does not match frames {stack.shape}")
    else:
        if template is not None:
            raise ConfigError("pass either template_index or an external template, not both")
        config.validate_for(stack.shape, stack.frame_count)
        template = stack[config.template_index]
    pyramid = TemplatePyramid(template, config)
    total = stack.frame_count

    def work(k: int) -> Shift:
        try:
            return align_frame(stack[k], pyramid, config)
        except (AlignmentError, FloatingPointError) as exc:
            logger.warning("frame %d failed to align: %s", k, exc)
            return Shift(0, 0, score_oracle(stack[k], template, 0, 0), (FAILED,))

    n_workers = min(resolve_threads(threads), total)
    shifts: List[Shift] = []
    if n_workers == 1:
        results = map(work, range(total))
        for sh in results:
            shifts.append(sh)
            if progress_sink is not None:
                progress_sink(len(shifts), total)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            for sh in pool.map(work, range(total)):
                shifts.append(sh)
                if progress_sink is not None:
                    progress_sink(len(shifts), total)

    corrected = np.stack([apply_shift(stack[k], sh) for k, sh in enumerate(shifts)])
    return AlignmentResult(tuple(shifts), Stack(corrected, stack.bit_depth), config)


def exhaustive_oracle_align(a, b, w: int) -> Shift:
    """Argmin of :func:`score_oracle` over the full range; slow reference."""
    a = as_frame(a)
    b = as_frame(b)
    grid = oracle_score_grid(a, b, w)
    s, t, score = pick_best(grid, w - 1, w - 1, _tie_scale(a, b))
    return Shift(s, t, score)
