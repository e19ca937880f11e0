"""Synthetic calcium-imaging-like stacks with known drift.

The scene is a baseline plus Gaussian blobs ("cells"). Frame ``k`` is the
scene moved by ``trajectory[k]`` through :func:`~shiftalign.aligner.apply_shift`
(zero-filled borders), plus i.i.d. Gaussian noise, rounded and clipped to the
integer range of ``bit_depth``.

Because ``apply_shift(scene, sigma)`` moves content by ``-sigma``, the shift the
aligner should recover for frame ``k`` is the inverse of ``trajectory[k]``
(when frame 0 is undisplaced).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .aligner import apply_shift
from .core import Shift, Stack, max_intensity


@dataclass
class SynthSpec:
    """Parameters of a synthetic stack.

    ``trajectory`` is either an explicit list of ``(s, t)`` pairs, one per
    frame, or ``None`` for a seeded random walk that starts at ``(0, 0)``, takes
    steps of at most ``walk_step`` per axis and stays within ``max_drift``.
    """

    rows: int = 128
    cols: int = 128
    frames: int = 50
    cell_count: int = 60
    radius_min: float = 2.0
    radius_max: float = 5.0
    baseline: float = 100.0
    peak: float = 1000.0
    noise_sigma: float = 0.0
    rng_seed: int = 0
    bit_depth: object = 16
    max_drift: int = 20
    walk_step: int = 4
    trajectory: Optional[List[Tuple[int, int]]] = None

    def __post_init__(self):
        if self.rows < 3 or self.cols < 3 or self.frames < 1:
            raise ValueError("need rows, cols >= 3 and frames >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 < self.radius_min <= self.radius_max:
            raise ValueError("need 0 < radius_min <= radius_max")
        if self.bit_depth not in (8, 16, "float"):
            raise ValueError("bit_depth must be 8, 16 or 'float'")
        if self.trajectory is not None:
            self.trajectory = [(int(s), int(t)) for s, t in self.trajectory]
            if len(self.trajectory) != self.frames:
                raise ValueError(
                    f"trajectory has {len(self.trajectory)} shifts for {self.frames} frames"
                )
            self._check_bounds(self.trajectory)
        elif 3 * self.max_drift >= min(self.rows, self.cols):
            raise ValueError("max_drift must stay below min(rows, cols) / 3")

    def _check_bounds(self, traj):
        limit = min(self.rows, self.cols)
        for s, t in traj:
            if 3 * max(abs(s), abs(t)) >= limit:
                raise ValueError(f"trajectory shift {(s, t)} not below min(rows, cols)/3")

    @property
    def dynamic_range(self) -> float:
        return self.baseline + self.peak

    def resolve_trajectory(self) -> List[Tuple[int, int]]:
        if self.trajectory is not None:
            return list(self.trajectory)
        return random_walk(self.frames, self.max_drift, self.walk_step, self.rng_seed)


def random_walk(frames: int, max_drift: int, step: int, seed: int) -> List[Tuple[int, int]]:
    rng = np.random.default_rng([seed, 1])
    pos = np.zeros(2, dtype=np.int64)
    out = [(0, 0)]
    for _ in range(frames - 1):
        pos = np.clip(pos + rng.integers(-step, step + 1, size=2), -max_drift, max_drift)
        out.append((int(pos[0]), int(pos[1])))
    return out


def render_scene(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:spec.rows, 0:spec.cols].astype(np.float64)
    scene = np.full((spec.rows, spec.cols), float(spec.baseline))
    centers = rng.uniform([0, 0], [spec.rows, spec.cols], size=(spec.cell_count, 2))
    radii = rng.uniform(spec.radius_min, spec.radius_max, size=spec.cell_count)
    gains = rng.uniform(0.3, 1.0, size=spec.cell_count)
    for (cy, cx), r, g in zip(centers, radii, gains):
        scene += spec.peak * g * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
    return scene


def generate(spec: SynthSpec) -> Tuple[Stack, List[Shift]]:
    """Render the stack described by ``spec``; returns it with the trajectory."""
    traj = spec.resolve_trajectory()
    if len(traj) != spec.frames:
        raise ValueError(f"trajectory has {len(traj)} shifts for {spec.frames} frames")
    rng = np.random.default_rng(spec.rng_seed)
    scene = render_scene(spec, rng)
    top = max_intensity(spec.bit_depth)
    if top is not None:
        scene = np.clip(np.rint(scene), 0, top)
    frames = np.empty((spec.frames, spec.rows, spec.cols))
    for k, (s, t) in enumerate(traj):
        frame = apply_shift(scene, (s, t))
        if spec.noise_sigma > 0:
            frame = frame + rng.normal(0.0, spec.noise_sigma, size=frame.shape)
        if top is not None:
            frame = np.clip(np.rint(frame), 0, top)
        frames[k] = frame
    return Stack(frames, spec.bit_depth), [Shift(s, t) for s, t in traj]


@dataclass(frozen=True)
class RecoveryReport:
    errors: Tuple[int, ...]
    exact_rate: float
    max_error: int

    def within(self, tol: int) -> float:
        return float(np.mean([e <= tol for e in self.errors]))


def score_recovery(recovered: Sequence[Shift], truth: Sequence[Shift]) -> RecoveryReport:
    """Compare recovered shifts with the inverse of the ground-truth trajectory."""
    if len(recovered) != len(truth):
        raise ValueError(f"{len(recovered)} recovered shifts for {len(truth)} ground-truth shifts")
    if not recovered:
        raise ValueError("empty trajectories")
    errors = tuple(r.chebyshev(g.inverse()) for r, g in zip(recovered, truth))
    return RecoveryReport(errors, sum(e == 0 for e in errors) / len(errors), max(errors))


# key in the config file -> SynthSpec field
_ALIASES: Dict[str, str] = {"seed": "rng_seed", "t": "frames", "m": "rows", "n": "cols"}


def parse_synth_spec(text: str) -> SynthSpec:
    """Parse a flat ``key = value`` config (``#`` starts a comment).

    Keys are :class:`SynthSpec` field names. ``trajectory`` is either ``walk``
    or ``;``-separated ``s,t`` pairs.
    """
    known = {f.name: f for f in fields(SynthSpec)}
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = _ALIASES.get(key.lower(), key.lower())
        if key not in known:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key == "trajectory":
            if value.lower() == "walk":
                kwargs[key] = None
            else:
                pairs = [p for p in value.split(";") if p.strip()]
                kwargs[key] = [tuple(int(v) for v in p.split(",")) for p in pairs]
        elif key == "bit_depth":
            kwargs[key] = "float" if value.lower() == "float" else int(value)
        elif key in ("rows", "cols", "frames", "cell_count", "rng_seed", "max_drift", "walk_step"):
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return SynthSpec(**kwargs)


def load_synth_spec(path) -> SynthSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_synth_spec(fh.read())
