"""Translation-only motion correction for grayscale image stacks."""

__version__ = "0.1.0"

from .aligner import (
    AlignmentResult,
    TemplatePyramid,
    align_frame,
    align_stack,
    apply_shift,
    coarse_align,
    downsample,
    refine_upsample,
)
from .core import AlignConfig, AlignmentError, ConfigError, Shift, Stack, make_auto_config
from .overlap import (
    EmptyOverlapError,
    PrefixTables,
    ScoreGrid,
    assemble_scores,
    build_prefix_tables,
    overlap,
    score_oracle,
)
from .stackio import load_stack, save_stack, write_mean_image, write_shift_log
from .synth import SynthSpec, generate, score_recovery
from .xcorr import CorrGrid, compute_corr_grid, direct_corr, rotate_180

__all__ = [
    "AlignConfig",
    "AlignmentError",
    "AlignmentResult",
    "ConfigError",
    "CorrGrid",
    "EmptyOverlapError",
    "PrefixTables",
    "ScoreGrid",
    "Shift",
    "Stack",
    "SynthSpec",
    "TemplatePyramid",
    "align_frame",
    "align_stack",
    "apply_shift",
    "assemble_scores",
    "build_prefix_tables",
    "coarse_align",
    "compute_corr_grid",
    "direct_corr",
    "downsample",
    "generate",
    "load_stack",
    "make_auto_config",
    "overlap",
    "refine_upsample",
    "rotate_180",
    "save_stack",
    "score_oracle",
    "score_recovery",
    "write_mean_image",
    "write_shift_log",
]
