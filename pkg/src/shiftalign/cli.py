"""Command-line entry point: ``shiftalign align|synth|bench``.

Exit status is 0 on success, 1 when some frames failed to align (outputs are
still written) and 2 on invalid input.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import List, Optional

import numpy as np

from . import __version__
from .aligner import TemplatePyramid, align_frame, align_stack, resolve_threads
from .core import MAX_DOWNSAMPLE_LEVELS, AlignConfig, ConfigError, make_auto_config
from .overlap import score_oracle
from .stackio import (
    StackIOError,
    ensure_parent,
    load_stack,
    save_stack,
    write_mean_image,
    write_shift_log,
)
from .synth import generate, load_synth_spec

logger = logging.getLogger("shiftalign")

EXIT_OK, EXIT_FRAME_FAILURES, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


def _auto_or_int(value: str):
    if value == "auto":
        return value
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {value!r}")


def _levels(value: str):
    v = _auto_or_int(value)
    if v != "auto" and not 0 <= v <= MAX_DOWNSAMPLE_LEVELS:
        raise argparse.ArgumentTypeError(
            f"levels must be 0..{MAX_DOWNSAMPLE_LEVELS} or auto; "
            "downsampling 3 or more times causes severe alignment errors"
        )
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftalign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="motion-correct a stack")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    tpl = p.add_mutually_exclusive_group()
    tpl.add_argument("--template-index", type=int, default=None)
    tpl.add_argument("--template-file", default=None)
    p.add_argument("--max-shift", type=_auto_or_int, default="auto")
    p.add_argument("--levels", type=_levels, default="auto")
    p.add_argument("--shifts-csv")
    p.add_argument("--mean-before")
    p.add_argument("--mean-after")
    p.add_argument("--threads", type=_auto_or_int, default="auto")

    p = sub.add_parser("synth", help="generate a synthetic drifting stack")
    p.add_argument("--spec", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--truth-csv", required=True)

    p = sub.add_parser("bench", help="time alignment of a stack")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input")
    src.add_argument("--synth-spec")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--threads", type=_auto_or_int, default=1)
    p.add_argument(
        "--oracle-shifts",
        type=int,
        default=4000,
        help="shifts scored by the brute-force oracle; the full-range time is "
        "extrapolated when this is smaller than the range",
    )
    return parser


def make_config(shape, max_shift="auto", levels="auto", template_index=0) -> AlignConfig:
    auto = make_auto_config(shape)
    return AlignConfig(
        max_shift=auto.max_shift if max_shift == "auto" else max_shift,
        template_index=template_index,
        downsample_levels=auto.downsample_levels if levels == "auto" else levels,
    )


class _Progress:
    def __init__(self, total: int):
        self.step = max(1, total // 100)

    def __call__(self, done: int, total: int):
        if done % self.step == 0 or done == total:
            logger.info("aligned %d/%d frames", done, total)


def cmd_align(args) -> int:
    stack = load_stack(args.input)
    template = None
    template_index = 0 if args.template_index is None else args.template_index
    if args.template_file:
        tstack = load_stack(args.template_file)
        if tstack.frame_count != 1:
            raise UsageError(f"template file holds {tstack.frame_count} frames, expected 1")
        template, template_index = tstack[0], None
    config = make_config(stack.shape, args.max_shift, args.levels, template_index)
    logger.info(
        "%d frames of %dx%d, max shift %d, %d downsampling level(s)",
        stack.frame_count, *stack.shape, config.max_shift, config.downsample_levels,
    )
    result = align_stack(
        stack,
        config,
        progress_sink=_Progress(stack.frame_count),
        template=template,
        threads=args.threads,
    )
    for path in (args.output, args.shifts_csv, args.mean_before, args.mean_after):
        if path:
            ensure_parent(path)
    save_stack(result.corrected, args.output)
    if args.shifts_csv:
        write_shift_log(result.shifts, args.shifts_csv)
    if args.mean_before:
        write_mean_image(stack, args.mean_before)
    if args.mean_after:
        write_mean_image(result.corrected, args.mean_after)
    failed = result.failed_frames
    if failed:
        print(f"{len(failed)} frame(s) failed to align: {failed}", file=sys.stderr)
        return EXIT_FRAME_FAILURES
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = load_synth_spec(args.spec)
    stack, truth = generate(spec)
    for path in (args.output, args.truth_csv):
        ensure_parent(path)
    save_stack(stack, args.output)
    write_shift_log(truth, args.truth_csv)
    return EXIT_OK


def oracle_search_time(a, b, w: int, n_shifts: int, seed: int = 0):
    """Seconds for a brute-force oracle search over ``max(|s|,|t|) < w``.

    Returns ``(seconds, estimated)``; when ``n_shifts`` is below the full range
    a seeded sample is timed and scaled up.
    """
    side = 2 * w - 1
    total = side * side
    if n_shifts >= total:
        idx = np.arange(total)
    else:
        idx = np.random.default_rng(seed).choice(total, size=max(1, n_shifts), replace=False)
    start = time.perf_counter()
    for k in idx:
        score_oracle(a, b, int(k // side) - (w - 1), int(k % side) - (w - 1))
    elapsed = time.perf_counter() - start
    return elapsed * total / len(idx), len(idx) < total


def cmd_bench(args) -> int:
    if args.repeat < 1:
        raise UsageError("--repeat must be >= 1")
    if args.input:
        stack = load_stack(args.input)
    else:
        stack, _ = generate(load_synth_spec(args.synth_spec))
    config = make_auto_config(stack.shape)
    threads = resolve_threads(args.threads)
    times = []
    for _ in range(args.repeat):
        start = time.perf_counter()
        align_stack(stack, config, threads=threads)
        times.append(time.perf_counter() - start)
    total = min(times)
    T = stack.frame_count
    print(f"stack: {T} frames of {stack.shape[0]}x{stack.shape[1]}")
    print(f"config: max_shift={config.max_shift} levels={config.downsample_levels} threads={threads}")
    print(f"total align time: {total:.3f} s (best of {args.repeat})")
    print(f"per-frame time: {1e3 * total / T:.2f} ms")

    k = T // 2
    a, b = stack[k], stack[config.template_index]
    pyramid = TemplatePyramid(b, config)
    start = time.perf_counter()
    align_frame(a, pyramid, config)
    fast = time.perf_counter() - start
    oracle, estimated = oracle_search_time(a, b, config.max_shift, args.oracle_shifts)
    note = " (extrapolated from a sample)" if estimated else ""
    print(f"frame {k}: fast {1e3 * fast:.2f} ms, oracle search {oracle:.2f} s{note}")
    print(f"speedup vs oracle: {oracle / fast:.0f}x")
    return EXIT_OK


COMMANDS = {"align": cmd_align, "synth": cmd_synth, "bench": cmd_bench}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, StackIOError, ValueError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"shiftalign {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
