"""Command-line front end: cube synthesis, noising, denoising with optional
variance output, Monte Carlo coverage runs, normality checks, parameter
sweeps, and timing comparisons.

Errors are a single machine-parsable line on stderr ("error: ..."); data
goes to files only, keeping stdout clean for scripting. Seeds fix every
stochastic output bit-exactly; --threads changes wall-clock only.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .io import read_cube, write_cube, write_qq_csv, write_report_csv
from .noise import NoiseSpec, apply_noise, synth_lowrank_cube
from .pipeline import PipelineConfig, denoise, denoise_with_uq
from .uncertainty import CorrelationRule
from .validate import (
    impulse_sweep,
    monte_carlo,
    qq_data,
    rank_sweep,
    shapiro_wilk,
    timing_compare,
)
from .windows import WindowConfig


class _UsageError(Exception):
    """Bad flags or flag combinations; reported on one line, exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _int_at_least(minimum: int):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer value: {text!r}") from None
        if value < minimum:
            raise argparse.ArgumentTypeError(f"{value} is below the minimum {minimum}")
        return value

    return parse


def _float_at_least(minimum: float):
    def parse(text: str) -> float:
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid number: {text!r}") from None
        if value < minimum:
            raise argparse.ArgumentTypeError(f"{value} is below the minimum {minimum}")
        return value

    return parse


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{value} is outside [0, 1]")
    return value


def _dims(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected M,N,P, got {text!r}")
    try:
        m, n, p = (int(t) for t in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-integer dimension in {text!r}") from None
    if min(m, n, p) < 1:
        raise argparse.ArgumentTypeError(f"dimensions must be positive, got {text!r}")
    return m, n, p


def _int_list(text: str) -> list[int]:
    try:
        values = [int(t) for t in text.split(",") if t != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _float_list(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _resolve_threads(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("LRMA_UQ_THREADS")
    if env:
        try:
            parsed = int(env)
        except ValueError:
            raise _UsageError(f"LRMA_UQ_THREADS must be an integer, got {env!r}") from None
        if parsed < 1:
            raise _UsageError(f"LRMA_UQ_THREADS must be >= 1, got {parsed}")
        return parsed
    return os.cpu_count() or 1


def _add_window_flags(parser: argparse.ArgumentParser, with_rank: bool = True) -> None:
    parser.add_argument("--window", type=_int_at_least(1), default=20,
                        help="spatial side of the sliding window (default 20)")
    parser.add_argument("--step", type=_int_at_least(1), default=4,
                        help="stride between window origins (default 4)")
    if with_rank:
        parser.add_argument("--rank", type=_int_at_least(1), default=7,
                            help="rank of the per-window fit (default 7)")
    parser.add_argument("--sparse-card", type=_float_at_least(0.0), default=0.0,
                        help="sparse budget: 0 disables, <1 is a fraction of "
                             "patch entries, >=1 an absolute count")
    parser.add_argument("--solver", choices=("godec", "tsvd"), default="godec")
    parser.add_argument("--correlation", choices=("overlap", "independent", "full"),
                        default="overlap",
                        help="window-pair correlation model for variance aggregation")
    parser.add_argument("--threads", type=_int_at_least(1), default=None,
                        help="patch-level worker threads (default: LRMA_UQ_THREADS "
                             "or all cores); never changes output bytes")


def _pipeline_config(args: argparse.Namespace, sigma0: float, rank: int | None = None) -> PipelineConfig:
    window = WindowConfig(
        patch_side=args.window,
        step=args.step,
        rank=args.rank if rank is None else rank,
        sparse_card=args.sparse_card,
    )
    return PipelineConfig(
        window=window,
        sigma0=sigma0,
        correlation=CorrelationRule(args.correlation),
        solver=args.solver,
        threads=_resolve_threads(args.threads),
    )


def _read_samples(path: str) -> np.ndarray:
    """First column of a CSV as floats; a non-numeric first row is a header."""
    values: list[float] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if lineno == 0:
                    continue
                raise ValueError(f"non-numeric sample at line {lineno + 1}: {row[0]!r}") from None
    if not values:
        raise ValueError(f"no samples found in {path}")
    return np.asarray(values, dtype=np.float64)


def _cmd_simulate(args: argparse.Namespace) -> None:
    write_cube(synth_lowrank_cube(args.dims, args.rank, args.seed), args.out)


def _cmd_noise(args: argparse.Namespace) -> None:
    spec = NoiseSpec(sigma0=args.sigma0, impulse_ratio=args.impulse_ratio, seed=args.seed)
    write_cube(apply_noise(read_cube(args.in_path), spec), args.out)


def _cmd_denoise(args: argparse.Namespace) -> None:
    if args.variance_out is not None and args.sigma0 is None:
        raise _UsageError("--variance-out requires --sigma0")
    cube = read_cube(args.in_path)
    cfg = _pipeline_config(args, sigma0=args.sigma0 if args.sigma0 is not None else 0.0)
    if args.variance_out is not None:
        den, var = denoise_with_uq(cube, cfg)
        write_cube(den, args.out)
        write_cube(var, args.variance_out)
    else:
        write_cube(denoise(cube, cfg), args.out)


def _cmd_mc(args: argparse.Namespace) -> None:
    clean = read_cube(args.clean)
    noise = NoiseSpec(sigma0=args.sigma0, impulse_ratio=args.impulse_ratio, seed=args.seed)
    cfg = _pipeline_config(args, sigma0=args.sigma0)
    report = monte_carlo(
        clean, noise, cfg,
        trials=args.trials,
        base_seed=args.seed,
        sigma_mode=args.sigma_mode.replace("-", "_"),
    )
    write_report_csv(report, args.report)


def _cmd_validate(args: argparse.Namespace) -> None:
    samples = _read_samples(args.samples)
    if args.check == "qq":
        write_qq_csv(qq_data(samples), args.report)
    else:
        write_report_csv(shapiro_wilk(samples), args.report)


def _cmd_sweep_rank(args: argparse.Namespace) -> None:
    clean = read_cube(args.clean)
    noise = NoiseSpec(sigma0=args.sigma0, impulse_ratio=args.impulse_ratio, seed=args.seed)
    cfg = _pipeline_config(args, sigma0=args.sigma0, rank=args.grid[0])
    report = rank_sweep(clean, noise, cfg, args.grid, trials=args.trials, base_seed=args.seed)
    write_report_csv(report, args.report)


def _cmd_sweep_impulse(args: argparse.Namespace) -> None:
    clean = read_cube(args.clean)
    cfg = _pipeline_config(args, sigma0=args.sigma0_grid[0])
    report = impulse_sweep(
        clean, args.sigma0_grid, args.ratio_grid, cfg,
        trials=args.trials, base_seed=args.seed,
    )
    write_report_csv(report, args.report)


def _cmd_bench(args: argparse.Namespace) -> None:
    clean = read_cube(args.clean)
    noise = NoiseSpec(sigma0=args.sigma0, impulse_ratio=args.impulse_ratio, seed=args.seed)
    cfg = _pipeline_config(args, sigma0=args.sigma0)
    report = timing_compare(clean, noise, cfg, mc_trials=args.trials, base_seed=args.seed)
    write_report_csv(report, args.report)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="lrma-uq",
        description="Sliding-window low-rank denoising of hyperspectral cubes "
                    "with closed-form per-voxel uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write a synthetic low-rank cube")
    p.add_argument("--dims", type=_dims, required=True, metavar="M,N,P")
    p.add_argument("--rank", type=_int_at_least(1), default=3,
                   help="true rank of the synthetic cube (default 3)")
    p.add_argument("--seed", type=_int_at_least(0), default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("noise", help="corrupt a cube with Gaussian and impulse noise")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--sigma0", type=_float_at_least(0.0), required=True)
    p.add_argument("--impulse-ratio", type=_fraction, default=0.0)
    p.add_argument("--seed", type=_int_at_least(0), default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_noise)

    p = sub.add_parser("denoise", help="denoise a cube, optionally with a variance cube")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variance-out", default=None,
                   help="also write the closed-form variance cube (needs --sigma0)")
    p.add_argument("--sigma0", type=_float_at_least(0.0), default=None,
                   help="noise std driving the variance cube")
    _add_window_flags(p)
    p.set_defaults(func=_cmd_denoise)

    p = sub.add_parser("mc", help="Monte Carlo coverage of the closed-form intervals")
    p.add_argument("--clean", required=True)
    p.add_argument("--sigma0", type=_float_at_least(0.0), required=True)
    p.add_argument("--impulse-ratio", type=_fraction, default=0.0)
    p.add_argument("--trials", type=_int_at_least(2), default=100)
    p.add_argument("--seed", type=_int_at_least(0), default=0)
    p.add_argument("--sigma-mode", choices=("trial0", "per-trial"), default="trial0",
                   help="which trial's closed-form std defines the interval")
    p.add_argument("--report", required=True)
    _add_window_flags(p)
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("validate", help="normality checks on a sample CSV")
    vsub = p.add_subparsers(dest="check", required=True, parser_class=_Parser)
    for check, helptext in (("qq", "normal Q-Q pairs"), ("sw", "Shapiro-Wilk test")):
        vp = vsub.add_parser(check, help=helptext)
        vp.add_argument("--samples", required=True, help="CSV whose first column holds the sample")
        vp.add_argument("--report", required=True)
        vp.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sweep", help="coverage sweeps over rank or impulse grids")
    ssub = p.add_subparsers(dest="axis", required=True, parser_class=_Parser)

    sp = ssub.add_parser("rank", help="sweep the fit rank")
    sp.add_argument("--clean", required=True)
    sp.add_argument("--sigma0", type=_float_at_least(0.0), required=True)
    sp.add_argument("--impulse-ratio", type=_fraction, default=0.0)
    sp.add_argument("--grid", type=_int_list, required=True, metavar="R1,R2,...")
    sp.add_argument("--trials", type=_int_at_least(2), default=100)
    sp.add_argument("--seed", type=_int_at_least(0), default=0)
    sp.add_argument("--report", required=True)
    _add_window_flags(sp, with_rank=False)
    sp.set_defaults(func=_cmd_sweep_rank)

    sp = ssub.add_parser("impulse", help="sweep noise levels and impulse ratios")
    sp.add_argument("--clean", required=True)
    sp.add_argument("--sigma0-grid", type=_float_list, required=True, metavar="S1,S2,...")
    sp.add_argument("--ratio-grid", type=_float_list, required=True, metavar="R1,R2,...")
    sp.add_argument("--trials", type=_int_at_least(2), default=100)
    sp.add_argument("--seed", type=_int_at_least(0), default=0)
    sp.add_argument("--report", required=True)
    _add_window_flags(sp)
    sp.set_defaults(func=_cmd_sweep_impulse)

    p = sub.add_parser("bench", help="time trial-based vs closed-form uncertainty")
    p.add_argument("--clean", required=True)
    p.add_argument("--sigma0", type=_float_at_least(0.0), required=True)
    p.add_argument("--impulse-ratio", type=_fraction, default=0.0)
    p.add_argument("--trials", type=_int_at_least(1), default=10,
                   help="trial count for the Monte Carlo route")
    p.add_argument("--seed", type=_int_at_least(0), default=0)
    p.add_argument("--report", required=True)
    _add_window_flags(p)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
