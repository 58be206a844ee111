"""Command-line entry point: ``pksns run|sweep|verify-multipliers|plot|resume``.

Exit codes: 0 completed, 2 blowup verdict, 3 resolution_exceeded or
mass_leak verdict, 1 operational error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, LemmaConfig, SweepConfig, load_config, preset_names
from .multipliers import LemmaRanges, verify_lemma_suite
from .plots import PlotError, emit_plots
from .runner import OutputExistsError, resume_run, run_lemma, run_single, run_sweep

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP, EXIT_INVALID = 0, 1, 2, 3
_STATUS_EXIT = {"completed": EXIT_OK, "blowup": EXIT_BLOWUP, "resolution_exceeded": EXIT_INVALID,
                "mass_leak": EXIT_INVALID}

log = logging.getLogger("pksns")


def _report_run(report) -> int:
    v = report.verdict
    print(f"verdict: {v.status}  t_stop={v.t_stop:.6g}  peak_sup={v.peak_sup:.6g}  steps={report.steps}")
    for k, r in report.rates.items():
        print(f"  {k}: {'n/a' if r is None else f'{r:.6g}'}")
    if report.flags:
        print(f"  flags: {', '.join(report.flags)}")
    return _STATUS_EXIT.get(v.status, EXIT_ERROR)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if isinstance(cfg, LemmaConfig):
        report = run_lemma(cfg, args.output, force=args.force)
        print(report.to_json())
        return EXIT_OK if report.passed else EXIT_ERROR
    if isinstance(cfg, SweepConfig):
        raise ConfigError(f"{args.config} is a sweep configuration; use `pksns sweep`")
    return _report_run(run_single(cfg, args.output, force=args.force))


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if not isinstance(cfg, SweepConfig):
        raise ConfigError(f"{args.config} has no [sweep] table")
    if args.output:
        cfg = replace(cfg, output_dir=str(args.output))
    print(f"sweep {cfg.name}: {cfg.size} cells")
    path = run_sweep(cfg, resume=args.resume or None, force=args.force, parallelism=args.parallelism)
    print(path.read_text(), end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    rng = LemmaRanges(args.T, args.K, args.H)
    report = verify_lemma_suite(args.samples, rng, tuple(args.iota), seed=args.seed)
    text = report.to_json()
    if args.output:
        Path(args.output).write_text(text)
    print(text)
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_plot(args) -> int:
    for p in emit_plots(args.dir):
        print(p)
    return EXIT_OK


def cmd_resume(args) -> int:
    return _report_run(resume_run(args.dir))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pksns", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run a config file or preset")
    p.add_argument("config", help=f"TOML path or preset ({', '.join(preset_names())})")
    p.add_argument("-o", "--output", help="output directory (default: $PKSNS_OUTPUT_ROOT/<name>)")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--force", action="store_true")
    p.add_argument("--resume", action="store_true", help="skip cells that already finished")
    p.add_argument("-j", "--parallelism", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-multipliers", help="randomized check of the multiplier inequalities")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iota", type=float, nargs="+", default=[1.0, 0.1, 0.01])
    p.add_argument("--T", type=float, default=200.0, help="time range [0, T]")
    p.add_argument("--K", type=int, default=64, help="max |k|")
    p.add_argument("--H", type=float, default=256.0, help="max |eta|, |xi|")
    p.add_argument("-o", "--output", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="write figures for a run or sweep directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("resume", help="continue a run from its last checkpoint")
    p.add_argument("dir")
    p.set_defaults(func=cmd_resume)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OutputExistsError, PlotError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
