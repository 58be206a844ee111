"""
Persistent execution of runs and sweeps.

A run directory holds::

    resolved_config.toml   every parameter, defaults filled in
    diagnostics.csv        one row per output time
    checkpoint.bin         latest checkpoint (see ``storage``)
    summary.json           verdict, fitted rates, resolution report

A sweep directory holds ``cells/<key>/`` run directories, keyed by a hash of
the cell's parameter overrides, and ``sweep_summary.csv``.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace
from pathlib import Path

import tomli
from filelock import FileLock

from . import storage
from .config import LemmaConfig, RunConfig, SweepConfig, cell_key, load_config, parse_config
from .dynamics import ResumePoint, RunReport, run

__all__ = [
    "OutputExistsError",
    "run_single",
    "resume_run",
    "run_sweep",
    "run_lemma",
    "SWEEP_COLUMNS",
    "summary_dict",
]

log = logging.getLogger(__name__)

SUMMARY_VERSION = 1
SWEEP_COLUMNS = ["cell", "kappa", "nu", "epsilon", "M", "sigma", "Nx", "Ny", "Ly", "couette",
                 "verdict", "t_stop", "peak_sup", "rate_k1", "error"]


class OutputExistsError(FileExistsError):
    pass


def _prepare_dir(path: Path, force: bool) -> None:
    if path.exists() and any(path.iterdir()):
        if not force:
            raise OutputExistsError(f"output directory {path} is not empty (use --force to overwrite)")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)


def summary_dict(report: RunReport, wall_time: float) -> dict:
    v = report.verdict
    last = report.records[-1] if report.records else None
    first = report.records[0] if report.records else None
    return {
        "summary_version": SUMMARY_VERSION,
        "name": report.config.name,
        "verdict": {"status": v.status, "t_stop": v.t_stop, "peak_sup": v.peak_sup,
                    "tail_fraction": v.tail_fraction, "triggers": list(v.triggers)},
        "rates": report.rates,
        "flags": report.flags,
        "steps": report.steps,
        "resolution": report.resolution,
        "mass_drift": (abs(last.mass / first.mass - 1) if first and first.mass else 0.0),
        "wall_time_s": wall_time,
    }


def _observer(out: Path, config: RunConfig, writer: storage.CsvWriter):
    def on_output(record, point: ResumePoint):
        writer.write(record)
        if point.out_index % config.checkpoint_every == 0 or point.out_index == config.n_outputs:
            storage.write_checkpoint(out / "checkpoint.bin", point)
    return on_output


def _finish(out: Path, report: RunReport, t0: float) -> RunReport:
    if report.verdict.status != "interrupted":
        storage.write_json(out / "summary.json", summary_dict(report, time.perf_counter() - t0))
    return report


def run_single(config: RunConfig, output_dir: str | os.PathLike | None = None, *,
               force: bool = False, stop_at: float | None = None) -> RunReport:
    """Run one configuration and persist everything to its output directory."""
    out = Path(output_dir or config.output_dir)
    _prepare_dir(out, force)
    config = replace(config, output_dir=str(out))
    (out / "resolved_config.toml").write_text(config.to_toml())
    writer = storage.CsvWriter(out / "diagnostics.csv")
    t0 = time.perf_counter()
    report = run(config, on_output=_observer(out, config, writer), stop_at=stop_at)
    return _finish(out, report, t0)


def resume_run(output_dir: str | os.PathLike, stop_at: float | None = None) -> RunReport:
    """Continue a run from its latest checkpoint; rows past the checkpoint are rewritten."""
    out = Path(output_dir)
    cfg_path = out / "resolved_config.toml"
    if not cfg_path.exists():
        raise FileNotFoundError(f"{out} has no resolved_config.toml")
    with open(cfg_path, "rb") as fh:
        config = parse_config(tomli.load(fh))
    ck = out / "checkpoint.bin"
    if not ck.exists():
        raise FileNotFoundError(f"{out} has no checkpoint.bin")
    header, state, acc, hist = storage.read_checkpoint(ck)
    if header["grid"]["Nx"] != config.grid.Nx or header["grid"]["Ny"] != config.grid.Ny:
        raise storage.CheckpointError("checkpoint grid does not match resolved_config.toml")
    rows = header["out_index"] + 1
    records = storage.records_from_csv(out / "diagnostics.csv", rows)
    storage.truncate_csv(out / "diagnostics.csv", rows)
    pending = header.get("pending_leak")
    point = ResumePoint(state, acc, hist, header["steps"], header["out_index"], records,
                        storage.verdict_from_dict(pending) if pending else None)
    writer = storage.CsvWriter(out / "diagnostics.csv", append=True)
    t0 = time.perf_counter()
    report = run(config, start=point, on_output=_observer(out, config, writer), stop_at=stop_at)
    return _finish(out, report, t0)


def run_lemma(config: LemmaConfig, output_dir=None, force: bool = False):
    from .multipliers import LemmaRanges, verify_lemma_suite

    report = verify_lemma_suite(config.samples, LemmaRanges(config.T, config.K, config.H),
                                config.iotas, seed=config.seed, rel_slack=config.rel_slack)
    out = Path(output_dir or config.output_dir)
    _prepare_dir(out, force)
    (out / "lemma_report.json").write_text(report.to_json())
    return report


# ---------------------------------------------------------------------------
# sweeps


def _cell_row(key: str, config: RunConfig, summary: dict | None, error: str = "") -> dict:
    p = config.params
    sigma = config.blobs[0].sigma if config.blobs else ""
    row = {"cell": key, "kappa": p.kappa, "nu": p.nu, "epsilon": p.epsilon, "M": p.M, "sigma": sigma,
           "Nx": config.grid.Nx, "Ny": config.grid.Ny, "Ly": config.grid.Ly,
           "couette": config.switches.couette}
    if summary is None:
        row.update(verdict="error", t_stop="", peak_sup="", rate_k1="", error=error)
    else:
        v = summary["verdict"]
        rate = summary["rates"].get("rate_k1")
        row.update(verdict=v["status"], t_stop=v["t_stop"], peak_sup=v["peak_sup"],
                   rate_k1="" if rate is None else rate, error="")
    return {k: (repr(v) if isinstance(v, float) else str(v)) for k, v in row.items()}


def _run_cell(key: str, config: RunConfig) -> tuple[str, dict | None, str]:
    try:
        run_single(config, force=True)
        with open(Path(config.output_dir) / "summary.json") as fh:
            return key, json.load(fh), ""
    except Exception as exc:  # a failing cell must not stop the sweep
        return key, None, f"{type(exc).__name__}: {exc}"


def _append_row(path: Path, row: dict) -> None:
    with FileLock(str(path) + ".lock"):
        new = not path.exists()
        with open(path, "a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            if new:
                w.writeheader()
            w.writerow(row)


def _recorded_cells(path: Path) -> set[str]:
    """Cells with a finished row; rows of failed cells are dropped so they can be retried."""
    if not path.exists():
        return set()
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    kept = [r for r in rows if r["verdict"] != "error"]
    if len(kept) != len(rows):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(kept)
    return {r["cell"] for r in kept}


def run_sweep(sweep: SweepConfig, *, resume: bool | None = None, force: bool = False,
              parallelism: int | None = None) -> Path:
    """Run every cell; finished cells are skipped when resuming.  Returns the summary CSV path."""
    resume = sweep.resume if resume is None else resume
    workers = parallelism or sweep.parallelism
    out = Path(sweep.output_dir)
    if not resume:
        _prepare_dir(out, force)
    out.mkdir(parents=True, exist_ok=True)
    summary = out / "sweep_summary.csv"
    cells = sweep.cells()
    log.info("sweep %s: %d cells, %d workers", sweep.name, len(cells), workers)

    recorded = _recorded_cells(summary)
    todo = []
    for over, cfg in cells:
        key = cell_key(over)
        done = Path(cfg.output_dir) / "summary.json"
        if resume and done.exists():
            if key not in recorded:
                with open(done) as fh:
                    _append_row(summary, _cell_row(key, cfg, json.load(fh)))
            continue
        todo.append((key, cfg))

    by_key = {k: c for k, c in todo}
    if workers == 1:
        results = (_run_cell(k, c) for k, c in todo)
        for key, summ, err in results:
            _append_row(summary, _cell_row(key, by_key[key], summ, err))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, k, c) for k, c in todo]
            for fut in as_completed(futures):
                key, summ, err = fut.result()
                _append_row(summary, _cell_row(key, by_key[key], summ, err))
    return summary


def run_any(name_or_path, output_dir=None, force=False):
    """Dispatch on the kind of configuration file."""
    cfg = load_config(name_or_path)
    if isinstance(cfg, LemmaConfig):
        return cfg, run_lemma(cfg, output_dir, force)
    if isinstance(cfg, SweepConfig):
        if output_dir:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg, run_sweep(cfg, force=force)
    return cfg, run_single(cfg, output_dir, force=force)
