import csv
import json
import math

import numpy as np
import pytest
import tomli

from pksns import cli, storage
from pksns.config import ConfigError, LemmaConfig, SweepConfig, cell_key, load_config, parse_config, preset_names
from pksns.plots import VERDICT_STATES, PlotError, emit_plots, plot_sweep, plot_timeseries
from pksns.runner import OutputExistsError, resume_run, run_single, run_sweep

SMALL = {
    "name": "small",
    "paper": {"kappa": 0.5, "nu": 1.0, "M": 3.0},
    "grid": {"Nx": 16, "Ny": 128, "Ly": 8 * math.pi},
    "initial": {"sigma": 1.0},
    "switches": {"couette": True},
    "run": {"t_max": 1.0, "out_interval": 0.1, "checkpoint_every": 2},
}


def small(tmp_path, **over):
    raw = json.loads(json.dumps(SMALL))
    for sec, vals in over.items():
        if isinstance(vals, dict):
            raw.setdefault(sec, {}).update(vals)
        else:
            raw[sec] = vals
    raw["run"]["output_dir"] = str(tmp_path / "out")
    return raw


# ---------------------------------------------------------------------------
# config


def test_minimal_config_fills_defaults():
    cfg = parse_config({"paper": {"M": 10.0, "kappa": 1.0, "nu": 1.0}, "switches": {"couette": False},
                        "run": {"t_max": 1.0}})
    assert cfg.params.epsilon == 1.0 and cfg.params.s == 5.0
    assert cfg.params.delta == pytest.approx(1 / (16 * math.pi**2))
    assert cfg.grid.Nx == 64 and cfg.grid.Ly == pytest.approx(16 * math.pi)
    assert cfg.blobs[0].mass == 10.0 and cfg.blobs[0].sigma == 0.5
    assert not cfg.switches.couette


def test_third_parameter_is_derived():
    cfg = parse_config({"paper": {"nu": 0.5, "epsilon": 0.1}, "run": {"t_max": 1.0}})
    assert cfg.params.kappa == pytest.approx(0.05)


@pytest.mark.parametrize(
    "paper,needle",
    [({"kappa": 0.1, "nu": 0.01}, "kappa <= nu"),
     ({"nu": 0.5, "epsilon": 1.5}, "epsilon <= 1"),
     ({"kappa": 0.1, "nu": 0.5, "epsilon": 0.3}, "kappa = epsilon*nu"),
     ({"kappa": 0.5, "nu": 2.0}, "nu <= 1"),
     ({"kappa": 0.1}, "at least two"),
     ({"kappa": 0.1, "nu": 0.5, "delta": 0.5}, "paper.delta")],
)
def test_invalid_parameters_name_the_key(paper, needle):
    with pytest.raises(ConfigError, match="paper|at least"):
        parse_config({"paper": paper, "run": {"t_max": 1.0}})
    with pytest.raises(ConfigError) as exc:
        parse_config({"paper": paper, "run": {"t_max": 1.0}})
    assert needle in str(exc.value)


@pytest.mark.parametrize(
    "raw,needle",
    [({"paper": {"kappa": 1.0, "nu": 1.0}, "run": {"t_max": 1.0}, "grid": {"Nx": 15}}, "[grid]"),
     ({"paper": {"kappa": 1.0, "nu": 1.0}, "run": {"t_max": 1.0, "out_interval": 0.3}}, "run.t_max"),
     ({"paper": {"kappa": 1.0, "nu": 1.0}, "run": {}}, "run.t_max"),
     ({"paper": {"kappa": 1.0, "nu": 1.0}, "run": {"t_max": 1.0}, "bogus": 1}, "bogus"),
     ({"paper": {"kappa": 1.0, "nu": 1.0, "Re": 3}, "run": {"t_max": 1.0}}, "paper.Re"),
     ({"paper": {"kappa": 1.0, "nu": 1.0}, "run": {"t_max": 1.0},
       "initial": {"omega": {"kind": "vortex"}}}, "initial.omega.kind"),
     ({"paper": {"kappa": 1.0, "nu": 1.0, "M": 2.0}, "run": {"t_max": 1.0},
       "initial": {"blobs": [{"mass": 1.0}]}}, "initial.blobs"),
     ({"paper": {"kappa": 1.0, "nu": 1.0}, "run": {"t_max": 1.0}, "switches": {"couette": "yes"}},
      "switches.couette")],
)
def test_config_errors(raw, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(raw)
    assert needle in str(exc.value)


def test_resolved_config_round_trips(tmp_path):
    cfg = parse_config(small(tmp_path))
    again = parse_config(tomli.loads(cfg.to_toml()))
    assert again.resolved() == cfg.resolved()


def test_presets_parse():
    names = preset_names()
    assert set(names) >= {"lemma-verify", "linear-oracle", "blowup-noshear", "suppression-couette",
                          "epsilon-sweep"}
    for n in names:
        cfg = load_config(n)
        assert isinstance(cfg, (LemmaConfig, SweepConfig)) or cfg.t_max > 0


def test_missing_config():
    with pytest.raises(ConfigError):
        load_config("no-such-preset")


def test_sweep_cells_and_keys(tmp_path):
    raw = small(tmp_path, sweep={"axes": {"M": [1.0, 2.0], "epsilon": [0.5, 0.25]}})
    sw = parse_config(raw)
    assert isinstance(sw, SweepConfig) and sw.size == 4
    cells = sw.cells()
    dirs = {c.output_dir for _, c in cells}
    assert len(dirs) == 4
    for over, c in cells:
        assert c.params.kappa == pytest.approx(over["epsilon"] * c.params.nu)
        assert c.params.M == over["M"]
        assert c.output_dir.endswith(cell_key(over))


def test_sweep_rejects_unknown_axis(tmp_path):
    with pytest.raises(ConfigError, match="sweep.axes.dt"):
        parse_config(small(tmp_path, sweep={"axes": {"dt": [0.1]}}))


# ---------------------------------------------------------------------------
# runs on disk


def test_run_writes_outputs_and_is_deterministic(tmp_path):
    cfg = parse_config(small(tmp_path))
    rep = run_single(cfg)
    out = tmp_path / "out"
    for name in ("resolved_config.toml", "diagnostics.csv", "summary.json", "checkpoint.bin"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["verdict"]["status"] == rep.verdict.status == "completed"
    first = (out / "diagnostics.csv").read_bytes()
    run_single(cfg, force=True)
    assert (out / "diagnostics.csv").read_bytes() == first
    rows = list(csv.reader(open(out / "diagnostics.csv")))
    assert len(rows) == 1 + cfg.n_outputs + 1


def test_output_collision_needs_force(tmp_path):
    cfg = parse_config(small(tmp_path))
    run_single(cfg)
    with pytest.raises(OutputExistsError):
        run_single(cfg)


def test_interrupt_and_resume_reproduce_the_run(tmp_path):
    ref_cfg = parse_config(small(tmp_path))
    run_single(ref_cfg)
    ref_csv = (tmp_path / "out" / "diagnostics.csv").read_bytes()
    ref_ck = storage.read_checkpoint(tmp_path / "out" / "checkpoint.bin")[1]

    other = tmp_path / "other"
    cut = run_single(ref_cfg, other, stop_at=0.5)
    assert cut.verdict.status == "interrupted"
    assert not (other / "summary.json").exists()
    resume_run(other)
    assert (other / "diagnostics.csv").read_bytes() == ref_csv
    st = storage.read_checkpoint(other / "checkpoint.bin")[1]
    assert np.abs(st.N.coeffs - ref_ck.N.coeffs).max() <= 1e-12 * np.abs(ref_ck.N.coeffs).max()


def test_resume_after_odd_interrupt_rewrites_tail(tmp_path):
    # stop between checkpoints: rows past the last checkpoint are dropped and recomputed
    cfg = parse_config(small(tmp_path))
    run_single(cfg)
    ref_csv = (tmp_path / "out" / "diagnostics.csv").read_bytes()
    other = tmp_path / "odd"
    run_single(cfg, other, stop_at=0.7)
    resume_run(other)
    assert (other / "diagnostics.csv").read_bytes() == ref_csv


def test_checkpoint_round_trip(tmp_path):
    cfg = parse_config(small(tmp_path))
    run_single(cfg)
    path = tmp_path / "out" / "checkpoint.bin"
    header, state, acc, hist = storage.read_checkpoint(path)
    assert header["format_version"] == storage.CHECKPOINT_VERSION and header["dtype"] == "<c16"
    assert state.t == pytest.approx(1.0) and acc.int_N_neq > 0
    data = path.read_bytes()
    (tmp_path / "bad.bin").write_bytes(data[:-16])
    with pytest.raises(storage.CheckpointError):
        storage.read_checkpoint(tmp_path / "bad.bin")


# ---------------------------------------------------------------------------
# sweeps


def _sweep(tmp_path, **kw):
    raw = small(tmp_path, sweep={"axes": {"M": [1.0, 2.0], "epsilon": [0.5, 0.25]}, **kw})
    raw["run"]["t_max"] = 0.2
    return parse_config(raw)


def test_sweep_rows(tmp_path):
    path = run_sweep(_sweep(tmp_path))
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 4
    assert {r["verdict"] for r in rows} == {"completed"}
    assert {(float(r["M"]), float(r["epsilon"])) for r in rows} == {(1, .5), (1, .25), (2, .5), (2, .25)}


def test_sweep_resume_only_runs_missing_cells(tmp_path):
    sw = _sweep(tmp_path)
    run_sweep(sw)
    cells = sw.cells()
    # forget two cells entirely
    import shutil

    summary = tmp_path / "out" / "sweep_summary.csv"
    rows = list(csv.DictReader(open(summary)))
    stamps = {}
    for over, c in cells:
        stamps[cell_key(over)] = (tmp_path / "out" / "cells" / cell_key(over) / "summary.json").stat().st_mtime_ns
    lost = [cell_key(o) for o, _ in cells[:2]]
    for key in lost:
        shutil.rmtree(tmp_path / "out" / "cells" / key)
    with open(summary, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(r for r in rows if r["cell"] not in lost)
    run_sweep(sw, resume=True)
    rows = list(csv.DictReader(open(summary)))
    assert sorted(r["cell"] for r in rows) == sorted(stamps)
    for over, _ in cells[2:]:
        key = cell_key(over)
        assert (tmp_path / "out" / "cells" / key / "summary.json").stat().st_mtime_ns == stamps[key]


def test_sweep_parallel_matches_serial(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir(), b.mkdir()
    sa = _sweep(a)
    sb = _sweep(b, parallelism=2)
    run_sweep(sa)
    run_sweep(sb)
    for (over, ca), (_, cb) in zip(sa.cells(), sb.cells()):
        pa = (a / "out" / "cells" / cell_key(over) / "diagnostics.csv").read_bytes()
        pb = (b / "out" / "cells" / cell_key(over) / "diagnostics.csv").read_bytes()
        assert pa == pb


def test_failing_cell_is_recorded(tmp_path, monkeypatch):
    from pksns import runner

    real = runner.run_single

    def flaky(config, *a, **kw):
        if config.params.M == 2.0:
            raise FloatingPointError("synthetic failure")
        return real(config, *a, **kw)

    monkeypatch.setattr(runner, "run_single", flaky)
    rows = list(csv.DictReader(open(run_sweep(_sweep(tmp_path)))))
    assert len(rows) == 4
    bad = [r for r in rows if r["verdict"] == "error"]
    assert len(bad) == 2 and all("synthetic failure" in r["error"] for r in bad)
    # resuming retries exactly the failed cells
    monkeypatch.setattr(runner, "run_single", real)
    rows = list(csv.DictReader(open(run_sweep(_sweep(tmp_path), resume=True))))
    assert len(rows) == 4 and {r["verdict"] for r in rows} == {"completed"}


# ---------------------------------------------------------------------------
# plots and CLI


def test_plots_for_run_and_sweep(tmp_path):
    cfg = parse_config(small(tmp_path))
    run_single(cfg)
    made = emit_plots(tmp_path / "out")
    assert {p.name for p in made} == {"mode_amplitudes.png", "free_energy.png"}
    assert all(p.stat().st_size > 0 for p in made)


def test_empty_series_is_an_error(tmp_path):
    with pytest.raises(PlotError, match="empty"):
        plot_timeseries({k: np.array([]) for k in ("t", "amp_N_k1", "amp_N_k2", "amp_N_k3", "amp_N_k4")},
                        tmp_path, 0.1, 0.001)
    assert not list(tmp_path.iterdir())
    with pytest.raises(PlotError, match="amp_N_k4"):
        plot_timeseries({"t": np.ones(3), "amp_N_k1": np.ones(3), "amp_N_k2": np.ones(3),
                         "amp_N_k3": np.ones(3)}, tmp_path, 0.1, 0.001)


def test_heatmap_legend_lists_all_states(tmp_path, monkeypatch):
    path = tmp_path / "sweep_summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["M", "epsilon", "verdict"])
        w.writeheader()
        w.writerow({"M": 10, "epsilon": 0.1, "verdict": "completed"})
        w.writerow({"M": 40, "epsilon": 1.0, "verdict": "blowup"})
    import matplotlib.axes

    seen = {}
    orig = matplotlib.axes.Axes.legend

    def spy(self, *a, **kw):
        seen["labels"] = [h.get_label() for h in kw["handles"]]
        return orig(self, *a, **kw)

    monkeypatch.setattr(matplotlib.axes.Axes, "legend", spy)
    out = plot_sweep(path, tmp_path)
    assert out.exists()
    assert seen["labels"] == list(VERDICT_STATES)


def test_cli_run_and_exit_codes(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PKSNS_OUTPUT_ROOT", str(tmp_path / "root"))
    raw = small(tmp_path)
    del raw["run"]["output_dir"]
    import tomli_w

    cfg_path = tmp_path / "c.toml"
    cfg_path.write_text(tomli_w.dumps(raw))
    assert cli.main(["run", str(cfg_path)]) == 0
    assert (tmp_path / "root" / "small" / "diagnostics.csv").exists()
    assert cli.main(["run", str(cfg_path)]) == 1  # collision
    assert "not empty" in capsys.readouterr().err
    assert cli.main(["run", str(cfg_path), "--force"]) == 0
    assert cli.main(["plot", str(tmp_path / "root" / "small")]) == 0
    assert cli.main(["resume", str(tmp_path / "root" / "small")]) == 0
    assert cli.main(["run", "missing.toml"]) == 1


def test_cli_blowup_exit_code(tmp_path):
    raw = small(tmp_path, paper={"kappa": 1.0, "nu": 1.0, "M": 60.0}, initial={"sigma": 0.5},
                switches={"couette": False}, grid={"Nx": 64, "Ny": 256, "Ly": 8 * math.pi})
    import tomli_w

    p = tmp_path / "b.toml"
    p.write_text(tomli_w.dumps(raw))
    assert cli.main(["run", str(p)]) == 2


def test_cli_verify_multipliers(tmp_path, capsys):
    out = tmp_path / "lemma.json"
    assert cli.main(["verify-multipliers", "--samples", "2000", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert all(c["violations"] == 0 for c in data["checks"])


def test_cli_sweep(tmp_path):
    raw = small(tmp_path, sweep={"axes": {"M": [1.0, 2.0]}})
    raw["run"]["t_max"] = 0.2
    import tomli_w

    p = tmp_path / "s.toml"
    p.write_text(tomli_w.dumps(raw))
    assert cli.main(["sweep", str(p)]) == 0
    assert cli.main(["sweep", str(p), "--resume"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "sweep_summary.csv")))
    assert len(rows) == 2
