"""
TOML run and sweep configurations.

A run file looks like::

    name = "blob"
    [paper]          # any two of kappa, nu, epsilon; the third is derived
    kappa = 1.0
    nu = 1.0
    M = 10.0
    [grid]
    Nx = 64
    Ny = 256
    Ly = 50.27
    [initial]
    sigma = 0.5
    [initial.omega]
    kind = "zero"    # zero | mode | threshold
    [switches]
    couette = false
    [run]
    t_max = 5.0
    out_interval = 0.1

Adding a ``[sweep]`` table with ``axes`` turns the file into a sweep over the
cartesian product of the axis values.  Unknown keys are rejected.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import json
import math
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

import tomli
import tomli_w

from .dynamics import DetectorSettings, PhysParams, Switches
from .multipliers import DELTA_MAX
from .spectral import Grid, make_grid

__all__ = [
    "ConfigError",
    "BlobSpec",
    "OmegaSpec",
    "RunConfig",
    "SweepConfig",
    "LemmaConfig",
    "parse_config",
    "load_config",
    "resolve_path",
    "preset_names",
    "output_root",
    "SWEEP_AXES",
]

OUTPUT_ROOT_ENV = "PKSNS_OUTPUT_ROOT"
SWEEP_AXES = ("kappa", "nu", "epsilon", "M", "sigma", "Nx", "Ny", "Ly", "couette")

_SECTIONS = {
    "paper": {"kappa", "nu", "epsilon", "delta", "s", "M"},
    "grid": {"Nx", "Ny", "Ly"},
    "initial": {"sigma", "center", "blobs", "omega"},
    "switches": {"couette", "chemotaxis", "fluid", "fluid_forcing", "passive_scalar"},
    "run": {"t_max", "out_interval", "output_dir", "seed", "checkpoint_every"},
    "detector": {f.name for f in fields(DetectorSettings)},
    "sweep": {"axes", "parallelism", "resume"},
    "lemma": {"samples", "T", "K", "H", "iotas", "seed", "rel_slack"},
}
_TOP = {"name", "kind"} | set(_SECTIONS)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class BlobSpec:
    mass: float
    center: tuple[float, float] = (math.pi, 0.0)
    sigma: float = 0.5


@dataclass(frozen=True)
class OmegaSpec:
    kind: str = "zero"
    k: int = 1
    j: int = 0
    amplitude: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    name: str
    grid: Grid
    params: PhysParams
    blobs: tuple[BlobSpec, ...]
    omega: OmegaSpec
    switches: Switches
    t_max: float
    out_interval: float
    output_dir: str
    seed: int = 0
    checkpoint_every: int = 10
    detector: DetectorSettings = DetectorSettings()
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n_outputs(self) -> int:
        return int(round(self.t_max / self.out_interval))

    def resolved(self) -> dict:
        """Fully explicit TOML-ready dictionary; parsing it gives back this config."""
        p = self.params
        return {
            "name": self.name,
            "kind": "run",
            "paper": p.to_dict(),
            "grid": {"Nx": self.grid.Nx, "Ny": self.grid.Ny, "Ly": self.grid.Ly},
            "initial": {
                "blobs": [
                    {"mass": b.mass, "center": list(b.center), "sigma": b.sigma} for b in self.blobs
                ],
                "omega": {"kind": self.omega.kind, "k": self.omega.k, "j": self.omega.j,
                          "amplitude": self.omega.amplitude},
            },
            "switches": {f.name: getattr(self.switches, f.name) for f in fields(Switches)},
            "run": {"t_max": self.t_max, "out_interval": self.out_interval,
                    "output_dir": self.output_dir, "seed": self.seed,
                    "checkpoint_every": self.checkpoint_every},
            "detector": {f.name: getattr(self.detector, f.name) for f in fields(DetectorSettings)},
        }

    def to_toml(self) -> str:
        return tomli_w.dumps(self.resolved())


@dataclass(frozen=True)
class SweepConfig:
    name: str
    base: dict
    axes: dict
    parallelism: int = 1
    resume: bool = False
    output_dir: str = ""

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values())

    def cells(self) -> list[tuple[dict, RunConfig]]:
        """(overrides, config) for every point of the cartesian product, in axis order."""
        keys = list(self.axes)
        out = []
        for values in itertools.product(*(self.axes[k] for k in keys)):
            over = dict(zip(keys, values))
            raw = _apply_overrides(self.base, over)
            raw["run"]["output_dir"] = os.path.join(self.output_dir, "cells", cell_key(over))
            raw["name"] = f"{self.name}/{cell_key(over)}"
            out.append((over, _build_run(raw)))
        return out


@dataclass(frozen=True)
class LemmaConfig:
    name: str
    samples: int = 100_000
    T: float = 200.0
    K: int = 64
    H: float = 256.0
    iotas: tuple[float, ...] = (1.0, 0.1, 0.01)
    seed: int = 0
    rel_slack: float = 1e-9
    output_dir: str = ""


def cell_key(overrides: dict) -> str:
    blob = json.dumps(overrides, sort_keys=True, default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files("pksns.presets").iterdir() if p.name.endswith(".toml"))


def resolve_path(name_or_path: str | os.PathLike) -> Path:
    """A config path, or the name of a shipped preset."""
    p = Path(name_or_path)
    if p.exists():
        return p
    preset = resources.files("pksns.presets") / f"{name_or_path}.toml"
    if preset.is_file():
        return Path(str(preset))
    raise ConfigError(f"no config file or preset named {str(name_or_path)!r}; presets: {preset_names()}")


def load_config(name_or_path) -> RunConfig | SweepConfig | LemmaConfig:
    path = resolve_path(name_or_path)
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed TOML: {exc}") from exc
    raw.setdefault("name", path.stem)
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig | SweepConfig | LemmaConfig:
    """Validate a raw TOML dictionary and fill in defaults."""
    raw = copy.deepcopy(raw)
    for key in raw:
        if key not in _TOP:
            raise ConfigError(f"unknown top-level key {key!r}")
    for sec, allowed in _SECTIONS.items():
        if sec in raw:
            if not isinstance(raw[sec], dict):
                raise ConfigError(f"[{sec}] must be a table")
            for key in raw[sec]:
                if key not in allowed:
                    raise ConfigError(f"unknown key {sec}.{key}")
    kind = raw.get("kind", "lemma" if "lemma" in raw else "sweep" if "sweep" in raw else "run")
    raw.setdefault("name", "run")
    if kind == "lemma":
        return _build_lemma(raw)
    if kind == "sweep":
        return _build_sweep(raw)
    if kind != "run":
        raise ConfigError(f"kind must be run, sweep or lemma, got {kind!r}")
    return _build_run(raw)


def _default_output(name: str) -> str:
    return str(output_root() / name)


def _build_lemma(raw: dict) -> LemmaConfig:
    sec = raw.get("lemma", {})
    cfg = LemmaConfig(
        name=raw["name"],
        samples=int(sec.get("samples", 100_000)),
        T=float(sec.get("T", 200.0)),
        K=int(sec.get("K", 64)),
        H=float(sec.get("H", 256.0)),
        iotas=tuple(float(x) for x in sec.get("iotas", (1.0, 0.1, 0.01))),
        seed=int(sec.get("seed", 0)),
        rel_slack=float(sec.get("rel_slack", 1e-9)),
        output_dir=raw.get("run", {}).get("output_dir", _default_output(raw["name"])),
    )
    if cfg.samples <= 0:
        raise ConfigError("lemma.samples must be positive")
    return cfg


def _build_sweep(raw: dict) -> SweepConfig:
    sec = raw.pop("sweep", {})
    axes = sec.get("axes", {})
    if not isinstance(axes, dict) or not axes:
        raise ConfigError("sweep.axes must be a non-empty table of lists")
    for k, v in axes.items():
        if k not in SWEEP_AXES:
            raise ConfigError(f"sweep.axes.{k}: not a sweepable parameter (allowed: {', '.join(SWEEP_AXES)})")
        if not isinstance(v, list) or not v:
            raise ConfigError(f"sweep.axes.{k} must be a non-empty list")
    par = int(sec.get("parallelism", 1))
    if par < 1:
        raise ConfigError("sweep.parallelism must be >= 1")
    raw["kind"] = "run"
    out = raw.get("run", {}).get("output_dir", _default_output(raw["name"]))
    sweep = SweepConfig(raw["name"], raw, axes, par, bool(sec.get("resume", False)), out)
    # validate every cell up front so a bad axis value fails before launch
    sweep.cells()
    return sweep


def _apply_overrides(base: dict, over: dict) -> dict:
    raw = copy.deepcopy(base)
    paper = raw.setdefault("paper", {})
    grid = raw.setdefault("grid", {})
    init = raw.setdefault("initial", {})
    for k, v in over.items():
        if k in ("kappa", "nu", "epsilon"):
            paper[k] = v
        elif k == "M":
            paper["M"] = v
            init.pop("blobs", None)
        elif k == "sigma":
            init["sigma"] = v
            init.pop("blobs", None)
        elif k in ("Nx", "Ny", "Ly"):
            grid[k] = v
        elif k == "couette":
            raw.setdefault("switches", {})["couette"] = v
    # keep exactly two of kappa, nu, epsilon; the overridden ones win
    trio = [k for k in ("kappa", "nu", "epsilon") if k in paper]
    if len(trio) == 3:
        fixed = [k for k in ("kappa", "nu", "epsilon") if k in over]
        if len(fixed) < 3:
            drop = next(k for k in ("kappa", "epsilon", "nu") if k not in fixed)
            paper.pop(drop)
    return raw


def _num(sec: dict, key: str, secname: str, default=None, positive=False, integer=False):
    if key not in sec:
        if default is None:
            raise ConfigError(f"missing required key {secname}.{key}")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{secname}.{key} must be a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{secname}.{key} must be an integer, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{secname}.{key} must be positive, got {v!r}")
    return int(v) if integer else float(v)


def _params(sec: dict) -> PhysParams:
    given = {k: _num(sec, k, "paper", positive=True) for k in ("kappa", "nu", "epsilon") if k in sec}
    if len(given) < 2:
        raise ConfigError("[paper] needs at least two of kappa, nu, epsilon")
    if "epsilon" in given and given["epsilon"] > 1:
        raise ConfigError(f"paper.epsilon = {given['epsilon']} violates epsilon <= 1")
    if "kappa" not in given:
        given["kappa"] = given["epsilon"] * given["nu"]
    if "nu" not in given:
        given["nu"] = given["kappa"] / given["epsilon"]
    if "epsilon" not in given:
        given["epsilon"] = given["kappa"] / given["nu"]
    kappa, nu, eps = given["kappa"], given["nu"], given["epsilon"]
    if nu > 1:
        raise ConfigError(f"paper.nu = {nu} violates nu <= 1")
    if kappa > nu:
        raise ConfigError(f"paper.kappa = {kappa} violates kappa <= nu (nu = {nu})")
    if eps > 1:
        raise ConfigError(f"paper.epsilon = {eps} violates epsilon <= 1")
    if not math.isclose(kappa, eps * nu, rel_tol=1e-12):
        raise ConfigError(f"paper.kappa = {kappa} violates kappa = epsilon*nu = {eps * nu}")
    delta = _num(sec, "delta", "paper", DELTA_MAX)
    if not 0 < delta <= DELTA_MAX * (1 + 1e-12):
        raise ConfigError(f"paper.delta = {delta} must lie in (0, 1/(16 pi^2)]")
    s = _num(sec, "s", "paper", 5.0)
    if s < 0:
        raise ConfigError(f"paper.s = {s} must be >= 0")
    M = _num(sec, "M", "paper", 0.0)
    if M < 0:
        raise ConfigError(f"paper.M = {M} must be >= 0")
    return PhysParams(kappa=kappa, nu=nu, epsilon=eps, delta=delta, s=s, M=M)


def _blobs(init: dict, M: float) -> tuple[BlobSpec, ...]:
    if "blobs" in init:
        out = []
        for i, b in enumerate(init["blobs"]):
            sec = f"initial.blobs[{i}]"
            mass = _num(b, "mass", sec)
            center = tuple(float(c) for c in b.get("center", (math.pi, 0.0)))
            if len(center) != 2:
                raise ConfigError(f"{sec}.center must have two entries")
            out.append(BlobSpec(mass, center, _num(b, "sigma", sec, 0.5, positive=True)))
        total = sum(b.mass for b in out)
        if M and not math.isclose(total, M, rel_tol=1e-12):
            raise ConfigError(f"initial.blobs masses sum to {total}, but paper.M = {M}")
        return tuple(out)
    if M == 0:
        return ()
    center = tuple(float(c) for c in init.get("center", (math.pi, 0.0)))
    if len(center) != 2:
        raise ConfigError("initial.center must have two entries")
    return (BlobSpec(M, center, _num(init, "sigma", "initial", 0.5, positive=True)),)


def _omega(sec: dict) -> OmegaSpec:
    kind = sec.get("kind", "zero")
    if kind not in ("zero", "mode", "threshold"):
        raise ConfigError(f"initial.omega.kind must be zero, mode or threshold, got {kind!r}")
    k = _num(sec, "k", "initial.omega", 1, integer=True)
    j = _num(sec, "j", "initial.omega", 0, integer=True)
    amp = _num(sec, "amplitude", "initial.omega", 0.0)
    if kind != "zero" and k == 0 and j == 0:
        raise ConfigError("initial.omega: mode (k, j) = (0, 0) is not allowed")
    return OmegaSpec(kind, k, j, amp)


def _switches(sec: dict) -> Switches:
    vals = {}
    for key in ("couette", "chemotaxis", "fluid", "fluid_forcing", "passive_scalar"):
        if key in sec and not isinstance(sec[key], bool):
            raise ConfigError(f"switches.{key} must be true or false")
    if sec.get("passive_scalar", False):
        if sec.get("chemotaxis") or sec.get("fluid"):
            raise ConfigError("switches.passive_scalar conflicts with chemotaxis/fluid = true")
        vals.update(chemotaxis=False, fluid=False, fluid_forcing=False)
    for key in ("couette", "chemotaxis", "fluid", "fluid_forcing"):
        if key in sec:
            vals[key] = sec[key]
    return Switches(**vals)


def _build_run(raw: dict) -> RunConfig:
    name = str(raw.get("name", "run"))
    params = _params(raw.get("paper", {}))
    gsec = raw.get("grid", {})
    try:
        grid = make_grid(_num(gsec, "Nx", "grid", 64, integer=True),
                         _num(gsec, "Ny", "grid", 256, integer=True),
                         _num(gsec, "Ly", "grid", 16 * math.pi))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[grid]: {exc}") from exc
    init = raw.get("initial", {})
    blobs = _blobs(init, params.M)
    if blobs and not params.M:
        params = PhysParams(**{**params.to_dict(), "M": sum(b.mass for b in blobs)})
    omega = _omega(init.get("omega", {}))
    sw = _switches(raw.get("switches", {}))
    if omega.kind != "zero" and not sw.fluid:
        raise ConfigError("initial.omega is non-zero but switches.fluid = false freezes it")
    rsec = raw.get("run", {})
    t_max = _num(rsec, "t_max", "run", positive=True)
    out_interval = _num(rsec, "out_interval", "run", min(0.1, t_max), positive=True)
    n_out = t_max / out_interval
    if abs(n_out - round(n_out)) > 1e-9 * max(1, n_out):
        raise ConfigError(f"run.t_max = {t_max} is not a multiple of run.out_interval = {out_interval}")
    dsec = raw.get("detector", {})
    defaults = DetectorSettings()
    det = DetectorSettings(**{f.name: _num(dsec, f.name, "detector", getattr(defaults, f.name), positive=True)
                              for f in fields(DetectorSettings)})
    return RunConfig(
        name=name,
        grid=grid,
        params=params,
        blobs=blobs,
        omega=omega,
        switches=sw,
        t_max=t_max,
        out_interval=out_interval,
        output_dir=str(rsec.get("output_dir", _default_output(name))),
        seed=_num(rsec, "seed", "run", 0, integer=True),
        checkpoint_every=_num(rsec, "checkpoint_every", "run", 10, positive=True, integer=True),
        detector=det,
        raw=raw,
    )
