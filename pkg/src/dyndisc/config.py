"""Experiment configuration, TOML loading, and run manifests.

A manifest records everything a rerun needs (resolved config, scheme
rationals, seeds, toggles); rerunning from it reproduces every CSV byte
for byte.  Wall times live in the manifest only, never in result CSVs.
"""

from __future__ import annotations

import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .exceptions import ConfigError
from .lmm import SchemeFamily, build_scheme

EXPERIMENT_KINDS = (
    "coeffs",
    "stability",
    "gen-data",
    "grid-discover",
    "discover",
    "grid-converge",
    "net-converge",
    "netsize",
    "opt-probe",
    "predict",
    "region",
    "appendix-unstable",
)

OUTPUT_ENV_VAR = "DYNDISC_OUT"


@dataclass
class ExperimentConfig:
    kind: str
    model: str = "trig"
    model_params: dict = field(default_factory=dict)
    families: list = field(default_factory=lambda: ["ab", "bdf"])
    steps: list = field(default_factory=lambda: [1, 2, 3, 4])
    h_values: list = field(default_factory=lambda: [2.0**-k for k in range(3, 10)])
    scan_N: list = field(default_factory=lambda: [64, 128, 256, 512, 1024])
    T: Optional[float] = None
    N: Optional[int] = None
    x0: Optional[list] = None
    data_file: Optional[str] = None

    profile: str = "desk"
    width: Optional[int] = None
    depth: Optional[int] = None
    epochs: Optional[int] = None
    record_every: int = 100
    seeds: list = field(default_factory=lambda: [0])
    with_aux: bool = True
    compare_aux: bool = False

    solver: str = "fs"
    gmres_tol: float = 1e-4
    gmres_restart: int = 50
    gmres_max_iter: Optional[int] = None

    n_trajectories: int = 10
    lattice: int = 40
    discovery_path: str = "grid"       # grid | net (converge and region runs)
    mc_samples: int = 2000

    epsilons: list = field(default_factory=lambda: [0.0])
    deltas: list = field(default_factory=lambda: [0.0])
    theta_div: float = 0.1
    div_window: int = 50
    rk4_steps_per_unit: int = 10_000

    widths: list = field(default_factory=lambda: [16, 32, 64, 128, 256])
    depths: list = field(default_factory=lambda: [2, 3])

    out_dir: Optional[str] = None
    figures: bool = True

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.families or not self.steps:
            raise ConfigError("scheme grid must be nonempty")
        hs = [float(h) for h in self.h_values]
        if not hs or any(h <= 0 for h in hs) or len(set(hs)) != len(hs):
            raise ConfigError("h values must be positive and distinct")
        self.h_values = hs
        for fam in self.families:
            SchemeFamily.parse(fam)
        if self.profile not in ("desk", "paper"):
            raise ConfigError("profile must be desk or paper")
        if self.solver not in ("fs", "gmres"):
            raise ConfigError("solver must be fs or gmres")
        if self.discovery_path not in ("grid", "net"):
            raise ConfigError("discovery_path must be grid or net")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path, kind: Optional[str] = None) -> ExperimentConfig:
    """Read a TOML config file or the `config` section of a JSON manifest."""
    path = Path(path)
    if path.suffix == ".json":
        manifest = json.loads(path.read_text())
        if "config" not in manifest:
            raise ConfigError(f"{path} is not a run manifest (no config section)")
        data = manifest["config"]
    else:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        data = dict(raw.get("experiment", {}))
        for section in ("train", "predict", "region", "netsize", "solver", "output"):
            data.update(raw.get(section, {}))
        if "params" in raw:
            data["model_params"] = dict(raw["params"])
    if kind is not None:
        data.setdefault("kind", kind)
    return ExperimentConfig.from_dict(data)


def resolve_out_dir(config: ExperimentConfig, override: Optional[str] = None) -> Path:
    base = override or config.out_dir or os.environ.get(OUTPUT_ENV_VAR) or "runs"
    out = Path(base)
    out.mkdir(parents=True, exist_ok=True)
    return out


class ManifestWriter:
    """Collects reproducibility metadata during a run and writes manifest.json."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._start = time.monotonic()
        self.extra: dict = {}

    def record_schemes(self, schemes) -> None:
        self.extra["schemes"] = [
            {
                "family": s.family.value,
                "steps": s.steps,
                "order": s.order,
                "alpha": [str(a) for a in s.alpha],
                "beta": [str(b) for b in s.beta],
            }
            for s in schemes
        ]

    def record(self, key: str, value) -> None:
        self.extra[key] = value

    def write(self, out_dir: Path) -> Path:
        manifest = {
            "config": self.config.to_dict(),
            "code_version": __version__,
            "wall_time_s": round(time.monotonic() - self._start, 3),
            "toggles": {
                "init_literal_range": False,
                "relu_subgradient_at_zero": 0.0,
                "component_seed_rule": "seed + component_index",
                "lorenz_epsilon_rule": "added to every component",
                "region_mc_measure": "uniform in (segment parameter, time) chart",
            },
            **self.extra,
        }
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def write_csv(path, header_comments, columns, rows) -> None:
    """CSV with a `#` comment block documenting columns, then data rows.

    Floats are rendered with repr (shortest round-trip), so equal runs
    produce byte-identical files.
    """
    import csv as _csv

    def fmt(v):
        if isinstance(v, float):
            return repr(v)
        return v

    with open(path, "w", newline="") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        writer = _csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
