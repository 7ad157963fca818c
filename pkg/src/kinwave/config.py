"""Run configuration: INI-style key = value files with fixed sections.

Unknown sections or keys are rejected so config typos fail loudly.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .gas import FluidTriple, TransportLaw
from .solvers import GaussianBump, PerturbationSpec

_SCHEMA = {
    "states": {"v_right", "u1_right", "theta_right"},
    "strengths": {"delta_r", "delta_c", "delta_s"},
    "grid": {"y_min", "y_max", "dy", "velocity_counts", "velocity_extent",
             "sphere_polar", "sphere_azimuth", "nx"},
    "perturbation": {"bumps", "micro_amplitude", "micro_center",
                     "micro_width"},
    "solver": {"t_end", "output_interval", "dt_factor", "kinetic_dt",
               "operator_block", "mu_coefficient", "kappa_coefficient",
               "seed"},
    "output": {"dir", "snapshots", "write_fields", "cache_dir"},
}

_RANGES = {
    ("states", "v_right"): (1e-3, 1e3),
    ("states", "theta_right"): (1e-3, 1e3),
    ("strengths", "delta_r"): (0.0, 0.5),
    ("strengths", "delta_c"): (0.0, 0.5),
    ("strengths", "delta_s"): (0.0, 0.3),
    ("grid", "dy"): (1e-4, 10.0),
    ("grid", "velocity_counts"): (4, 64),
    ("grid", "nx"): (8, 100_000),
    ("solver", "t_end"): (0.0, 1e6),
    ("solver", "dt_factor"): (1e-3, 1.0),
}


@dataclass
class RunConfig:
    right_state: FluidTriple = field(
        default_factory=lambda: FluidTriple(v=1.0, u=(0.0, 0.0, 0.0), theta=1.0))
    delta_r: float = 0.08
    delta_c: float = 0.05
    delta_s: float = 0.08
    y_min: float = -600.0
    y_max: float = 200.0
    dy: float = 0.2
    velocity_counts: int = 16
    velocity_extent: float = 6.0
    sphere_polar: int = 1
    sphere_azimuth: int = 4
    nx: int = 64
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)
    t_end: float = 200.0
    output_interval: float = 2.0
    dt_factor: float = 1.0
    kinetic_dt: float = 0.02
    operator_block: int = 8
    transport: TransportLaw = field(default_factory=TransportLaw)
    seed: int = 0
    out_dir: Path = Path("out")
    snapshots: tuple[float, ...] = ()
    write_fields: bool = False
    cache_dir: Path | None = None


def _parse_bumps(text: str) -> tuple[GaussianBump, ...]:
    bumps = []
    for item in text.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 4:
            raise ConfigError(
                f"bump '{item}' must be target:amplitude:center:width")
        target = parts[0].strip()
        if target not in ("v", "u1", "u2", "u3", "theta"):
            raise ConfigError(f"unknown bump target '{target}'")
        try:
            amp, center, width = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise ConfigError(f"bump '{item}': {exc}") from exc
        if width <= 0:
            raise ConfigError(f"bump '{item}': width must be positive")
        bumps.append(GaussianBump(target, amp, center, width))
    return tuple(bumps)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
    for (sec, key), (lo, hi) in _RANGES.items():
        if parser.has_option(sec, key):
            val = parser.getfloat(sec, key)
            if not lo <= val <= hi:
                raise ConfigError(
                    f"{sec}.{key} = {val} outside [{lo}, {hi}]")

    cfg = RunConfig()

    def getf(sec, key, default):
        return parser.getfloat(sec, key) if parser.has_option(sec, key) else default

    def geti(sec, key, default):
        return parser.getint(sec, key) if parser.has_option(sec, key) else default

    cfg.right_state = FluidTriple(
        v=getf("states", "v_right", 1.0),
        u=(getf("states", "u1_right", 0.0), 0.0, 0.0),
        theta=getf("states", "theta_right", 1.0))
    cfg.delta_r = getf("strengths", "delta_r", cfg.delta_r)
    cfg.delta_c = getf("strengths", "delta_c", cfg.delta_c)
    cfg.delta_s = getf("strengths", "delta_s", cfg.delta_s)
    cfg.y_min = getf("grid", "y_min", cfg.y_min)
    cfg.y_max = getf("grid", "y_max", cfg.y_max)
    cfg.dy = getf("grid", "dy", cfg.dy)
    cfg.velocity_counts = geti("grid", "velocity_counts", cfg.velocity_counts)
    cfg.velocity_extent = getf("grid", "velocity_extent", cfg.velocity_extent)
    cfg.sphere_polar = geti("grid", "sphere_polar", cfg.sphere_polar)
    cfg.sphere_azimuth = geti("grid", "sphere_azimuth", cfg.sphere_azimuth)
    cfg.nx = geti("grid", "nx", cfg.nx)
    if parser.has_option("perturbation", "bumps"):
        bumps = _parse_bumps(parser.get("perturbation", "bumps"))
    else:
        bumps = ()
    cfg.perturbation = PerturbationSpec(
        bumps=bumps,
        micro_amplitude=getf("perturbation", "micro_amplitude", 0.0),
        micro_center=getf("perturbation", "micro_center", 0.0),
        micro_width=getf("perturbation", "micro_width", 10.0))
    cfg.t_end = getf("solver", "t_end", cfg.t_end)
    cfg.output_interval = getf("solver", "output_interval", cfg.output_interval)
    cfg.dt_factor = getf("solver", "dt_factor", cfg.dt_factor)
    cfg.kinetic_dt = getf("solver", "kinetic_dt", cfg.kinetic_dt)
    cfg.operator_block = geti("solver", "operator_block", cfg.operator_block)
    cfg.transport = TransportLaw(
        A1=getf("solver", "mu_coefficient", 1.0),
        A2=getf("solver", "kappa_coefficient", 2.5))
    cfg.seed = geti("solver", "seed", 0)
    if parser.has_option("output", "dir"):
        cfg.out_dir = Path(parser.get("output", "dir"))
    if parser.has_option("output", "cache_dir"):
        cfg.cache_dir = Path(parser.get("output", "cache_dir"))
    if parser.has_option("output", "snapshots"):
        cfg.snapshots = tuple(
            float(s) for s in parser.get("output", "snapshots").split(",") if s.strip())
    if parser.has_option("output", "write_fields"):
        cfg.write_fields = parser.getboolean("output", "write_fields")
    return cfg


PRESETS: dict[str, dict] = {
    "stability-small": {
        "strengths": {"delta_r": 0.08, "delta_c": 0.05, "delta_s": 0.08},
        "perturbation": {"bumps": "v:0.01:0:25; u1:-0.01:0:25; theta:-0.01:0:25"},
        "solver": {"t_end": 200.0},
    },
    "shock-only": {
        "strengths": {"delta_r": 0.0, "delta_c": 0.0, "delta_s": 0.1},
        "grid": {"y_min": -150.0, "y_max": 150.0},
        "perturbation": {"bumps": "u1:0.01:0:8"},
        "solver": {"t_end": 50.0},
    },
    "kinetic-sanity": {
        "strengths": {"delta_r": 0.02, "delta_c": 0.02, "delta_s": 0.05},
        "grid": {"y_min": -15.0, "y_max": 15.0, "nx": 64,
                 "velocity_counts": 6},
        "solver": {"t_end": 4.0, "kinetic_dt": 0.02},
    },
}


def apply_preset(cfg: RunConfig, name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset '{name}'; available: {sorted(PRESETS)}")
    data = PRESETS[name]
    if "strengths" in data:
        cfg.delta_r = data["strengths"].get("delta_r", cfg.delta_r)
        cfg.delta_c = data["strengths"].get("delta_c", cfg.delta_c)
        cfg.delta_s = data["strengths"].get("delta_s", cfg.delta_s)
    if "grid" in data:
        g = data["grid"]
        cfg.y_min = g.get("y_min", cfg.y_min)
        cfg.y_max = g.get("y_max", cfg.y_max)
        cfg.nx = int(g.get("nx", cfg.nx))
        cfg.velocity_counts = int(g.get("velocity_counts", cfg.velocity_counts))
    if "perturbation" in data:
        cfg.perturbation = PerturbationSpec(
            bumps=_parse_bumps(data["perturbation"].get("bumps", "")))
    if "solver" in data:
        s = data["solver"]
        cfg.t_end = s.get("t_end", cfg.t_end)
        cfg.kinetic_dt = s.get("kinetic_dt", cfg.kinetic_dt)
    return cfg
