"""TOML scenario configs.

Layout::

    [scenario]
    kind = "rotating-bc"      # ab-flux | rotating-bc | direct-sum | custom-T-loop
    chern = 1                 # rotating-bc: target on the outer circle
    chern_inner = 0           # rotating-bc: target on the inner circle
    flavors = 2               # rank of E-; the ambient rank is twice this

    [grid]
    modes = 32                # Fourier modes m in [-modes, modes]
    nz = 64
    nt = 64

    [topology]
    nx = 64
    nt = 64

    [tolerance]
    window = 1.0              # spectral window for the counting method
    sector_fraction = 0.5     # weight modes |m| <= fraction * modes
    residual = 0.05           # accepted distance of the weighted count from an integer

    [output]
    dir = "out"

Matrices are nested lists; a complex entry is written ``[re, im]``.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .discretize import AnnulusGrid, AnnulusScenario, DirectSumScenario
from .errors import ConfigError
from .scenarios import ab_flux, custom_T_loop, rotating_bc

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("ab-flux", "rotating-bc", "direct-sum", "custom-T-loop")

DEFAULTS: dict[str, Any] = {
    "scenario": {"kind": "rotating-bc", "chern": 1},
    "grid": {"modes": 32, "nz": 64, "nt": 64},
    "topology": {"nx": 64, "nt": 64},
    "tolerance": {"window": 1.0, "sector_fraction": 0.5, "residual": 0.05},
    "output": {"dir": None},
}


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_matrix(value: Any) -> np.ndarray:
    """Nested list of numbers or [re, im] pairs -> complex 2-D array."""

    def entry(e):
        if isinstance(e, (int, float)):
            return complex(e)
        if isinstance(e, list) and len(e) == 2 and all(isinstance(x, (int, float)) for x in e):
            return complex(e[0], e[1])
        raise ConfigError(f"bad matrix entry {e!r}; use a number or [re, im]")

    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise ConfigError("matrix must be a non-empty list of rows")
    rows = [[entry(e) for e in row] for row in value]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError("matrix rows have different lengths")
    return np.array(rows, dtype=complex)


@dataclass
class ScenarioConfig:
    raw: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.raw["scenario"]["kind"]

    @property
    def grid(self) -> AnnulusGrid:
        g = self.raw["grid"]
        return AnnulusGrid(int(g["modes"]), int(g["nz"]))

    @property
    def nt(self) -> int:
        return int(self.raw["grid"]["nt"])

    @property
    def topo_grid(self) -> tuple[int, int]:
        t = self.raw["topology"]
        return int(t["nx"]), int(t["nt"])

    @property
    def window(self) -> float:
        return float(self.raw["tolerance"]["window"])

    @property
    def sector_fraction(self) -> float | None:
        v = self.raw["tolerance"].get("sector_fraction")
        return None if v is None or v is False else float(v)

    @property
    def residual(self) -> float:
        return float(self.raw["tolerance"]["residual"])

    @property
    def out_dir(self) -> Path | None:
        d = self.raw["output"].get("dir")
        return Path(d) if d else None

    def scenario(self) -> AnnulusScenario | DirectSumScenario:
        return build_scenario(self.raw["scenario"])


def _int(table: dict, key: str, default: int) -> int:
    v = table.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer")
    return v


def build_scenario(table: dict) -> AnnulusScenario | DirectSumScenario:
    kind = table.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown scenario kind {kind!r}; expected one of {', '.join(KINDS)}")
    if kind == "ab-flux":
        return ab_flux(
            _int(table, "flux", 1),
            _int(table, "flavors", 1),
            float(table.get("t_inner", 1.0)),
            float(table.get("t_outer", -2.0)),
        )
    if kind == "rotating-bc":
        flavors = _int(table, "flavors", 2)
        if flavors < 1:
            raise ConfigError("flavors must be positive")
        outer = _int(table, "chern", 0)
        inner = _int(table, "chern_inner", 0)
        if flavors < 2 and (outer or inner):
            raise ConfigError("a non-zero Chern target needs flavors >= 2")
        return rotating_bc(outer, inner, flavors, float(table.get("t_offset", 0.25)))
    if kind == "custom-T-loop":
        flavors = _int(table, "flavors", 1)

        def terms(name):
            out = []
            for term in table.get(name, []):
                c = parse_matrix(term["c"])
                if c.shape != (flavors, flavors):
                    raise ConfigError(f"{name} coefficient has shape {c.shape}, expected ({flavors}, {flavors})")
                out.append((_int(term, "p", 0), _int(term, "q", 0), c))
            return out

        return custom_T_loop(flavors, terms("inner"), terms("outer"), _int(table, "flux", 0))
    parts = table.get("parts")
    if not parts:
        raise ConfigError("direct-sum needs at least one [[scenario.parts]] entry")
    built = []
    for p in parts:
        if p.get("kind") == "direct-sum":
            raise ConfigError("nested direct sums are not supported")
        built.append(build_scenario(p))
    return DirectSumScenario(tuple(built))


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> ScenarioConfig:
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    merged = _merge(DEFAULTS, raw)
    if "scenario" in raw:
        merged["scenario"] = copy.deepcopy(raw["scenario"])
    if overrides:
        merged = _merge(merged, overrides)
    cfg = ScenarioConfig(merged)
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    g = cfg.raw["grid"]
    for key, lo, hi in (("modes", 1, 256), ("nz", 8, 1024), ("nt", 2, 4096)):
        v = g.get(key)
        if isinstance(v, bool) or not isinstance(v, int) or not lo <= v <= hi:
            raise ConfigError(f"grid.{key} must be an integer in [{lo}, {hi}]")
    for key in ("nx", "nt"):
        v = cfg.raw["topology"].get(key)
        if isinstance(v, bool) or not isinstance(v, int) or not 3 <= v <= 4096:
            raise ConfigError(f"topology.{key} must be an integer in [3, 4096]")
    if cfg.window <= 0:
        raise ConfigError("tolerance.window must be positive")
    if cfg.residual <= 0 or cfg.residual >= 0.5:
        raise ConfigError("tolerance.residual must lie in (0, 0.5)")
    frac = cfg.sector_fraction
    if frac is not None and not 0 < frac <= 1:
        raise ConfigError("tolerance.sector_fraction must lie in (0, 1]")
    cfg.scenario()


def resolved(cfg: ScenarioConfig) -> dict:
    """JSON-safe copy of the merged config."""
    return copy.deepcopy(cfg.raw)
