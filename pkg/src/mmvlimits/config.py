"""Flat ``key=value`` run configuration for the command-line front end.

A config file holds one ``key = value`` per line (``#`` starts a comment).
Command-line flags use the same keys and override the file. Ranges are
written ``lo,hi,steps``; lists as comma-separated values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending setting."""

    def __init__(self, key: str, message: str, precondition: str = ""):
        self.key = key
        self.precondition = precondition
        super().__init__(f"{key}: {message}" + (f" [{precondition}]" if precondition else ""))

    def record(self) -> dict:
        return {"error": "config", "key": self.key, "message": str(self),
                "precondition": self.precondition}


def _float(text: str) -> float:
    return float(text)


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text}")
    return int(value)


def _floats(text: str) -> list[float]:
    return [float(t) for t in str(text).split(",") if t.strip()]


def _triple(text: str) -> tuple[float, float, int]:
    parts = [t.strip() for t in str(text).split(",")]
    if len(parts) == 1:
        v = float(parts[0])
        return (v, v, 1)
    if len(parts) != 3:
        raise ValueError("expected lo,hi,steps")
    return (float(parts[0]), float(parts[1]), _int(parts[2]))


def _str(text: str) -> str:
    return str(text).strip()


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None
    check: Callable[[Any], bool] | None = None
    precondition: str = ""
    help: str = ""


_pos = lambda v: v > 0  # noqa: E731
_prob = lambda v: 0 < v <= 1  # noqa: E731

PRIOR = {
    "rho": Key(_float, None, _prob, "model.PriorParams: 0 < rho <= 1", "sparsity rate"),
    "J": Key(_int, None, lambda v: v >= 1, "model.PriorParams: J >= 1", "number of signal vectors"),
}
NOISE = {
    "delta": Key(_float, None, _pos, "model.ProblemParams: delta > 0", "linear noise variance"),
    "delta_db": Key(_float, None, math.isfinite, "model.ProblemParams: delta > 0", "noise variance in dB"),
}
RATE = {"R": Key(_float, None, _pos, "model.ProblemParams: R > 0", "measurement rate")}
COMMON = {
    "out": Key(_str, None, None, "", "output CSV path"),
    "jobs": Key(_int, 1, lambda v: v >= 1, "cli: jobs >= 1", "worker processes"),
}
GRID = {"n_grid": Key(_int, 256, lambda v: v >= 64, "replica.profile: n_grid >= 64", "E grid size")}
DELTA_RANGE = {"delta_db_range": Key(_triple, None, lambda t: t[2] >= 1,
                                     "phase.phase_diagram: steps >= 1", "lo,hi,steps in dB")}
R_RANGE = {"R_range": Key(_triple, None, lambda t: t[0] > 0 and t[1] > 0 and t[2] >= 1,
                          "phase.phase_diagram: R > 0, steps >= 1", "lo,hi,steps")}
SEED = {"seed": Key(_int, 0, lambda v: v >= 0, "sim.generate: seed >= 0", "root seed")}

SCHEMAS: dict[str, dict[str, Key]] = {
    "free-energy": {**COMMON, **PRIOR, **NOISE,
                    "R": Key(_floats, None, lambda v: len(v) > 0 and all(x > 0 for x in v),
                             "model.ProblemParams: R > 0", "comma-separated rates"),
                    "E_min": Key(_float, None, _pos, "replica.free_energy: E > 0"),
                    "E_max": Key(_float, None, _pos, "replica.free_energy: E > 0"),
                    "n_points": Key(_int, 200, lambda v: v >= 2, "cli: n_points >= 2")},
    "mmse": {**COMMON, **PRIOR, **NOISE, **RATE, **GRID},
    "profile": {**COMMON, **PRIOR, **NOISE, **RATE, **GRID,
                "E_min": Key(_float, None, _pos, "replica.profile: 0 < E_min < E_max"),
                "E_max": Key(_float, None, _pos, "replica.profile: 0 < E_min < E_max")},
    "phase-diagram": {**COMMON, **PRIOR, **DELTA_RANGE, **R_RANGE, **GRID},
    "thresholds": {**COMMON, **PRIOR, **DELTA_RANGE, **GRID,
                   "R_lo": Key(_float, 0.08, _pos, "phase.threshold: 0 < R_lo < R_hi"),
                   "R_hi": Key(_float, 0.30, _pos, "phase.threshold: 0 < R_lo < R_hi"),
                   "tol": Key(_float, 1e-4, _pos, "phase.threshold: tol > 0"),
                   "kinds": Key(lambda t: [k.strip() for k in t.split(",")], ["critical", "low_noise", "BP"],
                                lambda v: all(k in ("critical", "low_noise", "BP") for k in v),
                                "phase.threshold: kind in {critical, low_noise, BP}")},
    "se": {**COMMON, **PRIOR, **NOISE, **RATE,
           "E0": Key(_float, None, _pos, "se.se_fixed_point: 0 < E0 <= rho"),
           "tol": Key(_float, 1e-10, _pos, "se.se_fixed_point: tol > 0"),
           "max_iter": Key(_int, 10_000, lambda v: v >= 1, "se.se_fixed_point: max_iter >= 1")},
    "amp-sim": {**COMMON, **PRIOR, **DELTA_RANGE, **R_RANGE, **SEED,
                "N": Key(_int, 5000, lambda v: v >= 10, "sim.generate: N >= 10"),
                "n_trials": Key(_int, 50, lambda v: v >= 1, "amp.amp_sweep: n_trials >= 1"),
                "setting": Key(_str, "MMV1", lambda v: v in ("MMV1", "MMV2", "ComplexReal"),
                               "amp.amp_run: setting in {MMV1, MMV2, ComplexReal}"),
                "t_max": Key(_int, 200, lambda v: v >= 1, "amp.AmpConfig: t_max >= 1"),
                "epsilon": Key(_float, 1e-8, _pos, "amp.AmpConfig: epsilon > 0"),
                "damping": Key(_float, 0.0, lambda v: 0 <= v < 1, "amp.AmpConfig: 0 <= damping < 1"),
                "init_variance": Key(_str, "noise", lambda v: v in ("noise", "prior"),
                                     "amp.AmpConfig: init_variance in {noise, prior}")},
    "lemma1-check": {**COMMON, **PRIOR, **NOISE, **RATE, **SEED,
                     "N": Key(_int, 2000, lambda v: v >= 10, "sim.generate: N >= 10"),
                     "n_mc": Key(_int, 10_000, lambda v: v >= 100, "sim.empirical_v_covariance: n_mc >= 100"),
                     "estimator": Key(lambda t: [k.strip() for k in t.split(",")], ["exact", "independent"],
                                      lambda v: all(k in ("exact", "null", "independent") for k in v),
                                      "sim.empirical_v_covariance: estimator in {exact, null, independent}"),
                     "settings": Key(lambda t: [k.strip() for k in t.split(",")], ["MMV1", "MMV2"],
                                     lambda v: all(k in ("MMV1", "MMV2", "ComplexReal", "ComplexComplex") for k in v),
                                     "sim.Setting")},
    "complex-mmse": {**COMMON, **NOISE, **RATE, **GRID,
                     "rho": PRIOR["rho"],
                     "matrix": Key(_str, "real", lambda v: v in ("real", "complex"),
                                   "sim: matrix in {real, complex}")},
}

REQUIRED = {
    "free-energy": ["rho", "J", "R"], "mmse": ["rho", "J", "R"], "profile": ["rho", "J", "R"],
    "phase-diagram": ["rho", "J", "delta_db_range", "R_range"],
    "thresholds": ["rho", "J", "delta_db_range"], "se": ["rho", "J", "R"],
    "amp-sim": ["rho", "J", "delta_db_range", "R_range"],
    "lemma1-check": ["rho", "J", "R"], "complex-mmse": ["rho", "R"],
}


@dataclass
class RunConfig:
    subcommand: str
    values: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    @property
    def delta(self) -> float:
        if self.values.get("delta") is not None:
            return float(self.values["delta"])
        return 10.0 ** (float(self.values["delta_db"]) / 10.0)

    def resolved(self) -> dict:
        out = {"subcommand": self.subcommand}
        for k, v in self.values.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines; duplicate keys are an error."""
    raw: dict[str, str] = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}", f"expected key=value in {path}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in raw:
            raise ConfigError(k, f"duplicate key in {path}")
        raw[k] = v
    return raw


def build_config(subcommand: str, file_values: dict[str, str],
                 flag_values: dict[str, Any]) -> RunConfig:
    """Merge file and flag values (flags win), parse, and validate every key."""
    if subcommand not in SCHEMAS:
        raise ConfigError("subcommand", f"unknown subcommand {subcommand!r}")
    schema = SCHEMAS[subcommand]
    merged: dict[str, Any] = {k: v for k, v in file_values.items()}
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    for k in merged:
        if k not in schema:
            raise ConfigError(k, f"unknown key for {subcommand}")
    values: dict[str, Any] = {}
    for k, spec in schema.items():
        if k in merged:
            raw = merged[k]
            try:
                v = spec.parse(raw) if isinstance(raw, str) else raw
            except (TypeError, ValueError) as exc:
                raise ConfigError(k, f"cannot parse {raw!r}: {exc}", spec.precondition) from None
            if spec.check is not None and not spec.check(v):
                raise ConfigError(k, f"invalid value {raw!r}", spec.precondition)
            values[k] = v
        else:
            values[k] = spec.default
    for k in REQUIRED[subcommand]:
        if values.get(k) is None:
            raise ConfigError(k, "required", schema[k].precondition)
    if "delta" in schema:
        needs_delta = subcommand not in ("phase-diagram", "thresholds", "amp-sim")
        given = [k for k in ("delta", "delta_db") if values.get(k) is not None]
        if needs_delta and len(given) != 1:
            raise ConfigError("delta", "give exactly one of delta or delta_db",
                              "model.ProblemParams: delta > 0")
    if subcommand == "thresholds" and not values["R_lo"] < values["R_hi"]:
        raise ConfigError("R_lo", "must be below R_hi", "phase.threshold: 0 < R_lo < R_hi")
    for lo, hi in (("E_min", "E_max"),):
        if values.get(lo) is not None and values.get(hi) is not None and not values[lo] < values[hi]:
            raise ConfigError(lo, "must be below E_max", "replica.profile: 0 < E_min < E_max")
    if subcommand == "se" and values.get("E0") is not None and values["E0"] > values["rho"]:
        raise ConfigError("E0", "must not exceed rho", "se.se_fixed_point: 0 < E0 <= rho")
    return RunConfig(subcommand, values)
