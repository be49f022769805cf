"""Command-line front end: ``mmvlimits <subcommand> [--config FILE] [--key value ...]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure. Errors are
also printed to stderr as a one-line JSON record.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .amp import AmpConfig, amp_sweep
from .config import SCHEMAS, ConfigError, RunConfig, build_config, read_config_file
from .model import PriorParams, ProblemParams
from .output import sidecar_path, write_csv, write_sidecar
from .phase import KINDS, axis, classify, phase_diagram, threshold_curve, to_db
from .plots import emit_plot_script
from .quadrature import QuadratureError
from .replica import default_window, free_energy, profile
from .se import bp_predicted_mse, se_fixed_point
from .sim import Setting, empirical_v_covariance

log = logging.getLogger("mmvlimits")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _prior(cfg: RunConfig) -> PriorParams:
    return PriorParams(cfg["rho"], cfg["J"])


def _delta_db(delta: float) -> float:
    return float(to_db(delta))


def run_free_energy(cfg: RunConfig):
    prior = _prior(cfg)
    delta = cfg.delta
    rows = []
    for R in cfg["R"]:
        params = ProblemParams(prior, delta, R)
        lo, hi = default_window(params)
        E_min, E_max = cfg.get("E_min", lo), cfg.get("E_max", hi)
        for E in np.geomspace(E_min, E_max, cfg["n_points"]):
            rows.append((prior.rho, prior.J, _delta_db(delta), R, float(E), free_energy(params, float(E))))
    return "free-energy", rows, {}


def run_profile(cfg: RunConfig):
    prior = _prior(cfg)
    params = ProblemParams(prior, cfg.delta, cfg["R"])
    prof = profile(params, cfg.get("E_min"), cfg.get("E_max"), cfg["n_grid"])
    head = (prior.rho, prior.J, _delta_db(params.delta), params.R)
    rows = [head + (float(E), float(F), "grid") for E, F in zip(prof.E_grid, prof.F_values)]
    for k, (E, F) in enumerate(prof.local_maxima):
        rows.append(head + (E, F, "global" if k == prof.global_max_index else "max"))
    label = classify(prof)
    return "profile", rows, {"region": label.value, "degenerate": label.degenerate,
                             "anomalies": prof.anomalies}


def run_mmse(cfg: RunConfig):
    prior = _prior(cfg)
    params = ProblemParams(prior, cfg.delta, cfg["R"])
    prof = profile(params, n_grid=cfg["n_grid"])
    label = classify(prof)
    m = prof.global_max[0]
    row = (prior.rho, prior.J, _delta_db(params.delta), params.R, m, float(to_db(m)), math.log(m),
           label.value, label.degenerate, prof.n_maxima, bp_predicted_mse(params))
    return "mmse", [row], {"anomalies": prof.anomalies}


def run_complex_mmse(cfg: RunConfig):
    # both complex settings reduce to the J = 2 MMV free energy
    prior = PriorParams(cfg["rho"], 2)
    params = ProblemParams(prior, cfg.delta, cfg["R"])
    m = profile(params, n_grid=cfg["n_grid"]).global_max[0]
    row = (cfg["matrix"], prior.rho, _delta_db(params.delta), params.R, m, float(to_db(m)))
    return "complex-mmse", [row], {}


def run_phase_diagram(cfg: RunConfig):
    cells = phase_diagram(_prior(cfg), cfg["delta_db_range"], cfg["R_range"],
                          n_grid=cfg["n_grid"], jobs=cfg["jobs"])
    rows = [(c.delta_dB, c.R, c.mmse, c.mmse_dB if c.mmse == c.mmse else math.nan,
             c.ln_mmse if c.mmse == c.mmse else math.nan, c.region, c.bp_mse,
             c.degenerate, c.n_maxima, c.anomalies) for c in cells]
    n_bad = sum(1 for c in cells if c.anomalies)
    return "phase-diagram", rows, {"anomalous_cells": n_bad}


def run_thresholds(cfg: RunConfig):
    prior = _prior(cfg)
    d_db = axis(cfg["delta_db_range"])
    rows = []
    for kind in cfg["kinds"]:
        curve = threshold_curve(kind, prior, 10.0 ** (d_db / 10.0), cfg["R_lo"], cfg["R_hi"],
                                jobs=cfg["jobs"], tol=cfg["tol"], n_grid=cfg["n_grid"])
        rows.extend((float(d), kind, float(R)) for d, R in zip(d_db, curve.R_values))
    return "thresholds", rows, {"not_found": "R = nan where a boundary does not exist in [R_lo, R_hi]"}


def run_se(cfg: RunConfig):
    params = ProblemParams(_prior(cfg), cfg.delta, cfg["R"])
    tr = se_fixed_point(params, cfg.get("E0"), cfg["tol"], cfg["max_iter"])
    rows = [(t, float(E), float(to_db(E)), tr.converged) for t, E in enumerate(tr.E_sequence)]
    extra = {"fixed_point": tr.fixed_point, "converged": tr.converged}
    if tr.last_two is not None:
        extra["last_two"] = list(tr.last_two)
    return "se", rows, extra


def run_amp_sim(cfg: RunConfig):
    prior = _prior(cfg)
    config = AmpConfig(cfg["t_max"], cfg["epsilon"], cfg["damping"], cfg["init_variance"])
    cells = amp_sweep(prior, axis(cfg["delta_db_range"]), axis(cfg["R_range"]), cfg["N"],
                      cfg["n_trials"], config, Setting(cfg["setting"]), cfg["seed"],
                      jobs=cfg["jobs"], keep_traces=True)
    rows, traces = [], []
    for c in cells:
        for tr in c.trials:
            ratio = math.log(tr.mse / c.se_mse) if tr.mse > 0 else math.nan
            rows.append((c.delta_dB, c.R, c.setting, tr.trial, tr.iterations, tr.mse,
                         float(to_db(tr.mse)) if tr.mse > 0 else math.nan, c.se_mse, ratio,
                         tr.converged, tr.diverged))
            traces.append({"delta_dB": c.delta_dB, "R": c.R, "setting": c.setting, "trial": tr.trial,
                           "iterations": tr.iterations, "converged": tr.converged,
                           "diverged": tr.diverged, "mse_trace": tr.mse_trace})
    return "amp-sweep", rows, {"_traces": traces,
                               "diverged_trials": sum(1 for r in rows if r[-1])}


def run_lemma1(cfg: RunConfig):
    prior = _prior(cfg)
    rows = []
    for est in cfg["estimator"]:
        for setting in cfg["settings"]:
            cov = empirical_v_covariance(setting, prior, cfg.delta, cfg["R"], cfg["N"],
                                         est, cfg["n_mc"], cfg["seed"])
            for k, role in enumerate(("w1", "w2", "w3", "w4")):
                rows.append((setting, est, role, float(cov.w[k]), float(cov.se[k]), cov.n_mc))
    return "lemma1", rows, {"shared_streams": "signal, estimates and noise are shared across settings"}


RUNNERS = {
    "free-energy": run_free_energy,
    "mmse": run_mmse,
    "profile": run_profile,
    "phase-diagram": run_phase_diagram,
    "thresholds": run_thresholds,
    "se": run_se,
    "amp-sim": run_amp_sim,
    "lemma1-check": run_lemma1,
    "complex-mmse": run_complex_mmse,
}


def run(cfg: RunConfig) -> Path:
    """Execute a validated config; returns the CSV path."""
    out = Path(cfg.get("out") or f"{cfg.subcommand}.csv")
    t0 = time.perf_counter()
    schema, rows, extra = RUNNERS[cfg.subcommand](cfg)
    write_csv(out, schema, rows)
    traces = extra.pop("_traces", None)
    if traces is not None:
        trace_path = out.with_name(out.stem + ".traces.jsonl")
        with open(trace_path, "w") as fh:
            for rec in traces:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        extra["traces"] = trace_path.name
    write_sidecar(out, cfg.resolved(), schema, time.perf_counter() - t0, extra)
    return out


class _Parser(argparse.ArgumentParser):
    """Treats values such as ``-35,-20,4`` as arguments, not option names."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = re.compile(r"^-\d[\d.eE+\-,]*$|^-\.\d[\d.eE+\-,]*$")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmvlimits", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mmvlimits {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value file; flags override it")
        for key, spec in schema.items():
            p.add_argument(f"--{key}", dest=key, default=None, help=spec.help or None)
    p = sub.add_parser("plot-script", help="write a matplotlib script for a CSV")
    p.add_argument("csv")
    p.add_argument("--kind", default=None)
    p.add_argument("--script", default=None)
    return parser


def _fail(code: int, record: dict) -> int:
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.subcommand == "plot-script":
        try:
            path = emit_plot_script(args.csv, args.kind, args.script)
        except (OSError, ValueError) as exc:
            return _fail(EXIT_CONFIG, {"error": "config", "key": "csv", "message": str(exc)})
        print(path)
        return EXIT_OK
    flags = {k: v for k, v in vars(args).items()
             if k in SCHEMAS[args.subcommand] and v is not None}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.subcommand, file_values, flags)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc.record())
    except OSError as exc:
        return _fail(EXIT_CONFIG, {"error": "config", "key": "config", "message": str(exc)})
    try:
        out = run(cfg)
    except (ArithmeticError, QuadratureError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERIC, {"error": "numerical", "subcommand": cfg.subcommand,
                                    "message": str(exc)})
    except ValueError as exc:
        return _fail(EXIT_CONFIG, {"error": "config", "key": "value", "message": str(exc)})
    print(out)
    print(sidecar_path(out))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
