"""Performance regions, threshold curves, and phase-diagram sweeps.

Regions by free-energy shape:
  1  one maximum on the low-MSE branch
  2  two maxima, the low-MSE one global
  3  two maxima, the high-MSE one global
  4  one maximum on the high-MSE branch
Moving up in R at fixed noise walks 4 -> 3 -> 2 -> 1; the three boundaries
are the critical, low-noise and BP thresholds.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import PriorParams, ProblemParams
from .replica import DEFAULT_N_GRID, FreeEnergyProfile, profile
from .se import bp_predicted_mse

log = logging.getLogger(__name__)

KINDS = ("critical", "low_noise", "BP")
# ordinal increases with R: region 4 -> 0, ..., region 1 -> 3
_ORDINAL = {4: 0, 3: 1, 2: 2, 1: 3}
_KIND_LEVEL = {"critical": 1, "low_noise": 2, "BP": 3}
THRESHOLD_TOL = 1e-4
N_PRESCAN = 16


def to_db(x):
    return 10.0 * np.log10(x)


def from_db(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class RegionLabel:
    value: int
    degenerate: bool = False
    anomalous: bool = False
    E_star: float = math.nan


@dataclass
class ThresholdCurve:
    kind: str
    delta_grid: np.ndarray
    R_values: np.ndarray  # nan where the threshold was not found


def classify(prof: FreeEnergyProfile) -> RegionLabel:
    """Region label of a profile.

    With a single maximum, E* below sqrt(delta * rho) is read as the low-MSE
    branch (Region 1), otherwise the high-MSE branch (Region 4).
    """
    if prof.n_maxima < 1:
        raise ValueError("profile has no local maximum")
    E_star = prof.global_max[0]
    anomalous = prof.n_maxima > 2 or bool(prof.anomalies)
    if prof.n_maxima >= 2:
        value = 2 if prof.global_max_index == 0 else 3
    else:
        p = prof.params
        value = 1 if E_star < math.sqrt(p.delta * p.rho) else 4
    return RegionLabel(value, prof.degenerate, anomalous, E_star)


def region_at(prior: PriorParams, delta: float, R: float, n_grid: int = DEFAULT_N_GRID) -> RegionLabel:
    return classify(profile(ProblemParams(prior, delta, R), n_grid=n_grid))


def bisect_predicate(pred: Callable[[float], bool], lo: float, hi: float,
                     tol: float = THRESHOLD_TOL) -> tuple[float, float]:
    """Shrink [lo, hi] with pred(lo) False, pred(hi) True until hi - lo < tol."""
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


def threshold(
    kind: str,
    prior: PriorParams,
    delta: float,
    R_lo: float,
    R_hi: float,
    tol: float = THRESHOLD_TOL,
    n_prescan: int = N_PRESCAN,
    n_grid: int = DEFAULT_N_GRID,
) -> float:
    """Locate a region boundary in R at fixed noise by bisection.

    BP separates Regions 1/2, low_noise 2/3, critical 3/4. A pre-scan over
    ``n_prescan`` rates checks that region labels are monotone in R and finds
    the bracketing pair. Returns nan when the boundary does not exist inside
    [R_lo, R_hi] (no bracket, or the adjacent region is absent there).
    """
    if kind not in _KIND_LEVEL:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    if not (0 < R_lo < R_hi):
        raise ValueError(f"need 0 < R_lo < R_hi, got {R_lo}, {R_hi}")
    level = _KIND_LEVEL[kind]
    cache: dict[float, int] = {}

    def ordinal(R: float) -> int:
        if R not in cache:
            cache[R] = _ORDINAL[region_at(prior, delta, R, n_grid).value]
        return cache[R]

    scan = np.linspace(R_lo, R_hi, n_prescan)
    ords = [ordinal(float(R)) for R in scan]
    if any(b < a for a, b in zip(ords, ords[1:])):
        log.warning("non-monotone region labels along R at delta=%g: %s", delta, ords)
    above = [o >= level for o in ords]
    if all(above) or not any(above):
        return math.nan
    i = max(k for k, ok in enumerate(above) if not ok)
    if i + 1 >= len(scan) or not above[i + 1]:
        return math.nan
    lo, hi = bisect_predicate(lambda R: ordinal(R) >= level, float(scan[i]), float(scan[i + 1]), tol)
    if ordinal(lo) != level - 1 or ordinal(hi) != level:
        return math.nan
    return 0.5 * (lo + hi)


def _threshold_task(args):
    return threshold(*args)


def threshold_curve(kind: str, prior: PriorParams, delta_grid: Sequence[float],
                    R_lo: float, R_hi: float, jobs: int = 1, **kw) -> ThresholdCurve:
    deltas = np.asarray(delta_grid, dtype=float)
    tasks = [(kind, prior, float(d), R_lo, R_hi, kw.get("tol", THRESHOLD_TOL),
              kw.get("n_prescan", N_PRESCAN), kw.get("n_grid", DEFAULT_N_GRID)) for d in deltas]
    values = _map(_threshold_task, tasks, jobs)
    return ThresholdCurve(kind, deltas, np.array(values, dtype=float))


@dataclass
class PhaseCell:
    delta_dB: float
    R: float
    mmse: float
    region: int
    degenerate: bool
    bp_mse: float
    n_maxima: int
    anomalies: list[str] = field(default_factory=list)

    @property
    def mmse_dB(self) -> float:
        return float(to_db(self.mmse))

    @property
    def ln_mmse(self) -> float:
        return math.log(self.mmse)


def evaluate_cell(prior: PriorParams, delta_dB: float, R: float,
                  n_grid: int = DEFAULT_N_GRID) -> PhaseCell:
    """MMSE, region and BP-predicted MSE at one grid point; never raises."""
    delta = float(from_db(delta_dB))
    try:
        params = ProblemParams(prior, delta, R)
        prof = profile(params, n_grid=n_grid)
        label = classify(prof)
        bp = bp_predicted_mse(params)
        return PhaseCell(delta_dB, R, prof.global_max[0], label.value, label.degenerate,
                         bp, prof.n_maxima, list(prof.anomalies))
    except (ArithmeticError, ValueError) as exc:
        return PhaseCell(delta_dB, R, math.nan, 0, False, math.nan, 0, [f"error: {exc}"])


def _cell_task(args):
    return evaluate_cell(*args)


def axis(spec: tuple[float, float, int]) -> np.ndarray:
    lo, hi, steps = spec
    steps = int(steps)
    if steps < 1:
        raise ValueError(f"axis needs at least one step, got {steps}")
    if steps == 1:
        return np.array([float(lo)])
    return np.linspace(lo, hi, steps)


def phase_diagram(prior: PriorParams, delta_range_dB: tuple[float, float, int],
                  R_range: tuple[float, float, int], n_grid: int = DEFAULT_N_GRID,
                  jobs: int = 1) -> list[PhaseCell]:
    """Evaluate every (delta_dB, R) cell; order is delta-major, then R."""
    tasks = [(prior, float(d), float(R), n_grid)
             for d in axis(delta_range_dB) for R in axis(R_range)]
    return _map(_cell_task, tasks, jobs)


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))
