"""Replica free energy F(E) of the MMV problem, its local maxima, and the MMSE.

F depends on the trial MSE E only through the effective noise E + delta. Its
maxima over E are the stable state-evolution fixed points; the global maximum
gives the MMSE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import ProblemParams
from .quadrature import radial_gaussian_expectation, transition_breakpoints
from .se import se_fixed_point, se_step

log = logging.getLogger(__name__)

TIE_TOL = 1e-10
GOLDEN_RTOL = 1e-6
DEFAULT_N_GRID = 256
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class FreeEnergyProfile:
    params: ProblemParams
    E_grid: np.ndarray
    F_values: np.ndarray
    local_maxima: list[tuple[float, float]]
    global_max_index: int
    degenerate: bool = False
    anomalies: list[str] = field(default_factory=list)

    @property
    def n_maxima(self) -> int:
        return len(self.local_maxima)

    @property
    def global_max(self) -> tuple[float, float]:
        return self.local_maxima[self.global_max_index]


def _log_mixture_expectation(lw1: float, lw0: float, rate: float, J: int) -> float:
    """E[log(exp(lw1) + exp(lw0 - rate * |g|^2))] over g ~ N(0, I_J)."""
    if not np.isfinite(lw0):
        return lw1
    bps = []
    if lw0 > lw1:
        t_star = math.sqrt((lw0 - lw1) / rate)
        bps = transition_breakpoints(t_star, 1.0 / (2.0 * rate * t_star))
    return radial_gaussian_expectation(lambda u: np.logaddexp(lw1, lw0 - rate * u), J, bps)


def free_energy(params: ProblemParams, E: float) -> float:
    """Replica-symmetric free energy at trial MSE ``E`` (natural logarithms)."""
    if not E > 0:
        raise ValueError(f"E must be positive, got {E}")
    rho, J, delta, R = params.rho, params.J, params.delta, params.R
    D = E + delta
    if not (D > 0 and np.isfinite(D)) or D < 1e-300:
        raise ArithmeticError(f"delta + E = {D} underflows")
    log_a = math.log(D) - math.log(R + D)
    energy = -0.5 * J * R * (math.log(2.0 * math.pi * D) + delta / D)
    energy += J * R * (1.0 - rho) / (2.0 * (R + D))
    lw1 = math.log(rho) + 0.5 * J * log_a
    lw0 = math.log1p(-rho) if rho < 1.0 else -math.inf
    energy += rho * _log_mixture_expectation(lw1, lw0, R / (2.0 * D), J)
    if rho < 1.0:
        energy += (1.0 - rho) * _log_mixture_expectation(lw1, lw0, R / (2.0 * (R + D)), J)
    return energy


def _golden_max(f, lo: float, hi: float, rtol: float = GOLDEN_RTOL) -> tuple[float, float]:
    """Maximise ``f`` on [lo, hi] by golden-section search in log E."""
    a, b = math.log(lo), math.log(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    while b - a > rtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(math.exp(d))
    x = math.exp(0.5 * (a + b))
    return x, f(x)


def _polish(params: ProblemParams, E: float, rel: float = 4 * GOLDEN_RTOL) -> float:
    """Sharpen a refined maximum to the nearby root of E - se_step(E).

    Stationary points of F coincide with state-evolution fixed points, so a
    bracketed root solve pins the location far below the golden-section
    tolerance. Keeps ``E`` when no sign change is found in the bracket.
    """
    def g(x):
        return x - se_step(params, x)

    lo, hi = E * (1.0 - rel), E * (1.0 + rel)
    try:
        g_lo, g_hi = g(lo), g(hi)
    except ArithmeticError:
        return E
    if not (g_lo < 0.0 < g_hi):
        return E
    return brentq(g, lo, hi, xtol=1e-15 * E, rtol=4 * np.finfo(float).eps)


def pick_global(F_values: list[float], tie_tol: float = TIE_TOL) -> tuple[int, bool]:
    """Index of the global maximum among maxima sorted by E, and a tie flag.

    Maxima within ``tie_tol`` of the best count as tied; the smallest E wins.
    """
    best = int(np.argmax(F_values))
    tied = [k for k, F in enumerate(F_values) if abs(F - F_values[best]) < tie_tol]
    return tied[0], len(tied) > 1


def default_window(params: ProblemParams) -> tuple[float, float]:
    return params.delta * 1e-3, 1.05 * params.rho


def profile(
    params: ProblemParams,
    E_min: float | None = None,
    E_max: float | None = None,
    n_grid: int = DEFAULT_N_GRID,
    se_seed: bool = True,
) -> FreeEnergyProfile:
    """Sample F on a log grid, refine its local maxima, and mark the global one.

    Interior maxima are found by 3-point comparison on the grid, refined by
    golden-section search, then polished as state-evolution fixed points.
    With ``se_seed`` the state-evolution fixed points reached from both ends
    of the window are merged in, which catches shallow maxima narrower than
    the grid spacing (right next to a threshold).
    """
    lo_def, hi_def = default_window(params)
    E_min = lo_def if E_min is None else E_min
    E_max = hi_def if E_max is None else E_max
    if not (0 < E_min < E_max):
        raise ValueError(f"need 0 < E_min < E_max, got {E_min}, {E_max}")
    if n_grid < 64:
        raise ValueError(f"n_grid must be >= 64, got {n_grid}")

    def F(E):
        return free_energy(params, E)

    grid = np.geomspace(E_min, E_max, n_grid)
    values = np.array([F(E) for E in grid])
    anomalies: list[str] = []
    maxima: list[tuple[float, float]] = []
    for i in range(1, n_grid - 1):
        if values[i] > values[i - 1] and values[i] >= values[i + 1]:
            E_ref, _ = _golden_max(F, grid[i - 1], grid[i + 1])
            E_ref = _polish(params, E_ref)
            maxima.append((E_ref, F(E_ref)))
    if values[0] > values[1]:
        anomalies.append("maximum at lower edge of E window")
        maxima.append((float(grid[0]), float(values[0])))
    if values[-1] > values[-2]:
        anomalies.append("maximum at upper edge of E window")
        maxima.append((float(grid[-1]), float(values[-1])))

    if se_seed:
        starts = [min(E_max, params.rho), max(E_min, 1e-300)]
        for E0 in starts:
            tr = se_fixed_point(params, E0)
            Ef = tr.fixed_point
            if not tr.converged or not (E_min < Ef < E_max):
                continue
            if all(abs(Ef - Em) > 1e-3 * Em for Em, _ in maxima):
                maxima.append((Ef, F(Ef)))

    maxima.sort()
    if not maxima:
        raise ArithmeticError("free energy profile has no maximum in the E window")
    if len(maxima) > 2:
        anomalies.append(f"{len(maxima)} local maxima")
        log.warning("profile at %s has %d local maxima", params, len(maxima))
    best, degenerate = pick_global([Fm for _, Fm in maxima])
    return FreeEnergyProfile(params, grid, values, maxima, best, degenerate, anomalies)


def mmse(params: ProblemParams, n_grid: int = DEFAULT_N_GRID) -> float:
    """MMSE: location of the global free-energy maximum over [delta/1000, 1.05 rho]."""
    return profile(params, n_grid=n_grid).global_max[0]
