"""State evolution for AMP on jointly sparse MMV problems.

The per-iteration MSE prediction follows E <- mmse_scalar((E + delta) / R).
Its fixed points are exactly the stationary points of the replica free
energy, and iterating from the uninformative start E0 = rho lands on the
largest stable one, which is the MSE that AMP is expected to reach.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ProblemParams, mmse_scalar

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


@dataclass
class SeTrace:
    E_sequence: np.ndarray
    converged: bool
    fixed_point: float
    last_two: tuple[float, float] | None = field(default=None)

    @property
    def iterations(self) -> int:
        return len(self.E_sequence) - 1


def se_step(params: ProblemParams, E: float) -> float:
    return mmse_scalar(params.prior, params.effective_noise(E))


def se_fixed_point(
    params: ProblemParams,
    E0: float | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SeTrace:
    """Iterate state evolution from ``E0`` (default rho) until |dE| < tol * E."""
    rho = params.rho
    if E0 is None:
        E0 = rho
    if not (0.0 < E0 <= rho):
        raise ValueError(f"E0 must lie in (0, rho]={rho}, got {E0}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    seq = [float(E0)]
    E = float(E0)
    for _ in range(max_iter):
        E_new = se_step(params, E)
        seq.append(E_new)
        if abs(E_new - E) < tol * E_new:
            return SeTrace(np.array(seq), True, E_new)
        E = E_new
    return SeTrace(np.array(seq), False, seq[-1], last_two=(seq[-2], seq[-1]))


def se_sequence(params: ProblemParams, n_iter: int, E0: float | None = None) -> np.ndarray:
    """First ``n_iter`` SE predictions E_1..E_n (no early stopping)."""
    E = params.rho if E0 is None else float(E0)
    out = np.empty(n_iter)
    for t in range(n_iter):
        E = se_step(params, E)
        out[t] = E
    return out


def bp_predicted_mse(params: ProblemParams, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> float:
    """MSE predicted for BP/AMP: the SE fixed point reached from E0 = rho."""
    return se_fixed_point(params, None, tol, max_iter).fixed_point
