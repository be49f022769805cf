"""Approximate message passing for jointly sparse MMV recovery.

Each signal vector j keeps its own residual, Onsager-corrected estimate of
the measurement-domain mean ``w^j``, and scalar variance ``theta_j``; the J
pseudodata entries of a super symbol are then denoised jointly, so they share
the support posterior.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import PriorParams, ProblemParams, denoise
from .se import bp_predicted_mse
from .sim import Setting, generate


class AmpDivergence(ArithmeticError):
    pass


@dataclass(frozen=True)
class AmpConfig:
    t_max: int = 200
    epsilon: float = 1e-8
    damping: float = 0.0
    # "noise": v = rho * delta, the standard start;
    # "prior": v = rho, which makes iteration 1 match SE started at E0 = rho
    init_variance: str = "noise"

    def __post_init__(self):
        if int(self.t_max) != self.t_max or self.t_max < 1:
            raise ValueError(f"t_max must be a positive integer, got {self.t_max}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (0.0 <= self.damping < 1.0):
            raise ValueError(f"damping must lie in [0, 1), got {self.damping}")
        if self.init_variance not in ("noise", "prior"):
            raise ValueError(f"init_variance must be 'noise' or 'prior', got {self.init_variance!r}")


@dataclass
class AmpResult:
    estimates: np.ndarray
    mse_trace: np.ndarray
    delta_trace: np.ndarray
    theta_trace: np.ndarray  # (iterations, J)
    iterations: int
    converged: bool
    diverged: bool = False

    @property
    def final_mse(self) -> float:
        return float(self.mse_trace[-1]) if len(self.mse_trace) else math.nan


def amp_run(ensemble, prior: PriorParams, config: AmpConfig = AmpConfig()) -> AmpResult:
    """Run AMP on one ensemble and trace the MSE against the true signal."""
    if ensemble.setting is Setting.ComplexComplex:
        raise ValueError("AMP is not provided for the ComplexComplex setting")
    if prior.J != ensemble.J:
        raise ValueError(f"prior has J={prior.J} but ensemble has J={ensemble.J}")
    y = ensemble.measurements
    s = ensemble.signal
    mats = ensemble.matrices
    shared = all(F is mats[0] for F in mats)
    N, M, J = ensemble.N, ensemble.M, ensemble.J
    dlt = ensemble.params.delta
    rho = prior.rho

    def forward(a):
        if shared:
            return mats[0] @ a
        return np.column_stack([F @ a[:, j] for j, F in enumerate(mats)])

    def adjoint(r):
        if shared:
            return mats[0].T @ r
        return np.column_stack([F.T @ r[:, j] for j, F in enumerate(mats)])

    w = y.copy()
    theta = np.zeros(J)
    v = np.full((N, J), rho * dlt if config.init_variance == "noise" else rho)
    a = np.zeros((N, J))
    mse, deltas, thetas = [], [], []
    t, change = 1, math.inf
    diverged = False
    while t < config.t_max and change > config.epsilon:
        q = (y - w) / (dlt + theta)
        theta = v.mean(axis=0)
        w = forward(a) - theta * q
        sigma = N * (dlt + theta) / M
        pseudo = a + sigma * adjoint((y - w) / (dlt + theta))
        a_prev = a
        post = denoise(prior, sigma, pseudo)
        if config.damping:
            a = (1.0 - config.damping) * post.mean + config.damping * a_prev
            v = (1.0 - config.damping) * post.variance + config.damping * v
        else:
            a, v = post.mean, post.variance
        t += 1
        change = float(np.mean((a_prev - a) ** 2))
        thetas.append(theta)
        deltas.append(change)
        mse.append(float(np.mean((a - s) ** 2)))
        if not (np.isfinite(change) and np.all(np.isfinite(theta))):
            diverged = True
            break
    return AmpResult(
        estimates=a,
        mse_trace=np.array(mse),
        delta_trace=np.array(deltas),
        theta_trace=np.array(thetas).reshape(-1, J),
        iterations=len(mse),
        converged=(not diverged) and change <= config.epsilon,
        diverged=diverged,
    )


# --- sweeps ----------------------------------------------------------------

@dataclass
class TrialRecord:
    delta_dB: float
    R: float
    setting: str
    trial: int
    iterations: int
    mse: float
    converged: bool
    diverged: bool
    mse_trace: list[float] = field(default_factory=list)


@dataclass
class SweepCell:
    delta_dB: float
    R: float
    setting: str
    se_mse: float
    trials: list[TrialRecord]

    @property
    def mses(self) -> np.ndarray:
        return np.array([tr.mse for tr in self.trials if not tr.diverged])

    @property
    def median_mse(self) -> float:
        m = self.mses
        return float(np.median(m)) if len(m) else math.nan

    @property
    def iqr(self) -> float:
        m = self.mses
        if not len(m):
            return math.nan
        q1, q3 = np.percentile(m, [25, 75])
        return float(q3 - q1)

    @property
    def ratio_ln(self) -> float:
        return math.log(self.median_mse / self.se_mse)


def trial_seed(root_seed: int, cell_index: int, trial: int) -> np.random.SeedSequence:
    """Per-trial seed; independent of the setting so settings share signal and noise."""
    return np.random.SeedSequence([root_seed, cell_index, trial])


def run_trial(setting, prior: PriorParams, delta_dB: float, R: float, N: int,
              seed, config: AmpConfig, trial: int = 0, keep_trace: bool = False) -> TrialRecord:
    delta = 10.0 ** (delta_dB / 10.0)
    ens = generate(setting, prior, delta, R, N, seed)
    res = amp_run(ens, prior, config)
    return TrialRecord(delta_dB, R, Setting(setting).value, trial, res.iterations,
                       res.final_mse, res.converged, res.diverged,
                       res.mse_trace.tolist() if keep_trace else [])


def _trial_task(args):
    return run_trial(*args)


def amp_sweep(prior: PriorParams, delta_grid_dB, R_grid, N: int, n_trials: int,
              config: AmpConfig = AmpConfig(), setting=Setting.MMV1, root_seed: int = 0,
              jobs: int = 1, keep_traces: bool = False) -> list[SweepCell]:
    """Median AMP MSE per (delta_dB, R) cell next to the SE-predicted MSE."""
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    cells = [(float(d), float(R)) for d in delta_grid_dB for R in R_grid]
    tasks = [(setting, prior, d, R, N, trial_seed(root_seed, ci, k), config, k, keep_traces)
             for ci, (d, R) in enumerate(cells) for k in range(n_trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_trial_task, tasks))
    else:
        records = [_trial_task(t) for t in tasks]
    out = []
    for ci, (d, R) in enumerate(cells):
        se_mse = bp_predicted_mse(ProblemParams(prior, 10.0 ** (d / 10.0), R))
        out.append(SweepCell(d, R, Setting(setting).value, se_mse,
                             records[ci * n_trials:(ci + 1) * n_trials]))
    return out
