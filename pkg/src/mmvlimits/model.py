"""Jointly sparse Bernoulli-Gaussian prior and its scalar-channel posterior.

A super symbol is a length-J vector that is all-zero with probability 1 - rho
and standard Gaussian otherwise. Observing it through independent Gaussian
channels ``r_j = s_j + sqrt(sigma_j) z_j`` gives the posterior used both as the
AMP denoiser and, averaged over the channel, as the state-evolution MMSE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .quadrature import radial_expectation_r, transition_breakpoints


@dataclass(frozen=True)
class PriorParams:
    rho: float
    J: int

    def __post_init__(self):
        if not (0.0 < self.rho <= 1.0):
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be a positive integer, got {self.J}")
        object.__setattr__(self, "J", int(self.J))


@dataclass(frozen=True)
class ProblemParams:
    """A point (rho, J, delta, R) of the phase plane."""

    prior: PriorParams
    delta: float
    R: float

    def __post_init__(self):
        if not (self.delta > 0 and np.isfinite(self.delta)):
            raise ValueError(f"noise variance delta must be positive, got {self.delta}")
        if not (self.R > 0 and np.isfinite(self.R)):
            raise ValueError(f"measurement rate R must be positive, got {self.R}")

    @property
    def rho(self) -> float:
        return self.prior.rho

    @property
    def J(self) -> int:
        return self.prior.J

    def effective_noise(self, E: float) -> float:
        """Scalar-channel noise variance (E + delta) / R seen at trial MSE E."""
        return (E + self.delta) / self.R


@dataclass(frozen=True)
class DenoiserOutput:
    mean: np.ndarray
    second_moment: np.ndarray
    support_prob: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return self.second_moment - self.mean**2


def sample_signal(prior: PriorParams, N: int, seed) -> np.ndarray:
    """Draw N super symbols as an (N, J) array; rows are zero w.p. 1 - rho."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    rng = np.random.default_rng(seed)
    support = rng.random(N) < prior.rho
    return support[:, None] * rng.standard_normal((N, prior.J))


def support_log_odds(prior: PriorParams, sigma: np.ndarray, pseudodata: np.ndarray) -> np.ndarray:
    """log P(support | r) - log P(no support | r), per row of ``pseudodata``."""
    sigma = np.asarray(sigma, dtype=float)
    r = np.asarray(pseudodata, dtype=float)
    per_j = 0.5 * np.log1p(1.0 / sigma) - r * r / (2.0 * sigma * (sigma + 1.0))
    if prior.rho == 1.0:
        return np.full(r.shape[:-1], np.inf)
    return np.log(prior.rho) - np.log1p(-prior.rho) - per_j.sum(axis=-1)


def denoise(prior: PriorParams, sigma, pseudodata) -> DenoiserOutput:
    """Posterior moments of a super symbol given per-component pseudodata.

    ``pseudodata`` may be a single J-vector or an (N, J) batch; ``sigma`` is a
    J-vector of channel noise variances shared by every row. The support
    probability is evaluated as a logistic of the log-odds so that pseudodata
    far in the tail does not overflow.
    """
    sigma = np.asarray(sigma, dtype=float)
    r = np.asarray(pseudodata, dtype=float)
    if sigma.shape[-1:] != (prior.J,) or r.shape[-1] != prior.J:
        raise ValueError(f"sigma and pseudodata must have trailing dimension J={prior.J}")
    if np.any(~(sigma > 0)):
        raise ValueError("every channel noise variance sigma_j must be positive")
    pi = expit(support_log_odds(prior, sigma, r))
    shrink = 1.0 / (sigma + 1.0)
    mean = pi[..., None] * r * shrink
    second = pi[..., None] * ((r * shrink) ** 2 + sigma * shrink)
    return DenoiserOutput(mean=mean, second_moment=second, support_prob=pi)


def mmse_scalar(prior: PriorParams, sigma: float) -> float:
    """Per-entry MMSE of the prior through a Gaussian channel of variance ``sigma``.

    The expectation of the posterior variance is split by the support
    indicator; in each branch the pseudodata is an isotropic Gaussian, so the
    integrand depends only on its norm and is integrated against chi(J).
    The posterior-variance form is used instead of ``rho - E|mean|^2 / J``
    because the latter cancels catastrophically when the MMSE is far below rho.
    """
    if not (sigma > 0):
        raise ValueError(f"sigma must be positive, got {sigma}")
    J, rho = prior.J, prior.rho
    with np.errstate(divide="ignore"):
        c0 = np.log(rho) - np.log1p(-rho) + 0.5 * J * (np.log(sigma) - np.log1p(sigma))
    base = J * sigma / (1.0 + sigma)

    def branch(scale2: float, slope: float) -> float:
        # pseudodata norm^2 = scale2 * t^2; log-odds = c0 + slope * t^2
        def h(t):
            L = c0 + slope * t * t
            pi = expit(L)
            return pi * base + pi * expit(-L) * scale2 * t * t / (1.0 + sigma) ** 2

        bps = []
        if np.isfinite(c0) and c0 < 0:
            t_star = np.sqrt(-c0 / slope)
            bps = transition_breakpoints(t_star, 1.0 / (2.0 * slope * t_star))
        return radial_expectation_r(h, J, bps)

    on = branch(1.0 + sigma, 1.0 / (2.0 * sigma))
    off = branch(sigma, 1.0 / (2.0 * (1.0 + sigma)))
    return (rho * on + (1.0 - rho) * off) / J
