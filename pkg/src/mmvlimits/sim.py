"""Synthetic MMV and complex-CS measurement ensembles.

Four channel settings share one code path:

* ``MMV1``: J independent Gaussian matrices, entries N(0, 1/N).
* ``MMV2``: one Gaussian matrix reused for all J signal vectors.
* ``ComplexReal``: complex signal, real matrix; identical to MMV2 with J = 2.
* ``ComplexComplex``: complex signal and matrix; real and imaginary matrix
  parts have entries N(0, 1/(2N)). Complex signals are stored as (N, 2) arrays
  of (real, imag) pairs, i.e. interleaved super symbols.

Random streams for signal, matrices and noise are spawned separately from the
seed, so two settings generated with the same seed share signal and noise.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import PriorParams, ProblemParams, sample_signal


class Setting(str, enum.Enum):
    MMV1 = "MMV1"
    MMV2 = "MMV2"
    ComplexReal = "ComplexReal"
    ComplexComplex = "ComplexComplex"


COMPLEX_SETTINGS = (Setting.ComplexReal, Setting.ComplexComplex)
# rotation relating the two row blocks of the stacked complex matrix
T = np.array([[0.0, 1.0], [-1.0, 0.0]])


def n_measurements(R: float, N: int) -> int:
    return max(1, int(np.floor(R * N + 0.5)))


def _streams(seed):
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawn() advances the child counter of the original
        ss = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        ss = np.random.SeedSequence(seed)
    sig, mat, noise = ss.spawn(3)
    return sig, np.random.default_rng(mat), np.random.default_rng(noise)


@dataclass
class MeasurementEnsemble:
    setting: Setting
    signal: np.ndarray        # (N, J)
    matrices: tuple           # J arrays (M, N); (F_real, F_imag) for ComplexComplex
    noise: np.ndarray         # (M, J)
    measurements: np.ndarray  # (M, J)
    params: ProblemParams
    N: int
    M: int
    seed: int | None = None

    @property
    def J(self) -> int:
        return self.signal.shape[1]

    def stacked_matrix(self) -> np.ndarray:
        """(2M, 2N) real matrix acting on interleaved (real, imag) pairs."""
        if self.setting is not Setting.ComplexComplex:
            raise ValueError("stacked_matrix is defined for ComplexComplex only")
        FR, FI = self.matrices
        top = np.stack([FR, -FI], axis=2).reshape(self.M, 2 * self.N)
        bottom = np.stack([FI, FR], axis=2).reshape(self.M, 2 * self.N)
        return np.vstack([top, bottom])


def _measure(setting: Setting, matrices, signal, noise) -> np.ndarray:
    if setting is Setting.ComplexComplex:
        M = noise.shape[0]
        FR, FI = matrices
        F = np.vstack([np.stack([FR, -FI], axis=2).reshape(M, -1),
                       np.stack([FI, FR], axis=2).reshape(M, -1)])
        y = F @ signal.ravel() + np.concatenate([noise[:, 0], noise[:, 1]])
        return np.column_stack([y[:M], y[M:]])
    if matrices[0] is matrices[-1] and all(F is matrices[0] for F in matrices):
        return matrices[0] @ signal + noise
    return np.column_stack([F @ signal[:, j] for j, F in enumerate(matrices)]) + noise


def generate(setting, prior: PriorParams, delta: float, R: float, N: int, seed) -> MeasurementEnsemble:
    """Draw one measurement ensemble for ``setting``; deterministic in ``seed``."""
    setting = Setting(setting)
    if N < 10:
        raise ValueError(f"N must be >= 10, got {N}")
    if setting in COMPLEX_SETTINGS and prior.J != 2:
        raise ValueError(f"{setting.value} requires J = 2, got J = {prior.J}")
    params = ProblemParams(prior, delta, R)
    M = n_measurements(R, N)
    J = prior.J
    sig_seed, mat_rng, noise_rng = _streams(seed)
    signal = sample_signal(prior, N, sig_seed)
    if setting is Setting.MMV1:
        matrices = tuple(mat_rng.standard_normal((M, N)) / np.sqrt(N) for _ in range(J))
    elif setting is Setting.ComplexComplex:
        scale = 1.0 / np.sqrt(2.0 * N)
        matrices = (mat_rng.standard_normal((M, N)) * scale, mat_rng.standard_normal((M, N)) * scale)
    else:
        F = mat_rng.standard_normal((M, N)) / np.sqrt(N)
        matrices = (F,) * J
    noise = noise_rng.standard_normal((M, J)) * np.sqrt(delta)
    y = _measure(setting, matrices, signal, noise)
    return MeasurementEnsemble(setting, signal, matrices, noise, y, params, N, M,
                               seed if isinstance(seed, (int, np.integer)) else None)


# --- binary archive -------------------------------------------------------
# little-endian: magic "MMVE", u32 version, u32 setting code, u64 N, M, J,
# u32 matrix count, i64 seed (-1 if none), f64 rho, delta, R; then float64
# row-major signal (N, J), each matrix (M, N), noise (M, J), measurements (M, J).
_MAGIC = b"MMVE"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQQQIqddd")
_CODES = {s: i for i, s in enumerate(Setting)}


def save_ensemble(ens: MeasurementEnsemble, path) -> None:
    seed = -1 if ens.seed is None else int(ens.seed)
    header = _HEADER.pack(_MAGIC, _VERSION, _CODES[ens.setting], ens.N, ens.M, ens.J,
                          len(ens.matrices), seed, ens.params.rho, ens.params.delta, ens.params.R)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (ens.signal, *ens.matrices, ens.noise, ens.measurements):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_ensemble(path) -> MeasurementEnsemble:
    raw = Path(path).read_bytes()
    magic, version, code, N, M, J, n_mat, seed, rho, delta, R = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError(f"{path}: not an ensemble archive (version {_VERSION})")
    setting = list(Setting)[code]
    off = _HEADER.size

    def take(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape).astype(float)
        off += 8 * n
        return arr

    signal = take((N, J))
    mats = [take((M, N)) for _ in range(n_mat)]
    if setting in (Setting.MMV2, Setting.ComplexReal):
        mats = [mats[0]] * n_mat
    noise = take((M, J))
    y = take((M, J))
    params = ProblemParams(PriorParams(rho, J), delta, R)
    return MeasurementEnsemble(setting, signal, tuple(mats), noise, y, params, N, M,
                               None if seed < 0 else seed)


# --- covariance of the replica residuals ----------------------------------

ESTIMATOR_SPECS = ("exact", "null", "independent")


@dataclass(frozen=True)
class CovarianceEstimate:
    w: np.ndarray   # (w1, w2, w3, w4)
    se: np.ndarray  # Monte Carlo standard errors
    n_mc: int

    @property
    def w1(self):
        return self.w[0]

    @property
    def w2(self):
        return self.w[1]

    @property
    def w3(self):
        return self.w[2]

    @property
    def w4(self):
        return self.w[3]


def _replica_estimates(spec: str, s: np.ndarray, prior: PriorParams, n_rep: int, rng) -> np.ndarray:
    B, N, J = s.shape
    if spec == "exact":
        return np.broadcast_to(s[:, None], (B, n_rep, N, J))
    if spec == "null":
        return np.zeros((B, n_rep, N, J))
    if spec == "independent":
        support = rng.random((B, n_rep, N)) < prior.rho
        return support[..., None] * rng.standard_normal((B, n_rep, N, J))
    raise ValueError(f"estimator_spec must be one of {ESTIMATOR_SPECS}, got {spec!r}")


def _role_means(v: np.ndarray) -> np.ndarray:
    """Per-sample averages of v v^T over the four covariance roles.

    ``v`` has shape (B, n_rep, J). Roles: same replica & vector (w1), same
    replica, different vectors (w2), different replicas, same vector (w3),
    different replicas and vectors (w4).
    """
    B, n, J = v.shape
    outer = np.einsum("baj,bck->bacjk", v, v)
    same_rep = np.eye(n, dtype=bool)[:, :, None, None]
    same_vec = np.eye(J, dtype=bool)[None, None, :, :]
    out = np.full((B, 4), np.nan)
    for k, mask in enumerate([same_rep & same_vec, same_rep & ~same_vec,
                              ~same_rep & same_vec, ~same_rep & ~same_vec]):
        if mask.any():
            out[:, k] = outer[:, mask].mean(axis=1)
    return out


def empirical_v_covariance(setting, prior: PriorParams, delta: float, R: float, N: int,
                           estimator_spec: str, n_mc: int, seed, n_replicas: int = 2,
                           batch: int = 200) -> CovarianceEstimate:
    """Monte Carlo estimate of the covariance roles w1..w4 of one residual row.

    Each Monte Carlo sample draws a signal, ``n_replicas`` replica estimates
    from ``estimator_spec``, one measurement row per signal vector and the
    matching noise, and forms v_j^a = F_j (s_j - x_j^a) + z_j. Only one row
    is needed because rows are exchangeable given the signal. ``R`` is part of
    the channel description but does not enter the single-row statistics.
    """
    setting = Setting(setting)
    if n_mc < 100:
        raise ValueError(f"n_mc must be >= 100, got {n_mc}")
    if setting in COMPLEX_SETTINGS and prior.J != 2:
        raise ValueError(f"{setting.value} requires J = 2")
    ProblemParams(prior, delta, R)
    J = prior.J
    sig_seed, mat_rng, noise_rng = _streams(seed)
    sig_rng = np.random.default_rng(sig_seed)
    stats = []
    done = 0
    while done < n_mc:
        B = min(batch, n_mc - done)
        support = sig_rng.random((B, N)) < prior.rho
        s = support[..., None] * sig_rng.standard_normal((B, N, J))
        x = _replica_estimates(estimator_spec, s, prior, n_replicas, sig_rng)
        e = s[:, None] - x  # (B, n, N, J)
        if setting is Setting.MMV1:
            F = mat_rng.standard_normal((B, J, N)) / np.sqrt(N)
            v = np.einsum("bjl,balj->baj", F, e)
        elif setting is Setting.ComplexComplex:
            FR, FI = mat_rng.standard_normal((2, B, N)) / np.sqrt(2.0 * N)
            v1 = np.einsum("bl,bal->ba", FR, e[..., 0]) - np.einsum("bl,bal->ba", FI, e[..., 1])
            v2 = np.einsum("bl,bal->ba", FI, e[..., 0]) + np.einsum("bl,bal->ba", FR, e[..., 1])
            v = np.stack([v1, v2], axis=-1)
        else:
            F = mat_rng.standard_normal((B, N)) / np.sqrt(N)
            v = np.einsum("bl,balj->baj", F, e)
        z = noise_rng.standard_normal((B, J)) * np.sqrt(delta)
        v = v + z[:, None, :]
        stats.append(_role_means(v))
        done += B
    stats = np.concatenate(stats)
    w = stats.mean(axis=0)
    se = stats.std(axis=0, ddof=1) / np.sqrt(n_mc)
    return CovarianceEstimate(w, se, n_mc)
