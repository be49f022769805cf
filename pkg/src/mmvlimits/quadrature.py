"""Radial quadrature for expectations over standard J-dimensional Gaussians.

Every integrand used by the package depends on a Gaussian vector only through
its squared norm, so a J-dimensional expectation collapses to a 1-D integral
against the chi(J) density of the radius. The 1-D integral is done by a
vectorised adaptive Gauss-Legendre scheme: each panel is integrated with a
16-point rule and with two 16-point rules on its halves, and panels whose two
estimates disagree are bisected.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
from scipy.special import gammaln
from scipy.stats import chi

_ORDER = 16
_INITIAL_PANELS = 8  # 8 panels x 16 nodes = 128 nodes before refinement
_TAIL_PROB = 1e-22

_GL_X, _GL_W = np.polynomial.legendre.leggauss(_ORDER)


class QuadratureError(ArithmeticError):
    """Adaptive refinement failed to reach the requested tolerance."""


@lru_cache(maxsize=64)
def radius_cutoff(J: int) -> float:
    """Radius beyond which the chi(J) tail mass is below 1e-22."""
    return float(chi.isf(_TAIL_PROB, J))


def _panel_rule(a: np.ndarray, b: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = f(nodes)
    return half * (vals @ _GL_W)


def integrate_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    edges: np.ndarray,
    rtol: float = 1e-13,
    atol: float = 1e-16,
    max_levels: int = 40,
) -> float:
    """Integrate a vectorised ``f`` over ``[edges[0], edges[-1]]``.

    ``edges`` gives the initial panel boundaries. Raises QuadratureError if some
    panel still fails the error test after ``max_levels`` bisections.
    """
    a = np.asarray(edges[:-1], dtype=float)
    b = np.asarray(edges[1:], dtype=float)
    span = float(b[-1] - a[0])
    total = 0.0
    scale = None
    for _ in range(max_levels):
        m = 0.5 * (a + b)
        coarse = _panel_rule(a, b, f)
        left = _panel_rule(a, m, f)
        right = _panel_rule(m, b, f)
        fine = left + right
        if not np.all(np.isfinite(fine)):
            raise QuadratureError("integrand returned non-finite values")
        if scale is None:
            scale = float(np.sum(np.abs(fine)))
        tol = max(rtol * scale, atol) * (b - a) / span
        ok = np.abs(fine - coarse) <= tol
        total += float(np.sum(fine[ok]))
        if ok.all():
            return total
        a_bad, m_bad, b_bad = a[~ok], m[~ok], b[~ok]
        a = np.concatenate([a_bad, m_bad])
        b = np.concatenate([m_bad, b_bad])
    raise QuadratureError(f"adaptive refinement did not converge in {max_levels} levels")


def radial_edges(J: int, breakpoints: Iterable[float] = ()) -> np.ndarray:
    """Initial panel edges on [0, cutoff] merged with integrand breakpoints."""
    rmax = radius_cutoff(J)
    base = np.linspace(0.0, rmax, _INITIAL_PANELS + 1)
    extra = [p for p in breakpoints if np.isfinite(p) and 0.0 < p < rmax]
    edges = np.unique(np.concatenate([base, np.asarray(extra, dtype=float)]))
    # drop slivers that would only cost evaluations
    keep = np.concatenate([[True], np.diff(edges) > 1e-14 * rmax])
    return edges[keep]


def transition_breakpoints(r_star: float, width: float) -> list[float]:
    """Breakpoints bracketing a sigmoid-like transition at radius r_star."""
    if not np.isfinite(r_star) or r_star <= 0 or not np.isfinite(width) or width <= 0:
        return []
    return [r_star + k * width for k in (-8, -2, 0, 2, 8) if r_star + k * width > 0]


def radial_expectation_r(
    h: Callable[[np.ndarray], np.ndarray],
    J: int,
    breakpoints: Iterable[float] = (),
    rtol: float = 1e-13,
    atol: float = 1e-16,
) -> float:
    """E[h(|x|)] for x ~ N(0, I_J), with ``h`` taking the radius."""
    if J < 1:
        raise ValueError(f"J must be >= 1, got {J}")
    logc = -((J / 2.0 - 1.0) * np.log(2.0) + gammaln(J / 2.0))

    def integrand(r):
        if J == 1:
            w = np.exp(logc - 0.5 * r * r)
        else:
            w = r ** (J - 1) * np.exp(logc - 0.5 * r * r)
        return h(r) * w

    return integrate_adaptive(integrand, radial_edges(J, breakpoints), rtol=rtol, atol=atol)


def radial_gaussian_expectation(
    g: Callable[[np.ndarray], np.ndarray],
    J: int,
    breakpoints: Iterable[float] = (),
    rtol: float = 1e-13,
    atol: float = 1e-16,
) -> float:
    """E[g(|x|^2)] for x ~ N(0, I_J), reduced to a 1-D chi(J) integral.

    ``g`` must accept numpy arrays of squared radii. ``breakpoints`` are radii
    (not squared) where the integrand changes quickly; they seed the panel grid.

    >>> round(radial_gaussian_expectation(lambda u: u, 7), 12)
    7.0
    """
    return radial_expectation_r(lambda r: g(r * r), J, breakpoints, rtol=rtol, atol=atol)
