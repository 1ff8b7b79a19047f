"""Normalized Legendre basis on [-1, 1].

The basis polynomials satisfy int_{-1}^{1} P_i P_j = delta_ij, with
P_0 = 1/sqrt(2) and P_1 = sqrt(3/2) beta, and the three-term recurrence

    c_k P_{k+1} = beta P_k - c_{k-1} P_{k-1},
    c_k = (k + 1) / sqrt((2k + 1)(2k + 3)).

Products expand as P_k P_i = sum_r d_{kir} P_{k+i-2r} with coefficients
built from the Gauss factors g_s = (2s)! / (2^s s!)^2.
"""

from __future__ import annotations

import warnings
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = ["recurrence_coeff", "eval_normalized_legendre", "gauss_factor",
           "product_coeff", "QuadratureRule", "gauss_legendre_rule",
           "analyze", "synthesize"]


def recurrence_coeff(k: int | np.ndarray) -> float | np.ndarray:
    """Off-diagonal recurrence coefficient c_k, k >= 0."""
    k = np.asarray(k, dtype=float)
    c = (k + 1) / np.sqrt((2 * k + 1) * (2 * k + 3))
    return float(c) if c.ndim == 0 else c


def eval_normalized_legendre(kmax: int, beta) -> np.ndarray:
    """Values of P_0 .. P_kmax at the points beta, shape (kmax + 1, npts).

    Forward recurrence; stable on [-1, 1] for the orders used here.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    out = np.empty((kmax + 1, beta.size))
    out[0] = 1.0 / np.sqrt(2.0)
    if kmax >= 1:
        out[1] = np.sqrt(1.5) * beta
    for k in range(1, kmax):
        out[k + 1] = (beta * out[k] - recurrence_coeff(k - 1) * out[k - 1]) \
            / recurrence_coeff(k)
    return out


def gauss_factor(s: int) -> float:
    """g_s = (2s)! / (2^s s!)^2, via the ratio g_s/g_{s-1} = (s - 1/2)/s."""
    if s < 0:
        raise ValueError("gauss factor needs s >= 0")
    g = 1.0
    for j in range(1, s + 1):
        g *= (j - 0.5) / j
    return g


def _gauss_factors(smax: int) -> np.ndarray:
    g = np.empty(smax + 1)
    g[0] = 1.0
    for j in range(1, smax + 1):
        g[j] = g[j - 1] * (j - 0.5) / j
    return g


def product_coeff(k: int, i: int, r: int) -> float:
    """Linearization coefficient d_{kir} in P_k P_i = sum_r d_{kir} P_{k+i-2r}.

    Zero outside 0 <= r <= min(k, i).
    """
    if r < 0 or r > k or r > i:
        return 0.0
    g = _gauss_factors(k + i - r)
    num = np.sqrt((2 * k + 2 * i - 4 * r + 1) * (2 * k + 1) * (2 * i + 1))
    den = np.sqrt(2.0) * (2 * k + 2 * i - 2 * r + 1)
    return float(num / den * g[r] * g[k - r] * g[i - r] / g[k + i - r])


class QuadratureRule(NamedTuple):
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes: np.ndarray
    weights: np.ndarray
    order: int


def gauss_legendre_rule(order: int) -> QuadratureRule:
    """Gauss-Legendre rule with `order` nodes, exact to degree 2*order - 1.

    Nodes are found by Newton iteration on the classical Legendre polynomial
    from the Chebyshev initial guess.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    k = order
    x = np.cos(np.pi * (np.arange(k) + 0.75) / (k + 0.5))
    def _leg_and_diff(x):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, k + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        return p1, k * (x * p1 - p0) / (x * x - 1.0)

    for _ in range(100):
        p, dp = _leg_and_diff(x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dp = _leg_and_diff(x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    idx = np.argsort(x)
    return QuadratureRule(x[idx], w[idx], order)


DEFAULT_QUADRATURE_ORDER = 64


def _project(f: Callable, order: int, rule: QuadratureRule,
             edges: Sequence[float]) -> np.ndarray:
    m = None
    for lo, hi in zip(edges[:-1], edges[1:]):
        xx = 0.5 * (hi - lo) * rule.nodes + 0.5 * (lo + hi)
        ww = 0.5 * (hi - lo) * rule.weights
        vals = np.atleast_1d(np.asarray(f(xx), dtype=float))
        if vals.ndim == 1:
            vals = vals[:, None]
        P = eval_normalized_legendre(order - 1, xx)
        contrib = np.einsum("kp,p,pn->kn", P, ww, vals)
        m = contrib if m is None else m + contrib
    return m


def analyze(f: Callable, order: int, edges: Sequence[float] = (-1.0, 1.0),
            quad_order: int = DEFAULT_QUADRATURE_ORDER,
            tol: float = 1e-9) -> np.ndarray:
    """First `order` basis coefficients of a profile beta -> R^n.

    f maps an array of beta values to shape (npts, n) (or (npts,) when
    n = 1). Integration is Gauss-Legendre per segment of `edges`; the
    result is checked against a doubled-order rule and a warning is issued
    if the two disagree beyond `tol`.

    Returns the stacked coefficient vector of length order * n, block k
    occupying entries [k*n : (k+1)*n].
    """
    coarse = _project(f, order, gauss_legendre_rule(quad_order), edges)
    fine = _project(f, order, gauss_legendre_rule(2 * quad_order), edges)
    err = np.max(np.abs(fine - coarse))
    if err > tol:
        warnings.warn(
            f"quadrature not converged at order {quad_order} "
            f"(refinement changed coefficients by {err:.3e}); "
            "using the refined value", stacklevel=2)
    return fine.reshape(-1)


def synthesize(coeffs: np.ndarray, beta, n: int = 1) -> np.ndarray:
    """Evaluate the profile with stacked coefficients `coeffs` at `beta`.

    Inverse of :func:`analyze` on its range; returns shape (npts, n).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    order = coeffs.size // n
    P = eval_normalized_legendre(order - 1, beta)
    return np.einsum("kp,kn->pn", P, coeffs.reshape(order, n))
