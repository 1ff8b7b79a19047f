"""Sampling-free error bounds for truncated moment dynamics.

Everything here is coordinate-indexed: a truncation order N means the first
N scalar coordinates are retained. For block systems the estimates apply
with the coordinate-level bandwidth; the benchmark use is the scalar
single-input case.
"""

from __future__ import annotations

import numpy as np

from .banded import DecayParams, k_factor, kbar_factor, norm_bound

__all__ = ["l_tail", "w_envelope", "total_bound", "optimize_rho",
           "scalar_tail_objective"]


def l_tail(xi: np.ndarray, rho: float, order: int | None = None) -> float:
    """Weighted tail sum L_N = sum_k |xi_k| rho^(N - k), k 0-based.

    N defaults to len(xi). A unit vector in the last coordinate gives rho;
    weights grow toward the truncation edge. For fixed xi the sum shrinks by
    a factor rho per unit increase of the truncation order N.
    """
    xi = np.abs(np.asarray(xi, dtype=float))
    N = xi.size if order is None else int(order)
    return float(np.sum(xi * rho ** (N - np.arange(xi.size))))


def w_envelope(t: float, xi: np.ndarray, p: DecayParams,
               refined: bool = True) -> float:
    """Envelope W(t, xi) for the truncation error of the matrix exponential.

    Bounds ||(e^{tA} - e^{tA_N} oplus 0) xi|| for xi supported on the first
    N = len(xi) coordinates of a Hermitian matrix with decay parameters p.
    W(0, xi) reduces to K(0) L_N / sqrt(1 - rho^2) since Kbar(0) = 0.
    """
    xi = np.abs(np.asarray(xi, dtype=float))
    N = xi.size
    rho = p.rho
    i = np.arange(1, N + 1)
    if refined:
        if p.b != 2:
            raise ValueError("refined exponent requires bandwidth b = 2")
        ex = 2 * N - i[:, None] - i[None, :] + 1
    else:
        ex = (N - i[:, None]) + (N - i[None, :]) - p.b / 2.0
    Q = kbar_factor(t, p) * rho ** ex
    tail = k_factor(t, p) ** 2 * l_tail(xi, rho) ** 2 / (1.0 - rho * rho)
    return float(np.sqrt(np.linalg.norm(Q @ xi) ** 2 + tail))


def total_bound(system_ref, control, m0_ref: np.ndarray, mF_ref: np.ndarray,
                order: int, p: DecayParams, refined: bool = True) -> dict:
    """Certified endpoint error of a control designed on the order-N truncation.

    system_ref is the reference-order moment system (its input matrix feeds
    the forcing term), m0_ref / mF_ref the reference-order initial and target
    moments. Four contributions:

      free:    W(T, P_N m0)                 free-dynamics truncation mismatch
      tail0:   e^{T ||A||} ||m0 - P_ref m0|| initial tail above the reference
               order (||A|| is the certified bound m_max (b + 1))
      forcing: int_0^T W(T - s, P_N B u(s)) ds   via composite Simpson on the
               control grid
      tailF:   ||mF - P_ref mF||             target tail above the reference

    m0_ref and mF_ref may carry extra trailing coordinates beyond the
    reference dimension; those feed the two tail terms. Returns the terms
    and their sum under "total".
    """
    d_ref = system_ref.dim
    nc = order * system_ref.n
    T = control.T
    free = w_envelope(T, m0_ref[:nc], p, refined)
    growth = float(np.exp(T * norm_bound(p.m_max, p.b)))
    tail0 = growth * float(np.linalg.norm(m0_ref[d_ref:]))
    tailF = float(np.linalg.norm(mF_ref[d_ref:]))
    grid = control.grid
    if (grid.size - 1) % 2:
        raise ValueError("Simpson integration needs an even segment count")
    U = control.values
    Bn = system_ref.B[:nc]
    vals = np.array([w_envelope(T - t, Bn @ U[j], p, refined)
                     for j, t in enumerate(grid)])
    h = grid[1] - grid[0]
    forcing = float(h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum()
                               + 2.0 * vals[2:-1:2].sum()))
    total = free + tail0 + forcing + tailF
    return {"total": total, "free": free, "initial_tail": tail0,
            "forcing": forcing, "target_tail": tailF}


def optimize_rho(objective, b: int = 2, chi_range: tuple[float, float] = (1.0 + 1e-6, 1e4),
                 tol: float = 1e-6) -> tuple[float, float]:
    """Minimize a bound over the free weight chi by golden-section search.

    The search runs on log(chi) to the given relative tolerance; the
    objective should be unimodal on the range (the envelopes here are).
    Returns (chi_star, rho_star) with rho_star = chi_star^(-2/b).
    """
    lo, hi = np.log(chi_range[0]), np.log(chi_range[1])
    inv = (np.sqrt(5.0) - 1.0) / 2.0

    def f(y):
        with np.errstate(over="ignore"):
            v = objective(float(np.exp(y)))
        return v if np.isfinite(v) else np.inf

    a, d = lo, hi
    c = d - inv * (d - a)
    e = a + inv * (d - a)
    fc, fe = f(c), f(e)
    while (d - a) > tol * max(1.0, abs(a) + abs(d)):
        if fc <= fe:
            d, e, fe = e, c, fc
            c = d - inv * (d - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + inv * (d - a)
            fe = f(e)
    chi = float(np.exp(0.5 * (a + d)))
    return chi, float(chi ** (-2.0 / b))


def scalar_tail_objective(T: float, order: int, p_template: DecayParams):
    """Objective chi -> K(T) rho^N used to pick the decay rate.

    p_template supplies b, m_max, m12_max, lambda0 and delta; chi is the
    free variable.
    """
    def objective(chi: float) -> float:
        p = DecayParams(chi=chi, b=p_template.b, m_max=p_template.m_max,
                        m12_max=p_template.m12_max, lambda0=p_template.lambda0,
                        delta=p_template.delta)
        return k_factor(T, p) * p.rho ** order
    return objective
