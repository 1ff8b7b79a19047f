"""Controllability tests for truncated moment systems."""

from __future__ import annotations

import numpy as np

from .moments import MomentSystem, PolynomialEnsemble, build_moment_system

__all__ = ["controllability_matrix", "rank_test", "witness_check",
           "denseness_sweep"]

DENSENESS_CAVEAT = (
    "full rank of every tested truncation does not by itself decide "
    "approximate controllability of the untruncated moment system; the "
    "truncation ranks are conclusive only for structurally settled classes "
    "such as the single-coefficient family x' = beta A x + B u")


def _unpack(system) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(system, MomentSystem):
        return system.A, system.B
    A, B = system
    return np.asarray(A, dtype=float), np.asarray(B, dtype=float)


def controllability_matrix(system, n_columns: int | None = None) -> np.ndarray:
    """Krylov column block [B, AB, ..., A^(q-1) B].

    q defaults to the state dimension (the Cayley-Hamilton cap). `system`
    is a MomentSystem or an (A, B) pair.
    """
    A, B = _unpack(system)
    q = A.shape[0] if n_columns is None else n_columns
    cols = np.empty((A.shape[0], q * B.shape[1]))
    X = B.copy()
    m = B.shape[1]
    for j in range(q):
        cols[:, j * m:(j + 1) * m] = X
        if j + 1 < q:
            X = A @ X
    return cols


def rank_test(C: np.ndarray, tol: float = 1e-10) -> tuple[int, np.ndarray]:
    """Numerical rank by relative singular-value threshold.

    Counts singular values above tol * sigma_max; returns (rank, sigmas).
    """
    s = np.linalg.svd(np.asarray(C, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0, s
    return int(np.sum(s > tol * s[0])), s


def witness_check(w: np.ndarray, C: np.ndarray) -> float:
    """max_j |<w, C[:, j]>| / ||w||; small values certify an uncontrollable
    direction of the span of the columns."""
    w = np.asarray(w, dtype=float)
    return float(np.max(np.abs(w @ C)) / np.linalg.norm(w))


def denseness_sweep(ens: PolynomialEnsemble, orders, tol: float = 1e-10) -> dict:
    """Rank of the truncated controllability matrix over a range of orders.

    Returns {"orders": ..., "ranks": ..., "full_rank": ..., "note": ...};
    the note records the reach of the test.
    """
    orders = list(orders)
    ranks = []
    full = []
    for N in orders:
        system = build_moment_system(ens, N)
        r, _ = rank_test(controllability_matrix(system), tol)
        ranks.append(r)
        full.append(r == system.dim)
    return {"orders": orders, "ranks": ranks, "full_rank": full,
            "all_full_rank": all(full), "note": DENSENESS_CAVEAT}
