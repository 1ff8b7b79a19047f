"""Banded matrices, their exponentials, and entrywise decay bounds.

Bandwidth convention: a matrix has (full, two-sided) bandwidth b, b even,
when its entries vanish for |i - j| > b/2. A tridiagonal matrix has b = 2.

For a Hermitian banded matrix with entry bound m_max, the exponential
satisfies the entrywise decay estimate

    |(e^{tA})_{ij}| <= K(t) rho^{|i-j|},
    rho = chi^{-2/b},  chi > 1,
    K(t) = (2 chi / (chi - 1)) exp(lambda0 t + t Delta (chi + 1/chi) / 2),

and the mismatch between e^{tA} and the embedded exponential of the order-N
leading principal truncation obeys

    |(e^{tA} - e^{tA_N} oplus 0)_{ij}| <= Kbar(t) rho^{(N-i) + (N-j) - b/2},
    Kbar(t) = b (b + 2) t m12_max (chi/(chi-1))^2
              exp(lambda0 t + t Delta (chi + 1/chi) / 2),

for 1 <= i, j <= N, with the sharper exponent 2N - i - j + 1 available in
the tridiagonal case b = 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = ["BandedMatrix", "DecayParams", "matrix_bandwidth", "is_hermitian",
           "norm_bound", "truncate", "expm", "k_factor", "kbar_factor",
           "entry_decay_bound", "truncation_exp_bound"]

HERMITIAN_TOL = 1e-12


def matrix_bandwidth(M: np.ndarray, tol: float = 0.0) -> int:
    """Smallest even b with M[i, j] = 0 (up to tol) for |i - j| > b/2."""
    M = np.asarray(M)
    nz = np.nonzero(np.abs(M) > tol)
    if nz[0].size == 0:
        return 0
    return 2 * int(np.max(np.abs(nz[0] - nz[1])))


def is_hermitian(M: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    M = np.asarray(M)
    return bool(np.max(np.abs(M - M.conj().T)) <= tol)


@dataclass(frozen=True)
class BandedMatrix:
    """Dense storage of a banded matrix plus its structure flags."""
    data: np.ndarray
    b: int
    hermitian: bool

    @classmethod
    def from_dense(cls, M: np.ndarray, tol: float = 0.0) -> "BandedMatrix":
        M = np.asarray(M, dtype=float)
        return cls(M, matrix_bandwidth(M, tol), is_hermitian(M))

    @property
    def m_max(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


def _as_array(M) -> np.ndarray:
    return M.data if isinstance(M, BandedMatrix) else np.asarray(M, dtype=float)


@dataclass
class DecayParams:
    """Parameters of the off-diagonal decay estimates.

    chi > 1 is the free weight; rho = chi^(-2/b) is the induced decay rate.
    delta defaults to the row-sum bound m_max * (b + 1); lambda0 shifts the
    exponential growth rate (0 for the systems built here).
    """
    chi: float
    b: int = 2
    m_max: float = 1.0
    m12_max: float | None = None
    lambda0: float = 0.0
    delta: float | None = None

    def __post_init__(self) -> None:
        if not self.chi > 1.0:
            raise ValueError("chi must exceed 1")
        if self.b < 2 or self.b % 2:
            raise ValueError("bandwidth b must be even and >= 2")
        if self.m12_max is None:
            self.m12_max = self.m_max
        if self.delta is None:
            self.delta = self.m_max * (self.b + 1)

    @property
    def rho(self) -> float:
        return float(self.chi ** (-2.0 / self.b))

    @classmethod
    def for_matrix(cls, M, chi: float, lambda0: float = 0.0) -> "DecayParams":
        """Parameters certified for a given Hermitian banded matrix.

        delta is the Gershgorin row-sum bound: m_max * b when the diagonal
        vanishes identically, m_max * (b + 1) otherwise.
        """
        A = _as_array(M)
        b = max(matrix_bandwidth(A), 2)
        m_max = float(np.max(np.abs(A)))
        factor = b if not np.any(np.diagonal(A)) else b + 1
        return cls(chi=chi, b=b, m_max=m_max, lambda0=lambda0,
                   delta=m_max * factor)


def norm_bound(m_max: float, b: int) -> float:
    """Certified operator-norm bound m_max * (b + 1) for bandwidth b."""
    return m_max * (b + 1)


def truncate(M, dim: int) -> np.ndarray:
    """Leading principal dim x dim block."""
    A = _as_array(M)
    if dim > A.shape[0]:
        raise ValueError("truncation exceeds matrix dimension")
    return A[:dim, :dim].copy()


def expm(M) -> np.ndarray:
    """Matrix exponential (scaling-and-squaring Pade approximation)."""
    return scipy.linalg.expm(_as_array(M))


def k_factor(t: float, p: DecayParams) -> float:
    """Envelope K(t) of the entrywise decay bound."""
    chi = p.chi
    return 2.0 * chi / (chi - 1.0) * np.exp(
        p.lambda0 * t + t * p.delta * (chi + 1.0 / chi) / 2.0)


def kbar_factor(t: float, p: DecayParams) -> float:
    """Envelope Kbar(t) of the truncation-mismatch bound; Kbar(0) = 0."""
    chi = p.chi
    return p.b * (p.b + 2) * t * p.m12_max * (chi / (chi - 1.0)) ** 2 * np.exp(
        p.lambda0 * t + t * p.delta * (chi + 1.0 / chi) / 2.0)


def entry_decay_bound(i: int, j: int, t: float, p: DecayParams) -> float:
    """Bound on |(e^{tA})_{ij}|; depends on the indices through |i - j|."""
    return k_factor(t, p) * p.rho ** abs(i - j)


def truncation_exp_bound(i: int, j: int, t: float, order: int, p: DecayParams,
                         refined: bool = False) -> float:
    """Bound on entry (i, j), 1-based, of e^{tA} - e^{tA_order} oplus 0.

    `refined` selects the sharper tridiagonal exponent 2*order - i - j + 1;
    it requires b = 2.
    """
    if refined:
        if p.b != 2:
            raise ValueError("refined exponent requires bandwidth b = 2")
        ex = 2 * order - i - j + 1
    else:
        ex = abs(order - i) + abs(order - j) - p.b / 2.0
    return kbar_factor(t, p) * p.rho ** ex
