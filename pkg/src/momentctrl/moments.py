"""Moment systems of parameterized linear ensembles.

An ensemble x'(t, beta) = A(beta) x + B(beta) u with polynomial coefficient
matrices on beta in [-1, 1] induces an infinite ODE system for the basis
moments m_k(t) = int P_k(beta) x(t, beta) dbeta. Expanding A and B in the
normalized Legendre basis, the moment operator has blocks

    Ahat_{kl} = sum_i d_{k, i, (k+i-l)/2} A_i,

nonzero only for |k - l| <= deg A, so the truncated operator is banded with
full bandwidth 2 n deg A. The input blocks are the Legendre coefficient
blocks of B(beta) directly.

Moment vectors are stored flat: block k occupies entries [k*n : (k+1)*n].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .legendre import (eval_normalized_legendre, gauss_legendre_rule,
                       product_coeff, recurrence_coeff)

__all__ = ["PolynomialEnsemble", "MomentSystem", "build_moment_system",
           "prototype_system", "prototype_ensemble", "simulate_truncated",
           "REFERENCE_ORDER"]

REFERENCE_ORDER = 60


def _monomial_to_basis(coeff_mats: np.ndarray) -> np.ndarray:
    """Convert matrix coefficients of sum_p M_p beta^p to the Legendre basis.

    coeff_mats has shape (deg + 1, r, c); the conversion is exact (the
    quadrature degree exceeds the integrand degree).
    """
    deg = coeff_mats.shape[0] - 1
    rule = gauss_legendre_rule(deg + 2)
    P = eval_normalized_legendre(deg, rule.nodes)
    V = rule.nodes[None, :] ** np.arange(deg + 1)[:, None]
    gamma = np.einsum("kq,q,pq->pk", P, rule.weights, V)
    return np.einsum("pk,pij->kij", gamma, coeff_mats)


@dataclass(frozen=True)
class PolynomialEnsemble:
    """Ensemble with polynomial-in-beta coefficient matrices.

    A_coeffs: shape (deg A + 1, n, n), B_coeffs: shape (deg B + 1, n, m),
    both holding normalized-Legendre coefficient blocks.
    """
    A_coeffs: np.ndarray
    B_coeffs: np.ndarray

    def __post_init__(self) -> None:
        A = np.asarray(self.A_coeffs, dtype=float)
        B = np.asarray(self.B_coeffs, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A_coeffs must have shape (deg+1, n, n)")
        if B.ndim != 3 or B.shape[1] != A.shape[1]:
            raise ValueError("B_coeffs must have shape (deg+1, n, m)")
        object.__setattr__(self, "A_coeffs", A)
        object.__setattr__(self, "B_coeffs", B)

    @classmethod
    def from_monomial(cls, A_powers: Sequence[np.ndarray],
                      B_powers: Sequence[np.ndarray]) -> "PolynomialEnsemble":
        """Build from coefficients of powers of beta (index p is beta^p)."""
        return cls(_monomial_to_basis(np.asarray(A_powers, dtype=float)),
                   _monomial_to_basis(np.asarray(B_powers, dtype=float)))

    @property
    def n(self) -> int:
        return self.A_coeffs.shape[1]

    @property
    def m(self) -> int:
        return self.B_coeffs.shape[2]

    @property
    def degree_A(self) -> int:
        return self.A_coeffs.shape[0] - 1

    def system_matrix(self, beta) -> np.ndarray:
        """A(beta) for an array of beta values, shape (npts, n, n)."""
        P = eval_normalized_legendre(self.degree_A, beta)
        return np.einsum("kp,kij->pij", P, self.A_coeffs)

    def input_matrix(self, beta) -> np.ndarray:
        """B(beta) for an array of beta values, shape (npts, n, m)."""
        P = eval_normalized_legendre(self.B_coeffs.shape[0] - 1, beta)
        return np.einsum("kp,kij->pij", P, self.B_coeffs)


@dataclass(frozen=True)
class MomentSystem:
    """Order-N truncation of the moment dynamics m' = A m + B u."""
    A: np.ndarray
    B: np.ndarray
    n: int
    order: int

    @property
    def dim(self) -> int:
        return self.n * self.order

    @property
    def bandwidth(self) -> int:
        """Block-level bandwidth in coordinate units, 2 n max|k - l|.

        Blocks (k, l) vanish for |k - l| > deg A, giving 2 n deg A for a
        degree-deg A coefficient family. Entries inside the outermost block
        can sit up to n - 1 coordinates further out; decay certificates
        therefore measure the assembled matrix rather than trust this count.
        """
        nz = np.nonzero(self.A)
        if nz[0].size == 0:
            return 0
        offset = np.max(np.abs(nz[0] // self.n - nz[1] // self.n))
        return int(2 * self.n * offset)


def build_moment_system(ens: PolynomialEnsemble, order: int) -> MomentSystem:
    """Assemble the order-N truncated moment system of an ensemble."""
    n, m = ens.n, ens.m
    degA = ens.degree_A
    A = np.zeros((order * n, order * n))
    for k in range(order):
        for l in range(max(0, k - degA), min(order, k + degA + 1)):
            blk = np.zeros((n, n))
            for i in range(abs(k - l), degA + 1):
                if (k + i - l) % 2:
                    continue
                r = (k + i - l) // 2
                d = product_coeff(k, i, r)
                if d:
                    blk += d * ens.A_coeffs[i]
            A[k * n:(k + 1) * n, l * n:(l + 1) * n] = blk
    B = np.zeros((order * n, m))
    nB = min(order, ens.B_coeffs.shape[0])
    B[:nB * n] = ens.B_coeffs[:nB].reshape(nB * n, m)
    return MomentSystem(A, B, n, order)


def prototype_system(A: np.ndarray, B: np.ndarray, order: int) -> MomentSystem:
    """Moment truncation for x' = beta A x + B u with constant B.

    Closed form: the moment operator is C kron A with C the tridiagonal
    matrix of recurrence coefficients, and the input matrix is sqrt(2) B
    in the first block row.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    C = np.zeros((order, order))
    for k in range(order - 1):
        C[k, k + 1] = C[k + 1, k] = recurrence_coeff(k)
    Bh = np.zeros((order * n, B.shape[1]))
    Bh[:n] = np.sqrt(2.0) * B
    return MomentSystem(np.kron(C, A), Bh, n, order)


def prototype_ensemble(A: np.ndarray, B: np.ndarray) -> PolynomialEnsemble:
    """PolynomialEnsemble form of x' = beta A x + B u."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    z = np.zeros_like(A)
    return PolynomialEnsemble.from_monomial([z, A], [B])


def simulate_truncated(system: MomentSystem, m0: np.ndarray, control,
                       steps: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    """Integrate the truncated moment ODE with fixed-step RK4.

    `control` provides T and stage_samples(steps); per-step stage sampling
    keeps aligned piecewise controls exact across their segment boundaries.
    Returns (times, trajectory) with trajectory of shape (steps + 1, dim).
    """
    T = control.T
    h = T / steps
    f_stage = control.stage_samples(steps) @ system.B.T
    traj = _kernels.linear_trajectory(system.A, f_stage,
                                      np.asarray(m0, dtype=float), h, steps)
    return np.linspace(0.0, T, steps + 1), traj
