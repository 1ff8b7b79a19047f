"""Fixed-step RK4 integration kernels.

Two interchangeable backends: numba-compiled loops (default when numba is
importable) and pure numpy. Select with the environment variable
``MOMENTCTRL_BACKEND`` set to ``"numba"`` or ``"numpy"``, or at runtime via
:func:`set_backend`.

Forcing terms are passed as per-step stage samples with shape
``(steps, 3, dim)``: entry ``[i, 0]`` is the value at the step start,
``[i, 1]`` at the midpoint, ``[i, 2]`` at the step end. Sampling per step
(instead of on a shared grid) lets discontinuous controls use their own
segment's one-sided value at shared step boundaries, so aligned
zero-order-hold controls integrate without order loss.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["backend", "set_backend", "available_backends",
           "linear_trajectory", "ensemble_endpoints"]


def _numpy_linear_trajectory(A, f_stage, x0, h, steps):
    d = x0.shape[0]
    out = np.empty((steps + 1, d))
    out[0] = x0
    x = x0.copy()
    for i in range(steps):
        k1 = A @ x + f_stage[i, 0]
        k2 = A @ (x + 0.5 * h * k1) + f_stage[i, 1]
        k3 = A @ (x + 0.5 * h * k2) + f_stage[i, 1]
        k4 = A @ (x + h * k3) + f_stage[i, 2]
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = x
    return out


def _numpy_ensemble_endpoints(Ab, Bb, u_stage, X0, h, steps):
    X = X0.copy()
    for i in range(steps):
        g0 = np.einsum("pij,j->pi", Bb, u_stage[i, 0])
        gm = np.einsum("pij,j->pi", Bb, u_stage[i, 1])
        g1 = np.einsum("pij,j->pi", Bb, u_stage[i, 2])
        k1 = np.einsum("pij,pj->pi", Ab, X) + g0
        k2 = np.einsum("pij,pj->pi", Ab, X + 0.5 * h * k1) + gm
        k3 = np.einsum("pij,pj->pi", Ab, X + 0.5 * h * k2) + gm
        k4 = np.einsum("pij,pj->pi", Ab, X + h * k3) + g1
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return X


_IMPL = {"numpy": (_numpy_linear_trajectory, _numpy_ensemble_endpoints)}

try:
    from numba import njit

    @njit(cache=True)
    def _nb_linear_trajectory(A, f_stage, x0, h, steps):  # pragma: no cover
        d = x0.shape[0]
        out = np.empty((steps + 1, d))
        x = x0.copy()
        out[0] = x
        for i in range(steps):
            k1 = A @ x + f_stage[i, 0]
            k2 = A @ (x + 0.5 * h * k1) + f_stage[i, 1]
            k3 = A @ (x + 0.5 * h * k2) + f_stage[i, 1]
            k4 = A @ (x + h * k3) + f_stage[i, 2]
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[i + 1] = x
        return out

    @njit(cache=True)
    def _nb_ensemble_endpoints(Ab, Bb, u_stage, X0, h, steps):  # pragma: no cover
        npts, n = X0.shape
        m = Bb.shape[2]
        X = X0.copy()
        g = np.empty((3, n))
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        y = np.empty(n)
        for i in range(steps):
            for p in range(npts):
                A = Ab[p]
                B = Bb[p]
                x = X[p]
                for s in range(3):
                    for r in range(n):
                        acc = 0.0
                        for c in range(m):
                            acc += B[r, c] * u_stage[i, s, c]
                        g[s, r] = acc
                for r in range(n):
                    acc = g[0, r]
                    for c in range(n):
                        acc += A[r, c] * x[c]
                    k1[r] = acc
                for r in range(n):
                    y[r] = x[r] + 0.5 * h * k1[r]
                for r in range(n):
                    acc = g[1, r]
                    for c in range(n):
                        acc += A[r, c] * y[c]
                    k2[r] = acc
                for r in range(n):
                    y[r] = x[r] + 0.5 * h * k2[r]
                for r in range(n):
                    acc = g[1, r]
                    for c in range(n):
                        acc += A[r, c] * y[c]
                    k3[r] = acc
                for r in range(n):
                    y[r] = x[r] + h * k3[r]
                for r in range(n):
                    acc = g[2, r]
                    for c in range(n):
                        acc += A[r, c] * y[c]
                    k4[r] = acc
                for r in range(n):
                    X[p, r] = x[r] + (h / 6.0) * (
                        k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
        return X

    _IMPL["numba"] = (_nb_linear_trajectory, _nb_ensemble_endpoints)
except ImportError:  # pragma: no cover
    pass


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_IMPL))


def _default_backend() -> str:
    req = os.environ.get("MOMENTCTRL_BACKEND", "").strip().lower()
    if req:
        if req not in _IMPL:
            raise ValueError(
                f"MOMENTCTRL_BACKEND={req!r} not available; "
                f"choose from {available_backends()}")
        return req
    return "numba" if "numba" in _IMPL else "numpy"


_BACKEND = _default_backend()


def backend() -> str:
    """Name of the active kernel backend."""
    return _BACKEND


def set_backend(name: str) -> None:
    """Switch the kernel backend at runtime ("numba" or "numpy")."""
    global _BACKEND
    if name not in _IMPL:
        raise ValueError(f"unknown backend {name!r}; choose from {available_backends()}")
    _BACKEND = name


def linear_trajectory(A: np.ndarray, f_stage: np.ndarray, x0: np.ndarray,
                      h: float, steps: int) -> np.ndarray:
    """Integrate x' = A x + f(t) with RK4, returning all steps.

    f_stage holds the forcing stage samples, shape (steps, 3, dim).
    Returns shape (steps + 1, dim).
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    f_stage = np.ascontiguousarray(f_stage, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    return _IMPL[_BACKEND][0](A, f_stage, x0, float(h), int(steps))


def ensemble_endpoints(Ab: np.ndarray, Bb: np.ndarray, u_stage: np.ndarray,
                       X0: np.ndarray, h: float, steps: int) -> np.ndarray:
    """Integrate x_p' = A_p x_p + B_p u(t) for a batch of parameter points.

    Ab: (npts, n, n), Bb: (npts, n, m), u_stage: (steps, 3, m),
    X0: (npts, n). Returns the endpoint states, shape (npts, n).
    """
    Ab = np.ascontiguousarray(Ab, dtype=np.float64)
    Bb = np.ascontiguousarray(Bb, dtype=np.float64)
    u_stage = np.ascontiguousarray(u_stage, dtype=np.float64)
    X0 = np.ascontiguousarray(X0, dtype=np.float64)
    return _IMPL[_BACKEND][1](Ab, Bb, u_stage, X0, float(h), int(steps))
