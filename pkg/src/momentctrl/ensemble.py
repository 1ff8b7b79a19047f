"""Direct simulation of parameterized ensembles and profile geometry.

Profiles are piecewise descriptions beta -> R^n used for initial states and
targets. Distances computed from simulated states on a sampling grid are
numerical estimates, not certified bounds; the grid resolution caps what
they can resolve.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .legendre import gauss_legendre_rule
from .moments import PolynomialEnsemble

__all__ = ["Profile", "Segment", "EnsembleSnapshot", "SimulationError",
           "preset_profiles", "simulate_ensemble", "l2_distance", "l2_norm",
           "segment_quadrature", "DEFAULT_VALIDATION_GRID"]

DEFAULT_VALIDATION_GRID = 501


class SimulationError(RuntimeError):
    """Raised when the step-halving accuracy check fails."""


@dataclass(frozen=True)
class Segment:
    """One piece of a profile on [lo, hi).

    parts holds one component spec per state dimension:
      ("poly", c0, c1, ...)   polynomial sum c_p beta^p
      ("sin", a, w)           a * sin(w * beta)
      ("cos", a, w)           a * cos(w * beta)
    """
    lo: float
    hi: float
    parts: tuple[tuple, ...]

    def evaluate(self, beta: np.ndarray) -> np.ndarray:
        out = np.empty((beta.size, len(self.parts)))
        for j, part in enumerate(self.parts):
            kind = part[0]
            if kind == "poly":
                out[:, j] = np.polynomial.polynomial.polyval(
                    beta, np.asarray(part[1:], dtype=float))
            elif kind == "sin":
                out[:, j] = part[1] * np.sin(part[2] * beta)
            elif kind == "cos":
                out[:, j] = part[1] * np.cos(part[2] * beta)
            else:
                raise ValueError(f"unknown profile part {kind!r}")
        return out


@dataclass(frozen=True)
class Profile:
    """Piecewise profile on [-1, 1]; callable on arrays of beta."""
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("profile needs at least one segment")
        n = len(segs[0].parts)
        if any(len(s.parts) != n for s in segs):
            raise ValueError("all segments must share the state dimension")
        for a, b in zip(segs[:-1], segs[1:]):
            if not np.isclose(a.hi, b.lo):
                raise ValueError("segments must tile the interval")
        object.__setattr__(self, "segments", segs)

    @property
    def n(self) -> int:
        return len(self.segments[0].parts)

    @property
    def edges(self) -> tuple[float, ...]:
        return tuple(s.lo for s in self.segments) + (self.segments[-1].hi,)

    def __call__(self, beta) -> np.ndarray:
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        out = np.empty((beta.size, self.n))
        edges = self.edges
        idx = np.clip(np.searchsorted(edges, beta, side="right") - 1,
                      0, len(self.segments) - 1)
        for s, seg in enumerate(self.segments):
            mask = idx == s
            if np.any(mask):
                out[mask] = seg.evaluate(beta[mask])
        return out


def _single(parts) -> Profile:
    return Profile((Segment(-1.0, 1.0, tuple(parts)),))


_PI = np.pi

_PRESETS = {
    # planar ensemble start (5 - 2 beta, 3) and spread target (beta, 2 beta)
    "oscillator_init": lambda: _single((("poly", 5.0, -2.0), ("poly", 3.0))),
    "oscillator_target": lambda: _single((("poly", 0.0, 1.0), ("poly", 0.0, 2.0))),
    # closed curves traversed by beta: unit circle and unit square
    "circle": lambda: _single((("cos", 1.0, _PI), ("sin", 1.0, _PI))),
    "square": lambda: Profile((
        Segment(-1.0, -0.5, (("poly", 3.0, 4.0), ("poly", -1.0))),
        Segment(-0.5, 0.0, (("poly", 1.0), ("poly", 1.0, 4.0))),
        Segment(0.0, 0.5, (("poly", 1.0, -4.0), ("poly", 1.0))),
        Segment(0.5, 1.0, (("poly", -1.0), ("poly", 3.0, -4.0))),
    )),
    # scalar benchmark pair
    "scalar_sin": lambda: _single((("sin", 1.0, 0.5 * _PI),)),
    "scalar_cos": lambda: _single((("cos", 1.0, 0.5 * _PI),)),
}


def preset_profiles(name: str) -> Profile:
    """Named benchmark profiles; raises ValueError for unknown names."""
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ValueError(
            f"unknown profile {name!r}; available: {sorted(_PRESETS)}") from None


@dataclass(frozen=True)
class EnsembleSnapshot:
    """States of the ensemble over a beta grid at one time."""
    t: float
    beta: np.ndarray
    states: np.ndarray
    weights: np.ndarray | None = None


def simulate_ensemble(ens: PolynomialEnsemble, initial, control,
                      beta=None, steps: int = 2000, check: bool = True,
                      atol: float = 1e-8,
                      weights: np.ndarray | None = None) -> EnsembleSnapshot:
    """Integrate every ensemble member with fixed-step RK4.

    `initial` is a Profile (or callable beta -> states) or a ready
    (npts, n) state array matching `beta`. The result is verified by
    re-running at half the step size; a disagreement above `atol` raises
    SimulationError naming the worst beta. The refined states are returned.
    """
    if beta is None:
        beta = np.linspace(-1.0, 1.0, DEFAULT_VALIDATION_GRID)
    beta = np.asarray(beta, dtype=float)
    X0 = initial(beta) if callable(initial) else np.asarray(initial, dtype=float)
    if X0.shape != (beta.size, ens.n):
        raise ValueError("initial states do not match the beta grid")
    Ab = ens.system_matrix(beta)
    Bb = ens.input_matrix(beta)
    T = control.T

    def run(k):
        return _kernels.ensemble_endpoints(Ab, Bb, control.stage_samples(k),
                                           X0, T / k, k)

    coarse = run(steps)
    fine = run(2 * steps)
    if check:
        diff = np.linalg.norm(fine - coarse, axis=1)
        worst = int(np.argmax(diff))
        if diff[worst] > atol:
            raise SimulationError(
                f"step-halving check failed: state at beta={beta[worst]:.6f} "
                f"moved {diff[worst]:.3e} > {atol:.1e}; increase steps")
    return EnsembleSnapshot(T, beta, fine, weights)


def segment_quadrature(profile: Profile, order: int = 64):
    """Gauss-Legendre nodes and weights subdivided at the profile's edges."""
    rule = gauss_legendre_rule(order)
    nodes, weights = [], []
    edges = profile.edges
    for lo, hi in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (hi - lo) * rule.nodes + 0.5 * (lo + hi))
        weights.append(0.5 * (hi - lo) * rule.weights)
    return np.concatenate(nodes), np.concatenate(weights)


def _simpson_weights(npts: int, h: float) -> np.ndarray:
    if npts < 3 or npts % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of points")
    w = np.ones(npts)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def _values_on(obj, beta: np.ndarray) -> np.ndarray:
    if isinstance(obj, EnsembleSnapshot):
        return obj.states
    return obj(beta)


def l2_distance(a, b, weights: np.ndarray | None = None) -> float:
    """L^2([-1, 1]) distance between profiles and/or snapshots.

    Snapshots are compared on their grid: with explicit or attached
    quadrature weights when available, otherwise by composite Simpson on
    the (uniform, odd-length) grid. Two profiles are compared by
    segment-subdivided Gauss quadrature. Grid-based values are estimates
    whose accuracy is limited by the grid.
    """
    a_snap = isinstance(a, EnsembleSnapshot)
    b_snap = isinstance(b, EnsembleSnapshot)
    if not a_snap and not b_snap:
        edges = sorted(set(a.edges) | set(b.edges))
        rule = gauss_legendre_rule(64)
        acc = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            x = 0.5 * (hi - lo) * rule.nodes + 0.5 * (lo + hi)
            w = 0.5 * (hi - lo) * rule.weights
            diff = a(x) - b(x)
            acc += float(np.sum(w * np.sum(diff * diff, axis=1)))
        return float(np.sqrt(acc))
    snap = a if a_snap else b
    beta = snap.beta
    if a_snap and b_snap and not np.array_equal(a.beta, b.beta):
        raise ValueError("snapshots must share the beta grid")
    if weights is None:
        weights = snap.weights
    if weights is None:
        h = beta[1] - beta[0]
        if not np.allclose(np.diff(beta), h):
            raise ValueError("weights required for a non-uniform grid")
        weights = _simpson_weights(beta.size, h)
    diff = _values_on(a, beta) - _values_on(b, beta)
    return float(np.sqrt(np.sum(weights * np.sum(diff * diff, axis=1))))


def l2_norm(obj, weights: np.ndarray | None = None) -> float:
    """L^2 norm of a profile or snapshot."""
    if isinstance(obj, EnsembleSnapshot):
        beta = obj.beta
        if weights is None:
            weights = obj.weights
        if weights is None:
            h = beta[1] - beta[0]
            if not np.allclose(np.diff(beta), h):
                raise ValueError("weights required for a non-uniform grid")
            weights = _simpson_weights(beta.size, h)
        return float(np.sqrt(np.sum(weights * np.sum(obj.states ** 2, axis=1))))
    nodes, w = segment_quadrature(obj)
    vals = obj(nodes)
    return float(np.sqrt(np.sum(w * np.sum(vals * vals, axis=1))))
