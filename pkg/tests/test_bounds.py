"""Sampling-free truncation-error envelopes and the decay-rate optimizer."""

import numpy as np
import pytest

from momentctrl import (ControlSignal, DecayParams, build_moment_system,
                        expm, k_factor, l_tail, optimize_rho,
                        prototype_ensemble, scalar_tail_objective,
                        total_bound, truncate, w_envelope)


def test_l_tail_examples():
    rho = 0.3
    e_last = np.zeros(6)
    e_last[-1] = 1.0
    assert l_tail(e_last, rho) == pytest.approx(rho, abs=1e-15)
    assert l_tail(np.ones(3), 0.5) == pytest.approx(0.875, abs=1e-15)


def test_l_tail_shrinks_with_order():
    rng = np.random.default_rng(0)
    xi = rng.standard_normal(10)
    rho = 0.4
    vals = [l_tail(xi, rho, order) for order in range(10, 15)]
    for a, b in zip(vals, vals[1:]):
        assert b == pytest.approx(rho * a, rel=1e-13)
        assert b < a


def test_w_envelope_at_time_zero():
    p = DecayParams(chi=3.0, b=2, m_max=0.6)
    xi = np.array([1.0, -2.0, 0.5])
    expected = k_factor(0.0, p) * l_tail(xi, p.rho) / np.sqrt(1 - p.rho ** 2)
    assert w_envelope(0.0, xi, p) == pytest.approx(expected, rel=1e-13)


def test_w_envelope_refined_needs_tridiagonal():
    p = DecayParams(chi=2.0, b=4)
    with pytest.raises(ValueError):
        w_envelope(1.0, np.ones(4), p, refined=True)
    w_envelope(1.0, np.ones(4), p, refined=False)


def test_w_envelope_soundness_sweep():
    """W dominates the actual truncation error of the matrix exponential
    for random symmetric tridiagonal systems."""
    rng = np.random.default_rng(1)
    dim, N = 40, 10
    violations = 0
    for trial in range(10):
        main = rng.uniform(-1, 1, dim) if trial % 2 else np.zeros(dim)
        off = rng.uniform(-1, 1, dim - 1)
        A = np.diag(main) + np.diag(off, 1) + np.diag(off, -1)
        xi = rng.standard_normal(N)
        for chi in (1.5, 3.0, 10.0):
            p = DecayParams.for_matrix(A, chi)
            for t in (0.5, 1.0):
                full = expm(t * A) @ np.concatenate([xi, np.zeros(dim - N)])
                part = expm(t * truncate(A, N)) @ xi
                err = np.linalg.norm(full - np.concatenate(
                    [part, np.zeros(dim - N)]))
                violations += int(err > w_envelope(t, xi, p) + 1e-12)
    assert violations == 0


def test_optimize_rho_interior_for_flat_objective():
    chi, rho = optimize_rho(lambda chi: 1.0, b=2, chi_range=(1.5, 100.0))
    assert 1.5 < chi < 100.0
    assert rho == pytest.approx(chi ** -1.0, rel=1e-12)


def test_optimize_rho_matches_log_quadratic_argmin():
    obj = lambda chi: (np.log(chi) - np.log(5.0)) ** 2
    chi, _ = optimize_rho(obj, b=2)
    assert chi == pytest.approx(5.0, rel=1e-5)


def test_optimize_rho_benchmark_setting():
    p = DecayParams(chi=2.0, b=2, m_max=1 / np.sqrt(3), delta=2 / np.sqrt(3))
    chi, rho = optimize_rho(scalar_tail_objective(1.0, 12, p), b=2)
    assert abs(rho - 0.0478) < 0.005


def test_total_bound_term_structure():
    ens = prototype_ensemble(np.array([[1.0]]), np.array([[1.0]]))
    sys_ref = build_moment_system(ens, 30)
    rng = np.random.default_rng(2)
    m0 = np.concatenate([rng.standard_normal(8) * 0.5 ** np.arange(8),
                         np.zeros(22)])
    mF = np.concatenate([rng.standard_normal(8) * 0.5 ** np.arange(8),
                         np.zeros(22)])
    control = ControlSignal(1.0, rng.standard_normal(201))
    p = DecayParams.for_matrix(sys_ref.A, chi=10.0)
    terms = total_bound(sys_ref, control, m0, mF, 8, p)
    for key in ("free", "initial_tail", "forcing", "target_tail"):
        assert terms[key] >= 0.0
    assert terms["total"] == pytest.approx(
        terms["free"] + terms["initial_tail"] + terms["forcing"]
        + terms["target_tail"], rel=1e-12)
    assert terms["initial_tail"] == 0.0      # no mass beyond the reference
    assert terms["target_tail"] == 0.0
