import json
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import twostep.riccati as ric
from twostep.exceptions import DimensionMismatch, InvalidSize, MaxIterations
from twostep.quadrature import composite_gl4
from twostep.solver import SolveOptions, two_step_newton


@pytest.fixture(scope="module")
def small():
    """(alpha, c, n) = (1/2, 1/3, 64) solved with all iterates kept."""
    p = ric.TransportParameters(F(1, 2), F(1, 3), 64)
    d = ric.build_data(p)
    return d, ric.solve_minimal(p, data=d, record_iterates=True)


# --- parameters and data ---------------------------------------------------


@pytest.mark.parametrize("alpha, c", [(1.0, 0.5), (-0.1, 0.5), (0.5, 0.0), (0.5, 1.1)])
def test_parameter_ranges(alpha, c):
    with pytest.raises(ValueError):
        ric.TransportParameters(alpha, c, 8)


@pytest.mark.parametrize("n", [5, 0, 1022])
def test_invalid_n(n):
    with pytest.raises(InvalidSize):
        ric.TransportParameters(0.5, 0.5, n)


def test_L_beta_is_exact_for_rationals():
    assert ric.TransportParameters(F(1, 4), F(2, 5), 8).L_beta == F(1, 2)
    assert ric.TransportParameters(F(1, 4), F(1, 3), 8).L_beta == F(5, 12)


def test_build_data_formulas():
    d = ric.build_data(ric.TransportParameters(F(1, 2), F(1, 3), 4))
    w = composite_gl4(4).nodes
    np.testing.assert_allclose(d.delta, 2.0 / w, rtol=1e-15)
    np.testing.assert_allclose(d.gamma, 6.0 / w, rtol=1e-15)
    np.testing.assert_allclose(d.q, composite_gl4(4).weights / (2 * w), rtol=1e-15)
    for i in range(4):
        for j in range(4):
            assert d.P[i, j] == pytest.approx(d.q[j] / (d.delta[i] + d.gamma[j]), rel=1e-15)
            assert d.Pt[i, j] == pytest.approx(d.q[j] / (d.gamma[i] + d.delta[j]), rel=1e-15)
            assert d.T[i, j] == pytest.approx(1 / (d.delta[i] + d.gamma[j]), rel=1e-15)


def test_symmetric_case():
    d = ric.build_data(ric.TransportParameters(0.0, 0.7, 8))
    np.testing.assert_array_equal(d.delta, d.gamma)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.999), st.floats(0.001, 1.0), st.integers(1, 64))
def test_row_sum_bounds(alpha, c, m):
    d = ric.build_data(ric.TransportParameters(alpha, c, 4 * m))
    assert d.P.sum(axis=1).max() < c * (1 - alpha) / 2
    assert d.Pt.sum(axis=1).max() < c * (1 + alpha) / 2
    assert np.all(d.delta > 0) and np.all(d.gamma > 0) and np.all(d.q > 0)


# --- f and its Jacobian ----------------------------------------------------


def test_f_at_origin():
    d = ric.build_data(ric.TransportParameters(0.5, 0.5, 8))
    f = ric.f_eval(d, np.zeros(8), np.zeros(8))
    np.testing.assert_array_equal(f, -np.ones(16))


def test_f_at_unit_u():
    d = ric.build_data(ric.TransportParameters(0.5, 0.5, 8))
    f = ric.f_eval(d, np.ones(8), np.zeros(8))
    np.testing.assert_array_equal(f[:8], 0.0)
    np.testing.assert_array_equal(f[8:], -1.0)


def test_dimension_checks():
    d = ric.build_data(ric.TransportParameters(0.5, 0.5, 8))
    with pytest.raises(DimensionMismatch):
        ric.f_eval(d, np.zeros(4), np.zeros(8))
    with pytest.raises(DimensionMismatch):
        ric.assemble_X(d, np.zeros(8), np.zeros(9))
    with pytest.raises(DimensionMismatch):
        ric.ricc_residual(d, np.zeros((8, 7)))
    with pytest.raises(DimensionMismatch):
        ric.res_metric(np.zeros(3), np.zeros(4), np.zeros(3), np.zeros(3))


def test_jacobian_at_origin_is_identity():
    d = ric.build_data(ric.TransportParameters(0.5, 0.5, 8))
    g1, g2, H1, H2 = ric.jacobian_blocks(d, np.zeros(8), np.zeros(8))
    assert not (g1.any() or g2.any() or H1.any() or H2.any())
    np.testing.assert_array_equal(ric.jacobian(d, np.zeros(8), np.zeros(8)), np.eye(16))


def test_H1_at_unit_u_is_P():
    d = ric.build_data(ric.TransportParameters(0.5, 0.5, 8))
    _, _, H1, _ = ric.jacobian_blocks(d, np.ones(8), np.zeros(8))
    np.testing.assert_array_equal(H1, d.P)


def block_action(d, u, v, du, dv):
    """(I - G) applied to (du, dv) using the block form."""
    g1, g2, H1, H2 = ric.jacobian_blocks(d, u, v)
    return np.concatenate([du - g1 * du - H1 @ dv, dv - g2 * dv - H2 @ du])


@pytest.mark.parametrize("seed", range(10))
def test_jacobian_finite_difference(seed):
    rng = np.random.default_rng(seed)
    d = ric.build_data(ric.TransportParameters(0.5, 1 / 3, 16))
    u, v = rng.uniform(0.5, 3.0, 16), rng.uniform(0.5, 3.0, 16)
    du, dv = rng.uniform(-1, 1, 16), rng.uniform(-1, 1, 16)
    h = 1e-6
    fd = (ric.f_eval(d, u + h * du, v + h * dv) - ric.f_eval(d, u - h * du, v - h * dv)) / (2 * h)
    np.testing.assert_allclose(fd, block_action(d, u, v, du, dv), rtol=0, atol=1e-6)
    np.testing.assert_allclose(ric.jacobian(d, u, v) @ np.concatenate([du, dv]), block_action(d, u, v, du, dv), atol=1e-14)


# --- Res, X and the Riccati residual ----------------------------------------


def test_res_metric_examples():
    e, z = np.ones(5), np.zeros(5)
    assert ric.res_metric(e, e, e, e) == 0.0
    assert ric.res_metric(z, e, e, e) == 1.0
    rng = np.random.default_rng(0)
    a, b, c, dd = (rng.uniform(1, 2, 5) for _ in range(4))
    assert ric.res_metric(10 * a, 10 * b, 10 * c, 10 * dd) == pytest.approx(ric.res_metric(a, b, c, dd), rel=1e-15)


def test_res_metric_zero_denominator_falls_back_to_absolute():
    z = np.zeros(3)
    assert ric.res_metric(np.full(3, 0.25), z, z, z) == 0.25


def test_assemble_X_identity():
    d = ric.build_data(ric.TransportParameters(0.25, 0.4, 8))
    rng = np.random.default_rng(1)
    u, v = rng.uniform(1, 2, 8), rng.uniform(1, 2, 8)
    np.testing.assert_allclose(ric.assemble_X(d, u, v), np.diag(u) @ d.T @ np.diag(v), rtol=1e-15)
    assert not ric.assemble_X(d, np.zeros(8), np.zeros(8)).any()


def dense_residual(d, X):
    A, B, C, D = d.coefficients()
    return np.abs(X @ C @ X - X @ D - A @ X + B).sum(axis=1).max()


def test_ricc_residual_of_zero_is_n():
    d = ric.build_data(ric.TransportParameters(0.25, 0.4, 8))
    assert ric.ricc_residual(d, np.zeros((8, 8))) == 8.0


def test_ricc_residual_matches_dense_form():
    d = ric.build_data(ric.TransportParameters(0.25, 0.4, 12))
    X = np.random.default_rng(2).uniform(0, 1, (12, 12))
    assert ric.ricc_residual(d, X) == pytest.approx(dense_residual(d, X), rel=1e-13)


def test_converged_solution(small):
    d, sol = small
    assert ric.ricc_residual(d, sol.X) <= 1e-12
    assert sol.riccati_residual == ric.ricc_residual(d, sol.X)
    assert dense_residual(d, sol.X) <= 1e-12
    assert np.abs(ric.f_eval(d, sol.u, sol.v)).max() <= 1e-13
    assert np.all(sol.u > 1) and np.all(sol.v > 1) and np.all(sol.X > 0)


def test_residual_sensitivity(small):
    d, sol = small
    X = sol.X.copy()
    X[3, 5] += 1e-3
    assert ric.ricc_residual(d, X) > 1e-6


# --- the solve -------------------------------------------------------------


def test_monotone_positive_iterates(small):
    _, sol = small
    for (u0, v0), (u1, v1) in zip(sol.iterates[1:], sol.iterates[2:]):
        # the last step is pure round-off and may move a component by an ulp or two
        assert np.all(u1 >= u0 - 8 * ric.EPS * u0) and np.all(v1 >= v0 - 8 * ric.EPS * v0)
    assert all(np.all(u > 0) and np.all(v > 0) for u, v in sol.iterates[1:])


def test_res_history_decreases(small):
    _, sol = small
    h = sol.res_history
    assert all(b < a for a, b in zip(h, h[1:]))
    assert h[-1] <= ric.default_tolerance(64)
    assert sol.iterations == len(h) == len(sol.iterates) - 1


def test_certificate_containment(small):
    _, sol = small
    assert max(sol.u.max(), sol.v.max()) <= sol.t_star


def test_generic_solver_matches_block_elimination(small):
    d, sol = small
    opts = SolveOptions(record_iterates=True, step_tol=1e-300, residual_tol=1e-300, max_iter=len(sol.iterates) - 1)
    try:
        _, trace = two_step_newton(ric.as_problem(d), opts)
    except MaxIterations as exc:
        trace = exc.trace
    for k, ((u, v), w) in enumerate(zip(sol.iterates, trace.iterates)):
        np.testing.assert_allclose(w, np.concatenate([u, v]), rtol=0, atol=1e-14, err_msg=f"iterate {k}")


def test_plain_newton_takes_more_iterations():
    p = ric.TransportParameters(F(1, 2), F(1, 9), 64)
    assert ric.solve_minimal(p, plain_newton=True).iterations > ric.solve_minimal(p).iterations


def test_max_iterations_carries_partial_solution():
    with pytest.raises(MaxIterations) as info:
        ric.solve_minimal(ric.TransportParameters(0.5, 0.3, 32), max_iter=2)
    partial = info.value.trace
    assert partial.iterations == 2 and len(partial.res_history) == 2


def test_default_tolerance():
    assert ric.default_tolerance(1024) == 16 * 2.0**-52
    assert ric.EPS == 2.220446049250313e-16


def test_serialization(small):
    _, sol = small
    doc = json.loads(json.dumps(sol.to_dict()))
    assert list(doc) == ["alpha", "c", "n", "L_beta", "iterations", "res_history", "riccati_residual", "t_star", "wall_time_s"]
    assert doc["L_beta"] == 0.5 and doc["n"] == 64


def test_write_matrix_csv(tmp_path, small):
    _, sol = small
    path = tmp_path / "x.csv"
    ric.write_matrix_csv(sol.X, path)
    np.testing.assert_array_equal(np.loadtxt(path, delimiter=","), sol.X)


# --- instance certificates -------------------------------------------------


def test_instance_certificate_boundary():
    cert = ric.instance_certificate(ric.TransportParameters(F(1, 2), F(1, 3), 8))
    assert cert.criterion_holds and not cert.cubic_holds
    assert cert.t_star == 2.0


def test_instance_certificate_cubic():
    p = ric.TransportParameters(F(1, 4), F(1, 3), 8)
    assert p.L_beta == F(5, 12)
    assert ric.instance_certificate(p).cubic_holds


def test_instance_certificate_radius():
    p = ric.TransportParameters(F(1, 2), F(2, 9), 8)
    assert p.L_beta == F(1, 3)
    Lb = 1 / 3
    assert ric.instance_certificate(p).t_star == pytest.approx((1 - math.sqrt(1 - 2 * Lb)) / Lb, rel=1e-14)


def test_criterion_failure_reported():
    cert = ric.instance_certificate(ric.TransportParameters(0.5, 0.5, 8))
    assert not cert.criterion_holds and cert.t_star is None
