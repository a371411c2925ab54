import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from oscilla.geometry import PeriodicProfile, SourceFunction, TabulatedSource
from oscilla.homogenized1d import compute_fhat_f0, homogenized_forms, solve_w0

x = np.linspace(0.0, 1.0, 41)


def test_constant_source():
    sol = solve_w0(SourceFunction((1.0,)), 0.6)
    w, d1, d2, d3, d4 = sol.derivatives(x)
    np.testing.assert_allclose(w, 1.0, atol=1e-15)
    for d in (d1, d2, d3, d4):
        np.testing.assert_allclose(d, 0.0, atol=1e-15)


def test_cosine_closed_form():
    r = 0.58
    sol = solve_w0(SourceFunction((0.0, 1.0)), r)
    c = 1 / (1 + r * np.pi**2)
    np.testing.assert_allclose(sol(x), c * np.cos(np.pi * x), atol=1e-15)
    w = sol.derivatives(x)
    np.testing.assert_allclose(w[1], -np.pi * c * np.sin(np.pi * x), atol=1e-14)
    np.testing.assert_allclose(w[3], np.pi**3 * c * np.sin(np.pi * x), atol=1e-13)


def test_unit_coefficient_curvature():
    w2 = solve_w0(SourceFunction((0.0, 1.0)), 1.0).derivatives(np.array([0.0]))[2]
    assert w2[0] == pytest.approx(-np.pi**2 / (1 + np.pi**2), rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(coeffs=st.lists(st.floats(-2, 2), min_size=1, max_size=5), r=st.floats(0.05, 3.0))
def test_equation_and_neumann_conditions(coeffs, r):
    src = SourceFunction(tuple(coeffs))
    w = solve_w0(src, r).derivatives(x)
    scale = 1 + np.abs(coeffs).sum()
    np.testing.assert_allclose(-r * w[2] + w[0], src.value(x), atol=1e-12 * scale)
    np.testing.assert_allclose(w[1][[0, -1]], 0.0, atol=1e-12 * scale)


def test_rejects_nonpositive_r():
    for r in (0.0, -1.0, float("nan")):
        with pytest.raises(ValueError):
            solve_w0(SourceFunction((1.0,)), r)


def test_fem1d_converges_at_second_order():
    src = SourceFunction((0.0, 1.0, 0.3))
    exact = solve_w0(src, 0.7)
    nodes = np.linspace(0, 1, 17)
    gaps = []
    for N in (32, 64, 128):
        approx = solve_w0(src, 0.7, method="fem1d", elements=N)
        gaps.append(np.max(np.abs(approx(nodes) - exact(nodes))))
    ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
    assert np.all(ratios > 3.5)


def test_fem1d_derivative_recovery():
    src = SourceFunction((0.2, 1.0))
    exact = solve_w0(src, 0.5).derivatives(x)
    approx = solve_w0(src, 0.5, method="fem1d", elements=512).derivatives(x)
    np.testing.assert_allclose(approx[0], exact[0], atol=1e-5)
    np.testing.assert_allclose(approx[2], exact[2], atol=1e-4)
    np.testing.assert_allclose(approx[1], exact[1], atol=1e-2)


def test_tabulated_source_uses_fem1d():
    src = TabulatedSource.from_function(lambda t: np.cos(np.pi * t), 201)
    sol = solve_w0(src, 0.5)
    assert sol.kind == "fem1d"
    exact = np.cos(np.pi * x) / (1 + 0.5 * np.pi**2)
    np.testing.assert_allclose(sol(x), exact, atol=1e-4)
    with pytest.raises(TypeError):
        solve_w0(src, 0.5, method="spectral")


def test_fhat_values(cosine_profile, cos_source):
    fhat, f0 = compute_fhat_f0(cosine_profile, 1 / 8, cos_source)
    assert f0 is cos_source
    assert fhat(0.0) == pytest.approx(3.0)
    assert fhat(1 / 16) == pytest.approx(np.cos(np.pi / 16))
    assert fhat(0.5) == pytest.approx(0.0, abs=1e-15)


def test_fhat_weak_limit(cosine_profile, cos_source):
    # int fhat psi -> mean(g) int f psi, by an independent adaptive quadrature
    psi = lambda t: 1 + t**2
    limit = 2.0 * quad(lambda t: np.cos(np.pi * t) * psi(t), 0, 1)[0]
    errs = []
    for k in (8, 16, 32, 64):
        fhat, _ = compute_fhat_f0(cosine_profile, 1 / k, cos_source)
        val = quad(lambda t: fhat(t) * psi(t), 0, 1, limit=400)[0]
        errs.append(abs(val - limit))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_homogenized_forms():
    r = 0.6
    sol = solve_w0(SourceFunction((0.0, 1.0)), r)
    a0, inner0 = homogenized_forms(sol, 2.0)
    w = lambda t: sol.derivatives(t)[:2]
    rng = np.random.default_rng(3)
    nodes = np.linspace(0, 1, 9)
    for _ in range(3):
        vals = rng.standard_normal(9)
        phi = lambda t, v=vals: (np.interp(t, nodes, v),
                                 np.diff(v)[np.clip((t * 8).astype(int), 0, 7)] * 8)
        f = lambda t: (np.cos(np.pi * t), None)
        # weak form of the homogenized equation: a0(w0, phi) = (f, phi)_0
        assert a0(w, phi) == pytest.approx(inner0(f, phi), rel=1e-9, abs=1e-12)
    one = lambda t: (np.ones_like(t), np.zeros_like(t))
    assert inner0(one, one) == pytest.approx(2.0, rel=1e-14)
