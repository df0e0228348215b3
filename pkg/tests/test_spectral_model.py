import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from fracobs import (
    DomainError,
    GridMismatchError,
    SpaceGrid,
    SpectralBasis,
    SpectralState,
    TimeGrid,
    TimeQuadrature,
    adjoint_propagate,
    evaluate,
    mittag_leffler,
    project,
    propagate,
    residual_check,
    xi_density,
)
from fracobs.spectral_model import model_order, trajectory


def test_basis_and_eigenpairs():
    b = SpectralBasis(5)
    assert b.indices.tolist() == [1, 2, 3, 4, 5]
    assert b.eigenvalues[2] == pytest.approx(-9 * math.pi**2)
    x = np.linspace(0.0, 1.0, 2001)
    # orthonormality on [0, 1]
    G = integrate.trapezoid(b.phi(x)[:, None, :] * b.phi(x)[None, :, :], x)
    assert np.allclose(G, np.eye(5), atol=1e-5)


def test_explicit_modes():
    b = SpectralBasis(modes=(4, 2, 2))
    assert b.indices.tolist() == [2, 4]
    assert b.n_modes == 2
    with pytest.raises(DomainError):
        SpectralBasis(modes=(0,))
    with pytest.raises(DomainError):
        SpectralBasis(0)


def test_state_validation_and_readonly():
    b = SpectralBasis(3)
    with pytest.raises(GridMismatchError):
        SpectralState(b, [1.0, 2.0])
    s = SpectralState(b, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        s.coefficients[0] = 5.0
    with pytest.raises(DomainError):
        SpectralState.mode(b, 7)


def test_projection_of_single_mode():
    b = SpectralBasis(8)
    s = project(lambda x: np.sin(2 * np.pi * x), b)
    want = np.zeros(8)
    want[1] = 1.0 / math.sqrt(2.0)
    assert np.max(np.abs(s.coefficients - want)) < 1e-14


def test_projection_against_closed_form():
    # <x(1-x), sqrt2 sin(i pi x)> = 2 sqrt2 (1 - (-1)^i) / (i pi)^3
    b = SpectralBasis(10)
    s = project(lambda x: x * (1 - x), b, SpaceGrid(32))
    i = b.indices
    want = 2 * math.sqrt(2) * (1 - (-1.0) ** i) / (i * math.pi) ** 3
    assert np.max(np.abs(s.coefficients - want)) < 1e-14
    with pytest.raises(DomainError):
        SpaceGrid(8)


def test_evaluate_domain_and_endpoints():
    s = SpectralState(SpectralBasis(4), [1.0, -2.0, 0.5, 3.0])
    assert evaluate(s, 0.0) == 0.0
    assert evaluate(s, 1.0) == 0.0
    with pytest.raises(DomainError):
        evaluate(s, 1.01)
    x = np.array([0.2, 0.7])
    assert np.allclose(s(x), s.coefficients @ s.basis.phi(x))


def test_model_order_range():
    assert model_order(1.0) == 1.0
    for bad in (0.0, 1.2):
        with pytest.raises(DomainError):
            model_order(bad)


def test_propagate_single_mode():
    b = SpectralBasis(3)
    y0 = SpectralState.mode(b, 2)
    y = propagate(y0, 0.6, 0.3)
    e = mittag_leffler(0.6, -4 * math.pi**2 * 0.3**0.6).value
    assert y.coefficients[1] == pytest.approx(e, rel=1e-12)
    assert propagate(y0, 0.6, 0.0).coefficients.tolist() == y0.coefficients.tolist()


def test_heat_limit_is_exponential():
    b = SpectralBasis(4)
    y0 = SpectralState(b, [1.0, 1.0, 1.0, 1.0])
    y = propagate(y0, 1.0, 0.05)
    assert np.allclose(y.coefficients, np.exp(b.eigenvalues * 0.05), rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    a=arrays(float, 6, elements=st.floats(-5, 5)),
    c=arrays(float, 6, elements=st.floats(-5, 5)),
    q=st.floats(0.1, 1.0),
    t=st.floats(0.0, 2.0),
)
def test_adjoint_propagation_is_symmetric(a, c, q, t):
    b = SpectralBasis(6)
    u, v = SpectralState(b, a), SpectralState(b, c)
    lhs = propagate(u, q, t).coefficients @ v.coefficients
    rhs = u.coefficients @ adjoint_propagate(v, q, t).coefficients
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=arrays(float, 5, elements=st.floats(-5, 5)), q=st.floats(0.1, 1.0), t=st.floats(0.0, 3.0))
def test_propagation_contracts(a, q, t):
    y0 = SpectralState(SpectralBasis(5), a)
    assert propagate(y0, q, t).norm() <= y0.norm() * (1 + 1e-14) + 1e-300


def test_trajectory_shape():
    y0 = SpectralState(SpectralBasis(3), [1, 0, 1])
    assert trajectory(y0, 0.5, [0.0, 0.5, 1.0]).shape == (3, 3)


@pytest.mark.parametrize("q", [0.5, 0.6, 0.8])
def test_residual_decays_at_predicted_rate(q):
    y0 = SpectralState.mode(SpectralBasis(1), 1)
    steps = (250, 500, 1000, 2000)
    r = [residual_check(y0, q, TimeGrid(1.0, n), 0.3) for n in steps]
    order = -np.polyfit(np.log(steps), np.log(r), 1)[0]
    assert order >= min(2 - q, 1 + q) - 0.35


def test_residual_order_below_threshold_at_small_order():
    # the residual decays like dt^(1+q) for small q, which is below 1.9 - q when q < 0.45
    y0 = SpectralState.mode(SpectralBasis(1), 1)
    steps = (250, 500, 1000, 2000)
    r = [residual_check(y0, 0.3, TimeGrid(1.0, n), 0.3) for n in steps]
    order = -np.polyfit(np.log(steps), np.log(r), 1)[0]
    assert 1.0 < order < 1.6


def test_residual_probe_validation():
    y0 = SpectralState.mode(SpectralBasis(1), 1)
    with pytest.raises(DomainError):
        residual_check(y0, 0.5, TimeGrid(1.0, 10), 1.0)


def test_time_quadrature_integrates_singular_power():
    tq = TimeQuadrature(2.0)
    assert np.sum(tq.weights) == pytest.approx(2.0, rel=1e-14)
    for q in (0.2, 0.5, 0.9):
        w = tq.singular_weights(q)
        # int_0^2 u^(q-1) cos(u) du against adaptive quadrature with an algebraic weight
        want, _ = integrate.quad(np.cos, 0.0, 2.0, weight="alg", wvar=(q - 1.0, 0.0))
        assert np.sum(w * np.cos(tq.nodes)) == pytest.approx(want, rel=1e-11)


def test_time_quadrature_resolves_fast_modes():
    tq = TimeQuadrature(1.0)
    lam = 400 * math.pi**2
    assert np.sum(tq.weights * np.exp(-lam * tq.nodes)) == pytest.approx(-math.expm1(-lam) / lam, rel=1e-12)
    with pytest.raises(DomainError):
        TimeQuadrature(-1.0)


@pytest.mark.parametrize("q", [0.5, 0.7])
def test_subordination_integral_reproduces_propagator(q):
    lam = -math.pi**2
    for t in (0.05, 0.3, 1.0):
        r = lam * t**q

        def f(th):
            return xi_density(q, th, extended=True) * math.exp(r * th)

        val, _ = integrate.quad(f, 0.0, 30.0, limit=200, epsabs=1e-12)
        assert val == pytest.approx(mittag_leffler(q, r).value, abs=1e-9)
