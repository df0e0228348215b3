import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracobs import (
    ConstraintPair,
    DomainError,
    EigenFailure,
    GridMismatchError,
    OmegaGrid,
    SensorSpec,
    SpectralBasis,
    Subregion,
    TimeGrid,
    TimeQuadrature,
    decide_e_observability,
    membership,
    observability_gramian,
    project,
    regional_output,
    regional_state,
    restrict,
    strategic_sensor,
)

OMEGA = Subregion(0.25, 0.5)


class _Grid:
    """Bare stand-in for a subregion grid: ``n`` nodes with unit weights."""

    def __init__(self, n):
        self.nodes = np.arange(float(n))
        self.weights = np.ones(n)
        self.omega = None


def _pair(alpha, beta):
    return ConstraintPair(_Grid(len(alpha)), np.asarray(alpha, float), np.asarray(beta, float))


@pytest.fixture(scope="module")
def default_setup():
    basis = SpectralBasis(20)
    y0 = project(lambda x: np.sin(2 * np.pi * x), basis)
    w = OmegaGrid(OMEGA)
    return basis, y0, w, ConstraintPair.absolute_band(y0, w)


def test_membership_and_envelope_validation():
    c = _pair([0.0, -1.0], [1.0, 1.0])
    assert membership([0.5, 0.0], c)
    assert not membership([1.5, 0.0], c)
    assert membership([1.0 + 1e-13, 0.0], c, tol=1e-12)
    with pytest.raises(GridMismatchError):
        membership([0.0], c)
    with pytest.raises(DomainError):
        _pair([1.0], [0.0])


def test_trivial_kernel_is_yes():
    rep = decide_e_observability(np.diag([2.0, 1.0]), _pair([-1, -1], [1, 1]))
    assert rep.e_observable == "yes" and rep.method == "trivial-kernel"
    assert rep.kernel_dim == 0 and rep.gramian_rank == 2


def test_one_dimensional_kernel_hits_envelope():
    rep = decide_e_observability(np.diag([1.0, 0.0]), _pair([-1.0, 1.0], [1.0, 2.0]))
    assert rep.e_observable == "no" and rep.method == "interval"


def test_one_dimensional_kernel_misses_envelope_with_margin():
    rep = decide_e_observability(np.diag([1.0, 0.0]), _pair([0.5, 1.0], [1.0, 2.0]))
    assert rep.e_observable == "yes"
    assert rep.margin == pytest.approx(0.5, abs=1e-9)


def test_lp_decision_for_two_dimensional_kernel():
    M = np.diag([1.0, 0.0, 0.0])
    rep = decide_e_observability(M, _pair([0.2, -1.0, -1.0], [1.0, 1.0, 1.0]))
    assert rep.e_observable == "yes" and rep.method == "lp"
    assert rep.margin == pytest.approx(0.2, abs=1e-9)
    rep = decide_e_observability(M, _pair([-0.2, 0.5, 0.5], [1.0, 1.0, 1.0]))
    assert rep.e_observable == "no"


def test_cone_decision_when_zero_is_admissible():
    M = np.diag([1.0, 0.0, 0.0])
    rep = decide_e_observability(M, _pair([-1.0, 0.0, -1.0], [1.0, 1.0, 0.0]))
    assert rep.e_observable == "no" and rep.method == "lp-cone"
    M = np.diag([0.0, 0.0, 1.0, 1.0])
    rep = decide_e_observability(M, _pair([0.0, 0.0, -1.0, -1.0], [0.0, 0.0, 1.0, 1.0]))
    assert rep.e_observable == "yes" and rep.method == "lp-cone"


def test_bad_inputs():
    with pytest.raises(GridMismatchError):
        decide_e_observability(np.eye(3), _pair([0, 0], [1, 1]))
    with pytest.raises(EigenFailure):
        decide_e_observability(np.array([[np.nan, 0], [0, 1.0]]), _pair([0, 0], [1, 1]))


@settings(max_examples=60, deadline=None)
@given(
    v=arrays(float, 4, elements=st.floats(-2, 2)),
    lo=arrays(float, 4, elements=st.floats(-3, 3)),
    width=arrays(float, 4, elements=st.floats(0.0, 3.0)),
)
def test_one_dimensional_kernel_against_scan(v, lo, width):
    assume(np.linalg.norm(v) > 0.1)
    u = v / np.linalg.norm(v)
    P = np.eye(4) - np.outer(u, u)  # kernel spanned by v
    rep = decide_e_observability(P, _pair(lo, lo + width))
    scales = np.linspace(-50, 50, 20001)
    scales = scales[np.abs(scales) > 1e-6]
    pts = scales[:, None] * u[None, :]
    found = np.any(np.all((pts >= lo - 1e-12) & (pts <= lo + width + 1e-12), axis=1))
    if found:
        assert rep.e_observable == "no"
    if rep.e_observable == "yes" and rep.margin > 1e-6:
        assert not found


def test_strategic_sensor_on_default_configuration(default_setup):
    basis, y0, w, c = default_setup
    ok, rep = strategic_sensor(SensorSpec.pointwise(1 / 3), 0.6, w, c, 1.0, basis)
    assert ok and rep.e_observable == "yes"
    assert rep.method == "lp" and rep.margin > 0.1
    assert rep.gramian_min_eig >= -1e-10
    # far more kernel directions than the rank, yet no kernel element fits the envelopes
    assert rep.kernel_dim > rep.gramian_rank


def test_nodal_sensor_misses_its_mode():
    w = OmegaGrid(OMEGA)
    basis = SpectralBasis(modes=(2,))
    y0 = project(lambda x: np.sin(2 * np.pi * x), SpectralBasis(20))
    c = ConstraintPair.absolute_band(y0, w)
    ok, rep = strategic_sensor(SensorSpec.pointwise(0.5), 0.6, w, c, 1.0, basis)
    assert not ok and rep.e_observable == "no"
    assert rep.gramian_rank == 0


@pytest.mark.parametrize("n", [1, 3, 5])
def test_full_domain_zone_sensor(default_setup, n):
    _, _, w, c = default_setup
    ok, _ = strategic_sensor(SensorSpec.zone(0.0, 1.0), 0.6, w, c, 1.0, SpectralBasis(n))
    assert ok


def test_whole_domain_subregion(default_setup):
    basis, y0, _, _ = default_setup
    wf = OmegaGrid(Subregion(0.0, 1.0))
    cf = ConstraintPair.absolute_band(y0, wf)
    ok, rep = strategic_sensor(SensorSpec.pointwise(0.3183), 0.6, wf, cf, 1.0, basis)
    assert ok and rep.margin > 0.0


def test_report_serialisation(default_setup):
    basis, _, w, c = default_setup
    _, rep = strategic_sensor(SensorSpec.pointwise(1 / 3), 0.6, w, c, 1.0, basis)
    d = json.loads(rep.to_json())
    assert {"min_eig", "max_eig", "rank", "kernel_dim", "e_observable", "margin", "method"} <= set(d)
    assert d["kernel_dim"] == rep.kernel_dim


def test_gramian_energy_and_symmetry(default_setup):
    basis, y0, w, _ = default_setup
    tq = TimeQuadrature(1.0)
    gram = observability_gramian(0.6, SensorSpec.pointwise(1 / 3), w, tq, basis)
    assert np.array_equal(gram.matrix, gram.matrix.T)
    g = restrict(y0, w)
    tr = regional_output(y0, 0.6, SensorSpec.pointwise(1 / 3), w, tq)
    # the trace sits on the quadrature nodes in the direct convention
    assert gram.energy(g) == pytest.approx(np.sum(tq.weights * tr.values**2), rel=1e-12)
    assert g @ gram.matrix @ g == pytest.approx(gram.energy(g), rel=1e-12)


def test_regional_state_is_the_projected_restriction(default_setup):
    basis, y0, w, _ = default_setup
    r = regional_state(y0, w)
    # integrate chi y0 against phi_1 by adaptive quadrature
    from scipy import integrate

    want, _ = integrate.quad(lambda x: math.sin(2 * math.pi * x) * math.sqrt(2) * math.sin(math.pi * x), 0.25, 0.5)
    assert r.coefficients[0] == pytest.approx(want, abs=1e-14)


def test_regional_coefficient_closed_form(default_setup):
    basis, y0, w, _ = default_setup
    tr = regional_output(y0, 0.6, SensorSpec.pointwise(1 / 3), w, TimeGrid(1.0, 10))
    assert tr.modal_amplitudes[0] == pytest.approx((4 * math.sqrt(3) - math.sqrt(6)) / (6 * math.pi), abs=1e-12)
