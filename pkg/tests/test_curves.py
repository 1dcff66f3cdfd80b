import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kobvis.curves import (
    ball_box_scale,
    chord_arc_ratio,
    embed_curve,
    horizontal_connect,
    integrate_tangential_curve,
    missing_component,
    offset_curve,
    sample_nearby_boundary,
    tangential_curve_with_chord_arc,
    tangential_field,
)
from kobvis.errors import EtaTooLarge, LeftNeighborhood, NodeOutsideAmbient, SelectionDegenerate
from kobvis.geometry import boundary_project, retract_to_boundary, slice_domain
from kobvis.metric import SampledCurve, curve_kappa_length, disc_search_provider


@pytest.fixture(scope="module")
def base(model_slice):
    return integrate_tangential_curve(model_slice, np.zeros(2), 0.2, 1e-3, neighborhood=0.45)


def test_field_at_origin(model_slice):
    assert np.allclose(tangential_field(model_slice, np.zeros(2)), [0, 1])


def test_field_matches_hand_solution(model_slice):
    q = sample_nearby_boundary(model_slice, np.zeros(2), 1, 0.05, seed=3)[0]
    g = model_slice.rho.grad_z(q)
    # solve g1 v1 + g2 v2 = 0 with v2 real positive, then normalise
    v = np.array([-g[1] / g[0], 1.0])
    v /= np.linalg.norm(v)
    assert np.allclose(tangential_field(model_slice, q), v, atol=1e-12)
    assert np.linalg.norm(v - [0, 1]) <= 5 * np.linalg.norm(q)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_field_is_complex_tangent(seed):
    from kobvis.domains import builtin

    model = builtin("model_nonpsc")
    q = sample_nearby_boundary(model, np.zeros(2), 1, 0.2, seed=seed)[0]
    v = tangential_field(model, q)
    g = model.rho.grad_z(q)
    assert abs(np.sum(g * v)) <= 1e-10
    assert abs(v[1].imag) == 0 and v[1].real > 0
    assert np.linalg.norm(v) == pytest.approx(1, abs=1e-12)


def test_field_degenerate_selection(ball):
    with pytest.raises(SelectionDegenerate):
        tangential_field(ball, np.array([0, 1]))


def test_integral_curve_examples(base, model_slice):
    assert np.allclose(base.nodes[0], 0) and np.allclose(base.derivs[0], [0, 1])
    assert np.max(base.rho_residual) <= 1e-8
    assert np.allclose(np.linalg.norm(base.derivs, axis=1), 1, atol=1e-4)
    speed = np.linalg.norm(base.derivs, axis=1)
    assert np.max(base.horizontality / speed) <= 1e-6
    # first-order agreement with the Taylor step p + t (0, 1)
    h = base.t[1]
    assert np.linalg.norm(base.nodes[1] - h * np.array([0, 1])) <= 2 * h**2
    assert base.curve.derivative_mismatch() < 0.05


def test_integral_curve_zero_length(model_slice):
    c = integrate_tangential_curve(model_slice, np.zeros(2), 0.0, 1e-3)
    assert len(c.t) == 1 and c.length == 0


def test_chord_arc_bound(base, model_slice):
    assert chord_arc_ratio(base) <= 1.05
    c = tangential_curve_with_chord_arc(model_slice, np.zeros(2), 0.2, 1e-3, 0.05, 6)
    assert chord_arc_ratio(c) <= 1.05 and c.length <= 0.2


def test_integral_curve_leaves_neighbourhood(model_slice):
    with pytest.raises(LeftNeighborhood):
        integrate_tangential_curve(model_slice, np.zeros(2), 0.2, 1e-3, neighborhood=0.05)


def test_missing_component_examples(model_slice):
    p = np.zeros(2)
    assert missing_component(model_slice, p, np.array([0.01j, 0])) == pytest.approx(0.01)
    assert missing_component(model_slice, p, np.array([0, 0.3 + 0.1j])) == 0
    assert ball_box_scale(model_slice, p, np.array([0.01j, 0])) == pytest.approx(0.01 + 0.1)


def test_connect_same_point(model_slice):
    c = horizontal_connect(model_slice, np.zeros(2), np.zeros(2))
    assert c.length == 0 and c.residual == 0


def test_connect_recovers_single_flow(base, model_slice):
    q = base.nodes[100]
    c = horizontal_connect(model_slice, np.zeros(2), q, neighborhood=0.45)
    assert c.residual <= 1e-5
    assert c.length == pytest.approx(base.t[100], rel=1e-3)


def test_connect_generic_target(model_slice):
    p = np.zeros(2)
    q = sample_nearby_boundary(model_slice, p, 1, 0.05, seed=11)[0]
    c = horizontal_connect(model_slice, p, q, neighborhood=0.45)
    assert c.residual <= 1e-5
    assert np.allclose(c.curve.nodes[0], p) and np.linalg.norm(c.curve.nodes[-1] - q) <= 1e-5
    assert np.max(c.curve.rho_residual) <= 1e-8
    assert np.max(c.curve.horizontality) <= 1e-6
    assert c.evaluations <= 600
    # the horizontal length dominates the Euclidean chord
    assert c.length >= np.linalg.norm(q - p) - 1e-9


def test_offset_examples(base, model):
    off = offset_curve(base, 1e-2)
    assert np.allclose(off.nodes[0], [-1e-2, 0], atol=1e-6)
    small = offset_curve(base, 1e-4)
    assert np.max(np.linalg.norm(small.nodes - base.nodes, axis=1)) == pytest.approx(1e-4, rel=1e-9)
    for k in range(0, len(base.t), 40):
        _, d = boundary_project(model, off.nodes[k])
        assert 0.95 * 1e-2 <= d <= 1.05 * 1e-2
    assert off.curve.derivative_mismatch() < 0.05


def test_offset_too_large(base, model_slice):
    with pytest.raises(EtaTooLarge):
        offset_curve(base, model_slice.collar_eta0)


def test_embed_identity_slice(base, model_slice):
    off = offset_curve(base, 1e-2)
    emb = embed_curve(off, model_slice)
    assert np.allclose(emb.nodes, off.nodes) and np.allclose(emb.derivs, off.curve.derivs)


def test_embed_ball3_slice(ball3):
    p = np.array([1, 0, 0], dtype=complex)
    sl = slice_domain(ball3, p, np.array([0, 1, 0]), 0.5)
    w = retract_to_boundary(sl, np.array([-0.05, 0.2j]))
    curve = SampledCurve.segment(w + np.array([-0.1, 0]), w + np.array([-0.1, 0.05]), nodes=5)
    emb = embed_curve(curve, sl)
    assert np.allclose(emb.nodes[:, 2], 0) and np.allclose(emb.derivs[:, 2], 0)
    outside = SampledCurve.segment(np.array([0.5, 0]), np.array([0.5, 0.1]), nodes=3)
    with pytest.raises(NodeOutsideAmbient):
        embed_curve(outside, sl)


def test_embedding_does_not_increase_length(ball3):
    p = np.array([1, 0, 0], dtype=complex)
    sl = slice_domain(ball3, p, np.array([0, 1, 0]), 0.5)
    curve = SampledCurve.segment(np.array([-0.3, 0]), np.array([-0.3, 0.2j]), nodes=5)
    inner = curve_kappa_length(disc_search_provider(sl), curve)
    outer = curve_kappa_length(disc_search_provider(ball3), embed_curve(curve, sl))
    assert outer <= inner * (1 + 1e-5)
