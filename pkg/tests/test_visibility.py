import numpy as np
import pytest

from kobvis.config import ExperimentConfig
from kobvis.curves import BoundaryCurve, integrate_tangential_curve, offset_curve
from kobvis.errors import FitMissing, NoNonPseudoconvexPoint, PreconditionError
from kobvis.metric import SampledCurve, exact_provider
from kobvis.visibility import (
    FittedConstants,
    arc_indices,
    claim_check,
    comparability_check,
    find_nonpsc_point,
    geodesic_defect,
    lemma22_check,
    spread,
    visibility_violation_experiment,
)

QUICK = ExperimentConfig(eta_grid=(1e-2, 1e-3), s=0.1, arc_points=4, nodes_per_interval=4)


@pytest.fixture(scope="module")
def radial(ball):
    curve = SampledCurve.segment(np.zeros(2), np.array([0.9, 0]), nodes=73)
    return curve, geodesic_defect(curve, ball, exact_provider("exact_ball", ball), 0.5, arc_points=10)


def test_ball_radial_defect_matches_closed_form(radial):
    _, rep = radial
    r = np.linspace(0, 0.9, 10)
    i, j = np.triu_indices(10, 1)
    oracle = np.max((np.arctanh(r[j]) - np.arctanh(r[i])) / ((r[j] - r[i]) / 2))
    assert len(rep.rows) == 45
    assert rep.lambda_hat == pytest.approx(oracle, rel=1e-4)
    assert np.isfinite(rep.lambda_hat)


def test_defect_report_replays(radial):
    _, rep = radial
    assert rep.replay() and rep.flags["replay"]
    assert all(r["l_kappa_upper"] <= rep.lambda_hat * r["k_lower"] * (1 + 1e-12) for r in rep.rows)
    assert all(r["l_kappa_upper"] <= r["k_lower"] + rep.eps_hat + 1e-12 for r in rep.rows)
    assert all(r["t1"] < r["t2"] for r in rep.rows)
    rep.rows[0]["l_kappa_upper"] *= 10
    assert not rep.replay()
    rep.rows[0]["l_kappa_upper"] /= 10


def test_defect_c1_on_radial_segment(radial):
    curve, rep = radial
    # speed is 0.9 and the exact metric along the segment peaks at the far end
    assert rep.c1 == pytest.approx(1 / (1 - 0.81), rel=1e-9)


def test_arc_grid_validation():
    assert list(arc_indices(73, 10)) == list(range(0, 73, 8))
    with pytest.raises(ValueError):
        arc_indices(70, 10)
    with pytest.raises(ValueError):
        arc_indices(28, 10)


def test_comparability_orderings(radial, ball):
    curve, rep = radial
    table = comparability_check(curve, ball, exact_provider("exact_ball", ball), 0.5, report=rep)
    assert table.chord_below_length and table.bounds_ordered
    assert table.r_measured >= 1
    assert all(r["chord"] <= r["l_e"] * (1 + 1e-9) for r in table.rows)


def test_lemma22_constant_curve(model_slice):
    c = SampledCurve(np.linspace(0, 1, 5), np.zeros((5, 2)), np.zeros((5, 2)))
    base = BoundaryCurve(model_slice, c, 0.0)
    out = lemma22_check(base, offset_curve(base, 1e-2))
    assert out == {"max_h_ratio": 0.0, "max_n_ratio": 0.0, "max_base_normal": 0.0}


def test_lemma22_base_is_tangential(model_slice):
    base = integrate_tangential_curve(model_slice, np.zeros(2), 0.1, 1e-3).subsample(10)
    res = [lemma22_check(base, offset_curve(base, eta)) for eta in (1e-2, 1e-3)]
    assert all(r["max_base_normal"] <= 1e-6 for r in res)
    assert spread([r["max_h_ratio"] for r in res]) <= 2
    other = integrate_tangential_curve(model_slice, np.zeros(2), 0.05, 1e-3)
    with pytest.raises(PreconditionError):
        lemma22_check(other, offset_curve(base, 1e-2))


def test_spread_floor():
    assert spread([0.0, 1e-12], 1e-10) == 1.0
    assert spread([0.0, 1.0], 1e-10) == np.inf
    assert spread([1.0, 3.0]) == 3.0


def test_claim_rejects_zero_length_base(model_slice):
    c = SampledCurve([0.0], np.zeros((1, 2)), np.array([[0, 1]]))
    with pytest.raises(PreconditionError):
        claim_check(model_slice, BoundaryCurve(model_slice, c, 0.0), (1e-2,))


def test_claim_is_finite(model_slice):
    base = integrate_tangential_curve(model_slice, np.zeros(2), 0.05, 1e-3).subsample(10)
    res = claim_check(model_slice, base, (1e-2, 1e-3))
    assert np.isfinite(res.claim_k) and res.claim_k > 0
    assert res.spread <= 1.5


def test_pseudoconvex_domain_is_refused(ball):
    with pytest.raises(NoNonPseudoconvexPoint, match="no non-pseudoconvex boundary point found"):
        find_nonpsc_point(ball)
    with pytest.raises(NoNonPseudoconvexPoint):
        visibility_violation_experiment(ball, "lambda_zero", config=QUICK)


def test_constants_missing_and_roundtrip(model, tmp_path):
    with pytest.raises(FitMissing):
        FittedConstants.load(tmp_path / "constants.json")
    with pytest.raises(FitMissing):
        visibility_violation_experiment(model, "one_eps", config=QUICK)
    c = FittedConstants("model_nonpsc", 1.0, 2.5, 2.0, 1.4, 0.43, 3.1, 3.1, 2.0, 0.0)
    c.save(tmp_path / "constants.json")
    assert FittedConstants.load(tmp_path / "constants.json") == c


@pytest.fixture(scope="module")
def quick_run(model):
    return visibility_violation_experiment(model, "lambda_zero", config=QUICK)


def test_quick_lambda_zero_run(quick_run):
    rep = quick_run
    assert rep.levi_eigenvalue == pytest.approx(-1, abs=1e-6)
    assert np.allclose(rep.direction, [0, 1])
    assert rep.verdict["violated"], rep.verdict["text"]
    assert rep.verdict["text"].startswith("visibility violated at level")
    for row in rep.per_eta:
        assert 0.95 <= row["collar_ratio_min"] <= row["collar_ratio_max"] <= 1.05
        assert row["max_delta"] <= 1.05 * row["eta"]
        assert row["replay"]
    assert len(rep.arcs) == len(QUICK.eta_grid) * 6


def test_quick_run_is_deterministic(model, quick_run):
    again = visibility_violation_experiment(model, "lambda_zero", config=QUICK, with_claim=False)
    assert again.arcs == quick_run.arcs
