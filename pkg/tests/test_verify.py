import numpy as np
import pytest

from quasinv.errors import DomainError
from quasinv.geometry import quasi_inversion
from quasinv.verify import (
    CHECKS, CheckReport, check_chordal_transfer, check_dilatation, check_inversion_distance_bound,
    check_projection_lipschitz, check_projection_lower_bound, check_ray_comparison,
    check_smooth_convergence, fourier_family, projection_lower_quantity, ray_comparison_terms,
    run_checks, superellipse_family, violates,
)
from quasinv.sampling import SpacePairs

FAST = [c for c in CHECKS if c != "quasi-inversion-metrics"]


def test_violates_relative_slack():
    v = np.array([1.0, 1.0 + 1e-12, 1.0 + 1e-6, 0.5])
    assert violates(v, None, 1.0).tolist() == [False, False, True, False]
    assert violates(v, 0.9, None).tolist() == [False, False, False, True]


@pytest.mark.parametrize("fixture", ["disk", "square", "cube"])
def test_fast_checks_pass(request, fixture):
    M = request.getfixturevalue(fixture)
    for rep in run_checks(M, FAST, n_pairs=20_000):
        assert rep.passed, (rep.name, rep.to_dict())


def test_ball_is_sharp(disk):
    rep = check_inversion_distance_bound(disk, 20_000)
    assert rep.observed.sup_value == pytest.approx(1.0, abs=1e-12)
    assert rep.observed.inf_value == pytest.approx(1.0, abs=1e-12)


def test_metric_check_on_square(square):
    (rep,) = run_checks(square, ["quasi-inversion-metrics"], n_pairs=5_000)
    assert rep.passed
    d = rep.details
    assert d["metric_lower"] <= d["delta_min"] <= d["delta_max"] <= d["metric_upper"]


def test_tightened_bound_fails_with_witnesses(square):
    rep = check_projection_lower_bound(square, 20_000, bound_scale=0.5)
    assert rep.verdict == "fail" and rep.violations > 0
    assert 0 < len(rep.witnesses) <= 5
    X = np.array([w[0] for w in rep.witnesses])
    Y = np.array([w[1] for w in rep.witnesses])
    v, ok = projection_lower_quantity(X, Y)
    assert ok.all() and np.all(v < rep.bound["lower"])


def test_inversion_distance_bound_is_loose_on_square(square):
    # the L^4 bound is far from sharp, so halving it still passes
    rep = check_inversion_distance_bound(square, 20_000, bound_scale=0.5)
    assert rep.passed
    assert rep.observed.sup_value < rep.bound["upper"]


def test_reports_deterministic(square):
    a = run_checks(square, ["inversion-distance", "ray-comparison"], n_pairs=10_000, seed=3)
    b = run_checks(square, ["inversion-distance", "ray-comparison"], n_pairs=10_000, seed=3)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    c = run_checks(square, ["inversion-distance"], n_pairs=10_000, seed=4)
    assert c[0].to_dict() != a[0].to_dict()


def test_report_roundtrip(square):
    rep = check_projection_lower_bound(square, 5_000)
    again = CheckReport.from_dict(rep.to_dict())
    assert again.to_dict() == rep.to_dict()


def test_unknown_check_rejected(square):
    with pytest.raises(DomainError):
        run_checks(square, ["nope"])


def test_projection_lower_equality_on_equal_norms(rng):
    U = rng.normal(size=(1000, 3))
    V = rng.normal(size=(1000, 3))
    s = rng.uniform(0.1, 10, (1000, 1))
    X = s * U / np.linalg.norm(U, axis=1, keepdims=True)
    Y = s * V / np.linalg.norm(V, axis=1, keepdims=True)
    v, ok = projection_lower_quantity(X, Y)
    assert ok.all() and np.allclose(v, 1.0, atol=1e-9)


def test_ray_comparison_terms_ordered(ellipse, rng):
    X, Y = SpacePairs(ellipse).draw(rng, 5000)
    dxz, dxy, fac = ray_comparison_terms(ellipse, X, Y)
    ok = dxz > 0
    assert np.all(dxy[ok] >= dxz[ok] * (1 - 1e-9))
    assert np.all(dxy[ok] <= fac[ok] * dxz[ok] * (1 + 1e-9))


def test_projection_lipschitz_attains_reciprocal_radius(ellipse):
    rep = check_projection_lipschitz(ellipse, 50_000)
    assert rep.passed
    assert rep.details["relative_gap"] < 5e-3


def test_chordal_transfer_identity(square):
    rep = check_chordal_transfer(lambda X: X, 1.0, SpacePairs(square), 5_000)
    assert rep.passed
    assert rep.observed.sup_value == pytest.approx(1.0)


def test_ray_comparison_tightened_fails(ellipse):
    assert not check_ray_comparison(ellipse, 20_000, bound_scale=0.5).passed


def test_dilatation_square_is_sharp(square):
    rep = check_dilatation(square, 20_000)
    assert rep.passed
    assert rep.details["sharpness"] > 0.95


@pytest.mark.parametrize("family, ts", [
    (fourier_family, (1.0, 0.5, 0.1, 0.01)),
    # the superellipse exponent 2 + 8t needs a smaller t to land within 1%
    (superellipse_family, (1.0, 0.5, 0.1, 0.01, 0.001)),
])
def test_smooth_convergence(family, ts):
    rep = check_smooth_convergence(family, ts)
    assert rep.verdict == "pass"
    assert rep.derivative_gap[-1] < rep.derivative_gap[0]
    assert rep.alpha[-1] == pytest.approx(np.pi / 2, abs=0.05)
