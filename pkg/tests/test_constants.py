import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from quasinv.constants import (
    ConstantsReport, beltrami_bound, constants_for, convex_shell_dilatation, dilatation_arrays,
    fd_jacobian, inner_outer_dilatation_bounds, linear_dilatations, optimal_exponent,
    planar_stretch_derivatives, quasi_inversion_dilatation, radial_extension_inverse_lipschitz,
    radial_extension_lipschitz, sampled_max_dilatation, stretch_dilatation,
)
from quasinv.errors import DomainError, ResolutionError
from quasinv.geometry import StarlikeBoundary, quasi_inversion, radial_extension

alphas = st.floats(0.05, np.pi / 2)


def test_unit_sphere_constants_are_one():
    a = np.pi / 2
    assert radial_extension_lipschitz(a, 1.0) == 1.0
    assert radial_extension_inverse_lipschitz(a, 1.0, form="planar") == 1.0
    assert stretch_dilatation(1.0, a) == 1.0
    assert quasi_inversion_dilatation(a) == pytest.approx(1.0, abs=1e-15)
    assert optimal_exponent(a) == (1.0, pytest.approx(1.0))


def test_spatial_inverse_form_is_twice_planar():
    for a in (0.3, 1.0, np.pi / 2):
        p = radial_extension_inverse_lipschitz(a, 1.5, form="planar")
        s = radial_extension_inverse_lipschitz(a, 1.5, form="spatial")
        assert s == pytest.approx(2 * p)
    with pytest.raises(DomainError):
        radial_extension_inverse_lipschitz(0.5, 1.0, form="other")


def test_lipschitz_bracket_identity():
    # sqrt(csc^2 - 1) + sqrt(csc^2 + 3) written through the cotangent
    for a in (0.2, 0.7, 1.3):
        csc2 = 1 / np.sin(a) ** 2
        direct = 0.5 * (np.sqrt(csc2 - 1) + np.sqrt(csc2 + 3))
        assert radial_extension_lipschitz(a, 1.0) == pytest.approx(direct, rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(alphas)
def test_optimal_exponent_minimises(alpha):
    a_opt, k_min = optimal_exponent(alpha)
    assert stretch_dilatation(a_opt, alpha) == pytest.approx(k_min, rel=1e-12)
    res = minimize_scalar(lambda a: stretch_dilatation(a, alpha), bounds=(0.05, 50),
                          method="bounded", options={"xatol": 1e-10})
    assert res.fun >= k_min * (1 - 1e-12)
    for a in (0.5, 1.0, 2.0, 4.0):
        assert stretch_dilatation(a, alpha) >= k_min * (1 - 1e-12)


@settings(max_examples=100, deadline=None)
@given(alphas)
def test_quasi_inversion_constant_is_square_of_minimum(alpha):
    assert quasi_inversion_dilatation(alpha) == pytest.approx(optimal_exponent(alpha)[1] ** 2)


@settings(max_examples=100, deadline=None)
@given(alphas)
def test_beltrami_bounds_relations(alpha):
    b = beltrami_bound(alpha)
    k_min = optimal_exponent(alpha)[1]
    assert b.stretch == pytest.approx((k_min - 1) / (k_min + 1), abs=1e-12)
    K = quasi_inversion_dilatation(alpha)
    assert b.inversion == pytest.approx((K - 1) / (K + 1), abs=1e-12)
    assert b.inversion_stated == pytest.approx(b.stretch ** 2, rel=1e-9, abs=1e-15)
    k = b.inversion_stated
    assert (1 + k) / (1 - k) == pytest.approx(1 / np.sin(alpha), rel=1e-9)


def test_gv_bounds_dominate_k_min():
    for a in (0.3, 0.8, 1.4):
        gi, go = inner_outer_dilatation_bounds(a)
        k = optimal_exponent(a)[1]
        assert gi > 0 and go > 0
        assert go >= k / np.sqrt(2)


def test_convex_shell():
    assert convex_shell_dilatation(1.0, 2.0) == pytest.approx(2 + np.sqrt(3))
    with pytest.raises(DomainError):
        convex_shell_dilatation(2.0, 1.0)


def test_linear_dilatations_oracle():
    d = linear_dilatations(np.diag([1.0, 2.0, 4.0]))
    assert d.H == pytest.approx(4.0)
    assert d.H_I == pytest.approx(8.0)
    assert d.H_O == pytest.approx(8.0)
    with pytest.raises(DomainError, match="dilatation undefined"):
        linear_dilatations(np.zeros((2, 2)))


def test_dilatation_rotation_invariance(rng):
    J = rng.normal(size=(50, 3, 3))
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    a = dilatation_arrays(J)
    b = dilatation_arrays(Q @ J @ Q.T)
    for u, v in zip(a[:3], b[:3]):
        assert np.allclose(u, v, rtol=1e-10)


def test_planar_derivatives_match_finite_differences(ellipse):
    curve = ellipse.polar_curve()
    z = np.array([0.7, 0.4])
    for a in (0.5, 1.0, 2.0):
        st_ = planar_stretch_derivatives(curve, a, z)
        J = fd_jacobian(lambda X: radial_extension(ellipse, a, X), z[None, :])[0]
        s = np.linalg.svd(J, compute_uv=False)
        assert st_.Lambda == pytest.approx(s[0], rel=1e-6)
        assert st_.lam == pytest.approx(s[1], rel=1e-6)
        assert abs(st_.mu) == pytest.approx((st_.H - 1) / (st_.H + 1), rel=1e-10)


def test_planar_stretch_bounded_by_ka(ellipse):
    curve = ellipse.polar_curve()
    alpha = 2 * np.arctan(0.5)
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    for a in (0.5, 2.0, 1 / np.sin(alpha)):
        H = max(planar_stretch_derivatives(curve, a, [np.cos(s), np.sin(s)]).H for s in t)
        assert H <= stretch_dilatation(a, alpha) * (1 + 1e-9)


def test_sampled_dilatation_sphere_inversion(rng):
    M = StarlikeBoundary.ball(1.0, 3)
    X = rng.normal(size=(2000, 3))
    est = sampled_max_dilatation(lambda Y: quasi_inversion(M, Y), X)
    assert est.H == pytest.approx(1.0, abs=1e-6)


def test_sampled_dilatation_degenerate_map(rng):
    X = rng.normal(size=(100, 2))
    with pytest.raises(ResolutionError, match="a.e. regular"):
        sampled_max_dilatation(lambda Y: np.zeros_like(Y), X)


def test_constants_report_roundtrip(square):
    rep = constants_for(square)
    again = ConstantsReport.from_dict(rep.to_dict())
    assert again == rep
    assert rep.l2_form == "planar"
    assert rep.L == max(rep.L1, rep.L2)
    assert rep.K_min == pytest.approx(1 + np.sqrt(2))
    assert rep.K_quasi_inversion == pytest.approx(3 + 2 * np.sqrt(2))


def test_constants_report_cube_and_ball(cube, sphere3):
    rep = constants_for(cube)
    assert rep.K_min == pytest.approx(np.sqrt(3) + np.sqrt(2), rel=1e-6)
    assert rep.l2_form == "spatial"
    ball = constants_for(sphere3, l2_form="planar")
    for v in (ball.L, ball.K_min, ball.K_quasi_inversion, ball.a_opt):
        assert v == pytest.approx(1.0, abs=1e-12)


def test_alpha_out_of_range():
    with pytest.raises(DomainError):
        stretch_dilatation(1.0, 0.0)
    with pytest.raises(DomainError):
        quasi_inversion_dilatation(2.0)
