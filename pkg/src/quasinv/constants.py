"""Closed-form distortion constants and numerical dilatation estimates.

All closed forms take the tangent angle ``alpha`` and the extreme radii of the
boundary; the angle itself always comes from :mod:`quasinv.tangent`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ResolutionError
from .geometry import PolarCurve2D, StarlikeBoundary, radial_projection

KA_TABLE = (0.5, 1.0, 2.0, 4.0)


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha <= np.pi / 2 + 1e-15:
        raise DomainError("alpha must lie in (0, pi/2], got %r" % alpha)
    return min(alpha, np.pi / 2)


def _cot(alpha):
    # cot(pi/2) evaluates to ~6e-17; snap it so the sphere gives exact ones
    return 0.0 if alpha == np.pi / 2 else 1.0 / np.tan(alpha)


def _bracket(alpha):
    """``sqrt(csc^2 a - 1) + sqrt(csc^2 a + 3)``, written through ``cot a``."""
    c = _cot(alpha)
    return c + np.sqrt(c * c + 4.0)


def radial_extension_lipschitz(alpha, r_max) -> float:
    """Lipschitz constant ``L1`` of the unit-exponent radial extension."""
    alpha = _check_alpha(alpha)
    if r_max <= 0:
        raise DomainError("r_max must be positive")
    return 0.5 * r_max * _bracket(alpha)


def radial_extension_inverse_lipschitz(alpha, r_min, dimension: int = 3,
                                       form: str = "auto") -> float:
    """Lipschitz constant ``L2`` of the inverse radial extension.

    The planar form carries a factor 1/2 that the form stated for ``n >= 3``
    lacks.  ``form`` selects ``"planar"``, ``"spatial"`` or ``"auto"`` (by
    dimension).  Only the planar form reduces to 1 on the unit sphere.
    """
    alpha = _check_alpha(alpha)
    if r_min <= 0:
        raise DomainError("r_min must be positive")
    if form == "auto":
        form = "planar" if dimension == 2 else "spatial"
    if form == "planar":
        return _bracket(alpha) / (2.0 * r_min)
    if form == "spatial":
        return _bracket(alpha) / r_min
    raise DomainError("unknown form %r" % form)


def stretch_dilatation(a, alpha) -> float:
    """Quasiconformality constant ``K_a`` of the radial extension with exponent ``a``."""
    alpha = _check_alpha(alpha)
    if a <= 0:
        raise DomainError("exponent must be positive")
    c2 = _cot(alpha) ** 2
    return (np.sqrt((a - 1.0) ** 2 + c2) + np.sqrt((a + 1.0) ** 2 + c2)) ** 2 / (4.0 * a)


def optimal_exponent(alpha) -> tuple[float, float]:
    """``(csc a, cot(a/2))``: the minimising exponent and the minimal constant."""
    alpha = _check_alpha(alpha)
    return 1.0 / np.sin(alpha), 1.0 / np.tan(alpha / 2.0)


def quasi_inversion_dilatation(alpha) -> float:
    """``cot^2(a/2)``, the quasiconformality constant of the quasi-inversion."""
    alpha = _check_alpha(alpha)
    return 1.0 / np.tan(alpha / 2.0) ** 2


@dataclass(frozen=True)
class BeltramiBounds:
    stretch: float
    inversion_stated: float
    inversion: float


def beltrami_bound(alpha) -> BeltramiBounds:
    """Bounds on the complex dilatation.

    ``stretch`` is ``tan(pi/4 - a/2)`` for the optimal radial extension.
    ``inversion_stated`` is ``(1 - sin a)/(1 + sin a)``, the square of
    ``stretch``; it belongs to ``K = csc a`` rather than to ``cot^2(a/2)``.
    ``inversion`` is ``cos a``, the value matching ``K = cot^2(a/2)``, and is
    what sampled quasi-inversions actually reach.
    """
    alpha = _check_alpha(alpha)
    s = np.sin(alpha)
    return BeltramiBounds(float(np.tan(np.pi / 4 - alpha / 2)), float((1 - s) / (1 + s)),
                          float(np.cos(alpha)) if alpha < np.pi / 2 else 0.0)


def inner_outer_dilatation_bounds(alpha) -> tuple[float, float]:
    """Explicit upper bounds for the inner and outer dilatation onto the ball."""
    alpha = _check_alpha(alpha)
    h = alpha / 2.0
    cot = 1.0 / np.tan(h)
    return float(cot / (np.sqrt(2.0) * np.sin(h))), float(np.sqrt(2.0) * cot * np.cos(h))


def convex_shell_dilatation(a, b) -> float:
    """Dilatation bound ``(b + sqrt(b^2 - a^2))/a`` for a convex domain with ``B(a) in D in B(b)``."""
    if not 0 < a < b:
        raise DomainError("need 0 < a < b")
    H = (b + np.sqrt(b * b - a * a)) / a
    assert H < 2 * b / a
    return float(H)


# ---------------------------------------------------------------------------
# dilatations of linear maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DilatationTriple:
    H_I: float
    H_O: float
    H: float
    singular_values: tuple


def dilatation_arrays(J: np.ndarray):
    """Vectorised ``(H_I, H_O, H, singular values)`` for a stack of square matrices.

    Singular values come back in increasing order.  Rows whose smallest
    singular value underflows give ``nan``.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    s = np.linalg.svd(J, compute_uv=False)[..., ::-1]
    lo, hi = s[..., 0], s[..., -1]
    det = np.prod(s, axis=-1)
    bad = ~(det > 1e-300) | ~np.isfinite(det)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        HI = np.where(bad, np.nan, det / lo**n)
        HO = np.where(bad, np.nan, hi**n / det)
        H = np.where(bad, np.nan, hi / lo)
    return HI, HO, H, s


def linear_dilatations(J) -> DilatationTriple:
    """Inner, outer and linear dilatation of a nonsingular matrix."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise DomainError("need a square matrix")
    if abs(np.linalg.det(J)) <= 1e-300:
        raise DomainError("dilatation undefined")
    HI, HO, H, s = dilatation_arrays(J)
    return DilatationTriple(float(HI), float(HO), float(H), tuple(float(v) for v in s))


# ---------------------------------------------------------------------------
# planar complex derivatives of the radial extension
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanarStretch:
    Lambda: float
    lam: float
    H: float
    mu: complex
    f_z: complex
    f_zbar: complex


def planar_stretch_derivatives(curve: PolarCurve2D, a: float, z) -> PlanarStretch:
    """Max/min stretch, dilatation and complex dilatation of ``z -> |z|^a r(t) e^{it}``."""
    if a <= 0:
        raise DomainError("exponent must be positive")
    z = np.asarray(z, dtype=float)
    rho = float(np.hypot(z[0], z[1]))
    if rho == 0:
        raise DomainError("z must be nonzero")
    t = float(np.arctan2(z[1], z[0]) % (2 * np.pi))
    if curve.breakpoints and curve.distance_to_breakpoint(np.array([t]))[0] < 1e-9:
        raise DomainError("direction is a breakpoint of the boundary")
    r = float(curve.radius(np.array([t]))[0])
    c = float(curve.derivative(np.array([t]))[0]) / r
    scale = 0.5 * r * rho ** (a - 1.0)
    fz = scale * complex(a + 1.0, -c)
    fzb = np.exp(2j * t) * scale * complex(a - 1.0, c)
    Lam = abs(fz) + abs(fzb)
    lam = abs(fz) - abs(fzb)
    return PlanarStretch(Lam, lam, Lam / lam, complex(fzb / fz), complex(fz), complex(fzb))


# ---------------------------------------------------------------------------
# finite-difference dilatation of maps
# ---------------------------------------------------------------------------

def fd_jacobian(f: Callable, X: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobians ``(N, n, n)`` with step ``step * |x|`` per point."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, n = X.shape
    h = step * np.linalg.norm(X, axis=1)
    J = np.empty((N, n, n))
    for j in range(n):
        E = np.zeros_like(X)
        E[:, j] = h
        J[:, :, j] = (f(X + E) - f(X - E)) / (2.0 * h)[:, None]
    return J


@dataclass(frozen=True)
class DilatationEstimate:
    H: float
    H_I: float
    H_O: float
    witness: np.ndarray
    evaluated: int
    excluded: int
    degenerate: int

    def to_dict(self):
        d = asdict(self)
        d["witness"] = list(map(float, self.witness))
        return d


def sampled_max_dilatation(f: Callable, points: np.ndarray,
                           M: Optional[StarlikeBoundary] = None, exclude: float = 1e-3,
                           step: float = 1e-6, max_degenerate: float = 0.01) -> DilatationEstimate:
    """Sampled essential sup of ``H(f'(x))`` from finite-difference Jacobians.

    With ``M`` given, points within about ``exclude * r_min`` of a ray through
    a non-smooth boundary point are skipped.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    keep = np.linalg.norm(X, axis=1) > 0
    if M is not None:
        gap = np.full(len(X), np.inf)
        gap[keep] = M.shape.kink_gap(radial_projection(X[keep]))
        keep &= np.linalg.norm(X, axis=1) * gap >= exclude * M.r_min
    Xk = X[keep]
    if len(Xk) == 0:
        raise ResolutionError("no sample point survived the exclusion band")
    HI, HO, H, _ = dilatation_arrays(fd_jacobian(f, Xk, step))
    bad = ~np.isfinite(H)
    if bad.mean() > max_degenerate:
        raise ResolutionError("map not a.e. regular at this resolution")
    Hm = np.where(bad, -np.inf, H)
    k = int(np.argmax(Hm))
    return DilatationEstimate(float(H[k]), float(np.nanmax(HI)), float(np.nanmax(HO)),
                              Xk[k].copy(), int(len(Xk)), int((~keep).sum()), int(bad.sum()))


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantsReport:
    """Every closed-form constant of one boundary, computed from ``alpha, r_min, r_max``."""

    alpha: float
    r_min: float
    r_max: float
    dimension: int
    L1: float
    L2: float
    L: float
    l2_form: str
    L2_planar: float
    L2_spatial: float
    Ka_at: tuple
    a_opt: float
    K_min: float
    K_quasi_inversion: float
    k_planar: float
    k_inversion_stated: float
    k_inversion: float
    gv_inner: float
    gv_outer: float
    lip_phi_bracket: tuple
    lip_phi_boundary: Optional[float] = None
    provenance: dict = field(default_factory=dict)

    @classmethod
    def build(cls, alpha, r_min, r_max, dimension, l2_form="auto", lip_phi_boundary=None,
              table=KA_TABLE):
        alpha = _check_alpha(alpha)
        form = l2_form if l2_form != "auto" else ("planar" if dimension == 2 else "spatial")
        L1 = radial_extension_lipschitz(alpha, r_max)
        L2p = radial_extension_inverse_lipschitz(alpha, r_min, form="planar")
        L2s = radial_extension_inverse_lipschitz(alpha, r_min, form="spatial")
        L2 = L2p if form == "planar" else L2s
        a_opt, K_min = optimal_exponent(alpha)
        bel = beltrami_bound(alpha)
        gi, go = inner_outer_dilatation_bounds(alpha)
        s = np.sin(alpha)
        prov = {
            "L1": "r_max/2 * (sqrt(csc^2 a - 1) + sqrt(csc^2 a + 3))",
            "L2": ("1/(2 r_min) * (...)" if form == "planar" else "1/r_min * (...)")
                  + " [planar and spatial forms differ by a factor 2]",
            "L": "max(L1, L2)",
            "Ka": "(1/4a) (sqrt((a-1)^2 + cot^2 a) + sqrt((a+1)^2 + cot^2 a))^2",
            "K_min": "cot(alpha/2) at a = csc(alpha)",
            "K_quasi_inversion": "cot^2(alpha/2)",
            "k_planar": "tan(pi/4 - alpha/2)",
            "k_inversion_stated": "(1 - sin alpha)/(1 + sin alpha)",
            "k_inversion": "cos(alpha) = (K-1)/(K+1) for K = cot^2(alpha/2)",
            "gv": "2^(-1/2) cot(a/2) csc(a/2), 2^(1/2) cot(a/2) cos(a/2)",
        }
        return cls(
            alpha=alpha, r_min=float(r_min), r_max=float(r_max), dimension=int(dimension),
            L1=float(L1), L2=float(L2), L=float(max(L1, L2)), l2_form=form,
            L2_planar=float(L2p), L2_spatial=float(L2s),
            Ka_at=tuple((float(a), float(stretch_dilatation(a, alpha))) for a in table)
            + ((float(a_opt), float(stretch_dilatation(a_opt, alpha))),),
            a_opt=float(a_opt), K_min=float(K_min),
            K_quasi_inversion=float(quasi_inversion_dilatation(alpha)),
            k_planar=bel.stretch, k_inversion_stated=bel.inversion_stated,
            k_inversion=bel.inversion, gv_inner=gi, gv_outer=go,
            lip_phi_bracket=(float(r_min / s), float(r_max / s)),
            lip_phi_boundary=None if lip_phi_boundary is None else float(lip_phi_boundary),
            provenance=prov,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["Ka_at"] = [list(p) for p in self.Ka_at]
        d["lip_phi_bracket"] = list(self.lip_phi_bracket)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantsReport":
        d = dict(d)
        d["Ka_at"] = tuple(tuple(p) for p in d["Ka_at"])
        d["lip_phi_bracket"] = tuple(d["lip_phi_bracket"])
        return cls(**d)


def constants_for(M: StarlikeBoundary, alpha: Optional[float] = None,
                  l2_form: str = "auto") -> ConstantsReport:
    """Constants report for ``M``; ``alpha`` defaults to the sampled global tangent angle."""
    from .tangent import alpha_global, lip_polar_param

    if alpha is None:
        alpha = alpha_global(M).alpha_global
    lip = lip_polar_param(M.polar_curve()) if M.dimension == 2 else None
    return ConstantsReport.build(alpha, M.r_min, M.r_max, M.dimension, l2_form, lip)
