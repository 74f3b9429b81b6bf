"""Sampling checks of the distortion inequalities against the closed-form constants.

Every check draws deterministic pairs, evaluates a quantity that the theory
confines to ``[lower, upper]`` and counts samples whose relative excess over
the violated bound exceeds ``SLACK``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .constants import ConstantsReport, constants_for, fd_jacobian, sampled_max_dilatation
from .errors import DomainError
from .geometry import (StarlikeBoundary, quasi_inversion, quasi_inversion_difference,
                       quasi_inversion_rows,
                       radial_extension, radial_extension_rows, radial_projection, sphere_grid)
from .metrics import (BoundaryDiscretization, Region, build_graph, chordal_batch,
                      ferrand_sigma, mobius_delta)
from .sampling import (PairSampler, RatioEstimate, SpacePairs, chunk_rng, derive_seed,
                       map_chunks, random_directions)
from .shapes import Superellipse, polar_fourier

SLACK = 1e-9

CHECKS = (
    "inversion-distance",
    "ray-comparison",
    "projection-lower-bound",
    "projection-lipschitz",
    "chordal-transfer",
    "quasi-inversion-metrics",
    "dilatation",
)


@dataclass(frozen=True)
class CheckReport:
    name: str
    bound: dict
    observed: RatioEstimate
    violations: int
    verdict: str
    witnesses: tuple = ()
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bound": self.bound,
            "observed": self.observed.to_dict(),
            "violations": self.violations,
            "verdict": self.verdict,
            "witnesses": [[list(map(float, p)) for p in w] for w in self.witnesses],
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        return cls(d["name"], dict(d["bound"]), RatioEstimate.from_dict(d["observed"]),
                   int(d["violations"]), d["verdict"],
                   tuple(tuple(np.array(p) for p in w) for w in d.get("witnesses", [])),
                   dict(d.get("details", {})))


def violates(values, lower, upper, slack=SLACK):
    """Samples whose relative excess beyond ``[lower, upper]`` exceeds ``slack``."""
    v = np.asarray(values)
    bad = np.zeros(v.shape, dtype=bool)
    if upper is not None:
        bad |= (v - upper) > slack * abs(upper)
    if lower is not None:
        bad |= (lower - v) > slack * abs(lower)
    return bad


def scan_bounds(quantity: Callable, sampler: PairSampler, n_pairs: int, seed: int,
                lower: Optional[float], upper: Optional[float], keep: int = 5):
    """Sample ``quantity(X, Y) -> (values, valid)`` and count bound violations.

    ``quantity`` may return a third array flagging violations itself, for
    bounds that vary from pair to pair.

    Returns the sup/inf estimate, the violation count and up to ``keep``
    violating pairs (earliest first).
    """

    def job(k, m):
        X, Y = sampler.draw(chunk_rng(seed, k), m)
        out = quantity(X, Y)
        v, ok = out[0], out[1] & ~np.isnan(out[0])
        bad = ok & (out[2] if len(out) == 3 else violates(v, lower, upper))
        idx = np.flatnonzero(ok)
        res = {"skipped": int((~ok).sum()), "bad": int(bad.sum()),
               "wit": [(X[i].copy(), Y[i].copy()) for i in np.flatnonzero(bad)[:keep]]}
        if idx.size:
            i, j = idx[np.argmax(v[idx])], idx[np.argmin(v[idx])]
            res.update(sup=float(v[i]), inf=float(v[j]), ws=(X[i].copy(), Y[i].copy()),
                       wi=(X[j].copy(), Y[j].copy()))
        return res

    parts = map_chunks(job, n_pairs)
    sup, inf, ws, wi = -np.inf, np.inf, None, None
    bad, skipped, wit = 0, 0, []
    for p in parts:
        bad += p["bad"]
        skipped += p["skipped"]
        wit.extend(p["wit"])
        if "sup" in p and p["sup"] > sup:
            sup, ws = p["sup"], p["ws"]
        if "inf" in p and p["inf"] < inf:
            inf, wi = p["inf"], p["wi"]
    if ws is None:
        raise DomainError("every sampled pair was degenerate")
    est = RatioEstimate(sup, inf, ws, wi, int(n_pairs), sampler.descriptor(), int(seed), skipped)
    return est, bad, tuple(wit[:keep])


def _report(name, lower, upper, provenance, est, bad, wit, details=None):
    return CheckReport(name, {"lower": lower, "upper": upper, "provenance": provenance},
                       est, int(bad), "pass" if bad == 0 else "fail", wit, details or {})


def _seed(name, M, n_pairs, seed):
    desc = M.describe() if isinstance(M, StarlikeBoundary) else repr(M)
    return derive_seed(name if seed is None else "%s#%d" % (name, seed), desc, n_pairs)


def _scaled(lower, upper, s):
    return (None if lower is None else lower / s), (None if upper is None else upper * s)


# ---------------------------------------------------------------------------
# distance inequalities of the quasi-inversion
# ---------------------------------------------------------------------------

def inversion_distance_quantity(M):
    """``|f(x) - f(y)| |x| |y| / |x - y|`` row-wise."""

    def q(X, Y):
        d = np.linalg.norm(X - Y, axis=1)
        ok = d > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            v = (np.linalg.norm(quasi_inversion_difference(M, X, Y), axis=1)
                 * np.linalg.norm(X, axis=1) * np.linalg.norm(Y, axis=1) / d)
        return v, ok

    return q


def check_inversion_distance_bound(M: StarlikeBoundary, n_pairs: int = 100_000,
                                   seed: Optional[int] = None,
                                   constants: Optional[ConstantsReport] = None,
                                   bound_scale: float = 1.0) -> CheckReport:
    """Two-sided bound ``L^-4 <= |f(x)-f(y)| |x||y| / |x-y| <= L^4``."""
    name = "inversion-distance"
    C = constants or constants_for(M)
    lo, hi = _scaled(C.L ** -4, C.L ** 4, bound_scale)
    s = _seed(name, M, n_pairs, seed)
    est, bad, wit = scan_bounds(inversion_distance_quantity(M), SpacePairs(M), n_pairs, s, lo, hi)
    return _report(name, lo, hi, "L^-4 |x-y|/(|x||y|) <= |f(x)-f(y)| <= L^4 |x-y|/(|x||y|), "
                   "L = max(L1, L2)", est, bad, wit, {"L": C.L})


def ray_comparison_terms(M, X, Y):
    """Return ``(|f(x)-f(z)|, |f(x)-f(y)|, 2 r_y^2/r_x^2 + 1)`` with ``z = lambda x``.

    Rows are swapped first so that ``|x| <= |y|``.
    """
    swap = np.linalg.norm(X, axis=1) > np.linalg.norm(Y, axis=1)
    X, Y = np.where(swap[:, None], Y, X), np.where(swap[:, None], X, Y)
    fx, fy = quasi_inversion(M, X), quasi_inversion(M, Y)
    dxy = np.linalg.norm(fx - fy, axis=1)
    nfy = np.linalg.norm(fy, axis=1)
    lam = (nfy + dxy) / nfy
    Z = lam[:, None] * X
    dxz = np.linalg.norm(fx - quasi_inversion(M, Z), axis=1)
    rx = M.shape.radial(radial_projection(X))
    ry = M.shape.radial(radial_projection(Y))
    return dxz, dxy, 2.0 * ry**2 / rx**2 + 1.0


def check_ray_comparison(M: StarlikeBoundary, n_pairs: int = 100_000, seed: Optional[int] = None,
                         bound_scale: float = 1.0) -> CheckReport:
    """``|f(x)-f(z)| <= |f(x)-f(y)| <= (2 r_y^2/r_x^2 + 1) |f(x)-f(z)|``.

    The observed range is that of ``|f(x)-f(y)| / |f(x)-f(z)|``; the upper
    factor depends on the pair, so violations are flagged pair by pair.
    """
    name = "ray-comparison"
    s = _seed(name, M, n_pairs, seed)

    def q(X, Y):
        dxz, dxy, fac = ray_comparison_terms(M, X, Y)
        ok = (dxz > 0) & (np.linalg.norm(X - Y, axis=1) > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = dxy / dxz
        bad = (raw < (1 - SLACK) / bound_scale) | (raw > bound_scale * fac * (1 + SLACK))
        return raw, ok, bad

    est, bad, wit = scan_bounds(q, SpacePairs(M), n_pairs, s, None, None)
    return _report(name, 1.0 / bound_scale, "2 r_y^2/r_x^2 + 1 (per pair)",
                   "|f(x)-f(z)| <= |f(x)-f(y)| <= (2 r_y^2/r_x^2 + 1)|f(x)-f(z)|, "
                   "z = lambda x, lambda = (|f(y)| + |f(x)-f(y)|)/|f(y)|",
                   est, bad, wit)


# ---------------------------------------------------------------------------
# radial projection
# ---------------------------------------------------------------------------

def projection_lower_quantity(X, Y):
    """``|x-y| / (|x*-y*| (|x|+|y|)/2)``; at least 1 for all nonzero pairs."""
    dp = np.linalg.norm(radial_projection(X) - radial_projection(Y), axis=1)
    ok = dp > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.linalg.norm(X - Y, axis=1) / (
            dp * 0.5 * (np.linalg.norm(X, axis=1) + np.linalg.norm(Y, axis=1)))
    return v, ok


def check_projection_lower_bound(M: StarlikeBoundary, n_pairs: int = 100_000,
                                 seed: Optional[int] = None, bound_scale: float = 1.0) -> CheckReport:
    name = "projection-lower-bound"
    s = _seed(name, M, n_pairs, seed)
    lo, _ = _scaled(1.0, None, bound_scale)
    est, bad, wit = scan_bounds(projection_lower_quantity, SpacePairs(M), n_pairs, s, lo, None)
    return _report(name, lo, None, "|x-y| >= (|x|+|y|)/2 |x*-y*|", est, bad, wit)


def check_projection_lipschitz(M: StarlikeBoundary, n_pairs: int = 100_000,
                               seed: Optional[int] = None, bound_scale: float = 1.0) -> CheckReport:
    """On the boundary, ``|x*-y*| / |x-y| <= 1/dist(M, 0)``, approached near the closest point."""
    from .sampling import BoundaryPairs
    from .tangent import projection_ratio

    name = "projection-lipschitz"
    s = _seed(name, M, n_pairs, seed)
    _, hi = _scaled(None, 1.0 / M.r_min, bound_scale)
    est, bad, wit = scan_bounds(projection_ratio, BoundaryPairs(M), n_pairs, s, None, hi)
    return _report(name, None, hi, "Lip(x -> x/|x|) <= 1/dist(M, 0), equality for starlike M",
                   est, bad, wit, {"relative_gap": 1.0 - est.sup_value * M.r_min})


# ---------------------------------------------------------------------------
# chordal metric
# ---------------------------------------------------------------------------

def _with_special_rows(X, Y):
    X = X.copy()
    Y = Y.copy()
    Y[::50] = np.inf
    X[1::97] = 0.0
    return X, Y


def chordal_distortion(f_rows: Callable):
    def q(X, Y):
        X, Y = _with_special_rows(X, Y)
        din = chordal_batch(X, Y)
        ok = din > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            return chordal_batch(f_rows(X), f_rows(Y)) / din, ok

    return q


def check_chordal_transfer(f_rows: Callable, L: float, sampler: PairSampler,
                           n_pairs: int = 100_000, seed: int = 0, label: str = "map",
                           bound_scale: float = 1.0) -> CheckReport:
    """Chordal distortion of a map fixing 0 and infinity stays in ``[L^-3, L^3]``.

    ``f_rows`` acts on row arrays whose rows may be zero or ``inf``; ``L`` is a
    Euclidean bi-Lipschitz constant of the map.
    """
    name = "chordal-transfer"
    lo, hi = _scaled(L ** -3, L ** 3, bound_scale)
    s = derive_seed(name, label, n_pairs) ^ int(seed)
    est, bad, wit = scan_bounds(chordal_distortion(f_rows), sampler, n_pairs, s, lo, hi)
    return _report(name, lo, hi, "Euclidean L-bi-Lipschitz fixing 0, inf => chordal L^3",
                   est, bad, wit, {"L": L})


# ---------------------------------------------------------------------------
# quasi-inversion in the three metrics
# ---------------------------------------------------------------------------

def inverted_ball_region(M: StarlikeBoundary, radius: float) -> Region:
    """Unit-sphere inversion of ``f_M(B(0, radius))``: the region ``|y| < radius / r(y*)^2``."""
    return Region.radial(lambda U: radius / M.shape.radial(U) ** 2, M.dimension,
                         "inverted-image")


def metric_pairs(M: StarlikeBoundary, count: int, radius: float, seed: int):
    rng = np.random.default_rng(seed)
    U = random_directions(rng, 2 * count, M.dimension)
    rho = rng.uniform(0.15, 0.5, 2 * count) * radius
    P = U * rho[:, None]
    return list(zip(P[:count], P[count:]))


def check_quasi_inversion_metrics(M: StarlikeBoundary, n_pairs: int = 100_000,
                                  seed: Optional[int] = None,
                                  constants: Optional[ConstantsReport] = None,
                                  metric_pairs_count: int = 100, sigma_pairs: int = 3,
                                  radius: float = 0.4, base: int = 1024,
                                  bound_scale: float = 1.0) -> CheckReport:
    """Chordal distortion within ``[L^-6, L^6]``; absolute ratio and Ferrand
    distortion on ``G = B(0, radius)`` within ``[L^-8, L^8]``.

    Ferrand distances in the unbounded image ``f_M(G)`` are evaluated after the
    unit-sphere inversion, which leaves them unchanged and makes the region
    bounded.
    """
    name = "quasi-inversion-metrics"
    C = constants or constants_for(M)
    s = _seed(name, M, n_pairs, seed)
    lo6, hi6 = _scaled(C.L ** -6, C.L ** 6, bound_scale)
    est, bad, wit = scan_bounds(chordal_distortion(lambda X: quasi_inversion_rows(M, X)),
                                SpacePairs(M), n_pairs, s, lo6, hi6)
    lo8, hi8 = _scaled(C.L ** -8, C.L ** 8, bound_scale)
    G = Region.ball(radius=radius, dimension=M.dimension)
    f = lambda X: quasi_inversion_rows(M, X)
    fG = G.mapped(f, f, "f_M(ball)", bounded=False)
    disc, disc_f = BoundaryDiscretization(G, base), BoundaryDiscretization(fG, base)
    pairs = metric_pairs(M, metric_pairs_count, radius, s % (2**32))
    ratios = []
    for x, y in pairs:
        d0 = mobius_delta(disc, x, y, refine=False)
        d1 = mobius_delta(disc_f, quasi_inversion(M, x), quasi_inversion(M, y), refine=False)
        ratios.append(d1 / d0)
    details = {"delta_min": float(min(ratios)), "delta_max": float(max(ratios)),
               "L": C.L, "metric_pairs": len(pairs)}
    bad += int(violates(np.array(ratios), lo8, hi8).sum())
    if sigma_pairs:
        hG = inverted_ball_region(M, radius)
        cells = 48 if M.dimension == 2 else 14
        g0 = build_graph(BoundaryDiscretization(G, 512), cells=cells)
        g1 = build_graph(BoundaryDiscretization(hG, 512), cells=cells)
        sr = []
        for x, y in pairs[:sigma_pairs]:
            s0 = ferrand_sigma(g0, x, y)
            hx = x / M.radial(radial_projection(x)) ** 2
            hy = y / M.radial(radial_projection(y)) ** 2
            sr.append(ferrand_sigma(g1, hx, hy) / s0)
        details.update(sigma_min=float(min(sr)), sigma_max=float(max(sr)),
                       sigma_pairs=len(sr))
        bad += int(violates(np.array(sr), lo8, hi8).sum())
    return _report(name, lo6, hi6, "chordal: L^6; absolute ratio and Ferrand: L^8 "
                   "(bounds on those two are recorded in details)",
                   est, bad, wit, dict(details, metric_lower=lo8, metric_upper=hi8))


# ---------------------------------------------------------------------------
# dilatation
# ---------------------------------------------------------------------------

def dilatation_points(M: StarlikeBoundary, count: int, seed: int):
    rng = np.random.default_rng(seed)
    U = random_directions(rng, count, M.dimension)
    return U * (M.r_min * rng.uniform(0.5, 2.0, count))[:, None]


def check_dilatation(M: StarlikeBoundary, n_points: int = 100_000, seed: Optional[int] = None,
                     constants: Optional[ConstantsReport] = None, tolerance: float = 0.02,
                     bound_scale: float = 1.0) -> CheckReport:
    """Sampled ess-sup of ``H(f_M')`` against ``cot^2(alpha/2)`` (finite-difference slack ``tolerance``)."""
    name = "dilatation"
    C = constants or constants_for(M)
    s = _seed(name, M, n_points, seed)
    X = dilatation_points(M, n_points, s % (2**32))
    est = sampled_max_dilatation(lambda Z: quasi_inversion(M, Z), X, M)
    hi = C.K_quasi_inversion * (1 + tolerance) * bound_scale
    bad = int(est.H > hi * (1 + SLACK))
    obs = RatioEstimate(est.H, 1.0, (est.witness, est.witness), (est.witness, est.witness),
                        est.evaluated, {"sampler": "annulus", "exclude": 1e-3}, s)
    return _report(name, None, hi, "H(f_M) <= cot^2(alpha/2), with finite-difference slack",
                   obs, bad, (), {"K": C.K_quasi_inversion, "sharpness": est.H / C.K_quasi_inversion,
                                  **est.to_dict()})


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def run_checks(M: StarlikeBoundary, names: Sequence[str] = CHECKS, n_pairs: int = 100_000,
               seed: Optional[int] = None, constants: Optional[ConstantsReport] = None,
               bound_scale: float = 1.0) -> list[CheckReport]:
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise DomainError("unknown check(s): %s" % ", ".join(unknown))
    C = constants or constants_for(M)
    out = []
    for n in names:
        if n == "inversion-distance":
            out.append(check_inversion_distance_bound(M, n_pairs, seed, C, bound_scale))
        elif n == "ray-comparison":
            out.append(check_ray_comparison(M, n_pairs, seed, bound_scale))
        elif n == "projection-lower-bound":
            out.append(check_projection_lower_bound(M, n_pairs, seed, bound_scale))
        elif n == "projection-lipschitz":
            out.append(check_projection_lipschitz(M, n_pairs, seed, bound_scale))
        elif n == "chordal-transfer":
            out.append(check_chordal_transfer(
                lambda X: radial_extension_rows(M, 1.0, X), C.L, SpacePairs(M), n_pairs,
                0 if seed is None else seed, "radial-extension:%s" % M.kind, bound_scale))
        elif n == "quasi-inversion-metrics":
            out.append(check_quasi_inversion_metrics(
                M, n_pairs, seed, C, metric_pairs_count=20, sigma_pairs=2,
                bound_scale=bound_scale))
        elif n == "dilatation":
            out.append(check_dilatation(M, min(n_pairs, 100_000), seed, C,
                                        bound_scale=bound_scale))
    return out


@dataclass(frozen=True)
class ConvergenceReport:
    t: tuple
    alpha: tuple
    L: tuple
    K: tuple
    K_quasi_inversion: tuple
    derivative_gap: tuple
    monotone: bool
    final_within: bool
    verdict: str

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def fourier_family(t: float) -> StarlikeBoundary:
    """``r_t(theta) = 1 + 0.2 t cos 4 theta``."""
    return StarlikeBoundary.from_shape(polar_fourier(1.0, [(4, 0.2 * t, 0.0)]))


def superellipse_family(t: float) -> StarlikeBoundary:
    """Superellipse ``|x|^p + |y|^p = 1`` with ``p = 2 + 8 t``; ``t = 0`` is the circle."""
    return StarlikeBoundary.from_shape(Superellipse(2.0 + 8.0 * t, 1.0))


def _derivative_gap(M: StarlikeBoundary, count: int = 2048) -> float:
    """``ess sup_{|x|=1} ||phi_1'(x) - I||`` (operator norm) from finite differences."""
    U = sphere_grid(M.dimension, count)
    gap = M.shape.kink_gap(U)
    U = U[gap > 1e-3]
    J = fd_jacobian(lambda X: radial_extension(M, 1.0, X), U, 1e-6)
    return float(np.linalg.norm(J - np.eye(M.dimension), ord=2, axis=(1, 2)).max())


def check_smooth_convergence(family: Callable[[float], StarlikeBoundary],
                             ts: Sequence[float] = (1.0, 0.5, 0.1, 0.01),
                             tolerance: float = 0.05, final: float = 0.01) -> ConvergenceReport:
    """Constants of a boundary family shrinking to the unit sphere.

    ``K`` is the minimal radial-stretch constant ``cot(alpha/2)``; the
    quasi-inversion constant ``cot^2(alpha/2)`` is reported alongside.
    Verdict: both ``L`` and ``K`` are non-increasing up to ``tolerance``
    along ``ts`` and end within ``final`` of 1.
    """
    alphas, Ls, Ks, Kq, gaps = [], [], [], [], []
    for t in ts:
        M = family(t)
        C = constants_for(M)
        alphas.append(C.alpha)
        Ls.append(C.L)
        Ks.append(C.K_min)
        Kq.append(C.K_quasi_inversion)
        gaps.append(_derivative_gap(M))
    mono = all(b <= a * (1 + tolerance) for seq in (Ls, Ks) for a, b in zip(seq, seq[1:]))
    fin = abs(Ls[-1] - 1) <= final and abs(Ks[-1] - 1) <= final
    return ConvergenceReport(tuple(ts), tuple(alphas), tuple(Ls), tuple(Ks), tuple(Kq),
                             tuple(gaps), mono, fin, "pass" if mono and fin else "fail")
