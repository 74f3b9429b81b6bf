"""Tangent angles, the cone condition and Lipschitz data of the radial projection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError, ResolutionError
from .geometry import (PointCloud, PolarCurve2D, StarlikeBoundary, radial_projection,
                       sphere_grid)
from .sampling import (NEAR_FLOOR, BoundaryPairs, CloudPairs, PairSampler, RatioEstimate,
                       chunk_rng, random_directions, scan_ratio, _perturb_directions,
                       _log_uniform)
from .shapes import TWO_PI, angle_of


def fold(alpha):
    """Acute version ``min(a, pi - a)`` of an angle in ``[0, pi]``."""
    return np.minimum(alpha, np.pi - alpha)


def acute_angle(Z, X):
    """Acute angle between the line through ``z, x`` and the line through ``0, x``."""
    D = np.asarray(X, dtype=float) - np.asarray(Z, dtype=float)
    X = np.asarray(X, dtype=float)
    c = np.abs(np.sum(D * X, axis=-1)) / (np.linalg.norm(D, axis=-1) * np.linalg.norm(X, axis=-1))
    return np.arccos(np.clip(c, 0.0, 1.0))


@dataclass(frozen=True)
class EpsSchedule:
    """Shrinking radii used to discretise the liminf defining the tangent angle."""

    radii: tuple
    samples_per_radius: int

    def __post_init__(self):
        r = tuple(float(x) for x in self.radii)
        if not r or any(x <= 0 for x in r) or any(b >= a for a, b in zip(r, r[1:])):
            raise DomainError("schedule radii must be positive and strictly decreasing")
        if self.samples_per_radius < 2:
            raise DomainError("need at least two samples per radius")
        object.__setattr__(self, "radii", r)

    @classmethod
    def default(cls, M: StarlikeBoundary, factors=(1e-2, 1e-3, 1e-4), samples=None):
        if samples is None:
            samples = 256 if M.dimension == 2 else 4096
        return cls(tuple(f * M.r_min for f in factors), samples)


def cot_alpha_smooth(curve: PolarCurve2D, t) -> float:
    """``r'(t) / r(t)``, the signed cotangent of the tangent angle at a smooth parameter."""
    t = float(t)
    if curve.breakpoints and curve.distance_to_breakpoint(np.array([t]))[0] < 1e-9:
        raise DomainError("derivative undefined; use sampled liminf")
    return float(curve.derivative(np.array([t]))[0] / curve.radius(np.array([t]))[0])


def _near_directions(M: StarlikeBoundary, u: np.ndarray, span: float, count: int):
    """Directions within angular distance ``span`` of ``u``, excluding ``u`` itself."""
    n = M.dimension
    if n == 2:
        half = count // 2
        d = span * np.arange(1, half + 1) / half
        t0 = np.arctan2(u[1], u[0])
        t = np.concatenate([t0 + d, t0 - d])
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    # tangent frame at u
    basis = np.linalg.svd(u[None, :])[2][1:]
    depths = 16 if count >= 64 else 4
    turns = count // depths
    psi = TWO_PI * np.arange(turns) / turns
    eps = span * np.arange(1, depths + 1) / depths
    P, E = np.meshgrid(psi, eps, indexing="ij")
    P, E = P.ravel(), E.ravel()
    if n == 3:
        V = np.cos(P)[:, None] * basis[0] + np.sin(P)[:, None] * basis[1]
    else:
        g = np.random.default_rng(0).normal(size=(P.size, n - 1))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        V = g @ basis
    W = np.cos(E)[:, None] * u + np.sin(E)[:, None] * V
    return W / np.linalg.norm(W, axis=1, keepdims=True)


@dataclass(frozen=True)
class AlphaLevels:
    """Minimum chord angle at each schedule radius around one boundary point."""

    point: np.ndarray
    radii: tuple
    minima: tuple
    counts: tuple

    @property
    def value(self) -> float:
        return self.minima[-1]

    @property
    def monotone(self) -> bool:
        """True when the minima do not increase as the radius shrinks by more than 1e-9."""
        m = [x for x in self.minima if np.isfinite(x)]
        return all(b <= a + 1e-9 for a, b in zip(m, m[1:]))

    @property
    def spread(self) -> float:
        m = np.array([x for x in self.minima if np.isfinite(x)])
        return float(m.max() - m.min()) if m.size else float("nan")


def alpha_levels(M: StarlikeBoundary, x, sched: Optional[EpsSchedule] = None) -> AlphaLevels:
    x = np.asarray(x, dtype=float)
    sched = sched or EpsSchedule.default(M)
    u = radial_projection(x)
    if abs(np.linalg.norm(x) - M.radial(u)) > 1e-9 * M.r_max:
        raise DomainError("point is not on the boundary")
    minima, counts = [], []
    for rho in sched.radii:
        # a chord of length rho subtends at most this angle at the origin
        span = min(np.pi / 2, 2.0 * np.arcsin(min(1.0, rho / (2.0 * M.r_min))))
        W = _near_directions(M, u, span, sched.samples_per_radius)
        Z = M.radial(W)[:, None] * W
        keep = np.linalg.norm(Z - x, axis=1) <= rho
        keep &= np.linalg.norm(Z - x, axis=1) > 0
        counts.append(int(keep.sum()))
        minima.append(float(acute_angle(Z[keep], x).min()) if keep.any() else float("inf"))
    if counts[-1] == 0:
        raise ResolutionError("schedule too fine for discretization")
    return AlphaLevels(x, sched.radii, tuple(minima), tuple(counts))


def alpha_at(M: StarlikeBoundary, x, sched: Optional[EpsSchedule] = None) -> float:
    """Sampled liminf of the chord angle at the boundary point ``x``."""
    return alpha_levels(M, x, sched).value


def closed_form_alpha(M: StarlikeBoundary, U) -> np.ndarray:
    """``arccot |grad log r|`` at directions ``U`` (smooth points)."""
    G = M.shape.log_gradient(np.atleast_2d(U))
    return np.arctan2(1.0, np.linalg.norm(G, axis=1))


@dataclass(frozen=True)
class AlphaProfile:
    samples: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    alpha_global: float
    method: str
    argmin: np.ndarray
    levels: Optional[AlphaLevels] = None


def _local_min_alpha(M, u0, step, rng, rounds=60, trials=48):
    best_u = u0
    best = closed_form_alpha(M, u0[None, :])[0]
    for _ in range(rounds):
        cand = best_u + step * rng.normal(size=(trials, u0.size))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        vals = closed_form_alpha(M, cand)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, best_u = vals[j], cand[j]
        else:
            step *= 0.5
        if step < 1e-13:
            break
    return best, best_u


def alpha_global(M: StarlikeBoundary, sched: Optional[EpsSchedule] = None,
                 method: str = "auto", grid: Optional[int] = None, seed: int = 0) -> AlphaProfile:
    """Global tangent angle: the infimum of the pointwise angle over the boundary.

    ``closed-form`` evaluates ``arccot |grad log r|`` on a dense grid and polishes
    the smallest values by local search; ``sampled`` runs the liminf sampler at
    every grid point (slow, intended for checks on modest grids).
    """
    n = M.dimension
    if method == "auto":
        method = "closed-form"
    if method not in ("closed-form", "sampled"):
        raise DomainError("unknown method %r" % method)
    if grid is None:
        grid = (1 << 12 if n == 2 else 100_000) if method == "closed-form" else (
            512 if n == 2 else 400)
    U = sphere_grid(n, grid, seed)
    if n == 2 and M.shape.breakpoints:
        bp = np.asarray(M.shape.breakpoints)
        side = np.concatenate([bp - 1e-12, bp + 1e-12])
        U = np.vstack([U, np.stack([np.cos(side), np.sin(side)], axis=1)])
    pts = M.radial(U)[:, None] * U
    if method == "sampled":
        sched = sched or EpsSchedule.default(M)
        alphas = np.array([alpha_at(M, p, sched) for p in pts])
        k = int(np.argmin(alphas))
        return AlphaProfile(pts, alphas, float(alphas[k]), "sampled-liminf", pts[k],
                            alpha_levels(M, pts[k], sched))
    alphas = closed_form_alpha(M, U)
    rng = np.random.default_rng(seed)
    step = TWO_PI / grid if n == 2 else np.sqrt(4 * np.pi / grid)
    order = np.argsort(alphas)[:8]
    extra_u, extra_a = [], []
    for k in order:
        a, v = _local_min_alpha(M, U[k], step, rng)
        extra_u.append(v)
        extra_a.append(a)
    U = np.vstack([U, np.array(extra_u)])
    alphas = np.concatenate([alphas, extra_a])
    pts = M.radial(U)[:, None] * U
    k = int(np.argmin(alphas))
    return AlphaProfile(pts, alphas, float(alphas[k]), "closed-form-polar", pts[k])


def alpha_profile_2d(M: StarlikeBoundary, count: int = 1 << 12):
    """Parameters ``t`` and folded tangent angles ``alpha_t`` of a planar boundary."""
    curve = M.polar_curve()
    t = np.linspace(0.0, TWO_PI, count, endpoint=False)
    c = curve.derivative(t) / curve.radius(t)
    return t, np.arctan2(1.0, np.abs(c))


# ---------------------------------------------------------------------------
# cone condition
# ---------------------------------------------------------------------------

def _cone_directions(axis: np.ndarray, beta: float, count: int = 64) -> np.ndarray:
    """Unit directions strictly inside the cone of half-angle ``beta`` around ``axis``."""
    n = axis.size
    if n == 2:
        half = count // 2
        g = beta * (np.arange(half) + 0.5) / half
        g = np.concatenate([g, -g])
        t0 = np.arctan2(axis[1], axis[0])
        return np.stack([np.cos(t0 + g), np.sin(t0 + g)], axis=1)
    basis = np.linalg.svd(axis[None, :])[2][1:]
    rings = 8
    per = count // rings
    g = beta * (np.arange(rings) + 0.5) / rings
    psi = TWO_PI * np.arange(per) / per
    G, P = np.meshgrid(g, psi, indexing="ij")
    G, P = G.ravel(), P.ravel()
    if n == 3:
        V = np.cos(P)[:, None] * basis[0] + np.sin(P)[:, None] * basis[1]
    else:
        w = np.random.default_rng(1).normal(size=(G.size, n - 1))
        V = (w / np.linalg.norm(w, axis=1, keepdims=True)) @ basis
    return np.cos(G)[:, None] * axis + np.sin(G)[:, None] * V


def beta_cone_violations(M: StarlikeBoundary, beta: float, samples: Optional[int] = None,
                         vertex_scale: float = 1.0, directions: int = 64, depths: int = 16):
    """Boundary points whose inward cone of half-angle ``beta`` leaves the domain.

    The cone at ``x`` opens toward the origin and has slant height ``|x|``.
    Returns a list of ``(vertex, witness)`` pairs, one per failing vertex; an
    empty list only means no failure was seen at this resolution.
    ``vertex_scale`` moves the vertices off the boundary (test fixtures).
    """
    if not 0 < beta <= np.pi / 4:
        raise DomainError("beta must lie in (0, pi/4]")
    if samples is None:
        samples = 4096 if M.dimension == 2 else 20000
    U = sphere_grid(M.dimension, samples)
    if M.dimension == 2 and M.shape.breakpoints:
        bp = np.asarray(M.shape.breakpoints)
        U = np.vstack([U, np.stack([np.cos(bp), np.sin(bp)], axis=1)])
    X = vertex_scale * M.radial(U)[:, None] * U
    frac = np.arange(1, depths + 1) / (depths + 1)
    out = []
    for x, u in zip(X, U):
        D = _cone_directions(-u, beta, directions)
        Z = x + (np.linalg.norm(x) * frac)[:, None, None] * D[None, :, :]
        Z = Z.reshape(-1, x.size)
        bad = ~M.contains(Z)
        if bad.any():
            out.append((x, Z[int(np.argmax(bad))]))
    return out


# ---------------------------------------------------------------------------
# radial projection
# ---------------------------------------------------------------------------

SetLike = Union[PointCloud, StarlikeBoundary, np.ndarray]


def _sampler_for(A: SetLike) -> tuple[PairSampler, float]:
    if isinstance(A, StarlikeBoundary):
        return BoundaryPairs(A), A.r_min
    P = A.points if isinstance(A, PointCloud) else PointCloud(np.asarray(A, dtype=float)).points
    if len(P) < 2:
        raise DomainError("need at least two points")
    return CloudPairs(P), float(np.linalg.norm(P, axis=1).min())


def projection_ratio(X, Y):
    """``|x* - y*| / |x - y|`` row-wise, with validity mask for distinct pairs."""
    d = np.linalg.norm(X - Y, axis=1)
    valid = d > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.linalg.norm(radial_projection(X) - radial_projection(Y), axis=1) / d
    return r, valid


def lip_radial_projection(A: SetLike, pairs: int = 200_000, seed: int = 0) -> RatioEstimate:
    """Sampled Lipschitz constant of ``x -> x/|x|`` on a set away from the origin."""
    sampler, _ = _sampler_for(A)
    return scan_ratio(projection_ratio, sampler, pairs, seed)


def lip_polar_param(curve: PolarCurve2D, count: int = 1 << 16, exclude: float = 1e-6) -> float:
    """Essential sup of ``sqrt(r'^2 + r^2)``, i.e. the Lipschitz constant of ``t -> r(t)e^{it}``."""
    t = np.linspace(0.0, TWO_PI, count, endpoint=False)
    t = t[curve.distance_to_breakpoint(t) > exclude]
    return float(np.hypot(curve.derivative(t), curve.radius(t)).max())


def polar_lipschitz_bracket(M: StarlikeBoundary, alpha: float) -> tuple[float, float]:
    """``(r_min / sin a, r_max / sin a)``: the range containing the polar Lipschitz constant."""
    s = np.sin(alpha)
    return M.r_min / s, M.r_max / s


def polar_lower_ratio(M: StarlikeBoundary, pairs: int = 100_000, seed: int = 0,
                      near_scale: float = 1e-4) -> RatioEstimate:
    """Inf/sup of ``|phi(z) - phi(w)| / |z - w|`` over close pairs of unit directions.

    Half the pairs are anchored at the direction of the closest boundary point.
    """

    class _Near(PairSampler):
        def draw(self, rng, count):
            half = count // 2
            U = random_directions(rng, count, M.dimension)
            U[:half] = M.u_min
            W = _perturb_directions(rng, U, _log_uniform(rng, NEAR_FLOOR, near_scale, count))
            return U, W

        def descriptor(self):
            return {"sampler": "sphere-near", "near_scale": near_scale}

    def ratio(U, W):
        d = np.linalg.norm(U - W, axis=1)
        valid = d > 0
        P = M.radial(U)[:, None] * U
        Q = M.radial(W)[:, None] * W
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.linalg.norm(P - Q, axis=1) / d, valid

    return scan_ratio(ratio, _Near(), pairs, seed)


@dataclass(frozen=True)
class AdmissibilityReport:
    lip: float
    bound: float
    attains: bool
    witness: tuple
    radial_gap: float
    angular_gap: float
    gap_ratio: float
    estimate: RatioEstimate = field(repr=False)

    def to_dict(self):
        return {"lip": self.lip, "bound": self.bound, "attains": self.attains,
                "witness": [list(map(float, p)) for p in self.witness],
                "radial_gap": self.radial_gap, "angular_gap": self.angular_gap,
                "gap_ratio": self.gap_ratio}


def admissibility_diagnostic(A: SetLike, pairs: int = 200_000, seed: int = 0,
                             tolerance: float = 0.01) -> AdmissibilityReport:
    """Numeric evidence on whether the projection's Lipschitz constant reaches ``1/dist``.

    Reports the witness pair together with its radial gap ``||x| - |y||`` and
    angular gap (the angle at the origin); for admissible sets the radial gap
    becomes small relative to the angular one.
    """
    _, dist = _sampler_for(A)
    est = lip_radial_projection(A, pairs, seed)
    x, y = est.witness_sup
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    ang = float(np.arccos(np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0)))
    rad = float(abs(nx - ny))
    bound = 1.0 / dist
    return AdmissibilityReport(est.sup_value, bound, bool(est.sup_value >= (1 - tolerance) * bound),
                               (x, y), rad, ang, rad / ang if ang > 0 else float("inf"), est)
