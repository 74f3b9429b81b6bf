"""Starlike boundaries and the elementary maps of the compactified space.

Points of the one-point compactification are numpy vectors or the singleton
``INF``.  The single-point maps honour the two-point conventions (0 and
infinity); passing an ``(N, n)`` array instead runs the vectorised branch,
which requires finite nonzero rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import shapes as _shapes
from .errors import DomainError, InvalidGeometryError
from .shapes import TWO_PI, Shape

__all__ = [
    "INF", "is_inf", "as_point", "ExtendedPoint", "StarlikeBoundary", "PolarCurve2D",
    "PointCloud", "sphere_grid", "radial_projection", "boundary_radius", "polar_point",
    "radial_extension", "radial_extension_inverse", "sphere_inversion", "quasi_inversion",
    "detect_breakpoints",
]


class _Infinity:
    """The point at infinity.  There is exactly one instance, ``INF``."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("quasinv.INF")

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()
ExtendedPoint = Union[np.ndarray, _Infinity]


def is_inf(x) -> bool:
    return x is INF


def as_point(x) -> ExtendedPoint:
    """Validate an extended point: ``INF`` or a finite vector of length >= 2."""
    if x is INF:
        return INF
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise DomainError("a point needs n >= 2 coordinates, got shape %s" % (p.shape,))
    if not np.all(np.isfinite(p)):
        raise DomainError("finite points need finite coordinates; use INF for infinity")
    return p


def _norm(X):
    return np.sqrt(np.sum(X * X, axis=-1))


def _pow2_prescale(X):
    # exact rescaling by a power of two so that s*x and x give identical
    # directions whenever s is a power of two
    m = np.max(np.abs(X), axis=-1, keepdims=True)
    _, e = np.frexp(np.where(m > 0, m, 1.0))
    return np.ldexp(X, -e)


def radial_projection(x):
    """Map ``x`` to ``x / |x|`` on the unit sphere.

    Works on a single vector or on the rows of an ``(N, n)`` array.
    """
    X = np.asarray(x, dtype=float)
    Y = _pow2_prescale(X)
    n = _norm(Y)
    if np.any(n == 0):
        raise DomainError("projection undefined at origin")
    return Y / n[..., None]


def sphere_grid(dimension: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform points on the unit sphere.

    Equispaced angles on the circle, a Fibonacci lattice on the 2-sphere and
    normalised Gaussian samples in higher dimensions.
    """
    if dimension == 2:
        t = np.linspace(0.0, TWO_PI, count, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if dimension == 3:
        k = np.arange(count) + 0.5
        z = 1.0 - 2.0 * k / count
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        phi = k * np.pi * (3.0 - np.sqrt(5.0))
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    g = np.random.default_rng(seed).normal(size=(count, dimension))
    return g / _norm(g)[:, None]


def _refine_extreme(shape: Shape, u0: np.ndarray, sign: float, start: float,
                    rng: np.random.Generator, rounds: int = 40, trials: int = 64):
    """Local random search on the sphere; ``sign=+1`` minimises r, ``-1`` maximises."""
    best_u = u0
    best = sign * shape.radial(u0[None, :])[0]
    step = start
    n = u0.size
    for _ in range(rounds):
        cand = best_u + step * rng.normal(size=(trials, n))
        cand /= _norm(cand)[:, None]
        vals = sign * shape.radial(cand)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, best_u = vals[j], cand[j]
        else:
            step *= 0.5
        if step < 1e-12:
            break
    return sign * best, best_u


@dataclass(frozen=True)
class StarlikeBoundary:
    """Boundary of a bounded domain that is strictly starlike w.r.t. the origin.

    Build one with the constructors (``ball``, ``square``, ``cube``,
    ``ellipse``, ``ellipsoid``, ``cone``, ``cylinder``, ``polygon``,
    ``polar_table``, ``polar_fourier``, ``superellipse``, ``polar``) or
    ``from_shape``.  ``r_min``/``r_max`` are sampled on a dense grid and
    polished by one local search around the extreme samples.
    """

    shape: Shape
    r_min: float
    r_max: float
    u_min: np.ndarray = field(repr=False)
    u_max: np.ndarray = field(repr=False)

    @classmethod
    def from_shape(cls, shape: Shape, samples: Optional[int] = None, seed: int = 0):
        n = shape.dimension
        if samples is None:
            samples = 1 << 16 if n == 2 else 1_000_000
        U = sphere_grid(n, samples, seed)
        if n == 2 and shape.breakpoints:
            bp = np.asarray(shape.breakpoints)
            U = np.vstack([U, np.stack([np.cos(bp), np.sin(bp)], axis=1)])
        R = shape.radial(U)
        if not np.all(np.isfinite(R)) or np.any(R <= 0):
            raise InvalidGeometryError("radial function must be positive and finite")
        spacing = np.sqrt(4.0 * np.pi / samples) if n > 2 else TWO_PI / samples
        rng = np.random.default_rng(seed)
        i, j = int(np.argmin(R)), int(np.argmax(R))
        rmin, umin = _refine_extreme(shape, U[i], 1.0, spacing, rng)
        rmax, umax = _refine_extreme(shape, U[j], -1.0, spacing, rng)
        if R[i] < rmin:
            rmin, umin = R[i], U[i]
        if R[j] > rmax:
            rmax, umax = R[j], U[j]
        umin = np.array(umin)
        umax = np.array(umax)
        umin.setflags(write=False)
        umax.setflags(write=False)
        return cls(shape, float(rmin), float(rmax), umin, umax)

    # named shapes ----------------------------------------------------------
    @classmethod
    def ball(cls, radius=1.0, dimension=2):
        return cls.from_shape(_shapes.Ball(float(radius), int(dimension)))

    @classmethod
    def square(cls, half_side=1.0):
        return cls.from_shape(_shapes.Box((float(half_side),) * 2))

    @classmethod
    def cube(cls, half_side=1.0):
        return cls.from_shape(_shapes.Box((float(half_side),) * 3))

    @classmethod
    def box(cls, half_sides):
        return cls.from_shape(_shapes.Box(tuple(float(c) for c in half_sides)))

    @classmethod
    def ellipse(cls, a=1.0, b=2.0):
        return cls.from_shape(_shapes.Ellipsoid((float(a), float(b))))

    @classmethod
    def ellipsoid(cls, semi_axes):
        return cls.from_shape(_shapes.Ellipsoid(tuple(float(c) for c in semi_axes)))

    @classmethod
    def cone(cls, apex=2.0, base=1.0, half_angle=np.pi / 6):
        return cls.from_shape(_shapes.Cone(float(apex), float(base), float(half_angle)))

    @classmethod
    def cylinder(cls, radius=1.0, half_height=1.0):
        return cls.from_shape(_shapes.Cylinder(float(radius), float(half_height)))

    @classmethod
    def polygon(cls, vertices):
        return cls.from_shape(_shapes.Polygon(tuple(tuple(map(float, v)) for v in vertices)))

    @classmethod
    def superellipse(cls, exponent=4.0, half_side=1.0):
        return cls.from_shape(_shapes.Superellipse(float(exponent), float(half_side)))

    @classmethod
    def polar_table(cls, t, r):
        return cls.from_shape(_shapes.polar_table(t, r))

    @classmethod
    def polar_fourier(cls, c0, terms=()):
        return cls.from_shape(_shapes.polar_fourier(c0, terms))

    @classmethod
    def polar(cls, r, r_prime=None, breakpoints=()):
        return cls.from_shape(_shapes.PolarShape(r=r, r_prime=r_prime,
                                                 corners=tuple(breakpoints)))

    # ------------------------------------------------------------------------
    @property
    def dimension(self) -> int:
        return self.shape.dimension

    @property
    def kind(self) -> str:
        return self.shape.kind

    def radial(self, U):
        """Radial function at unit vector(s) ``U``."""
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            return float(self.shape.radial(U[None, :])[0])
        return self.shape.radial(U)

    def log_gradient(self, U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            return self.shape.log_gradient(U[None, :])[0]
        return self.shape.log_gradient(U)

    def kink_gap(self, U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            return float(self.shape.kink_gap(U[None, :])[0])
        return self.shape.kink_gap(U)

    def contains(self, X) -> np.ndarray:
        """Membership in the open domain bounded by the surface."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = _norm(X)
        out = n == 0
        nz = ~out
        if np.any(nz):
            out[nz] = n[nz] < self.shape.radial(X[nz] / n[nz, None])
        return out

    def boundary_points(self, count: int, seed: int = 0) -> np.ndarray:
        U = sphere_grid(self.dimension, count, seed)
        return self.shape.radial(U)[:, None] * U

    def polar_curve(self) -> "PolarCurve2D":
        if self.dimension != 2:
            raise DomainError("polar curves are planar")
        sh = self.shape
        if isinstance(sh, _shapes.PolarShape):
            return PolarCurve2D(sh.r, sh.r_prime, sh.breakpoints)

        def r(t):
            t = np.asarray(t, dtype=float)
            U = np.stack([np.cos(t), np.sin(t)], axis=-1).reshape(-1, 2)
            return sh.radial(U).reshape(t.shape)

        def rp(t):
            t = np.asarray(t, dtype=float)
            U = np.stack([np.cos(t), np.sin(t)], axis=-1).reshape(-1, 2)
            G = sh.log_gradient(U)
            c = G[:, 0] * -U[:, 1] + G[:, 1] * U[:, 0]
            return (c * sh.radial(U)).reshape(t.shape)

        return PolarCurve2D(r, rp, sh.breakpoints)

    def describe(self) -> dict:
        return {"kind": self.kind, "dimension": self.dimension, **self.shape.params()}


def detect_breakpoints(r: Callable, samples: int = 4096, factor: float = 10.0) -> tuple:
    """Locate corners of a polar radius function from jumps in its derivative.

    A parameter is flagged when the jump of the central-difference derivative
    exceeds ``factor`` times the median jump of its neighbours.
    """
    t = np.linspace(0.0, TWO_PI, samples, endpoint=False)
    h = TWO_PI / samples
    rp = (r(t + h) - r(t - h)) / (2 * h)
    jump = np.abs(np.roll(rp, -1) - rp)
    window = np.stack([np.roll(jump, k) for k in (-3, -2, 2, 3)], axis=0)
    med = np.median(window, axis=0)
    scale = np.median(jump) + 1e-12 * max(1.0, float(np.abs(rp).max()))
    flagged = np.flatnonzero(jump > factor * np.maximum(med, scale))
    # a kink between samples shows up in two neighbouring jumps
    out = []
    for k in flagged:
        tk = float((t[k] + h) % TWO_PI)
        if not out or abs((tk - out[-1] + np.pi) % TWO_PI - np.pi) > 3 * h:
            out.append(tk)
    return tuple(out)


@dataclass(frozen=True)
class PolarCurve2D:
    """Polar parametrisation ``t -> r(t) e^{it}`` of a planar boundary.

    ``r_prime`` may be ``None``; then a central difference with step 1e-6 is
    used.  ``breakpoints`` lists the non-smooth parameters.
    """

    r: Callable[[np.ndarray], np.ndarray]
    r_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    breakpoints: tuple = ()

    @classmethod
    def from_function(cls, r, r_prime=None, breakpoints=None):
        if breakpoints is None:
            breakpoints = detect_breakpoints(r)
        return cls(r, r_prime, tuple(breakpoints))

    def radius(self, t):
        return self.r(np.asarray(t, dtype=float))

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.r_prime is not None:
            return self.r_prime(t)
        h = 1e-6
        return (self.r(t + h) - self.r(t - h)) / (2 * h)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.radius(t)[..., None] * np.stack([np.cos(t), np.sin(t)], axis=-1)

    def distance_to_breakpoint(self, t):
        bp = np.asarray(self.breakpoints, dtype=float)
        t = np.asarray(t, dtype=float)
        if bp.size == 0:
            return np.full(t.shape, np.inf)
        return np.abs((t[..., None] - bp + np.pi) % TWO_PI - np.pi).min(axis=-1)


@dataclass(frozen=True)
class PointCloud:
    """A finite point set away from the origin."""

    points: np.ndarray
    dist0: float = field(init=False)

    def __post_init__(self):
        P = np.array(self.points, dtype=float)
        if P.ndim != 2 or P.shape[1] < 2 or len(P) == 0:
            raise DomainError("a point cloud is a nonempty (N, n) array with n >= 2")
        if not np.all(np.isfinite(P)):
            raise DomainError("point cloud coordinates must be finite")
        d = float(_norm(P).min())
        if d <= 0:
            raise DomainError("point cloud touches the origin")
        P.setflags(write=False)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "dist0", d)

    @property
    def dimension(self):
        return self.points.shape[1]


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

def boundary_radius(M: StarlikeBoundary, x):
    """``r_x``: the norm of the boundary point on the ray through ``x``."""
    return M.radial(radial_projection(x))


def polar_point(M: StarlikeBoundary, u):
    """The boundary point ``r(u) u`` in direction ``u``."""
    U = np.asarray(u, dtype=float)
    if U.ndim == 1:
        return M.radial(U) * U
    return M.radial(U)[:, None] * U


def _batch(x):
    return isinstance(x, np.ndarray) and x.ndim == 2


def radial_extension(M: StarlikeBoundary, a: float, x):
    """``x -> |x|^a r(x/|x|) x/|x|`` with 0 and infinity fixed."""
    if a <= 0:
        raise DomainError("exponent must be positive")
    if x is INF:
        return INF
    X = np.asarray(x, dtype=float)
    n = _norm(X)
    if X.ndim == 1:
        if n == 0:
            return np.zeros_like(X)
        U = radial_projection(X)
        return n**a * M.radial(U) * U
    out = np.zeros_like(X)
    nz = n > 0
    U = radial_projection(X[nz])
    out[nz] = (n[nz] ** a * M.radial(U))[:, None] * U
    return out


def radial_extension_inverse(M: StarlikeBoundary, a: float, y):
    """Inverse of ``radial_extension``: ``y -> (|y| / r_y)^(1/a) y/|y|``."""
    if a <= 0:
        raise DomainError("exponent must be positive")
    if y is INF:
        return INF
    Y = np.asarray(y, dtype=float)
    n = _norm(Y)
    if Y.ndim == 1:
        if n == 0:
            return np.zeros_like(Y)
        U = radial_projection(Y)
        return (n / M.radial(U)) ** (1.0 / a) * U
    out = np.zeros_like(Y)
    nz = n > 0
    U = radial_projection(Y[nz])
    out[nz] = ((n[nz] / M.radial(U)) ** (1.0 / a))[:, None] * U
    return out


def sphere_inversion(center, radius: float, x):
    """Inversion ``x -> a + r^2 (x - a) / |x - a|^2`` in the sphere ``S(a, r)``."""
    if radius <= 0:
        raise DomainError("inversion radius must be positive")
    a = np.asarray(center, dtype=float)
    if x is INF:
        return a.copy()
    X = np.asarray(x, dtype=float)
    D = X - a
    d2 = np.sum(D * D, axis=-1)
    if X.ndim == 1:
        if d2 == 0:
            return INF
        return a + radius**2 * D / d2
    if np.any(d2 == 0):
        raise DomainError("batch inversion hit the centre; use single points for INF")
    return a + radius**2 * D / d2[:, None]


def quasi_inversion(M: StarlikeBoundary, x):
    """Quasi-inversion ``x -> r_x^2 x / |x|^2`` in the boundary ``M``.

    It fixes ``M`` pointwise, swaps 0 and infinity and maps each ray onto itself.
    """
    if x is INF:
        return np.zeros(M.dimension)
    X = np.asarray(x, dtype=float)
    d2 = np.sum(X * X, axis=-1)
    if X.ndim == 1:
        if d2 == 0:
            return INF
        r = M.radial(radial_projection(X))
        return r**2 * X / d2
    if np.any(d2 == 0):
        raise DomainError("batch quasi-inversion hit the origin; use single points for INF")
    r = M.shape.radial(radial_projection(X))
    return (r**2)[:, None] * X / d2[:, None]


def quasi_inversion_difference(M: StarlikeBoundary, X, Y):
    """Row-wise ``f(x) - f(y)`` for finite nonzero rows, without cancellation.

    Uses ``f(x) - f(y) = c_x (x - y) + (c_x - c_y) y`` with ``c = r^2 / |x|^2``
    and ``|y|^2 - |x|^2 = (y - x).(y + x)``, anchored at the longer of the two
    points, so close pairs keep full relative accuracy apart from the rounding
    of ``r`` itself.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    nx = np.sum(X * X, axis=1)
    ny = np.sum(Y * Y, axis=1)
    if np.any(nx == 0) or np.any(ny == 0):
        raise DomainError("difference undefined at the origin")
    swap = nx < ny
    if np.any(swap):
        X, Y = np.where(swap[:, None], Y, X), np.where(swap[:, None], X, Y)
        nx, ny = np.where(swap, ny, nx), np.where(swap, nx, ny)
    rx2 = M.shape.radial(radial_projection(X)) ** 2
    ry2 = M.shape.radial(radial_projection(Y)) ** 2
    D = X - Y
    gap = np.sum(-D * (X + Y), axis=1)
    dc = (rx2 * gap + (rx2 - ry2) * nx) / (nx * ny)
    out = (rx2 / nx)[:, None] * D + dc[:, None] * Y
    out[swap] *= -1.0
    return out


def extend_rows(f: Callable, X, at_zero: str, at_inf: str):
    """Apply a finite-point map to rows that may be zero or infinite.

    ``at_zero`` / ``at_inf`` name the image of those rows: ``"zero"`` or ``"inf"``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.empty_like(X)
    inf_rows = ~np.all(np.isfinite(X), axis=1)
    zero_rows = ~inf_rows & np.all(X == 0, axis=1)
    rest = ~(inf_rows | zero_rows)
    if rest.any():
        out[rest] = f(X[rest])
    out[zero_rows] = 0.0 if at_zero == "zero" else np.inf
    out[inf_rows] = 0.0 if at_inf == "zero" else np.inf
    return out


def quasi_inversion_rows(M: StarlikeBoundary, X):
    """Row-wise quasi-inversion with zero rows sent to ``inf`` and back."""
    return extend_rows(lambda Y: quasi_inversion(M, Y), X, "inf", "zero")


def radial_extension_rows(M: StarlikeBoundary, a: float, X):
    return extend_rows(lambda Y: radial_extension(M, a, Y), X, "zero", "inf")
