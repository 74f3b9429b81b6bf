"""Radial-function families for strictly starlike boundaries.

Every shape is described by its radial function ``r(u)`` on the unit sphere:
the boundary point in direction ``u`` is ``r(u) * u``.  Besides ``radial`` a
shape exposes

* ``log_gradient(U)`` -- the tangential gradient of ``log r`` on the sphere.
  Its norm is the cotangent of the tangent angle at a smooth boundary point.
* ``kink_gap(U)`` -- a proxy for the angular distance from ``u`` to the set of
  directions where the boundary is not smooth (``inf`` for smooth shapes).

All methods take an ``(N, n)`` array of unit vectors and are vectorised.
Convex shapes are written through gauge functions: ``r = 1 / max_k g_k(u)``
with every piece ``g_k`` positively homogeneous of degree one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidGeometryError

TWO_PI = 2.0 * np.pi


def tangential(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Project the rows of ``V`` onto the tangent spaces of the sphere at ``U``."""
    return V - np.sum(V * U, axis=-1, keepdims=True) * U


def angle_of(U: np.ndarray) -> np.ndarray:
    """Polar angle in ``[0, 2*pi)`` of planar unit vectors."""
    t = np.arctan2(U[..., 1], U[..., 0])
    return np.where(t < 0.0, t + TWO_PI, t)


def _circular_gap(t: np.ndarray, marks: np.ndarray) -> np.ndarray:
    if marks.size == 0:
        return np.full(np.shape(t), np.inf)
    d = np.abs((t[..., None] - marks[None, :] + np.pi) % TWO_PI - np.pi)
    return d.min(axis=-1)


class Shape:
    kind = "abstract"
    dimension: int = 2

    def radial(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_gradient(self, U: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def kink_gap(self, U: np.ndarray) -> np.ndarray:
        return np.full(U.shape[0], np.inf)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Polar angles of non-smooth boundary points (planar shapes only)."""
        return ()

    def params(self) -> dict:
        return {}


class GaugeShape(Shape):
    """Convex shape with radial function ``1 / max_k g_k``."""

    def _pieces(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return piece values ``(N, K)`` and their gradients ``(N, K, n)``."""
        raise NotImplementedError

    def _extra_gap(self, U: np.ndarray, active: np.ndarray) -> np.ndarray:
        return np.full(U.shape[0], np.inf)

    def radial(self, U):
        vals, _ = self._pieces(U)
        return 1.0 / vals.max(axis=1)

    def log_gradient(self, U):
        vals, grads = self._pieces(U)
        k = vals.argmax(axis=1)
        rows = np.arange(U.shape[0])
        g = vals[rows, k]
        dg = grads[rows, k]
        return tangential(U, -dg / g[:, None])

    def kink_gap(self, U):
        vals, _ = self._pieces(U)
        active = vals.argmax(axis=1)
        if vals.shape[1] > 1:
            top = np.sort(vals, axis=1)
            gap = (top[:, -1] - top[:, -2]) / top[:, -1]
        else:
            gap = np.full(U.shape[0], np.inf)
        return np.minimum(gap, self._extra_gap(U, active))


@dataclass(frozen=True)
class Ball(Shape):
    radius: float = 1.0
    dimension: int = 2
    kind = "ball"

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidGeometryError("ball radius must be positive")

    def radial(self, U):
        return np.full(U.shape[0], float(self.radius))

    def log_gradient(self, U):
        return np.zeros_like(U)

    def params(self):
        return {"radius": self.radius}


@dataclass(frozen=True)
class Box(GaugeShape):
    """Axis-parallel box ``|x_i| <= c_i``; square and cube are special cases."""

    half_sides: tuple[float, ...] = (1.0, 1.0)
    kind = "box"

    def __post_init__(self):
        if len(self.half_sides) < 2 or min(self.half_sides) <= 0:
            raise InvalidGeometryError("box needs n >= 2 positive half-sides")

    @property
    def dimension(self):
        return len(self.half_sides)

    def _pieces(self, U):
        c = np.asarray(self.half_sides, dtype=float)
        vals = np.abs(U) / c
        n = U.shape[1]
        grads = np.zeros((U.shape[0], n, n))
        idx = np.arange(n)
        grads[:, idx, idx] = np.sign(U) / c
        return vals, grads

    def radial(self, U):
        c = np.asarray(self.half_sides, dtype=float)
        return 1.0 / np.max(np.abs(U) / c, axis=1)

    @property
    def breakpoints(self):
        if self.dimension != 2:
            return ()
        a, b = self.half_sides
        t = np.arctan2(b, a)
        return (t, np.pi - t, np.pi + t, TWO_PI - t)

    def params(self):
        return {"half_sides": list(self.half_sides)}


@dataclass(frozen=True)
class Ellipsoid(GaugeShape):
    semi_axes: tuple[float, ...] = (1.0, 2.0)
    kind = "ellipsoid"

    def __post_init__(self):
        if len(self.semi_axes) < 2 or min(self.semi_axes) <= 0:
            raise InvalidGeometryError("ellipsoid needs n >= 2 positive semi-axes")

    @property
    def dimension(self):
        return len(self.semi_axes)

    def _pieces(self, U):
        a = np.asarray(self.semi_axes, dtype=float)
        g = np.sqrt(np.sum((U / a) ** 2, axis=1))
        grad = (U / a**2) / g[:, None]
        return g[:, None], grad[:, None, :]

    def params(self):
        return {"semi_axes": list(self.semi_axes)}


@dataclass(frozen=True)
class Cylinder(GaugeShape):
    """Solid cylinder ``x^2 + y^2 <= R^2, |z| <= h``."""

    radius: float = 1.0
    half_height: float = 1.0
    dimension = 3
    kind = "cylinder"

    def __post_init__(self):
        if self.radius <= 0 or self.half_height <= 0:
            raise InvalidGeometryError("cylinder dimensions must be positive")

    def _pieces(self, U):
        s = np.hypot(U[:, 0], U[:, 1])
        safe = np.where(s > 0, s, 1.0)
        vals = np.stack([s / self.radius, np.abs(U[:, 2]) / self.half_height], axis=1)
        grads = np.zeros((U.shape[0], 2, 3))
        grads[:, 0, 0] = U[:, 0] / safe / self.radius
        grads[:, 0, 1] = U[:, 1] / safe / self.radius
        grads[:, 1, 2] = np.sign(U[:, 2]) / self.half_height
        return vals, grads

    def params(self):
        return {"radius": self.radius, "half_height": self.half_height}


@dataclass(frozen=True)
class Cone(GaugeShape):
    """Solid circular cone with apex ``(0, 0, apex)`` and base plane ``z = -base``.

    ``half_angle`` is the angle between a generator and the axis.  The defaults
    give the cone ``(z - 2)^2 / 3 = x^2 + y^2, -1 <= z <= 2``.
    """

    apex: float = 2.0
    base: float = 1.0
    half_angle: float = np.pi / 6
    dimension = 3
    kind = "cone"

    def __post_init__(self):
        if self.apex <= 0 or self.base <= 0 or not 0 < self.half_angle < np.pi / 2:
            raise InvalidGeometryError("cone needs apex > 0, base > 0, half_angle in (0, pi/2)")

    def _pieces(self, U):
        s = np.hypot(U[:, 0], U[:, 1])
        safe = np.where(s > 0, s, 1.0)
        cot = 1.0 / np.tan(self.half_angle)
        vals = np.stack([(s * cot + U[:, 2]) / self.apex, -U[:, 2] / self.base], axis=1)
        grads = np.zeros((U.shape[0], 2, 3))
        grads[:, 0, 0] = cot * U[:, 0] / safe / self.apex
        grads[:, 0, 1] = cot * U[:, 1] / safe / self.apex
        grads[:, 0, 2] = 1.0 / self.apex
        grads[:, 1, 2] = -1.0 / self.base
        return vals, grads

    def _extra_gap(self, U, active):
        # the apex ray
        s = np.hypot(U[:, 0], U[:, 1])
        return np.where((active == 0) & (U[:, 2] > 0), s, np.inf)

    def params(self):
        return {"apex": self.apex, "base": self.base, "half_angle": self.half_angle}


@dataclass(frozen=True)
class Superellipse(GaugeShape):
    """Planar ``|x|^p + |y|^p <= c^p``; p = 2 is the disc, p -> inf the square."""

    exponent: float = 4.0
    half_side: float = 1.0
    dimension = 2
    kind = "superellipse"

    def __post_init__(self):
        if self.exponent < 2 or self.half_side <= 0:
            raise InvalidGeometryError("superellipse needs exponent >= 2 and half_side > 0")

    def _pieces(self, U):
        p = self.exponent
        A = np.abs(U)
        # scale by the largest component to stay finite for large p
        m = A.max(axis=1, keepdims=True)
        B = A / m
        S = np.sum(B**p, axis=1)
        g = m[:, 0] * S ** (1.0 / p)
        grad = np.sign(U) * B ** (p - 1) * (S ** (1.0 / p - 1.0))[:, None]
        return (g / self.half_side)[:, None], (grad / self.half_side)[:, None, :]

    def params(self):
        return {"exponent": self.exponent, "half_side": self.half_side}


@dataclass(frozen=True)
class Polygon(Shape):
    """Planar polygon, strictly starlike with respect to the origin.

    The radial function is evaluated by exact ray-edge intersection with the
    edge whose angular sector contains the direction.
    """

    vertices: tuple[tuple[float, float], ...]
    dimension = 2
    kind = "polygon"
    _v: np.ndarray = field(init=False, repr=False, compare=False)
    _cum: np.ndarray = field(init=False, repr=False, compare=False)
    _t0: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3 or not np.all(np.isfinite(v)):
            raise InvalidGeometryError("polygon needs at least 3 finite planar vertices")
        if np.any(np.hypot(v[:, 0], v[:, 1]) == 0):
            raise InvalidGeometryError("polygon vertex at the origin")
        w = np.roll(v, -1, axis=0)
        cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
        if np.all(cross < 0):
            v = v[::-1].copy()
            w = np.roll(v, -1, axis=0)
            cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
        if not np.all(cross > 0):
            raise InvalidGeometryError(
                "polygon is not strictly starlike w.r.t. the origin: some ray meets it twice")
        dot = np.sum(v * w, axis=1)
        sweep = np.arctan2(cross, dot)
        total = sweep.sum()
        if abs(total - TWO_PI) > 1e-9:
            raise InvalidGeometryError(
                "polygon winds %.6g times around the origin; rays would meet it repeatedly"
                % (total / TWO_PI))
        cum = np.concatenate([[0.0], np.cumsum(sweep)])
        cum[-1] = TWO_PI
        v.setflags(write=False)
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "_cum", cum)
        object.__setattr__(self, "_t0", float(np.arctan2(v[0, 1], v[0, 0])))

    def _edge(self, U):
        phi = (np.arctan2(U[:, 1], U[:, 0]) - self._t0) % TWO_PI
        k = np.searchsorted(self._cum, phi, side="right") - 1
        return np.clip(k, 0, len(self._v) - 1), phi

    def radial(self, U):
        k, _ = self._edge(U)
        p = self._v[k]
        d = self._v[(k + 1) % len(self._v)] - p
        num = p[:, 0] * d[:, 1] - p[:, 1] * d[:, 0]
        den = U[:, 0] * d[:, 1] - U[:, 1] * d[:, 0]
        return num / den

    def log_gradient(self, U):
        k, _ = self._edge(U)
        d = self._v[(k + 1) % len(self._v)] - self._v[k]
        nu = np.stack([d[:, 1], -d[:, 0]], axis=1)
        return U - nu / np.sum(U * nu, axis=1, keepdims=True)

    def kink_gap(self, U):
        _, phi = self._edge(U)
        return _circular_gap(phi, self._cum[:-1])

    @property
    def breakpoints(self):
        return tuple(sorted(float((self._t0 + c) % TWO_PI) for c in self._cum[:-1]))

    def params(self):
        return {"vertices": [list(map(float, p)) for p in self.vertices]}


@dataclass(frozen=True)
class PolarShape(Shape):
    """Planar boundary given by a polar radius function ``r(t)``.

    ``r_prime`` may be omitted, in which case a central difference with step
    ``1e-6`` is used.
    """

    r: Callable[[np.ndarray], np.ndarray]
    r_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    corners: tuple[float, ...] = ()
    label: str = "polar"
    info: dict = field(default_factory=dict, compare=False)
    dimension = 2

    @property
    def kind(self):
        return self.label

    def derivative(self, t):
        if self.r_prime is not None:
            return self.r_prime(t)
        h = 1e-6
        return (self.r(t + h) - self.r(t - h)) / (2 * h)

    def radial(self, U):
        return self.r(angle_of(U))

    def log_gradient(self, U):
        t = angle_of(U)
        c = self.derivative(t) / self.r(t)
        return c[:, None] * np.stack([-U[:, 1], U[:, 0]], axis=1)

    def kink_gap(self, U):
        return _circular_gap(angle_of(U), np.asarray(self.corners, dtype=float))

    @property
    def breakpoints(self):
        return tuple(sorted(float(c) % TWO_PI for c in self.corners))

    def params(self):
        return dict(self.info)


def polar_fourier(c0: float, terms=()) -> PolarShape:
    """``r(t) = c0 + sum_k (a_k cos kt + b_k sin kt)`` with ``terms = [(k, a_k, b_k), ...]``."""
    terms = tuple((int(k), float(a), float(b)) for k, a, b in terms)
    ks = np.array([k for k, _, _ in terms], dtype=float)
    ca = np.array([a for _, a, _ in terms])
    cb = np.array([b for _, _, b in terms])
    if any(k < 1 for k, _, _ in terms):
        raise InvalidGeometryError("Fourier modes must be positive integers")

    def r(t):
        t = np.asarray(t, dtype=float)
        kt = t[..., None] * ks
        return c0 + np.sum(ca * np.cos(kt) + cb * np.sin(kt), axis=-1)

    def rp(t):
        t = np.asarray(t, dtype=float)
        kt = t[..., None] * ks
        return np.sum(ks * (cb * np.cos(kt) - ca * np.sin(kt)), axis=-1)

    floor = c0 - np.sum(np.hypot(ca, cb))
    if floor <= 0:
        tt = np.linspace(0, TWO_PI, 1 << 14, endpoint=False)
        if np.min(r(tt)) <= 0:
            raise InvalidGeometryError("Fourier radius is not positive everywhere")
    return PolarShape(r=r, r_prime=rp, label="polar-fourier",
                      info={"c0": float(c0), "terms": [list(x) for x in terms]})


def polar_table(t, r) -> PolarShape:
    """Periodic cubic-spline interpolation of tabulated polar samples.

    Parameters must be strictly increasing within ``[0, 2*pi)``.  The
    interpolant may not dip below half of the smallest sample.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if t.ndim != 1 or t.shape != r.shape or len(t) < 4:
        raise InvalidGeometryError("polar table needs matching 1-D arrays of >= 4 samples")
    if np.any(np.diff(t) <= 0) or t[0] < 0 or t[-1] >= TWO_PI:
        raise InvalidGeometryError("polar table angles must increase strictly within [0, 2pi)")
    if np.any(r <= 0) or not np.all(np.isfinite(r)):
        raise InvalidGeometryError("polar table radii must be positive and finite")
    spline = CubicSpline(np.append(t, t[0] + TWO_PI), np.append(r, r[0]), bc_type="periodic")
    floor = 0.5 * r.min()
    dense = np.linspace(t[0], t[0] + TWO_PI, 1 << 14, endpoint=False)
    if spline(dense).min() < floor:
        raise InvalidGeometryError(
            "cubic interpolation of the polar table drops below half the smallest radius")
    t0 = t[0]

    def rf(s):
        return spline((np.asarray(s, dtype=float) - t0) % TWO_PI + t0)

    def rp(s):
        return spline((np.asarray(s, dtype=float) - t0) % TWO_PI + t0, 1)

    return PolarShape(r=rf, r_prime=rp, label="polar-table",
                      info={"t": t.tolist(), "r": r.tolist()})
