"""Domain spec files: one JSON object with keys dimension, shape, params, sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InvalidGeometryError
from .geometry import StarlikeBoundary
from . import shapes as S


class SpecError(ValueError):
    """Malformed spec; ``line`` and ``column`` are set for JSON syntax errors."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = "%s (line %d, column %d)" % (message, line, column)
        super().__init__(message)
        self.line = line
        self.column = column


TOP_KEYS = {"dimension", "shape", "params", "sampling"}
SAMPLING_KEYS = {"seed", "pairs", "alpha_grid", "metric_pairs"}

# shape -> (allowed params, fixed dimension or None)
SHAPES = {
    "ball": ({"radius"}, None),
    "square": ({"half_side"}, 2),
    "cube": ({"half_side"}, 3),
    "box": ({"half_sides"}, None),
    "ellipse": ({"semi_axes"}, 2),
    "ellipsoid": ({"semi_axes"}, None),
    "cone": ({"apex", "base", "half_angle"}, 3),
    "cylinder": ({"radius", "half_height"}, 3),
    "polygon": ({"vertices"}, 2),
    "polar-table": ({"t", "r"}, 2),
    "polar-fourier": ({"c0", "terms"}, 2),
    "superellipse": ({"exponent", "half_side"}, 2),
}


@dataclass(frozen=True)
class DomainSpec:
    dimension: int
    shape: str
    params: dict = field(default_factory=dict)
    sampling: dict = field(default_factory=dict)

    def to_dict(self):
        return {"dimension": self.dimension, "shape": self.shape,
                "params": self.params, "sampling": self.sampling}

    def boundary(self) -> StarlikeBoundary:
        """Build the boundary; raises ``InvalidGeometryError`` for bad shapes."""
        p = self.params
        n = self.dimension
        k = self.shape
        try:
            if k == "ball":
                sh = S.Ball(float(p.get("radius", 1.0)), n)
            elif k in ("square", "cube"):
                sh = S.Box((float(p.get("half_side", 1.0)),) * n)
            elif k == "box":
                sh = S.Box(tuple(map(float, p["half_sides"])))
            elif k in ("ellipse", "ellipsoid"):
                axes = tuple(map(float, p.get("semi_axes", (1.0, 2.0))))
                sh = S.Ellipsoid(axes)
            elif k == "cone":
                sh = S.Cone(float(p.get("apex", 2.0)), float(p.get("base", 1.0)),
                            float(p.get("half_angle", 3.141592653589793 / 6)))
            elif k == "cylinder":
                sh = S.Cylinder(float(p.get("radius", 1.0)), float(p.get("half_height", 1.0)))
            elif k == "polygon":
                sh = S.Polygon(tuple(tuple(map(float, v)) for v in p["vertices"]))
            elif k == "polar-table":
                sh = S.polar_table(p["t"], p["r"])
            elif k == "polar-fourier":
                sh = S.polar_fourier(float(p["c0"]), p.get("terms", ()))
            elif k == "superellipse":
                sh = S.Superellipse(float(p.get("exponent", 4.0)), float(p.get("half_side", 1.0)))
            else:  # pragma: no cover - guarded by parse
                raise SpecError("unknown shape %r" % k)
        except KeyError as e:
            raise SpecError("shape %r needs parameter %s" % (k, e)) from None
        except (TypeError, ValueError) as e:
            if isinstance(e, (SpecError, InvalidGeometryError)):
                raise
            raise SpecError("bad parameter for %r: %s" % (k, e)) from None
        if sh.dimension != n:
            raise SpecError("shape %r has dimension %d, spec says %d" % (k, sh.dimension, n))
        return StarlikeBoundary.from_shape(sh)


def parse_spec(text: str) -> DomainSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError("invalid JSON: %s" % e.msg, e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise SpecError("spec must be a JSON object")
    extra = set(doc) - TOP_KEYS
    if extra:
        raise SpecError("unknown key(s): %s" % ", ".join(sorted(extra)))
    if "shape" not in doc or "dimension" not in doc:
        raise SpecError("spec needs 'dimension' and 'shape'")
    shape = doc["shape"]
    if shape not in SHAPES:
        raise SpecError("unknown shape %r (expected one of %s)" % (shape, ", ".join(sorted(SHAPES))))
    dim = doc["dimension"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 2:
        raise SpecError("dimension must be an integer >= 2")
    allowed, fixed = SHAPES[shape]
    if fixed is not None and dim != fixed:
        raise SpecError("shape %r is %d-dimensional, spec says %d" % (shape, fixed, dim))
    params = doc.get("params", {}) or {}
    sampling = doc.get("sampling", {}) or {}
    if not isinstance(params, dict) or not isinstance(sampling, dict):
        raise SpecError("'params' and 'sampling' must be objects")
    bad = set(params) - allowed
    if bad:
        raise SpecError("unknown parameter(s) for %r: %s" % (shape, ", ".join(sorted(bad))))
    bad = set(sampling) - SAMPLING_KEYS
    if bad:
        raise SpecError("unknown sampling key(s): %s" % ", ".join(sorted(bad)))
    if shape in ("ellipsoid", "ellipse") and "semi_axes" in params and len(params["semi_axes"]) != dim:
        raise SpecError("ellipsoid needs %d semi-axes" % dim)
    if shape == "box" and len(params.get("half_sides", ())) != dim:
        raise SpecError("box needs %d half-sides" % dim)
    return DomainSpec(dim, shape, params, sampling)


def load_spec(path: str) -> DomainSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())
