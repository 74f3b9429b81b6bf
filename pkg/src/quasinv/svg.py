"""Self-contained SVG figures written in model coordinates.

Coordinates are printed with ``repr`` so a reader recovers the exact floats.
The y axis is flipped with a group transform, so every polyline stores
mathematical (x, y) pairs.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional

import numpy as np

from .constants import KA_TABLE, optimal_exponent, stretch_dilatation
from .errors import DomainError
from .geometry import StarlikeBoundary, quasi_inversion_rows
from .tangent import alpha_global, alpha_profile_2d

SVG_NS = "http://www.w3.org/2000/svg"
MIN_SAMPLES = 1024
FIGURES = ("inversion-image", "alpha-profile", "constants-vs-alpha")
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _num(v) -> str:
    return repr(float(v))


def points_attr(P: np.ndarray) -> str:
    return " ".join("%s,%s" % (_num(x), _num(y)) for x, y in np.asarray(P, dtype=float))


def parse_points(text: str) -> np.ndarray:
    return np.array([[float(c) for c in pair.split(",")] for pair in text.split()])


class Figure:
    """Minimal SVG canvas over the model box ``[x0, x1] x [y0, y1]``."""

    def __init__(self, box, title: str, aspect: bool = True, width: int = 640, height: int = 640):
        x0, x1, y0, y1 = map(float, box)
        self.root = ET.Element("svg", {
            "xmlns": SVG_NS,
            "width": str(width),
            "height": str(height),
            "viewBox": " ".join(_num(v) for v in (x0, -y1, x1 - x0, y1 - y0)),
            "preserveAspectRatio": "xMidYMid meet" if aspect else "none",
        })
        ET.SubElement(self.root, "title").text = title
        self.group = ET.SubElement(self.root, "g", {"transform": "scale(1,-1)"})

    def polyline(self, P, role: str, color: str, closed: bool = False, **extra):
        P = np.asarray(P, dtype=float)
        if closed:
            P = np.vstack([P, P[:1]])
        attrs = {"data-role": role, "points": points_attr(P), "fill": "none",
                 "stroke": color, "stroke-width": "1.5",
                 "vector-effect": "non-scaling-stroke"}
        attrs.update({k.replace("_", "-"): str(v) for k, v in extra.items()})
        return ET.SubElement(self.group, "polyline", attrs)

    def marker(self, x, y, role: str, color: str, radius: float, **extra):
        attrs = {"data-role": role, "cx": _num(x), "cy": _num(y), "r": _num(radius),
                 "fill": color}
        attrs.update({k.replace("_", "-"): str(v) for k, v in extra.items()})
        return ET.SubElement(self.group, "circle", attrs)

    def tostring(self) -> str:
        ET.indent(self.root)
        return ET.tostring(self.root, encoding="unicode") + "\n"


def _box(P, pad=0.05):
    lo, hi = P.min(axis=0), P.max(axis=0)
    d = (hi - lo) * pad
    return lo[0] - d[0], hi[0] + d[0], lo[1] - d[1], hi[1] + d[1]


def inversion_image(M: StarlikeBoundary, radius: float = 0.5, samples: int = 2048) -> str:
    """The boundary, the circle of ``radius`` about 0 and its quasi-inversion image."""
    if M.dimension != 2:
        raise DomainError("2D only")
    samples = max(int(samples), MIN_SAMPLES)
    t = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    U = np.stack([np.cos(t), np.sin(t)], axis=1)
    B = M.radial(U)[:, None] * U
    C = radius * U
    F = quasi_inversion_rows(M, C)
    fig = Figure(_box(np.vstack([B, C, F])), "quasi-inversion image of a circle")
    fig.polyline(B, "boundary", COLORS[0], closed=True)
    fig.polyline(C, "source", COLORS[2], closed=True, data_radius=_num(radius))
    fig.polyline(F, "image", COLORS[1], closed=True)
    return fig.tostring()


def alpha_profile(M: StarlikeBoundary, samples: int = 4096) -> str:
    """Tangent angle against the polar parameter, with the minimum marked."""
    if M.dimension != 2:
        raise DomainError("2D only")
    t, a = alpha_profile_2d(M, max(int(samples), MIN_SAMPLES))
    k = int(np.argmin(a))
    fig = Figure((0.0, 2 * np.pi, 0.0, np.pi / 2), "tangent angle profile", aspect=False)
    fig.polyline(np.stack([t, a], axis=1), "alpha-profile", COLORS[0])
    fig.marker(t[k], a[k], "minimum", COLORS[1], 0.02, data_t=_num(t[k]),
               data_alpha=_num(a[k]))
    return fig.tostring()


def constants_vs_alpha(alpha: Optional[float] = None, samples: int = 1024,
                       low: float = 0.2, table=KA_TABLE) -> str:
    """``log K_a`` against the tangent angle for fixed exponents, with the envelope.

    Each curve touches the envelope ``cot(alpha/2)`` where ``a = csc(alpha)``;
    those points are marked, as is ``alpha`` when given.
    """
    s = np.linspace(low, np.pi / 2, max(int(samples), MIN_SAMPLES))
    env = np.log(1.0 / np.tan(s / 2))
    top = max(float(np.log(stretch_dilatation(a, low))) for a in table)
    fig = Figure((low, np.pi / 2, 0.0, top), "log K_a against alpha", aspect=False)
    for i, a in enumerate(table):
        y = np.log([stretch_dilatation(a, v) for v in s])
        fig.polyline(np.stack([s, y], axis=1), "stretch-dilatation", COLORS[i % len(COLORS)],
                     data_a=_num(a))
        if a >= 1.0:
            at = float(np.arcsin(1.0 / a))
            if low <= at <= np.pi / 2:
                fig.marker(at, np.log(stretch_dilatation(a, at)), "optimum", COLORS[i % len(COLORS)],
                           0.01, data_a=_num(a), data_alpha=_num(at))
    fig.polyline(np.stack([s, env], axis=1), "envelope", "#000000")
    if alpha is not None:
        a_opt, k_min = optimal_exponent(alpha)
        fig.marker(alpha, np.log(k_min), "domain-alpha", "#000000", 0.015,
                   data_alpha=_num(alpha), data_a=_num(a_opt))
    return fig.tostring()


def render(figure: str, M: StarlikeBoundary, radius: float = 0.5, samples: int = 2048) -> str:
    if figure == "inversion-image":
        return inversion_image(M, radius, samples)
    if figure == "alpha-profile":
        return alpha_profile(M, max(samples, 4096))
    if figure == "constants-vs-alpha":
        return constants_vs_alpha(alpha_global(M).alpha_global, samples)
    raise DomainError("unknown figure %r (expected one of %s)" % (figure, ", ".join(FIGURES)))


def read_polylines(text: str) -> dict:
    """Map ``data-role`` to the list of point arrays of the polylines carrying it."""
    root = ET.fromstring(text)
    out: dict = {}
    for el in root.iter("{%s}polyline" % SVG_NS):
        out.setdefault(el.get("data-role"), []).append(parse_points(el.get("points")))
    return out
