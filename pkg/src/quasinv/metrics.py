"""Chordal, Möbius (absolute ratio) and Ferrand metrics.

The chordal metric is exact.  The other two are evaluated on a finite sample
of the boundary of a region: the absolute ratio metric as a sup over sample
pairs, and Ferrand's metric as a shortest path through a weighted grid graph
followed by a smoothing pass on the winning polyline.

Regions are described by boundary components (maps from unit directions to
boundary points) together with a membership test, which makes images of
regions under Möbius or affine maps easy to represent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import ConvexHull, cKDTree

from .errors import DomainError, ResolutionError
from .geometry import INF, StarlikeBoundary, as_point, sphere_grid

# ---------------------------------------------------------------------------
# chordal metric
# ---------------------------------------------------------------------------


def chordal(x, y) -> float:
    """Chordal distance between two points of the compactified space."""
    x, y = as_point(x), as_point(y)
    if x is INF and y is INF:
        return 0.0
    if x is INF or y is INF:
        p = y if x is INF else x
        return float(1.0 / np.sqrt(1.0 + p @ p))
    return float(np.linalg.norm(x - y) / np.sqrt((1.0 + x @ x) * (1.0 + y @ y)))


def chordal_batch(X, Y) -> np.ndarray:
    """Row-wise chordal distance; rows of ``inf`` stand for the point at infinity."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    xi = ~np.all(np.isfinite(X), axis=-1)
    yi = ~np.all(np.isfinite(Y), axis=-1)
    Xf = np.where(xi[..., None], 0.0, X)
    Yf = np.where(yi[..., None], 0.0, Y)
    nx = 1.0 + np.sum(Xf * Xf, axis=-1)
    ny = 1.0 + np.sum(Yf * Yf, axis=-1)
    q = np.linalg.norm(Xf - Yf, axis=-1) / np.sqrt(nx * ny)
    q = np.where(xi & ~yi, 1.0 / np.sqrt(ny), q)
    q = np.where(yi & ~xi, 1.0 / np.sqrt(nx), q)
    return np.where(xi & yi, 0.0, q)


# ---------------------------------------------------------------------------
# Möbius maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MobiusMap:
    """Composition of sphere inversions and similarities, applied left to right.

    Each step is ``("inversion", center, radius)`` or
    ``("similarity", scale, Q, shift)`` meaning ``x -> scale * Q x + shift``.
    """

    steps: tuple = ()
    dimension: int = 2

    @classmethod
    def identity(cls, dimension=2):
        return cls((), dimension)

    @classmethod
    def inversion(cls, center, radius=1.0):
        c = np.asarray(center, dtype=float)
        if radius <= 0:
            raise DomainError("inversion radius must be positive")
        return cls((("inversion", c, float(radius)),), c.size)

    @classmethod
    def similarity(cls, scale=1.0, Q=None, shift=None, dimension=2):
        if scale <= 0:
            raise DomainError("similarity scale must be positive")
        Q = np.eye(dimension) if Q is None else np.asarray(Q, dtype=float)
        if not np.allclose(Q @ Q.T, np.eye(Q.shape[0]), atol=1e-12):
            raise DomainError("Q must be orthogonal")
        b = np.zeros(Q.shape[0]) if shift is None else np.asarray(shift, dtype=float)
        return cls((("similarity", float(scale), Q, b),), Q.shape[0])

    def then(self, other: "MobiusMap") -> "MobiusMap":
        return MobiusMap(self.steps + other.steps, self.dimension)

    def inverse(self) -> "MobiusMap":
        out = []
        for st in reversed(self.steps):
            if st[0] == "inversion":
                out.append(st)
            else:
                _, s, Q, b = st
                out.append(("similarity", 1.0 / s, Q.T, -(Q.T @ b) / s))
        return MobiusMap(tuple(out), self.dimension)

    def __call__(self, X):
        """Apply to one extended point or to the rows of an array (rows may become inf)."""
        if X is INF or (isinstance(X, np.ndarray) and X.ndim == 1) or (
                not isinstance(X, np.ndarray) and np.ndim(X) == 1):
            return self._point(X)
        Y = np.array(X, dtype=float)
        for st in self.steps:
            if st[0] == "inversion":
                _, c, r = st
                fin = np.all(np.isfinite(Y), axis=1)
                D = Y - c
                d2 = np.sum(D * D, axis=1)
                with np.errstate(divide="ignore", invalid="ignore"):
                    Z = c + r * r * D / d2[:, None]
                Z[fin & (d2 == 0)] = np.inf
                Z[~fin] = c
                Y = Z
            else:
                _, s, Q, b = st
                Y = s * Y @ Q.T + b
        return Y

    def _point(self, x):
        from .geometry import sphere_inversion
        p = as_point(x)
        for st in self.steps:
            if st[0] == "inversion":
                p = sphere_inversion(st[1], st[2], p)
            elif p is not INF:
                p = st[1] * st[2] @ p + st[3]
        return p


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


def _finite_rows(X):
    return np.all(np.isfinite(X), axis=1)


@dataclass(frozen=True)
class Region:
    """Open set given by boundary components and a membership test.

    ``components`` map ``(k, n)`` unit directions to boundary points.
    ``bounded`` is False when the region contains the point at infinity.
    """

    components: tuple
    inside: Callable[[np.ndarray], np.ndarray]
    dimension: int
    label: str = "region"
    bounded: bool = True

    @classmethod
    def starlike(cls, M: StarlikeBoundary, label=None):
        return cls((lambda U: M.radial(U)[:, None] * U,), M.contains, M.dimension,
                   label or "starlike:%s" % M.kind)

    @classmethod
    def ball(cls, center=None, radius=1.0, dimension=2):
        c = np.zeros(dimension) if center is None else np.asarray(center, dtype=float)

        def inside(X):
            return np.linalg.norm(np.atleast_2d(X) - c, axis=1) < radius

        return cls((lambda U: c + radius * U,), inside, c.size, "ball")

    @classmethod
    def annulus(cls, inner, outer, dimension=2):
        if not 0 < inner < outer:
            raise DomainError("need 0 < inner < outer")

        def inside(X):
            r = np.linalg.norm(np.atleast_2d(X), axis=1)
            return (r > inner) & (r < outer)

        return cls((lambda U: inner * U, lambda U: outer * U), inside, dimension, "annulus")

    @classmethod
    def radial(cls, radius_fn: Callable, dimension=2, label="radial"):
        """Domain ``{x : |x| < radius_fn(x/|x|)}`` for a positive function on the sphere."""

        def inside(X):
            X = np.atleast_2d(X)
            n = np.linalg.norm(X, axis=1)
            out = n == 0
            nz = ~out & np.isfinite(n)
            out[nz] = n[nz] < radius_fn(X[nz] / n[nz, None])
            return out

        return cls((lambda U: radius_fn(U)[:, None] * U,), inside, dimension, label)

    def mapped(self, f: Callable, f_inv: Callable, label=None, bounded=True) -> "Region":
        """Image under a homeomorphism given with its inverse (both act on row arrays)."""
        comps = tuple((lambda U, c=c: f(c(U))) for c in self.components)
        base = self.inside

        def inside(Y):
            Y = np.atleast_2d(np.asarray(Y, dtype=float))
            out = np.zeros(len(Y), dtype=bool)
            fin = _finite_rows(Y)
            X = f_inv(Y[fin])
            ok = _finite_rows(X)
            sub = np.zeros(fin.sum(), dtype=bool)
            sub[ok] = base(X[ok])
            out[fin] = sub
            return out

        return Region(comps, inside, self.dimension, label or "image(%s)" % self.label, bounded)

    def mobius_image(self, m: MobiusMap) -> "Region":
        pole = m.inverse()(INF)
        if pole is INF:
            bounded = self.bounded
        else:
            bounded = not bool(self.inside(pole[None, :])[0])
        return self.mapped(m, m.inverse(), "mobius(%s)" % self.label, bounded)

    def boundary(self, count: int, seed: int = 0):
        """``(points, component index, directions)`` with ``count`` samples in total."""
        k = len(self.components)
        pts, comp, dirs = [], [], []
        for i, c in enumerate(self.components):
            m = count // k + (1 if i < count % k else 0)
            U = sphere_grid(self.dimension, m, seed)
            pts.append(c(U))
            comp.append(np.full(m, i))
            dirs.append(U)
        return np.vstack(pts), np.concatenate(comp), np.vstack(dirs)

    def bbox(self, count: int = 4096):
        if not self.bounded:
            raise DomainError("region contains infinity; no bounding box")
        P, _, _ = self.boundary(count)
        P = P[_finite_rows(P)]
        return P.min(axis=0), P.max(axis=0)


# ---------------------------------------------------------------------------
# boundary discretisation and the absolute ratio metric
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryDiscretization:
    """Boundary samples of a region at a refinement level (``base * 2**level`` points)."""

    region: Region
    base: int = 2048
    refinement: int = 0
    points: np.ndarray = field(init=False, repr=False)
    component: np.ndarray = field(init=False, repr=False)
    directions: np.ndarray = field(init=False, repr=False)
    spacing: float = field(init=False)
    _tree: cKDTree = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        P, C, U = self.region.boundary(self.base * 2 ** self.refinement)
        ok = _finite_rows(P)
        P, C, U = P[ok], C[ok], U[ok]
        if len(P) < 2:
            raise DomainError("need at least two boundary points")
        tree = cKDTree(P)
        d, _ = tree.query(P, k=2)
        for name, val in (("points", P), ("component", C), ("directions", U)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "spacing", float(d[:, 1].max()))
        object.__setattr__(self, "_tree", tree)

    @property
    def count(self):
        return len(self.points)

    def refined(self) -> "BoundaryDiscretization":
        return BoundaryDiscretization(self.region, self.base, self.refinement + 1)

    def distance_to_boundary(self, X) -> np.ndarray:
        d, _ = self._tree.query(np.atleast_2d(X))
        return d

    def near(self, index: int, count: int = 64, width: float = 2.0):
        """Extra boundary samples around sample ``index`` (within ``width`` grid steps)."""
        n = self.region.dimension
        u = self.directions[index]
        step = 2 * np.pi / self.count if n == 2 else np.sqrt(4 * np.pi / self.count)
        comp = self.region.components[int(self.component[index])]
        if n == 2:
            s = width * step * np.linspace(-1, 1, count)
            t = np.arctan2(u[1], u[0]) + s
            U = np.stack([np.cos(t), np.sin(t)], axis=1)
        else:
            rng = np.random.default_rng(index)
            U = u + width * step * rng.uniform(-1, 1, size=(count, n))
            U /= np.linalg.norm(U, axis=1, keepdims=True)
        P = comp(U)
        return P[_finite_rows(P)]


def _check_clear(disc: BoundaryDiscretization, X):
    d = disc.distance_to_boundary(X)
    if np.any(d < disc.spacing):
        raise ResolutionError("metric diverges near boundary at this resolution")


def _ratio_matrix(A, B, x, y):
    """``|a-b| |x-y| / (|a-x| |b-y|)`` for all pairs of rows of A and B."""
    if x is INF and y is INF:
        return np.zeros((len(A), len(B)))
    D = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    if x is INF:
        return D / np.linalg.norm(B - y, axis=1)[None, :]
    if y is INF:
        return D / np.linalg.norm(A - x, axis=1)[:, None]
    p = 1.0 / np.linalg.norm(A - x, axis=1)
    q = 1.0 / np.linalg.norm(B - y, axis=1)
    return D * p[:, None] * q[None, :] * np.linalg.norm(x - y)


def _sup_pairs(P, x, y, block=1024):
    best, bi, bj = -1.0, 0, 0
    for s in range(0, len(P), block):
        R = _ratio_matrix(P[s:s + block], P, x, y)
        k = int(np.argmax(R))
        i, j = divmod(k, R.shape[1])
        if R[i, j] > best:
            best, bi, bj = float(R[i, j]), s + i, j
    return best, bi, bj


@dataclass(frozen=True)
class DeltaResult:
    value: float
    coarse: float
    witness: tuple


def mobius_delta_result(disc: BoundaryDiscretization, x, y, refine: bool = True) -> DeltaResult:
    """Absolute ratio distance with the unrefined value kept as an error bar."""
    x = as_point(x)
    y = as_point(y)
    if x is not INF and y is not INF and np.array_equal(x, y):
        return DeltaResult(0.0, 0.0, (None, None))
    fin = [p for p in (x, y) if p is not INF]
    if fin:
        _check_clear(disc, np.array(fin))
    P = disc.points
    s, i, j = _sup_pairs(P, x, y)
    coarse = float(np.log1p(s))
    wit = (P[i], P[j])
    if refine:
        A = np.vstack([disc.near(i), P[i:i + 1]])
        B = np.vstack([disc.near(j), P[j:j + 1]])
        for AA, BB in ((A, P), (P, B), (A, B)):
            R = _ratio_matrix(AA, BB, x, y)
            k = int(np.argmax(R))
            a, b = divmod(k, R.shape[1])
            if R[a, b] > s:
                s, wit = float(R[a, b]), (AA[a], BB[b])
    return DeltaResult(float(np.log1p(s)), coarse, wit)


def mobius_delta(disc: BoundaryDiscretization, x, y, refine: bool = True) -> float:
    """``log(1 + sup |a-b||x-y| / (|a-x||b-y|))`` over boundary sample pairs.

    The sup over a finite sample bounds the true value from below.  One extra
    pass resamples the boundary around the maximising pair.  A point at
    infinity uses the limiting form of the ratio (experimental).
    """
    return mobius_delta_result(disc, x, y, refine).value


# ---------------------------------------------------------------------------
# Ferrand density
# ---------------------------------------------------------------------------


def _diameter_exact(Q):
    idx_map = np.arange(len(Q))
    if len(Q) > Q.shape[1] + 1:
        try:
            idx_map = ConvexHull(Q).vertices
        except Exception:
            pass
    Q_h = Q[idx_map]
    D = np.linalg.norm(Q_h[:, None, :] - Q_h[None, :, :], axis=2)
    k = int(np.argmax(D))
    i, j = divmod(k, D.shape[1])
    return float(D[i, j]), int(idx_map[i]), int(idx_map[j])


def _invert_about(P, x):
    D = P - x
    return D / np.sum(D * D, axis=1, keepdims=True)


def ferrand_density(disc: BoundaryDiscretization, x, refine: bool = True) -> float:
    """``w(x) = sup |a-b| / (|x-a||x-b|)`` over boundary sample pairs.

    This is the diameter of the boundary samples after inversion about ``x``;
    it is computed exactly over the samples through their convex hull.
    """
    x = as_point(x)
    if x is INF:
        raise DomainError("density undefined at infinity")
    _check_clear(disc, x[None, :])
    P = disc.points
    w, i, j = _diameter_exact(_invert_about(P, x))
    if refine:
        A = np.vstack([disc.near(i), disc.near(j), P])
        w2, _, _ = _diameter_exact(_invert_about(A, x))
        w = max(w, w2)
    return w


def _direction_set(n, count):
    if n == 2:
        t = np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    U = sphere_grid(n, 2 * count)
    return U[U[:, -1] >= 0][:count]


def density_batch(P: np.ndarray, X: np.ndarray, directions: int = 64, block: int = 256):
    """Ferrand density at many points from directional widths of the inverted samples.

    For each point the extreme samples in every direction give candidate
    pairs; the largest true pair distance is returned, so the value never
    exceeds the sampled sup and misses it only by ``O(directions^-2)``.
    Also returns the index pairs attaining the values.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    W = _direction_set(n, directions)
    out = np.empty(len(X))
    ia = np.empty(len(X), dtype=int)
    ib = np.empty(len(X), dtype=int)
    for s in range(0, len(X), block):
        Xs = X[s:s + block]
        D = P[None, :, :] - Xs[:, None, :]
        Q = D / np.sum(D * D, axis=2, keepdims=True)
        proj = np.matmul(W[None, :, :], Q.transpose(0, 2, 1))
        hi = np.argmax(proj, axis=2)
        lo = np.argmin(proj, axis=2)
        rows = np.arange(len(Xs))[:, None]
        dist = np.linalg.norm(Q[rows, hi] - Q[rows, lo], axis=2)
        k = np.argmax(dist, axis=1)
        r = np.arange(len(Xs))
        out[s:s + block] = dist[r, k]
        ia[s:s + block] = hi[r, k]
        ib[s:s + block] = lo[r, k]
    return out, ia, ib


# ---------------------------------------------------------------------------
# Ferrand metric on a grid graph
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InteriorGraph:
    """Grid nodes inside a region joined to their 8 (or 26) neighbours.

    Edge weight is the density at the edge midpoint times the edge length.
    """

    disc: BoundaryDiscretization
    nodes: np.ndarray = field(repr=False)
    matrix: object = field(repr=False)
    spacing: float
    node_density: np.ndarray = field(repr=False)
    _tree: cKDTree = field(repr=False, compare=False)

    @property
    def edge_count(self):
        return self.matrix.nnz // 2

    def edges(self):
        """``(i, j, weight)`` triples with ``i < j``."""
        C = self.matrix.tocoo()
        keep = C.row < C.col
        return np.stack([C.row[keep], C.col[keep], C.data[keep]], axis=1)


def build_graph(disc: BoundaryDiscretization, spacing: Optional[float] = None,
                cells: int = 64, margin: float = 0.5, directions: int = 64) -> InteriorGraph:
    """Uniform grid clipped to the region, with nodes at least ``margin * spacing``
    away from the boundary samples."""
    region = disc.region
    lo, hi = region.bbox()
    n = region.dimension
    if spacing is None:
        spacing = float((hi - lo).max()) / cells
    axes = [np.arange(lo[k] + 0.5 * spacing, hi[k], spacing) for k in range(n)]
    shape = tuple(len(a) for a in axes)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    ok = region.inside(grid) & (disc.distance_to_boundary(grid) >= margin * spacing)
    ids = -np.ones(len(grid), dtype=np.int64)
    ids[ok] = np.arange(ok.sum())
    nodes = grid[ok]
    idx = np.stack(np.unravel_index(np.flatnonzero(ok), shape), axis=1)
    offsets = [o for o in np.ndindex(*(3,) * n)]
    offsets = [np.array(o) - 1 for o in offsets]
    # keep half of the neighbour stencil; the graph is undirected
    offsets = [o for o in offsets if any(o) and tuple(o) > tuple(-o)]
    rows, cols, mids, lens = [], [], [], []
    for o in offsets:
        j = idx + o
        valid = np.all((j >= 0) & (j < np.array(shape)), axis=1)
        src = np.flatnonzero(valid)
        tgt = ids[np.ravel_multi_index(j[valid].T, shape)]
        keep = tgt >= 0
        src, tgt = src[keep], tgt[keep]
        mid = 0.5 * (nodes[src] + nodes[tgt])
        inside = region.inside(mid)
        rows.append(src[inside])
        cols.append(tgt[inside])
        mids.append(mid[inside])
        lens.append(np.full(inside.sum(), spacing * np.linalg.norm(o)))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    mids = np.vstack(mids)
    lens = np.concatenate(lens)
    # many edges share a midpoint (crossing diagonals); evaluate each once
    key = np.round((mids - lo) / (0.5 * spacing)).astype(np.int64)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    first = np.zeros(len(uniq), dtype=np.int64)
    first[inv.ravel()] = np.arange(len(inv))
    wmid, _, _ = density_batch(disc.points, mids[first], directions)
    weights = wmid[inv.ravel()] * lens
    N = len(nodes)
    A = coo_matrix((np.concatenate([weights, weights]),
                    (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
                   shape=(N, N)).tocsr()
    wnode, _, _ = density_batch(disc.points, nodes, directions)
    return InteriorGraph(disc, nodes, A, float(spacing), wnode, cKDTree(nodes))


def _density_and_gradient(pts, X):
    w, ia, ib = density_batch(pts, X, 64)
    A = pts[ia]
    B = pts[ib]
    DA = X - A
    DB = X - B
    g = -w[:, None] * (DA / np.sum(DA * DA, axis=1, keepdims=True)
                       + DB / np.sum(DB * DB, axis=1, keepdims=True))
    return w, g


def _active_samples(pts: np.ndarray, X: np.ndarray, directions: int = 64,
                    neighbours: int = 4) -> np.ndarray:
    """Indices of samples extreme in some direction after inversion about some row of ``X``.

    Nearest neighbours of those samples are added so the set stays valid
    while the rows move a little.
    """
    W = _direction_set(X.shape[1], directions)
    D = pts[None, :, :] - X[:, None, :]
    Q = D / np.sum(D * D, axis=2, keepdims=True)
    proj = np.matmul(W[None, :, :], Q.transpose(0, 2, 1))
    idx = np.unique(np.concatenate([np.argmax(proj, axis=2).ravel(),
                                    np.argmin(proj, axis=2).ravel()]))
    k = min(neighbours + 1, len(pts))
    _, nb = cKDTree(pts).query(pts[idx], k=k)
    return np.unique(np.atleast_2d(nb).ravel())


def refine_path(region: Region, pts: np.ndarray, path: np.ndarray, vertices: int = 48,
                iterations: int = 200, passes: int = 2) -> tuple[np.ndarray, float]:
    """Shorten a polyline in the density metric by quasi-Newton descent on inner vertices.

    The path is resampled to ``vertices`` points of equal spacing; the end
    points stay fixed and steps leaving the region are rejected.  Each pass
    optimizes against the samples active along the current path; the
    returned cost always uses every sample.
    """
    L = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(path, axis=0), axis=1))])
    if L[-1] == 0:
        return path[:1].copy(), 0.0
    s = np.linspace(0.0, L[-1], vertices)
    P = np.stack([np.interp(s, L, path[:, k]) for k in range(path.shape[1])], axis=1)

    def cost_grad(P, S):
        seg = np.diff(P, axis=0)
        ln = np.linalg.norm(seg, axis=1)
        mid = 0.5 * (P[1:] + P[:-1])
        w, gw = _density_and_gradient(S, mid)
        c = float(np.sum(w * ln))
        unit = seg / np.where(ln > 0, ln, 1.0)[:, None]
        G = np.zeros_like(P)
        # d/dP_i of w(m_i)|P_{i+1}-P_i| and of the previous segment
        G[:-1] += 0.5 * gw * ln[:, None] - w[:, None] * unit
        G[1:] += 0.5 * gw * ln[:, None] + w[:, None] * unit
        G[0] = 0.0
        G[-1] = 0.0
        return c, G

    inner_shape = P[1:-1].shape
    scale = L[-1]
    best, c_best = P, cost_grad(P, pts)[0]
    if iterations <= 0:
        return best, path_cost(pts, best)
    for _ in range(passes):
        S = pts[_active_samples(pts, 0.5 * (best[1:] + best[:-1]))]

        def fun(v):
            Q = best.copy()
            Q[1:-1] = v.reshape(inner_shape) * scale
            if not np.all(region.inside(Q[1:-1])):
                return 1e300, np.zeros_like(v)
            c, G = cost_grad(Q, S)
            return c, G[1:-1].ravel() * scale

        res = minimize(fun, best[1:-1].ravel() / scale, jac=True, method="L-BFGS-B",
                       options={"maxiter": iterations, "ftol": 1e-7, "gtol": 1e-10})
        cand = best.copy()
        cand[1:-1] = res.x.reshape(inner_shape) * scale
        if not np.all(region.inside(cand[1:-1])):
            break
        c = cost_grad(cand, pts)[0]
        if c >= c_best:
            break
        best, c_best = cand, c
    return best, path_cost(pts, best)


def path_cost(pts: np.ndarray, P: np.ndarray, subdivide: int = 8) -> float:
    """Density length of the polyline ``P`` by the midpoint rule on subdivided segments.

    The optimizer works with one midpoint per segment and can exploit that
    rule's bias; the reported cost uses a finer rule on the same polyline.
    """
    s = (np.arange(subdivide) + 0.5) / subdivide
    A, B = P[:-1], P[1:]
    mids = (A[:, None, :] + s[None, :, None] * (B - A)[:, None, :]).reshape(-1, P.shape[1])
    w, _, _ = density_batch(pts, mids, 64)
    ln = np.repeat(np.linalg.norm(B - A, axis=1) / subdivide, subdivide)
    return float(np.sum(w * ln))


@dataclass(frozen=True)
class SigmaResult:
    value: float
    graph_value: float
    path: np.ndarray = field(repr=False)


def ferrand_sigma_result(graph: InteriorGraph, x, y, refine: bool = True) -> SigmaResult:
    x = as_point(x)
    y = as_point(y)
    if x is INF or y is INF:
        raise DomainError("Ferrand's metric is evaluated at finite points only")
    if np.array_equal(x, y):
        return SigmaResult(0.0, 0.0, x[None, :].copy())
    disc = graph.disc
    ends = np.stack([x, y])
    if not np.all(disc.region.inside(ends)):
        raise DomainError("points must lie in the region")
    _check_clear(disc, ends)
    d, (i, j) = graph._tree.query(ends)
    if np.any(d > graph.spacing * np.sqrt(x.size)):
        raise ResolutionError("point too far from the grid; refine the spacing")
    wx = density_batch(disc.points, ends, 64)[0]
    stub = 0.5 * (wx + graph.node_density[[i, j]]) * d
    dist, pred = dijkstra(graph.matrix, directed=False, indices=int(i), return_predecessors=True)
    if not np.isfinite(dist[j]):
        raise ResolutionError("endpoints are disconnected in the grid graph")
    gval = float(dist[j] + stub.sum())
    if not refine:
        return SigmaResult(gval, gval, np.stack([x, y]))
    chain = [int(j)]
    while chain[-1] != i:
        chain.append(int(pred[chain[-1]]))
    path = np.vstack([x, graph.nodes[chain[::-1]], y])
    # the density is only piecewise smooth, so local descent can stall on a
    # kink; start from several paths and keep the cheapest
    starts = [path, _smoothed(path)]
    seg = np.linspace(x, y, 256)
    if np.all(disc.region.inside(seg)) and disc.distance_to_boundary(seg).min() > 0:
        starts.append(seg)
    best = None
    for start in starts:
        if not np.all(disc.region.inside(start[1:-1])):
            continue
        P, c = refine_path(disc.region, disc.points, start)
        if best is None or c < best[1]:
            best = (P, c)
    return SigmaResult(float(best[1]), gval, best[0])


def _smoothed(path: np.ndarray, rounds: int = 4) -> np.ndarray:
    """Chaikin corner cutting with fixed end points."""
    P = path
    for _ in range(rounds):
        if len(P) < 3:
            break
        Q = np.empty((2 * (len(P) - 1), P.shape[1]))
        Q[0::2] = 0.75 * P[:-1] + 0.25 * P[1:]
        Q[1::2] = 0.25 * P[:-1] + 0.75 * P[1:]
        P = np.vstack([P[:1], Q[1:-1], P[-1:]])
    return P


def ferrand_sigma(graph: InteriorGraph, x, y, refine: bool = True) -> float:
    """Ferrand distance: shortest graph path, then variational smoothing of that path.

    Without ``refine`` the plain graph value (with straight stubs to the
    nearest nodes) is returned; it obeys the triangle inequality exactly.
    """
    return ferrand_sigma_result(graph, x, y, refine).value


# ---------------------------------------------------------------------------
# invariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvarianceReport:
    delta_abs: float
    delta_rel: float
    sigma_abs: Optional[float]
    sigma_rel: Optional[float]
    pairs: int


def mobius_invariance_check(region: Region, m: MobiusMap, pairs: Sequence, base: int = 1024,
                            sigma: bool = True, cells: int = 64) -> InvarianceReport:
    """Largest change of the absolute ratio and Ferrand distances under ``m``.

    Both sides use the same boundary sample (pushed forward by ``m``) so the
    comparison is at matched refinement.
    """
    disc = BoundaryDiscretization(region, base)
    image = region.mobius_image(m)
    disc_m = BoundaryDiscretization(image, base)
    g = gm = None
    if sigma:
        g = build_graph(disc, cells=cells)
        gm = build_graph(disc_m, cells=cells)
    da = dr = 0.0
    sa = sr = 0.0
    for x, y in pairs:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        mx, my = m(x), m(y)
        d0 = mobius_delta(disc, x, y, refine=False)
        d1 = mobius_delta(disc_m, mx, my, refine=False)
        da = max(da, abs(d1 - d0))
        dr = max(dr, abs(d1 - d0) / max(d0, 1e-300))
        if sigma:
            s0 = ferrand_sigma(g, x, y)
            s1 = ferrand_sigma(gm, mx, my)
            sa = max(sa, abs(s1 - s0))
            sr = max(sr, abs(s1 - s0) / max(s0, 1e-300))
    return InvarianceReport(da, dr, sa if sigma else None, sr if sigma else None, len(pairs))
