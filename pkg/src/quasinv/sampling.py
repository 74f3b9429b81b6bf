"""Deterministic stratified pair sampling and sup/inf ratio scans.

A pair budget is split into fixed-size chunks.  Chunk ``k`` draws from
``SeedSequence([seed, k])`` so the pairs do not depend on how chunks are
distributed over worker threads, and results merge by max/min.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError
from .geometry import StarlikeBoundary, sphere_grid

CHUNK = 1 << 16
# share of uniform / near-coincident / anchored pairs
MIX = (0.5, 0.4, 0.1)
# smallest relative offset of near pairs; below this, cancellation in
# differences of nearby points exceeds the 1e-9 verdict slack
NEAR_FLOOR = 1e-6


def derive_seed(name: str, descriptor, n_pairs: int) -> int:
    """Stable 63-bit seed from a check name, a domain descriptor and a budget."""
    blob = json.dumps([name, descriptor, int(n_pairs)], sort_keys=True, default=repr)
    return int.from_bytes(hashlib.sha256(blob.encode()).digest()[:8], "big") >> 1


def worker_count() -> int:
    raw = os.environ.get("QUASINV_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _split(total: int, size: int = CHUNK):
    k = 0
    while total > 0:
        m = min(size, total)
        yield k, m
        total -= m
        k += 1


def map_chunks(func: Callable[[int, int], object], n: int, size: int = CHUNK) -> list:
    """Evaluate ``func(chunk_index, chunk_len)`` over the chunks of ``n`` items."""
    jobs = list(_split(n, size))
    workers = worker_count()
    if workers == 1 or len(jobs) == 1:
        return [func(k, m) for k, m in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: func(*job), jobs))


def _mix_counts(m: int):
    near = int(round(MIX[1] * m))
    anchored = int(round(MIX[2] * m))
    return m - near - anchored, near, anchored


def random_directions(rng, count, dimension):
    g = rng.normal(size=(count, dimension))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _perturb_directions(rng, U, scale):
    """Rotate each row of ``U`` by a random tangent angle of size ``scale``."""
    V = rng.normal(size=U.shape)
    V -= np.sum(V * U, axis=1, keepdims=True) * U
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    s = np.asarray(scale)[:, None]
    W = np.cos(s) * U + np.sin(s) * V
    return W / np.linalg.norm(W, axis=1, keepdims=True)


def _log_uniform(rng, lo, hi, count):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), count))


class PairSampler:
    """Base class: ``draw(rng, count)`` returns two ``(count, n)`` arrays."""

    def draw(self, rng, count):
        raise NotImplementedError

    def descriptor(self) -> dict:
        return {"sampler": type(self).__name__}


@dataclass(frozen=True)
class BoundaryPairs(PairSampler):
    """Pairs of boundary points of ``M``."""

    M: StarlikeBoundary
    near_scale: float = 1e-3

    def draw(self, rng, count):
        M = self.M
        n = M.dimension
        nu, nn, na = _mix_counts(count)
        ratio = M.r_min / M.r_max
        U1 = random_directions(rng, nu + nn, n)
        U2 = np.empty_like(U1)
        U2[:nu] = random_directions(rng, nu, n)
        U2[nu:] = _perturb_directions(
            rng, U1[nu:], _log_uniform(rng, NEAR_FLOOR, self.near_scale, nn) * ratio)
        Ua = np.repeat(np.asarray(M.u_min)[None, :], na, axis=0)
        half = na // 2
        Ub = np.empty_like(Ua)
        Ub[:half] = _perturb_directions(
            rng, Ua[:half], _log_uniform(rng, NEAR_FLOOR, self.near_scale, half) * ratio)
        Ub[half:] = random_directions(rng, na - half, n)
        A = np.vstack([U1, Ua])
        B = np.vstack([U2, Ub])
        return M.radial(A)[:, None] * A, M.radial(B)[:, None] * B

    def descriptor(self):
        return {"sampler": "boundary", "near_scale": self.near_scale}


@dataclass(frozen=True)
class CloudPairs(PairSampler):
    """Pairs drawn from a finite point set; near pairs use nearest neighbours."""

    points: np.ndarray
    neighbours: int = 8
    _tree: cKDTree = field(init=False, repr=False, compare=False)
    _nbr: np.ndarray = field(init=False, repr=False, compare=False)
    _anchor: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if len(P) < 2:
            raise DomainError("need at least two points")
        k = min(self.neighbours + 1, len(P))
        tree = cKDTree(P)
        _, idx = tree.query(P, k=k)
        object.__setattr__(self, "points", P)
        object.__setattr__(self, "_tree", tree)
        object.__setattr__(self, "_nbr", np.atleast_2d(idx)[:, 1:])
        object.__setattr__(self, "_anchor", int(np.argmin(np.linalg.norm(P, axis=1))))

    def draw(self, rng, count):
        P = self.points
        N = len(P)
        nu, nn, na = _mix_counts(count)
        i = rng.integers(0, N, nu + nn + na)
        j = np.empty_like(i)
        j[:nu] = rng.integers(0, N, nu)
        pick = rng.integers(0, self._nbr.shape[1], nn)
        j[nu:nu + nn] = self._nbr[i[nu:nu + nn], pick]
        i[nu + nn:] = self._anchor
        j[nu + nn:] = rng.integers(0, N, na)
        return P[i], P[j]

    def descriptor(self):
        return {"sampler": "cloud", "size": int(len(self.points))}


@dataclass(frozen=True)
class SpacePairs(PairSampler):
    """Pairs of finite nonzero points spread over many scales around ``M``.

    Radii are log-uniform in ``[low, high]`` times ``r_min``.  Near pairs are
    offset by a log-uniform fraction of ``|x|`` in ``[NEAR_FLOOR, near_scale]``;
    anchored pairs lie on the ray of the closest boundary point.
    """

    M: StarlikeBoundary
    low: float = 1e-2
    high: float = 1e2
    near_scale: float = 1e-3

    def _points(self, rng, count):
        U = random_directions(rng, count, self.M.dimension)
        rho = _log_uniform(rng, self.low, self.high, count) * self.M.r_min
        return U * rho[:, None]

    def draw(self, rng, count):
        M = self.M
        n = M.dimension
        nu, nn, na = _mix_counts(count)
        X = self._points(rng, nu + nn)
        Y = np.empty_like(X)
        Y[:nu] = self._points(rng, nu)
        base = np.linalg.norm(X[nu:], axis=1)
        off = random_directions(rng, nn, n) * (
            _log_uniform(rng, NEAR_FLOOR, self.near_scale, nn) * base)[:, None]
        Y[nu:] = X[nu:] + off
        rho = M.r_min * _log_uniform(rng, 0.5, 2.0, na)
        Xa = np.asarray(M.u_min)[None, :] * rho[:, None]
        half = na // 2
        Ya = np.empty_like(Xa)
        Ya[:half] = Xa[:half] + random_directions(rng, half, n) * (
            _log_uniform(rng, NEAR_FLOOR, self.near_scale, half) * M.r_min)[:, None]
        Ya[half:] = self._points(rng, na - half)
        return np.vstack([X, Xa]), np.vstack([Y, Ya])

    def descriptor(self):
        return {"sampler": "space", "low": self.low, "high": self.high,
                "near_scale": self.near_scale}


@dataclass(frozen=True)
class RatioEstimate:
    """Sampled sup and inf of a pair ratio with the pairs attaining them."""

    sup_value: float
    inf_value: float
    witness_sup: tuple
    witness_inf: tuple
    n_pairs: int
    sampler: dict
    seed: int
    skipped: int = 0

    def to_dict(self) -> dict:
        return {
            "sup_value": self.sup_value,
            "inf_value": self.inf_value,
            "witness_sup": [list(map(float, p)) for p in self.witness_sup],
            "witness_inf": [list(map(float, p)) for p in self.witness_inf],
            "n_pairs": self.n_pairs,
            "sampler": self.sampler,
            "seed": self.seed,
            "skipped": self.skipped,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RatioEstimate":
        return cls(
            float(d["sup_value"]), float(d["inf_value"]),
            tuple(np.array(p, dtype=float) for p in d["witness_sup"]),
            tuple(np.array(p, dtype=float) for p in d["witness_inf"]),
            int(d["n_pairs"]), dict(d["sampler"]), int(d["seed"]), int(d.get("skipped", 0)))


@dataclass
class _Extremes:
    sup: float = -np.inf
    inf: float = np.inf
    wsup: tuple = (None, None)
    winf: tuple = (None, None)
    skipped: int = 0

    def update(self, X, Y, values, valid):
        self.skipped += int(np.count_nonzero(~valid))
        if not np.any(valid):
            return
        idx = np.flatnonzero(valid)
        v = values[idx]
        i, j = idx[int(np.argmax(v))], idx[int(np.argmin(v))]
        if values[i] > self.sup:
            self.sup, self.wsup = float(values[i]), (X[i].copy(), Y[i].copy())
        if values[j] < self.inf:
            self.inf, self.winf = float(values[j]), (X[j].copy(), Y[j].copy())

    def merge(self, other: "_Extremes"):
        if other.sup > self.sup:
            self.sup, self.wsup = other.sup, other.wsup
        if other.inf < self.inf:
            self.inf, self.winf = other.inf, other.winf
        self.skipped += other.skipped


def scan_ratio(ratio: Callable[[np.ndarray, np.ndarray], tuple], sampler: PairSampler,
               n_pairs: int, seed: int) -> RatioEstimate:
    """Sup/inf of ``ratio(X, Y)`` over ``n_pairs`` sampled pairs.

    ``ratio`` returns ``(values, valid)``; invalid (e.g. coincident) pairs are
    skipped and counted.
    """

    def job(k, m):
        X, Y = sampler.draw(chunk_rng(seed, k), m)
        acc = _Extremes()
        values, valid = ratio(X, Y)
        acc.update(X, Y, values, valid & np.isfinite(values))
        return acc

    total = _Extremes()
    for acc in map_chunks(job, n_pairs):
        total.merge(acc)
    if total.wsup[0] is None:
        raise DomainError("every sampled pair was degenerate")
    return RatioEstimate(total.sup, total.inf, total.wsup, total.winf, int(n_pairs),
                         sampler.descriptor(), int(seed), total.skipped)


def euclidean(X, Y):
    return np.linalg.norm(np.asarray(X) - np.asarray(Y), axis=-1)


def lipschitz_scan(f: Callable, metric_in: Callable, metric_out: Callable,
                   sampler: PairSampler, n_pairs: int, seed: int = 0) -> RatioEstimate:
    """Sampled sup/inf of ``metric_out(f x, f y) / metric_in(x, y)``.

    ``f`` and both metrics act on ``(N, n)`` arrays row-wise.
    """

    def ratio(X, Y):
        din = metric_in(X, Y)
        valid = din > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            return metric_out(f(X), f(Y)) / din, valid

    return scan_ratio(ratio, sampler, n_pairs, seed)


def counterexample_cloud(circle: int = 5000, segment: int = 5000) -> np.ndarray:
    """Unit circle together with the segment from (1/2, 0) to (1, 0)."""
    C = sphere_grid(2, circle)
    s = np.linspace(0.5, 1.0, segment)
    S = np.stack([s, np.zeros_like(s)], axis=1)
    P = np.vstack([C, S])
    return np.unique(P, axis=0)
