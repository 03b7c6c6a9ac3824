"""Driven p-toppling sandpiles on 2D boxes: density and height-3 percolation."""
from __future__ import annotations

import csv
import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .lattice import Box2D, BudgetExceeded, PToppling, SandpileConfig, neighbour_table
from .rng import make_rng

DENSITY_HEADER = ["L", "p", "rho", "stderr", "samples"]
PERCOLATION_HEADER = ["L", "p", "spanning_prob", "samples"]
SCHEMA_VERSION = 1


@dataclass
class ChainSettings:
    """Burn-in and thinning of the driven chain; ``None`` means the L-dependent default."""

    burn_in: int | None = None       # default 10 L^2 particle additions
    thinning: int | None = None      # default L^2 additions between samples
    literal: bool = False
    step_budget: int | None = None   # per stabilization; default 10^4 * 4 L^2 * L^2

    def resolve(self, L):
        return (10 * L * L if self.burn_in is None else self.burn_in,
                L * L if self.thinning is None else self.thinning,
                10_000 * 4 * L**4 if self.step_budget is None else self.step_budget)


@dataclass
class DensityCurvePoint:
    L: int
    p: float
    rho: float
    stderr: float
    samples: int
    burn_in: int


@dataclass
class PercolationResult:
    L: int
    p: float
    spanning_prob: float
    samples: int
    cluster_sizes: list = field(default_factory=list, repr=False)
    spans: list = field(default_factory=list, repr=False)


def _check_p(L, p):
    if L < 2:
        raise ValueError("box side must be >= 2")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")


class BoxChain:
    """Driven-dissipative p-toppling chain on an ``L x L`` box, started empty."""

    def __init__(self, L, p, rng, settings=None):
        _check_p(L, p)
        self.L, self.p, self.rng = L, p, rng
        self.settings = settings or ChainSettings()
        self.burn_in, self.thinning, self.budget = self.settings.resolve(L)
        self.h = np.zeros(L * L, np.int64)
        self.exits = np.zeros(4, np.int64)
        self._nbr = neighbour_table(Box2D(L))
        self.added = 0

    def advance(self, n_steps):
        rule = PToppling(self.p, self.settings.literal)
        total = K.drive(self.h, self._nbr, 4, rule.code, float(rule.p), bool(rule.literal),
                        self.rng, self.budget, int(n_steps), self.exits)
        if total < 0:
            raise BudgetExceeded(f"stabilization exceeded {self.budget} topplings")
        self.added += n_steps
        return total

    def samples(self, count):
        """Yield ``count`` thinned configurations after burn-in, as ``L x L`` arrays."""
        if self.added == 0:
            self.advance(self.burn_in)
        for _ in range(count):
            self.advance(self.thinning)
            yield self.h.reshape(self.L, self.L).copy()

    def config(self):
        return SandpileConfig(Box2D(self.L), self.h.reshape(self.L, self.L).copy())


def _cell_rng(seed, L, p, replica=0):
    return make_rng(seed, L, int(round(p * 1_000_000)), replica)


def density_point(L, p, samples, seed, settings=None, replica=0):
    chain = BoxChain(L, p, _cell_rng(seed, L, p, replica), settings)
    rhos = np.array([h.mean() for h in chain.samples(samples)])
    se = rhos.std(ddof=1) / np.sqrt(samples) if samples > 1 else float("nan")
    return DensityCurvePoint(L, p, float(rhos.mean()), float(se), samples, chain.burn_in)


def density_sweep(L, p_list, samples, seed, settings=None):
    """Average stationary density ``rho(p)`` for every ``p`` in ``p_list``.

    Each ``p`` runs its own chain on a stream derived from ``(seed, L, p)``.
    The standard error treats thinned samples as independent.
    """
    for p in p_list:
        _check_p(L, p)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return [density_point(L, p, samples, seed, settings) for p in p_list]


# --------------------------------------------------------------------------
# clusters

def height3_set(config):
    """``{(row, col) : height == 3}`` for a stable box configuration (0-based)."""
    if not isinstance(config.domain, Box2D):
        raise ValueError("height-3 sets are defined on boxes")
    if not config.is_stable():
        raise ValueError("configuration is not stable")
    return {(int(r), int(c)) for r, c in np.argwhere(config.heights == 3)}


class UnionFind:
    """Disjoint sets over ``0..size-1`` with path compression and union by size."""

    def __init__(self, size):
        self.parent = list(range(size))
        self.size = [1] * size

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


def label_clusters(vertices, L):
    """4-neighbour components of ``vertices`` inside an ``L x L`` box.

    Returns ``(labels, sizes)``: ``labels[r, c]`` is -1 off the set and
    otherwise the rank of the cluster in ``sizes`` (sorted descending; ties by
    first vertex in row-major order).
    """
    verts = sorted(set(map(tuple, vertices)))
    for r, c in verts:
        if not (0 <= r < L and 0 <= c < L):
            raise ValueError(f"vertex {(r, c)} outside the {L}x{L} box")
    member = set(verts)
    uf = UnionFind(L * L)
    for r, c in verts:
        if (r + 1, c) in member:
            uf.union(r * L + c, (r + 1) * L + c)
        if (r, c + 1) in member:
            uf.union(r * L + c, r * L + c + 1)
    first = {}
    count = {}
    for r, c in verts:
        root = uf.find(r * L + c)
        first.setdefault(root, r * L + c)
        count[root] = count.get(root, 0) + 1
    order = sorted(count, key=lambda root: (-count[root], first[root]))
    rank = {root: i for i, root in enumerate(order)}
    labels = np.full((L, L), -1, np.int64)
    for r, c in verts:
        labels[r, c] = rank[uf.find(r * L + c)]
    return labels, [count[root] for root in order]


def spans_left_right(labels):
    """True iff some cluster meets both column 0 and column L-1."""
    left = set(labels[:, 0][labels[:, 0] >= 0].tolist())
    right = set(labels[:, -1][labels[:, -1] >= 0].tolist())
    return bool(left & right)


def spans_bfs(mask):
    """Independent left-right crossing check by breadth-first search."""
    mask = np.asarray(mask, bool)
    L = mask.shape[0]
    seen = np.zeros_like(mask)
    todo = deque((r, 0) for r in range(L) if mask[r, 0])
    for r, c in todo:
        seen[r, c] = True
    while todo:
        r, c = todo.popleft()
        if c == mask.shape[1] - 1:
            return True
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < L and 0 <= cc < mask.shape[1] and mask[rr, cc] and not seen[rr, cc]:
                seen[rr, cc] = True
                todo.append((rr, cc))
    return False


def percolation_point(L, p, samples, seed, settings=None, replica=0):
    chain = BoxChain(L, p, _cell_rng(seed, L, p, replica), settings)
    sizes, spans = [], []
    for h in chain.samples(samples):
        labels, sz = label_clusters(map(tuple, np.argwhere(h == 3)), L)
        sizes.append(sz)
        spans.append(spans_left_right(labels))
    return PercolationResult(L, p, float(np.mean(spans)), samples, sizes, spans)


def spanning_probability(L, p, samples, seed, settings=None):
    """Fraction of thinned stationary samples whose height-3 set crosses left to right."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return percolation_point(L, p, samples, seed, settings)


# --------------------------------------------------------------------------
# output

def write_density_csv(points, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(DENSITY_HEADER)
    for pt in points:
        w.writerow([pt.L, repr(pt.p), repr(pt.rho), repr(pt.stderr), pt.samples])


def write_percolation_csv(results, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(PERCOLATION_HEADER)
    for res in results:
        w.writerow([res.L, repr(res.p), repr(res.spanning_prob), res.samples])


def cluster_histogram_json(results):
    return json.dumps({
        "schema_version": SCHEMA_VERSION,
        "cells": [{"L": r.L, "p": r.p, "cluster_sizes": r.cluster_sizes, "spans": r.spans}
                  for r in results],
    }, sort_keys=True)


def write_pgm(array, fh, maxval=None):
    """Plain (P2) PGM of a nonnegative integer array."""
    a = np.asarray(array, np.int64)
    if a.ndim != 2 or np.any(a < 0):
        raise ValueError("PGM needs a nonnegative 2D array")
    maxval = int(a.max()) if maxval is None else maxval
    fh.write(f"P2\n{a.shape[1]} {a.shape[0]}\n{max(maxval, 1)}\n")
    for row in a:
        fh.write(" ".join(map(str, row.tolist())) + "\n")


def cluster_image(labels, top=5):
    """Grey levels for a cluster map: the ``top`` largest clusters bright, others dim."""
    img = np.zeros(labels.shape, np.int64)
    img[labels >= top] = 1
    for k in range(top):
        img[labels == k] = 1 + top - k
    return img
