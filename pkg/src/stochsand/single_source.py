"""Stabilizing ``n`` particles at the origin of the integer line.

Two exact samplers of the same law of ``(final configuration, D_left, D_right)``:

``direct``
    toppling by toppling on a growable window (also yields the toppling count).
    Costs about ``0.06 n^3`` topplings.

``segment``
    adds the particles one at a time (a legal toppling order) and resolves
    every avalanche in O(1).  A stable configuration is a set of 1s with holes;
    an extra particle on a run of ``m`` ones bounded by holes at ``a`` and
    ``b`` is exactly the full-plus-one problem on ``C_m``: it fills the left
    hole, the right hole, or both while opening a new hole uniformly in the
    run.  Whether the far end of the run toppled, given a one-sided exit, has
    probability ``1 - qL_{m-1}(k) / qL_m(k)`` (mirrored for right exits).
    The toppling count is not available.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .lattice import LineZ, SandpileConfig, Uniform1D, stabilize
from .rng import as_rng, make_rng

DIRECT_MAX_N = 512
CSV_HEADER = ["n", "run", "D_left", "D_right", "steps"]


@dataclass
class SingleSourceResult:
    n: int
    D_left: int | None          # None when nothing toppled
    D_right: int | None
    final_support: tuple
    steps: int | None           # None for the segment sampler
    final: SandpileConfig | None = None

    def radius_right(self):
        return self.D_right / (self.n / 2)

    def radius_left(self):
        return abs(self.D_left) / (self.n / 2)


class IntervalViolation(AssertionError):
    """The toppled set was not an interval containing the origin."""


def single_source(n, rng=None, method="auto", step_budget=None, keep_final=False):
    """Stabilize ``n * delta_0`` on the integer line with uniform topplings."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if method == "auto":
        method = "direct" if n <= DIRECT_MAX_N else "segment"
    rng = as_rng(rng)
    if method == "direct":
        return _direct(n, rng, step_budget, keep_final)
    if method == "segment":
        return _segment(n, rng, keep_final)
    raise ValueError(f"unknown method {method!r}")


def _direct(n, rng, step_budget, keep_final):
    out = stabilize(SandpileConfig.point(n), Uniform1D(), rng=rng, step_budget=step_budget)
    final = out.final
    if final.total() != n or not final.is_stable():
        raise AssertionError("mass or stability violated")
    toppled = out.toppled
    if toppled:
        lo, hi = toppled[0], toppled[-1]
        if len(toppled) != hi - lo + 1 or not lo <= 0 <= hi:
            raise IntervalViolation(f"toppled set {toppled} is not an interval through 0")
    else:
        lo = hi = None
    return SingleSourceResult(n, lo, hi, final.support(), out.steps,
                              final if keep_final else None)


def _segment(n, rng, keep_final):
    left = []            # holes < 0, nearest last
    right = []           # holes > 0, nearest last
    origin = 0           # height at the origin
    lo = hi = None       # support
    lo_top = hi_top = False
    toppled_any = False
    draw = rng.integers
    for _ in range(n):
        if origin == 0:
            origin = 1
            if lo is None:
                lo = hi = 0
            continue
        a = left[-1] if left else lo - 1
        b = right[-1] if right else hi + 1
        m = b - a - 1
        k = -a
        toppled_any = True
        r = int(draw(0, (m + 1) * (m + 2)))
        qL_num = (m - k + 1) * (m - k + 2)
        qR_num = k * (k + 1)
        if r < qL_num:
            outcome = "L"
        elif r < qL_num + qR_num:
            outcome = "R"
        else:
            outcome = "B"
        at_lo = not left
        at_hi = not right
        if outcome in "LB":
            if at_lo:
                lo -= 1
                lo_top = False
            else:
                left.pop()
        if outcome in "RB":
            if at_hi:
                hi += 1
                hi_top = False
            else:
                right.pop()
        if outcome == "L" and at_hi and not hi_top:
            # P(right end untouched | left exit) = (m-k)(m+2) / (m(m-k+2))
            hi_top = int(draw(0, m * (m - k + 2))) >= (m - k) * (m + 2)
        if outcome == "R" and at_lo and not lo_top:
            lo_top = int(draw(0, m * (k + 1))) >= (k - 1) * (m + 2)
        if outcome == "B":
            j = a + 1 + int(draw(0, m))
            if j < 0:
                left.append(j)
            elif j > 0:
                right.append(j)
            else:
                origin = 0
    if toppled_any:
        D_left = lo if lo_top else lo + 1
        D_right = hi if hi_top else hi - 1
    else:
        D_left = D_right = None
    final = None
    if keep_final:
        h = np.ones(hi - lo + 1, np.int64)
        for j in left + right:
            h[j - lo] = 0
        h[-lo] = origin
        final = SandpileConfig(LineZ(), h, lo)
    return SingleSourceResult(n, D_left, D_right, (lo, hi), None, final)


@dataclass
class ShapeRow:
    n: int
    runs: int
    mean_right: float
    mean_left: float
    std_right: float
    std_left: float


def shape_sweep(n_list, runs, seed, method="auto", step_budget=None):
    """Normalised radii ``D_right/(n/2)`` and ``|D_left|/(n/2)`` per ``n``.

    Run ``r`` of size ``n`` uses the stream derived from ``(seed, n, r)``.
    Returns ``(rows, results)`` with ``results[n]`` the per-run records.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    rows, results = [], {}
    for n in n_list:
        res = [single_source(n, make_rng(seed, n, r), method, step_budget) for r in range(runs)]
        right = np.array([x.radius_right() for x in res])
        left = np.array([x.radius_left() for x in res])
        ddof = 1 if runs > 1 else 0
        rows.append(ShapeRow(n, runs, float(right.mean()), float(left.mean()),
                             float(right.std(ddof=ddof)), float(left.std(ddof=ddof))))
        results[n] = res
    return rows, results


def write_runs_csv(results, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for n in sorted(results):
        for r, x in enumerate(results[n]):
            w.writerow([n, r, x.D_left, x.D_right, "" if x.steps is None else x.steps])


def write_shape_csv(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "runs", "mean_right", "mean_left", "std_right", "std_left"])
    for row in rows:
        w.writerow([row.n, row.runs, repr(row.mean_right), repr(row.mean_left),
                    repr(row.std_right), repr(row.std_left)])
