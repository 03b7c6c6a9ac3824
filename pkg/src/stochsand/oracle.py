"""Exact absorption solver for tiny instances.

The stabilization is a finite absorbing Markov chain once the toppled vertex
is fixed by a deterministic rule (leftmost or rightmost unstable), which the
abelian property allows.  States are configurations augmented with the
per-side exit counts (and optionally the set of toppled vertices).  The chain
has cycles, so absorption probabilities are obtained by exact Gaussian
elimination, one strongly connected component at a time in reverse
topological order.
"""
from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx

from . import _kernels as K
from .analytics import hole_closed_form, sgr_closed_form
from .lattice import (Box2D, C, LineZ, PToppling, SandpileConfig, SRW1D, Uniform1D,
                      neighbour_table)

SCHEMA_VERSION = 1


class StateSpaceTooLarge(RuntimeError):
    """The instance exceeds the configured mass, vertex or state caps."""


def branch_law(rule, deg):
    """Exact ``[(mask, probability)]`` of one toppling."""
    if isinstance(rule, Uniform1D):
        return [(1, Fraction(1, 3)), (2, Fraction(1, 3)), (3, Fraction(1, 3))]
    if isinstance(rule, SRW1D):
        return [(1, Fraction(1, 2)), (2, Fraction(1, 2))]
    if isinstance(rule, PToppling):
        p = Fraction(rule.p).limit_denominator(10**9)
        law = []
        for mask in range(1 << deg):
            k = bin(mask).count("1")
            law.append((mask, p**k * (1 - p) ** (deg - k)))
        if p == 0:
            raise StateSpaceTooLarge("p = 0 never stabilizes")
        if not rule.literal:
            empty = law[0][1]
            law = [(m, w / (1 - empty)) for m, w in law[1:]]
        return [(m, w) for m, w in law if w != 0]
    raise TypeError(f"unsupported rule {rule!r}")


@dataclass
class AbsorptionDistribution:
    """Exact law of ``(final heights, exits per side[, toppled vertices])``."""

    config: SandpileConfig
    rule: object
    outcomes: dict
    n_states: int
    track_toppled: bool = False

    @property
    def sides(self):
        return self.config.domain.sides

    def total(self):
        return sum(self.outcomes.values(), Fraction(0))

    def prob(self, predicate):
        """Probability of ``predicate(final, exits[, toppled])``."""
        return sum((w for key, w in self.outcomes.items() if predicate(*key)), Fraction(0))

    def exit_law(self):
        """The sandpile gambler's-ruin triple ``(qL, qR, qB)`` for ``1 + delta_k``."""
        n = self.config.domain.size
        full = (1,) * n
        qL = self.prob(lambda f, e, *_: f == full and e == (1, 0))
        qR = self.prob(lambda f, e, *_: f == full and e == (0, 1))
        qB = self.prob(lambda f, e, *_: sum(f) == n - 1 and e == (1, 1))
        return qL, qR, qB

    def hole_law(self):
        """``{j: P(final = 1 - delta_j)}`` with ``j`` a 1-based vertex label offset by ``lo``."""
        n = self.config.domain.size
        out = {}
        for j in range(n):
            target = tuple(0 if t == j else 1 for t in range(n))
            out[self.config.lo + j] = self.prob(lambda f, e, *_: f == target)
        return out

    def to_json(self):
        rows = []
        for key in sorted(self.outcomes, key=repr):
            w = self.outcomes[key]
            row = {"final": list(key[0]), "exits": dict(zip(self.sides, key[1])),
                   "probability": str(w), "numerator": w.numerator, "denominator": w.denominator}
            if self.track_toppled:
                row["toppled"] = list(key[2])
            rows.append(row)
        return json.dumps({
            "schema_version": SCHEMA_VERSION,
            "domain": repr(self.config.domain),
            "initial": self.config.heights.ravel().tolist(),
            "rule": repr(self.rule),
            "n_states": self.n_states,
            "outcomes": rows,
        }, indent=2, sort_keys=True)


def absorption_distribution(initial, rule, order="leftmost", mass_cap=16, vertex_cap=8,
                            state_cap=200_000, track_toppled=False):
    """Exact distribution of the stabilization outcome of ``initial``."""
    domain = initial.domain
    if isinstance(domain, LineZ):
        raise ValueError("use a large enough Segment1D instead of LineZ")
    if initial.total() > mass_cap:
        raise StateSpaceTooLarge(f"mass {initial.total()} > cap {mass_cap}")
    if domain.size > vertex_cap:
        raise StateSpaceTooLarge(f"{domain.size} vertices > cap {vertex_cap}")
    if order not in ("leftmost", "rightmost"):
        raise ValueError("order must be 'leftmost' or 'rightmost'")
    nbr = neighbour_table(domain)
    deg = nbr.shape[1]
    thr = domain.threshold
    law = branch_law(rule, deg)
    pick = min if order == "leftmost" else max
    labels = _labels(initial)

    start = (tuple(initial.heights.ravel().tolist()), (0,) * deg, frozenset())
    graph = nx.DiGraph()
    trans = {}
    seen = {start}
    todo = deque([start])
    while todo:
        s = todo.popleft()
        h, ex, top = s
        unstable = [v for v, x in enumerate(h) if x >= thr]
        if not unstable:
            graph.add_node(s)
            continue
        v = pick(unstable)
        out = {}
        for mask, w in law:
            h2 = list(h)
            ex2 = list(ex)
            for e in range(deg):
                if mask & (1 << e):
                    h2[v] -= 1
                    t = nbr[v, e]
                    if t == K.SINK:
                        ex2[e] += 1
                    else:
                        h2[t] += 1
            top2 = top | {labels[v]} if track_toppled else top
            s2 = (tuple(h2), tuple(ex2), top2)
            out[s2] = out.get(s2, 0) + w
            if s2 not in seen:
                seen.add(s2)
                if len(seen) > state_cap:
                    raise StateSpaceTooLarge(f"more than {state_cap} reachable states")
                todo.append(s2)
        trans[s] = out
        graph.add_edges_from((s, t) for t in out)

    value = {}
    cond = nx.condensation(graph)
    for comp in reversed(list(nx.topological_sort(cond))):
        members = list(cond.nodes[comp]["members"])
        _solve_component(members, trans, value, track_toppled)
    dist = {k: w for k, w in value[start].items() if w != 0}
    return AbsorptionDistribution(initial, rule, dist, len(seen), track_toppled)


def _labels(cfg):
    d = cfg.domain
    if isinstance(d, Box2D):
        return [divmod(v, d.side) for v in range(d.size)]
    return [cfg.lo + v for v in range(d.size)]


def _outcome_key(state, track_toppled):
    h, ex, top = state
    if track_toppled:
        return (h, ex, tuple(sorted(top)))
    return (h, ex)


def _solve_component(members, trans, value, track_toppled):
    if len(members) == 1 and members[0] not in trans:
        s = members[0]
        value[s] = {_outcome_key(s, track_toppled): Fraction(1)}
        return
    index = {s: i for i, s in enumerate(members)}
    m = len(members)
    # rows of (I - Q) | R with R as outcome -> weight dicts
    A = [[Fraction(0)] * m for _ in range(m)]
    R = [dict() for _ in range(m)]
    for s, i in index.items():
        A[i][i] += 1
        for t, w in trans[s].items():
            if t in index:
                A[i][index[t]] -= w
            else:
                for key, x in value[t].items():
                    R[i][key] = R[i].get(key, 0) + w * x
    for col in range(m):
        piv = next(r for r in range(col, m) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        R[col], R[piv] = R[piv], R[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        R[col] = {k: x * inv for k, x in R[col].items()}
        for r in range(m):
            f = A[r][col]
            if r != col and f != 0:
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
                for k, x in R[col].items():
                    R[r][k] = R[r].get(k, 0) - f * x
    for s, i in index.items():
        value[s] = R[i]


# --------------------------------------------------------------------------
# closed-form comparison

@dataclass
class CheckRow:
    name: str
    expected: object
    got: object

    @property
    def ok(self):
        return self.expected == self.got


def oracle_vs_closed_forms(n, order="leftmost", state_cap=200_000):
    """Compare oracle exit and hole laws on ``C_n`` with the closed forms, exactly."""
    rows = []
    for k in range(1, n + 1):
        cfg = SandpileConfig.full(C(n)).add(k)
        dist = absorption_distribution(cfg, Uniform1D(), order=order, state_cap=state_cap)
        got = dist.exit_law()
        want = sgr_closed_form(n, k)
        for name, w, g in zip(("qL", "qR", "qB"), want, got):
            rows.append(CheckRow(f"n={n} k={k} {name}", w, g))
        holes = dist.hole_law()
        for j in range(1, n + 1):
            rows.append(CheckRow(f"n={n} i={k} j={j} h", hole_closed_form(n, k, j), holes[j]))
        rows.append(CheckRow(f"n={n} k={k} total", Fraction(1), dist.total()))
    return rows


def tiny_configs(domain, max_height):
    """Every configuration on ``domain`` with heights ``0..max_height`` (for sweeps)."""
    for hs in itertools.product(range(max_height + 1), repeat=domain.size):
        yield SandpileConfig(domain, list(hs))
