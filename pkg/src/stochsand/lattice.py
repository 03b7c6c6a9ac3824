"""Domains, configurations, toppling rules and the stabilization engine."""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .rng import as_rng


class BudgetExceeded(RuntimeError):
    """Raised when ``step_budget`` topplings did not produce a stable configuration."""


# --------------------------------------------------------------------------
# domains

SIDES_1D = ("L", "R")
SIDES_2D = ("N", "S", "E", "W")


@dataclass(frozen=True)
class Segment1D:
    """The line segment ``{a, ..., b}``; the outside is the sink."""

    a: int
    b: int

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError(f"empty segment [{self.a}, {self.b}]")

    @property
    def size(self):
        return self.b - self.a + 1

    threshold = 2
    sides = SIDES_1D

    def vertices(self):
        return range(self.a, self.b + 1)


def C(n):
    """The segment ``C_n = {1, ..., n}``."""
    return Segment1D(1, n)


@dataclass(frozen=True)
class Box2D:
    """The box ``{1..L}^2``; heights are stored 0-based as ``heights[row, col]``."""

    side: int

    def __post_init__(self):
        if self.side < 1:
            raise ValueError("box side must be positive")

    @property
    def size(self):
        return self.side * self.side

    threshold = 4
    sides = SIDES_2D


@dataclass(frozen=True)
class LineZ:
    """The integer line without sink; configurations keep a finite window."""

    threshold = 2
    sides = SIDES_1D


# --------------------------------------------------------------------------
# configurations

@dataclass
class SandpileConfig:
    """Heights on a domain.

    For 1D domains ``heights[i]`` is the height of vertex ``lo + i``.  For
    :class:`Segment1D` ``lo`` is always ``domain.a``; for :class:`LineZ` the
    array is the current window.
    """

    domain: object
    heights: np.ndarray
    lo: int = 0

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=np.int64)
        if np.any(h < 0):
            raise ValueError("heights must be nonnegative")
        d = self.domain
        if isinstance(d, Segment1D):
            if h.shape != (d.size,):
                raise ValueError(f"expected {d.size} heights, got shape {h.shape}")
            self.lo = d.a
        elif isinstance(d, Box2D):
            if h.shape != (d.side, d.side):
                raise ValueError(f"expected {d.side}x{d.side} heights, got {h.shape}")
        elif isinstance(d, LineZ):
            if h.ndim != 1 or h.size == 0:
                raise ValueError("LineZ window must be a nonempty 1D array")
        else:
            raise TypeError(f"unknown domain {d!r}")
        self.heights = h

    @classmethod
    def full(cls, domain):
        if isinstance(domain, Box2D):
            return cls(domain, np.ones((domain.side, domain.side), np.int64))
        return cls(domain, np.ones(domain.size, np.int64))

    @classmethod
    def zeros(cls, domain):
        if isinstance(domain, Box2D):
            return cls(domain, np.zeros((domain.side, domain.side), np.int64))
        return cls(domain, np.zeros(domain.size, np.int64))

    @classmethod
    def point(cls, n, vertex=0):
        """``n`` particles at ``vertex`` on the integer line."""
        return cls(LineZ(), np.array([n], np.int64), lo=vertex)

    @property
    def threshold(self):
        return self.domain.threshold

    def total(self):
        return int(self.heights.sum())

    def copy(self):
        return replace(self, heights=self.heights.copy())

    def _index(self, v):
        if isinstance(self.domain, Box2D):
            return tuple(v)
        i = v - self.lo
        if not 0 <= i < self.heights.size:
            if isinstance(self.domain, LineZ):
                return None
            raise IndexError(f"vertex {v} not in {self.domain}")
        return i

    def __getitem__(self, v):
        i = self._index(v)
        return 0 if i is None else int(self.heights[i])

    def add(self, v, count=1):
        """Return a copy with ``count`` extra particles at ``v``."""
        out = self.copy()
        i = out._index(v)
        if i is None:
            out = out.with_window(min(v, out.lo), max(v, out.hi))
            i = out._index(v)
        out.heights[i] += count
        return out

    @property
    def hi(self):
        return self.lo + self.heights.size - 1

    def with_window(self, lo, hi):
        """Return the LineZ config re-windowed to ``[lo, hi]`` (must cover the support)."""
        h = np.zeros(hi - lo + 1, np.int64)
        s, e = max(lo, self.lo), min(hi, self.hi)
        if s <= e:
            h[s - lo:e - lo + 1] = self.heights[s - self.lo:e - self.lo + 1]
        if h.sum() != self.total():
            raise ValueError("window does not cover the support")
        return SandpileConfig(self.domain, h, lo)

    def unstable(self):
        return np.flatnonzero(self.heights.ravel() >= self.threshold)

    def is_stable(self):
        return bool(np.all(self.heights < self.threshold))

    def support(self):
        """Extremes ``(min, max)`` of vertices with positive height (1D), or None."""
        nz = np.flatnonzero(self.heights)
        if nz.size == 0:
            return None
        return self.lo + int(nz[0]), self.lo + int(nz[-1])

    def __eq__(self, other):
        if not isinstance(other, SandpileConfig) or self.domain != other.domain:
            return NotImplemented
        if isinstance(self.domain, LineZ):
            return _support_key(self) == _support_key(other)
        return self.lo == other.lo and np.array_equal(self.heights, other.heights)


def _support_key(cfg):
    nz = np.flatnonzero(cfg.heights)
    if nz.size == 0:
        return ()
    return (cfg.lo + int(nz[0]), tuple(cfg.heights[nz[0]:nz[-1] + 1].tolist()))


# --------------------------------------------------------------------------
# toppling rules and policies

@dataclass(frozen=True)
class Uniform1D:
    """Send left, right or both ways, each with probability 1/3."""

    code = K.UNIFORM1D
    p = 0.0
    literal = False


@dataclass(frozen=True)
class SRW1D:
    """Send exactly one particle left or right with probability 1/2."""

    code = K.SRW1D
    p = 0.0
    literal = False


@dataclass(frozen=True)
class PToppling:
    """Each adjacent edge independently carries a particle with probability ``p``.

    With ``literal=False`` an empty emission is resampled; with ``literal=True``
    it is kept as a toppling that moves nothing but counts in the odometer.
    """

    p: float
    literal: bool = False
    code = K.PTOPPLING

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


class TopplingPolicy(enum.IntEnum):
    FIFO = K.FIFO
    UNIFORM_RANDOM = K.RANDOM
    LEFTMOST = K.LEFTMOST


def _check_rule(rule, domain):
    if isinstance(domain, Box2D) and not isinstance(rule, PToppling):
        raise ValueError(f"{type(rule).__name__} is only defined on the line")


def sample_emission(rule, domain, vertex, rng):
    """Draw the set of sides a toppling at ``vertex`` emits along."""
    _check_rule(rule, domain)
    if isinstance(domain, Segment1D) and not domain.a <= vertex <= domain.b:
        raise IndexError(f"vertex {vertex} not in {domain}")
    sides = domain.sides
    mask = K.emission_mask(rule.code, float(rule.p), bool(rule.literal), len(sides), as_rng(rng))
    return mask_sides(domain, mask)


def sample_emissions(rule, domain, count, rng):
    """``count`` i.i.d. emissions as bit masks (bit ``e`` = side ``domain.sides[e]``)."""
    _check_rule(rule, domain)
    out = np.empty(int(count), np.int64)
    K.emission_batch(rule.code, float(rule.p), bool(rule.literal), len(domain.sides),
                     as_rng(rng), out)
    return out


def mask_sides(domain, mask):
    return frozenset(s for e, s in enumerate(domain.sides) if mask & (1 << e))


# --------------------------------------------------------------------------
# neighbour tables

def neighbour_table(domain, size=None):
    """``nbr[v, e]`` for the flattened domain (``size`` = window length on LineZ).

    Cached; callers must not modify the returned array.
    """
    n = domain.size if size is None and not isinstance(domain, LineZ) else size
    return _neighbour_table(domain, n)


@functools.lru_cache(maxsize=256)
def _neighbour_table(domain, size):
    if isinstance(domain, Box2D):
        L = domain.side
        idx = np.arange(L * L).reshape(L, L)
        nbr = np.full((L, L, 4), K.SINK, np.int64)
        nbr[1:, :, 0] = idx[:-1, :]    # N
        nbr[:-1, :, 1] = idx[1:, :]    # S
        nbr[:, :-1, 2] = idx[:, 1:]    # E
        nbr[:, 1:, 3] = idx[:, :-1]    # W
        return nbr.reshape(L * L, 4)
    n = size
    edge = K.GROW if isinstance(domain, LineZ) else K.SINK
    nbr = np.empty((n, 2), np.int64)
    nbr[:, 0] = np.arange(n) - 1
    nbr[:, 1] = np.arange(n) + 1
    nbr[0, 0] = edge
    nbr[n - 1, 1] = edge
    return nbr


def default_budget(config):
    m = max(config.total(), 1)
    if isinstance(config.domain, LineZ):
        return 1000 * m * m
    return 10_000 * m * config.domain.size


# --------------------------------------------------------------------------
# stabilization

@dataclass
class StabilizationOutcome:
    final: SandpileConfig
    odometer: np.ndarray
    exits: dict
    steps: int
    events: list | None = field(default=None, repr=False)

    @property
    def toppled(self):
        """Toppled vertices: labels on the line, ``(row, col)`` pairs on a box."""
        nz = np.argwhere(self.odometer > 0)
        if isinstance(self.final.domain, Box2D):
            return [tuple(map(int, rc)) for rc in nz]
        return [self.final.lo + int(i) for i in nz.ravel()]


def stabilize(config, rule, policy=TopplingPolicy.FIFO, rng=None, step_budget=None):
    """Stabilize ``config`` with random topplings drawn from ``rule``.

    Raises :class:`BudgetExceeded` after ``step_budget`` topplings (default
    ``10^4 * mass * |V|``, or ``10^3 * mass^2`` on the integer line).
    """
    domain = config.domain
    _check_rule(rule, domain)
    rng = as_rng(rng)
    budget = default_budget(config) if step_budget is None else int(step_budget)
    if budget <= 0:
        raise ValueError("step_budget must be positive")
    policy = TopplingPolicy(policy)
    thr = domain.threshold
    deg = len(domain.sides)
    h = config.heights.ravel().copy()
    odo = np.zeros(h.size, np.int64)
    exits = np.zeros(deg, np.int64)
    queue = np.empty(h.size, np.int64)
    inq = np.zeros(h.size, np.bool_)
    state = np.zeros(3, np.int64)
    K.init_queue(h, thr, queue, inq, state)
    lo = config.lo
    nbr = neighbour_table(domain, h.size)
    while True:
        status = K.relax(h, nbr, thr, rule.code, float(rule.p), bool(rule.literal), int(policy),
                         rng, budget, odo, exits, queue, inq, state)
        if status == K.DONE:
            break
        if status == K.BUDGET:
            raise BudgetExceeded(f"no stable configuration after {budget} topplings")
        # LineZ: pad the window on both sides and resume
        pad = max(h.size, 8)
        h, odo, inq = (np.concatenate([np.zeros(pad, a.dtype), a, np.zeros(pad, a.dtype)])
                       for a in (h, odo, inq))
        head, count = int(state[0]), int(state[1])
        old = queue
        queue = np.empty(h.size, np.int64)
        for t in range(count):
            queue[t] = old[(head + t) % old.size] + pad
        state[0] = 0
        lo -= pad
        nbr = neighbour_table(domain, h.size)

    if isinstance(domain, Box2D):
        final = SandpileConfig(domain, h.reshape(domain.side, domain.side))
        odo = odo.reshape(domain.side, domain.side)
    else:
        final = SandpileConfig(domain, h, lo)
    return StabilizationOutcome(final, odo, dict(zip(domain.sides, exits.tolist())), int(state[2]))


def stabilize_many(config, rule, runs, rng=None, policy=TopplingPolicy.FIFO, step_budget=None):
    """``runs`` independent stabilizations of one finite-domain config.

    Returns ``(finals, exits, steps)`` as arrays of shape ``(runs, |V|)``,
    ``(runs, n_sides)`` and ``(runs,)``; finals are flattened row-major.
    """
    domain = config.domain
    if isinstance(domain, LineZ):
        raise ValueError("stabilize_many needs a finite domain")
    _check_rule(rule, domain)
    rng = as_rng(rng)
    budget = default_budget(config) if step_budget is None else int(step_budget)
    h0 = config.heights.ravel().copy()
    deg = len(domain.sides)
    finals = np.empty((runs, h0.size), np.int64)
    exits = np.empty((runs, deg), np.int64)
    steps = np.empty(runs, np.int64)
    bad = K.relax_batch(h0, neighbour_table(domain), domain.threshold, rule.code, float(rule.p),
                        bool(rule.literal), int(TopplingPolicy(policy)), rng, budget,
                        finals, exits, steps)
    if bad >= 0:
        raise BudgetExceeded(f"run {bad}: no stable configuration after {budget} topplings")
    return finals, exits, steps


def stabilize_tracked(config, rule, policy=TopplingPolicy.FIFO, rng=None, step_budget=None):
    """Pure-Python stabilization that also records every ``(vertex, emission)``.

    Vertices are labels on the line and ``(row, col)`` on a box; emissions are
    frozensets of side names.  Finite domains only.
    """
    domain = config.domain
    if isinstance(domain, LineZ):
        raise ValueError("stabilize_tracked needs a finite domain")
    _check_rule(rule, domain)
    rng = as_rng(rng)
    budget = default_budget(config) if step_budget is None else int(step_budget)
    policy = TopplingPolicy(policy)
    thr = domain.threshold
    sides = domain.sides
    nbr = neighbour_table(domain)
    h = config.heights.ravel().copy()
    odo = np.zeros(h.size, np.int64)
    exits = dict.fromkeys(sides, 0)
    unstable = [int(v) for v in np.flatnonzero(h >= thr)]
    events = []
    while unstable:
        if len(events) >= budget:
            raise BudgetExceeded(f"no stable configuration after {budget} topplings")
        if policy is TopplingPolicy.FIFO:
            idx = 0
        elif policy is TopplingPolicy.UNIFORM_RANDOM:
            idx = int(rng.integers(0, len(unstable)))
        else:
            idx = unstable.index(min(unstable))
        v = unstable[idx]
        emitted = sample_emission(rule, domain, _label(domain, config.lo, v), rng)
        for e, s in enumerate(sides):
            if s in emitted:
                h[v] -= 1
                w = nbr[v, e]
                if w == K.SINK:
                    exits[s] += 1
                else:
                    h[w] += 1
                    if h[w] >= thr and w not in unstable:
                        unstable.append(int(w))
        assert h[v] >= 0
        odo[v] += 1
        events.append((_label(domain, config.lo, v), emitted))
        if policy is TopplingPolicy.FIFO:
            unstable.pop(0)
            if h[v] >= thr:
                unstable.append(v)
        elif h[v] < thr:
            unstable.pop(idx)
    if isinstance(domain, Box2D):
        L = domain.side
        final = SandpileConfig(domain, h.reshape(L, L))
        odo = odo.reshape(L, L)
    else:
        final = SandpileConfig(domain, h)
    return StabilizationOutcome(final, odo, exits, len(events), events)


def _label(domain, lo, v):
    if isinstance(domain, Box2D):
        return divmod(int(v), domain.side)
    return lo + int(v)


def replay(config, events):
    """Apply a recorded event sequence; returns ``(final, exits)``."""
    domain = config.domain
    out = config.copy()
    exits = dict.fromkeys(domain.sides, 0)
    offsets_1d = {"L": -1, "R": 1}
    offsets_2d = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}
    for v, emitted in events:
        if out[v] < domain.threshold:
            raise ValueError(f"illegal toppling at stable vertex {v}")
        for s in emitted:
            out.heights[out._index(v)] -= 1
            if isinstance(domain, Box2D):
                w = (v[0] + offsets_2d[s][0], v[1] + offsets_2d[s][1])
                inside = 0 <= w[0] < domain.side and 0 <= w[1] < domain.side
            else:
                w = v + offsets_1d[s]
                inside = domain.a <= w <= domain.b
            if inside:
                out.heights[out._index(w)] += 1
            else:
                exits[s] += 1
    return out, exits
