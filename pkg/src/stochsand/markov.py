"""The driven sandpile chain on ``C_n`` restricted to its recurrent states.

States are indexed ``0`` (full configuration) and ``j = 1..n`` (full minus one
particle at ``j``).  A segment ``[[a, b]]`` is the translate of ``C_{b-a+1}``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .analytics import _check_mode
from .lattice import C, SandpileConfig, Uniform1D, stabilize, stabilize_many
from .rng import as_rng


class SingularSystem(np.linalg.LinAlgError):
    """The stationary equations have no unique solution."""


class NotRecurrent(RuntimeError):
    """A chain step produced a configuration outside the recurrent class."""


class RecurrentState(NamedTuple):
    """``hole=None`` for the full configuration, else the vacant vertex in ``1..n``."""

    hole: Optional[int] = None

    @property
    def index(self):
        return 0 if self.hole is None else self.hole

    def label(self):
        return "full" if self.hole is None else f"vacant{self.hole}"

    def config(self, n):
        cfg = SandpileConfig.full(C(n))
        if self.hole is not None:
            cfg.heights[self.hole - 1] = 0
        return cfg

    @classmethod
    def from_heights(cls, heights):
        """Classify stable heights on ``C_n``; raises :class:`NotRecurrent`."""
        h = np.asarray(heights)
        zeros = np.flatnonzero(h == 0)
        if np.all((h == 0) | (h == 1)):
            if zeros.size == 0:
                return cls(None)
            if zeros.size == 1:
                return cls(int(zeros[0]) + 1)
        raise NotRecurrent(f"heights {h.tolist()} are not recurrent")


FULL = RecurrentState(None)


def states(n):
    return [FULL] + [RecurrentState(j) for j in range(1, n + 1)]


def canonical_length(a, b):
    """``|[[a, b]]|``: the chain on ``[[a, b]]`` is the chain on ``C_{b-a+1}``."""
    if a > b:
        raise ValueError("empty segment")
    return b - a + 1


def _index_of_heights(h):
    zeros = np.flatnonzero(h == 0)
    if h.max() > 1 or zeros.size > 1:
        return -1
    return 0 if zeros.size == 0 else int(zeros[0]) + 1


@dataclass
class TransitionMatrix:
    n: int
    entries: np.ndarray           # float64, or object array of Fractions
    mode: str = "float"

    def __getitem__(self, ij):
        i, j = ij
        i = i.index if isinstance(i, RecurrentState) else i
        j = j.index if isinstance(j, RecurrentState) else j
        return self.entries[i, j]

    def row_sums(self):
        return self.entries.sum(axis=1)


@dataclass
class StationaryDist:
    n: int
    probs: np.ndarray             # float64, or object array of Fractions
    mode: str = "float"

    def __getitem__(self, s):
        return self.probs[s.index if isinstance(s, RecurrentState) else s]

    @property
    def full(self):
        return self.probs[0]


def transition_matrix_exact(n, mode="float"):
    """The one-step matrix on the recurrent states of ``C_n``."""
    _check_mode(mode)
    if n < 1:
        raise ValueError("n must be positive")
    F = Fraction
    P = np.empty((n + 1, n + 1), dtype=object)
    P[0, 0] = F(2, 3)
    P[0, 1:] = F(1, 3 * n)
    P[1:, 0] = F(n + 2, 3 * n)
    P[1:, 1:] = F(1, 3 * n)
    for j in range(1, n + 1):
        P[j, j] = F(n - 1, 3 * n)
    if mode == "float":
        P = P.astype(float)
    return TransitionMatrix(n, P, mode)


def transition_matrix_empirical(n, samples_per_state, rng=None, rule=None):
    """Row-wise Monte Carlo estimate using the stabilization engine."""
    if samples_per_state < 1:
        raise ValueError("samples_per_state must be >= 1")
    rng = as_rng(rng)
    rule = Uniform1D() if rule is None else rule
    P = np.zeros((n + 1, n + 1))
    for s in states(n):
        base = s.config(n)
        sites = np.bincount(rng.integers(0, n, samples_per_state), minlength=n)
        counts = np.zeros(n + 1, np.int64)
        for x, cnt in enumerate(sites):
            if cnt == 0:
                continue
            finals, _, _ = stabilize_many(base.add(x + 1), rule, int(cnt), rng)
            for h in finals:
                idx = _index_of_heights(h)
                if idx < 0:
                    raise NotRecurrent(f"step from {s.label()} reached {h.tolist()}")
                counts[idx] += 1
        P[s.index] = counts / samples_per_state
    return TransitionMatrix(n, P, "float")


def stationary_exact(n, mode="float"):
    """``pi(full) = 1/2 + 1/(2(n+1))`` and ``pi(vacant j) = 1/(2(n+1))``."""
    _check_mode(mode)
    if n < 1:
        raise ValueError("n must be positive")
    pi = np.empty(n + 1, dtype=object)
    pi[0] = Fraction(1, 2) + Fraction(1, 2 * (n + 1))
    pi[1:] = Fraction(1, 2 * (n + 1))
    if mode == "float":
        pi = pi.astype(float)
    return StationaryDist(n, pi, mode)


def solve_stationary(P):
    """Solve ``pi P = pi``, ``sum(pi) = 1`` for a square row-stochastic array.

    The last balance equation is replaced by the normalisation.  Object arrays
    of Fractions are solved exactly.
    """
    P = np.asarray(P)
    m = P.shape[0]
    if P.shape != (m, m):
        raise ValueError("P must be square")
    if P.dtype == object:
        return _solve_exact(P)
    A = P.T - np.eye(m)
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    return pi


def _solve_exact(P):
    m = P.shape[0]
    A = [[P[j, i] - (1 if i == j else 0) for j in range(m)] + [Fraction(0)] for i in range(m)]
    A[-1] = [Fraction(1)] * m + [Fraction(1)]
    for col in range(m):
        piv = next((r for r in range(col, m) if A[r][col] != 0), None)
        if piv is None:
            raise SingularSystem("stationary equations are singular")
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        for r in range(m):
            f = A[r][col]
            if r != col and f != 0:
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    out = np.empty(m, dtype=object)
    out[:] = [A[i][m] for i in range(m)]
    return out


def stationary_solve(P):
    """Stationary distribution of a :class:`TransitionMatrix` by a dense direct solve."""
    return StationaryDist(P.n, solve_stationary(P.entries), P.mode)


def chain_step(state, n, rng, rule=None):
    """One step from a recurrent state: add a uniform particle and stabilize."""
    rule = Uniform1D() if rule is None else rule
    cfg = state.config(n).add(int(rng.integers(1, n + 1)))
    out = stabilize(cfg, rule, rng=rng)
    return RecurrentState.from_heights(out.final.heights)


def mcmc_run(n, burn_in, samples, rng=None, start=FULL):
    """Visit frequencies of the chain on ``C_n`` after ``burn_in`` steps."""
    if burn_in < 1 or samples < 1:
        raise ValueError("burn_in and samples must be >= 1")
    rng = as_rng(rng)
    s = start
    for _ in range(burn_in):
        s = chain_step(s, n, rng)
    counts = np.zeros(n + 1, np.int64)
    for _ in range(samples):
        s = chain_step(s, n, rng)
        counts[s.index] += 1
    return counts / samples


def run_chain(config, steps, rng=None, rule=None):
    """Drive an arbitrary stable config on a segment; yields each stable state."""
    rng = as_rng(rng)
    rule = Uniform1D() if rule is None else rule
    d = config.domain
    cfg = config
    for _ in range(steps):
        cfg = stabilize(cfg.add(int(rng.integers(d.a, d.b + 1))), rule, rng=rng).final
        yield cfg


def marginal_fullness(n_list, A_size, mode="rational"):
    """``pi_n(eta|_A = 1_A)`` for a window ``A`` of ``A_size`` vertices, per ``n``.

    Computed from the stationary law as ``1 - sum_{j in A} pi_n(vacant j)``;
    the window is ``{1, ..., A_size}`` (the value does not depend on placement).
    """
    _check_mode(mode)
    if A_size < 1:
        raise ValueError("A_size must be positive")
    out = []
    for n in n_list:
        if A_size > n:
            raise ValueError(f"A_size={A_size} exceeds n={n}")
        pi = stationary_exact(n, "rational")
        miss = sum(pi.probs[1:A_size + 1], Fraction(0))
        v = 1 - miss
        out.append(float(v) if mode == "float" else v)
    return out


# --------------------------------------------------------------------------
# CSV dumps

def _cell(x):
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def write_matrix_csv(P, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["row", "col", "value"])
    labels = [s.label() for s in states(P.n)]
    for i in range(P.n + 1):
        for j in range(P.n + 1):
            w.writerow([labels[i], labels[j], _cell(P.entries[i, j])])


def write_stationary_csv(pi, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["state", "value"])
    for s in states(pi.n):
        w.writerow([s.label(), _cell(pi.probs[s.index])])


def write_marginal_csv(n_list, A_size, values, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["n", "A_size", "value"])
    for n, v in zip(n_list, values):
        w.writerow([n, A_size, _cell(v)])
