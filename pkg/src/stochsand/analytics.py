"""Exit and hole probabilities for the full configuration plus one particle.

On ``C_n`` stabilize ``1 + delta_k``.  Exactly one particle leaves through the
left (``qL``), through the right (``qR``), or one through each side (``qB``);
in the last case a single hole remains, at ``j`` with probability
``h[n](i=k, j)``.

Two numeric modes: ``"float"`` (numpy float64) and ``"rational"``
(:class:`fractions.Fraction`).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .tridiag import residual, thomas

FLOAT_TOL = 1e-10
MODES = ("float", "rational")


class SolverDiverged(ArithmeticError):
    """A recurrence solve left a residual above tolerance."""


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _num(mode):
    return Fraction if mode == "rational" else float


# --------------------------------------------------------------------------
# closed forms

def sgr_closed_form(n, k, mode="rational"):
    """``(qL, qR, qB)`` for ``1 + delta_k`` on ``C_n``; ``k`` in ``0..n+1``."""
    _check_mode(mode)
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= k <= n + 1:
        raise ValueError(f"k={k} outside 0..{n + 1}")
    den = (n + 1) * (n + 2)
    qL = Fraction((n - k + 1) * (n - k + 2), den)
    qR = Fraction(k * (k + 1), den)
    qB = Fraction(2 * k * (n - k + 1), den)
    if mode == "float":
        return float(qL), float(qR), float(qB)
    return qL, qR, qB


def hole_closed_form(n, i, j, mode="rational"):
    """Probability that ``1 + delta_i`` on ``C_n`` stabilizes to ``1 - delta_j``."""
    _check_mode(mode)
    if n < 1:
        raise ValueError("n must be positive")
    if not (1 <= i <= n and 1 <= j <= n):
        raise ValueError(f"(i, j)=({i}, {j}) outside 1..{n}")
    h = Fraction(2 * i * (n - i + 1), n * (n + 1) * (n + 2))
    return float(h) if mode == "float" else h


# --------------------------------------------------------------------------
# tables

@dataclass
class SgrTable:
    """``qL/qR/qB[k]`` for ``k = 0..n+1`` (boundary rows included)."""

    n: int
    qL: list
    qR: list
    qB: list
    mode: str = "float"

    def row(self, k):
        return self.qL[k], self.qR[k], self.qB[k]

    def as_array(self):
        return np.array([[float(x) for x in col] for col in (self.qL, self.qR, self.qB)]).T


@dataclass
class HoleTable:
    """``h[i-1][j-1]`` for ``i, j = 1..n``."""

    n: int
    h: list
    mode: str = "float"

    def __call__(self, i, j):
        return self.h[i - 1][j - 1]

    def as_array(self):
        return np.array([[float(x) for x in row] for row in self.h])


class _Tables:
    """Bottom-up memo of every size solved so far, one per mode."""

    def __init__(self, mode):
        self.mode = mode
        self.sgr = {}
        self.holes = {}

    def qL(self, m, k):
        # size-0 segment: the added particle sits on the right sink already
        if m == 0:
            return _num(self.mode)(0)
        return self.sgr[m].qL[k]

    def qR(self, m, k):
        if m == 0:
            return _num(self.mode)(0)
        return self.sgr[m].qR[k]

    def ensure_sgr(self, n):
        for m in range(len(self.sgr) + 1, n + 1):
            self.sgr[m] = self._solve_sgr(m)
        return self.sgr[n]

    def _solve_sgr(self, n):
        one = _num(self.mode)(1)
        zero = one - one
        # -(1 + qL_{n-k}(1)) x_{k-1} + 3 x_k - x_{k+1} = 0,  x_0 = 1, x_{n+1} = 0
        split = [self.qL(n - k, 1) for k in range(1, n + 1)]
        lower = [-(one + s) for s in split]
        diag = [3 * one] * n
        upper = [-one] * n
        rhs = [zero] * n
        rhs[0] = one + split[0]
        x = thomas(lower, diag, upper, rhs)
        if self.mode == "float":
            res = residual(lower, diag, upper, rhs, x)
            if not res <= FLOAT_TOL:
                raise SolverDiverged(f"size {n}: residual {res:.3e}")
        qL = [one] + x + [zero]
        qR = [qL[n + 1 - k] for k in range(n + 2)]
        qB = [zero] + [one - qL[k] - qR[k] for k in range(1, n + 1)] + [zero]
        return SgrTable(n, qL, qR, qB, self.mode)

    def ensure_holes(self, n):
        self.ensure_sgr(n)
        for m in range(len(self.holes) + 1, n + 1):
            self.holes[m] = self._solve_holes(m)
        return self.holes[n]

    def _solve_holes(self, n):
        one = _num(self.mode)(1)
        zero = one - one
        third = one / 3
        if n == 1:
            # fixed by the toppling rule: the split toppling empties the vertex
            return HoleTable(1, [[third]], self.mode)
        prev = self.holes[n - 1].h                      # prev[i-1][x-1] = h_{n-1}^x(i)
        rows = [[zero] * n for _ in range(n)]
        qR_tail = self.qR(n - 1, n - 1)
        for j in range(1, n + 1):
            # tail[x] = h_{n-x}^{j-x}(n-x): hole at j formed by the segment right of x
            tail = {x: self.holes[n - x].h[n - x - 1][j - x - 1] for x in range(1, j)}
            keep = self.qR(n - j, n - j)

            def bulk_rest(i):
                # bulk recurrence without the qR_{n-1}(i) h_n^j(n) term
                s = zero
                for x in range(1, j):
                    s += prev[i - 1][x - 1] * tail[x]
                if j <= n - 1:
                    s += prev[i - 1][j - 1] * keep
                return s

            K = bulk_rest(n - 1)
            if j < n:
                Cj = third * prev[n - 2][j - 1]
            else:
                Cj = third * self.qL(n - 1, n - 1)
            hn = (third * K + Cj) / (one - third * qR_tail)
            rows[n - 1][j - 1] = hn
            for i in range(1, n):
                rows[i - 1][j - 1] = self.qR(n - 1, i) * hn + bulk_rest(i)
        if self.mode == "float":
            self._check_holes(n, rows)
        return HoleTable(n, rows, self.mode)

    def _check_holes(self, n, rows):
        third = 1.0 / 3.0
        prev = self.holes[n - 1].h
        worst = 0.0
        for j in range(1, n + 1):
            lhs = rows[n - 1][j - 1]
            if j < n:
                rhs = third * rows[n - 2][j - 1] + third * prev[n - 2][j - 1]
            else:
                rhs = third * rows[n - 2][n - 1] + third * self.qL(n - 1, n - 1)
            worst = max(worst, abs(lhs - rhs))
        if not worst <= FLOAT_TOL:
            raise SolverDiverged(f"holes size {n}: boundary residual {worst:.3e}")


_TABLES = {mode: _Tables(mode) for mode in MODES}


def sgr_solve_recurrence(n, mode="float"):
    """Solve the exit recurrence inductively over sizes ``1..n``."""
    _check_mode(mode)
    if n < 1:
        raise ValueError("n must be positive")
    return _TABLES[mode].ensure_sgr(n)


def hole_solve_recurrence(n, mode="float"):
    """Solve the bulk/boundary hole recurrences inductively over sizes ``1..n``."""
    _check_mode(mode)
    if n < 1:
        raise ValueError("n must be positive")
    return _TABLES[mode].ensure_holes(n)


def sgr_row_sums(n, mode="float"):
    """``(sum_k qL, sum_k qR, sum_k qB)`` over ``k = 1..n``; each equals ``n/3``."""
    t = sgr_solve_recurrence(n, mode)
    zero = _num(mode)(0)
    return (sum(t.qL[1:n + 1], zero), sum(t.qR[1:n + 1], zero), sum(t.qB[1:n + 1], zero))


def absorption_probabilities_srw(n, k, mode="rational"):
    """Classical gambler's ruin (one particle, simple random walk): ``(left, right)``."""
    _check_mode(mode)
    left = Fraction(n + 1 - k, n + 1)
    right = 1 - left
    return (float(left), float(right)) if mode == "float" else (left, right)


# --------------------------------------------------------------------------
# CSV dumps

SGR_HEADER = ["n", "k", "qL", "qR", "qB"]
SGR_HEADER_EXACT = ["n", "k", "qL_num", "qL_den", "qR_num", "qR_den", "qB_num", "qB_den"]
HOLE_HEADER = ["n", "i", "j", "h"]
HOLE_HEADER_EXACT = ["n", "i", "j", "h_num", "h_den"]


def _cells(values, exact):
    if exact:
        out = []
        for v in values:
            v = Fraction(v)
            out += [v.numerator, v.denominator]
        return out
    return [repr(float(v)) for v in values]


def sgr_rows(table):
    exact = table.mode == "rational"
    for k in range(table.n + 2):
        yield [table.n, k, *_cells(table.row(k), exact)]


def hole_rows(table):
    exact = table.mode == "rational"
    for i in range(1, table.n + 1):
        for j in range(1, table.n + 1):
            yield [table.n, i, j, *_cells([table(i, j)], exact)]


def write_sgr_csv(table, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SGR_HEADER_EXACT if table.mode == "rational" else SGR_HEADER)
    w.writerows(sgr_rows(table))


def write_hole_csv(table, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HOLE_HEADER_EXACT if table.mode == "rational" else HOLE_HEADER)
    w.writerows(hole_rows(table))
