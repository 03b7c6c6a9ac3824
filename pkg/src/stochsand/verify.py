"""Cross-validation matrix: closed forms, recurrences, oracle, Monte Carlo, linear solves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analytics as A
from . import markov as M
from .lattice import C, SandpileConfig, Uniform1D, stabilize_many
from .oracle import oracle_vs_closed_forms
from .rng import make_rng

RATIONAL_SGR_MAX = 64
FLOAT_HOLES_MAX = 50
RATIONAL_HOLES_MAX = 12
RATIONAL_STATIONARY_MAX = 16
ORACLE_MAX = 4
MC_MAX = 3
MC_RUNS = 20_000


@dataclass
class VerifyRow:
    check: str
    n: int
    detail: str
    passed: bool


def _sgr_float(n):
    t = A.sgr_solve_recurrence(n, "float")
    err = max(abs(t.row(k)[c] - A.sgr_closed_form(n, k, "float")[c])
              for k in range(n + 2) for c in range(3))
    return f"max err {err:.2e}", err <= A.FLOAT_TOL


def _sgr_rational(n):
    t = A.sgr_solve_recurrence(n, "rational")
    ok = all(t.row(k) == A.sgr_closed_form(n, k) for k in range(n + 2))
    return "exact", ok


def _row_sums(n):
    s = A.sgr_row_sums(n, "rational")
    return f"sums {tuple(map(str, s))}", all(x * 3 == n for x in s)


def _holes_float(n):
    t = A.hole_solve_recurrence(n, "float")
    err = max(abs(t(i, j) - A.hole_closed_form(n, i, j, "float"))
              for i in range(1, n + 1) for j in range(1, n + 1))
    q = A.sgr_solve_recurrence(n, "float")
    mass = max(abs(sum(t(i, j) for j in range(1, n + 1)) - q.qB[i]) for i in range(1, n + 1))
    return f"max err {err:.2e}, sum_j err {mass:.2e}", err <= A.FLOAT_TOL and mass <= A.FLOAT_TOL


def _holes_rational(n):
    t = A.hole_solve_recurrence(n, "rational")
    ok = all(t(i, j) == A.hole_closed_form(n, i, j)
             for i in range(1, n + 1) for j in range(1, n + 1))
    return "exact", ok


def _stationary_float(n):
    pi = M.stationary_solve(M.transition_matrix_exact(n, "float")).probs
    err = float(np.abs(pi - M.stationary_exact(n, "float").probs).max())
    return f"max err {err:.2e}", err <= A.FLOAT_TOL


def _stationary_rational(n):
    pi = M.stationary_solve(M.transition_matrix_exact(n, "rational")).probs
    ok = list(pi) == list(M.stationary_exact(n, "rational").probs)
    return "exact", ok


def _oracle(n):
    rows = oracle_vs_closed_forms(n)
    bad = [r.name for r in rows if not r.ok]
    return f"{len(rows)} comparisons, {len(bad)} mismatches", not bad


def _monte_carlo(n):
    worst = 0.0
    for k in range(1, n + 1):
        finals, exits, _ = stabilize_many(SandpileConfig.full(C(n)).add(k), Uniform1D(),
                                          MC_RUNS, make_rng(20240101, n, k))
        full = (finals == 1).all(axis=1)
        est = (np.mean(full & (exits[:, 0] == 1)), np.mean(full & (exits[:, 1] == 1)),
               np.mean((exits == 1).all(axis=1)))
        for e, q in zip(est, A.sgr_closed_form(n, k, "float")):
            sigma = np.sqrt(q * (1 - q) / MC_RUNS)
            worst = max(worst, abs(e - q) / sigma if sigma > 0 else abs(e - q) * np.inf)
    return f"max |z| {worst:.2f} ({MC_RUNS} runs/k)", worst <= 4.0


CHECKS = [
    ("sgr recurrence vs closed form (float)", None, _sgr_float),
    ("sgr recurrence vs closed form (rational)", RATIONAL_SGR_MAX, _sgr_rational),
    ("sgr row sums = n/3 (rational)", RATIONAL_SGR_MAX, _row_sums),
    ("hole recurrence vs closed form (float)", FLOAT_HOLES_MAX, _holes_float),
    ("hole recurrence vs closed form (rational)", RATIONAL_HOLES_MAX, _holes_rational),
    ("stationary solve vs exact (float)", None, _stationary_float),
    ("stationary solve vs exact (rational)", RATIONAL_STATIONARY_MAX, _stationary_rational),
    ("oracle vs closed forms (rational)", ORACLE_MAX, _oracle),
    ("monte carlo vs closed forms (4 sigma)", MC_MAX, _monte_carlo),
]


def expected_rows(max_n):
    return sum(max_n if cap is None else min(max_n, cap) for _, cap, _ in CHECKS)


def verify_all(max_n):
    """Run every check for ``n = 1..max_n`` (each capped at its own size limit)."""
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    rows = []
    for name, cap, fn in CHECKS:
        top = max_n if cap is None else min(max_n, cap)
        for n in range(1, top + 1):
            detail, ok = fn(n)
            rows.append(VerifyRow(name, n, detail, bool(ok)))
    return rows


def format_report(rows):
    width = max(len(r.check) for r in rows)
    lines = [f"{'check':<{width}}  {'n':>4}  result  detail"]
    for r in rows:
        lines.append(f"{r.check:<{width}}  {r.n:>4}  {'PASS' if r.passed else 'FAIL':<6}  {r.detail}")
    n_ok = sum(r.passed for r in rows)
    lines.append(f"{n_ok}/{len(rows)} checks passed")
    return "\n".join(lines)
