"""One test per acceptance criterion; each prints a PASS/FAIL line with its numbers."""
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from stochsand.analytics import (hole_closed_form, hole_solve_recurrence, sgr_closed_form,
                                 sgr_solve_recurrence)
from stochsand.grid2d import label_clusters, spans_bfs, spans_left_right, BoxChain, ChainSettings
from stochsand.grid2d import density_point, spanning_probability
from stochsand.lattice import (C, Box2D, PToppling, SandpileConfig, TopplingPolicy, Uniform1D,
                               stabilize_many)
from stochsand.markov import (marginal_fullness, mcmc_run, stationary_solve,
                              transition_matrix_empirical, transition_matrix_exact)
from stochsand.oracle import oracle_vs_closed_forms
from stochsand.rng import make_rng
from stochsand.single_source import single_source

pytestmark = pytest.mark.acceptance
F = Fraction


class Clock:
    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t


def test_1_closed_form_vs_recurrence(criterion):
    with Clock() as c:
        worst = 0.0
        for n in range(1, 201):
            t = sgr_solve_recurrence(n, "float")
            for k in range(n + 2):
                got, want = t.row(k), sgr_closed_form(n, k, "float")
                worst = max(worst, *(abs(a - b) for a, b in zip(got, want)))
        exact = all(sgr_solve_recurrence(n, "rational").row(k) == sgr_closed_form(n, k)
                    for n in range(1, 65) for k in range(n + 2))
    ok = worst < 1e-10 and exact and c.elapsed < 10
    assert criterion("1 closed form vs recurrence", ok,
                     f"max float err {worst:.2e} (n<=200), rational exact n<=64: {exact}, "
                     f"{c.elapsed:.2f}s")


def test_2_hole_uniformity(criterion):
    with Clock() as c:
        worst = worst_sum = 0.0
        for n in range(1, 51):
            t = hole_solve_recurrence(n, "float")
            for i in range(1, n + 1):
                row = [t(i, j) for j in range(1, n + 1)]
                worst = max(worst, max(abs(x - hole_closed_form(n, i, 1, "float")) for x in row))
                worst_sum = max(worst_sum, abs(sum(row) - sgr_closed_form(n, i, "float")[2]))
    ok = worst < 1e-10 and worst_sum < 1e-10 and c.elapsed < 30
    assert criterion("2 hole uniformity", ok,
                     f"max err {worst:.2e}, max |sum_j h - qB| {worst_sum:.2e}, {c.elapsed:.2f}s")


def test_3_oracle_equality(criterion):
    with Clock() as c:
        rows = [r for n in range(1, 5) for order in ("leftmost", "rightmost")
                for r in oracle_vs_closed_forms(n, order)]
    bad = [r.name for r in rows if not r.ok]
    ok = not bad and c.elapsed < 60
    assert criterion("3 oracle equality", ok,
                     f"{len(rows)} exact comparisons n<=4, {len(bad)} mismatches, {c.elapsed:.2f}s")


def test_4_stationary_distribution(criterion):
    with Clock() as c:
        worst = 0.0
        for n in range(1, 201):
            pi = stationary_solve(transition_matrix_exact(n)).probs
            want = np.full(n + 1, 1 / (2 * (n + 1)))
            want[0] = 0.5 + 1 / (2 * (n + 1))
            worst = max(worst, np.abs(pi - want).max())
        spots = [stationary_solve(transition_matrix_exact(n, "rational")).full for n in (1, 2, 5)]
    ok = worst < 1e-10 and spots == [F(3, 4), F(2, 3), F(7, 12)] and c.elapsed < 5
    assert criterion("4 stationary distribution", ok,
                     f"max err {worst:.2e} (n<=200), pi(full) n=1,2,5: "
                     f"{', '.join(map(str, spots))}, {c.elapsed:.2f}s")


def test_5_monte_carlo_agreement(criterion):
    n, runs = 10, 10**5
    with Clock() as c:
        rng = make_rng(2024, 5)
        worst_z = 0.0
        for k in range(1, n + 1):
            cfg = SandpileConfig.full(C(n)).add(k)
            finals, exits, _ = stabilize_many(cfg, Uniform1D(), runs, rng)
            obs = (np.mean((exits[:, 0] == 1) & (exits[:, 1] == 0)),
                   np.mean((exits[:, 0] == 0) & (exits[:, 1] == 1)),
                   np.mean((exits[:, 0] == 1) & (exits[:, 1] == 1)))
            for o, q in zip(obs, sgr_closed_form(n, k, "float")):
                worst_z = max(worst_z, abs(o - q) / np.sqrt(q * (1 - q) / runs))
        freq_full = mcmc_run(1, 1000, 10**5, make_rng(2024, 51))[0]
    ok = worst_z < 4 and abs(freq_full - 0.75) <= 0.01 and c.elapsed < 120
    assert criterion("5 monte carlo agreement", ok,
                     f"max |z| {worst_z:.2f} over k=1..10, mcmc n=1 freq(full) {freq_full:.4f}, "
                     f"{c.elapsed:.1f}s")


def test_6_transition_matrix_monte_carlo(criterion):
    with Clock() as c:
        emp = transition_matrix_empirical(3, 10**5, make_rng(2024, 6)).entries
        dev = np.abs(emp - transition_matrix_exact(3).entries).max()
    ok = dev < 0.01 and c.elapsed < 60
    assert criterion("6 transition matrix monte carlo", ok,
                     f"max entrywise deviation {dev:.4f} (n=3, 1e5/row), {c.elapsed:.1f}s")


def test_7_marginal_convergence(criterion):
    ns = [10, 100, 1000]
    with Clock() as c:
        vals = marginal_fullness(ns, 1)
    exact = vals == [1 - F(1, 2 * (n + 1)) for n in ns]
    mono = vals[0] < vals[1] < vals[2] < 1
    ok = exact and mono and c.elapsed < 1
    assert criterion("7 marginal convergence", ok,
                     f"values {', '.join(map(str, vals))}, exact {exact}, monotone {mono}")


def test_8_simulation_harnesses(criterion):
    with Clock() as c:
        lo = density_point(20, 0.5, 200, seed=8)
        hi = density_point(20, 1.0, 200, seed=8)
        sep = (lo.rho - hi.rho) / np.hypot(lo.stderr, hi.stderr)
        ok_a = lo.rho > hi.rho and sep >= 3
        sp = {p: spanning_probability(40, p, 50, seed=8).spanning_prob for p in (0.4, 0.64, 0.9)}
        ok_b = sp[0.4] > 0.9 and sp[0.9] < 0.1
        radii = [single_source(10**4, make_rng(8, r), "segment").radius_right() for r in range(20)]
        inside = sum(0.9 <= x <= 1.1 for x in radii)
        ok_c = inside >= 19
    ok = ok_a and ok_b and ok_c and c.elapsed < 900
    criterion("8a density ordering", ok_a,
              f"rho(0.5)={lo.rho:.4f}+-{lo.stderr:.4f}, rho(1.0)={hi.rho:.4f}+-{hi.stderr:.4f}, "
              f"{sep:.1f} SE apart")
    criterion("8b spanning bracket", ok_b,
              f"L=40: P(0.40)={sp[0.4]:.2f}, P(0.64)={sp[0.64]:.2f}, P(0.90)={sp[0.9]:.2f}")
    criterion("8c single-source radius", ok_c,
              f"n=1e4: {inside}/20 runs in [0.9, 1.1], radii {min(radii):.3f}..{max(radii):.3f}")
    assert criterion("8 simulation harnesses", ok, f"combined {c.elapsed:.1f}s")


def test_9_structural_invariants(criterion):
    rng = make_rng(2024, 9)
    # mass conservation on random configs, both dimensions
    mass_ok = True
    for n in (1, 3, 7):
        cfg = SandpileConfig(C(n), rng.integers(0, 6, n))
        f, e, _ = stabilize_many(cfg, Uniform1D(), 2000, rng, policy=TopplingPolicy.UNIFORM_RANDOM)
        mass_ok &= bool(np.all(f.sum(1) + e.sum(1) == cfg.total()))
    cfg = SandpileConfig(Box2D(4), rng.integers(0, 9, (4, 4)))
    f, e, _ = stabilize_many(cfg, PToppling(0.6), 2000, rng)
    mass_ok &= bool(np.all(f.sum(1) + e.sum(1) == cfg.total()))
    rows_ok = all(np.all(transition_matrix_exact(n, "rational").row_sums() == 1)
                  for n in (1, 2, 10, 50))
    sums_ok = all(sum(sgr_closed_form(n, k)) == 1 and
                  sum(sgr_solve_recurrence(n, "rational").row(k)) == 1
                  for n in range(1, 30) for k in range(n + 2))
    t = sgr_solve_recurrence(40, "rational")
    refl_ok = all(t.row(k) == (t.qR[41 - k], t.qL[41 - k], t.qB[41 - k]) for k in range(42))
    pvals = []
    for n in (1, 2, 3, 4):
        cfg = SandpileConfig.full(C(n)).add((n + 1) // 2)
        keys = []
        for pol in (TopplingPolicy.FIFO, TopplingPolicy.UNIFORM_RANDOM, TopplingPolicy.LEFTMOST):
            f, e, _ = stabilize_many(cfg, Uniform1D(), 10**5, rng, policy=pol)
            code = (f * (2 ** np.arange(n))).sum(1) * 4 + e[:, 0] * 2 + e[:, 1]
            keys.append(code)
        cats = np.unique(np.concatenate(keys))
        table = np.array([[np.sum(k == c) for c in cats] for k in keys])
        pvals.append(stats.chi2_contingency(table)[1] if len(cats) > 1 else 1.0)
    chi_ok = min(pvals) > 0.01
    chain = BoxChain(16, 0.64, make_rng(2024, 91), ChainSettings(burn_in=2000, thinning=64))
    agree = 0
    for h in chain.samples(100):
        mask = h == 3
        agree += spans_left_right(label_clusters(map(tuple, np.argwhere(mask)), 16)[0]) == spans_bfs(mask)
    uf_ok = agree == 100
    ok = mass_ok and rows_ok and sums_ok and refl_ok and chi_ok and uf_ok
    assert criterion("9 structural invariants", ok,
                     f"mass {mass_ok}, row-stochastic {rows_ok}, qL+qR+qB=1 {sums_ok}, "
                     f"reflection {refl_ok}, policy chi2 min p {min(pvals):.3f}, "
                     f"union-find vs BFS {agree}/100")
