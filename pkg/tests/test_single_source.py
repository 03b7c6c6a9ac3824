import io
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from stochsand.lattice import SandpileConfig, Segment1D, Uniform1D
from stochsand.oracle import absorption_distribution
from stochsand.rng import make_rng
from stochsand.single_source import (shape_sweep, single_source, write_runs_csv,
                                     write_shape_csv)

METHODS = ("direct", "segment")


@pytest.mark.parametrize("method", METHODS)
def test_one_particle_never_topples(method, rng):
    r = single_source(1, rng, method, keep_final=True)
    assert r.D_left is None and r.D_right is None
    assert r.final_support == (0, 0) and r.final.total() == 1


@pytest.mark.parametrize("method", METHODS)
def test_two_particles(method, rng):
    seen = Counter()
    for _ in range(3000):
        r = single_source(2, rng, method, keep_final=True)
        assert (r.D_left, r.D_right) == (0, 0)
        seen[r.final_support] += 1
    # one toppling: {L}, {R}, {L,R} each a third
    assert set(seen) == {(-1, 0), (0, 1), (-1, 1)}
    assert all(abs(c / 3000 - 1 / 3) < 0.04 for c in seen.values())


@given(st.integers(1, 200), st.sampled_from(METHODS), st.integers(0, 2**32))
@settings(max_examples=30)
def test_property_conservation_and_interval(n, method, seed):
    r = single_source(n, make_rng(seed), method, keep_final=True)
    f = r.final
    assert f.total() == n and f.is_stable()
    lo, hi = r.final_support
    assert f[lo] > 0 and f[hi] > 0
    if r.D_left is not None:
        assert r.D_left <= 0 <= r.D_right
        assert lo <= r.D_left and r.D_right <= hi


def _oracle_law(n, w=5):
    cfg = SandpileConfig(Segment1D(-w, w), [n if i == 0 else 0 for i in range(-w, w + 1)], lo=-w)
    d = absorption_distribution(cfg, Uniform1D(), track_toppled=True, vertex_cap=2 * w + 1)
    assert d.prob(lambda f, e, t: sum(e) > 0) == 0
    law = {}
    for (f, _, top), p in d.outcomes.items():
        key = (tuple(f), (min(top), max(top)) if top else None)
        law[key] = law.get(key, 0) + p
    return law, w


@pytest.mark.parametrize("n", [3, 4, 5])
def test_segment_sampler_exact_law(n, rng):
    law, w = _oracle_law(n)
    runs = 40_000
    counts = Counter()
    for _ in range(runs):
        r = single_source(n, rng, "segment", keep_final=True)
        h = [r.final[x] for x in range(-w, w + 1)]
        counts[(tuple(h), None if r.D_left is None else (r.D_left, r.D_right))] += 1
    assert set(counts) <= set(law)
    for key, p in law.items():
        p = float(p)
        assert abs(counts[key] / runs - p) < 4 * np.sqrt(p * (1 - p) / runs) + 1e-9


def test_direct_matches_segment_in_distribution():
    n, runs = 60, 1000
    d = [single_source(n, make_rng(1, r), "direct") for r in range(runs)]
    s = [single_source(n, make_rng(2, r), "segment") for r in range(runs)]
    for attr in ("D_left", "D_right"):
        a = [getattr(x, attr) for x in d]
        b = [getattr(x, attr) for x in s]
        assert stats.ks_2samp(a, b).pvalue > 0.001
    sa = [x.final_support[1] - x.final_support[0] for x in d]
    sb = [x.final_support[1] - x.final_support[0] for x in s]
    assert stats.ks_2samp(sa, sb).pvalue > 0.001


def test_direct_reports_steps(rng):
    r = single_source(30, rng, "direct")
    assert r.steps > 0
    assert single_source(30, rng, "segment").steps is None


def test_reflection_symmetry():
    res = [single_source(400, make_rng(5, r), "segment") for r in range(400)]
    right = [x.D_right for x in res]
    left = [-x.D_left for x in res]
    assert stats.ks_2samp(right, left).pvalue > 0.001


def test_bad_arguments(rng):
    with pytest.raises(ValueError):
        single_source(0, rng)
    with pytest.raises(ValueError):
        single_source(5, rng, "bogus")


def test_shape_sweep_radius_near_one():
    rows, results = shape_sweep([2000, 8000], 10, seed=3)
    assert [len(results[n]) for n in (2000, 8000)] == [10, 10]
    for row in rows:
        assert abs(row.mean_right - 1) < 0.05 and abs(row.mean_left - 1) < 0.05
    # spread shrinks as n grows
    assert rows[1].std_right < rows[0].std_right * 1.2


def test_shape_sweep_reproducible_and_csv():
    a = shape_sweep([50], 5, seed=11)
    b = shape_sweep([50], 5, seed=11)
    assert a == b
    buf = io.StringIO()
    write_runs_csv(a[1], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "n,run,D_left,D_right,steps" and len(lines) == 6
    buf = io.StringIO()
    write_shape_csv(a[0], buf)
    assert buf.getvalue().startswith("n,runs,mean_right")


def test_ratios_converge_and_are_symmetric():
    rows, _ = shape_sweep([100, 1000, 10_000], 20, seed=17)
    gaps = [abs(r.mean_right - 1) for r in rows]
    assert gaps[2] < gaps[0]
    for r in rows:
        assert abs(r.mean_right - r.mean_left) <= 2 * max(r.std_right, r.std_left)


def test_direct_toppling_count_is_cubic():
    # steps / n^3 stays flat while steps / n^2 doubles with n
    means = {n: np.mean([single_source(n, make_rng(4, n, r), "direct").steps for r in range(8)])
             for n in (50, 100, 200)}
    ratios = [means[n] / n**3 for n in (50, 100, 200)]
    assert max(ratios) / min(ratios) < 1.3
    assert means[200] / 200**2 > 1.7 * means[100] / 100**2
