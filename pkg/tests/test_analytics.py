import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochsand import analytics as A
from stochsand.analytics import (absorption_probabilities_srw, hole_closed_form,
                                 hole_solve_recurrence, sgr_closed_form, sgr_row_sums,
                                 sgr_solve_recurrence, write_hole_csv, write_sgr_csv)
from stochsand.tridiag import residual, thomas

F = Fraction


# ---------------------------------------------------------------- tridiagonal

def test_thomas_float_matches_dense():
    rng = np.random.default_rng(0)
    n = 30
    lo, up = rng.uniform(-1, 0, n), rng.uniform(-1, 0, n)
    di = rng.uniform(3, 4, n)
    rhs = rng.uniform(-1, 1, n)
    x = thomas(list(lo), list(di), list(up), list(rhs))
    M = np.diag(di) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)
    assert np.allclose(M @ np.array(x), rhs, atol=1e-13)


def test_thomas_rational_exact():
    lo, di, up, rhs = [F(-1)] * 4, [F(3)] * 4, [F(-1)] * 4, [F(1), F(0), F(0), F(2)]
    x = thomas(lo, di, up, rhs)
    assert residual(lo, di, up, rhs, x) == 0
    assert all(isinstance(v, Fraction) for v in x)


# ---------------------------------------------------------------- worked examples

def test_single_site_exits_each_a_third():
    assert sgr_closed_form(1, 1) == (F(1, 3), F(1, 3), F(1, 3))
    assert sgr_solve_recurrence(1, "rational").row(1) == (F(1, 3), F(1, 3), F(1, 3))


def test_middle_of_three_sites():
    qL, qR, qB = sgr_closed_form(3, 2, "float")
    assert (qL, qR, qB) == pytest.approx((0.3, 0.3, 0.4), abs=0)


def test_boundary_rows():
    t = sgr_solve_recurrence(5, "rational")
    assert t.row(0) == (1, 0, 0)
    assert t.row(6) == (0, 1, 0)


def test_two_sites():
    assert sgr_closed_form(2, 1) == (F(1, 2), F(1, 6), F(1, 3))
    assert sgr_solve_recurrence(2, "rational").row(1) == (F(1, 2), F(1, 6), F(1, 3))


def test_hole_examples():
    assert hole_solve_recurrence(1, "rational")(1, 1) == F(1, 3)
    t2 = hole_solve_recurrence(2, "rational")
    assert all(t2(i, j) == F(1, 6) for i in (1, 2) for j in (1, 2))
    t10 = hole_solve_recurrence(10, "rational")
    assert sum(t10(4, j) for j in range(1, 11)) == sgr_closed_form(10, 4)[2]


def test_srw_ruin():
    assert absorption_probabilities_srw(4, 1) == (F(4, 5), F(1, 5))
    assert absorption_probabilities_srw(4, 2, "float") == pytest.approx((0.6, 0.4))


# ---------------------------------------------------------------- recurrences vs closed forms

def test_recurrence_rational_small():
    for n in range(1, 21):
        t = sgr_solve_recurrence(n, "rational")
        assert all(t.row(k) == sgr_closed_form(n, k) for k in range(n + 2))


def test_hole_float_matches_closed_form():
    t = hole_solve_recurrence(30, "float")
    for i in range(1, 31):
        for j in range(1, 31):
            assert abs(t(i, j) - hole_closed_form(30, i, j, "float")) < 1e-10


def test_row_sums():
    for mode in A.MODES:
        for n in (1, 4, 17):
            sums = sgr_row_sums(n, mode)
            assert all(abs(s - F(n, 3)) < 1e-10 for s in sums)


@given(st.integers(1, 150), st.data())
def test_property_exit_law(n, data):
    k = data.draw(st.integers(0, n + 1))
    t = sgr_solve_recurrence(n, "float")
    qL, qR, qB = t.row(k)
    assert abs(qL + qR + qB - 1) < 1e-12
    assert min(qL, qR, qB) >= 0
    # reflection k -> n+1-k swaps the two sides
    mL, mR, mB = t.row(n + 1 - k)
    assert abs(qL - mR) < 1e-12 and abs(qR - mL) < 1e-12 and abs(qB - mB) < 1e-12


@given(st.integers(1, 40), st.data())
def test_property_hole_rows(n, data):
    i = data.draw(st.integers(1, n))
    t = hole_solve_recurrence(n, "float")
    row = [t(i, j) for j in range(1, n + 1)]
    assert max(row) - min(row) < 1e-12
    assert abs(sum(row) - sgr_closed_form(n, i, "float")[2]) < 1e-12
    assert abs(t(i, 1) - t(n + 1 - i, n)) < 1e-12


def test_bad_arguments():
    with pytest.raises(ValueError):
        sgr_closed_form(3, 5)
    with pytest.raises(ValueError):
        hole_closed_form(3, 0, 1)
    with pytest.raises(ValueError):
        sgr_solve_recurrence(0)
    with pytest.raises(ValueError):
        sgr_solve_recurrence(3, mode="decimal")


def test_residual_guard(monkeypatch):
    monkeypatch.setattr(A, "FLOAT_TOL", -1.0)
    monkeypatch.setitem(A._TABLES, "float", A._Tables("float"))
    with pytest.raises(A.SolverDiverged):
        sgr_solve_recurrence(3, "float")


# ---------------------------------------------------------------- dumps

def test_sgr_csv_rational():
    buf = io.StringIO()
    write_sgr_csv(sgr_solve_recurrence(2, "rational"), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(A.SGR_HEADER_EXACT)
    assert lines[2] == "2,1,1,2,1,6,1,3"
    assert len(lines) == 1 + 4


def test_hole_csv_float():
    buf = io.StringIO()
    write_hole_csv(hole_solve_recurrence(3, "float"), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(A.HOLE_HEADER)
    assert len(lines) == 1 + 9
    assert float(lines[1].split(",")[3]) == pytest.approx(0.1)
