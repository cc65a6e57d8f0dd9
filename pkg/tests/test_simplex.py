from fractions import Fraction as F

import pytest

from bpmatch.simplex import solve_lp, LPInfeasible, LPUnbounded


def test_simple_bounded_minimum():
    # min -x - y  s.t.  x + s1 = 1, y + s2 = 1
    A = [[1, 0, 1, 0], [0, 1, 0, 1]]
    b = [1, 1]
    c = [-1, -1, 0, 0]
    res = solve_lp(A, b, c)
    assert res.objective == -2
    assert res.x[:2] == [1, 1]


def test_equality_with_artificials_and_duals():
    # min x1 + 2 x2  s.t.  x1 + x2 = 2 (needs an artificial)
    A = [[1, 1]]
    b = [2]
    c = [1, 2]
    res = solve_lp(A, b, c)
    assert res.objective == 2 and res.x == [2, 0]
    # dual price on the row: c1 = 1 binds it
    assert res.dual == [1]


def test_infeasible_detected():
    # x1 + x2 = -1 with x >= 0 after sign normalization is -x1 - x2 = 1
    A = [[1, 1]]
    b = [-1]
    c = [1, 1]
    with pytest.raises(LPInfeasible):
        solve_lp(A, b, c)


def test_unbounded_detected():
    # min -x  s.t.  0x = 0 row only
    A = [[0]]
    b = [0]
    c = [-1]
    with pytest.raises(LPUnbounded):
        solve_lp(A, b, c)


def test_redundant_row_dropped_with_zero_price():
    # duplicated equality; the dropped copy gets price zero
    A = [[1, 1, 0], [1, 1, 0], [0, 1, 1]]
    b = [2, 2, 1]
    c = [3, 1, 0]
    res = solve_lp(A, b, c)
    assert res.objective == 4  # x1 = 1, x2 = 1
    assert res.x[0] == 1 and res.x[1] == 1
    assert res.dual[0] == 0 or res.dual[1] == 0
    # prices still certify the objective: pi . b == c . x
    assert sum(p * v for p, v in zip(res.dual, b)) == res.objective


def test_fractional_vertex_exact():
    # the classic half-integral triangle system
    A = [[1, 1, 0], [1, 0, 1], [0, 1, 1]]
    b = [1, 1, 1]
    c = [-1, -1, -1]
    res = solve_lp(A, b, c)
    assert res.objective == F(-3, 2)
    assert res.x == [F(1, 2), F(1, 2), F(1, 2)]


def test_duals_certify_objective_exactly():
    A = [[2, 1, 1, 0], [1, 3, 0, 1]]
    b = [4, 6]
    c = [-1, -2, 0, 0]
    res = solve_lp(A, b, c)
    assert sum(p * v for p, v in zip(res.dual, b)) == res.objective
    # dual feasibility: reduced costs of all columns are non-negative
    for j in range(4):
        reduced = c[j] - sum(res.dual[i] * A[i][j] for i in range(2))
        assert reduced >= 0
