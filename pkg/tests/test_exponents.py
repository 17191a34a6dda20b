import math
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from tentlab.harness.exponents import (INF, M_c, M_kappa_q, admissible, critical_exponents, exact, holder_conjugate,
                                       p_heat, p_L, p_M, p_q, pq_boundary)

rationals = st.fractions(min_value=Fraction(1, 10), max_value=10, max_denominator=50)


def test_examples():
    assert p_M(1, 2, 1) == Fraction(2, 5)
    assert p_L(1, 0, 1) == Fraction(1, 2)
    assert M_kappa_q(1, 2, 1, 7) == 0 and M_kappa_q(3, 2, Fraction(1, 3), INF) == 0
    assert isinstance(p_M(1, 2, 1), Fraction)


def test_float_inputs_are_read_exactly():
    assert exact(0.25) == Fraction(1, 4) and exact("3/7") == Fraction(3, 7) and exact("inf") == INF


def test_kappa_nonpositive_branch():
    assert M_kappa_q(2, 2, 0, 4) == Fraction(1, 4)
    assert M_kappa_q(1, 2, Fraction(-1, 2), 1) == Fraction(1, 4) + Fraction(1, 2)
    assert M_c(1, 2, 1, 2) == Fraction(1, 4)
    assert M_c(4, 1, -1, 1) == Fraction(3)


def test_p_q_at_q2_and_infinity():
    n, m, b = 2, 2, Fraction(1, 3)
    assert p_q(n, m, 2, b) == Fraction(2 * n * 2) / (2 * n + (2 * b + 1) * 2 * m)
    assert p_q(n, m, INF, b) == pq_boundary(n, m, b)


def test_holder():
    assert holder_conjugate(2) == 2 and holder_conjugate(1) == INF and holder_conjugate(INF) == 1


def test_heat_versus_general_formula():
    ce = critical_exponents(1, 2, beta=0)
    assert ce.p_L == Fraction(1, 2) and ce.p_heat == Fraction(1, 3)


def test_infinite_tag():
    assert critical_exponents(1, 2).tags == []
    ce = critical_exponents(1, 1, beta=-1, p_minus=1)
    assert ce.p_L == INF and any("p_L" in t for t in ce.tags)


def test_record_is_json_ready():
    rec = critical_exponents(1, 2, M=INF).to_record()
    assert rec["p_M"] == "0" and rec["M"] == "inf"


@given(st.integers(1, 3), st.sampled_from([1, 2, 4]), rationals, rationals)
def test_boundary_symbolic(n, m, beta, q):
    qs, ns, ms, bs = sp.Rational(q.numerator, q.denominator), sp.Integer(n), sp.Integer(m), sp.Rational(
        beta.numerator, beta.denominator)
    pq_sym = 2 * ns * qs / (2 * ns + (2 * bs + 1) * ms * qs)
    assert sp.Rational(str(p_q(n, m, q, beta))) == pq_sym
    if q > 1:
        qprime = qs / (qs - 1)
        sym_boundary = sp.simplify(qprime - 2 * ns / (ms * (2 * bs + 1))) == 0
        assert (p_q(n, m, q, beta) == 1) == sym_boundary


@pytest.mark.parametrize("p,beta,ok", [(Fraction(1, 2), 0, False), (Fraction(51, 100), 0, True), (1, 0.25, True),
                                       (Fraction(1, 3), 1, True)])
def test_admissible(p, beta, ok):
    assert admissible(p, beta, 1, 1) is ok


@given(st.integers(1, 3), st.sampled_from([1, 2, 4]), st.fractions(min_value=0, max_value=3, max_denominator=30))
def test_boundary_points_hit_one(n, m, beta):
    qprime = pq_boundary(n, m, beta)
    if qprime <= 1:
        return
    q = qprime / (qprime - 1)
    assert p_q(n, m, q, beta) == 1
    b = sp.Rational(beta.numerator, beta.denominator)
    qs = sp.Rational(q.numerator, q.denominator)
    assert sp.simplify(2 * n * qs / (2 * n + (2 * b + 1) * m * qs) - 1) == 0


def test_extra_decay_threshold_recorded():
    rec = critical_exponents(1, 2, 3, 4, 0, 0, 1).to_record()
    assert rec["M_extra"] == "1/8"
    assert critical_exponents(1, 2, q=math.inf).M_extra == 0
