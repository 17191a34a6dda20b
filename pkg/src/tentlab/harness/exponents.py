"""Critical exponents in exact rational arithmetic.

Inputs given as ints, :class:`fractions.Fraction` or decimal strings stay
exact; floats are read through their decimal representation, so ``0.25``
becomes ``1/4``. Infinite inputs are allowed where the formulas have limits.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

INF = math.inf


def exact(x):
    """Fraction for finite rationals, ``inf`` for infinity."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, float):
        if math.isinf(x):
            return INF
        return Fraction(repr(x))
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        return Fraction(x)
    raise TypeError(f"cannot read {x!r} as a rational")


def _is_inf(x) -> bool:
    return isinstance(x, float) and math.isinf(x)


def holder_conjugate(q):
    """``q' = q / (q - 1)`` with ``1' = inf`` and ``inf' = 1``."""
    q = exact(q)
    if _is_inf(q):
        return Fraction(1)
    if q == 1:
        return INF
    return q / (q - 1)


def p_M(n, m, M):
    """``2n / (n + 2mM)``; zero for infinite decay order."""
    n, m, M = exact(n), exact(m), exact(M)
    if _is_inf(M):
        return Fraction(0)
    den = n + 2 * m * M
    return INF if den == 0 else 2 * n / den


def p_q(n, m, q, beta):
    """``2nq / (2n + (2 beta + 1) m q)``; ``2n / ((2 beta + 1) m)`` at ``q = inf``."""
    n, m, q, beta = exact(n), exact(m), exact(q), exact(beta)
    if _is_inf(q):
        den = (2 * beta + 1) * m
        return INF if den == 0 else 2 * n / den
    den = 2 * n + (2 * beta + 1) * m * q
    return INF if den == 0 else 2 * n * q / den


def pq_boundary(n, m, beta):
    """The value of ``q'`` at which ``p_q(beta) = 1``: ``2n / (m (2 beta + 1))``."""
    n, m, beta = exact(n), exact(m), exact(beta)
    den = m * (2 * beta + 1)
    return INF if den == 0 else 2 * n / den


def M_kappa_q(n, m, kappa, q):
    """Zero for ``kappa > 0``, otherwise ``(n/m)|1/q - 1/2| - kappa``."""
    n, m, kappa, q = exact(n), exact(m), exact(kappa), exact(q)
    if kappa > 0:
        return Fraction(0)
    inv_q = Fraction(0) if _is_inf(q) else 1 / q
    return n / m * abs(inv_q - Fraction(1, 2)) - kappa


def M_c(n, m, kappa, q):
    """``max(n / (2m), M_{kappa,q})``."""
    return max(exact(n) / (2 * exact(m)), M_kappa_q(n, m, kappa, q))


def p_L(n, beta, p_minus):
    """``n p_- / (n + (2 beta + 1) p_-)``."""
    n, beta, pm = exact(n), exact(beta), exact(p_minus)
    den = n + (2 * beta + 1) * pm
    return INF if den == 0 else n * pm / den


def M_extra(n, m, q):
    """``n / (m q)``, the extra decay order asked for when ``q'`` is small; zero at ``q = inf``.

    Reported for reference only; no check compares a decay order against it.
    """
    n, m, q = exact(n), exact(m), exact(q)
    return Fraction(0) if _is_inf(q) else n / (m * q)


def p_heat(n, beta):
    """``n / (n + 2 beta + 2)``, the threshold for the heat semigroup."""
    n, beta = exact(n), exact(beta)
    den = n + 2 * beta + 2
    return INF if den == 0 else n / den


@dataclass
class CriticalExponents:
    n: object
    m: object
    M: object
    q: object
    beta: object
    kappa: object
    p_minus: object
    p_M: object
    p_q: object
    M_kappa_q: object
    M_c: object
    p_L: object
    p_heat: object
    M_extra: object = None
    tags: list = field(default_factory=list)

    def to_record(self) -> dict:
        return {k: _fmt(v) for k, v in asdict(self).items()}


def _fmt(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, list):
        return list(v)
    return v


def critical_exponents(n, m, M=INF, q=2, beta=0, kappa=1, p_minus=1) -> CriticalExponents:
    """All exponents for one parameter set.

    ``p_L`` uses the empirical lower semigroup exponent ``p_minus``; the
    heat-semigroup value ``p_heat`` is reported next to it.
    """
    vals = dict(p_M=p_M(n, m, M), p_q=p_q(n, m, q, beta), M_kappa_q=M_kappa_q(n, m, kappa, q),
                M_c=M_c(n, m, kappa, q), p_L=p_L(n, beta, p_minus), p_heat=p_heat(n, beta), M_extra=M_extra(n, m, q))
    tags = [f"{k} infinite (vanishing denominator)" for k, v in vals.items() if _is_inf(v)]
    return CriticalExponents(exact(n), exact(m), exact(M), exact(q), exact(beta), exact(kappa),
                             exact(p_minus), tags=tags, **vals)


def admissible(p, beta, n, p_minus) -> bool:
    """``p > p_L(beta)``."""
    bound = p_L(n, beta, p_minus)
    return not _is_inf(bound) and exact(p) > bound
