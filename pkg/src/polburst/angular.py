"""Wigner 3j and 6j symbols from the Racah formulae.

Arguments may be ints, floats or Fractions but must be integer or
half-integer.  Values are exact up to the final square root, which is
taken in double precision.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt


class AngularMomentumError(ValueError):
    pass


def _twice(x) -> int:
    y = Fraction(x).limit_denominator(1000) * 2
    if y.denominator != 1 or abs(float(y) - 2 * float(x)) > 1e-9:
        raise AngularMomentumError(f"{x!r} is not a half-integer")
    return int(y)


def _triangle(a2: int, b2: int, c2: int) -> bool:
    return (a2 + b2 + c2) % 2 == 0 and abs(a2 - b2) <= c2 <= a2 + b2


def _delta(a2: int, b2: int, c2: int) -> Fraction:
    # triangle coefficient, squared
    return Fraction(
        factorial((a2 + b2 - c2) // 2) * factorial((a2 - b2 + c2) // 2) * factorial((-a2 + b2 + c2) // 2),
        factorial((a2 + b2 + c2) // 2 + 1),
    )


def wigner3j(j1, j2, j3, m1, m2, m3) -> float:
    args = [_twice(v) for v in (j1, j2, j3, m1, m2, m3)]
    for j2x, m2x in zip(args[:3], args[3:]):
        if j2x < 0:
            raise AngularMomentumError("negative angular momentum")
        if (j2x + m2x) % 2:
            raise AngularMomentumError("j + m must be integral")
    return _wigner3j(*args)


@lru_cache(maxsize=None)
def _wigner3j(a, b, c, ma, mb, mc) -> float:
    # all arguments doubled
    if ma + mb + mc != 0:
        return 0.0
    if not _triangle(a, b, c):
        return 0.0
    if abs(ma) > a or abs(mb) > b or abs(mc) > c:
        return 0.0
    h = lambda x: x // 2  # noqa: E731  (exact: all sums below are even)
    pre = _delta(a, b, c) * (
        factorial(h(a + ma)) * factorial(h(a - ma)) * factorial(h(b + mb))
        * factorial(h(b - mb)) * factorial(h(c + mc)) * factorial(h(c - mc))
    )
    kmin = max(0, h(b - c - ma), h(a - c + mb))
    kmax = min(h(a + b - c), h(a - ma), h(b + mb))
    total = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            factorial(k) * factorial(h(a + b - c) - k) * factorial(h(a - ma) - k)
            * factorial(h(b + mb) - k) * factorial(h(c - b + ma) + k) * factorial(h(c - a - mb) + k)
        )
        total += Fraction((-1) ** k, den)
    sign = -1 if h(a - b - mc) % 2 else 1
    return sign * float(total) * sqrt(pre)


def wigner6j(j1, j2, j3, j4, j5, j6) -> float:
    """{j1 j2 j3; j4 j5 j6}; zero whenever a triad fails the triangle rule."""
    args = [_twice(v) for v in (j1, j2, j3, j4, j5, j6)]
    if any(v < 0 for v in args):
        raise AngularMomentumError("negative angular momentum")
    return _wigner6j(*args)


@lru_cache(maxsize=None)
def _wigner6j(a, b, c, d, e, f) -> float:
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(_triangle(*t) for t in triads):
        return 0.0
    pre = Fraction(1)
    for t in triads:
        pre *= _delta(*t)
    sums = [sum(t) // 2 for t in triads]
    cross = [(a + b + d + e) // 2, (a + c + d + f) // 2, (b + c + e + f) // 2]
    total = Fraction(0)
    for k in range(max(sums), min(cross) + 1):
        den = 1
        for s in sums:
            den *= factorial(k - s)
        for s in cross:
            den *= factorial(s - k)
        total += Fraction((-1) ** k * factorial(k + 1), den)
    return float(total) * sqrt(pre)


def clebsch_gordan(j1, m1, j2, m2, j, m) -> float:
    """<j1 m1; j2 m2 | j m>."""
    phase = _twice(j1) - _twice(j2) + _twice(m)
    sign = -1 if (phase // 2) % 2 else 1
    return sign * sqrt(2 * float(j) + 1) * wigner3j(j1, j2, j, m1, m2, -m)
