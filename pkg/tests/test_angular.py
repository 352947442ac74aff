"""Racah-formula 3j/6j symbols against sympy and their algebraic identities."""

import itertools
import random
from math import sqrt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import S
from sympy.physics.wigner import wigner_3j as sym3j
from sympy.physics.wigner import wigner_6j as sym6j

from polburst.angular import AngularMomentumError, clebsch_gordan, wigner3j, wigner6j


def _halves(maxj2):
    return [S(k) / 2 for k in range(0, maxj2 + 1)]


def test_3j_matches_sympy_random():
    rng = random.Random(7)
    for _ in range(600):
        j1, j2 = (S(rng.randint(0, 8)) / 2 for _ in range(2))
        j3 = S(rng.randint(0, 8)) / 2
        m1 = j1 - rng.randint(0, int(2 * j1))
        m2 = j2 - rng.randint(0, int(2 * j2))
        m3 = -m1 - m2
        if abs(m3) > j3 or (j3 - m3) % 1:
            continue
        ref = float(sym3j(j1, j2, j3, m1, m2, m3))
        assert wigner3j(j1, j2, j3, m1, m2, m3) == pytest.approx(ref, abs=1e-12)


def test_6j_matches_sympy_random():
    rng = random.Random(11)
    for _ in range(400):
        js = [S(rng.randint(0, 6)) / 2 for _ in range(6)]
        try:
            ref = float(sym6j(*js))
        except ValueError:
            continue  # sympy refuses non-integral perimeters; ours returns 0
        assert wigner6j(*js) == pytest.approx(ref, abs=1e-12)


def test_known_values():
    assert wigner3j(1, 1, 0, 0, 0, 0) == pytest.approx(-1 / sqrt(3), abs=1e-15)
    assert wigner3j(1, 1, 2, 0, 0, 0) == pytest.approx(sqrt(2 / 15), abs=1e-15)
    assert wigner6j(1, 1, 1, 1, 1, 1) == pytest.approx(1 / 6, abs=1e-15)
    # m-sum and triangle violations vanish
    assert wigner3j(1, 1, 1, 1, 1, 0) == 0.0
    assert wigner3j(1, 1, 3, 0, 0, 0) == 0.0


def test_invalid_arguments():
    with pytest.raises(AngularMomentumError):
        wigner3j(0.3, 1, 1, 0, 0, 0)
    with pytest.raises(AngularMomentumError):
        wigner3j(1, 1, 1, 0.5, -0.5, 0)
    with pytest.raises(AngularMomentumError):
        wigner6j(-1, 1, 1, 1, 1, 1)


@pytest.mark.parametrize("j1", [x / 2 for x in range(0, 9)])
@pytest.mark.parametrize("j2", [x / 2 for x in range(0, 9)])
def test_3j_orthogonality(j1, j2):
    """sum_{m1 m2} (2j3+1) 3j(j1 j2 j3; m1 m2 m3) 3j(j1 j2 j3'; m1 m2 m3) = delta."""
    j3s = [j1 + j2 - k for k in range(int(2 * min(j1, j2)) + 1)]
    ms = lambda j: [j - k for k in range(int(2 * j) + 1)]  # noqa: E731
    for j3, j3p in itertools.product(j3s, repeat=2):
        for m3 in ms(min(j3, j3p)):
            total = 0.0
            for m1 in ms(j1):
                m2 = -m3 - m1
                if abs(m2) > j2:
                    continue
                total += wigner3j(j1, j2, j3, m1, m2, m3) * wigner3j(j1, j2, j3p, m1, m2, m3)
            expected = 1.0 if j3 == j3p else 0.0
            assert (2 * j3 + 1) * total == pytest.approx(expected, abs=1e-12)


spins = st.integers(0, 8).map(lambda k: k / 2)


@settings(max_examples=200, deadline=None)
@given(spins, spins, spins, st.data())
def test_3j_symmetries(j1, j2, j3, data):
    m1 = j1 - data.draw(st.integers(0, int(2 * j1)))
    m2 = j2 - data.draw(st.integers(0, int(2 * j2)))
    m3 = -m1 - m2
    if abs(m3) > j3 or (j3 - m3) % 1:
        return
    v = wigner3j(j1, j2, j3, m1, m2, m3)
    sign = -1 if int(round(j1 + j2 + j3)) % 2 else 1
    assert wigner3j(j2, j3, j1, m2, m3, m1) == pytest.approx(v, abs=1e-13)  # cyclic
    assert wigner3j(j2, j1, j3, m2, m1, m3) == pytest.approx(sign * v, abs=1e-13)  # swap
    assert wigner3j(j1, j2, j3, -m1, -m2, -m3) == pytest.approx(sign * v, abs=1e-13)  # m flip


@settings(max_examples=200, deadline=None)
@given(*([spins] * 6))
def test_6j_symmetries(a, b, c, d, e, f):
    v = wigner6j(a, b, c, d, e, f)
    assert wigner6j(b, a, c, e, d, f) == pytest.approx(v, abs=1e-13)
    assert wigner6j(a, e, f, d, b, c) == pytest.approx(v, abs=1e-13)
    assert wigner6j(c, a, b, f, d, e) == pytest.approx(v, abs=1e-13)


def test_clebsch_gordan_unitarity():
    # <1 m1; 1 m2 | J M> over all J, M is orthogonal
    for m1, m2 in itertools.product((-1, 0, 1), repeat=2):
        norm = sum(clebsch_gordan(1, m1, 1, m2, J, m1 + m2) ** 2 for J in (0, 1, 2) if abs(m1 + m2) <= J)
        assert norm == pytest.approx(1.0, abs=1e-14)
