import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blaschke_lab.circle import (
    Cycle,
    conjugacy_point,
    conjugacy_points,
    enumerate_cycles,
    inverse_branches,
    locate_cycle,
    mobius,
    monotone_check,
    necklace_count,
    spectrum,
    wrap,
)
from blaschke_lab.errors import CutoffExceeded
from blaschke_lab.moduli import evaluate, make_standard

from .strategies import blaschke


def zd(d):
    return make_standard(d, [0j] * (d - 1))


def test_mobius_values():
    assert [mobius(n) for n in range(1, 11)] == [1, -1, -1, 0, -1, 1, -1, 0, 0, 1]


def test_enumerate_examples():
    assert [c.label for c in enumerate_cycles(2, 1)] == [0]
    (c,) = enumerate_cycles(2, 2)
    assert sorted(c.orbit) == [1, 2]
    assert sorted(c.angles_zd) == [1 / 3, 2 / 3]
    orbits = sorted(tuple(sorted(c.orbit)) for c in enumerate_cycles(3, 2))
    assert orbits == [(1, 3), (2, 6), (5, 7)]


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_necklace_counts(d):
    for n in range(1, 9):
        if d**n - 1 > 1 << 24:
            continue
        assert len(enumerate_cycles(d, n)) == necklace_count(d, n)
        # every residue except the fixed 0 of period dividing n is covered once
        total = sum(m * len(enumerate_cycles(d, m)) for m in range(1, n + 1) if n % m == 0)
        assert total == d**n - 1


def test_cutoff():
    with pytest.raises(CutoffExceeded):
        enumerate_cycles(5, 12)


def test_inverse_branches_examples():
    b = inverse_branches(zd(2), 1.0)
    assert np.allclose(b, [1, -1])
    b = inverse_branches(zd(3), 1j)
    roots = np.exp(1j * (np.pi / 6 + 2 * np.pi * np.arange(3) / 3))
    assert np.allclose(b, roots)
    f = make_standard(2, [0.5])
    b = inverse_branches(f, 1.0)
    assert min(abs(z - 1) for z in b) < 1e-14
    # oracle: roots of z (z - 0.5) = (1 - 0.5 z) after the leading constant
    for z in b:
        assert abs(evaluate(f, z) - 1) < 1e-13


def test_spectrum_monomials():
    s = spectrum(zd(2), 3)
    assert np.allclose(sorted(e.multiplier for e in s.entries), [2, 4, 8, 8], rtol=0, atol=1e-12)
    s = spectrum(zd(3), 2)
    assert np.allclose(sorted(e.multiplier for e in s.by_period(1)), [3, 3], rtol=0, atol=1e-12)
    assert np.allclose(sorted(e.multiplier for e in s.by_period(2)), [9] * 3, rtol=0, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_monomial_exact(d):
    for e in spectrum(zd(d), 6).entries:
        assert abs(e.multiplier - d**e.cycle.period) < 1e-12


def test_degree_two_fixed_point():
    f = make_standard(2, [0.5])
    lc = locate_cycle(f, Cycle(2, 1, 0))
    assert abs(lc.points[0] - 1) < 1e-13
    assert abs(lc.multiplier - 4.0) < 1e-12
    (e,) = spectrum(f, 1).entries
    assert abs(e.multiplier - 4.0) < 1e-12


def test_conjugacy_point_examples():
    f = make_standard(2, [0.5])
    assert conjugacy_point(f, 0.0) == 0.0
    for x in (0.1, 0.37, 0.8):
        assert abs(wrap(conjugacy_point(zd(3), x) - x)) < 1e-12
    # 1/3 lies on the period-2 cycle of z^2
    lc = locate_cycle(f, Cycle(2, 2, 1))
    y = conjugacy_point(f, 1 / 3)
    assert min(abs(wrap(y - t)) for t in lc.angles) < 1e-10


@given(blaschke(degrees=(2, 3)))
def test_conjugacy_equation(f):
    x = (np.arange(256) + 0.5) / 256
    y = np.array([conjugacy_point(f, t, depth=50) for t in x])
    ydx = np.array([conjugacy_point(f, (f.d * t) % 1.0, depth=50) for t in x])
    fy = np.angle(evaluate(f, np.exp(2j * np.pi * y))) / (2 * np.pi)
    assert np.abs(wrap(ydx - fy)).max() < 1e-8


@given(blaschke(degrees=(2, 3, 4)))
def test_conjugacy_monotone(f):
    x = np.arange(512) / 512
    assert monotone_check([conjugacy_point(f, t) for t in x])


@given(blaschke(degrees=(2, 3)), st.integers(1, 4))
def test_located_cycles_repelling_and_consistent(f, n):
    for c in enumerate_cycles(f.d, n):
        lc = locate_cycle(f, c)
        assert lc.imag_residue < 1e-10
        assert abs(lc.multiplier) > 1
        # model angles from the exact periodic itinerary, not its float rounding
        digits = np.array([np.tile(c.itinerary(k), 240 // n + 1) for k in range(n)])
        model = conjugacy_points(f, digits=digits, tail=np.zeros(n))
        assert max(abs(wrap(a - b)) for a, b in zip(lc.angles, model)) < 1e-8
