import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blaschke_lab.circle import Cycle
from blaschke_lab.errors import PathExit, ValidationError
from blaschke_lab.moduli import lambda1_d3, make_standard
from blaschke_lab.spectra import (
    AttractingPolar,
    Case,
    PathSpec,
    attracting_polar,
    classify_case,
    degeneracy_witness,
    dot_r_residual,
    index_residual,
    index_terms,
    multiplier_derivative,
)

from .strategies import blaschke


@pytest.mark.parametrize("d", [2, 3, 4])
def test_index_monomial(d):
    lhs, rhs = index_terms(make_standard(d, [0j] * (d - 1)), 1)
    assert abs(lhs - 1) < 1e-12 and abs(rhs - 1) < 1e-15


def test_index_degree_two():
    lhs, rhs = index_terms(make_standard(2, [0.5]), 1)
    assert abs(lhs - 1 / 3) < 1e-12
    assert abs(rhs - 1 / 3) < 1e-12


def test_index_d3_period_two():
    assert abs(index_residual(make_standard(3, [0j, 0.3]), 2)) < 1e-9


@settings(max_examples=25)
@given(blaschke(), st.integers(1, 4))
def test_index_identity(f, n):
    if f.d**n > 400:
        n = 2
    assert abs(index_residual(f, n)) < 1e-9


def test_derivative_real_path():
    path = PathSpec(2, ((0.5, 1.0),))
    der = multiplier_derivative(path, Cycle(2, 1, 0), 0.0)
    assert abs(der.value - 8.0) < 1e-6
    assert der.error < 1e-6
    assert degeneracy_witness(path, 0.0, 4) >= 8 - 1e-6


def test_derivative_rotation_matches_fd():
    # a(t) = 0.5 e^{it} as a Taylor polynomial, accurate far beyond the step
    coeffs = tuple(0.5 * (1j) ** k / math.factorial(k) for k in range(20))
    path = PathSpec(2, (coeffs,))
    c = Cycle(2, 1, 0)
    d1 = multiplier_derivative(path, c, 0.0, 1e-3).value
    d2 = multiplier_derivative(path, c, 0.0, 5e-4).value
    assert abs(d1 - d2) < 1e-7


def test_constant_path():
    path = PathSpec.constant(3, [0.2 + 0.1j, -0.3j])
    for c in (Cycle(3, 1, 1), Cycle(3, 2, 1)):
        assert abs(multiplier_derivative(path, c, 0.0).value) < 1e-9
    assert degeneracy_witness(path, 0.0, 6) < 1e-8


def test_d3_radial_witness():
    a0, u = 0.3, 1.0
    path = PathSpec(3, ((0j,), (-a0, -u)))  # zeros {0, -a(t)} with a(t) = a0 + t
    h = 1e-4
    slope = (lambda1_d3(a0 + h).closed_form - lambda1_d3(a0 - h).closed_form) / (2 * h)
    assert degeneracy_witness(path, 0.0, 4) >= abs(slope) - 1e-6


def test_path_exit():
    path = PathSpec(2, ((0.9, 0.2),))
    with pytest.raises(PathExit):
        path.zeros_at(0.9)
    with pytest.raises(PathExit):
        path.zeros_at(1.5)


def test_path_validation():
    with pytest.raises(ValidationError):
        PathSpec(3, ((0.1,),))


def test_dot_r_examples():
    assert dot_r_residual(AttractingPolar(0.3, 1.0, 0.0, 0.0), 3) == (0.0, False)
    v, conv = dot_r_residual(AttractingPolar(0.5, 0.0, 1.0, 7.0), 1)
    assert abs(v + 0.25) < 1e-15 and not conv
    v, conv = dot_r_residual(AttractingPolar(0.0, None, 1.0, None), 1)
    assert v == -1 and conv


@given(
    st.floats(0.01, 0.99), st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5),
    st.floats(-10, 10), st.integers(1, 12),
)
def test_dot_r_linear(r, th, rd, thd, alpha, n):
    base, _ = dot_r_residual(AttractingPolar(r, th, rd, thd), n)
    scaled, _ = dot_r_residual(AttractingPolar(r, th, alpha * rd, alpha * thd), n)
    assert abs(scaled - alpha * base) < 1e-12 * max(1.0, abs(alpha * base))


def test_classify_examples():
    assert classify_case(AttractingPolar(0.5, math.pi / 3, 0.0, 0.0)) == Case.CASE2
    assert classify_case(AttractingPolar(0.0, None, 0.0, None)) == Case.CASE3
    assert classify_case(AttractingPolar(0.5, math.pi / 4, 0.1, 0.0)) == Case.NOT_DEGENERATE
    assert classify_case(AttractingPolar(0.5, math.pi, 0.0, 2.0)) == Case.CASE1


def test_classify_needs_eight():
    with pytest.raises(ValidationError):
        classify_case(AttractingPolar(0.5, 0.0, 0.0, 0.0), 5)


def test_classify_synthetic_never_inconsistent():
    rng = np.random.default_rng(3)
    seen = set()
    for i in range(10_000):
        kind = i % 3
        r = rng.uniform(0.01, 0.99)
        if kind == 0:
            p = AttractingPolar(r, float(rng.choice([0.0, math.pi])), 0.0, rng.normal())
        elif kind == 1:
            p = AttractingPolar(r, rng.uniform(0, 2 * math.pi), 0.0, 0.0)
        else:
            p = AttractingPolar(0.0, None, 0.0, None)
        case = classify_case(p)
        assert case not in (Case.INCONSISTENT, Case.NOT_DEGENERATE)
        seen.add(case)
    assert seen == {Case.CASE1, Case.CASE2, Case.CASE3}


def test_attracting_polar_rotation():
    # lambda_att = -a(t) for d = 2; a(t) = 0.5 (1 + t) -> r_dot = 0.5, theta = pi
    path = PathSpec(2, ((0.5, 0.5),))
    p = attracting_polar(path, 0.0)
    assert abs(p.r - 0.5) < 1e-15
    assert abs(p.theta - math.pi) < 1e-12
    assert abs(p.r_dot - 0.5) < 1e-9
    assert abs(p.theta_dot) < 1e-9
