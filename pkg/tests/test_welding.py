import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blaschke_lab.circle import Cycle, locate_cycle, wrap
from blaschke_lab.errors import DegreeMismatch, NumericalError, ValidationError
from blaschke_lab.grid import BeltramiField, Grid, GridMap
from blaschke_lab.moduli import make_standard
from blaschke_lab.welding import (
    EXTENSIONS,
    CircleHomeo,
    _conjugacy_values,
    beltrami_of,
    beurling_ahlfors,
    circle_conjugacy,
    conjugacy_residual,
    douady_earle,
    extend_qc,
    extension_inverse,
    mated_beltrami,
)

from .strategies import blaschke


def zd(d):
    return make_standard(d, [0j] * (d - 1))


F2 = make_standard(2, [0.5])


def test_circle_homeo_validation():
    with pytest.raises(ValidationError):
        CircleHomeo(2, np.arange(500) / 500)
    v = np.arange(512) / 512
    v[3] = v[2]
    with pytest.raises(NumericalError):
        CircleHomeo(2, v)


def test_conjugacy_identity():
    f = make_standard(3, [0.2 - 0.3j, 0.4])
    h = circle_conjugacy(f, f, M=512)
    assert np.abs(wrap(h.values - h.x)).max() < 1e-10


def test_conjugacy_degree_mismatch():
    with pytest.raises(DegreeMismatch):
        circle_conjugacy(F2, zd(3), M=512)


def test_conjugacy_period_two():
    lc = locate_cycle(F2, Cycle(2, 2, 1))
    # 1/3 is not a grid angle; evaluate the same itinerary pullback there
    y = _conjugacy_values(F2, zd(2), np.array([1 / 3]), 60)[0]
    assert min(abs(wrap(y - t)) for t in lc.angles) < 1e-10


@settings(max_examples=10)
@given(blaschke(degrees=(2, 3)))
def test_conjugacy_equation_holds(f):
    h = circle_conjugacy(f, zd(f.d), M=512)
    assert conjugacy_residual(f, zd(f.d), h) < 1e-9
    assert h.values[0] == 0.0


def test_de_identity():
    h = CircleHomeo.identity(2, 512)
    w = np.array([0, 0.3 + 0.2j, -0.7j, 0.95])
    assert np.abs(douady_earle(h, w) - w).max() < 1e-8
    m = extend_qc(h, "de", Grid(32, 1.5))
    z = m.grid.nodes()
    ok = np.isfinite(m.samples)
    assert np.abs(m.samples[ok] - z[ok]).max() < 1e-8


@pytest.mark.parametrize("alpha", [0.125, 0.3])
def test_de_rotation_naturality(alpha):
    h = CircleHomeo(2, (np.arange(512) / 512 + alpha))
    w = np.array([0.1, 0.5j, -0.4 - 0.4j])
    assert np.abs(douady_earle(h, w) - np.exp(2j * np.pi * alpha) * w).max() < 1e-8


def test_de_conformal_naturality_of_conjugacy():
    h = circle_conjugacy(F2, zd(2), M=1024)
    hr = h.rotated(0.25, 0)
    w = np.array([0.2 + 0.1j, -0.5, 0.6j])
    assert np.abs(douady_earle(hr, w) - 1j * douady_earle(h, w)).max() < 1e-10


def test_extension_boundary_values():
    h = circle_conjugacy(F2, zd(2), M=1024)
    t = np.linspace(0, 1, 37)
    target = np.exp(2j * np.pi * h.lift(t))
    for fn in (douady_earle, beurling_ahlfors):
        assert np.abs(fn(h, np.exp(2j * np.pi * t)) - target).max() < 2 / h.M
        # continuity up to the circle
        near = np.abs(fn(h, 0.999 * np.exp(2j * np.pi * t)) - target).max()
        assert near < 0.05


def test_extension_k_below_one():
    h = circle_conjugacy(F2, zd(2), M=1024)
    for method in ("de", "ba"):
        b = beltrami_of(extend_qc(h, method, Grid(64, 1.5)))
        assert 0 < b.k < 1


def test_extension_inverse_roundtrip():
    h = circle_conjugacy(make_standard(3, [0.3j, -0.4]), zd(3), M=1024)
    x = np.array([0, 0.2, -0.3 + 0.1j, 0.5j, 0.7])
    for method in ("de", "ba"):
        z = extension_inverse(h, method, x)
        assert np.abs(EXTENSIONS[method](h, z) - x).max() < 1e-10


def test_beltrami_identity():
    g = Grid(32, 2.0)
    b = beltrami_of(GridMap(g, g.nodes()))
    assert b.k == 0 and b.degenerate == 0


def test_beltrami_linear():
    g = Grid(32, 2.0)
    z = g.nodes()
    b = beltrami_of(GridMap(g, z + 0.3 * np.conj(z)))
    assert np.abs(b.mu - 0.3).max() < 1e-12


def test_beltrami_degenerate_counted():
    g = Grid(16, 1.0)
    b = beltrami_of(GridMap(g, np.zeros(g.nodes().shape, dtype=complex)))
    assert b.degenerate == 16 * 16 and b.k == 0


def _const_field(g, c):
    return BeltramiField(g, np.full(g.nodes().shape, c, dtype=complex))


def test_mated_symmetry():
    g = Grid(64, 2.0)
    sb = mated_beltrami(_const_field(g, 0.2), _const_field(g, 0.1j))
    z = g.nodes()
    assert np.allclose(sb.inner[np.abs(z) <= 1], 0.2)
    assert not np.any(sb.inner[np.abs(z) > 1])
    w = np.array([1.5, 1.2j, -1.3 - 0.4j])
    expect = np.conj(0.1j) * w**2 / np.conj(w) ** 2
    assert np.abs(sb.outer_at(w) - expect).max() < 1e-12
    assert abs(sb.k - 0.2) < 1e-15


@given(st.floats(0.3, 0.9), st.floats(0, 1))
def test_mated_swap_is_reflection(r, t):
    # mu_{g*f}(z) is the reflected pullback of mu_{f*g}(1/conj z)
    g = Grid(64, 2.0)
    z = g.nodes()
    f1 = BeltramiField(g, 0.3 * z * np.abs(z) ** 2 / 4)
    f2 = BeltramiField(g, 0.2j * np.conj(z) / 2)
    a, b = mated_beltrami(f1, f2), mated_beltrami(f2, f1)
    w = r * np.exp(2j * np.pi * t) * (1 - 0.1 * g.h)
    wr = 1 / np.conj(w)
    lhs = a.inner_at(w)
    rhs = np.conj(b.outer_at(wr)) * wr**2 / np.conj(wr) ** 2
    assert abs(lhs - rhs) < 1e-12
