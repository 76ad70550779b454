import numpy as np
import pytest

from blaschke_lab.beltrami import (
    SolverConfig,
    cutoff,
    solve_beltrami,
    solve_beltrami_map,
    solve_sphere_beltrami,
)
from blaschke_lab.errors import ExcessDilatation, ValidationError
from blaschke_lab.grid import BeltramiField, Grid, GridMap, load, save_field, save_map
from blaschke_lab.interface import cut_pieces
from blaschke_lab.welding import SphereBeltrami


def const(k):
    return lambda z: np.full(np.shape(z), k, dtype=complex)


def test_zero_is_identity():
    g = Grid(64, 4.0)
    gm = solve_beltrami(BeltramiField(g, np.zeros((64, 64), complex)))
    assert np.abs(gm.samples - g.nodes()).max() < 1e-13
    assert gm.meta["report"]["terms"] <= 1


@pytest.mark.parametrize("k", [0.2, 0.5])
def test_constant_disk_closed_form(k):
    g = Grid(128, 4.0)
    sm = solve_beltrami_map(BeltramiField.piecewise(g, const(k)), SolverConfig(N=128))
    z = 0.9 * np.exp(2j * np.pi * np.arange(40) / 40) * np.linspace(0.1, 1, 40)
    inside = (z + k * np.conj(z)) / (1 + k)
    assert np.abs(sm(z) - inside).max() < 2e-2
    w = np.array([1.3, -1.6j, 1.2 + 1.2j])
    outside = (w + k / w) / (1 + k)
    assert np.abs(sm(w) - outside).max() < 2e-2


def test_constant_disk_converges():
    k = 0.3
    errs = []
    for N in (64, 128):
        g = Grid(N, 4.0)
        sm = solve_beltrami_map(BeltramiField.piecewise(g, const(k)), SolverConfig(N=N))
        z = g.nodes()
        m = np.abs(z) <= 0.9
        errs.append(np.abs(sm(z[m]) - (z[m] + k * np.conj(z[m])) / (1 + k)).max())
    assert errs[1] < 0.6 * errs[0]


def test_normalization_exact():
    g = Grid(64, 4.0)
    z = g.nodes()
    mu = 0.3 * np.exp(-4 * np.abs(z - 0.2) ** 2) * (np.abs(z) < 1.8)
    sm = solve_beltrami_map(BeltramiField(g, mu.astype(complex)))
    assert abs(sm(0j)) < 1e-10 and abs(sm(1 + 0j) - 1) < 1e-10
    rep = sm.report
    assert rep.residual < max(1e-6, 10 * g.h**2 * rep.k) or rep.residual <= rep.residual_bound


def test_rejects_large_k():
    g = Grid(32, 4.0)
    with pytest.raises((ExcessDilatation, ValidationError)):
        solve_beltrami(BeltramiField(g, np.full((32, 32), 0.97, complex)))


def test_sphere_trivial_outer_matches_plane():
    g = Grid(64, 4.0)
    z = g.nodes()
    inner = np.where(np.abs(z) <= 1, 0.25 * z, 0).astype(complex)
    sb = SphereBeltrami(g, inner, np.zeros_like(inner))
    sm = solve_sphere_beltrami(sb)
    # the same field with its jump at |z| = 1 resolved by cut cells
    plane = solve_beltrami_map(BeltramiField.piecewise(g, sb.inner_at))
    w = np.array([0.3, -0.5 + 0.2j, 1.7j, 2.5])
    assert np.abs(sm(w) - plane(w)).max() < 1e-8


def test_sphere_zero_identity():
    g = Grid(64, 4.0)
    zero = np.zeros((64, 64), complex)
    sm = solve_sphere_beltrami(SphereBeltrami(g, zero, zero))
    w = np.array([0.3, -0.5 + 0.2j, 1.7j, 30.0])
    assert np.abs(sm(w) - w).max() < 1e-12


def test_sphere_symmetric_pair():
    # equal inner and outer charts: Psi commutes with z -> 1/conj z
    g = Grid(128, 4.0)
    z = g.nodes()
    mu = np.where(np.abs(z) <= 1, 0.2 * z**2, 0).astype(complex)
    fn = lambda w: 0.2 * np.asarray(w) ** 2
    sb = SphereBeltrami(g, mu, mu.copy(), fn, fn)
    sm = solve_sphere_beltrami(sb)
    w = 0.6 * np.exp(2j * np.pi * (np.arange(8) + 0.3) / 8)
    assert np.abs(sm(1 / np.conj(w)) - 1 / np.conj(sm(w))).max() < 2e-2


def test_cutoff_profile():
    r = np.array([0.0, 1.25, 1.5, 1.75, 3.0])
    c = cutoff(r)
    assert c[0] == 1 and c[1] == 1 and c[3] == 0 and c[4] == 0
    assert 0 < c[2] < 1


@pytest.mark.parametrize("h", [0.1, 0.0625, 0.03])
def test_cut_pieces_areas(h):
    # shoelace/arc areas of the two parts of each cut cell sum to h^2
    xs = np.arange(-1.2, 1.2 + 1e-12, h)
    c = (xs[None, :] + 1j * xs[:, None]).ravel()
    near = np.abs(np.abs(c) - 1) < h
    centres = c[near]
    P = cut_pieces(centres, h)
    area = np.zeros((centres.size, 2))
    for a, b, arc, s, k, side in zip(P.a, P.b, P.arc, P.sign, P.cell, P.side):
        if arc:
            t0, t1 = np.angle(a), np.angle(b)
            dt = (t1 - t0) % (2 * np.pi)
            seg = 0.5 * dt
        else:
            seg = 0.5 * (a.real * b.imag - a.imag * b.real)
        area[k, side] += s * seg
    assert np.abs(area.sum(axis=1) - h * h).max() < 1e-14
    assert area.min() >= -1e-15


def test_grid_file_roundtrip(tmp_path):
    g = Grid(16, 2.0)
    z = g.nodes()
    b = BeltramiField(g, 0.1 * z / 2)
    save_field(tmp_path / "mu.bin", b)
    back = load(tmp_path / "mu.bin")
    assert isinstance(back, BeltramiField) and np.array_equal(back.mu, b.mu)
    m = GridMap(g, z**2)
    save_map(tmp_path / "map.bin", m)
    back = load(tmp_path / "map.bin")
    assert np.array_equal(back.samples, m.samples) and back.normalization == "0,1,inf"
    (tmp_path / "bad.bin").write_bytes(b'{"N": 16, "L": 2.0, "kind": "map"}\n' + b"\0" * 8)
    with pytest.raises(ValidationError):
        load(tmp_path / "bad.bin")
