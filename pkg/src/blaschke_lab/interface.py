"""Cut-cell treatment of a coefficient that jumps across the unit circle.

Cells crossed by the circle carry two density values, one on the part inside
the circle and one on the part outside.  Integrals over those parts are done
exactly: by Green's formula every area integral of the Cauchy or Beurling
kernel (and every moment) becomes a sum of closed-form line integrals over
straight edges and arcs of the unit circle, where conj(zeta) = 1/zeta.

The FFT convolution sees the cell mass plus the excess moments of each cut
cell (a multipole correction for the shape of the parts).  Close to the
circle the Beurling transform is corrected by the exact integrals over a
small window, and the far field is carried from the node to the collocation
point by a Taylor expansion.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Callable

import numpy as np
from scipy import sparse

# highest excess moment kept in the multipole corrections
ORDER = 3
# Taylor order of the far field at collocation points
TAYLOR = 3
# terms of the local expansion of 1/zeta on arcs
_ARC_TERMS = 16


@dataclass
class CircleInterface:
    """Side values of mu near |z| = 1: ``mu_in`` for |z| < 1, ``mu_out`` for
    |z| > 1, both callables on complex arrays."""

    mu_in: Callable
    mu_out: Callable
    reach: float = 3.5
    window: int = 4

    def __post_init__(self):
        if self.window < 2 or self.reach < 2.5:
            raise ValueError("window must be >= 2 cells and reach >= 2.5 cells")


def _rect(kind: str, v, half):
    from .beltrami import beurling_rect, cauchy_rect

    v = np.asarray(v, dtype=complex)
    x1, x2 = v.real - half, v.real + half
    y1, y2 = v.imag - half, v.imag + half
    if kind == "C":
        return cauchy_rect(x1, x2, y1, y2)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = beurling_rect(x1, x2, y1, y2)
    return np.where(np.abs(v) < 1e-12 * half, 0, K)


def _square_moment(c, half, n):
    """int over the square centred at c of zeta^n dA (exact)."""
    F = lambda z: z ** (n + 2) / (1j * (n + 1) * (n + 2))
    x1, x2 = c.real - half, c.real + half
    y1, y2 = c.imag - half, c.imag + half
    return F(x2 + 1j * y2) - F(x1 + 1j * y2) - F(x2 + 1j * y1) + F(x1 + 1j * y1)


def multipole_kernel(kind: str, j: int, n: int, h: float, exclude: int):
    """Kernel over offsets for the n-th excess moment, j-th target derivative.

    C: (1/pi) v^-(n+1);  S: d^j/dv^j of -(n+1)/(pi v^(n+2)).  Zero on offsets
    with Chebyshev distance <= exclude."""

    def K(oy, ox):
        v = h * (ox[None, :] + 1j * oy[:, None])
        cheb = np.maximum(np.abs(oy)[:, None], np.abs(ox)[None, :])
        v = np.where(cheb <= exclude, 1.0, v)
        if kind == "C":
            out = 1 / (np.pi * v ** (n + 1))
        else:
            coef = -(n + 1) / np.pi * (-1) ** j * prod(range(n + 2, n + 2 + j))
            out = coef / v ** (n + 2 + j)
        return np.where(cheb <= exclude, 0, out)

    return K


def _multipole_term(kind: str, v, n: int):
    if kind == "C":
        return 1 / (np.pi * v ** (n + 1))
    return -(n + 1) / (np.pi * v ** (n + 2))


# -- exact integrals over cut parts ------------------------------------------

class Pieces:
    """Oriented boundary pieces of the cut parts.  A piece is a segment a->b
    or a counter-clockwise arc of the unit circle a->b taken with sign +1 or
    -1; cell[p], side[p] say which part it bounds."""

    def __init__(self, a, b, arc, sign, cell, side):
        self.a, self.b = np.asarray(a, complex), np.asarray(b, complex)
        self.arc = np.asarray(arc, bool)
        self.sign = np.asarray(sign, float)
        self.cell, self.side = np.asarray(cell, np.int64), np.asarray(side, np.int64)
        order = np.lexsort((self.side, self.cell))
        for name in ("a", "b", "arc", "sign", "cell", "side"):
            setattr(self, name, getattr(self, name)[order])

    def expand(self, k):
        """(pair, piece) for every piece of cell k[pair]."""
        ncell = int(self.cell.max(initial=-1)) + 1
        counts = np.bincount(self.cell, minlength=ncell)
        ptr = np.concatenate([[0], np.cumsum(counts)])
        c = counts[k]
        pair = np.repeat(np.arange(k.size), c)
        within = np.arange(pair.size) - np.repeat(np.cumsum(c) - c, c)
        return pair, ptr[k][pair] + within


def _circle_roots(p, q):
    """Parameters t in (0, 1) with |p + t (q - p)| = 1."""
    d = q - p
    A = abs(d) ** 2
    B = 2 * (p.real * d.real + p.imag * d.imag)
    C = abs(p) ** 2 - 1
    disc = B * B - 4 * A * C
    if disc <= 0:
        return []
    r = np.sqrt(disc)
    ts = sorted(((-B - r) / (2 * A), (-B + r) / (2 * A)))
    return [t for t in ts if 1e-14 < t < 1 - 1e-14]


def cut_pieces(centres, h):
    """Boundary pieces of cell cap disk (side 0) and cell minus disk (side 1)."""
    a, b, arc, sign, cell, side = [], [], [], [], [], []
    for k, c in enumerate(centres):
        hh = h / 2
        corners = [c + complex(-hh, -hh), c + complex(hh, -hh), c + complex(hh, hh), c + complex(-hh, hh)]
        crossings = []  # (point, entering)
        for e in range(4):
            p, q = corners[e], corners[(e + 1) % 4]
            ts = [0.0] + _circle_roots(p, q) + [1.0]
            for t0, t1 in zip(ts[:-1], ts[1:]):
                u, v = p + t0 * (q - p), p + t1 * (q - p)
                ins = abs((u + v) / 2) < 1
                a.append(u)
                b.append(v)
                arc.append(False)
                sign.append(1.0)
                cell.append(k)
                side.append(0 if ins else 1)
                if t1 < 1.0:
                    crossings.append((v, not ins))
        # arcs run from each exit to the next entry along the circle
        n = len(crossings)
        start = [i for i in range(n) if not crossings[i][1]]
        for i in start:
            j = (i + 1) % n
            while not crossings[j][1]:
                j = (j + 1) % n
            u, v = crossings[i][0], crossings[j][0]
            u, v = u / abs(u), v / abs(v)
            a += [u, u]
            b += [v, v]
            arc += [True, True]
            sign += [1.0, -1.0]
            cell += [k, k]
            side += [0, 1]
    return Pieces(a, b, arc, sign, cell, side)


def _log_ratio(z, a, b, arc):
    """Continuous log((zeta - z)) from a to b along the piece."""
    L = np.log((b - z) / (a - z))
    # inside the lens between an arc and its chord the argument winds once more
    cross = (b - a).real * (z - a).imag - (b - a).imag * (z - a).real
    lens = arc & (np.abs(z) < 1) & (cross < 0)
    return L + 2j * np.pi * lens


def line_kernel(m: int, z, a, b, arc, sign):
    """int over the piece of (conj(zeta) - conj(z)) / (zeta - z)^m d zeta."""
    z = np.asarray(z, complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        Lz = _log_ratio(z, a, b, arc)
        inv = 1 / (a - z) - 1 / (b - z)
        # segment: conj(zeta) - conj(z) = conj(e)^2 (zeta - z) + beta
        e = (b - a) / np.abs(b - a)
        e2 = np.conj(e) ** 2
        beta = np.conj(a - z) - e2 * (a - z)
        if m == 1:
            seg = e2 * (b - a) + beta * Lz
        else:
            seg = e2 * Lz + beta * inv
        # arc: conj(zeta) = 1 / zeta
        L0 = 1j * np.angle(b / a)
        g = 1 / z - np.conj(z)
        if m == 1:
            arcv = g * Lz - L0 / z
        else:
            arcv = (L0 - Lz) / z**2 + g * inv
    return sign * np.where(arc, arcv, seg)


def line_moment(n: int, c, a, b, arc, sign):
    """int over the piece of (conj(zeta) - conj(c)) (zeta - c)^n d zeta."""
    wa, wb = a - c, b - c
    with np.errstate(divide="ignore", invalid="ignore"):
        e = (b - a) / np.abs(b - a)
        e2 = np.conj(e) ** 2
        beta = np.conj(wa) - e2 * wa
        seg = e2 * (wb ** (n + 2) - wa ** (n + 2)) / (n + 2) + beta * (wb ** (n + 1) - wa ** (n + 1)) / (n + 1)
    # arc: 1/zeta - conj(c) expanded in w = zeta - c around the centre
    arcv = (1 / c - np.conj(c)) * (wb ** (n + 1) - wa ** (n + 1)) / (n + 1)
    for j in range(1, _ARC_TERMS):
        arcv = arcv + (-1) ** j / c ** (j + 1) * (wb ** (n + j + 1) - wa ** (n + j + 1)) / (n + j + 1)
    return sign * np.where(arc, arcv, seg)


def line_power(k: int, a, b, arc, sign):
    """int over the piece of conj(zeta) zeta^k d zeta (the origin moment)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        e = (b - a) / np.abs(b - a)
        e2 = np.conj(e) ** 2
        beta = np.conj(a) - e2 * a
        seg = e2 * (b ** (k + 2) - a ** (k + 2)) / (k + 2) + beta * (b ** (k + 1) - a ** (k + 1)) / (k + 1)
    arcv = 1j * np.angle(b / a) if k == 0 else (b**k - a**k) / k
    return sign * np.where(arc, arcv, seg)


# -- the band of cut cells ---------------------------------------------------

class Band:
    """Geometry and correction operators of the cut cells of a block."""

    def __init__(self, grid, origin, shape, iface: CircleInterface):
        h = grid.h
        self.h, self.iface = h, iface
        r0, c0 = origin
        ny, nx = shape
        self.shape = shape
        ax = grid.axis
        ctr = ax[c0 : c0 + nx][None, :] + 1j * ax[r0 : r0 + ny][:, None]
        self.ctr = ctr
        ci, cj = np.nonzero(np.abs(np.abs(ctr) - 1) < h)
        P = cut_pieces(ctr[ci, cj], h)
        # area of each part
        area = np.zeros((ci.size, 2))
        vals = line_moment(0, ctr[ci, cj][P.cell], P.a, P.b, P.arc, P.sign) / 2j
        np.add.at(area, (P.cell, P.side), vals.real)
        frac = area / h**2
        cut = (frac[:, 0] > 1e-10) & (frac[:, 1] > 1e-10)
        keep = np.flatnonzero(cut)
        remap = -np.ones(ci.size, np.int64)
        remap[keep] = np.arange(keep.size)
        sel = cut[P.cell]
        self.pieces = Pieces(P.a[sel], P.b[sel], P.arc[sel], P.sign[sel], remap[P.cell[sel]], P.side[sel])
        self.ci, self.cj = ci[keep], cj[keep]
        self.cc = ctr[self.ci, self.cj]
        self.ncut = keep.size
        self.area = area[keep]
        self.frac = frac[keep]
        self.index = -np.ones(shape, dtype=np.int64)
        self.index[self.ci, self.cj] = np.arange(self.ncut)
        self.is_cut = self.index >= 0
        # excess moments E[c, side, n] of w = zeta - centre
        E = self.part_moments(np.arange(ORDER + 1))
        # the square's own moments of w vanish for 1 <= n <= 3
        cm = np.zeros(ORDER + 1)
        cm[0] = h**2
        self.E = E - self.frac[:, :, None] * cm[None, None, :]
        # collocation points: the centroids of the parts
        self.x = self.cc[:, None] + E[:, :, 1] / self.area
        self.mu_side = np.stack([iface.mu_in(self.x[:, 0]), iface.mu_out(self.x[:, 1])], axis=1)
        self._build_targets(iface)
        self._build_operator()

    def part_moments(self, ns):
        """int over each part of (zeta - centre)^n dA, shape (ncut, 2, len(ns))."""
        P = self.pieces
        out = np.zeros((self.ncut, 2, len(ns)), dtype=complex)
        c = self.cc[P.cell]
        for i, n in enumerate(ns):
            v = line_moment(int(n), c, P.a, P.b, P.arc, P.sign) / 2j
            np.add.at(out[:, :, i], (P.cell, P.side), v)
        return out

    def part_integrals(self, kind: str, z, k):
        """Exact C or S of the indicator of both parts of cell k[i] at z[i]."""
        P = self.pieces
        pair, piece = P.expand(k)
        m = 1 if kind == "C" else 2
        v = line_kernel(m, z[pair], P.a[piece], P.b[piece], P.arc[piece], P.sign[piece])
        out = np.zeros((k.size, 2), dtype=complex)
        np.add.at(out, (pair, P.side[piece]), v)
        return -out / (2j * np.pi)

    # -- kernels for the FFT part ------------------------------------------
    def solver_kernels(self):
        """kernels[j][src]: sources are (mass, E_1 .. E_ORDER), outputs are
        S and its first TAYLOR derivatives (the latter outside the window)."""
        from .beltrami import _offsets_kernel

        h, W = self.h, self.iface.window
        rows = [[lambda oy, ox: _offsets_kernel("S", h, oy, ox)]
                + [multipole_kernel("S", 0, n, h, 1) for n in range(1, ORDER + 1)]]
        for j in range(1, TAYLOR + 1):
            # the mass source is a density; its moment is h^2 times it
            K0 = multipole_kernel("S", j, 0, h, W)
            rows.append([lambda oy, ox, K0=K0: h**2 * K0(oy, ox)]
                        + [multipole_kernel("S", j, n, h, W) for n in range(1, ORDER + 1)])
        return rows

    def moment_arrays(self, phi_b):
        pb = phi_b.reshape(-1, 2)
        out = []
        for n in range(1, ORDER + 1):
            a = np.zeros(self.shape, dtype=complex)
            a[self.ci, self.cj] = (pb * self.E[:, :, n]).sum(axis=1)
            out.append(a)
        return out

    # -- targets ----------------------------------------------------------
    def _build_targets(self, iface):
        h = self.h
        dist = np.abs(np.abs(self.ctr) - 1)
        full_t = (dist < iface.reach * h) & ~self.is_cut
        fi, fj = np.nonzero(full_t)
        # rows: full targets first, then cut cells (inner, outer)
        self.t_cell = np.concatenate([np.stack([fi, fj], 1), np.repeat(np.stack([self.ci, self.cj], 1), 2, axis=0)])
        self.t_x = np.concatenate([self.ctr[fi, fj], self.x.ravel()])
        self.n_full_t = fi.size
        ny, nx = self.shape
        self.t_flat = self.t_cell[:, 0] * nx + self.t_cell[:, 1]
        self.t_delta = self.t_x - self.ctr[self.t_cell[:, 0], self.t_cell[:, 1]]

    def _pairs(self, cells, W):
        """(row, source i, source j, cheb) for every source within W of cells."""
        ny, nx = self.shape
        d = np.arange(-W, W + 1)
        di, dj = np.meshgrid(d, d, indexing="ij")
        di, dj = di.ravel(), dj.ravel()
        rows = np.repeat(np.arange(len(cells)), di.size)
        si = np.repeat(cells[:, 0], di.size) + np.tile(di, len(cells))
        sj = np.repeat(cells[:, 1], di.size) + np.tile(dj, len(cells))
        cheb = np.tile(np.maximum(np.abs(di), np.abs(dj)), len(cells))
        ok = (si >= 0) & (si < ny) & (sj >= 0) & (sj < nx)
        return rows[ok], si[ok], sj[ok], cheb[ok]

    def _cut_terms(self, kind, x, node, k, cheb, grid_exclude):
        """Exact minus grid contribution of cut sources k at points x, per side.

        The grid part is the mass on the square at the node plus the
        multipole terms the FFT adds (Chebyshev distance > grid_exclude)."""
        src = self.cc[k]
        base = _rect(kind, node - src, self.h / 2)
        exact = self.part_integrals(kind, x, k)
        far = cheb > grid_exclude
        v = np.where(far, node - src, 1.0)
        out = []
        for side in (0, 1):
            val = exact[:, side] - self.frac[k, side] * base
            for n in range(1, ORDER + 1):
                val = val - np.where(far, _multipole_term(kind, v, n) * self.E[k, side, n], 0)
            out.append(val)
        return out

    def _build_operator(self):
        h = self.h
        W = self.iface.window
        rows, si, sj, cheb = self._pairs(self.t_cell, W)
        ny, nx = self.shape
        x = self.t_x[rows]
        node = self.ctr[self.t_cell[rows, 0], self.t_cell[rows, 1]]
        src = self.ctr[si, sj]
        cut_src = self.is_cut[si, sj]
        # full sources only matter where the collocation point is off the node
        fs = ~cut_src & (np.abs(x - node) > 0)
        vals_g = _rect("S", x[fs] - src[fs], h / 2) - _rect("S", node[fs] - src[fs], h / 2)
        self.Cg = sparse.csr_matrix((vals_g, (rows[fs], si[fs] * nx + sj[fs])), shape=(len(self.t_x), ny * nx))
        k = self.index[si[cut_src], sj[cut_src]]
        v_in, v_out = self._cut_terms("S", x[cut_src], node[cut_src], k, cheb[cut_src], 1)
        r = rows[cut_src]
        self.Cb = sparse.csr_matrix(
            (np.concatenate([v_in, v_out]), (np.concatenate([r, r]), np.concatenate([2 * k, 2 * k + 1]))),
            shape=(len(self.t_x), 2 * self.ncut),
        )

    # -- iteration pieces --------------------------------------------------
    def mass(self, phi_g: np.ndarray, phi_b: np.ndarray) -> np.ndarray:
        """Cell masses seen by the FFT convolution."""
        m = np.where(self.is_cut, 0, phi_g)
        pb = phi_b.reshape(-1, 2)
        m[self.ci, self.cj] = (self.frac * pb).sum(axis=1)
        return m

    def corrected(self, fields, phi_g: np.ndarray, phi_b: np.ndarray) -> np.ndarray:
        """S at the targets: grid value, local correction, far-field Taylor terms."""
        g = np.where(self.is_cut, 0, phi_g).ravel()
        out = fields[0].ravel()[self.t_flat] + self.Cg @ g + self.Cb @ phi_b
        d = self.t_delta
        pw = np.ones_like(d)
        for j in range(1, len(fields)):
            pw = pw * d / j
            out = out + fields[j].ravel()[self.t_flat] * pw
        return out

    # -- evaluation ----------------------------------------------------------
    def cauchy_correction(self, z: np.ndarray, phi_b: np.ndarray) -> np.ndarray:
        """Exact-minus-mass Cauchy transform of the cut cells at points z."""
        h = self.h
        out = np.zeros(z.shape, dtype=complex)
        if self.ncut == 0 or z.size == 0:
            return out
        pb = phi_b.reshape(-1, 2)
        M = np.einsum("cs,csn->cn", pb, self.E)
        lim = (self.iface.window + 0.5) * h
        step = max(1, 2_000_000 // self.ncut)
        for a in range(0, z.size, step):
            zz = z[a : a + step]
            v = zz[:, None] - self.cc[None, :]
            near = (np.abs(v.real) <= lim) & (np.abs(v.imag) <= lim)
            vf = np.where(near, 1.0, v)
            acc = np.zeros(v.shape, dtype=complex)
            for n in range(1, ORDER + 1):
                acc += M[None, :, n] * _multipole_term("C", vf, n)
            acc[near] = 0
            res = acc.sum(axis=1)
            p, k = np.nonzero(near)
            if p.size:
                # the mass part here is what the corner sums already hold
                vin, vout = self._cut_terms("C", zz[p], zz[p], k, np.zeros(p.size, int), 0)
                np.add.at(res, p, vin * pb[k, 0] + vout * pb[k, 1])
            out[a : a + step] = res
        return out

    def grid_near(self, kind: str, phi_b: np.ndarray):
        """Corrections at block nodes next to cut cells, on top of the FFT
        field with multipoles beyond Chebyshev distance 1."""
        cells = np.stack(np.nonzero(self._near_mask()), 1)
        rows, si, sj, cheb = self._pairs(cells, 1)
        cut_src = self.is_cut[si, sj]
        rows, si, sj, cheb = rows[cut_src], si[cut_src], sj[cut_src], cheb[cut_src]
        node = self.ctr[cells[rows, 0], cells[rows, 1]]
        k = self.index[si, sj]
        if kind == "S":
            # S jumps across the circle; at nodes of cut cells keep the grid value
            keep = ~self.is_cut[cells[rows, 0], cells[rows, 1]]
            rows, k, node, cheb = rows[keep], k[keep], node[keep], cheb[keep]
        pb = phi_b.reshape(-1, 2)
        vin, vout = self._cut_terms(kind, node, node, k, cheb, 1)
        vals = np.zeros(len(cells), dtype=complex)
        np.add.at(vals, rows, vin * pb[k, 0] + vout * pb[k, 1])
        return cells, vals

    def _near_mask(self):
        m = np.zeros(self.shape, bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                i, j = self.ci + di, self.cj + dj
                ok = (i >= 0) & (i < self.shape[0]) & (j >= 0) & (j < self.shape[1])
                m[i[ok], j[ok]] = True
        return m

    def laurent_correction(self, phi_b: np.ndarray, terms: int) -> np.ndarray:
        """(1/pi) int (phi - mass) zeta^k dA over the cut cells, k < terms."""
        pb = phi_b.reshape(-1, 2)
        P = self.pieces
        out = np.zeros(terms, dtype=complex)
        mass = (self.frac * pb).sum(axis=1)
        for k in range(terms):
            part = np.zeros((self.ncut, 2), dtype=complex)
            np.add.at(part, (P.cell, P.side), line_power(k, P.a, P.b, P.arc, P.sign) / 2j)
            cell = _square_moment(self.cc, self.h / 2, k)
            out[k] = ((part * pb).sum(axis=1) - cell * mass).sum() / np.pi
        return out
