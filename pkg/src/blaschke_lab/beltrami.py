"""Grid solver for the Beltrami equation with the 0, 1, infinity normalization.

The density phi = Psi_zbar is piecewise constant on grid cells (cells are
centred at the nodes).  The Cauchy transform C and the Beurling transform S
act through exact cell integrals of 1/(pi xi) and -1/(pi xi^2):

    C phi (z) = (1/pi) int phi(zeta) / (z - zeta) dA,
    S phi (z) = -(1/pi) p.v. int phi(zeta) / (z - zeta)^2 dA,

applied as linear convolutions by FFT with the input zero-padded to twice
its size.  The Neumann series phi = mu (1 + S phi) is iterated, then
Psi = z + C phi is composed with the affine map fixing 0 and 1 (infinity is
already fixed).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import map_coordinates, spline_filter

from .errors import CompositionResidual, ExcessDilatation, NoConvergence, ResidualTooLarge, ValidationError
from .grid import BeltramiField, Grid, GridMap
from .interface import Band

K_CAP = 0.95
LAURENT_TERMS = 40


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("BLASCHKE_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SolverConfig:
    N: int = 512
    L: float = 4.0
    tol: float = 1e-10
    max_terms: int = 200
    k_cap: float = K_CAP

    @property
    def grid(self) -> Grid:
        return Grid(self.N, self.L)


# -- cell integrals --------------------------------------------------------

def _zlogz(z):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = z * np.log(z)
    return np.where(z == 0, 0, out)


def _quadrant(a, b):
    """int_0^a int_0^b dy dx / (x + i y) for a, b >= 0."""
    def G(z):
        return -1j * (_zlogz(z) - z)

    za = a + 0j
    zb = 1j * b
    return G(za + zb) - G(zb) - G(za) + G(0j)


def cauchy_Q(a, b):
    """Oriented integral over [0, a] x [0, b] of 1/(x + i y), any signs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    I = _quadrant(np.abs(a), np.abs(b))
    sa = a < 0
    sb = b < 0
    out = np.where(sa & ~sb, np.conj(I), I)
    out = np.where(~sa & sb, -np.conj(I), out)
    out = np.where(sa & sb, -I, out)
    return out


def cauchy_rect(x1, x2, y1, y2):
    """(1/pi) int over [x1, x2] x [y1, y2] of 1/xi."""
    return (cauchy_Q(x2, y2) - cauchy_Q(x1, y2) - cauchy_Q(x2, y1) + cauchy_Q(x1, y1)) / np.pi


def beurling_rect(x1, x2, y1, y2):
    """(1/pi) int over [x1, x2] x [y1, y2] of -1/xi^2, for rectangles avoiding 0.

    Antiderivative -i log xi; on rectangles left of the imaginary axis the
    branch log(-xi) is used (constants cancel in the corner sum).
    """
    x1, x2, y1, y2 = (np.asarray(v, dtype=float) for v in (x1, x2, y1, y2))
    left = x2 < 0

    def H(x, y):
        z = x + 1j * y
        return -1j * np.where(left, np.log(-z), np.log(z))

    return (H(x2, y2) - H(x1, y2) - H(x2, y1) + H(x1, y1)) / np.pi


def _offsets_kernel(kind: str, h: float, oy: np.ndarray, ox: np.ndarray) -> np.ndarray:
    """Kernel over integer offsets (rows oy, cols ox): target minus source."""
    X = ox[None, :] * h
    Y = oy[:, None] * h
    x1, x2, y1, y2 = X - h / 2, X + h / 2, Y - h / 2, Y + h / 2
    x1, x2 = np.broadcast_to(x1, (oy.size, ox.size)), np.broadcast_to(x2, (oy.size, ox.size))
    y1, y2 = np.broadcast_to(y1, (oy.size, ox.size)), np.broadcast_to(y2, (oy.size, ox.size))
    if kind == "C":
        return cauchy_rect(x1, x2, y1, y2)
    centre = (oy[:, None] == 0) & (ox[None, :] == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = beurling_rect(x1, x2, y1, y2)
    return np.where(centre, 0, K)


class _Bank:
    """out_j[i, j'] = sum_s sum phi_s[i', j''] K_js(offset) by FFT, for several
    sources phi_s and outputs j sharing one padded size.  kernels[j][s] is a
    callable (oy, ox) -> K or None."""

    def __init__(self, kernels, src_shape, tgt_shape, shift=(0, 0)):
        ny, nx = src_shape
        ty, tx = tgt_shape
        sy, sx = shift
        oy = np.arange(sy - (ny - 1), sy + ty)
        ox = np.arange(sx - (nx - 1), sx + tx)
        self.shape = (sfft.next_fast_len(oy.size + ny - 1), sfft.next_fast_len(ox.size + nx - 1))
        self.Kf = [[None if f is None else sfft.fft2(f(oy, ox), self.shape, workers=_workers()) for f in row]
                   for row in kernels]
        self.src = (ny, nx)
        self.tgt = (ty, tx)

    def __call__(self, sources):
        ny, nx = self.src
        ty, tx = self.tgt
        F = [None if a is None else sfft.fft2(a, self.shape, workers=_workers()) for a in sources]
        out = []
        tmp = None
        for row in self.Kf:
            acc = None
            for Kf, Fs in zip(row, F):
                if Kf is None or Fs is None:
                    continue
                if acc is None:
                    acc = Kf * Fs
                    tmp = np.empty_like(acc) if tmp is None else tmp
                else:
                    np.multiply(Kf, Fs, out=tmp)
                    acc += tmp
            full = sfft.ifft2(acc, workers=_workers(), overwrite_x=True)
            out.append(full[ny - 1 : ny - 1 + ty, nx - 1 : nx - 1 + tx])
        return out


class _Convolver(_Bank):
    """out[i, j] = sum phi[i', j'] K(i - i' + sy, j - j' + sx) by FFT."""

    def __init__(self, kind: str, h: float, src_shape, tgt_shape, shift=(0, 0)):
        super().__init__([[lambda oy, ox: _offsets_kernel(kind, h, oy, ox)]], src_shape, tgt_shape, shift)

    def __call__(self, phi: np.ndarray) -> np.ndarray:
        return super().__call__([phi])[0]


# -- solved maps -----------------------------------------------------------

@dataclass
class SolveReport:
    terms: int
    residual: float
    k: float
    residual_bound: float

    def to_json(self) -> dict:
        return {"terms": self.terms, "residual": self.residual, "k": self.k,
                "residual_bound": self.residual_bound}


@dataclass
class SolvedMap:
    """Psi = scale * (z + C phi) + shift, evaluable anywhere on the plane."""

    grid: Grid
    phi: np.ndarray          # density on the support block
    origin: tuple[int, int]  # (row, col) of phi[0, 0]
    scale: complex = 1.0
    shift: complex = 0.0
    report: SolveReport | None = None
    band: Band | None = None
    band_phi: np.ndarray | None = None
    _raw_grid: np.ndarray | None = field(default=None, repr=False)
    _dz_grid: np.ndarray | None = field(default=None, repr=False)
    _moments: np.ndarray | None = field(default=None, repr=False)
    _splines: dict | None = field(default=None, repr=False)

    # -- geometry of the support
    @property
    def empty(self) -> bool:
        return self.phi.size == 0 or not np.any(self.phi)

    def _edges(self):
        h = self.grid.h
        r0, c0 = self.origin
        ny, nx = self.phi.shape
        ax = self.grid.axis
        ex = ax[c0] - h / 2 + h * np.arange(nx + 1)
        ey = ax[r0] - h / 2 + h * np.arange(ny + 1)
        return ex, ey

    @property
    def support_radius(self) -> float:
        if self.empty:
            return 0.0
        ex, ey = self._edges()
        return float(np.hypot(max(abs(ex[0]), abs(ex[-1])), max(abs(ey[0]), abs(ey[-1]))))

    def _corner_weights(self):
        p = np.pad(self.phi, ((0, 1), (0, 1)))
        D = p.copy()
        D[:, 1:] -= p[:, :-1]
        D[1:, :] -= p[:-1, :]
        D[1:, 1:] += p[:-1, :-1]
        return D

    def moments(self) -> np.ndarray:
        """m_k = (1/pi) int phi zeta^k dA, exact for the cell density."""
        if self._moments is None:
            ex, ey = self._edges()
            D = self._corner_weights()
            Z = ex[None, :] + 1j * ey[:, None]
            m = []
            for k in range(LAURENT_TERMS):
                # antiderivative of zeta^k in the sense d/dx d/dy
                Fk = Z ** (k + 2) / (1j * (k + 1) * (k + 2))
                m.append(np.sum(Fk * D) / np.pi)
            self._moments = np.array(m)
            if self.band is not None:
                self._moments = self._moments + self.band.laurent_correction(self.band_phi, LAURENT_TERMS)
        return self._moments

    def cauchy(self, z) -> np.ndarray:
        """C phi at arbitrary points (exact cell integrals, Laurent far away)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        out = np.zeros(z.shape, dtype=complex)
        if self.empty:
            return out
        R = self.support_radius
        far = np.abs(z) > 4 * R
        if far.any():
            zf = z[far]
            m = self.moments()
            acc = np.zeros(zf.shape, dtype=complex)
            inv = 1 / zf
            pw = inv.copy()
            for k in range(LAURENT_TERMS):
                acc += m[k] * pw
                pw = pw * inv
            out[far] = acc
        near = np.flatnonzero(~far)
        if near.size:
            ex, ey = self._edges()
            D = self._corner_weights()
            nz = np.flatnonzero(D)
            Iy, Ix = np.unravel_index(nz, D.shape)
            w = D.ravel()[nz]
            cx, cy = ex[Ix], ey[Iy]
            step = max(1, 4_000_000 // max(1, nz.size))
            for s in range(0, near.size, step):
                idx = near[s : s + step]
                zz = z[idx]
                Q = cauchy_Q(zz.real[:, None] - cx[None, :], zz.imag[:, None] - cy[None, :])
                out[idx] = Q @ w / np.pi
        if self.band is not None:
            out += self.band.cauchy_correction(z, self.band_phi)
        return out

    def raw(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return (z.ravel() + self.cauchy(z)).reshape(z.shape)

    def __call__(self, z):
        scalar = np.isscalar(z)
        z = np.asarray(z, dtype=complex)
        out = self.scale * self.raw(z) + self.shift
        out = np.where(np.isinf(z), np.inf + 0j, out)
        return complex(out) if scalar else out

    # -- grid data
    def raw_grid(self) -> np.ndarray:
        if self._raw_grid is None:
            z = self.grid.nodes()
            if self.empty:
                self._raw_grid = z
            else:
                self._raw_grid = z + self._grid_field("C")
        return self._raw_grid

    def dz_grid(self) -> np.ndarray:
        """Psi_z = scale * (1 + S phi) on the grid."""
        if self._dz_grid is None:
            N = self.grid.N
            if self.empty:
                self._dz_grid = np.full((N, N), self.scale, dtype=complex)
            else:
                self._dz_grid = self.scale * (1 + self._grid_field("S"))
        return self._dz_grid

    def _grid_field(self, kind: str) -> np.ndarray:
        """C phi or S phi at every grid node."""
        N, h = self.grid.N, self.grid.h
        shift = (-self.origin[0], -self.origin[1])
        if self.band is None:
            return _Convolver(kind, h, self.phi.shape, (N, N), shift)(self.phi)
        from .interface import ORDER, multipole_kernel

        kernels = [[lambda oy, ox: _offsets_kernel(kind, h, oy, ox)]
                   + [multipole_kernel(kind, 0, n, h, 1) for n in range(1, ORDER + 1)]]
        out = _Bank(kernels, self.phi.shape, (N, N), shift)([self.phi] + self.band.moment_arrays(self.band_phi))[0]
        cells, vals = self.band.grid_near(kind, self.band_phi)
        out[cells[:, 0] + self.origin[0], cells[:, 1] + self.origin[1]] += vals
        return out

    def grid_map(self) -> GridMap:
        return GridMap(self.grid, self.scale * self.raw_grid() + self.shift, "0,1,inf")

    def _spline_data(self, order: int):
        if self._splines is None:
            self._splines = {}
        if order not in self._splines:
            raw, dz = self.raw_grid(), self.dz_grid()
            arrs = (raw.real, raw.imag, dz.real, dz.imag)
            if order > 1:
                arrs = tuple(spline_filter(a, order=order) for a in arrs)
            self._splines[order] = arrs
        return self._splines[order]

    def interp(self, z, order: int = 3):
        """Psi and Psi_z at points z by grid interpolation (Laurent outside the box)."""
        z = np.asarray(z, dtype=complex)
        val = np.empty(z.shape, dtype=complex)
        der = np.empty(z.shape, dtype=complex)
        lim = self.grid.L - 3 * self.grid.h
        inside = (np.abs(z.real) < lim) & (np.abs(z.imag) < lim)
        if inside.any():
            i, j = self.grid.fractional_index(z[inside])
            coords = np.vstack([i, j])
            sp = self._spline_data(order)
            val[inside] = self.scale * (
                map_coordinates(sp[0], coords, order=order, prefilter=False)
                + 1j * map_coordinates(sp[1], coords, order=order, prefilter=False)
            ) + self.shift
            der[inside] = map_coordinates(sp[2], coords, order=order, prefilter=False) + 1j * map_coordinates(
                sp[3], coords, order=order, prefilter=False
            )
        out = ~inside
        if out.any():
            zo = z[out]
            m = self.moments() if not self.empty else np.zeros(LAURENT_TERMS)
            inv = 1 / zo
            acc = np.zeros(zo.shape, dtype=complex)
            dacc = np.zeros(zo.shape, dtype=complex)
            pw = inv.copy()
            for k in range(LAURENT_TERMS):
                acc += m[k] * pw
                dacc -= (k + 1) * m[k] * pw * inv
                pw = pw * inv
            val[out] = self.scale * (zo + acc) + self.shift
            der[out] = self.scale * (1 + dacc)
        return val, der

    def inverse(self, w, tol: float = 1e-12, max_iter: int = 60):
        """Solve Psi(z) = w by Newton on the interpolated map."""
        w = np.asarray(w, dtype=complex)
        z = (w - self.shift) / self.scale
        for _ in range(max_iter):
            val, der = self.interp(z)
            dz = (val - w) / der
            z = z - dz
            if np.all(np.abs(dz) < tol * np.maximum(1, np.abs(z))):
                break
        return z


# -- solvers ---------------------------------------------------------------

def _support_block(mu: np.ndarray):
    rows = np.flatnonzero(np.any(mu != 0, axis=1))
    cols = np.flatnonzero(np.any(mu != 0, axis=0))
    if rows.size == 0:
        return None
    return rows[0], rows[-1] + 1, cols[0], cols[-1] + 1


def _check_field(field_: BeltramiField, cfg: SolverConfig) -> np.ndarray:
    cfg.grid.check_same(field_.grid)
    mu = np.nan_to_num(np.asarray(field_.mu, dtype=complex))
    k = float(np.abs(mu).max(initial=0.0))
    if k > cfg.k_cap:
        raise ExcessDilatation(f"k = {k:.4f} exceeds the cap {cfg.k_cap}")
    z = field_.grid.nodes()
    if np.any((mu != 0) & (np.abs(z) > cfg.L / 2 + field_.grid.h)):
        raise ValidationError("mu must be supported in |z| <= L/2")
    return mu


def solve_density(mu: np.ndarray, cfg: SolverConfig, interface=None) -> SolvedMap:
    """Run the Neumann series and return the unnormalised solved map."""
    grid = cfg.grid
    k = float(np.abs(mu).max(initial=0.0))
    block = _support_block(mu)
    bound = max(1e-6, 10 * grid.h**2 * k)
    if block is None:
        return SolvedMap(grid, np.zeros((0, 0), dtype=complex), (0, 0), report=SolveReport(0, 0.0, 0.0, bound))
    r0, r1, c0, c1 = block
    if interface is not None:
        # room for the cut cells and their correction window
        pad = interface.window + 2
        r0, c0 = max(0, r0 - pad), max(0, c0 - pad)
        r1, c1 = min(grid.N, r1 + pad), min(grid.N, c1 + pad)
    m = mu[r0:r1, c0:c1]
    band = Band(grid, (r0, c0), m.shape, interface) if interface is not None else None
    S = _Convolver("S", grid.h, m.shape, m.shape) if band is None else _Bank(band.solver_kernels(), m.shape, m.shape)
    if band is not None:
        k = max(k, float(np.abs(band.mu_side).max(initial=0.0)))
        if k > cfg.k_cap:
            raise ExcessDilatation(f"k = {k:.4f} exceeds the cap {cfg.k_cap}")
        mu_t = np.concatenate([m.ravel()[band.t_flat[: band.n_full_t]], band.mu_side.ravel()])

    def step(phi, phib):
        if band is None:
            return m * (1 + S(phi)), phib
        fields = S([band.mass(phi, phib)] + band.moment_arrays(phib))
        Sg = fields[0]
        new = np.where(band.is_cut, 0, m * (1 + Sg))
        St = band.corrected(fields, phi, phib)
        vals = mu_t * (1 + St)
        nf = band.n_full_t
        new.ravel()[band.t_flat[:nf]] = vals[:nf]
        return new, vals[nf:]

    phi = np.where(band.is_cut, 0, m) if band is not None else m.copy()
    phib = band.mu_side.ravel().copy() if band is not None else np.zeros(0, dtype=complex)
    terms = 1
    while True:
        new, newb = step(phi, phib)
        delta = float(max(np.abs(new - phi).max(), np.abs(newb - phib).max(initial=0.0)))
        phi, phib = new, newb
        terms += 1
        if delta < cfg.tol:
            break
        if terms >= cfg.max_terms:
            raise NoConvergence(f"Neumann series not below {cfg.tol} after {terms} terms (last change {delta:.2e})")
    new, newb = step(phi, phib)
    residual = float(max(np.abs(phi - new).max(), np.abs(phib - newb).max(initial=0.0)))
    if residual > 100 * bound:
        raise ResidualTooLarge(f"dilatation residual {residual:.2e} exceeds {100 * bound:.2e}")
    mass = band.mass(phi, phib) if band is not None else phi
    return SolvedMap(grid, mass, (r0, c0), report=SolveReport(terms, residual, k, bound), band=band, band_phi=phib)


def _normalize(sm: SolvedMap) -> SolvedMap:
    """Affine post-composition fixing 0 and 1."""
    p0, p1 = sm.raw(np.array([0j, 1 + 0j]))
    sm.scale = 1 / (p1 - p0)
    sm.shift = -p0 / (p1 - p0)
    sm._dz_grid = None
    sm._splines = None
    return sm


def solve_beltrami_map(field_: BeltramiField, cfg: SolverConfig | None = None) -> SolvedMap:
    cfg = cfg or SolverConfig(field_.grid.N, field_.grid.L)
    mu = _check_field(field_, cfg)
    return _normalize(solve_density(mu, cfg, getattr(field_, "interface", None)))


def solve_beltrami(field_: BeltramiField, cfg: SolverConfig | None = None) -> GridMap:
    """Normalised solution sampled on the grid (report in ``meta``)."""
    sm = solve_beltrami_map(field_, cfg)
    gm = sm.grid_map()
    gm.meta["report"] = sm.report.to_json()
    gm.meta["solved"] = sm
    return gm


# -- sphere-supported coefficients ------------------------------------------

@dataclass
class SphereMap:
    """Psi(z) = 1 / W(1 / w1(z)) with w1 solving the inner part and W the
    outer part in the chart u = 1/w."""

    w1: SolvedMap
    w2: SolvedMap | None

    @property
    def grid(self) -> Grid:
        return self.w1.grid

    def __call__(self, z):
        scalar = np.isscalar(z)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        finite = np.isfinite(z)
        out = np.full(z.shape, np.inf + 0j)
        w = self.w1(z[finite])
        if self.w2 is None or self.w2.empty:
            out[finite] = w
        else:
            res = np.zeros(w.shape, dtype=complex)
            nz = w != 0
            u = 1 / w[nz]
            res[nz] = 1 / self.w2(u)
            out[finite] = res
        return complex(out[0]) if scalar else out

    def grid_map(self) -> GridMap:
        z = self.grid.nodes()
        w = self.w1.scale * self.w1.raw_grid() + self.w1.shift
        if self.w2 is None or self.w2.empty:
            return GridMap(self.grid, w, "0,1,inf")
        out = np.zeros(w.shape, dtype=complex)
        nz = w != 0
        val, _ = self.w2.interp(1 / w[nz])
        out[nz] = 1 / val
        return GridMap(self.grid, out, "0,1,inf")


# the sphere split: the first solve takes chi * mu, chi = 1 on |z| <= R1 and
# 0 beyond R2, the second takes what is left, pushed forward by the first
SPLIT_R1 = 1.25
SPLIT_R2 = 1.75


def cutoff(r, r1: float = SPLIT_R1, r2: float = SPLIT_R2):
    """Smooth radial cutoff: 1 for r <= r1, 0 for r >= r2."""
    t = np.clip((np.asarray(r, dtype=float) - r1) / (r2 - r1), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1 / np.where(t > 0, t, 1)), 0.0)
        b = np.where(t < 1, np.exp(-1 / np.where(t < 1, 1 - t, 1)), 0.0)
    return b / (a + b)


def _inner_field(sb, grid: Grid) -> BeltramiField:
    def mu_out(z):
        z = np.asarray(z, dtype=complex)
        chi = cutoff(np.abs(z))
        out = np.zeros(z.shape, dtype=complex)
        on = chi > 0
        out[on] = chi[on] * sb.outer_at(z[on])
        return out

    return BeltramiField.piecewise(grid, sb.inner_at, mu_out)


def _pushforward_outer(sb, w1: SolvedMap) -> np.ndarray:
    """Coefficient of the second solve on the u-grid, u = 1/w, w = w1(z)."""
    grid = w1.grid
    u = grid.nodes()
    nu = np.zeros(u.shape, dtype=complex)
    ring = SPLIT_R1 * np.exp(2j * np.pi * np.arange(1024) / 1024)
    r_min = np.abs(w1.interp(ring)[0]).min()
    cand = (np.abs(u) <= 1 / r_min + 2 * grid.h) & (u != 0)
    uu = u[cand]
    z = w1.inverse(1 / uu)
    chi = cutoff(np.abs(z))
    live = chi < 1
    zl = z[live]
    _, der = w1.interp(zl)
    mu = sb.outer_at(zl)
    rest = (1 - chi[live]) * mu / (1 - chi[live] * np.abs(mu) ** 2)
    ul = uu[live]
    vals = np.zeros(uu.shape, dtype=complex)
    vals[live] = rest * der / np.conj(der) * ul**2 / np.conj(ul) ** 2
    nu[cand] = vals
    # u = 0 is z = infinity, where w1 ~ scale * z
    i0 = grid.index_of(0j)
    if i0 is not None:
        m0 = sb.outer_fn(np.zeros(1, dtype=complex))[0] if sb.outer_fn is not None else sb.outer[i0]
        nu[i0] = np.conj(m0) * np.conj(w1.scale) / w1.scale
    return nu


def solve_sphere_beltrami(sb, cfg: SolverConfig | None = None, check: bool = True) -> SphereMap:
    """Solve a coefficient given as inner / reflected-outer charts.

    The first solve takes chi * mu with the jump at the unit circle resolved
    by cut cells; the remainder is smooth and is solved in the chart at
    infinity."""
    cfg = cfg or SolverConfig(sb.grid.N, sb.grid.L)
    if sb.k > cfg.k_cap:
        raise ExcessDilatation(f"k = {sb.k:.4f} exceeds the cap {cfg.k_cap}")
    if SPLIT_R2 > cfg.L / 2:
        raise ValidationError(f"box half-width {cfg.L} too small for the sphere split")
    grid = cfg.grid
    w1 = solve_beltrami_map(_inner_field(sb, grid), cfg)
    if sb.trivial_outer:
        return SphereMap(w1, None)
    nu = _pushforward_outer(sb, w1)
    w2 = solve_beltrami_map(BeltramiField(grid, nu), cfg)
    sm = SphereMap(w1, w2)
    if check:
        res = composition_residual(sm, sb)
        if res > 0.05:
            raise CompositionResidual(f"composed dilatation differs from mu by {res:.3f}")
    return sm


def composition_residual(sm: SphereMap, sb, radius: float = 2.0, n: int = 16, step: float | None = None) -> float:
    """max |mu_Psi - mu| on a circle in the outer region, mu_Psi by differences.

    The density is constant on cells, so differences shorter than a cell see
    its jumps; the default step spans one cell of the chart 1/z."""
    if step is None:
        step = sb.grid.h * radius**2
    z = radius * np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)
    fx = (sm(z + step) - sm(z - step)) / (2 * step)
    fy = (sm(z + 1j * step) - sm(z - 1j * step)) / (2 * step)
    mu_num = (fx + 1j * fy) / (fx - 1j * fy)
    return float(np.abs(mu_num - sb.outer_at(z)).max())
