"""Circle conjugacies between Blaschke products and their extensions to the disk.

A circle homeomorphism is stored through its lift H on the uniform grid
x_k = k/M, with H(x + 1) = H(x) + 1.  Between samples the lift is linear.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from . import kernels
from .circle import conjugacy_points, itinerary_digits, wrap, x_digits
from .errors import BarycenterDivergence, DegreeMismatch, NumericalError, ValidationError
from .grid import BeltramiField, Grid, GridMap, wirtinger
from .moduli import MarkedBlaschke

DEFAULT_M = 2048
BOUNDARY_EPS = 1e-12
MAX_REFINE = 1024
# coefficient samples closer to the circle than this many cells are moved in
EDGE_GAP = 0.1


@dataclass(frozen=True)
class CircleHomeo:
    d: int
    values: np.ndarray  # H(k/M), k = 0..M-1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        M = v.shape[0]
        if M < 512 or M & (M - 1):
            raise ValidationError(f"M = {M} must be a power of two >= 512")
        steps = np.diff(np.concatenate([v, [v[0] + 1.0]]))
        if not np.all(steps > 0):
            raise NumericalError("circle map samples are not strictly increasing")
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    def lift(self, t):
        """Piecewise-linear lift evaluated at real t."""
        t = np.asarray(t, dtype=float)
        n = np.floor(t)
        s = (t - n) * self.M
        k = np.minimum(np.floor(s).astype(np.int64), self.M - 1)
        frac = s - k
        ext = np.concatenate([self.values, [self.values[0] + 1.0]])
        return n + ext[k] + frac * (ext[k + 1] - ext[k])

    def __call__(self, t):
        return self.lift(t) % 1.0

    def rotated(self, alpha: float, beta_steps: int) -> "CircleHomeo":
        """rot_alpha o h o rot_beta with beta = beta_steps / M."""
        v = np.roll(self.values, -beta_steps)
        v = v + alpha
        v[self.M - beta_steps % self.M :] += 1.0
        return CircleHomeo(self.d, v - np.floor(v[0]))

    @classmethod
    def identity(cls, d: int, M: int = DEFAULT_M) -> "CircleHomeo":
        return cls(d, np.arange(M) / M)


def _is_monomial(f: MarkedBlaschke) -> bool:
    return all(a == 0 for a in f.params.zeros)


def _conjugacy_values(f1: MarkedBlaschke, f2: MarkedBlaschke, y: np.ndarray, depth: int):
    if _is_monomial(f2):
        digits, tail = x_digits(y, f2.d, depth, with_tail=True)
    else:
        digits, tail = itinerary_digits(f2, y, depth, with_tail=True)
    return conjugacy_points(f1, digits=digits, tail=tail)


def circle_conjugacy(f1: MarkedBlaschke, f2: MarkedBlaschke, M: int = DEFAULT_M, depth: int = 60) -> CircleHomeo:
    """h with h o f2 = f1 o h on the circle and h(1) = 1.

    The f2-itinerary of each grid angle is pulled back under f1.
    """
    if f1.d != f2.d:
        raise DegreeMismatch(f"degrees differ: {f1.d} vs {f2.d}")
    if M < 512 or M & (M - 1):
        raise ValidationError(f"M = {M} must be a power of two >= 512")
    x = np.arange(M) / M
    vals = _conjugacy_values(f1, f2, x, depth)
    vals[0] = 0.0
    # unwrap into a lift starting at 0
    vals = np.where(np.arange(M) > 0, vals, 0.0)
    vals = np.mod(vals, 1.0)
    return CircleHomeo(f1.d, vals)


def conjugacy_residual(f1: MarkedBlaschke, f2: MarkedBlaschke, h: CircleHomeo, depth: int = 60) -> float:
    """max over samples of |h(f2(x)) - f1(h(x))| with h(f2(x)) recomputed."""
    y = f2.lift(h.x) % 1.0
    hy = _conjugacy_values(f1, f2, y, depth)
    fhx = f1.lift(h.values) % 1.0
    return float(np.abs(wrap(hy - fhx)).max())


# -- extensions ------------------------------------------------------------

def refinement(M: int, r):
    """Quadrature refinement factor for points at radius r."""
    gap = np.maximum(1 - np.asarray(r), 1e-300)
    return np.clip(np.ceil(40.0 / (M * gap)), 1, MAX_REFINE).astype(np.int64)


def _de_fixed_point(zeta, eta, pts, xi, iters: int = 500, tol: float = 1e-14):
    """Conformally natural iteration xi <- M_xi^-1(mean of M_xi(eta)), with
    M_a(z) = (z - a) / (1 - conj(a) z).  Slower than Newton but it never
    leaves the disk, so it serves as a start when Newton wanders."""
    xi = np.array(xi, dtype=complex)
    n = zeta.size
    for j, w in enumerate(pts):
        p = (1 - abs(w) ** 2) / np.abs(zeta - w) ** 2 / n
        x = xi[j]
        for _ in range(iters):
            m = np.sum(p * (eta - x) / (1 - np.conj(x) * eta))
            x = (m + x) / (1 + np.conj(x) * m)
            if abs(m) < tol:
                break
        xi[j] = x
    return xi


def douady_earle(h: CircleHomeo, w, with_mu: bool = False):
    """Barycentric extension of h at points w of the closed disk.

    With ``with_mu`` also returns its Beltrami coefficient (zero on the
    circle, where it is not defined).
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    out = np.empty(w.shape, dtype=complex)
    mu = np.zeros(w.shape, dtype=complex)
    r = np.abs(w)
    edge = r >= 1 - BOUNDARY_EPS
    if edge.any():
        t = np.angle(w[edge]) / (2 * np.pi)
        out[edge] = np.exp(2j * np.pi * h.lift(t))
    inner = np.flatnonzero(~edge)
    R = refinement(h.M, r[inner])
    for rf in np.unique(R):
        idx = inner[R == rf]
        n = h.M * int(rf)
        xs = np.arange(n) / n
        zeta = np.exp(2j * np.pi * xs)
        eta = np.exp(2j * np.pi * h.lift(xs))
        pts = w[idx]
        xi0 = kernels.poisson_mean(zeta, eta, pts)
        xi, iters = kernels.de_barycenter(zeta, eta, pts, xi0)
        bad = iters < 0
        if bad.any():
            start = _de_fixed_point(zeta, eta, pts[bad], xi0[bad])
            xi[bad], iters[bad] = kernels.de_barycenter(zeta, eta, pts[bad], start)
            bad = iters < 0
        if bad.any():
            raise BarycenterDivergence(
                f"barycenter Newton failed at {int(bad.sum())} points, e.g. w = {pts[bad][0]}"
            )
        out[idx] = xi
        if with_mu:
            mu[idx] = kernels.de_dilatation(zeta, eta, pts, xi)
    return (out, mu) if with_mu else out


def douady_earle_inverse_origin(h: CircleHomeo, tol: float = 1e-13) -> complex:
    """The point w with E(w) = 0, i.e. where the Poisson integral of h vanishes."""
    n = h.M
    xs = np.arange(n) / n
    zeta = np.exp(2j * np.pi * xs)
    eta = np.exp(2j * np.pi * h.lift(xs))

    def G(w):
        p = (1 - abs(w) ** 2) / np.abs(zeta - w) ** 2 / n
        return np.sum(p * eta)

    w = 0j
    for _ in range(100):
        g = G(w)
        e = 1e-7
        gx = (G(w + e) - G(w - e)) / (2 * e)
        gy = (G(w + 1j * e) - G(w - 1j * e)) / (2 * e)
        J = np.array([[gx.real, gy.real], [gx.imag, gy.imag]])
        step = np.linalg.solve(J, [-g.real, -g.imag])
        dw = step[0] + 1j * step[1]
        lim = 0.5 * (1 - abs(w))
        if abs(dw) > lim:
            dw *= lim / abs(dw)
        w += dw
        if abs(dw) < tol:
            return complex(w)
    raise BarycenterDivergence("could not locate the preimage of 0 under the extension")


def _antiderivative(h: CircleHomeo):
    """A(t) = integral_0^t H for the piecewise-linear lift H."""
    M = h.M
    P = h.values - h.x  # periodic part at the nodes
    Pe = np.concatenate([P, [P[0]]])
    dx = 1.0 / M
    cell = 0.5 * (Pe[:-1] + Pe[1:]) * dx
    pbar = cell.sum()
    Q = np.concatenate([[0.0], np.cumsum(cell - pbar * dx)])

    def A(t):
        t = np.asarray(t, dtype=float)
        n = np.floor(t)
        u = t - n
        s = u * M
        k = np.minimum(np.floor(s).astype(np.int64), M - 1)
        sl = (s - k) * dx
        slope = (Pe[k + 1] - Pe[k]) / dx
        q = Q[k] + (Pe[k] - pbar) * sl + 0.5 * slope * sl * sl
        # t = n + u:  integral_0^t (x + P) = t^2/2 + pbar t + q(u)
        return 0.5 * t * t + pbar * t + q

    return A


def beurling_ahlfors(h: CircleHomeo, w, with_mu: bool = False):
    """Averaging extension of the lift, transported by w = exp(2 pi i z).

    On the upper half-plane F = (alpha + beta)/2 + i (alpha - beta) with
    alpha, beta the averages of the lift over [x, x + y] and [x - y, x].
    The center maps to 0, the continuous limit of the construction.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    out = np.zeros(w.shape, dtype=complex)
    mu = np.zeros(w.shape, dtype=complex)
    r = np.abs(w)
    edge = r >= 1 - BOUNDARY_EPS
    if edge.any():
        t = np.angle(w[edge]) / (2 * np.pi)
        out[edge] = np.exp(2j * np.pi * h.lift(t))
    inner = ~edge
    ww = np.where(r[inner] > 0, w[inner], 1e-8)
    A = _antiderivative(h)
    x = np.angle(ww) / (2 * np.pi)
    y = -np.log(np.abs(ww)) / (2 * np.pi)
    a0 = A(x)
    alpha = (A(x + y) - a0) / y
    beta = (a0 - A(x - y)) / y
    F = 0.5 * (alpha + beta) + 1j * (alpha - beta)
    out[inner] = np.where(r[inner] > 0, np.exp(2j * np.pi * F), 0)
    if with_mu:
        Hp, H0, Hm = h.lift(x + y), h.lift(x), h.lift(x - y)
        ax, ay = (Hp - H0) / y, (Hp - alpha) / y
        bx, by = (H0 - Hm) / y, (Hm - beta) / y
        Fx = 0.5 * (ax + bx) + 1j * (ax - bx)
        Fy = 0.5 * (ay + by) + 1j * (ay - by)
        # chart w = exp(2 pi i z) contributes conj(z')/z' = -w/conj(w)
        mu[inner] = -(Fx + 1j * Fy) / (Fx - 1j * Fy) * ww / np.conj(ww)
    return (out, mu) if with_mu else out


EXTENSIONS = {"de": douady_earle, "douady-earle": douady_earle, "ba": beurling_ahlfors, "beurling-ahlfors": beurling_ahlfors}


def extension_inverse_origin(h: CircleHomeo, method: str) -> complex:
    if EXTENSIONS[method] is beurling_ahlfors:
        return 0j
    return douady_earle_inverse_origin(h)


def extension_inverse(h: CircleHomeo, method: str, x, tol: float = 1e-12, iters: int = 60) -> np.ndarray:
    """Points z of the open disk with E(z) = x, by damped Newton with a
    finite-difference Jacobian (E is a real-analytic diffeomorphism inside)."""
    ext = EXTENSIONS[method]
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    z = x.copy()
    todo = np.ones(x.shape, dtype=bool)
    e = 1e-6
    for _ in range(iters):
        idx = np.flatnonzero(todo)
        if idx.size == 0:
            return z
        w = z[idx]
        g = ext(h, w) - x[idx]
        gx = (ext(h, w + e) - ext(h, w - e)) / (2 * e)
        gy = (ext(h, w + 1j * e) - ext(h, w - 1j * e)) / (2 * e)
        det = gx.real * gy.imag - gy.real * gx.imag
        dz = (g.imag * gy.real - g.real * gy.imag + 1j * (gx.imag * g.real - gx.real * g.imag)) / det
        lim = 0.5 * (1 - np.abs(w))
        big = np.abs(dz) > lim
        dz[big] *= lim[big] / np.abs(dz[big])
        z[idx] = w + dz
        todo[idx[np.abs(dz) < tol]] = False
    if todo.any():
        raise BarycenterDivergence(f"extension inverse did not converge at {int(todo.sum())} points")
    return z


def extend_qc(h: CircleHomeo, method: str = "de", grid: Grid | None = None) -> GridMap:
    """Sample the extension of h on the grid nodes of the closed unit disk.

    Nodes outside the disk hold NaN.  The exact Beltrami coefficient of the
    extension is kept in ``meta["mu"]``; nodes on the circle take the value
    just inside.
    """
    if method not in EXTENSIONS:
        raise ValidationError(f"unknown extension method {method!r}")
    grid = grid or Grid(512, 4.0)
    z = grid.nodes()
    inside = np.abs(z) <= 1 + 1e-15
    samples = np.full(z.shape, np.nan + 0j)
    ext = EXTENSIONS[method]
    vals, mu_in = ext(h, z[inside], with_mu=True)
    samples[inside] = vals
    zi = z[inside]
    edge = np.abs(zi) >= 1 - BOUNDARY_EPS
    if edge.any():
        _, mu_in[edge] = ext(h, zi[edge] * (1 - 0.25 * grid.h), with_mu=True)
    mu = np.zeros(z.shape, dtype=complex)
    mu[inside] = mu_in
    meta = {"method": method, "mu": mu, "mu_fn": partial(extension_mu, h, method, gap=EDGE_GAP * grid.h)}
    return GridMap(grid, samples, normalization="disk", meta=meta)


def extension_mu(h: CircleHomeo, method: str, z, gap: float = 0.0) -> np.ndarray:
    """Beltrami coefficient of the extension at points of the closed disk.

    Points within ``gap`` of the circle (or closer than the quadrature
    resolves) are moved in radially.  For a singular h the coefficient
    oscillates on every scale near the circle, so a band of width gap is
    unresolved in any case."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    r_max = 1 - max(gap, 40.0 / (h.M * MAX_REFINE))
    zz = np.where(r > r_max, z / np.where(r > 0, r, 1) * r_max, z)
    _, mu = EXTENSIONS[method](h, zz.ravel(), with_mu=True)
    return mu.reshape(z.shape)


def beltrami_of(m: GridMap, exact: bool = True) -> BeltramiField:
    """mu = f_zbar / f_z of a sampled map; undefined nodes get mu = 0.

    Maps produced by ``extend_qc`` carry their exact coefficient, which is
    used unless ``exact`` is false; otherwise central differences (one-sided
    next to undefined nodes) are used.  Nodes with |f_z| < 1e-12 are counted
    as degenerate and excluded.
    """
    if exact and "mu" in m.meta:
        return BeltramiField(m.grid, m.meta["mu"].copy(), fn=m.meta.get("mu_fn"))
    fz, fzb = wirtinger(m.samples, m.grid.h)
    ok = np.isfinite(fz) & np.isfinite(fzb)
    degenerate = ok & (np.abs(fz) < 1e-12)
    mu = np.zeros(fz.shape, dtype=complex)
    good = ok & ~degenerate
    mu[good] = fzb[good] / fz[good]
    return BeltramiField(m.grid, mu, int(degenerate.sum()))


# -- mated field -----------------------------------------------------------

def _disk_restrict(b: BeltramiField) -> np.ndarray:
    z = b.grid.nodes()
    mu = np.nan_to_num(b.mu)
    return np.where(np.abs(z) <= 1, mu, 0)


def _lagrange4(t):
    """Cubic Lagrange weights on the nodes -1, 0, 1, 2 at offsets t."""
    return np.stack([-t * (t - 1) * (t - 2) / 6, (t + 1) * (t - 1) * (t - 2) / 2,
                     -(t + 1) * t * (t - 2) / 2, (t + 1) * t * (t - 1) / 6])


def disk_sample(grid: Grid, values: np.ndarray, w, fn=None, margin: float = 3.0) -> np.ndarray:
    """A coefficient known on the nodes of the closed disk, at points w.

    Bicubic Lagrange interpolation where the whole stencil lies in the disk;
    closer to the circle ``fn`` is evaluated (linear interpolation without
    it)."""
    w = np.asarray(w, dtype=complex)
    flat = w.ravel()
    out = np.empty(flat.shape, dtype=complex)
    safe = np.abs(flat) <= 1 - margin * grid.h
    if safe.any():
        fi, fj = grid.fractional_index(flat[safe])
        i0, j0 = np.floor(fi).astype(np.int64), np.floor(fj).astype(np.int64)
        wi, wj = _lagrange4(fi - i0), _lagrange4(fj - j0)
        acc = np.zeros(i0.shape, dtype=complex)
        for a in range(4):
            for b in range(4):
                acc += wi[a] * wj[b] * values[i0 + a - 1, j0 + b - 1]
        out[safe] = acc
    rest = ~safe
    if rest.any():
        out[rest] = fn(flat[rest]) if fn is not None else _sample(grid, values, flat[rest])
    return out.reshape(w.shape)


def _sample(grid: Grid, values: np.ndarray, z, order: int = 1) -> np.ndarray:
    from scipy.ndimage import map_coordinates

    i, j = grid.fractional_index(z)
    coords = np.vstack([np.ravel(i), np.ravel(j)])
    re = map_coordinates(values.real, coords, order=order, mode="nearest")
    im = map_coordinates(values.imag, coords, order=order, mode="nearest")
    return (re + 1j * im).reshape(np.shape(z))


@dataclass
class SphereBeltrami:
    """mu on the sphere: ``inner`` on |z| <= 1, and for |z| > 1
    mu(z) = conj(outer(1/conj z)) z^2 / conj(z)^2.

    ``inner_fn`` and ``outer_fn`` optionally give the two disk coefficients
    exactly at arbitrary points; otherwise the grids are interpolated."""

    grid: Grid
    inner: np.ndarray
    outer: np.ndarray
    inner_fn: Callable | None = None
    outer_fn: Callable | None = None

    @property
    def k(self) -> float:
        return float(max(np.abs(self.inner).max(), np.abs(self.outer).max()))

    @property
    def trivial_outer(self) -> bool:
        return self.outer_fn is None and not np.any(self.outer)

    def inner_at(self, z):
        """mu at points z with |z| < 1."""
        z = np.asarray(z, dtype=complex)
        return disk_sample(self.grid, self.inner, z, self.inner_fn)

    def outer_at(self, z):
        """mu at points z with |z| > 1."""
        z = np.asarray(z, dtype=complex)
        zr = 1 / np.conj(z)
        m2 = disk_sample(self.grid, self.outer, zr, self.outer_fn)
        return np.conj(m2) * z**2 / np.conj(z) ** 2

    def plane(self) -> BeltramiField:
        z = self.grid.nodes()
        mu = self.inner.copy()
        out = np.abs(z) > 1
        mu[out] = self.outer_at(z[out])
        return BeltramiField(self.grid, mu)

    def inner_field(self) -> BeltramiField:
        return BeltramiField(self.grid, self.inner)


def mated_beltrami(mu1: BeltramiField, mu2: BeltramiField) -> SphereBeltrami:
    mu1.grid.check_same(mu2.grid)
    return SphereBeltrami(mu1.grid, _disk_restrict(mu1), _disk_restrict(mu2), mu1.fn, mu2.fn)
