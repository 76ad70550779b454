"""Square grids, sampled maps and Beltrami fields.

Nodes are x_j = -L + j * 2L/N for j = 0..N-1 in both directions, so 0 and 1
are nodes whenever N/(2L) is an integer.  Arrays are indexed [row, col] with
row <-> y and col <-> x.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, ValidationError


@dataclass(frozen=True)
class Grid:
    N: int
    L: float

    def __post_init__(self):
        if self.N < 8 or self.N & (self.N - 1):
            raise ValidationError(f"grid size {self.N} must be a power of two >= 8")
        if self.L <= 0:
            raise ValidationError("box half-width must be positive")

    @property
    def h(self) -> float:
        return 2 * self.L / self.N

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def nodes(self) -> np.ndarray:
        x = self.axis
        return x[None, :] + 1j * x[:, None]

    def index_of(self, z: complex) -> tuple[int, int] | None:
        """(row, col) of z if it is a grid node."""
        j = (z.real + self.L) / self.h
        i = (z.imag + self.L) / self.h
        if abs(j - round(j)) > 1e-9 or abs(i - round(i)) > 1e-9:
            return None
        i, j = int(round(i)), int(round(j))
        if 0 <= i < self.N and 0 <= j < self.N:
            return i, j
        return None

    def fractional_index(self, z):
        """Continuous (row, col) coordinates of points z."""
        z = np.asarray(z, dtype=complex)
        return (z.imag + self.L) / self.h, (z.real + self.L) / self.h

    def check_same(self, other: "Grid") -> None:
        if self.N != other.N or abs(self.L - other.L) > 1e-15:
            raise GridMismatch(f"grids differ: ({self.N}, {self.L}) vs ({other.N}, {other.L})")


@dataclass
class GridMap:
    """Samples of a map on the grid; NaN marks nodes where it is not defined."""

    grid: Grid
    samples: np.ndarray
    normalization: str = "0,1,inf"
    meta: dict = field(default_factory=dict)

    def jacobian_positive_fraction(self) -> float:
        fz, fzb = wirtinger(self.samples, self.grid.h)
        jac = np.abs(fz) ** 2 - np.abs(fzb) ** 2
        ok = np.isfinite(jac)
        if not ok.any():
            return 0.0
        return float(np.mean(jac[ok] > 0))


@dataclass
class BeltramiField:
    grid: Grid
    mu: np.ndarray
    degenerate: int = 0
    interface: object = None  # optional CircleInterface for a jump across |z| = 1
    fn: object = None  # optional exact mu at arbitrary points

    @property
    def k(self) -> float:
        m = np.abs(self.mu[np.isfinite(self.mu)])
        return float(m.max(initial=0.0))

    @classmethod
    def piecewise(cls, grid: Grid, mu_in, mu_out=None, **kw) -> "BeltramiField":
        """mu_in on |z| < 1 and mu_out on |z| > 1 (zero when None), with the
        jump across the unit circle resolved by a CircleInterface."""
        from .interface import CircleInterface

        if mu_out is None:
            mu_out = lambda z: np.zeros(np.shape(z), dtype=complex)
        z = grid.nodes()
        inside = np.abs(z) < 1
        mu = np.zeros(z.shape, dtype=complex)
        mu[inside] = mu_in(z[inside])
        mu[~inside] = mu_out(z[~inside])
        return cls(grid, mu, interface=CircleInterface(mu_in, mu_out, **kw))

    def check_k(self, cap: float = 1.0) -> None:
        if not self.k < cap:
            raise ValidationError(f"dilatation k = {self.k} is not below {cap}")


def _diff(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order derivative along an axis, one-sided next to NaN or the edge."""
    f = np.moveaxis(f, axis, 0)
    n = f.shape[0]
    out = np.full(f.shape, np.nan, dtype=complex)
    ok = np.isfinite(f)
    # central where both neighbours exist
    c = ok[2:] & ok[:-2] & ok[1:-1]
    out[1:-1][c] = ((f[2:] - f[:-2]) / (2 * h))[c]
    # forward three-point
    fw = np.zeros(f.shape, dtype=bool)
    fw[: n - 2] = ok[: n - 2] & ok[1 : n - 1] & ok[2:]
    fw &= ~np.isfinite(out)
    if fw.any():
        g = np.full(f.shape, np.nan, dtype=complex)
        g[: n - 2] = (-3 * f[: n - 2] + 4 * f[1 : n - 1] - f[2:]) / (2 * h)
        out[fw] = g[fw]
    bw = np.zeros(f.shape, dtype=bool)
    bw[2:] = ok[2:] & ok[1:-1] & ok[:-2]
    bw &= ~np.isfinite(out)
    if bw.any():
        g = np.full(f.shape, np.nan, dtype=complex)
        g[2:] = (3 * f[2:] - 4 * f[1:-1] + f[:-2]) / (2 * h)
        out[bw] = g[bw]
    return np.moveaxis(out, 0, axis)


def wirtinger(f: np.ndarray, h: float):
    """(f_z, f_zbar) of grid samples by finite differences."""
    fx = _diff(f, h, axis=1)
    fy = _diff(f, h, axis=0)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


# -- binary format ---------------------------------------------------------

def write_grid_file(path, grid: Grid, values: np.ndarray, kind: str, extra: dict | None = None) -> None:
    header = {"N": grid.N, "L": grid.L, "kind": kind}
    if extra:
        header.update(extra)
    data = np.ascontiguousarray(values, dtype=np.complex128)
    pairs = np.empty(data.shape + (2,), dtype="<f8")
    pairs[..., 0] = data.real
    pairs[..., 1] = data.imag
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(pairs.tobytes())


def read_grid_file(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        raw = fh.read()
    grid = Grid(int(header["N"]), float(header["L"]))
    pairs = np.frombuffer(raw, dtype="<f8")
    if pairs.size != 2 * grid.N * grid.N:
        raise ValidationError(f"grid file holds {pairs.size // 2} samples, expected {grid.N ** 2}")
    pairs = pairs.reshape(grid.N, grid.N, 2)
    values = pairs[..., 0] + 1j * pairs[..., 1]
    return header, grid, values


def save_map(path, m: GridMap) -> None:
    write_grid_file(path, m.grid, m.samples, "map", {"normalization": m.normalization})


def save_field(path, b: BeltramiField) -> None:
    write_grid_file(path, b.grid, np.nan_to_num(b.mu), "beltrami")


def load(path):
    header, grid, values = read_grid_file(path)
    if header["kind"] == "map":
        return GridMap(grid, values, header.get("normalization", "0,1,inf"))
    if header["kind"] == "beltrami":
        return BeltramiField(grid, values)
    raise ValidationError(f"unknown grid kind {header['kind']!r}")
