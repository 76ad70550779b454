"""Index identity, multiplier derivatives along paths, degeneracy constraints.

Multiplier derivatives are finite differences of located multipliers.  The
second- and fourth-order central stencils are both evaluated; the fourth
order value is reported and |D4 - D2| serves as the error estimate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .circle import Cycle, _locate_batch, enumerate_cycles
from .errors import PathExit, ValidationError
from .moduli import BOUNDARY_MARGIN, MarkedBlaschke, attracting_multipliers, make_standard

R_ZERO = 1e-12
CASE_TOL = 1e-9


@dataclass(frozen=True)
class PathSpec:
    """Zeros moving along polynomial curves a_i(t), t in [-1, 1].

    ``curves[i]`` holds ascending coefficients of a_i in t.  Containment in
    the disk is checked where the path is evaluated, so a curve may be used
    on the part of [-1, 1] where it stays inside.
    """

    d: int
    curves: tuple[tuple[complex, ...], ...]

    def __post_init__(self):
        if len(self.curves) != self.d - 1:
            raise ValidationError(f"degree {self.d} needs {self.d - 1} curves, got {len(self.curves)}")
        object.__setattr__(
            self, "curves", tuple(tuple(complex(c) for c in cv) for cv in self.curves)
        )

    def check_inside(self, lo: float = -1.0, hi: float = 1.0, samples: int = 201) -> None:
        """Sampled containment of all curves in the disk on [lo, hi]."""
        ts = np.linspace(lo, hi, samples)
        for cv in self.curves:
            if np.abs(P.polyval(ts, np.asarray(cv))).max() >= 1 - BOUNDARY_MARGIN:
                raise PathExit(f"path leaves the disk on [{lo}, {hi}]")

    @classmethod
    def constant(cls, d: int, zeros) -> "PathSpec":
        return cls(d, tuple((complex(a),) for a in zeros))

    def zeros_at(self, t: float) -> list[complex]:
        if not -1.0 <= t <= 1.0:
            raise PathExit(f"t = {t} is outside [-1, 1]")
        zs = [complex(P.polyval(t, np.asarray(cv))) for cv in self.curves]
        for a in zs:
            if abs(a) >= 1 - BOUNDARY_MARGIN:
                raise PathExit(f"zero {a} at t = {t} is not inside the disk")
        return zs

    def at(self, t: float) -> MarkedBlaschke:
        return make_standard(self.d, self.zeros_at(t))

    def to_json(self) -> dict:
        return {"d": self.d, "curves": [[[c.real, c.imag] for c in cv] for cv in self.curves]}

    @classmethod
    def from_json(cls, obj: dict) -> "PathSpec":
        curves = tuple(tuple(complex(re, im) for re, im in cv) for cv in obj["curves"])
        return cls(int(obj["d"]), curves)


@dataclass(frozen=True)
class Derivative:
    value: float
    error: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class AttractingPolar:
    """lambda_att = r e^{i theta} and its path derivatives.

    theta and theta_dot are None when r <= 1e-12.
    """

    r: float
    theta: Optional[float]
    r_dot: float
    theta_dot: Optional[float]

    def __post_init__(self):
        if not 0 <= self.r < 1:
            raise ValidationError(f"r = {self.r} must lie in [0, 1)")

    @property
    def defined(self) -> bool:
        return self.r > R_ZERO and self.theta is not None


class Case(str, enum.Enum):
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    NOT_DEGENERATE = "NotDegenerate"
    INCONSISTENT = "Inconsistent"


def _divisors(n: int) -> list[int]:
    return [m for m in range(1, n + 1) if n % m == 0]


def index_terms(f: MarkedBlaschke, n: int) -> tuple[float, float]:
    """Both sides of the holomorphic index identity for f^n.

    A period-m cycle with m | n consists of m fixed points of f^n, each with
    multiplier lambda^(n/m).
    """
    lhs = 0.0
    for m in _divisors(n):
        for lc in _locate_batch(f, enumerate_cycles(f.d, m)):
            lhs += m / (lc.multiplier ** (n // m) - 1)
    lam = attracting_multipliers(f)[0] ** n
    rhs = (1 - abs(lam) ** 2) / abs(1 - lam) ** 2
    return lhs, rhs


def index_residual(f: MarkedBlaschke, n: int) -> float:
    lhs, rhs = index_terms(f, n)
    return lhs - rhs


def _stencil(path: PathSpec, t0: float, h: float):
    if h <= 0:
        raise ValidationError("step h must be positive")
    ts = [t0 - 2 * h, t0 - h, t0 + h, t0 + 2 * h]
    if ts[0] < -1 or ts[-1] > 1:
        raise PathExit(f"stencil around t0 = {t0} with h = {h} leaves [-1, 1]")
    return ts


def _fd(vals, h: float):
    m2, m1, p1, p2 = vals
    d2 = (p1 - m1) / (2 * h)
    d4 = (8 * (p1 - m1) - (p2 - m2)) / (12 * h)
    return d4, d2


def _multipliers_at(path: PathSpec, t: float, cycles: list[Cycle]) -> np.ndarray:
    f = path.at(t)
    out = []
    by_period: dict[int, list[Cycle]] = {}
    for c in cycles:
        by_period.setdefault(c.period, []).append(c)
    lookup = {}
    for n, cs in by_period.items():
        for lc in _locate_batch(f, cs):
            lookup[(n, lc.cycle.label)] = lc.multiplier
    for c in cycles:
        out.append(lookup[(c.period, c.label)])
    return np.array(out)


def multiplier_derivatives(path: PathSpec, cycles: list[Cycle], t0: float, h: float = 1e-5):
    """d/dt of each cycle multiplier at t0; returns (values, error estimates)."""
    for c in cycles:
        if c.d != path.d:
            raise ValidationError(f"cycle degree {c.d} does not match path degree {path.d}")
    vals = [_multipliers_at(path, t, cycles) for t in _stencil(path, t0, h)]
    d4, d2 = _fd(vals, h)
    return d4, np.abs(d4 - d2)


def multiplier_derivative(path: PathSpec, c: Cycle, t0: float = 0.0, h: float = 1e-5) -> Derivative:
    v, e = multiplier_derivatives(path, [c], t0, h)
    return Derivative(float(v[0]), float(e[0]))


@dataclass(frozen=True)
class WitnessRow:
    period: int
    label: int
    dlambda_dt: float
    fd_error: float


def witness_table(path: PathSpec, t0: float, N: int, h: float = 1e-5) -> list[WitnessRow]:
    cycles = [c for n in range(1, N + 1) for c in enumerate_cycles(path.d, n)]
    v, e = multiplier_derivatives(path, cycles, t0, h)
    return [WitnessRow(c.period, c.label, float(a), float(b)) for c, a, b in zip(cycles, v, e)]


def degeneracy_witness(path: PathSpec, t0: float, N: int, h: float = 1e-5) -> float:
    """sup over cycles of period <= N of |d lambda_C / dt| at t0.

    A positive value certifies that the tangent direction is not degenerate;
    zero certifies nothing.
    """
    rows = witness_table(path, t0, N, h)
    return max(abs(r.dlambda_dt) for r in rows)


def attracting_polar(path: PathSpec, t0: float = 0.0, h: float = 1e-5) -> AttractingPolar:
    """Polar data of lambda_att = f_t'(0) along the path.

    At r = 0 the one-sided derivative |lambda'| is reported as r_dot.
    """
    lam0 = attracting_multipliers(path.at(t0))[0]
    vals = [attracting_multipliers(path.at(t))[0] for t in _stencil(path, t0, h)]
    dlam, _ = _fd(vals, h)
    r = abs(lam0)
    if r <= R_ZERO:
        return AttractingPolar(r, None, abs(dlam), None)
    theta = math.atan2(lam0.imag, lam0.real) % (2 * math.pi)
    r_dot = (dlam * lam0.conjugate()).real / r
    theta_dot = (dlam / lam0).imag
    return AttractingPolar(r, theta, r_dot, theta_dot)


def dot_r_residual(p: AttractingPolar, n: int) -> tuple[float, bool]:
    """Left side minus right side of the n-th constraint; (value, conventional).

    When theta is undefined (r <= 1e-12) cos(n theta) = 1, sin(n theta) = 0 is
    used and the flag is set.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    conventional = not p.defined
    if conventional:
        c, s, th_dot = 1.0, 0.0, 0.0
    else:
        c, s, th_dot = math.cos(n * p.theta), math.sin(n * p.theta), p.theta_dot
    r = p.r
    rn = r**n
    val = p.r_dot * (2 * rn - rn * rn * c - c) + r * (1 - rn * rn) * th_dot * s
    return val, conventional


def classify_case(p: AttractingPolar, n_max: int = 8) -> Case:
    if n_max < 8:
        raise ValidationError("n_max must be >= 8")
    if any(abs(dot_r_residual(p, n)[0]) > CASE_TOL for n in range(1, n_max + 1)):
        return Case.NOT_DEGENERATE
    rdot0 = abs(p.r_dot) <= CASE_TOL
    if p.r <= R_ZERO:
        return Case.CASE3 if rdot0 else Case.INCONSISTENT
    if rdot0 and p.theta is not None:
        th = p.theta % (2 * math.pi)
        if min(th, abs(th - math.pi), 2 * math.pi - th) <= CASE_TOL:
            return Case.CASE1
    if rdot0 and p.theta_dot is not None and abs(p.theta_dot) <= CASE_TOL:
        return Case.CASE2
    return Case.INCONSISTENT
