"""Fixed-point-marked Blaschke products in standard form.

A standard representative of degree ``d`` is

    f(z) = c * z * prod_i (z - a_i) / (1 - conj(a_i) z),
    c    = prod_i (1 - conj(a_i)) / (1 - a_i),

with ``d - 1`` zeros ``a_i`` in the open unit disk.  It fixes 0, infinity
and 1; the remaining ``d - 2`` fixed points lie on the unit circle and are
marked counterclockwise starting from 1.

On the circle the map has an increasing real lift

    F(t) = d t + (1/pi) sum_i [arg(1 - a_i e^{-2 pi i t}) - arg(1 - a_i)],

normalised by F(0) = 0 and satisfying F(t + 1) = F(t) + d.  Its derivative
is 1 + sum_i (1 - |a_i|^2) / |e^{2 pi i t} - a_i|^2 > 1, which is |f'| on
the circle.  Most circle computations go through this lift.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import (
    BoundaryParameter,
    DegreeMismatch,
    MarkingFailure,
    NearBoundaryZero,
    NumericalError,
    PoleHit,
)

BOUNDARY_MARGIN = 1e-9
SA_THRESHOLD = 1e-12
POLE_TOL = 1e-14
CIRCLE_ROOT_TOL = 1e-8


def _canonical(zeros) -> tuple[complex, ...]:
    zs = [complex(z) for z in zeros]
    return tuple(sorted(zs, key=lambda a: (abs(a), cmath.phase(a), a.real)))


@dataclass(frozen=True)
class BlaschkeParams:
    d: int
    zeros: tuple[complex, ...]

    def __post_init__(self):
        if self.d < 2:
            raise DegreeMismatch(f"degree must be >= 2, got {self.d}")
        if len(self.zeros) != self.d - 1:
            raise DegreeMismatch(
                f"degree {self.d} needs {self.d - 1} zeros, got {len(self.zeros)}"
            )
        for a in self.zeros:
            if abs(a) >= 1 - BOUNDARY_MARGIN:
                raise NearBoundaryZero(f"zero {a} is not inside |a| < 1 - 1e-9")
        object.__setattr__(self, "zeros", _canonical(self.zeros))

    def to_json(self) -> dict:
        return {"d": self.d, "zeros": [[a.real, a.imag] for a in self.zeros]}

    @classmethod
    def from_json(cls, obj: dict) -> "BlaschkeParams":
        return cls(int(obj["d"]), [complex(re, im) for re, im in obj["zeros"]])


@dataclass(frozen=True)
class SAFlag:
    member: bool
    vanishing_indices: tuple[int, ...]


@dataclass(frozen=True)
class MarkedBlaschke:
    params: BlaschkeParams
    leading: complex
    marking: tuple[complex, ...]
    fixed_angles: tuple[float, ...] = field(default=())

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def zeros(self) -> np.ndarray:
        return np.asarray(self.params.zeros, dtype=complex)

    # -- polynomial form -------------------------------------------------
    def numerator(self) -> np.ndarray:
        """Ascending coefficients of c * z * prod(z - a_i)."""
        return self.leading * P.polyfromroots([0.0, *self.params.zeros])

    def denominator(self) -> np.ndarray:
        """Ascending coefficients of prod(1 - conj(a_i) z)."""
        q = np.array([1.0 + 0j])
        for a in self.params.zeros:
            q = P.polymul(q, [1.0, -np.conj(a)])
        return q

    # -- evaluation ------------------------------------------------------
    def __call__(self, z):
        return evaluate(self, z)

    def lift(self, t):
        t = np.asarray(t, dtype=float)
        out = self.d * t
        w = np.exp(-2j * np.pi * t)
        for a in self.params.zeros:
            out = out + (np.angle(1 - a * w) - cmath.phase(1 - a)) / np.pi
        return out

    def lift_derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        z = np.exp(2j * np.pi * t)
        for a in self.params.zeros:
            out = out + (1 - abs(a) ** 2) / np.abs(z - a) ** 2
        return out


def make_standard(d: int, zeros) -> MarkedBlaschke:
    """Build the standard representative with its full fixed-point marking."""
    zeros = list(zeros)
    if len(zeros) != d - 1:
        raise DegreeMismatch(f"degree {d} needs {d - 1} zeros, got {len(zeros)}")
    params = BlaschkeParams(d, zeros)
    c = complex(np.prod([(1 - np.conj(a)) / (1 - a) for a in params.zeros]))
    proto = MarkedBlaschke(params, c, ())
    angles = _circle_fixed_angles(proto)
    marking = (0j, complex(math.inf, 0.0)) + tuple(
        complex(np.exp(2j * np.pi * t)) for t in angles
    )
    return MarkedBlaschke(params, c, marking, tuple(angles))


def _circle_fixed_angles(f: MarkedBlaschke) -> list[float]:
    # f(z) = z with the root z = 0 divided out: c prod(z - a) - prod(1 - conj(a) z)
    d = f.d
    poly = P.polysub(f.leading * P.polyfromroots(list(f.params.zeros)), f.denominator())
    if d == 2:
        roots = np.array([-poly[0] / poly[1]]) if abs(poly[1]) > 0 else np.array([])
    else:
        roots = P.polyroots(poly)
    on_circle = roots[np.abs(np.abs(roots) - 1) < CIRCLE_ROOT_TOL]
    if len(on_circle) < d - 1:
        raise MarkingFailure(
            f"found {len(on_circle)} circle fixed points, expected {d - 1}"
        )
    guesses = np.mod(np.angle(on_circle) / (2 * np.pi), 1.0)
    # the k-th fixed point counterclockwise from 1 solves F(t) = t + k
    angles = []
    for k in range(d - 1):
        if k == 0:
            angles.append(0.0)
            continue
        # F(t) - t increases from 0 to d - 1 on [0, 1); bracket the unique root
        lo, hi = 0.0, 1.0
        cand = [g for g in guesses if g > 1e-12]
        t = None
        for g in cand:
            if abs(f.lift(g) - g - k) < 1e-3:
                t = g
                break
        if t is None:
            t = 0.5
        for _ in range(100):
            g = f.lift(t) - t - k
            if g > 0:
                hi = min(hi, t)
            else:
                lo = max(lo, t)
            step = g / (f.lift_derivative(t) - 1)
            tn = t - step
            if not lo < tn < hi:
                tn = 0.5 * (lo + hi)
            if abs(tn - t) < 1e-16:
                t = tn
                break
            t = tn
        angles.append(float(t))
    return angles


def evaluate(f: MarkedBlaschke, z):
    """Product-form evaluation; accepts scalars or arrays."""
    scalar = np.isscalar(z)
    z = np.asarray(z, dtype=complex)
    _check_poles(f, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = f.leading * z
        for a in f.params.zeros:
            out = out * (z - a) / (1 - np.conj(a) * z)
    out = np.where(np.isinf(z), complex(math.inf, 0), out)
    return complex(out) if scalar else out


def derivative(f: MarkedBlaschke, z):
    """f'(z) from the logarithmic derivative, with a quotient-rule fallback."""
    scalar = np.isscalar(z)
    z = np.asarray(z, dtype=complex)
    _check_poles(f, z)
    fz = evaluate(f, z)
    near_zero = np.abs(z) < 1e-8
    for a in f.params.zeros:
        near_zero |= np.abs(z - a) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        logd = 1 / z
        for a in f.params.zeros:
            logd = logd + 1 / (z - a) + np.conj(a) / (1 - np.conj(a) * z)
        out = fz * logd
    if np.any(near_zero):
        num, den = f.numerator(), f.denominator()
        zz = z[near_zero]
        pv, qv = P.polyval(zz, num), P.polyval(zz, den)
        dp, dq = P.polyval(zz, P.polyder(num)), P.polyval(zz, P.polyder(den))
        out = np.array(out)
        out[near_zero] = (dp * qv - pv * dq) / qv**2
    return complex(out) if scalar else out


def _check_poles(f: MarkedBlaschke, z: np.ndarray) -> None:
    for a in f.params.zeros:
        if abs(a) < 1e-150:  # pole beyond any finite input
            continue
        pole = 1 / np.conj(a)
        if np.any(np.abs(z - pole) < POLE_TOL):
            raise PoleHit(f"evaluation at the pole {pole}")


def attracting_multipliers(f: MarkedBlaschke) -> tuple[complex, complex]:
    lam = f.leading * complex(np.prod([-a for a in f.params.zeros]))
    return lam, lam.conjugate()


def sa_flag(f: MarkedBlaschke) -> SAFlag:
    idx = tuple(i for i, a in enumerate(f.params.zeros) if abs(a) < SA_THRESHOLD)
    return SAFlag(bool(idx), idx)


def d3_family(a: complex) -> MarkedBlaschke:
    """The degree-3 super-attracting family with zeros {0, -a}."""
    return make_standard(3, [0.0, -a])


@dataclass(frozen=True)
class Lambda1Report:
    a: complex
    numerical: float
    closed_form: float
    printed_formula: float
    imag_residue: float

    @property
    def deviation_from_printed(self) -> float:
        return self.numerical - self.printed_formula


def lambda1_d3(a: complex) -> Lambda1Report:
    """Multiplier at the marked fixed point 1 of the degree-3 SA family.

    The closed form is 1 + 1/(1+a) + 1/(1+conj a); ``printed_formula`` is
    1/(1+a) + 1/(1+conj a), which misses the contribution of the double
    zero at the origin and is kept for reporting only.
    """
    a = complex(a)
    if abs(a) >= 1 - BOUNDARY_MARGIN:
        raise BoundaryParameter(f"parameter {a} is not inside |a| < 1 - 1e-9")
    f = d3_family(a)
    num = derivative(f, 1.0 + 0j)
    closed = 1 + (1 / (1 + a) + 1 / (1 + a.conjugate())).real
    printed = (1 / (1 + a) + 1 / (1 + a.conjugate())).real
    if abs(num - closed) > 1e-10:
        raise NumericalError(f"lambda_1 mismatch at a={a}: {num} vs {closed}")
    return Lambda1Report(a, num.real, closed, printed, abs(num.imag))
