"""Circle dynamics: the canonical conjugacy with z^d, cycles and multipliers.

Angles are measured in turns (t in [0, 1) stands for e^{2 pi i t}).  The
conjugacy phi_f with z^d is pinned by the itinerary convention: the arcs of
the circle cut at f^{-1}(1) are labelled 0..d-1 counterclockwise from 1, and
the inverse branch onto arc j is g_j(s) = F^{-1}(s + j) for the lift F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from . import kernels
from .errors import BranchCollision, CutoffExceeded, NoConvergence, NumericalError
from .moduli import MarkedBlaschke, derivative

MAX_PERIOD = 12
ORBIT_CAP = 1 << 24
_FIX_BITS = 60


@dataclass(frozen=True)
class Cycle:
    d: int
    period: int
    label: int

    @property
    def modulus(self) -> int:
        return self.d**self.period - 1

    @property
    def orbit(self) -> tuple[int, ...]:
        m = self.modulus
        return tuple(self.label * self.d**k % m if m > 1 else 0 for k in range(self.period))

    @property
    def angles_zd(self) -> tuple[float, ...]:
        m = self.modulus
        return tuple(r / m for r in self.orbit)

    def itinerary(self, shift: int = 0) -> tuple[int, ...]:
        """Base-d digits (most significant first) of the orbit element d^shift * label."""
        r = self.orbit[shift % self.period]
        digits = []
        for _ in range(self.period):
            r, q = divmod(r, self.d)
            digits.append(q)
        return tuple(reversed(digits))


@dataclass(frozen=True)
class LocatedCycle:
    cycle: Cycle
    angles: tuple[float, ...]
    multiplier: float
    imag_residue: float

    @property
    def points(self) -> tuple[complex, ...]:
        return tuple(complex(np.exp(2j * np.pi * t)) for t in self.angles)


@dataclass(frozen=True)
class MultiplierSpectrum:
    params: object
    cutoff: int
    entries: tuple[LocatedCycle, ...]

    def by_period(self, n: int) -> list[LocatedCycle]:
        return [e for e in self.entries if e.cycle.period == n]


def mobius(n: int) -> int:
    res, m, p = 1, n, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            res = -res
        p += 1
    return -res if m > 1 else res


def necklace_count(d: int, n: int) -> int:
    """Number of exact period-n orbits of multiplication by d on Z/(d^n - 1)."""
    total = sum(mobius(n // m) * (d**m - 1) for m in range(1, n + 1) if n % m == 0)
    return total // n


def _check_cutoff(d: int, n: int) -> None:
    if n < 1 or n > MAX_PERIOD or d**n - 1 > ORBIT_CAP:
        raise CutoffExceeded(f"period {n} for degree {d} exceeds the orbit cap")


def enumerate_cycles(d: int, n: int) -> list[Cycle]:
    _check_cutoff(d, n)
    m = d**n - 1
    if m == 1:
        return [Cycle(d, n, 0)]
    labels = []
    chunk = 1 << 20
    for start in range(0, m, chunk):
        r = np.arange(start, min(m, start + chunk), dtype=np.int64)
        x = r.copy()
        is_min = np.ones(r.shape, dtype=bool)
        exact = np.ones(r.shape, dtype=bool)
        for _ in range(1, n):
            x = x * d % m
            is_min &= r <= x
            exact &= x != r
        labels.extend(r[is_min & exact].tolist())
    return [Cycle(d, n, int(r)) for r in labels]


def wrap(t):
    """Map angle differences into [-1/2, 1/2)."""
    return (np.asarray(t) + 0.5) % 1.0 - 0.5


def inverse_branches(f: MarkedBlaschke, w: complex) -> list[complex]:
    """The d solutions of f(z) = w on the circle, ordered by arc label."""
    w = complex(w)
    if abs(abs(w) - 1) > 1e-10:
        raise NumericalError(f"|w| = {abs(w)} is not on the unit circle")
    poly = P.polysub(f.numerator(), w * f.denominator())
    roots = P.polyroots(poly)
    if len(roots) > 1:
        gaps = np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots))
        if gaps.min() < 1e-12:
            raise BranchCollision("two inverse branches coincide")
    s = (np.angle(w) / (2 * np.pi)) % 1.0
    if s >= 1.0:
        s = 0.0
    t = kernels.inverse_lift(f.zeros, f.d, s + np.arange(f.d, dtype=float))
    z = np.exp(2j * np.pi * t)
    # pair each root with the lift solution; they must coincide
    err = np.abs(roots[:, None] - z[None, :]).min(axis=0)
    if err.max() > 1e-8:
        raise NumericalError(f"polynomial roots disagree with the lift by {err.max():.2e}")
    return [complex(v) for v in z]


def x_digits(x, d: int, depth: int, with_tail: bool = False):
    """Base-d digits of angles x in [0, 1), computed exactly in fixed point.

    With ``with_tail`` also returns the remainder d^depth x mod 1.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float)) % 1.0
    num = np.round(x * 2.0**_FIX_BITS).astype(np.int64)
    num = np.minimum(num, (1 << _FIX_BITS) - 1)
    mask = np.int64((1 << _FIX_BITS) - 1)
    out = np.empty((x.shape[0], depth), dtype=np.int64)
    for k in range(depth):
        num = num * d
        out[:, k] = num >> _FIX_BITS
        num = num & mask
    if with_tail:
        return out, num / 2.0**_FIX_BITS
    return out


def itinerary_digits(f: MarkedBlaschke, y, depth: int, with_tail: bool = False):
    """Symbolic itinerary of angles y under f (forward iteration of the lift).

    With ``with_tail`` also returns the angle reached after ``depth`` steps.
    """
    t = np.atleast_1d(np.asarray(y, dtype=float)) % 1.0
    out = np.empty((t.shape[0], depth), dtype=np.int64)
    for k in range(depth):
        v = kernels.lift(f.zeros, f.d, t)
        j = np.floor(v)
        j = np.clip(j, 0, f.d - 1)
        out[:, k] = j
        t = np.clip(v - j, 0.0, np.nextafter(1.0, 0.0))
    if with_tail:
        return out, t
    return out


def conjugacy_points(
    f: MarkedBlaschke, x=None, depth: int = 60, digits=None, tail=None, tol: float = 1e-10
) -> np.ndarray:
    """phi_f at angles x by pulling back along the base-d digits of x.

    The seed is the remaining tail angle, i.e. phi_f is approximated by the
    identity beyond ``depth`` digits.  ``digits``/``tail`` may be supplied
    directly (itineraries from another map); then ``depth`` is not capped.
    """
    if digits is None:
        if depth > 60:
            raise CutoffExceeded("conjugacy depth is capped at 60")
        digits, tail = x_digits(x, f.d, depth, with_tail=True)
    depth = digits.shape[1]
    if tail is None:
        tail = np.zeros(digits.shape[0])
    zeros = f.zeros
    full = kernels.pullback(zeros, f.d, digits, tail)
    short = kernels.pullback(zeros, f.d, digits[:, : depth - 1], (digits[:, -1] + tail) / f.d)
    gap = np.abs(wrap(full - short))
    if gap.max(initial=0.0) > tol:
        bad = int(np.argmax(gap))
        raise NoConvergence(f"conjugacy did not settle at depth {depth} (index {bad}, gap {gap[bad]:.2e})")
    return full % 1.0


def conjugacy_point(f: MarkedBlaschke, x: float, depth: int = 60) -> float:
    return float(conjugacy_points(f, [x], depth)[0])


def _locate_batch(f: MarkedBlaschke, cycles: list[Cycle]) -> list[LocatedCycle]:
    if not cycles:
        return []
    n = cycles[0].period
    d = f.d
    zeros = f.zeros
    rows, targets = [], []
    for c in cycles:
        for k in range(n):
            rows.append(c.itinerary(k))
            targets.append(c.orbit[k])
    digits = np.array(rows, dtype=np.int64)
    targets = np.array(targets, dtype=np.int64)
    s = np.zeros(digits.shape[0])
    active = np.arange(digits.shape[0])
    # one iteration = one pullback around the whole period
    for _ in range(10_000):
        s_new = kernels.pullback(zeros, d, digits[active], s[active])
        moved = np.abs(wrap(s_new - s[active]))
        s[active] = s_new
        active = active[moved >= 1e-13]
        if active.size == 0:
            break
    else:
        raise NoConvergence(f"pullback of period-{n} cycles did not settle")
    s = s % 1.0
    # Newton on F^n(t) - t - r, tracked modulo 1 to keep the lift small
    for _ in range(3):
        t = s.copy()
        dprod = np.ones_like(t)
        for _ in range(n):
            dprod *= kernels.lift_derivative(zeros, t)
            t = kernels.lift(zeros, d, t) % 1.0
        e = wrap(t - s)
        step = e / (dprod - 1)
        s = (s - step) % 1.0
        if np.abs(step).max() < 1e-16:
            break
    out = []
    for i, c in enumerate(cycles):
        ang = s[i * n : (i + 1) * n]
        lam = float(np.prod(kernels.lift_derivative(zeros, ang)))
        zc = np.prod(derivative(f, np.exp(2j * np.pi * ang)))
        resid = abs(zc - lam) / lam
        if resid > 1e-10:
            raise NumericalError(
                f"cycle label {c.label}: complex multiplier {zc} disagrees with {lam}"
            )
        out.append(LocatedCycle(c, tuple(float(a) for a in ang), lam, float(resid)))
    return out


def locate_cycle(f: MarkedBlaschke, c: Cycle) -> LocatedCycle:
    return _locate_batch(f, [c])[0]


def spectrum(f: MarkedBlaschke, N: int) -> MultiplierSpectrum:
    _check_cutoff(f.d, N)  # the cap grows with n, so N bounds every period
    entries = []
    for n in range(1, N + 1):
        cycles = enumerate_cycles(f.d, n)
        try:
            entries.extend(_locate_batch(f, cycles))
        except NumericalError as exc:
            raise type(exc)(f"period {n}: {exc}") from exc
    return MultiplierSpectrum(f.params, N, tuple(entries))


def monotone_check(values) -> bool:
    """True if angle samples increase strictly once around the circle."""
    v = np.asarray(values, dtype=float)
    steps = np.diff(np.concatenate([v, [v[0] + 1.0]]))
    steps = np.mod(steps, 1.0)
    return bool(np.all(steps > 0) and math.isclose(steps.sum(), 1.0, abs_tol=1e-9))
