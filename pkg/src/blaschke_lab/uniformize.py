"""Mating of Blaschke products, rational maps from fixed-point markers,
and the bridge from Blaschke products to polynomials.

A rational map F of degree d fixing 0, 1 and infinity is rebuilt from its
d - 1 fixed points on the Julia set (xi_i, with xi_1 = 1) and the d
preimages of 1 (w_j):

    r(z) = prod (z - w_j),   k(z) = z prod (z - xi_i),
    p = (z r - a k) / (z - 1),   q = (r - a k) / (z - 1),

so that p - q = r and p - z q = a k.  The scalar a is fixed by one extra
sample F(z0) = w0.  Substituting z = 0 gives no information since k(0) = 0.

The markers of a mating lie on the Julia set, where the welding coefficient
is rough on every scale and the solved map is least accurate.  ``mate``
therefore refits the coefficients from the conjugacy F(Psi(z)) = Psi(G(z))
at points clustered around the two attracting fixed points, with G the model
map E^-1 f E (and its reflection for g).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from . import welding
from .beltrami import SolverConfig, SphereMap, solve_beltrami_map, solve_sphere_beltrami
from .circle import inverse_branches
from .errors import (
    DivisionResidue,
    ExcessDilatation,
    FitResidual,
    MultiplierNearOne,
    QuasicircleFail,
    SingularScale,
    ValidationError,
)
from .grid import BeltramiField
from .moduli import MarkedBlaschke, attracting_multipliers, evaluate

EXTRA_ANGLE = 0.1234567
K_MATE = 0.9
FIT_RADII = (0.05, 0.1, 0.15, 0.2)
FIT_ANGLES = 16
FIT_PASSES = 4
OUTER_RHO = 1.5


def _c(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


@dataclass
class RationalMap:
    """F = p / q with p monic of degree d; ascending coefficients."""

    num: np.ndarray
    den: np.ndarray
    marking: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return max(len(np.trim_zeros(self.num, "b")), len(np.trim_zeros(self.den, "b"))) - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return P.polyval(z, self.num) / P.polyval(z, self.den)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        p, q = P.polyval(z, self.num), P.polyval(z, self.den)
        dp, dq = P.polyval(z, P.polyder(self.num)), P.polyval(z, P.polyder(self.den))
        return (dp * q - p * dq) / q**2

    def multiplier_at_zero(self) -> complex:
        return complex(self.derivative(0j))

    def multiplier_at_infinity(self) -> complex:
        """1/F'(infinity) in the chart 1/z; needs deg q = d - 1."""
        num = np.trim_zeros(self.num, "b")
        den = np.trim_zeros(self.den, "b")
        if len(den) != len(num) - 1:
            return 0j
        return complex(den[-1] / num[-1])

    def is_quasi_blaschke(self) -> bool:
        return abs(self.multiplier_at_zero()) < 1 and abs(self.multiplier_at_infinity()) < 1

    def to_json(self) -> dict:
        mk = [None if not np.isfinite(z) else _c(z) for z in self.marking]
        return {"num": [_c(c) for c in self.num], "den": [_c(c) for c in self.den], "marking": mk}

    @classmethod
    def from_json(cls, obj: dict) -> "RationalMap":
        num = np.array([complex(a, b) for a, b in obj["num"]])
        den = np.array([complex(a, b) for a, b in obj["den"]])
        mk = tuple(complex(math.inf, 0) if v is None else complex(*v) for v in obj.get("marking", []))
        return cls(num, den, mk)

    @classmethod
    def from_blaschke(cls, f: MarkedBlaschke) -> "RationalMap":
        num, den = f.numerator(), f.denominator()
        lead = num[-1]
        return cls(num / lead, den / lead, tuple(f.marking))


def _padded(a: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([a, np.zeros(n - len(a), dtype=complex)])


def coefficient_distance(F: RationalMap, G: RationalMap) -> float:
    """Largest coefficient difference, shorter lists padded with zeros."""
    n = max(len(F.num), len(G.num), len(F.den), len(G.den))
    return float(
        max(
            np.abs(_padded(F.num, n) - _padded(G.num, n)).max(),
            np.abs(_padded(F.den, n) - _padded(G.den, n)).max(),
        )
    )


@dataclass
class MarkerData:
    julia_fixed: tuple[complex, ...]
    preimages_of_1: tuple[complex, ...]
    extra: tuple[complex, complex]

    def __post_init__(self):
        self.julia_fixed = tuple(complex(z) for z in self.julia_fixed)
        self.preimages_of_1 = tuple(complex(z) for z in self.preimages_of_1)
        self.extra = (complex(self.extra[0]), complex(self.extra[1]))
        if len(self.preimages_of_1) != len(self.julia_fixed) + 1:
            raise ValidationError("need d - 1 Julia fixed points and d preimages of 1")
        for pts in (self.julia_fixed, self.preimages_of_1):
            if min(abs(z - 1) for z in pts) > 1e-10:
                raise ValidationError("1 must appear among the markers")
            arr = np.array(pts)
            gaps = np.abs(arr[:, None] - arr[None, :]) + np.eye(len(arr))
            if gaps.min() < 1e-12:
                raise ValidationError("markers must be distinct")
        if any(z == 0 for z in self.julia_fixed):
            raise ValidationError("Julia fixed points must be nonzero")

    @property
    def d(self) -> int:
        return len(self.preimages_of_1)


def _divide_by_z_minus_1(c: np.ndarray):
    quot, rem = P.polydiv(c, np.array([-1.0, 1.0]))
    return quot, complex(rem[0]) if len(rem) else 0j


def _snap_to_one(pts):
    """Replace the marker closest to 1 by exactly 1."""
    pts = list(pts)
    i = int(np.argmin([abs(z - 1) for z in pts]))
    pts[i] = 1 + 0j
    return pts


def rational_from_markers(m: MarkerData) -> RationalMap:
    xi = _snap_to_one(m.julia_fixed)
    w = _snap_to_one(m.preimages_of_1)
    r = P.polyfromroots(w)
    k = P.polyfromroots([0j, *xi])
    z0, w0 = m.extra
    r0, k0 = P.polyval(z0, r), P.polyval(z0, k)
    # F(z0) = w0  <=>  z0 r0 - a k0 = w0 (r0 - a k0)
    coef = k0 * (w0 - 1)
    if abs(coef) < 1e-12:
        raise SingularScale("extra sample does not determine the scale")
    a = r0 * (w0 - z0) / coef
    p, rem_p = _divide_by_z_minus_1(P.polysub(P.polymulx(r), a * k))
    q, rem_q = _divide_by_z_minus_1(P.polysub(r, a * k))
    scale = max(1.0, float(np.abs(r).max()), float(np.abs(a * k).max()))
    if max(abs(rem_p), abs(rem_q)) > 1e-8 * scale:
        raise DivisionResidue(f"division by z - 1 leaves {max(abs(rem_p), abs(rem_q)):.2e}")
    marking = (0j, complex(math.inf, 0), *xi)
    return RationalMap(np.asarray(p, dtype=complex), np.asarray(q, dtype=complex), marking, {"a": a})


def markers_from_blaschke(f: MarkedBlaschke, z0: complex | None = None) -> MarkerData:
    """Markers of a Blaschke product from its own fixed points and preimages."""
    if z0 is None:
        z0 = 0.5 * np.exp(2j * np.pi * EXTRA_ANGLE)
    return MarkerData(tuple(f.marking[2:]), tuple(inverse_branches(f, 1.0)), (z0, evaluate(f, z0)))


# -- mating ----------------------------------------------------------------

def _segments_cross(pts: np.ndarray, tol: float = 1e-6) -> bool:
    """True if the closed polygon through pts self-intersects."""
    a = pts
    b = np.roll(pts, -1)
    n = len(pts)

    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    d1 = b - a
    # orientation tests for all pairs (i, j)
    o1 = cross(d1[:, None], a[None, :] - a[:, None])
    o2 = cross(d1[:, None], b[None, :] - a[:, None])
    o3 = cross(d1[None, :], a[:, None] - a[None, :])
    o4 = cross(d1[None, :], b[:, None] - a[None, :])
    hit = (o1 * o2 < -tol**2) & (o3 * o4 < -tol**2)
    idx = np.arange(n)
    near = (np.abs(idx[:, None] - idx[None, :]) <= 1) | (np.abs(idx[:, None] - idx[None, :]) == n - 1)
    return bool(np.any(hit & ~near))


def _mobius_normalize(p0: complex, pinf: complex):
    """Moebius map sending p0 -> 0, pinf -> infinity and fixing 1."""
    if not np.isfinite(pinf):
        return lambda w: (w - p0) / (1 - p0)
    return lambda w: (w - p0) / (w - pinf) * (1 - pinf) / (1 - p0)


@dataclass
class MateConfig:
    N: int = 512
    L: float = 4.0
    M: int = welding.DEFAULT_M
    extension: str = "de"
    circle_samples: int = 256

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(self.N, self.L)


def _extension(f: MarkedBlaschke, cfg: MateConfig):
    h = welding.circle_conjugacy(f, _monomial(f.d), M=cfg.M)
    ext = welding.extend_qc(h, cfg.extension, cfg.solver.grid)
    return h, welding.beltrami_of(ext)


def _monomial(d: int) -> MarkedBlaschke:
    from .moduli import make_standard

    return make_standard(d, [0j] * (d - 1))


def mate_markers(psi, d: int, p0: complex, pinf: complex, alpha: float = EXTRA_ANGLE) -> MarkerData:
    """Markers of Psi Q Psi^-1, with Q = z^d on the circle."""
    norm = _mobius_normalize(p0, pinf)
    jf = psi(np.exp(2j * np.pi * np.arange(d - 1) / (d - 1)))
    pre = psi(np.exp(2j * np.pi * np.arange(d) / d))
    ex = psi(np.exp(2j * np.pi * np.array([alpha, d * alpha])))
    return MarkerData(tuple(norm(jf)), tuple(norm(pre)), (norm(ex[0]), norm(ex[1])))


def fit_rational(u: np.ndarray, v: np.ndarray, d: int, passes: int = FIT_PASSES) -> tuple[RationalMap, float]:
    """Least-squares F = p/q of degree d with F(0) = 0, F(inf) = inf,
    F(1) = 1 and F(u) ~ v.

    p = z^d + sum_{1<=k<d} p_k z^k and q = sum_{k<d} q_k z^k with p(1) = q(1).
    The linear problem p(u) - v q(u) = 0 is reweighted by 1/|q(u)| on each
    pass, and by the chordal factor 1/(1 + |v|^2).  Returns the map and the
    largest chordal residual.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    wt = 1 / (1 + np.abs(v) ** 2)
    # unknowns p_1..p_{d-1}, q_1..q_{d-1}; q_0 = 1 + sum p_k - sum q_k
    A = np.empty((u.size, 2 * d - 2), dtype=complex)
    for k in range(1, d):
        A[:, k - 1] = u**k - v
        A[:, d - 2 + k] = -v * (u**k - 1)
    b = -(u**d) + v
    for _ in range(passes):
        x, *_ = np.linalg.lstsq(A * wt[:, None], b * wt, rcond=None)
        pk, qk = x[: d - 1], x[d - 1 :]
        num = np.concatenate([[0], pk, [1]]).astype(complex)
        den = np.concatenate([[1 + pk.sum() - qk.sum()], qk]).astype(complex)
        qv = np.abs(P.polyval(u, den))
        wt = 1 / (np.maximum(qv, 1e-300) * (1 + np.abs(v) ** 2))
    F = RationalMap(num, den)
    Fu = F(u)
    resid = float((np.abs(Fu - v) / np.sqrt((1 + np.abs(Fu) ** 2) * (1 + np.abs(v) ** 2))).max())
    return F, resid


def _model_pairs(h, g: MarkedBlaschke, method: str) -> tuple[np.ndarray, np.ndarray]:
    """Points z of the disk and G(z) = E^-1 g E(z), with E(z) on small
    circles around 0 so that both lie well inside."""
    x = np.concatenate(
        [r * np.exp(2j * np.pi * (np.arange(FIT_ANGLES) + 0.5 * i) / FIT_ANGLES) for i, r in enumerate(FIT_RADII)]
    )
    z = welding.extension_inverse(h, method, x)
    gz = welding.extension_inverse(h, method, evaluate(g, x))
    return z, gz


def _polish_rational_fixed(F: RationalMap, z: complex) -> complex:
    g = P.polysub(F.num, P.polymulx(F.den))
    dg = P.polyder(g)
    for _ in range(50):
        step = P.polyval(z, g) / P.polyval(z, dg)
        z -= step
        if abs(step) < 1e-15 * max(1, abs(z)):
            break
    return complex(z)


def mate(f: MarkedBlaschke, g: MarkedBlaschke, cfg: MateConfig | None = None) -> RationalMap:
    """Rational map whose Fatou components carry f (around 0) and
    conj(g) (around infinity)."""
    cfg = cfg or MateConfig()
    if f.d != g.d:
        raise ValidationError(f"degrees differ: {f.d} vs {g.d}")
    d = f.d
    hf, mu_f = _extension(f, cfg)
    if g.params == f.params:
        hg, mu_g = hf, mu_f
    else:
        hg, mu_g = _extension(g, cfg)
    sb = welding.mated_beltrami(mu_f, mu_g)
    if sb.k > K_MATE:
        raise ExcessDilatation(f"welding dilatation {sb.k:.3f} exceeds {K_MATE}")
    psi = solve_sphere_beltrami(sb, cfg.solver)
    z0 = welding.extension_inverse_origin(hf, cfg.extension)
    zi = welding.extension_inverse_origin(hg, cfg.extension)
    p0 = psi(z0)
    pinf = complex(math.inf, 0) if zi == 0 else psi(1 / np.conj(zi))
    ring = psi(np.exp(2j * np.pi * np.arange(cfg.circle_samples) / cfg.circle_samples))
    if not np.all(np.isfinite(ring)) or _segments_cross(ring):
        raise QuasicircleFail("pushed circle samples self-intersect")
    F0 = rational_from_markers(mate_markers(psi, d, p0, pinf))
    norm = _mobius_normalize(p0, pinf)
    zf, gzf = _model_pairs(hf, f, cfg.extension)
    if hg is hf:
        zg, gzg = zf, gzf
    else:
        zg, gzg = _model_pairs(hg, g, cfg.extension)
    u = norm(psi(np.concatenate([zf, 1 / np.conj(zg)])))
    v = norm(psi(np.concatenate([gzf, 1 / np.conj(gzg)])))
    F, resid = fit_rational(u, v, d)
    F.marking = (0j, complex(math.inf, 0), *(_polish_rational_fixed(F, z) for z in F0.marking[2:]))
    F.diagnostics.update(
        {
            "k": sb.k,
            "N": cfg.N,
            "L": cfg.L,
            "extension": cfg.extension,
            "fit_residual": resid,
            "marker_change": coefficient_distance(F, F0),
            "inner_report": psi.w1.report.to_json(),
            "outer_report": None if psi.w2 is None else psi.w2.report.to_json(),
            "multiplier_at_zero": _c(F.multiplier_at_zero()),
            "multiplier_at_infinity": _c(F.multiplier_at_infinity()),
        }
    )
    return F


def diagonal_symmetry(psi: SphereMap, n: int = 64) -> float:
    """max |Psi(1/conj z) - 1/conj Psi(z)| on a circle of radius 1/2."""
    z = 0.5 * np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)
    return float(np.abs(psi(1 / np.conj(z)) - 1 / np.conj(psi(z))).max())


# -- polynomial bridge -----------------------------------------------------

@dataclass
class PolynomialResult:
    coeffs: np.ndarray  # ascending, monic and centred
    attracting_fixed: complex
    multiplier: complex
    marking: tuple[complex, ...]
    residual: float
    interior_residual: float = 0.0

    def to_json(self) -> dict:
        return {
            "coeffs": [_c(c) for c in self.coeffs],
            "attracting_fixed": _c(self.attracting_fixed),
            "multiplier": _c(self.multiplier),
            "marking": [_c(z) for z in self.marking],
            "fit_residual": self.residual,
            "interior_residual": self.interior_residual,
        }


def _polish_fixed(coeffs: np.ndarray, z: complex) -> complex:
    g = P.polysub(coeffs, [0, 1])
    dg = P.polyder(g)
    for _ in range(50):
        step = P.polyval(z, g) / P.polyval(z, dg)
        z -= step
        if abs(step) < 1e-15 * max(1, abs(z)):
            break
    return complex(z)


def to_polynomial(f: MarkedBlaschke, cfg: MateConfig | None = None) -> PolynomialResult:
    """Polynomial Psi Q Psi^-1 where Psi solves the coefficient of the
    extended conjugacy on the disk (zero outside) and Q is the model map,
    z^d outside the disk and E^-1 f E inside.

    The coefficients are fitted on the conjugacy Q(z) -> Psi(Q(z)) at points
    around the attracting fixed point, away from the Julia set.
    """
    cfg = cfg or MateConfig()
    d = f.d
    h, mu = _extension(f, cfg)
    if mu.fn is not None:
        field_ = BeltramiField.piecewise(cfg.solver.grid, mu.fn)
    else:
        field_ = BeltramiField(mu.grid, welding._disk_restrict(mu))
    psi = solve_beltrami_map(field_, cfg.solver)
    # the outer conjugacy must be a degree-d polynomial: interpolation check
    zeta = OUTER_RHO * np.exp(2j * np.pi * (np.arange(d + 2) + 0.25) / (d + 2))
    A = np.vander(psi(zeta), d + 1, increasing=True)
    v = psi(zeta**d)
    c, *_ = np.linalg.lstsq(A, v, rcond=None)
    resid = float(np.abs(A @ c - v).max() / max(1.0, np.abs(v).max()))
    if resid > 1e-4:
        raise FitResidual(f"polynomial fit residual {resid:.2e} exceeds 1e-4")
    # coefficients from the interior conjugacy, where Psi is most accurate
    z, gz = _model_pairs(h, f, cfg.extension)
    A = np.vander(psi(z), d + 1, increasing=True)
    v = psi(gz)
    c, *_ = np.linalg.lstsq(A, v, rcond=None)
    inner_resid = float(np.abs(A @ c - v).max() / max(1.0, np.abs(v).max()))
    # w = s v + t with s^(d-1) = 1 / c_d and t = -c_{d-1} / (d c_d)
    s = complex(c[-1]) ** (-1.0 / (d - 1))
    t = -c[-2] / (d * c[-1])
    comp = np.array([0j])
    lin = np.array([t, s])
    pw = np.array([1 + 0j])
    for ck in c:
        comp = P.polyadd(comp, ck * pw)
        pw = P.polymul(pw, lin)
    comp = P.polysub(comp, [t])
    coeffs = np.asarray(comp / s, dtype=complex)
    coeffs[-1] = 1.0
    coeffs[-2] = 0.0
    to_v = lambda w: (w - t) / s  # noqa: E731
    z0 = welding.extension_inverse_origin(h, cfg.extension)
    att = _polish_fixed(coeffs, complex(to_v(psi(z0))))
    mult = complex(P.polyval(att, P.polyder(coeffs)))
    ring = psi(np.exp(2j * np.pi * np.arange(d - 1) / (d - 1)))
    marking = tuple(_polish_fixed(coeffs, complex(to_v(w))) for w in ring)
    return PolynomialResult(coeffs, att, mult, (att, *marking), resid, inner_resid)


# -- holomorphic index of iterates ------------------------------------------

def _compose(F: RationalMap, n: int):
    """Numerator and denominator of F^n."""
    p, q = F.num, F.den
    pn, qn = p.copy(), q.copy()
    d = F.d
    for _ in range(n - 1):
        powp = [np.array([1 + 0j])]
        powq = [np.array([1 + 0j])]
        for _ in range(d):
            powp.append(P.polymul(powp[-1], pn))
            powq.append(P.polymul(powq[-1], qn))
        newp = np.array([0j])
        newq = np.array([0j])
        for i in range(d + 1):
            term = P.polymul(powp[i], powq[d - i])
            if i < len(p):
                newp = P.polyadd(newp, p[i] * term)
            if i < len(q):
                newq = P.polyadd(newq, q[i] * term)
        pn, qn = newp, newq
    return pn, qn


def _homogeneous(F: RationalMap, z, n: int):
    """[X : Y] = F^n(z) with z-derivatives, from (X, Y) -> (p(X, Y), q(X, Y)).

    Each step is rescaled, so only scale-free ratios of the output mean anything.
    """
    d = F.d
    p = np.pad(F.num, (0, d + 1 - len(F.num)))
    q = np.pad(F.den, (0, d + 1 - len(F.den)))
    X = np.array(z, dtype=complex)
    Y, dX, dY = np.ones_like(X), np.ones_like(X), np.zeros_like(X)
    i = np.arange(d + 1)[:, None]
    for _ in range(n):
        Xi, Yi = X ** i, Y ** (d - i)
        dXi = i * X ** np.maximum(i - 1, 0) * dX
        dYi = (d - i) * Y ** np.maximum(d - i - 1, 0) * dY
        dterm = dXi * Yi + Xi * dYi
        X, Y = p @ (Xi * Yi), q @ (Xi * Yi)
        dX, dY = p @ dterm, q @ dterm
        s = np.maximum(np.abs(X), np.abs(Y))
        s = np.where(s > 0, s, 1.0)
        X, Y, dX, dY = X / s, Y / s, dX / s, dY / s
    return X, Y, dX, dY


def index_sum_check(F: RationalMap, n: int) -> float:
    """sum over fixed points of F^n of 1/(1 - lambda), minus 1."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    pn, qn = _compose(F, n)
    g = np.trim_zeros(P.polysub(pn, P.polymulx(qn)), "b")
    # the expanded coefficients only give starting points: fixed points of
    # the iterate crowd together and the monomial basis cannot separate them.
    # Aberth steps on X - zY evaluated through the recursion can.
    roots = P.polyroots(g)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(60):
            X, Y, dX, dY = _homogeneous(F, roots, n)
            ratio = (X - roots * Y) / (dX - Y - roots * dY)
            diff = roots[:, None] - roots[None, :]
            np.fill_diagonal(diff, np.inf)
            step = ratio / (1 - ratio * np.sum(1 / diff, axis=1))
            step = np.where(np.isfinite(step), step, 0)
            roots = roots - step
            if np.all(np.abs(step) <= 1e-15 * (1 + np.abs(roots))):
                break
        X, Y, dX, dY = _homogeneous(F, roots, n)
        lam = list((dX * Y - X * dY) / Y**2)
    # infinity: F^n(z) ~ (p_lead / q_lead) z there when deg q_n = deg p_n - 1
    ptr, qtr = np.trim_zeros(pn, "b"), np.trim_zeros(qn, "b")
    if len(ptr) == len(qtr) + 1:
        lam.append(qtr[-1] / ptr[-1])
    elif len(ptr) > len(qtr) + 1:
        lam.append(0j)
    lam = np.array(lam)
    if np.any(np.abs(lam - 1) < 1e-8):
        raise MultiplierNearOne("a fixed point of the iterate has multiplier 1")
    return float(abs(np.sum(1 / (1 - lam)) - 1))


def attracting_multiplier_pair(f: MarkedBlaschke) -> tuple[complex, complex]:
    return attracting_multipliers(f)
