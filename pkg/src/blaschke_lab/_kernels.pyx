# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; mirrors blaschke_lab._pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, cos, sin, sqrt, fabs, M_PI

cnp.import_array()


cdef inline double _lift(double[::1] are, double[::1] aim, double[::1] base,
                         int d, double t) noexcept nogil:
    cdef double out = d * t
    cdef double c = cos(2 * M_PI * t), s = -sin(2 * M_PI * t)
    cdef double re, im
    cdef Py_ssize_t i
    for i in range(are.shape[0]):
        # 1 - a e^{-2 pi i t}
        re = 1 - (are[i] * c - aim[i] * s)
        im = -(are[i] * s + aim[i] * c)
        out += (atan2(im, re) - base[i]) / M_PI
    return out


cdef inline double _lift_derivative(double[::1] are, double[::1] aim,
                                    double t) noexcept nogil:
    cdef double out = 1.0
    cdef double c = cos(2 * M_PI * t), s = sin(2 * M_PI * t)
    cdef double m
    cdef Py_ssize_t i
    # |z - a|^2 = 1 - 2 Re(conj(a) z) + |a|^2 on the circle, exact for a = 0
    for i in range(are.shape[0]):
        m = are[i] * are[i] + aim[i] * aim[i]
        out += (1 - m) / (1 - 2 * (are[i] * c + aim[i] * s) + m)
    return out


cdef inline double _inverse_lift(double[::1] are, double[::1] aim, double[::1] base,
                                 int d, double y) noexcept nogil:
    # Newton safeguarded by bisection (fall back when the step leaves the
    # bracket or fails to halve the previous step)
    cdef double t = y / d
    cdef double lo = (y - (d - 1)) / d, hi = (y + (d - 1)) / d
    cdef double g, tn, scale, dx_old = hi - lo, dx
    cdef int k
    for k in range(200):
        g = _lift(are, aim, base, d, t) - y
        if g == 0:
            return t
        if g < 0:
            lo = t if t > lo else lo
        else:
            hi = t if t < hi else hi
        tn = t - g / _lift_derivative(are, aim, t)
        dx = fabs(tn - t)
        if tn <= lo or tn >= hi or dx > 0.5 * dx_old:
            tn = 0.5 * (lo + hi)
            dx = fabs(tn - t)
        dx_old = dx
        scale = fabs(t) if fabs(t) > 1.0 else 1.0
        if dx <= 1e-15 * scale or hi - lo <= 1e-15 * scale:
            return tn
        t = tn
    return t


def _split(zeros):
    z = np.ascontiguousarray(np.asarray(zeros, dtype=complex))
    are = np.ascontiguousarray(z.real, dtype=float)
    aim = np.ascontiguousarray(z.imag, dtype=float)
    base = np.ascontiguousarray(np.angle(1 - z), dtype=float)
    return are, aim, base


def lift(zeros, int d, t):
    are, aim, base = _split(zeros)
    tt = np.ascontiguousarray(np.atleast_1d(np.asarray(t, dtype=float)).ravel())
    out = np.empty_like(tt)
    cdef double[::1] tv = tt, ov = out, ar = are, ai = aim, ba = base
    cdef Py_ssize_t i
    with nogil:
        for i in range(tv.shape[0]):
            ov[i] = _lift(ar, ai, ba, d, tv[i])
    return out.reshape(np.shape(t))


def lift_derivative(zeros, t):
    are, aim, base = _split(zeros)
    tt = np.ascontiguousarray(np.atleast_1d(np.asarray(t, dtype=float)).ravel())
    out = np.empty_like(tt)
    cdef double[::1] tv = tt, ov = out, ar = are, ai = aim
    cdef Py_ssize_t i
    with nogil:
        for i in range(tv.shape[0]):
            ov[i] = _lift_derivative(ar, ai, tv[i])
    return out.reshape(np.shape(t))


def inverse_lift(zeros, int d, y):
    are, aim, base = _split(zeros)
    yy = np.ascontiguousarray(np.atleast_1d(np.asarray(y, dtype=float)).ravel())
    out = np.empty_like(yy)
    cdef double[::1] yv = yy, ov = out, ar = are, ai = aim, ba = base
    cdef Py_ssize_t i
    with nogil:
        for i in range(yv.shape[0]):
            ov[i] = _inverse_lift(ar, ai, ba, d, yv[i])
    return out.reshape(np.shape(y))


def pullback(zeros, int d, digits, seed):
    are, aim, base = _split(zeros)
    dg = np.ascontiguousarray(np.asarray(digits, dtype=np.int64))
    sd = np.array(np.broadcast_to(np.asarray(seed, dtype=float), (dg.shape[0],)), dtype=float)
    cdef double[::1] sv = sd
    cdef long long[:, ::1] dv = dg
    out = np.empty(dg.shape[0], dtype=float)
    cdef double[::1] ov = out, ar = are, ai = aim, ba = base
    cdef Py_ssize_t r, k
    cdef double s
    with nogil:
        for r in range(dv.shape[0]):
            s = sv[r]
            for k in range(dv.shape[1] - 1, -1, -1):
                s = _inverse_lift(ar, ai, ba, d, s + dv[r, k])
            ov[r] = s
    return out


def de_barycenter(zeta, eta, points, xi0, int max_iter=200, double tol=1e-14):
    zt = np.ascontiguousarray(np.asarray(zeta, dtype=complex))
    et = np.ascontiguousarray(np.asarray(eta, dtype=complex))
    pt = np.ascontiguousarray(np.asarray(points, dtype=complex))
    xs = np.ascontiguousarray(np.array(xi0, dtype=complex))
    cdef double[::1] zr = np.ascontiguousarray(zt.real), zi = np.ascontiguousarray(zt.imag)
    cdef double[::1] er = np.ascontiguousarray(et.real), ei = np.ascontiguousarray(et.imag)
    cdef double[::1] pr = np.ascontiguousarray(pt.real), pi_ = np.ascontiguousarray(pt.imag)
    xr_a = np.ascontiguousarray(xs.real)
    xi_a = np.ascontiguousarray(xs.imag)
    cdef double[::1] xr = xr_a, xim = xi_a
    iters = np.zeros(pt.shape[0], dtype=np.int64)
    cdef long long[::1] itv = iters
    cdef Py_ssize_t n = zr.shape[0], j, k
    cdef int it
    cdef double wr, wi, w2, p, dx, dy, xr0, xi0_, Gr, Gi, Ar, Ai, Br, Bi
    cdef double dr, di, nr, ni, qr, qi, q2, tr, ti, t2r, t2i, det, delr, deli
    cdef double ab, lim, scale, inv_n = 1.0 / n
    with nogil:
        for j in range(pr.shape[0]):
            wr = pr[j]
            wi = pi_[j]
            w2 = 1 - (wr * wr + wi * wi)
            xr0 = xr[j]
            xi0_ = xim[j]
            itv[j] = -1
            for it in range(max_iter):
                Gr = 0; Gi = 0; Ar = 0; Ai = 0; Br = 0; Bi = 0
                for k in range(n):
                    dx = zr[k] - wr
                    dy = zi[k] - wi
                    p = w2 / (dx * dx + dy * dy) * inv_n
                    # den = 1 - conj(xi) eta
                    dr = 1 - (xr0 * er[k] + xi0_ * ei[k])
                    di = -(xr0 * ei[k] - xi0_ * er[k])
                    q2 = dr * dr + di * di
                    # 1/den
                    qr = dr / q2
                    qi = -di / q2
                    # num = eta - xi
                    nr = er[k] - xr0
                    ni = ei[k] - xi0_
                    # num/den
                    tr = nr * qr - ni * qi
                    ti = nr * qi + ni * qr
                    Gr += p * tr
                    Gi += p * ti
                    Ar -= p * qr
                    Ai -= p * qi
                    # num * eta / den^2 = (num/den) * eta * (1/den)
                    t2r = tr * er[k] - ti * ei[k]
                    t2i = tr * ei[k] + ti * er[k]
                    Br += p * (t2r * qr - t2i * qi)
                    Bi += p * (t2r * qi + t2i * qr)
                det = Ar * Ar + Ai * Ai - Br * Br - Bi * Bi
                # delta = (-conj(A) G + B conj(G)) / det
                delr = (-(Ar * Gr + Ai * Gi) + (Br * Gr + Bi * Gi)) / det
                deli = (-(Ar * Gi - Ai * Gr) + (Bi * Gr - Br * Gi)) / det
                ab = sqrt((xr0 + delr) * (xr0 + delr) + (xi0_ + deli) * (xi0_ + deli))
                lim = 0.5 * (1 + sqrt(xr0 * xr0 + xi0_ * xi0_))
                if ab > lim:
                    scale = (lim - sqrt(xr0 * xr0 + xi0_ * xi0_)) / sqrt(delr * delr + deli * deli)
                    delr *= scale
                    deli *= scale
                xr0 += delr
                xi0_ += deli
                if sqrt(delr * delr + deli * deli) < tol:
                    itv[j] = it + 1
                    break
            xr[j] = xr0
            xim[j] = xi0_
    return xr_a + 1j * xi_a, iters


def de_dilatation(zeta, eta, points, xi):
    zt = np.ascontiguousarray(np.asarray(zeta, dtype=complex))
    et = np.ascontiguousarray(np.asarray(eta, dtype=complex))
    pt = np.ascontiguousarray(np.asarray(points, dtype=complex))
    xs = np.ascontiguousarray(np.asarray(xi, dtype=complex))
    cdef double complex[::1] zv = zt, ev = et, pv = pt, xv = xs
    out = np.empty(pt.shape[0], dtype=complex)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t n = zv.shape[0], j, k
    cdef double complex w, x, xc, den, T, A, B, Pw, Pwb, dp, dz, xw, xwb
    cdef double p, w2
    with nogil:
        for j in range(pv.shape[0]):
            w = pv[j]
            x = xv[j]
            xc = x.conjugate()
            w2 = 1 - (w.real * w.real + w.imag * w.imag)
            A = 0; B = 0; Pw = 0; Pwb = 0
            for k in range(n):
                dz = zv[k] - w
                p = w2 / (dz.real * dz.real + dz.imag * dz.imag)
                dp = zv[k] / (dz * dz)
                den = 1 - xc * ev[k]
                T = (ev[k] - x) / den
                A = A - p / den
                B = B + p * T * ev[k] / den
                Pw = Pw + dp * T
                Pwb = Pwb + dp.conjugate() * T
            xw = -A.conjugate() * Pw + B * Pwb.conjugate()
            xwb = -A.conjugate() * Pwb + B * Pw.conjugate()
            ov[j] = xwb / xw
    return out


def poisson_mean(zeta, eta, points):
    zt = np.ascontiguousarray(np.asarray(zeta, dtype=complex))
    et = np.ascontiguousarray(np.asarray(eta, dtype=complex))
    pt = np.ascontiguousarray(np.asarray(points, dtype=complex))
    cdef double complex[::1] zv = zt, ev = et, pv = pt
    out = np.empty(pt.shape[0], dtype=complex)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t n = zv.shape[0], j, k
    cdef double complex w, dz, acc
    cdef double p, tot
    with nogil:
        for j in range(pv.shape[0]):
            w = pv[j]
            acc = 0
            tot = 0
            for k in range(n):
                dz = zv[k] - w
                p = 1.0 / (dz.real * dz.real + dz.imag * dz.imag)
                acc = acc + p * ev[k]
                tot = tot + p
            ov[j] = acc / tot
    return out
