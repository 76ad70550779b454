"""Pure numpy versions of the hot loops.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or BLASCHKE_PURE_PYTHON is set.
"""

import numpy as np

_TWO_PI = 2 * np.pi


def lift(zeros, d, t):
    t = np.asarray(t, dtype=float)
    out = d * t
    w = np.exp(-1j * _TWO_PI * t)
    for a in zeros:
        out = out + (np.angle(1 - a * w) - np.angle(1 - a)) / np.pi
    return out


def lift_derivative(zeros, t):
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    c, s = np.cos(_TWO_PI * t), np.sin(_TWO_PI * t)
    # |z - a|^2 = 1 - 2 Re(conj(a) z) + |a|^2 on the circle, exact for a = 0
    for a in zeros:
        m = abs(a) ** 2
        out = out + (1 - m) / (1 - 2 * (a.real * c + a.imag * s) + m)
    return out


def inverse_lift(zeros, d, y):
    """Solve lift(t) = y for real t.

    Newton safeguarded by bisection: fall back to the bracket midpoint when
    the step leaves the bracket or fails to halve the previous step.
    """
    y = np.asarray(y, dtype=float)
    zeros = np.asarray(zeros, dtype=complex)
    t = y / d
    lo = (y - (d - 1)) / d
    hi = (y + (d - 1)) / d
    dx_old = hi - lo
    done = np.zeros(y.shape, dtype=bool)
    for _ in range(200):
        g = lift(zeros, d, t) - y
        lo = np.where(g < 0, np.maximum(lo, t), lo)
        hi = np.where(g > 0, np.minimum(hi, t), hi)
        tn = t - g / lift_derivative(zeros, t)
        dx = np.abs(tn - t)
        bad = (tn <= lo) | (tn >= hi) | (dx > 0.5 * dx_old)
        tn = np.where(bad, 0.5 * (lo + hi), tn)
        dx = np.abs(tn - t)
        dx_old = dx
        scale = np.maximum(1.0, np.abs(t))
        conv = (g == 0) | (dx <= 1e-15 * scale) | (hi - lo <= 1e-15 * scale)
        t = np.where(done | (g == 0), t, tn)
        done |= conv
        if np.all(done):
            break
    return t


def pullback(zeros, d, digits, seed):
    """Apply inverse branches along each row of ``digits``, deepest first.

    Row r encodes the itinerary j_0 j_1 ... j_{n-1}; the result is
    g_{j_0} o ... o g_{j_{n-1}}(seed) with g_j(s) = lift^{-1}(s + j).
    """
    digits = np.asarray(digits, dtype=np.int64)
    s = np.broadcast_to(np.asarray(seed, dtype=float), (digits.shape[0],)).copy()
    for k in range(digits.shape[1] - 1, -1, -1):
        s = inverse_lift(zeros, d, s + digits[:, k])
    return s


def de_barycenter(zeta, eta, points, xi0, max_iter=200, tol=1e-14):
    """Conformal barycenter of the push-forward of harmonic measure.

    ``zeta`` are quadrature nodes on the circle, ``eta`` the boundary values
    at those nodes.  For each point w the weights are the Poisson kernel at
    w; Newton iteration (real 2x2, written in Wirtinger form) solves
    sum p_k (eta_k - xi) / (1 - conj(xi) eta_k) = 0 for xi.
    Returns (xi, iterations); iterations == -1 flags divergence.
    """
    points = np.asarray(points, dtype=complex)
    xi = np.array(xi0, dtype=complex)
    iters = np.zeros(points.shape[0], dtype=np.int64)
    active = np.ones(points.shape[0], dtype=bool)
    n = zeta.shape[0]
    chunk = max(1, 2_000_000 // n)
    for start in range(0, points.shape[0], chunk):
        sl = slice(start, start + chunk)
        w = points[sl][:, None]
        p = (1 - np.abs(w) ** 2) / np.abs(zeta[None, :] - w) ** 2 / n
        x = xi[sl].copy()
        act = active[sl].copy()
        it = iters[sl].copy()
        for k in range(max_iter):
            if not act.any():
                break
            pa = p[act]
            xa = x[act][:, None]
            den = 1 - np.conj(xa) * eta[None, :]
            num = eta[None, :] - xa
            G = np.sum(pa * num / den, axis=1)
            A = -np.sum(pa / den, axis=1)
            B = np.sum(pa * num * eta[None, :] / den**2, axis=1)
            delta = (-np.conj(A) * G + B * np.conj(G)) / (np.abs(A) ** 2 - np.abs(B) ** 2)
            xo = x[act]
            xn = xo + delta
            lim = 0.5 * (1 + np.abs(xo))
            over = np.abs(xn) > lim
            if over.any():
                xn[over] = xo[over] + delta[over] * (
                    (lim[over] - np.abs(xo[over])) / np.abs(delta[over])
                )
            x[act] = xn
            idx = np.flatnonzero(act)
            conv = np.abs(delta) < tol
            it[idx] = k + 1
            act[idx[conv]] = False
        it[act] = -1
        xi[sl] = x
        iters[sl] = it
    return xi, iters


def de_dilatation(zeta, eta, points, xi, chunk_elems=2_000_000):
    """Beltrami coefficient of the barycentric extension at solved points.

    Implicit differentiation of G(xi, w) = sum p_k(w) T_k(xi) = 0 with
    T_k = (eta_k - xi) / (1 - conj(xi) eta_k):
    dG = A dxi + B dxi_bar + P_w dw + P_wbar dw_bar, and dp/dw = zeta/(zeta - w)^2.
    """
    points = np.asarray(points, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    n = zeta.shape[0]
    out = np.empty(points.shape[0], dtype=complex)
    step = max(1, chunk_elems // n)
    for s in range(0, points.shape[0], step):
        ww = points[s : s + step, None]
        xx = xi[s : s + step, None]
        p = (1 - np.abs(ww) ** 2) / np.abs(zeta[None, :] - ww) ** 2
        dp = zeta[None, :] / (zeta[None, :] - ww) ** 2
        den = 1 - np.conj(xx) * eta[None, :]
        T = (eta[None, :] - xx) / den
        A = -np.sum(p / den, axis=1)
        B = np.sum(p * T * eta[None, :] / den, axis=1)
        Pw = np.sum(dp * T, axis=1)
        Pwb = np.sum(np.conj(dp) * T, axis=1)
        xw = -np.conj(A) * Pw + B * np.conj(Pwb)
        xwb = -np.conj(A) * Pwb + B * np.conj(Pw)
        out[s : s + step] = xwb / xw
    return out


def poisson_mean(zeta, eta, points, chunk_elems=2_000_000):
    """Normalised Poisson average of eta at each point."""
    points = np.asarray(points, dtype=complex)
    out = np.empty(points.shape[0], dtype=complex)
    n = zeta.shape[0]
    step = max(1, chunk_elems // n)
    for s in range(0, points.shape[0], step):
        ww = points[s : s + step, None]
        p = 1 / np.abs(zeta[None, :] - ww) ** 2
        out[s : s + step] = (p @ eta) / p.sum(axis=1)
    return out
