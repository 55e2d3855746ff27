"""
Hot inner loops, each in a compiled (numba) and a pure-numpy version.

The public wrappers dispatch on the backend flag in _backend.  Both versions are
kept in step by tests/test_kernels.py.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import HAVE_NUMBA, njit, prange
from .hyperbolic import mat_mul

# ---------------------------------------------------------------------------
# integer matrices of a principal congruence subgroup inside a Frobenius ball
#
# Lists (a, b, c, d) in Z^4 with ad - bc = 1, a^2 + b^2 + c^2 + d^2 <= bound,
# matrix = +-I mod level, one sign representative (c > 0, or c = 0 and d = 1).


@njit(cache=True)
def _isqrt(n):
    if n <= 0:
        return 0
    r = int(math.sqrt(n))
    while r * r > n:
        r -= 1
    while (r + 1) * (r + 1) <= n:
        r += 1
    return r


@njit(cache=True)
def _egcd(a, b):
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b != 0:
        q = a // b
        a, b = b, a - q * b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


@njit(cache=True)
def _lattice_pass(bound, level, out, fill):
    cmax = _isqrt(bound)
    n = 0
    for c in range(0, cmax + 1):
        if c % level != 0:
            continue
        rem = bound - c * c
        dmax = _isqrt(rem)
        for d in range(-dmax, dmax + 1):
            if c == 0 and d != 1:
                continue
            dm = d % level
            if dm != 1 % level and dm != (level - 1) % level:
                continue
            g, x, y = _egcd(d, c)
            if g != 1 and g != -1:
                continue
            # x d + y c = g  ->  a0 d - b0 c = 1
            a0 = x * g
            b0 = -y * g
            if c == 0:
                # a = 1, any b with 1 + b^2 + 1 <= bound
                bmax = _isqrt(bound - 2)
                for b in range(-bmax, bmax + 1):
                    if b % level != 0:
                        continue
                    if fill:
                        out[n, 0] = 1
                        out[n, 1] = b
                        out[n, 2] = 0
                        out[n, 3] = 1
                    n += 1
                continue
            A = c * c + d * d
            B = a0 * c + b0 * d
            M = rem - d * d
            disc = A * M - 1
            if disc < 0:
                continue
            r = math.sqrt(disc)
            klo = int(math.floor((-B - r) / A)) - 1
            khi = int(math.ceil((-B + r) / A)) + 1
            for k in range(klo, khi + 1):
                a = a0 + k * c
                b = b0 + k * d
                if a * a + b * b > M:
                    continue
                if b % level != 0:
                    continue
                if fill:
                    out[n, 0] = a
                    out[n, 1] = b
                    out[n, 2] = c
                    out[n, 3] = d
                n += 1
    return n


def _lattice_nb(bound, level):
    dummy = np.zeros((1, 4), dtype=np.int64)
    n = _lattice_pass(bound, level, dummy, False)
    out = np.zeros((n, 4), dtype=np.int64)
    _lattice_pass(bound, level, out, True)
    return out


def _egcd_vec(a, b):
    a = a.copy()
    b = b.copy()
    x0 = np.ones_like(a)
    y0 = np.zeros_like(a)
    x1 = np.zeros_like(a)
    y1 = np.ones_like(a)
    while np.any(b != 0):
        nz = b != 0
        q = np.zeros_like(a)
        q[nz] = a[nz] // b[nz]
        a, b = np.where(nz, b, a), np.where(nz, a - q * b, b)
        x0, x1 = np.where(nz, x1, x0), np.where(nz, x0 - q * x1, x1)
        y0, y1 = np.where(nz, y1, y0), np.where(nz, y0 - q * y1, y1)
    return a, x0, y0


def _lattice_np(bound, level):
    rows = []
    bmax = math.isqrt(max(bound - 2, 0))
    b = np.arange(-bmax, bmax + 1, dtype=np.int64)
    b = b[b % level == 0]
    rows.append(np.stack([np.ones_like(b), b, np.zeros_like(b), np.ones_like(b)], axis=1))
    for c in range(level, math.isqrt(bound) + 1, level):
        rem = bound - c * c
        dmax = math.isqrt(rem)
        d = np.arange(-dmax, dmax + 1, dtype=np.int64)
        dm = d % level
        d = d[(dm == 1 % level) | (dm == (level - 1) % level)]
        cc = np.full_like(d, c)
        g, x, y = _egcd_vec(d, cc)
        ok = np.abs(g) == 1
        d, g, x, y, cc = d[ok], g[ok], x[ok], y[ok], cc[ok]
        a0 = x * g
        b0 = -y * g
        A = c * c + d * d
        B = a0 * c + b0 * d
        M = rem - d * d
        disc = A * M - 1
        ok = disc >= 0
        d, a0, b0, A, B, M, disc = d[ok], a0[ok], b0[ok], A[ok], B[ok], M[ok], disc[ok]
        r = np.sqrt(disc.astype(float))
        klo = np.floor((-B - r) / A).astype(np.int64) - 1
        khi = np.ceil((-B + r) / A).astype(np.int64) + 1
        span = khi - klo + 1
        idx = np.repeat(np.arange(len(d)), span)
        k = klo[idx] + (np.arange(len(idx)) - np.repeat(np.cumsum(span) - span, span))
        a = a0[idx] + k * c
        bb = b0[idx] + k * d[idx]
        keep = (a * a + bb * bb <= M[idx]) & (bb % level == 0)
        rows.append(np.stack([a[keep], bb[keep], np.full(int(keep.sum()), c, dtype=np.int64), d[idx][keep]], axis=1))
    return np.concatenate(rows).astype(np.int64)


def congruence_lattice(bound: int, level: int) -> np.ndarray:
    """Integer matrices of Gamma(level) with squared Frobenius norm <= bound."""
    if HAVE_NUMBA:
        return _lattice_nb(int(bound), int(level))
    return _lattice_np(int(bound), int(level))


# ---------------------------------------------------------------------------
# strong-stable conditional masses
#
# For each normal vector w (forward endpoint wp, backward endpoint wm, log scale
# beta_wp(pi w, x0)) sum, over boundary atoms k != wp inside an angular window,
#     weight_k * exp(delta * log_scale) / d0(theta_k, wp)^(2 delta)
# restricted to the Hamenstadt ball of radius R about w.  Visual distances use
# d0(a, b) = |sin((a - b)/2)| q(a) q(b).

_SAME_TOL = 1e-12


@njit(cache=True, parallel=True, fastmath=True)
def _ss_mass_nb(wp, wm, log_scale, q_wp, q_wm, R, a_c, a_s, a_fac, delta):
    # a_c, a_s: cos and sin of half the atom angles; a_fac = weight * q^(-2 delta)
    n = wp.shape[0]
    m = a_c.shape[0]
    out = np.zeros(n)
    for i in prange(n):
        cp, sp = math.cos(0.5 * wp[i]), math.sin(0.5 * wp[i])
        cm, sm = math.cos(0.5 * wm[i]), math.sin(0.5 * wm[i])
        d_wmwp = abs(sm * cp - cm * sp) * q_wm[i] * q_wp[i]
        # ball test |sin(a - wm)| * K < |sin(a - wp)|
        K = math.exp(log_scale[i]) * q_wm[i] / (R * q_wp[i] * d_wmwp) if R < np.inf else 0.0
        pre = math.exp(delta * log_scale[i]) * q_wp[i] ** (-2.0 * delta)
        acc = 0.0
        for k in range(m):
            s_kp = abs(a_s[k] * cp - a_c[k] * sp)
            if s_kp <= 0.5 * _SAME_TOL:
                continue
            if K > 0.0 and abs(a_s[k] * cm - a_c[k] * sm) * K >= s_kp:
                continue
            acc += a_fac[k] * math.exp(-2.0 * delta * math.log(s_kp))
        out[i] = acc * pre
    return out


def _ss_mass_np(wp, wm, log_scale, q_wp, q_wm, R, a_c, a_s, a_fac, delta, block=256):
    out = np.zeros(len(wp))
    for s in range(0, len(wp), block):
        sl = slice(s, s + block)
        cp, sp = np.cos(0.5 * wp[sl, None]), np.sin(0.5 * wp[sl, None])
        s_kp = np.abs(a_s[None, :] * cp - a_c[None, :] * sp)
        ok = s_kp > 0.5 * _SAME_TOL
        s_kp = np.where(ok, s_kp, 1.0)
        if np.isfinite(R):
            cm, sm = np.cos(0.5 * wm[sl, None]), np.sin(0.5 * wm[sl, None])
            d_wmwp = np.abs(sm * cp - cm * sp) * q_wm[sl, None] * q_wp[sl, None]
            K = np.exp(log_scale[sl, None]) * q_wm[sl, None] / (R * q_wp[sl, None] * d_wmwp)
            ok &= np.abs(a_s[None, :] * cm - a_c[None, :] * sm) * K < s_kp
        terms = a_fac[None, :] * s_kp ** (-2.0 * delta)
        pre = np.exp(delta * log_scale[sl]) * q_wp[sl] ** (-2.0 * delta)
        out[sl] = pre * np.sum(np.where(ok, terms, 0.0), axis=1)
    return out


def ss_mass(wp, wm, log_scale, q_wp, q_wm, R, a_theta, a_weight, a_q, delta, lo=0.0, width=2.0 * math.pi):
    """Strong-stable conditional mass of a Hamenstadt ball, one value per vector.

    Only atoms in the window [lo, lo + width) (counter-clockwise) contribute."""
    a_theta = np.asarray(a_theta, dtype=float)
    keep = np.ones(len(a_theta), bool)
    if width < 2.0 * math.pi:
        keep = np.mod(a_theta - lo, 2.0 * math.pi) < width
    a_c = np.ascontiguousarray(np.cos(0.5 * a_theta[keep]))
    a_s = np.ascontiguousarray(np.sin(0.5 * a_theta[keep]))
    a_fac = np.ascontiguousarray(np.asarray(a_weight, dtype=float)[keep] * np.asarray(a_q, dtype=float)[keep] ** (-2.0 * delta))
    args = [np.ascontiguousarray(x, dtype=float) for x in (wp, wm, log_scale, q_wp, q_wm)]
    if HAVE_NUMBA:
        return _ss_mass_nb(*args, float(R), a_c, a_s, a_fac, float(delta))
    return _ss_mass_np(*args, float(R), a_c, a_s, a_fac, float(delta))


# ---------------------------------------------------------------------------
# folding into a Dirichlet domain
#
# Walls are the bisectors between x0 and g x0 for the listed g.  A point on the
# far side of some wall is moved by g^{-1}, choosing the violated orbit point
# nearest to it (lowest index on ties).  d(x0, z) strictly decreases.

FOLD_OK, FOLD_CAP, FOLD_STEPS = 0, 1, 2


@njit(cache=True)
def _apply_inv(g, F):
    # g^{-1} = (d, -b, -c, a)
    a, b, c, d = g[3], -g[1], -g[2], g[0]
    return (a * F[0] + b * F[2], a * F[1] + b * F[3], c * F[0] + d * F[2], c * F[1] + d * F[3])


@njit(cache=True, parallel=True)
def _fold_nb(frames, gam, walls, ox, oy, x0x, x0y, cap_cosh, max_steps, out, out_g, steps, status, margin):
    n = frames.shape[0]
    m = walls.shape[0]
    for i in prange(n):
        F0, F1, F2, F3 = frames[i, 0], frames[i, 1], frames[i, 2], frames[i, 3]
        G0, G1, G2, G3 = gam[i, 0], gam[i, 1], gam[i, 2], gam[i, 3]
        st = FOLD_OK
        k_used = 0
        while True:
            den = F2 * F2 + F3 * F3
            zx = (F0 * F2 + F1 * F3) / den
            zy = 1.0 / den
            q0 = ((zx - x0x) ** 2 + (zy - x0y) ** 2) / x0y
            if k_used == 0 and 1.0 + q0 / (2.0 * zy) > cap_cosh:
                st = FOLD_CAP
                break
            best = -1
            qb = q0
            for k in range(m):
                qk = ((zx - ox[k]) ** 2 + (zy - oy[k]) ** 2) / oy[k]
                if qk < qb * (1.0 - 1e-13):
                    qb = qk
                    best = k
            if best < 0:
                # distance to the nearest wall in the same ratio form
                mg = np.inf
                for k in range(m):
                    qk = ((zx - ox[k]) ** 2 + (zy - oy[k]) ** 2) / oy[k]
                    r = (qk - q0) / (q0 + 1e-300)
                    if r < mg:
                        mg = r
                margin[i] = mg
                break
            if k_used >= max_steps:
                st = FOLD_STEPS
                break
            F = _apply_inv(walls[best], (F0, F1, F2, F3))
            F0, F1, F2, F3 = F[0], F[1], F[2], F[3]
            Gn = _apply_inv(walls[best], (G0, G1, G2, G3))
            G0, G1, G2, G3 = Gn[0], Gn[1], Gn[2], Gn[3]
            k_used += 1
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = F0, F1, F2, F3
        out_g[i, 0], out_g[i, 1], out_g[i, 2], out_g[i, 3] = G0, G1, G2, G3
        steps[i] = k_used
        status[i] = st


def _fold_np(frames, gam, walls, ox, oy, x0x, x0y, cap_cosh, max_steps):
    F = frames.copy()
    G = gam.copy()
    n = len(F)
    steps = np.zeros(n, dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    margin = np.full(n, np.inf)
    den = F[:, 2] ** 2 + F[:, 3] ** 2
    zx, zy = (F[:, 0] * F[:, 2] + F[:, 1] * F[:, 3]) / den, 1.0 / den
    q0 = ((zx - x0x) ** 2 + (zy - x0y) ** 2) / x0y
    status[1.0 + q0 / (2.0 * zy) > cap_cosh] = FOLD_CAP
    active = status == FOLD_OK
    winv = np.stack([walls[:, 3], -walls[:, 1], -walls[:, 2], walls[:, 0]], axis=1)
    while np.any(active):
        idx = np.nonzero(active)[0]
        f = F[idx]
        den = f[:, 2] ** 2 + f[:, 3] ** 2
        zx, zy = (f[:, 0] * f[:, 2] + f[:, 1] * f[:, 3]) / den, 1.0 / den
        q0 = ((zx - x0x) ** 2 + (zy - x0y) ** 2) / x0y
        qk = ((zx[:, None] - ox[None, :]) ** 2 + (zy[:, None] - oy[None, :]) ** 2) / oy[None, :]
        viol = qk < (q0 * (1.0 - 1e-13))[:, None]
        any_v = viol.any(axis=1)
        done = idx[~any_v]
        margin[done] = np.min((qk[~any_v] - q0[~any_v, None]) / (q0[~any_v, None] + 1e-300), axis=1)
        active[done] = False
        idx, qk, viol = idx[any_v], qk[any_v], viol[any_v]
        over = steps[idx] >= max_steps
        status[idx[over]] = FOLD_STEPS
        active[idx[over]] = False
        idx, qk, viol = idx[~over], qk[~over], viol[~over]
        best = np.argmin(np.where(viol, qk, np.inf), axis=1)
        F[idx] = mat_mul(winv[best], F[idx])
        G[idx] = mat_mul(winv[best], G[idx])
        steps[idx] += 1
    return F, G, steps, status, margin


def fold_frames(frames, walls, x0, cap, max_steps=1000):
    """Fold frames into the domain cut out by the walls of the listed elements.

    Returns (folded frames, accumulated isometries, step counts, status codes,
    relative wall margins)."""
    frames = np.ascontiguousarray(frames, dtype=float).reshape(-1, 4)
    walls = np.ascontiguousarray(walls, dtype=float).reshape(-1, 4)
    n = len(frames)
    gam = np.tile(np.array([1.0, 0.0, 0.0, 1.0]), (n, 1))
    o = (walls[:, 0] * x0 + walls[:, 1]) / (walls[:, 2] * x0 + walls[:, 3])
    ox, oy = np.ascontiguousarray(o.real), np.ascontiguousarray(o.imag)
    cap_cosh = math.cosh(cap)
    if HAVE_NUMBA:
        out = np.empty_like(frames)
        out_g = np.empty_like(frames)
        steps = np.zeros(n, dtype=np.int64)
        status = np.zeros(n, dtype=np.int64)
        margin = np.full(n, np.inf)
        _fold_nb(frames, gam, walls, ox, oy, float(x0.real), float(x0.imag), cap_cosh, int(max_steps),
                 out, out_g, steps, status, margin)
        return out, out_g, steps, status, margin
    return _fold_np(frames, gam, walls, ox, oy, float(x0.real), float(x0.imag), cap_cosh, int(max_steps))
