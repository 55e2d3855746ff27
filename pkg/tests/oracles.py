"""Independent reference computations used by the tests.

Each oracle goes back to a definition (arc-length integrals, limits along rays,
direct minimisation) and avoids the closed forms it is checking wherever that
is practical.
"""

import math

import numpy as np
from scipy import integrate


def arc_length_dist(z, w):
    """Hyperbolic length of the geodesic arc from z to w by quadrature of |dz|/Im z."""
    if abs(z.real - w.real) < 1e-14:
        val, _ = integrate.quad(lambda y: 1.0 / y, min(z.imag, w.imag), max(z.imag, w.imag), epsabs=1e-13, epsrel=1e-13)
        return val
    # geodesic is the Euclidean circle centred on the real axis through z and w
    c = (abs(z) ** 2 - abs(w) ** 2) / (2.0 * (z.real - w.real))
    r = abs(z - c)
    a1 = math.atan2(z.imag, z.real - c)
    a2 = math.atan2(w.imag, w.real - c)
    lo, hi = sorted((a1, a2))
    # ds = r dphi, Im = r sin(phi)
    val, _ = integrate.quad(lambda p: 1.0 / math.sin(p), lo, hi, epsabs=1e-13, epsrel=1e-13)
    return val


def _closed_form_dist(z, w):
    return 2.0 * math.asinh(abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag)))


def ray_point(z, real_end, T):
    """Point at distance T from z along the ray toward the boundary point real_end
    (a float or math.inf), traced through the Euclidean circle picture."""
    if math.isinf(real_end):
        return complex(z.real, z.imag * math.exp(T))
    # circle through z orthogonal to the real axis with one foot at real_end
    c = (abs(z) ** 2 - real_end ** 2) / (2.0 * (z.real - real_end)) if abs(z.real - real_end) > 1e-15 else None
    if c is None:
        return complex(real_end, z.imag * math.exp(-T))
    r = abs(z - c)
    a0 = math.atan2(z.imag, z.real - c)
    a_end = 0.0 if real_end > c else math.pi
    # arc length from angle a0 to a: |log tan(a/2) - log tan(a0/2)|
    target = math.log(math.tan(a0 / 2.0)) + (T if a_end == math.pi else -T)
    a = 2.0 * math.atan(math.exp(target))
    return complex(c + r * math.cos(a), r * math.sin(a))


def busemann_limit(real_end, z, w, T=30.0):
    p = ray_point(z, real_end, T)
    return _closed_form_dist(p, z) - _closed_form_dist(p, w)


def golden_min(f, lo, hi, grid=400, tol=1e-14, max_iter=200):
    """Coarse grid, then golden-section search on the bracket around the best node."""
    xs = np.linspace(lo, hi, grid)
    vals = np.array([f(x) for x in xs])
    k = int(np.argmin(vals))
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, grid - 1)]
    r = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return float(x), float(f(x))


def geodesic_circle(a, b):
    """Euclidean centre and radius of the geodesic between real feet a, b (finite)."""
    return 0.5 * (a + b), 0.5 * abs(a - b)


def min_busemann_on_curve(xi_real, curve, lo, hi, x0=1j, grid=2000):
    """Minimise beta_xi(curve(s), x0) over s in [lo, hi]; beta by the limit oracle
    is too slow in the loop, so the explicit horocycle-height formula is used:
    beta_xi(z, x0) = log(|z - xi|^2 / Im z) - log(|x0 - xi|^2 / Im x0) (xi finite),
    or log(Im x0 / Im z) for xi = inf."""

    def beta(z):
        if math.isinf(xi_real):
            return math.log(x0.imag / z.imag)
        return math.log(abs(z - xi_real) ** 2 / z.imag) - math.log(abs(x0 - xi_real) ** 2 / x0.imag)

    f = lambda s: beta(curve(s))
    s, val = golden_min(f, lo, hi, grid=grid)
    return curve(s), val
