"""Independent oracles shared by the test modules.

Everything here is deliberately primitive (plain bisection, direct sums) so
it cannot share a failure mode with the spectral implementation it checks.
"""

import math

import numpy as np


def bisect(fn, lo, hi, tol=1e-13, max_iter=200):
    """Plain bisection for a bracketed sign change."""
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    assert flo * fhi < 0, f"no sign change on [{lo}, {hi}]"
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid)
        if fmid == 0.0 or hi - lo < tol:
            return mid
        if flo * fmid < 0:
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def dispersion_value(n, lam, beta, g, A, B, sigma, h):
    """D(n, lambda, beta) written out independently of the package."""
    t = math.tanh(n * h) / n
    return -2.0 * (lam * lam / t - beta * lam - g * A * h * lam
                   - (g * B + sigma * n * n))


def dispersion_roots_by_scan(n, beta, g, A, B, sigma, h, span=None,
                             samples=30000):
    """Both roots of D(n, ., beta) found by scan plus bisection."""
    if span is None:
        span = 2.0 * abs(beta + A * g * h) + 60.0
    grid = np.linspace(-span, span, samples)
    vals = np.array([dispersion_value(n, lam, beta, g, A, B, sigma, h)
                     for lam in grid])
    roots = []
    for j in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(bisect(
            lambda lam: dispersion_value(n, lam, beta, g, A, B, sigma, h),
            grid[j], grid[j + 1]))
    assert len(roots) == 2, f"expected two roots, found {roots}"
    return sorted(roots)


def collision_beta_by_bisection(n, m, g, B, sigma, h, span=(1e-3, 1e4)):
    """Positive head offset where the mode-n and mode-m root families collide.

    Finds c > 0 with a common root of D(n, ., c) and D(m, ., c) by bisecting
    the gap between the closest root pair.
    """
    def gap(c):
        rn = dispersion_roots_by_scan(n, c, g, 0.0, B, sigma, h)
        rm = dispersion_roots_by_scan(m, c, g, 0.0, B, sigma, h)
        gaps = [rn[0] - rm[0], rn[1] - rm[1]]
        return gaps[int(np.argmin(np.abs(gaps)))]

    return bisect(gap, span[0], span[1], tol=1e-10)


def quadrature_cosine_coefficient(values, n):
    """(1/pi) integral f cos(nx) dx by the trapezoid rule on a uniform grid."""
    m = values.shape[0]
    x = 2.0 * np.pi * np.arange(m) / m
    if n == 0:
        return float(np.mean(values))
    return float(2.0 * np.mean(values * np.cos(n * x)))
