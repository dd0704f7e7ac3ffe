"""Governing residual of the steady-wave problem, its Jacobian, and admissibility.

Two algebraically equivalent assemblies are kept deliberately separate:

* ``assemble_residual`` works on the zero-mean perturbation ``w = v - h`` with
  parameters ``(lambda, beta, mu)``.  The square of the flux bracket is
  expanded about the flat state before evaluation, which removes the large
  ``lambda^2 - lambda^2`` cancellation and makes the residual vanish to
  machine zero on the laminar branch.
* ``assemble_residual_raw`` evaluates the surface equation directly in the
  physical variables ``(v, Q, m)`` with no such regrouping.  It is the
  independent cross-check for the first form.

Both project the pointwise result onto cosine modes 0..N, evaluating all
nonlinear terms on a grid of at least 8N points so that the degree-6
polynomial part is alias-free in the retained band.
"""

import numpy as np
from shapely.geometry import LineString

from .errors import (DegeneracyError, MeanError, ParameterError,
                     PositivityError, SymmetryError)
from .spectral import (CosineSpectrum, PeriodicField, cosine_coefficients,
                       derivative_samples, from_spectrum, grid_nodes,
                       hilbert_samples, mean, resample_samples)

GRADIENT_FLOOR = 1e-8   # on v'^2 + (1 + C_h v')^2
MEAN_CONSTRAINT_TOL = 1e-10
DEALIAS_RATIO = 8       # evaluation grid >= 8N keeps degree-6 terms alias-free


class PhysicalParams:
    """Gravity g, stratification slope A, reference density B, surface tension
    sigma and conformal mean depth h (the density law is rho = -A psi + B)."""

    __slots__ = ("g", "A", "B", "sigma", "h")

    def __init__(self, g=9.8, A=0.0, B=1.0, sigma=0.1, h=1.0):
        if g <= 0:
            raise ParameterError(f"gravity must be positive, got {g}")
        if B <= 0:
            raise ParameterError(f"reference density must be positive, got {B}")
        if sigma < 0:
            raise ParameterError(f"surface tension must be >= 0, got {sigma}")
        if h <= 0:
            raise ParameterError(f"conformal depth must be positive, got {h}")
        self.g = float(g)
        self.A = float(A)
        self.B = float(B)
        self.sigma = float(sigma)
        self.h = float(h)

    def __repr__(self):
        return (f"PhysicalParams(g={self.g}, A={self.A}, B={self.B}, "
                f"sigma={self.sigma}, h={self.h})")


class WaveState:
    """A point (lambda, beta, mu, w) with w the zero-mean even perturbation."""

    __slots__ = ("lam", "beta", "mu", "w")

    def __init__(self, lam, beta, mu, w):
        if abs(mean(w)) >= MEAN_CONSTRAINT_TOL * max(1.0, w.max_abs()):
            raise MeanError(f"perturbation must have zero mean, got {mean(w):.3e}")
        self.lam = float(lam)
        self.beta = float(beta)
        self.mu = float(mu)
        self.w = w

    @classmethod
    def trivial(cls, lam, beta, grid_size=512):
        return cls(lam, beta, 0.0, PeriodicField.zeros(grid_size))

    @property
    def grid_size(self):
        return self.w.grid_size

    def surface(self, params):
        """v = h + w."""
        return PeriodicField(params.h + self.w.samples)

    def amplitude(self):
        return self.w.max_abs()

    def __repr__(self):
        return (f"WaveState(lam={self.lam:.6g}, beta={self.beta:.6g}, "
                f"mu={self.mu:.3g}, amp={self.amplitude():.3g})")


class DerivedQuantities:
    """Bernoulli constant Q and relative mass flux m of a state."""

    __slots__ = ("Q", "m")

    def __init__(self, Q, m):
        self.Q = float(Q)
        self.m = float(m)


def flux_from_lambda(lam, beta, params):
    """m = h (lambda - beta h / 2 - g A h^2 / 3)."""
    h = params.h
    return h * (lam - beta * h / 2 - params.g * params.A * h * h / 3)


def lambda_from_flux(m, beta, params):
    h = params.h
    return m / h + beta * h / 2 + params.g * params.A * h * h / 3


def bernoulli_from_mu(mu, lam, params):
    """Q = mu + 2 g B h + lambda^2."""
    return mu + 2 * params.g * params.B * params.h + lam * lam


def derived_quantities(state, params):
    return DerivedQuantities(
        bernoulli_from_mu(state.mu, state.lam, params),
        flux_from_lambda(state.lam, state.beta, params),
    )


def _eval_grid(grid_size, n_modes):
    m = grid_size
    while m < DEALIAS_RATIO * n_modes:
        m *= 2
    return m


def _residual_values(w, lam, beta, mu, params, m_eval):
    """Residual samples on the evaluation grid, grouped about the flat state."""
    g, A, B, sigma, h = params.g, params.A, params.B, params.sigma, params.h
    ws = resample_samples(w.samples, m_eval) if m_eval != w.grid_size else w.samples
    wp = derivative_samples(ws, 1)
    wpp = derivative_samples(ws, 2)
    c_wp = hilbert_samples(wp, h)
    c_wpp = hilbert_samples(wpp, h)
    wwp = ws * wp
    w2wp = ws * wwp
    c_wwp = hilbert_samples(wwp - wwp.mean(), h)
    c_w2wp = hilbert_samples(w2wp - w2wp.mean(), h)
    mean_w2 = float(np.mean(ws * ws))
    mean_w3 = float(np.mean(ws * ws * ws))

    s1 = mean_w2 / (2 * h) - ws + c_wwp - ws * c_wp
    s2 = (mean_w3 / (3 * h) + mean_w2 - ws * ws - 2 * h * ws + c_w2wp
          - ws * ws * c_wp + 2 * h * c_wwp - 2 * h * ws * c_wp)
    p = -beta * s1 - 0.5 * g * A * s2          # flux bracket minus lambda
    q = 2 * c_wp + c_wp * c_wp + wp * wp        # conformal gradient^2 minus 1

    grad2 = 1.0 + q
    if np.min(grad2) < GRADIENT_FLOOR:
        raise DegeneracyError(
            f"conformal gradient below floor: min = {np.min(grad2):.3e}")
    curv_num = wpp * (1.0 + c_wp) - wp * c_wpp
    return (2 * lam * p + p * p - lam * lam * q
            - (mu - 2 * g * B * ws) * grad2
            - 2 * sigma * curv_num / np.sqrt(grad2))


def residual_coefficients(state, params, n_modes):
    """Cosine coefficients r_0..r_N of the governing residual."""
    m_eval = _eval_grid(state.grid_size, n_modes)
    values = _residual_values(state.w, state.lam, state.beta, state.mu,
                              params, m_eval)
    return cosine_coefficients(values, n_modes)


def assemble_residual(state, params, n_modes=None):
    """Residual field F(lambda, beta, (mu, w)), band-limited to N modes.

    The output is asserted even: individual Hilbert-transformed factors are
    odd, but every assembled term is even for even w.
    """
    if n_modes is None:
        n_modes = state.grid_size // DEALIAS_RATIO
    m_eval = _eval_grid(state.grid_size, n_modes)
    values = _residual_values(state.w, state.lam, state.beta, state.mu,
                              params, m_eval)
    odd = np.max(np.abs(values - np.roll(values[::-1], 1)))
    if odd > 1e-11 * (1.0 + np.max(np.abs(values))):
        raise SymmetryError(f"residual lost even symmetry: odd part {odd:.3e}")
    coeffs = cosine_coefficients(values, n_modes)
    return from_spectrum(CosineSpectrum(coeffs[0], coeffs[1:]), state.grid_size)


def assemble_residual_raw(v, Q, m, beta, params, n_modes=None):
    """Direct evaluation of the surface equation in (v, Q, m) variables.

    Kept free of any regrouping so it can serve as the independent oracle for
    ``assemble_residual`` under the parameter map lambda(m, beta),
    mu(Q, lambda).  ``beta`` is independent problem data here: the head
    variation enters the flux bracket explicitly.
    """
    g, A, B, sigma, h = params.g, params.A, params.B, params.sigma, params.h
    if abs(mean(v) - h) >= MEAN_CONSTRAINT_TOL * max(1.0, h):
        raise MeanError(f"surface must have mean h={h}, got {mean(v):.12g}")
    if np.min(v.samples) <= 0:
        raise PositivityError(
            f"surface must stay positive, min v = {np.min(v.samples):.3e}")
    if n_modes is None:
        n_modes = v.grid_size // DEALIAS_RATIO
    m_eval = _eval_grid(v.grid_size, n_modes)
    vs = resample_samples(v.samples, m_eval) if m_eval != v.grid_size else v.samples
    vp = derivative_samples(vs, 1)
    vpp = derivative_samples(vs, 2)
    c_vp = hilbert_samples(vp, h)
    c_vpp = hilbert_samples(vpp, h)
    vvp = vs * vp
    v2vp = vs * vvp
    c_vvp = hilbert_samples(vvp - vvp.mean(), h)
    c_v2vp = hilbert_samples(v2vp - v2vp.mean(), h)
    bracket = (m / h
               - g * A * float(np.mean(vs ** 3)) / (6 * h)
               - 0.5 * g * A * c_v2vp
               - beta * float(np.mean(vs ** 2)) / (2 * h)
               - beta * c_vvp
               + 0.5 * g * A * vs * vs * (1.0 + c_vp)
               + beta * vs * (1.0 + c_vp))
    grad2 = vp * vp + (1.0 + c_vp) ** 2
    if np.min(grad2) < GRADIENT_FLOOR:
        raise DegeneracyError(
            f"conformal gradient below floor: min = {np.min(grad2):.3e}")
    curv_num = vpp + c_vp * vpp - vp * c_vpp
    values = (bracket ** 2 - (Q - 2 * g * B * vs) * grad2
              - 2 * sigma * curv_num / np.sqrt(grad2))
    coeffs = cosine_coefficients(values, n_modes)
    return from_spectrum(CosineSpectrum(coeffs[0], coeffs[1:]), v.grid_size)


def curvature(v, depth):
    """Curvature of the free surface through the strip parametrization."""
    if depth <= 0:
        raise ParameterError(f"strip depth must be positive, got {depth}")
    vs = v.samples
    vp = derivative_samples(vs, 1)
    vpp = derivative_samples(vs, 2)
    c_vp = hilbert_samples(vp, depth)
    c_vpp = hilbert_samples(vpp, depth)
    grad2 = (1.0 + c_vp) ** 2 + vp * vp
    if np.min(grad2) < GRADIENT_FLOOR:
        raise DegeneracyError(
            f"conformal gradient below floor: min = {np.min(grad2):.3e}")
    return PeriodicField((vpp + c_vp * vpp - vp * c_vpp) / grad2 ** 1.5)


class AdmissibilityReport:
    """Outcome of the geometric side conditions on a surface candidate."""

    __slots__ = ("positive", "nondegenerate", "injective", "overhanging")

    def __init__(self, positive, nondegenerate, injective, overhanging):
        self.positive = positive
        self.nondegenerate = nondegenerate
        self.injective = injective
        self.overhanging = overhanging

    @property
    def ok(self):
        return self.positive and self.nondegenerate and self.injective

    def __repr__(self):
        return (f"AdmissibilityReport(positive={self.positive}, "
                f"nondegenerate={self.nondegenerate}, "
                f"injective={self.injective}, overhanging={self.overhanging})")


def check_admissibility(v, depth):
    """Positivity, gradient floor, and injectivity of x -> (x + C_h(v-[v]), v).

    A monotone horizontal coordinate settles injectivity immediately; a
    non-monotone (overhanging) curve is accepted as long as the discrete
    two-period polyline stays simple.
    """
    vs = v.samples
    positive = bool(np.min(vs) > 0)
    vp = derivative_samples(vs, 1)
    c_vp = hilbert_samples(vp, depth)
    grad2 = (1.0 + c_vp) ** 2 + vp * vp
    nondegenerate = bool(np.min(grad2) >= GRADIENT_FLOOR)
    x_surf = grid_nodes(v.grid_size) + hilbert_samples(vs - vs.mean(), depth)
    steps = np.diff(np.concatenate([x_surf, [x_surf[0] + 2 * np.pi]]))
    monotone = bool(np.all(steps > 0))
    if monotone:
        return AdmissibilityReport(positive, nondegenerate, True, False)
    xs = np.concatenate([x_surf, x_surf + 2 * np.pi, [x_surf[0] + 4 * np.pi]])
    ys = np.concatenate([vs, vs, [vs[0]]])
    simple = bool(LineString(np.column_stack([xs, ys])).is_simple)
    return AdmissibilityReport(positive, nondegenerate, simple, simple)


def jacobian(state, params, n_modes, include_lambda=False, include_beta=False,
             fd_step=1e-7):
    """Dense central-difference Jacobian of the residual coefficients.

    Rows are r_0..r_N; columns are (mu, a_1..a_N) plus optional lambda and
    beta columns.  Each column uses the relative step fd_step * (1 + |u_k|).
    """
    m = state.grid_size
    base = to_coefficients(state.w, n_modes)

    def eval_coeffs(mu, a, lam, beta):
        w = from_spectrum(CosineSpectrum(0.0, a), m)
        st = WaveState(lam, beta, mu, w)
        return residual_coefficients(st, params, n_modes)

    unknowns = [("mu", state.mu)]
    unknowns += [("a", k) for k in range(n_modes)]
    if include_lambda:
        unknowns.append(("lam", state.lam))
    if include_beta:
        unknowns.append(("beta", state.beta))

    cols = []
    for tag in unknowns:
        mu, lam, beta = state.mu, state.lam, state.beta
        a_plus = base.copy()
        a_minus = base.copy()
        if tag[0] == "a":
            k = tag[1]
            delta = fd_step * (1.0 + abs(base[k]))
            a_plus[k] += delta
            a_minus[k] -= delta
            hi = eval_coeffs(mu, a_plus, lam, beta)
            lo = eval_coeffs(mu, a_minus, lam, beta)
        elif tag[0] == "mu":
            delta = fd_step * (1.0 + abs(mu))
            hi = eval_coeffs(mu + delta, base, lam, beta)
            lo = eval_coeffs(mu - delta, base, lam, beta)
        elif tag[0] == "lam":
            delta = fd_step * (1.0 + abs(lam))
            hi = eval_coeffs(mu, base, lam + delta, beta)
            lo = eval_coeffs(mu, base, lam - delta, beta)
        else:
            delta = fd_step * (1.0 + abs(beta))
            hi = eval_coeffs(mu, base, lam, beta + delta)
            lo = eval_coeffs(mu, base, lam, beta - delta)
        cols.append((hi - lo) / (2 * delta))
    return np.column_stack(cols)


def to_coefficients(w, n_modes):
    """Cosine coefficients a_1..a_N of the perturbation (mean dropped)."""
    return cosine_coefficients(w.samples, n_modes)[1:]
