"""Closed-form linear and weakly nonlinear theory at the laminar state.

The linearized operator is diagonal on cosine modes with symbol

    D(n, lambda, beta) = -2 (lambda^2 / T_n - beta lambda - g A h lambda
                             - (g B + sigma n^2)),      T_n = tanh(n h) / n.

Its zeros are the bifurcation points lambda*_{n,+-}; the remaining closed
forms (transversality, third-order pairing, branch curvature, resonance
values) drive branch switching, direction prediction and the formal-stability
classification.
"""

import math

import numpy as np

from .errors import ParameterError
from .spectral import coth

SCOPE_EPS = 0.01  # default half-width of the small-(beta, sigma) theorem scope


def depth_ratio(n, h):
    """T_n = tanh(n h) / n, strictly decreasing in n."""
    return math.tanh(n * h) / n


def dispersion(n, lam, beta, params):
    """Diagonal symbol of the linearization at the laminar state."""
    if n < 1:
        raise ParameterError(f"mode index must be >= 1, got {n}")
    t = depth_ratio(n, params.h)
    gah = params.g * params.A * params.h
    return -2.0 * (lam * lam / t - beta * lam - gah * lam
                   - (params.g * params.B + params.sigma * n * n))


class DispersionPoint:
    """Both dispersion roots of mode n at fixed beta."""

    __slots__ = ("n", "lambda_plus", "lambda_minus", "t_n")

    def __init__(self, n, lambda_plus, lambda_minus, t_n):
        self.n = n
        self.lambda_plus = lambda_plus
        self.lambda_minus = lambda_minus
        self.t_n = t_n

    def root(self, sign):
        return self.lambda_plus if sign > 0 else self.lambda_minus


def bifurcation_points(n, beta, params):
    """Closed-form roots lambda*_{n,+-} of D(n, ., beta)."""
    if n < 1:
        raise ParameterError(f"mode index must be >= 1, got {n}")
    t = depth_ratio(n, params.h)
    c = beta + params.A * params.g * params.h
    disc = c * c * t * t / 4.0 + (params.g * params.B + params.sigma * n * n) * t
    root = math.sqrt(disc)
    return DispersionPoint(n, c * t / 2.0 + root, c * t / 2.0 - root, t)


class ResonanceData:
    """Two-mode resonance parameters for the pair (n, m).

    ``family_at_plus``/``family_at_minus`` record which root family (+1 or -1)
    actually collides at beta*_+ / beta*_-; the pairing depends on whether the
    collided lambda^2 exceeds (gB + sigma n^2) T_n, so it is detected rather
    than assumed.
    """

    __slots__ = ("n", "m", "beta_nm", "beta_star_plus", "beta_star_minus",
                 "lambda_at_plus", "lambda_at_minus", "family_at_plus",
                 "family_at_minus")

    def __init__(self, n, m, beta_nm, beta_star_plus, beta_star_minus,
                 lambda_at_plus, lambda_at_minus, family_at_plus,
                 family_at_minus):
        self.n = n
        self.m = m
        self.beta_nm = beta_nm
        self.beta_star_plus = beta_star_plus
        self.beta_star_minus = beta_star_minus
        self.lambda_at_plus = lambda_at_plus
        self.lambda_at_minus = lambda_at_minus
        self.family_at_plus = family_at_plus
        self.family_at_minus = family_at_minus

    def collision(self, sign):
        """(beta*, collided lambda*) for the requested sign of beta*."""
        if sign > 0:
            return self.beta_star_plus, self.lambda_at_plus
        return self.beta_star_minus, self.lambda_at_minus


def _collided_root(n, m, beta, params, rel_tol=1e-9):
    pn = bifurcation_points(n, beta, params)
    pm = bifurcation_points(m, beta, params)
    dplus = abs(pn.lambda_plus - pm.lambda_plus)
    dminus = abs(pn.lambda_minus - pm.lambda_minus)
    if dplus <= dminus:
        lam, gap, family = 0.5 * (pn.lambda_plus + pm.lambda_plus), dplus, +1
    else:
        lam, gap, family = 0.5 * (pn.lambda_minus + pm.lambda_minus), dminus, -1
    if gap > rel_tol * max(1.0, abs(lam)):
        raise ParameterError(
            f"no root collision at beta={beta}: gaps ({dplus:.3e}, {dminus:.3e})")
    return lam, family


def resonance_beta(n, m, params):
    """Resonance value beta_nm and the head offsets beta*_+- where the
    mode-n and mode-m dispersion roots collide (two-dimensional kernel)."""
    if n == m or n < 1 or m < 1:
        raise ParameterError(f"need two distinct modes >= 1, got ({n}, {m})")
    if params.sigma <= 0:
        raise ParameterError(
            "resonance values require sigma > 0 (formula divides by sigma)")
    tn = depth_ratio(n, params.h)
    tm = depth_ratio(m, params.h)
    rn = params.g * params.B + params.sigma * n * n
    rm = params.g * params.B + params.sigma * m * m
    beta_nm = (rn * tn - rm * tm) ** 2 / (
        params.sigma * tn * tm * (tn - tm) * (m * m - n * n))
    agh = params.A * params.g * params.h
    beta_star_plus = -agh + math.sqrt(beta_nm)
    beta_star_minus = -agh - math.sqrt(beta_nm)
    lam_plus, fam_plus = _collided_root(n, m, beta_star_plus, params)
    lam_minus, fam_minus = _collided_root(n, m, beta_star_minus, params)
    return ResonanceData(n, m, beta_nm, beta_star_plus, beta_star_minus,
                         lam_plus, lam_minus, fam_plus, fam_minus)


def transversality(n, sign, beta, params):
    """Slope kappa'(lambda*_{n,sign}) of the tracked eigenvalue in lambda.

    Equals -2 (2 lambda* / T_n - beta - g A h); negative on the plus root,
    positive on the minus root.
    """
    point = bifurcation_points(n, beta, params)
    t = point.t_n
    gah = params.g * params.A * params.h
    return -2.0 * (2.0 * point.root(sign) / t - beta - gah)


def third_order_pairing(n, sign, beta, params):
    """Projection of the cubic form at the branch point onto the kernel mode.

    Term-by-term closed form: a beta(beta+gAh) group, a gA(beta+gAh) group,
    a lambda* gA term, the gB term and the surface-tension term.
    """
    if n < 1:
        raise ParameterError(f"mode index must be >= 1, got {n}")
    g, A, B, sigma, h = params.g, params.A, params.B, params.sigma, params.h
    lam_star = bifurcation_points(n, beta, params).root(sign)
    cs = float(coth(n * h))
    c2 = float(coth(2 * n * h))
    gah = g * A * h
    return (3 * beta * (beta + gah) * (3 * n * cs - n * c2 - 1.0 / h)
            + 3 * g * A * (beta + gah) * (2.5 + 3 * h * n * cs - h * n * c2)
            + 2 * lam_star * g * A * n * cs
            + 3 * g * B * (n * n + 3 * n * n * cs * cs)
            - 0.5 * sigma * (19 * n ** 4 * cs * cs + n ** 4 - 4 * n * n))


def lambda_second_derivative(n, sign, beta, params):
    """Branch curvature lambda''(0): pitchfork direction at lambda*_{n,sign}.

    Positive means the branch opens toward increasing lambda (supercritical).
    """
    pairing = third_order_pairing(n, sign, beta, params)
    return pairing / (-3.0 * transversality(n, sign, beta, params))


class StabilityLabel:
    """Formal-stability classification near a bifurcation point."""

    __slots__ = ("trivial", "nontrivial", "in_scope")

    def __init__(self, trivial, nontrivial, in_scope):
        self.trivial = trivial
        self.nontrivial = nontrivial
        self.in_scope = in_scope

    def __repr__(self):
        return (f"StabilityLabel(trivial={self.trivial!r}, "
                f"nontrivial={self.nontrivial!r}, in_scope={self.in_scope})")


def classify_stability(lam, n, sign, beta, params, scope_eps=SCOPE_EPS):
    """Classify the laminar branch at lambda and the bifurcating branch.

    The theorem covers |beta|, sigma <= eps with A >= 0 on the plus root or
    A <= 0 on the minus root; outside that region the label is
    "out-of-theorem-scope".  In scope, the laminar state is stable formally
    where the tracked eigenvalue kappa(lambda) = D(n, lambda, beta) is
    negative, unstable where positive; the bifurcating branch is unstable.
    """
    in_scope = (abs(beta) <= scope_eps and params.sigma <= scope_eps
                and ((sign > 0 and params.A >= 0) or (sign < 0 and params.A <= 0)))
    if not in_scope:
        return StabilityLabel("out-of-theorem-scope", "out-of-theorem-scope", False)
    kappa = dispersion(n, lam, beta, params)
    scale = abs(dispersion(n, 0.0, beta, params))
    if kappa < -1e-12 * scale:
        trivial = "stable-formally"
    elif kappa > 1e-12 * scale:
        trivial = "unstable"
    else:
        trivial = "neutral"
    return StabilityLabel(trivial, "unstable", True)


def mode_symbols(lam, beta, params, n_modes):
    """D(n, lambda, beta) for n = 1..N as an array."""
    n = np.arange(1, n_modes + 1)
    t = np.tanh(n * params.h) / n
    gah = params.g * params.A * params.h
    return -2.0 * (lam * lam / t - beta * lam - gah * lam
                   - (params.g * params.B + params.sigma * n * n))
