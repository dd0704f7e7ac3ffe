"""Newton correction, bifurcation detection, branch switching and continuation.

The truncated system pairs the residual cosine coefficients r_0..r_N with the
unknowns (mu, a_1..a_N).  Pinning constraints fix selected coefficients
(a_n = s on a one-mode branch, a_n = s a and a_m = s b on a two-mode branch)
and free one continuation parameter per pin (lambda, then beta), keeping the
system square.  One-mode branches switch to pseudo-arclength with a secant
tangent once five pinned steps away from the singular bifurcation point;
two-mode branches step the pinned kernel amplitude s directly, with lambda
and beta both free.
"""

import numpy as np
from scipy.optimize import brentq

from .dispersion import (bifurcation_points, dispersion, mode_symbols,
                         resonance_beta)
from .errors import (ConditioningError, DegeneracyError, IterationError,
                     ParameterError)
from .residual import (PhysicalParams, WaveState, check_admissibility,
                       derived_quantities, jacobian, residual_coefficients,
                       to_coefficients)
from .spectral import CosineSpectrum, PeriodicField, from_spectrum


class SolverOptions:
    """Numerical controls shared by the solver stack."""

    __slots__ = ("n_modes", "grid_size", "newton_tol", "max_iter", "fd_step",
                 "kernel_tol", "min_step")

    def __init__(self, n_modes=64, grid_size=512, newton_tol=1e-11,
                 max_iter=25, fd_step=1e-7, kernel_tol=1e-8, min_step=1e-6):
        if n_modes < 1 or grid_size < 2 * n_modes:
            raise ParameterError(
                f"need grid >= 2 * n_modes, got ({grid_size}, {n_modes})")
        self.n_modes = n_modes
        self.grid_size = grid_size
        self.newton_tol = newton_tol
        self.max_iter = max_iter
        self.fd_step = fd_step
        self.kernel_tol = kernel_tol
        self.min_step = min_step


class BranchKind:
    """Identity of a solution branch: trivial, one-mode(n, sign) or
    two-mode(n, m, sign, a, b)."""

    __slots__ = ("kind", "n", "sign", "m", "a", "b", "lambda_ref")

    def __init__(self, kind, n, sign=+1, m=None, a=None, b=None,
                 lambda_ref=None):
        if kind not in ("trivial", "one-mode", "two-mode"):
            raise ParameterError(f"unknown branch kind {kind!r}")
        self.kind = kind
        self.n = n
        self.sign = sign
        self.m = m
        self.a = a
        self.b = b
        self.lambda_ref = lambda_ref

    @classmethod
    def one_mode(cls, n, sign):
        return cls("one-mode", n, sign)

    @classmethod
    def two_mode(cls, n, m, sign, a, b):
        return cls("two-mode", n, sign, m=m, a=a, b=b)

    @classmethod
    def trivial(cls, n, sign, lambda_ref):
        return cls("trivial", n, sign, lambda_ref=lambda_ref)

    def label(self):
        s = "+" if self.sign > 0 else "-"
        if self.kind == "one-mode":
            return f"one-mode(n={self.n},{s})"
        if self.kind == "two-mode":
            return f"two-mode(n={self.n},m={self.m},{s},a={self.a},b={self.b})"
        return f"trivial(n={self.n},{s})"


class BranchPoint:
    __slots__ = ("s", "state", "derived", "amp_inf", "residual_inf",
                 "leading_eig", "stability")

    def __init__(self, s, state, derived, amp_inf, residual_inf,
                 leading_eig=None, stability="unknown"):
        self.s = s
        self.state = state
        self.derived = derived
        self.amp_inf = amp_inf
        self.residual_inf = residual_inf
        self.leading_eig = leading_eig
        self.stability = stability


class Branch:
    """Ordered branch points plus the reason continuation stopped, if any."""

    __slots__ = ("kind", "points", "failure")

    def __init__(self, kind, points, failure=None):
        self.kind = kind
        self.points = points
        self.failure = failure

    def __len__(self):
        return len(self.points)

    def states(self):
        return [p.state for p in self.points]


class KernelBasis:
    """Modes whose dispersion symbol vanishes at (lambda, beta)."""

    __slots__ = ("modes", "values")

    def __init__(self, modes, values):
        self.modes = modes
        self.values = values

    @property
    def dimension(self):
        return len(self.modes)


def kernel_dimension(lam, beta, params, opts):
    """Count modes with |D(n, lambda, beta)| below kernel_tol * max|D|."""
    symbols = mode_symbols(lam, beta, params, opts.n_modes)
    scale = float(np.max(np.abs(symbols)))
    modes = [int(n) for n in range(1, opts.n_modes + 1)
             if abs(symbols[n - 1]) < opts.kernel_tol * scale]
    return KernelBasis(modes, [float(symbols[n - 1]) for n in modes])


class _PinnedSystem:
    """Square Newton system with pinned coefficients and freed parameters."""

    def __init__(self, params, opts, grid_size, pins, free_lambda, free_beta):
        if len(pins) != int(free_lambda) + int(free_beta):
            raise ParameterError(
                f"{len(pins)} pins need as many freed parameters "
                f"(lambda={free_lambda}, beta={free_beta})")
        self.params = params
        self.opts = opts
        self.grid_size = grid_size
        self.pins = dict(pins)
        self.free_modes = [k for k in range(1, opts.n_modes + 1)
                           if k not in self.pins]
        self.free_lambda = free_lambda
        self.free_beta = free_beta
        self.size = 1 + len(self.free_modes) + int(free_lambda) + int(free_beta)
        self.lam_fixed = None
        self.beta_fixed = None

    def pack(self, state):
        self.lam_fixed = state.lam
        self.beta_fixed = state.beta
        coeffs = to_coefficients(state.w, self.opts.n_modes)
        u = [state.mu] + [coeffs[k - 1] for k in self.free_modes]
        if self.free_lambda:
            u.append(state.lam)
        if self.free_beta:
            u.append(state.beta)
        return np.array(u)

    def make_state(self, u):
        coeffs = np.zeros(self.opts.n_modes)
        for k, val in self.pins.items():
            coeffs[k - 1] = val
        for j, k in enumerate(self.free_modes):
            coeffs[k - 1] = u[1 + j]
        pos = 1 + len(self.free_modes)
        lam = u[pos] if self.free_lambda else self.lam_fixed
        beta = u[pos + int(self.free_lambda)] if self.free_beta else self.beta_fixed
        w = from_spectrum(CosineSpectrum(0.0, coeffs), self.grid_size)
        return WaveState(lam, beta, float(u[0]), w)

    def residual(self, u):
        return residual_coefficients(self.make_state(u), self.params,
                                     self.opts.n_modes)

    def fd_jacobian(self, u):
        cols = np.empty((self.opts.n_modes + 1, self.size))
        for k in range(self.size):
            delta = self.opts.fd_step * (1.0 + abs(u[k]))
            up = u.copy(); up[k] += delta
            um = u.copy(); um[k] -= delta
            cols[:, k] = (self.residual(up) - self.residual(um)) / (2 * delta)
        return cols

    def solve(self, guess):
        u = self.pack(guess)
        r = self.residual(u)
        norm = float(np.max(np.abs(r)))
        for _ in range(self.opts.max_iter):
            if norm < self.opts.newton_tol:
                return self.make_state(u)
            jac = self.fd_jacobian(u)
            try:
                du = np.linalg.solve(jac, r)
            except np.linalg.LinAlgError as exc:
                raise ConditioningError(f"singular Newton system: {exc}") from exc
            if not np.all(np.isfinite(du)):
                raise ConditioningError("non-finite Newton update")
            # backtracking keeps the iteration in the local solution basin
            # (full steps can tunnel to remote sheets near a resonance)
            step = 1.0
            best = None
            while step >= 2 ** -20:
                u_try = u - step * du
                r_try = self.residual(u_try)
                norm_try = float(np.max(np.abs(r_try)))
                if norm_try < (1.0 - 1e-4 * step) * norm \
                        or norm_try < self.opts.newton_tol:
                    best = (u_try, r_try, norm_try)
                    break
                if best is None or norm_try < best[2]:
                    best = (u_try, r_try, norm_try)
                step *= 0.5
            if best is None or best[2] >= norm:
                raise IterationError(
                    f"Newton line search stalled (residual {norm:.3e})",
                    residual_norm=norm)
            u, r, norm = best
        raise IterationError(
            f"Newton did not converge in {self.opts.max_iter} iterations "
            f"(residual {norm:.3e})", residual_norm=norm)


def newton_correct(guess, params, opts, pins=None, free_lambda=False,
                   free_beta=False):
    """Newton-correct a state; pins fix coefficients a_k and free parameters
    keep the system square (one freed parameter per pin)."""
    system = _PinnedSystem(params, opts, guess.grid_size, pins or {},
                           free_lambda, free_beta)
    return system.solve(guess)


def residual_norm(state, params, opts):
    return float(np.max(np.abs(
        residual_coefficients(state, params, opts.n_modes))))


def detect_bifurcations(n_max, beta, lambda_range, params, n_scan=2048):
    """All dispersion roots in the range, bisected to 1e-12 and cross-checked
    against the closed form to 1e-10 relative."""
    lo, hi = lambda_range
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ParameterError(f"bad lambda range {lambda_range}")
    grid = np.linspace(lo, hi, n_scan)
    found = []
    for n in range(1, n_max + 1):
        vals = np.array([dispersion(n, lam, beta, params) for lam in grid])
        point = bifurcation_points(n, beta, params)
        for j in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            root = brentq(lambda lam: dispersion(n, lam, beta, params),
                          grid[j], grid[j + 1], xtol=1e-12)
            if abs(root - point.lambda_plus) <= abs(root - point.lambda_minus):
                sign, closed = +1, point.lambda_plus
            else:
                sign, closed = -1, point.lambda_minus
            if abs(root - closed) > 1e-10 * max(1.0, abs(closed)):
                raise ConditioningError(
                    f"dispersion root {root} disagrees with closed form {closed}")
            found.append((n, root, sign))
    found.sort(key=lambda item: item[1])
    return found


def switch_branch(n, sign, beta, s0, params, opts):
    """First point of the one-mode branch: pin a_n = s0, free lambda.

    Rejects bifurcation points with a two-dimensional kernel (resonance);
    those require ``two_mode_branch``.
    """
    lam_star = bifurcation_points(n, beta, params).root(sign)
    basis = kernel_dimension(lam_star, beta, params, opts)
    if basis.dimension >= 2:
        raise DegeneracyError(
            f"kernel at lambda*={lam_star:.6g} is {basis.dimension}-dimensional "
            f"(modes {basis.modes}); use two_mode_branch")
    coeffs = np.zeros(opts.n_modes)
    coeffs[n - 1] = s0
    w = from_spectrum(CosineSpectrum(0.0, coeffs), opts.grid_size)
    guess = WaveState(lam_star, beta, 0.0, w)
    return newton_correct(guess, params, opts, pins={n: s0}, free_lambda=True)


def two_mode_branch(n, m, sign, a, b, s0, params, opts,
                    allow_degenerate=False):
    """First point of a two-mode branch at the resonance (lambda*, beta*).

    Pins a_n = s0 a and a_m = s0 b with both lambda and beta free.  The
    2x2 transversality matrix built from the lambda- and beta-derivative
    vectors must be nonsingular unless ``allow_degenerate``.
    """
    if abs(a * a + b * b - 1.0) > 1e-9:
        raise ParameterError(f"direction must satisfy a^2 + b^2 = 1, got {a}, {b}")
    if a * b == 0 and not allow_degenerate:
        raise ParameterError("two-mode direction needs a*b != 0")
    res = resonance_beta(n, m, params)
    beta_star, lam_star = res.collision(sign)
    tn = bifurcation_points(n, beta_star, params).t_n
    tm = bifurcation_points(m, beta_star, params).t_n
    gah = params.g * params.A * params.h
    p_n = 2 * beta_star + 2 * gah - 4 * lam_star / tn
    p_m = 2 * beta_star + 2 * gah - 4 * lam_star / tm
    matrix = np.array([[a * p_n, b * p_m],
                       [2 * lam_star * a, 2 * lam_star * b]])
    scale = max(np.abs(matrix).sum(axis=1).prod(), 1e-300)
    if abs(np.linalg.det(matrix)) < 1e-10 * scale and not allow_degenerate:
        raise DegeneracyError(
            f"transversality matrix singular for modes ({n}, {m})")
    coeffs = np.zeros(opts.n_modes)
    coeffs[n - 1] = s0 * a
    coeffs[m - 1] = s0 * b
    w = from_spectrum(CosineSpectrum(0.0, coeffs), opts.grid_size)
    guess = WaveState(lam_star, beta_star, 0.0, w)
    return newton_correct(guess, params, opts,
                          pins={n: s0 * a, m: s0 * b},
                          free_lambda=True, free_beta=True)


def _branch_point(state, params, opts, s):
    return BranchPoint(s, state, derived_quantities(state, params),
                       state.amplitude(), residual_norm(state, params, opts))


def _pin_values(kind, s):
    if kind.kind == "one-mode":
        return {kind.n: s}
    return {kind.n: s * kind.a, kind.m: s * kind.b}


def _pin_amplitude(kind, state, opts):
    coeffs = to_coefficients(state.w, opts.n_modes)
    if kind.kind == "one-mode":
        return float(coeffs[kind.n - 1])
    if abs(kind.a) >= abs(kind.b):
        return float(coeffs[kind.n - 1] / kind.a)
    return float(coeffs[kind.m - 1] / kind.b)


class _ArclengthSystem:
    """Pseudo-arclength corrector on z = (mu, a_1..a_N, lambda)."""

    def __init__(self, params, opts, grid_size, beta):
        self.params = params
        self.opts = opts
        self.grid_size = grid_size
        self.beta = beta
        self.size = opts.n_modes + 2

    def pack(self, state):
        return np.concatenate([[state.mu],
                               to_coefficients(state.w, self.opts.n_modes),
                               [state.lam]])

    def make_state(self, z):
        w = from_spectrum(CosineSpectrum(0.0, z[1:-1]), self.grid_size)
        return WaveState(z[-1], self.beta, float(z[0]), w)

    def equations(self, z, tangent, z_prev, ds):
        r = residual_coefficients(self.make_state(z), self.params,
                                  self.opts.n_modes)
        arc = float(tangent @ (z - z_prev)) - ds
        return np.concatenate([r, [arc]])

    def solve(self, z_prev, tangent, ds):
        z = z_prev + ds * tangent
        norm = np.inf
        for _ in range(self.opts.max_iter):
            rhs = self.equations(z, tangent, z_prev, ds)
            norm = float(np.max(np.abs(rhs)))
            if norm < self.opts.newton_tol:
                return self.make_state(z)
            jac = np.empty((self.size, self.size))
            for k in range(self.size):
                delta = self.opts.fd_step * (1.0 + abs(z[k]))
                zp = z.copy(); zp[k] += delta
                zm = z.copy(); zm[k] -= delta
                jac[:, k] = (self.equations(zp, tangent, z_prev, ds)
                             - self.equations(zm, tangent, z_prev, ds)) / (2 * delta)
            try:
                dz = np.linalg.solve(jac, rhs)
            except np.linalg.LinAlgError as exc:
                raise ConditioningError(f"singular arclength system: {exc}") from exc
            z = z - dz
        raise IterationError(
            f"arclength corrector did not converge (residual {norm:.3e})",
            residual_norm=norm)


PINNED_STEPS = 5    # amplitude pinning regularizes the near-singular start
PARAM_MOVE_CAP = 0.3  # max (lambda, beta) travel per pinned step


def continue_branch(start, params, kind, ds, count, opts):
    """Extend a branch by up to ``count`` accepted points of step ``ds``.

    One-mode branches pin the amplitude for the first PINNED_STEPS points and
    then run pseudo-arclength with a secant tangent; two-mode branches step
    the pinned kernel amplitude throughout (lambda and beta free), with the
    parameter travel per step capped so the corrector cannot hop between
    nearby solution sheets when the branch is steep in (lambda, beta).  The
    step halves on corrector failure down to opts.min_step; admissibility
    failure truncates the branch.  A failure on the very first step
    propagates.
    """
    if kind.kind == "trivial":
        return _trivial_continue(start, params, kind, ds, count, opts)
    points = [_branch_point(start, params, opts, _pin_amplitude(kind, start, opts))]
    branch = Branch(kind, points)
    free_beta = kind.kind == "two-mode"
    arclength = None
    cur_ds = ds
    while len(points) < count + 1:
        use_arc = kind.kind == "one-mode" and len(points) > PINNED_STEPS
        try:
            if use_arc:
                if arclength is None:
                    arclength = _ArclengthSystem(params, opts, start.grid_size,
                                                 start.beta)
                z_prev = arclength.pack(points[-1].state)
                tangent = z_prev - arclength.pack(points[-2].state)
                tangent /= np.linalg.norm(tangent)
                state = arclength.solve(z_prev, tangent, cur_ds)
            else:
                s_next = points[-1].s + cur_ds
                state = newton_correct(
                    _predict(points, opts), params, opts,
                    pins=_pin_values(kind, s_next),
                    free_lambda=True, free_beta=free_beta)
                last = points[-1].state
                moved = np.hypot(state.lam - last.lam, state.beta - last.beta)
                if moved > PARAM_MOVE_CAP:
                    raise IterationError(
                        f"parameter travel {moved:.3g} exceeds the per-step "
                        f"cap {PARAM_MOVE_CAP}")
        except (IterationError, ConditioningError) as exc:
            cur_ds *= 0.5
            if cur_ds < opts.min_step:
                if len(points) == 1:
                    raise  # nothing at all could be continued
                branch.failure = f"step floor reached: {exc}"
                break
            continue
        report = check_admissibility(state.surface(params), params.h)
        if not report.ok:
            branch.failure = f"admissibility failed: {report!r}"
            break
        points.append(_branch_point(state, params, opts,
                                    _pin_amplitude(kind, state, opts)))
        cur_ds = min(cur_ds * 1.5, ds)
    return branch


def _predict(points, opts):
    """Linear extrapolation of the last two states as the Newton guess."""
    last = points[-1].state
    if len(points) < 2:
        return last
    prev = points[-2].state
    m = last.grid_size
    ca = to_coefficients(last.w, opts.n_modes)
    cb = to_coefficients(prev.w, opts.n_modes)
    coeffs = 2 * ca - cb
    w = from_spectrum(CosineSpectrum(0.0, coeffs), m)
    return WaveState(2 * last.lam - prev.lam, 2 * last.beta - prev.beta,
                     2 * last.mu - prev.mu, w)


def _trivial_continue(start, params, kind, ds, count, opts):
    lam_ref = kind.lambda_ref if kind.lambda_ref is not None else start.lam
    points = []
    for i in range(count + 1):
        lam = start.lam + i * ds
        state = WaveState.trivial(lam, start.beta, start.grid_size)
        points.append(_branch_point(state, params, opts, lam - lam_ref))
    return Branch(kind, points)


def trivial_branch(n, sign, beta, halfwidth, count, params, opts):
    """Laminar sweep across lambda*_{n,sign} for stability-exchange studies."""
    lam_star = bifurcation_points(n, beta, params).root(sign)
    kind = BranchKind.trivial(n, sign, lambda_ref=lam_star)
    start = WaveState.trivial(lam_star - halfwidth, beta, opts.grid_size)
    return _trivial_continue(start, params, kind, 2 * halfwidth / count,
                             count, opts)


def _stability_label(theta, scale):
    tol = 1e-9 * max(scale, 1e-300)
    if theta > tol:
        return "unstable"
    if theta < -tol:
        return "stable"
    return "neutral"


def track_eigenvalue(branch, params, opts):
    """Annotate each branch point with the tracked eigenvalue nearest zero.

    Trivial branches use the analytic symbol kappa(lambda) = D(n, lambda,
    beta).  Nontrivial branches eliminate the mean equation and the mu column
    from the FD Jacobian (Schur complement) and follow the eigenvalue whose
    eigenvector overlaps the one tracked at the previous point, starting from
    the kernel direction at s = 0.  Points are annotated in place.
    """
    kind = branch.kind
    if kind.kind == "trivial":
        for pt in branch.points:
            kappa = dispersion(kind.n, pt.state.lam, pt.state.beta, params)
            scale = abs(dispersion(kind.n, 0.0, pt.state.beta, params))
            pt.leading_eig = kappa
            pt.stability = _stability_label(kappa, scale)
        return branch
    prev = np.zeros(opts.n_modes)
    if kind.kind == "one-mode":
        prev[kind.n - 1] = 1.0
    else:
        prev[kind.n - 1] = kind.a
        prev[kind.m - 1] = kind.b
    for pt in branch.points:
        jac = jacobian(pt.state, params, opts.n_modes, fd_step=opts.fd_step)
        if abs(jac[0, 0]) < 1e-12:
            raise ConditioningError("mean-mode equation lost its mu pairing")
        block = jac[1:, 1:] - np.outer(jac[1:, 0], jac[0, 1:]) / jac[0, 0]
        try:
            vals, vecs = np.linalg.eig(block)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(f"eigen-solver failed: {exc}") from exc
        overlaps = np.abs(prev @ vecs)
        pick = int(np.argmax(overlaps))
        theta = float(vals[pick].real)
        vec = np.real(vecs[:, pick])
        nrm = np.linalg.norm(vec)
        if nrm > 0:
            vec = vec / nrm
            if vec @ prev < 0:
                vec = -vec
            prev = vec
        pt.leading_eig = theta
        pt.stability = _stability_label(theta, float(np.max(np.abs(vals))))
    return branch
