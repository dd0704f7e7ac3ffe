"""Flow reconstruction on the strip and in the physical plane.

Boundary data on y = 0 extends harmonically into the strip [-h, 0] mode by
mode: cos(nx) picks up the vertical profile sinh(n(y+h))/sinh(nh), the mean
extends linearly, and the harmonic conjugate swaps cos/sin with the
cosh/sinh profile.  Profiles are evaluated through ratios of decaying
exponentials so large n*h never overflows.  Sampling density only affects
where fields are reported, not their accuracy.
"""

import numpy as np
import contourpy

from .errors import DegeneracyError, ParameterError
from .residual import derived_quantities
from .spectral import cosine_coefficients, grid_nodes

GRADIENT_FLOOR = 1e-8
STAGNATION_REL_TOL = 1e-6
LEVEL_SHIFT = 1e-12  # relative saddle-disambiguation shift for level sets


class StripField2D:
    """Scalar field sampled on x in [0, 2pi), y in [-h, 0] (L levels)."""

    __slots__ = ("values", "h")

    def __init__(self, values, h):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 2:
            raise ParameterError(f"need an (L, M) value grid, got {values.shape}")
        self.values = values
        self.h = float(h)

    @property
    def levels(self):
        return self.values.shape[0]

    @property
    def grid_size(self):
        return self.values.shape[1]

    @property
    def x(self):
        return grid_nodes(self.grid_size)

    @property
    def y(self):
        return np.linspace(-self.h, 0.0, self.levels)


class _ModalStrip:
    """Harmonic mode sum c_n trig(nx) prof_n(y) plus an affine mean part.

    trig is "cos" or "sin"; prof is "S" (sinh ratio, vanishing at the bed) or
    "C" (cosh ratio).  mean part = alpha + slope * (y + h).  Closed under
    x- and y-differentiation.
    """

    __slots__ = ("h", "coeffs", "trig", "prof", "alpha", "slope")

    def __init__(self, h, coeffs, trig, prof, alpha=0.0, slope=0.0):
        self.h = h
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.trig = trig
        self.prof = prof
        self.alpha = float(alpha)
        self.slope = float(slope)

    def _profiles(self, y):
        n = np.arange(1, self.coeffs.shape[0] + 1)
        y = np.asarray(y, dtype=float)
        outer = np.multiply.outer(y, n)
        decay = np.exp(-2.0 * np.multiply.outer(y + self.h, n))
        denom = -np.expm1(-2.0 * n * self.h)
        base = np.exp(outer)
        if self.prof == "S":
            return base * (1.0 - decay) / denom
        return base * (1.0 + decay) / denom

    def _trig(self, x):
        n = np.arange(1, self.coeffs.shape[0] + 1)
        angles = np.multiply.outer(n, np.asarray(x, dtype=float))
        return np.cos(angles) if self.trig == "cos" else np.sin(angles)

    def on_grid(self, x, y):
        """Separable evaluation: x (M,), y (L,) -> (L, M)."""
        modal = self._profiles(y) @ (self.coeffs[:, None] * self._trig(x))
        return modal + self.alpha + self.slope * (np.asarray(y)[:, None] + self.h)

    def at_points(self, x, y):
        """Pointwise evaluation for refinement; x and y share a shape."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        modal = np.sum(self._profiles(y) * self._trig(x).T * self.coeffs, axis=-1)
        return modal + self.alpha + self.slope * (y + self.h)

    def dx(self):
        n = np.arange(1, self.coeffs.shape[0] + 1)
        if self.trig == "cos":
            return _ModalStrip(self.h, -n * self.coeffs, "sin", self.prof)
        return _ModalStrip(self.h, n * self.coeffs, "cos", self.prof)

    def dy(self):
        n = np.arange(1, self.coeffs.shape[0] + 1)
        other = "C" if self.prof == "S" else "S"
        return _ModalStrip(self.h, n * self.coeffs, self.trig, other,
                           alpha=self.slope, slope=0.0)


def _y_levels(h, levels):
    if levels < 2:
        raise ParameterError(f"need at least 2 vertical levels, got {levels}")
    return np.linspace(-h, 0.0, levels)


def harmonic_extension(boundary, depth, levels):
    """Harmonic field in the strip matching ``boundary`` at y=0, zero at the bed.

    The mean extends linearly, [boundary] (y+h)/h, each cosine mode through
    the sinh ratio.  The vertical derivative at y=0 reproduces the
    Dirichlet-Neumann map of the boundary data.
    """
    if depth <= 0:
        raise ParameterError(f"strip depth must be positive, got {depth}")
    modal = _boundary_modal(boundary, depth)
    y = _y_levels(depth, levels)
    return StripField2D(modal.on_grid(boundary.nodes, y), depth)


def _boundary_modal(boundary, depth, n_modes=None):
    if n_modes is None:
        n_modes = boundary.grid_size // 2 - 1
    coeffs = cosine_coefficients(boundary.samples, n_modes)
    return _ModalStrip(depth, coeffs[1:], "cos", "S", slope=coeffs[0] / depth)


def laplacian_residual(field):
    """Relative defect of the exact per-mode vertical recurrence.

    A sampled harmonic mode profile satisfies c(y+dy) + c(y-dy) =
    2 cosh(n dy) c(y) exactly, so genuinely harmonic fields score at
    round-off level, independent of the vertical resolution.
    """
    vals = field.values
    dy = field.h / (field.levels - 1)
    modes = np.fft.rfft(vals, axis=1)
    n = np.arange(modes.shape[1])
    rec = modes[2:, :] + modes[:-2, :] - 2.0 * np.cosh(n * dy) * modes[1:-1, :]
    scale = np.max(np.abs(modes)) * 2.0 * np.cosh(n * dy)
    return float(np.max(np.abs(rec) / np.maximum(scale, 1e-300)))


def conformal_map(v, depth, levels):
    """Conformal map (U, V) of the strip onto the fluid domain under v.

    V extends v harmonically; U = x plus the harmonic conjugate, with the
    additive constant fixed by U(0, 0) = 0.
    """
    if depth <= 0:
        raise ParameterError(f"strip depth must be positive, got {depth}")
    v_modal = _boundary_modal(v, depth)
    u_modal = _ModalStrip(depth, v_modal.coeffs, "sin", "C")
    x = v.nodes
    y = _y_levels(depth, levels)
    v_field = StripField2D(v_modal.on_grid(x, y), depth)
    u_field = StripField2D(u_modal.on_grid(x, y) + x[None, :], depth)
    vx = v_modal.dx().on_grid(x, y)
    vy = v_modal.dy().on_grid(x, y)
    if np.min(vx * vx + vy * vy) < GRADIENT_FLOOR:
        raise DegeneracyError("conformal gradient below floor")
    return u_field, v_field


def cauchy_riemann_residual(v, depth, levels):
    """max|U_x - V_y| + max|U_y + V_x| with x-derivatives recomputed by FFT
    from the sampled grids and y-derivatives taken from the mode profiles."""
    v_modal = _boundary_modal(v, depth)
    u_modal = _ModalStrip(depth, v_modal.coeffs, "sin", "C")
    x = v.nodes
    y = _y_levels(depth, levels)
    m = x.shape[0]
    k = np.arange(m // 2 + 1)

    def ddx(grid):
        fh = np.fft.rfft(grid, axis=1) * (1j * k)
        fh[:, -1] = 0.0
        return np.fft.irfft(fh, m, axis=1)

    u_x = ddx(u_modal.on_grid(x, y)) + 1.0
    v_x = ddx(v_modal.on_grid(x, y))
    u_y = u_modal.dy().on_grid(x, y)
    v_y = v_modal.dy().on_grid(x, y)
    return float(np.max(np.abs(u_x - v_y)) + np.max(np.abs(u_y + v_x)))


class FlowField:
    """All flow quantities of one converged state, evaluable anywhere."""

    def __init__(self, state, params, n_eta_modes=None):
        self.params = params
        self.state = state
        self.h = params.h
        self.m_flux = derived_quantities(state, params).m
        v = state.surface(params)
        self.v = v
        m = v.grid_size
        if n_eta_modes is None:
            n_eta_modes = m // 2 - 1
        self.v_modal = _boundary_modal(v, params.h)
        self.u_modal = _ModalStrip(params.h, self.v_modal.coeffs, "sin", "C")
        g, A = params.g, params.A
        eta_boundary = (self.m_flux - g * A * v.samples ** 3 / 6.0
                        - state.beta * v.samples ** 2 / 2.0)
        coeffs = cosine_coefficients(eta_boundary, n_eta_modes)
        self.eta_modal = _ModalStrip(params.h, coeffs[1:], "cos", "S",
                                     slope=coeffs[0] / params.h)
        self._vx = self.v_modal.dx()
        self._vy = self.v_modal.dy()
        self._ux = self.u_modal.dx()
        self._uy = self.u_modal.dy()
        self._ex = self.eta_modal.dx()
        self._ey = self.eta_modal.dy()

    def _psi_from(self, eta, big_v):
        g, A = self.params.g, self.params.A
        return (eta + g * A * big_v ** 3 / 6.0
                + self.state.beta * big_v ** 2 / 2.0 - self.m_flux)

    def _grad_from(self, ex, ey, big_v, vx, vy):
        g, A = self.params.g, self.params.A
        chain = g * A * big_v ** 2 / 2.0 + self.state.beta * big_v
        xi_x = ex + chain * vx
        xi_y = ey + chain * vy
        denom = vx * vx + vy * vy
        if np.min(denom) < GRADIENT_FLOOR:
            raise DegeneracyError("conformal gradient below floor")
        psi_x = (vy * xi_x - vx * xi_y) / denom
        psi_y = (vx * xi_x + vy * xi_y) / denom
        return psi_x, psi_y

    # grid samplers -------------------------------------------------------

    def sample(self, levels):
        """U, V, psi and the physical velocity components on the strip grid."""
        x = self.v.nodes
        y = _y_levels(self.h, levels)
        big_v = self.v_modal.on_grid(x, y)
        eta = self.eta_modal.on_grid(x, y)
        psi = self._psi_from(eta, big_v)
        psi_x, psi_y = self._grad_from(
            self._ex.on_grid(x, y), self._ey.on_grid(x, y), big_v,
            self._vx.on_grid(x, y), self._vy.on_grid(x, y))
        u = self.u_modal.on_grid(x, y) + x[None, :]
        return {
            "U": StripField2D(u, self.h),
            "V": StripField2D(big_v, self.h),
            "psi": StripField2D(psi, self.h),
            "psiX": StripField2D(psi_x, self.h),
            "psiY": StripField2D(psi_y, self.h),
        }

    # point evaluators ----------------------------------------------------

    def psi_at(self, x, y):
        wrapped = np.mod(x, 2 * np.pi)
        return self._psi_from(self.eta_modal.at_points(wrapped, y),
                              self.v_modal.at_points(wrapped, y))

    def grad_at(self, x, y):
        wrapped = np.mod(x, 2 * np.pi)
        big_v = self.v_modal.at_points(wrapped, y)
        return self._grad_from(self._ex.at_points(wrapped, y),
                               self._ey.at_points(wrapped, y), big_v,
                               self._vx.at_points(wrapped, y),
                               self._vy.at_points(wrapped, y))

    def map_at(self, x, y):
        """Physical image (X, Y); X uses the unwrapped horizontal coordinate."""
        wrapped = np.mod(x, 2 * np.pi)
        big_u = self.u_modal.at_points(wrapped, y) + np.atleast_1d(x)
        return big_u, self.v_modal.at_points(wrapped, y)

    # consistency diagnostics ----------------------------------------------

    def magnitude_identity_residual(self, levels):
        """Pointwise relative defect of |grad xi|^2 = |grad psi|^2 |grad V|^2."""
        x = self.v.nodes
        y = _y_levels(self.h, levels)
        big_v = self.v_modal.on_grid(x, y)
        vx = self._vx.on_grid(x, y)
        vy = self._vy.on_grid(x, y)
        chain = (self.params.g * self.params.A * big_v ** 2 / 2.0
                 + self.state.beta * big_v)
        xi_x = self._ex.on_grid(x, y) + chain * vx
        xi_y = self._ey.on_grid(x, y) + chain * vy
        psi_x, psi_y = self._grad_from(
            self._ex.on_grid(x, y), self._ey.on_grid(x, y), big_v, vx, vy)
        lhs = xi_x ** 2 + xi_y ** 2
        rhs = (psi_x ** 2 + psi_y ** 2) * (vx ** 2 + vy ** 2)
        scale = np.max(np.abs(lhs)) + 1e-300
        return float(np.max(np.abs(lhs - rhs)) / scale)

    def trace_residuals(self, levels):
        """(max|psi on the surface|, max|psi + m on the bed|)."""
        psi = self.sample(levels)["psi"].values
        return (float(np.max(np.abs(psi[-1, :]))),
                float(np.max(np.abs(psi[0, :] + self.m_flux))))


def stream_function(state, params, levels):
    """xi on the strip: zero on the surface trace, -m on the bed."""
    return FlowField(state, params).sample(levels)["psi"]


def velocity_field(state, params, levels):
    """(psi_X, psi_Y) in physical components on the strip grid."""
    fields = FlowField(state, params).sample(levels)
    return fields["psiX"], fields["psiY"]


class StagnationPoint:
    __slots__ = ("x", "y", "X", "Y", "grad_norm", "psi", "refined", "kind")

    def __init__(self, x, y, X, Y, grad_norm, psi, refined, kind):
        self.x = x
        self.y = y
        self.X = X
        self.Y = Y
        self.grad_norm = grad_norm
        self.psi = psi
        self.refined = refined
        self.kind = kind

    def __repr__(self):
        return (f"StagnationPoint(x={self.x:.6g}, Y={self.Y:.6g}, "
                f"|grad|={self.grad_norm:.2e}, kind={self.kind})")


def _laminar_depths(lam, beta, params):
    """Roots of (Y - h)(A g (Y + h)/2 + beta) + lambda = 0 inside [0, h)."""
    g, A, h = params.g, params.A, params.h
    a = A * g / 2.0
    b = beta
    c = lam - beta * h - A * g * h * h / 2.0
    if a == 0.0:
        roots = [] if b == 0.0 else [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            roots = []
        else:
            roots = [(-b + np.sqrt(disc)) / (2 * a), (-b - np.sqrt(disc)) / (2 * a)]
    return sorted(y for y in roots if -1e-12 <= y < h - 1e-12)


def find_stagnation(state, params, levels=129, rel_tol=STAGNATION_REL_TOL):
    """Stagnation points of the pseudo-velocity field (|grad psi| = 0).

    Laminar states are handled analytically (the stagnation set is the
    horizontal line at each admissible depth; one representative entry per
    depth is returned).  Otherwise grid minima of |grad psi| below
    rel_tol * max|grad psi| are refined by a 2-D Newton iteration on
    grad psi = 0; refinement failures are kept and flagged.
    """
    flow = FlowField(state, params)
    h = params.h
    if state.amplitude() < 1e-12 * max(1.0, h):
        points = []
        for depth in _laminar_depths(state.lam, state.beta, params):
            y = depth - h
            gx, gy = flow.grad_at(0.0, y)
            psi = flow.psi_at(0.0, y)
            points.append(StagnationPoint(0.0, y, 0.0, depth,
                                          float(np.hypot(gx, gy)[0]),
                                          float(psi[0]), True, "laminar-line"))
        return points

    fields = flow.sample(levels)
    gx = fields["psiX"].values
    gy = fields["psiY"].values
    gn = np.hypot(gx, gy)
    grad_scale = float(np.max(gn))
    tol = rel_tol * grad_scale
    # a grid cell one spacing from a true zero already sits at
    # |Hessian| * spacing, so candidates are taken coarsely and the stated
    # tolerance is enforced after Newton refinement
    coarse = 0.1 * grad_scale
    local_min = np.ones_like(gn, dtype=bool)
    for dx_roll in (-1, 0, 1):
        rolled = np.roll(gn, dx_roll, axis=1)
        for dy_roll in (-1, 0, 1):
            if dx_roll == 0 and dy_roll == 0:
                continue
            shifted = np.full_like(gn, np.inf)
            if dy_roll == 0:
                shifted = rolled
            elif dy_roll == 1:
                shifted[1:, :] = rolled[:-1, :]
            else:
                shifted[:-1, :] = rolled[1:, :]
            local_min &= gn <= shifted
    candidates = np.argwhere(local_min & (gn < coarse))
    xg = fields["psiX"].x
    yg = fields["psiX"].y
    dx = 2 * np.pi / gn.shape[1]
    dy = h / (levels - 1)

    points = []
    for row, col in candidates:
        x0, y0 = float(xg[col]), float(yg[row])
        x1, y1, ok = _refine_stagnation(flow, x0, y0, h, grad_scale)
        if not ok:
            x1, y1 = x0, y0
        grad = flow.grad_at(x1, y1)
        gnorm = float(np.hypot(grad[0], grad[1])[0])
        if gnorm >= tol:
            continue  # shallow grid minimum, not a stagnation point
        big_x, big_y = flow.map_at(x1, y1)
        psi = float(flow.psi_at(x1, y1)[0])
        points.append(StagnationPoint(float(np.mod(x1, 2 * np.pi)), y1,
                                      float(big_x[0]), float(big_y[0]),
                                      gnorm, psi, ok, "interior"))
    return _dedup_points(points, 2 * max(dx, dy))


def _refine_stagnation(flow, x0, y0, h, scale, max_iter=40):
    hx = 1e-6 * 2 * np.pi
    hy = 1e-6 * h
    x, y = x0, y0
    for _ in range(max_iter):
        gx, gy = flow.grad_at(x, y)
        g = np.array([gx[0], gy[0]])
        if np.max(np.abs(g)) < 1e-13 * scale + 1e-15:
            return x, y, True
        jac = np.empty((2, 2))
        gxp, gyp = flow.grad_at(x + hx, y)
        gxm, gym = flow.grad_at(x - hx, y)
        jac[0, 0] = (gxp[0] - gxm[0]) / (2 * hx)
        jac[1, 0] = (gyp[0] - gym[0]) / (2 * hx)
        gxp, gyp = flow.grad_at(x, y + hy)
        gxm, gym = flow.grad_at(x, y - hy)
        jac[0, 1] = (gxp[0] - gxm[0]) / (2 * hy)
        jac[1, 1] = (gyp[0] - gym[0]) / (2 * hy)
        try:
            step = np.linalg.solve(jac, g)
        except np.linalg.LinAlgError:
            return x, y, False
        x, y = x - step[0], y - step[1]
        if not (-h - 0.1 * h <= y <= 0.1 * h):
            return x0, y0, False
        y = min(max(y, -h), 0.0)
    return x, y, False


def _dedup_points(points, radius):
    kept = []
    for pt in sorted(points, key=lambda p: p.grad_norm):
        dup = False
        for other in kept:
            dx = abs(pt.x - other.x)
            dx = min(dx, 2 * np.pi - dx)
            if np.hypot(dx, pt.y - other.y) < radius:
                dup = True
                break
        if not dup:
            kept.append(pt)
    kept.sort(key=lambda p: (p.x, p.y))
    return kept


class CriticalLayer:
    """Level set of psi through a stagnation value, at one shifted level."""

    __slots__ = ("level", "curves", "physical", "closed", "has_closed_cells")

    def __init__(self, level, curves, physical, closed):
        self.level = level
        self.curves = curves
        self.physical = physical
        self.closed = closed
        self.has_closed_cells = any(closed)


def critical_layer(state, params, stagnation, levels=129):
    """Trace psi level sets through the stagnation values.

    The saddle ambiguity is resolved by shifting each level by +-1e-12 times
    the psi scale and reporting both shifted sets.  The trace window spans
    two periods (x in [-pi, 3pi]) so recirculation cells centred on either
    the crest or the trough line appear whole; periodic duplicates of a cell
    are therefore possible and harmless for plotting.
    """
    if not stagnation:
        return []
    flow = FlowField(state, params)
    psi = flow.sample(levels)["psi"]
    m = psi.grid_size
    idx = np.arange(-(m // 2), m + m // 2 + 1)
    x_ext = 2 * np.pi * idx / m
    z = psi.values[:, np.mod(idx, m)]
    gen = contourpy.contour_generator(x=x_ext, y=psi.y, z=z)
    scale = max(float(np.max(np.abs(psi.values))), 1e-300)
    shift = LEVEL_SHIFT * scale

    values = []
    for pt in stagnation:
        if not any(abs(pt.psi - v) <= 1e-10 * scale for v in values):
            values.append(pt.psi)

    # levels at an extremum of psi (laminar critical lines) may fall just
    # outside the sampled range; clip into what the grid attains
    lo = float(np.min(z)) + shift
    hi = float(np.max(z)) - shift
    layers = []
    for value in values:
        for level in (value - shift, value + shift):
            level = min(max(level, lo), hi)
            curves = [np.asarray(line) for line in gen.lines(level)]
            curves = [c for c in curves if len(c) > 1]
            closed = [bool(np.allclose(c[0], c[-1])) for c in curves]
            physical = []
            for c in curves:
                big_x, big_y = flow.map_at(c[:, 0], c[:, 1])
                physical.append(np.column_stack([big_x, big_y]))
            layers.append(CriticalLayer(level, curves, physical, closed))
    return layers
