"""Flow reconstruction: harmonic extensions, conformal map, stream function,
velocities, stagnation points and critical layers."""

import math

import numpy as np
import pytest

from stripwave.continuation import SolverOptions, switch_branch
from stripwave.dispersion import bifurcation_points
from stripwave.errors import ParameterError
from stripwave.flowfield import (FlowField, StripField2D,
                                 cauchy_riemann_residual, conformal_map,
                                 critical_layer, find_stagnation,
                                 harmonic_extension, laplacian_residual,
                                 stream_function, velocity_field)
from stripwave.residual import PhysicalParams, WaveState, derived_quantities
from stripwave.spectral import (PeriodicField, coth, dirichlet_neumann,
                                grid_nodes)

M = 256
OPTS = SolverOptions(n_modes=32, grid_size=M)


def laminar_state(lam, beta, params):
    return WaveState.trivial(lam, beta, M)


class TestHarmonicExtension:
    def test_constant_boundary_is_linear_profile(self):
        field = harmonic_extension(PeriodicField(np.full(M, 3.0)), 2.0, 33)
        y = field.y
        np.testing.assert_allclose(field.values,
                                   np.tile(3.0 * (y + 2.0)[:, None] / 2.0, (1, M)),
                                   atol=1e-13)

    def test_matches_boundary_and_bed(self):
        rng = np.random.default_rng(7)
        boundary = PeriodicField.from_callable(
            lambda x: 1.0 + sum(c * np.cos((k + 1) * x)
                                for k, c in enumerate(rng.normal(size=5))), M)
        field = harmonic_extension(boundary, 1.0, 65)
        np.testing.assert_allclose(field.values[-1], boundary.samples, atol=1e-12)
        np.testing.assert_allclose(field.values[0], 0.0, atol=1e-12)

    def test_mode_profile(self):
        n, h = 3, 0.8
        field = harmonic_extension(
            PeriodicField.from_callable(lambda x: np.cos(n * x), M), h, 33)
        x = grid_nodes(M)
        for k, y in enumerate(field.y):
            profile = math.sinh(n * (y + h)) / math.sinh(n * h)
            np.testing.assert_allclose(field.values[k], profile * np.cos(n * x),
                                       atol=1e-13)

    def test_vertical_derivative_matches_dirichlet_neumann(self):
        # 5-point one-sided difference at the surface against the multiplier
        h, levels = 1.0, 4097
        boundary = PeriodicField.from_callable(
            lambda x: 0.5 + np.cos(x) + 0.3 * np.cos(4 * x), M)
        field = harmonic_extension(boundary, h, levels)
        dy = h / (levels - 1)
        v = field.values
        deriv = (25 * v[-1] - 48 * v[-2] + 36 * v[-3] - 16 * v[-4] + 3 * v[-5]) / (12 * dy)
        target = dirichlet_neumann(boundary, h).samples
        assert np.max(np.abs(deriv - target)) < 1e-10 * np.max(np.abs(target))

    def test_harmonicity(self):
        boundary = PeriodicField.from_callable(
            lambda x: 1.0 + 0.2 * np.cos(x) + 0.05 * np.cos(7 * x), M)
        field = harmonic_extension(boundary, 1.0, 129)
        assert laplacian_residual(field) < 1e-8

    def test_rejects_bad_levels(self):
        with pytest.raises(ParameterError):
            harmonic_extension(PeriodicField.zeros(M), 1.0, 1)


class TestConformalMap:
    def test_flat_surface_is_identity(self):
        v = PeriodicField(np.full(M, 1.0))
        u_field, v_field = conformal_map(v, 1.0, 33)
        x = grid_nodes(M)
        y = v_field.y
        np.testing.assert_allclose(u_field.values, np.tile(x, (33, 1)), atol=1e-13)
        np.testing.assert_allclose(v_field.values,
                                   np.tile((y + 1.0)[:, None], (1, M)), atol=1e-13)

    def test_surface_trace(self):
        from stripwave.spectral import hilbert_samples
        v = PeriodicField.from_callable(lambda x: 1.0 + 0.1 * np.cos(2 * x), M)
        u_field, v_field = conformal_map(v, 1.0, 33)
        x = grid_nodes(M)
        expected = x + hilbert_samples(v.samples - 1.0, 1.0)
        np.testing.assert_allclose(u_field.values[-1], expected, atol=1e-12)
        np.testing.assert_allclose(v_field.values[-1], v.samples, atol=1e-12)
        assert u_field.values[-1][0] == pytest.approx(0.0, abs=1e-13)

    def test_cauchy_riemann(self):
        v = PeriodicField.from_callable(
            lambda x: 1.0 + 0.08 * np.cos(x) + 0.03 * np.cos(3 * x), M)
        res = cauchy_riemann_residual(v, 1.0, 65)
        _, v_field = conformal_map(v, 1.0, 65)
        scale = np.max(np.abs(v_field.values))
        assert res < 1e-8 * scale

    def test_conjugate_harmonicity(self):
        v = PeriodicField.from_callable(lambda x: 1.0 + 0.1 * np.cos(2 * x), M)
        u_field, v_field = conformal_map(v, 1.0, 65)
        periodic_part = StripField2D(u_field.values - grid_nodes(M)[None, :], 1.0)
        assert laplacian_residual(periodic_part) < 1e-8
        assert laplacian_residual(v_field) < 1e-8


class TestStreamFunction:
    def test_laminar_profile_matches_closed_form(self):
        params = PhysicalParams(A=0.4)
        state = laminar_state(2.0, 1.5, params)
        xi = stream_function(state, params, 65)
        d = derived_quantities(state, params)
        y_levels = xi.y
        Y = y_levels + params.h
        expected = (state.beta / 2 * Y ** 2 + params.g * params.A / 6 * Y ** 3
                    + (d.m / params.h - state.beta * params.h / 2
                       - params.g * params.A * params.h ** 2 / 6) * Y - d.m)
        for k in range(len(y_levels)):
            np.testing.assert_allclose(xi.values[k], expected[k], atol=1e-10)

    def test_traces_for_nontrivial_state(self):
        params = PhysicalParams()
        state = switch_branch(1, +1, 0.0, 5e-3, params, OPTS)
        flow = FlowField(state, params)
        top, bottom = flow.trace_residuals(65)
        assert top < 1e-10
        assert bottom < 1e-10


class TestVelocityField:
    def test_laminar_velocity_profile(self):
        params = PhysicalParams(A=0.6)
        state = laminar_state(1.3, 0.8, params)
        psi_x, psi_y = velocity_field(state, params, 65)
        d = derived_quantities(state, params)
        Y = psi_y.y + params.h
        expected = (state.beta * Y + params.A * params.g / 2 * Y ** 2
                    + d.m / params.h - state.beta * params.h / 2
                    - params.A * params.g * params.h ** 2 / 6)
        for k in range(len(Y)):
            np.testing.assert_allclose(psi_y.values[k], expected[k], atol=1e-10)
        np.testing.assert_allclose(psi_x.values, 0.0, atol=1e-10)

    def test_magnitude_identity(self):
        params = PhysicalParams()
        state = switch_branch(1, +1, 0.0, 5e-3, params, OPTS)
        flow = FlowField(state, params)
        assert flow.magnitude_identity_residual(65) < 1e-8

    def test_crest_column_velocity_is_vertical(self):
        params = PhysicalParams()
        state = switch_branch(1, +1, 0.0, 5e-3, params, OPTS)
        psi_x, _ = velocity_field(state, params, 65)
        np.testing.assert_allclose(psi_x.values[:, 0], 0.0, atol=1e-11)


class TestStagnation:
    def test_uniform_stream_has_none(self):
        params = PhysicalParams(A=0.0)
        state = laminar_state(2.0, 0.0, params)
        assert find_stagnation(state, params, levels=65) == []

    def test_laminar_depth_linear_case(self):
        params = PhysicalParams(A=0.0)
        beta = 10.0
        lam = bifurcation_points(1, beta, params).lambda_plus
        state = laminar_state(lam, beta, params)
        points = find_stagnation(state, params, levels=65)
        assert len(points) == 1
        pt = points[0]
        assert pt.kind == "laminar-line"
        assert pt.Y == pytest.approx(params.h - lam / beta, abs=1e-12)
        assert pt.grad_norm < 1e-10

    def test_laminar_depth_quadratic_case(self):
        params = PhysicalParams(A=0.8)
        beta, lam = 4.0, 1.0
        state = laminar_state(lam, beta, params)
        points = find_stagnation(state, params, levels=65)
        # oracle: roots of (Ag/2) Y^2 + beta Y + lam - beta h - Ag h^2/2
        roots = np.roots([params.A * params.g / 2, beta,
                          lam - beta * params.h
                          - params.A * params.g * params.h ** 2 / 2])
        inside = sorted(r for r in roots.real if 0 <= r < params.h)
        assert len(points) == len(inside)
        for pt, root in zip(points, inside):
            assert pt.Y == pytest.approx(root, abs=1e-10)

    def test_perturbed_wave_keeps_interior_points(self):
        params = PhysicalParams(A=0.0)
        beta = 10.0
        lam_star = bifurcation_points(1, beta, params).lambda_plus
        state = switch_branch(1, +1, beta, 5e-3, params, OPTS)
        points = find_stagnation(state, params, levels=129)
        assert points, "perturbed wave lost its stagnation points"
        depth = params.h - lam_star / beta
        dx = 2 * np.pi / M
        for pt in points:
            assert pt.refined
            assert pt.Y == pytest.approx(depth, abs=0.05)
            dist = min(pt.x % np.pi, np.pi - pt.x % np.pi)
            assert dist < dx
        xs = sorted(round(pt.x, 6) % (2 * np.pi) for pt in points)
        crest = [x for x in xs if min(x, 2 * np.pi - x) < dx]
        trough = [x for x in xs if abs(x - np.pi) < dx]
        assert crest and trough

    def test_stagnation_set_symmetric(self):
        params = PhysicalParams(A=0.0)
        state = switch_branch(1, +1, 10.0, 5e-3, params, OPTS)
        points = find_stagnation(state, params, levels=129)
        xs = np.array([pt.x for pt in points])
        ys = np.array([pt.y for pt in points])
        for x, y in zip(xs, ys):
            mirrored = (-x) % (2 * np.pi)
            dist = np.min(np.hypot(
                np.minimum(np.abs(xs - mirrored),
                           2 * np.pi - np.abs(xs - mirrored)), ys - y))
            assert dist < 1e-6


class TestCriticalLayer:
    def test_no_stagnation_no_layers(self):
        params = PhysicalParams(A=0.0)
        state = laminar_state(2.0, 0.0, params)
        assert critical_layer(state, params, [], levels=65) == []

    def test_laminar_layer_is_horizontal(self):
        params = PhysicalParams(A=0.0)
        beta = 10.0
        lam = bifurcation_points(1, beta, params).lambda_plus
        state = laminar_state(lam, beta, params)
        points = find_stagnation(state, params, levels=65)
        layers = critical_layer(state, params, points, levels=65)
        assert layers
        y0 = points[0].Y - params.h
        dy = params.h / 64
        curves = [c for layer in layers for c in layer.curves]
        assert curves
        for curve in curves:
            # the extremum level is clipped to what the grid attains, so the
            # line sits within one vertical spacing of the analytic depth
            assert np.ptp(curve[:, 1]) < 1e-5
            assert abs(curve[0, 1] - y0) < 1.5 * dy

    def test_perturbed_wave_has_closed_cells(self):
        params = PhysicalParams(A=0.0)
        state = switch_branch(1, +1, 10.0, 5e-3, params, OPTS)
        points = find_stagnation(state, params, levels=129)
        layers = critical_layer(state, params, points, levels=129)
        assert any(layer.has_closed_cells for layer in layers)

    def test_physical_mapping_shape(self):
        params = PhysicalParams(A=0.0)
        state = switch_branch(1, +1, 10.0, 5e-3, params, OPTS)
        points = find_stagnation(state, params, levels=65)
        layers = critical_layer(state, params, points, levels=65)
        for layer in layers:
            assert len(layer.curves) == len(layer.physical) == len(layer.closed)
            for strip, phys in zip(layer.curves, layer.physical):
                assert strip.shape == phys.shape
