import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bdkinetics.kernels import ConstantKernel, activity_for_mass, equilibrium_profile
from bdkinetics.ode import (
    IntegratorConfig,
    entropy_along_trajectory,
    fluxes,
    integrate,
    rhs,
    truncation_tail_mass,
)

CONST = ConstantKernel(1.0, 1.0)
Z_STAR = activity_for_mass(CONST, 1.0, tol=1e-12)

nonneg_states = arrays(
    np.float64, st.integers(min_value=2, max_value=40),
    elements=st.floats(min_value=0.0, max_value=5.0, allow_nan=False),
)


class TestFluxes:
    def test_equilibrium_profile_has_zero_flux(self):
        c = equilibrium_profile(CONST, Z_STAR, 50).coefficients
        scale = np.max(np.abs(c[:-1]))
        np.testing.assert_allclose(fluxes(c, CONST), 0.0, atol=1e-12 * scale)

    def test_pure_monomers(self):
        j = fluxes(np.array([1.0, 0.0, 0.0, 0.0]), CONST)
        np.testing.assert_allclose(j, [1.0, 0.0, 0.0])

    def test_two_component_equilibrium(self):
        assert fluxes(np.array([0.5, 0.25]), CONST)[0] == pytest.approx(0.0, abs=1e-15)


class TestRhs:
    @settings(max_examples=60, deadline=None)
    @given(nonneg_states)
    def test_mass_telescoping_identity(self, c):
        out = rhs(c, CONST)
        weights = np.arange(1, len(c) + 1)
        scale = max(1.0, float(np.abs(weights * out).max()))
        assert abs(float(weights @ out)) <= 1e-12 * scale

    def test_equilibrium_is_fixed_point(self):
        c = equilibrium_profile(CONST, Z_STAR, 60).coefficients
        scale = max(abs(CONST.a(1)) * c[0] * c.max(), 1e-300)
        assert np.max(np.abs(rhs(c, CONST))) <= 1e-12 * scale

    def test_two_component_monomeric(self):
        np.testing.assert_allclose(rhs(np.array([1.0, 0.0]), CONST), [-2.0, 1.0])


class TestIntegrate:
    def test_zero_horizon(self):
        c0 = np.array([1.0, 0.0, 0.0])
        sol = integrate(c0, CONST, 0.0, IntegratorConfig(truncation=3))
        np.testing.assert_array_equal(sol.conc[0], c0)

    def test_two_component_limit(self):
        # closure at I=2: flux zero and mass one force 2 c1^2 + c1 = 1, c1 = 1/2
        sol = integrate(np.array([1.0, 0.0]), CONST, 60.0, IntegratorConfig(truncation=2))
        np.testing.assert_allclose(sol.conc[-1], [0.5, 0.25], atol=1e-9)

    def test_mass_drift_within_budget(self):
        sol = integrate(np.array([1.0]), CONST, 10.0, IntegratorConfig(truncation=100))
        assert sol.mass_drift <= 1e-8 * sol.mass_initial

    def test_equilibrium_stays_put(self):
        c0 = equilibrium_profile(CONST, Z_STAR, 80).coefficients
        sol = integrate(c0, CONST, 5.0, IntegratorConfig(truncation=80))
        np.testing.assert_allclose(sol.conc[-1], c0, atol=1e-9)

    def test_truncation_consistency(self):
        base = IntegratorConfig(truncation=40)
        doubled = IntegratorConfig(truncation=80)
        grid = np.linspace(0, 5, 11)
        small = integrate(np.array([1.0]), CONST, 5.0, base, grid=grid)
        large = integrate(np.array([1.0]), CONST, 5.0, doubled, grid=grid)
        assert truncation_tail_mass(small) < 1e-8
        np.testing.assert_allclose(small.conc[:, :20], large.conc[:, :20], atol=1e-6)

    def test_rhs_matches_flow_derivative(self):
        # Richardson-extrapolated forward differences of the flow map
        c0 = integrate(np.array([1.0]), CONST, 0.7, IntegratorConfig(truncation=30)).conc[-1]
        cfg = IntegratorConfig(truncation=30, rtol=1e-12, atol=1e-14)
        h = 1e-4

        def flow(dt):
            return integrate(c0, CONST, dt, cfg, grid=np.array([dt])).conc[-1]

        d_h = (flow(h) - c0) / h
        d_h2 = (flow(h / 2) - c0) / (h / 2)
        derivative = 2 * d_h2 - d_h
        expected = rhs(c0, CONST)
        scale = np.abs(expected).max()
        np.testing.assert_allclose(derivative, expected, atol=1e-5 * scale)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            integrate(np.array([-0.1, 0.0]), CONST, 1.0, IntegratorConfig(truncation=2))
        with pytest.raises(ValueError):
            IntegratorConfig(truncation=1)


class TestEntropyMonitoring:
    def test_equilibrium_start_is_flat_zero(self):
        c0 = equilibrium_profile(CONST, Z_STAR, 80).coefficients
        sol = integrate(c0, CONST, 3.0, IntegratorConfig(truncation=80),
                        grid=np.linspace(0, 3, 7))
        h = entropy_along_trajectory(sol, CONST, Z_STAR)
        np.testing.assert_allclose(h, 0.0, atol=1e-8)

    def test_monomeric_run_dissipates(self):
        sol = integrate(np.array([1.0]), CONST, 10.0, IntegratorConfig(truncation=80),
                        grid=np.linspace(0, 10, 41))
        h = entropy_along_trajectory(sol, CONST, Z_STAR)
        assert np.all(np.diff(h) <= 1e-8)
        assert np.all(h >= 0.0)
        assert h[0] > h[-1]  # strict decay from monomeric data to the plateau

    def test_entropy_nonnegative_at_matched_activity(self):
        sol = integrate(np.array([0.4, 0.1, 0.0, 0.0]), CONST, 2.0,
                        IntegratorConfig(truncation=30), grid=np.linspace(0, 2, 5))
        z = activity_for_mass(CONST, 0.6, tol=1e-12)
        assert np.all(entropy_along_trajectory(sol, CONST, z) >= 0.0)
