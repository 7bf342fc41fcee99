import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdkinetics.errors import (
    InvalidKernelError,
    ProfileOverflowError,
    SupercriticalMassError,
)
from bdkinetics.kernels import (
    ConstantKernel,
    LinearCoagulationKernel,
    PowerLawKernel,
    TabulatedKernel,
    activity_for_mass,
    critical_activity,
    critical_mass,
    detailed_balance_coefficients,
    equilibrium_profile,
    equilibrium_series,
    kernel_from_dict,
    kernel_to_dict,
)

# closed-form root of z/(1-z)^2 = 1
Z_STAR = (3.0 - math.sqrt(5.0)) / 2.0


def zeta3_oracle():
    """Direct summation of sum i^-3 to 1e7 terms plus the integral tail bracket."""
    n = 10**7
    i = np.arange(1, n + 1, dtype=np.float64)
    partial = float(np.sum(1.0 / i**3))
    return partial + 1.0 / (2.0 * (n + 1) ** 2), partial + 1.0 / (2.0 * n**2)


positive = st.floats(min_value=0.01, max_value=100.0, allow_nan=False)


class TestDetailedBalanceCoefficients:
    def test_constant_unit_rates_all_one(self):
        log_q = detailed_balance_coefficients(ConstantKernel(1.0, 1.0), 5)
        assert np.array_equal(log_q, np.zeros(5))

    def test_power_law_matches_brute_force_product(self):
        # oracle: Q_i = prod_{j<i} ((j+1)/j)^-4 accumulated as a plain product
        q_brute = [1.0]
        for j in range(1, 10):
            q_brute.append(q_brute[-1] * (j / (j + 1.0)) ** 4)
        log_q = detailed_balance_coefficients(PowerLawKernel(4.0), 10)
        np.testing.assert_allclose(np.exp(log_q), q_brute, rtol=1e-13)
        np.testing.assert_allclose(np.exp(log_q[:3]), [1.0, 0.0625, 1.0 / 81.0], rtol=1e-13)

    def test_tabulated_hand_product(self):
        kernel = TabulatedKernel(a_table=(2.0, 3.0), b_table=(5.0, 7.0))
        q = np.exp(detailed_balance_coefficients(kernel, 3))
        np.testing.assert_allclose(q, [1.0, 2.0 / 5.0, 6.0 / 35.0], rtol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(positive, min_size=6, max_size=6), st.lists(positive, min_size=6, max_size=6))
    def test_recursion_consistency(self, a_vals, b_vals):
        kernel = TabulatedKernel(tuple(a_vals), tuple(b_vals))
        log_q = detailed_balance_coefficients(kernel, 6)
        for i in range(1, 6):
            lhs = math.exp(log_q[i] - log_q[i - 1]) * kernel.b(i + 1)
            assert lhs == pytest.approx(kernel.a(i), rel=1e-12)

    def test_power_law_identity_to_1e4(self):
        i_max = 10**4
        log_q = detailed_balance_coefficients(PowerLawKernel(4.0), i_max)
        expected = -4.0 * np.log(np.arange(1, i_max + 1, dtype=np.float64))
        np.testing.assert_allclose(np.exp(log_q - expected), 1.0, rtol=1e-10)

    def test_nonpositive_rates_rejected(self):
        with pytest.raises(InvalidKernelError):
            ConstantKernel(0.0, 1.0)
        with pytest.raises(InvalidKernelError):
            TabulatedKernel((1.0, -2.0), (1.0, 1.0))
        with pytest.raises(InvalidKernelError):
            LinearCoagulationKernel(-1.0, 1.0)


class TestCriticalActivity:
    def test_constant_kernel(self):
        est = critical_activity(ConstantKernel(1.0, 1.0))
        assert est.value == 1.0
        assert est.source == "analytic"
        # diagnostics (log Q_i)/i are exactly zero here
        assert np.all(est.diagnostics == 0.0)

    def test_power_law_probe_approaches_one(self):
        est = critical_activity(PowerLawKernel(4.0), i_probe=10_000, prefer_analytic=False)
        assert est.source == "probe"
        assert est.value == pytest.approx(1.0, abs=5e-3)
        large = critical_activity(PowerLawKernel(4.0), i_probe=1000)
        assert large.value == 1.0  # analytic path

    def test_halving_ratio_table(self):
        # Q_i = 2^-(i-1): the probe estimate is 2^((i-1)/i), approaching 2 from below
        probe = 2000
        kernel = TabulatedKernel((1.0,) * probe, (2.0,) * probe)
        est = critical_activity(kernel, i_probe=probe)
        assert est.value == pytest.approx(2.0, rel=1e-3)
        assert est.value < 2.0

    def test_probe_too_small_rejected(self):
        with pytest.raises(ValueError):
            critical_activity(ConstantKernel(), i_probe=5)


class TestCriticalMass:
    def test_constant_kernel_diverges(self):
        cm = critical_mass(ConstantKernel(1.0, 1.0), 1.0)
        assert cm.diverged and math.isinf(cm.value)

    def test_power_law_matches_zeta3(self):
        lo, hi = zeta3_oracle()
        cm = critical_mass(PowerLawKernel(4.0), 1.0, tol=1e-10)
        assert not cm.diverged
        assert lo - cm.tail_bound - 1e-12 <= cm.value <= hi + 1e-12
        assert cm.value == pytest.approx(0.5 * (lo + hi), abs=1e-9)

    def test_halving_table_at_critical_activity_diverges(self):
        # terms i Q_i z^i with Q_i = 2^-(i-1), z = 2: equal to 2i, never decaying
        kernel = TabulatedKernel((1.0,) * 64, (2.0,) * 64)
        cm = critical_mass(kernel, 2.0)
        assert cm.diverged


class TestActivityForMass:
    def test_constant_kernel_closed_form(self):
        z = activity_for_mass(ConstantKernel(1.0, 1.0), 1.0, tol=1e-10)
        assert z == pytest.approx(Z_STAR, abs=1e-9)

    def test_small_mass_gives_small_activity(self):
        z = activity_for_mass(ConstantKernel(1.0, 1.0), 1e-6, tol=1e-12)
        assert 0 < z < 1e-5

    def test_critical_mass_returns_critical_activity(self):
        lo, hi = zeta3_oracle()
        z = activity_for_mass(PowerLawKernel(4.0), 0.5 * (lo + hi), tol=1e-8)
        assert z == 1.0

    def test_supercritical_mass_rejected(self):
        with pytest.raises(SupercriticalMassError) as err:
            activity_for_mass(PowerLawKernel(4.0), 2.0, tol=1e-10)
        assert err.value.zs == 1.0

    def test_linear_coagulation_has_no_equilibria(self):
        with pytest.raises(SupercriticalMassError):
            activity_for_mass(LinearCoagulationKernel(1.0, 1.0), 0.5)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.01, max_value=5.0))
    def test_round_trip_mass(self, rho):
        tol = 1e-9
        z = activity_for_mass(ConstantKernel(1.0, 1.0), rho, tol=tol)
        series = equilibrium_series(ConstantKernel(1.0, 1.0), z, moment=1, tol=tol / 10)
        assert abs(series.value - rho) <= 2 * tol

    @settings(max_examples=20, deadline=None)
    @given(st.floats(min_value=0.05, max_value=0.95), st.floats(min_value=0.05, max_value=0.95))
    def test_mass_monotone_in_activity(self, z1, z2):
        lo, hi = sorted((z1, z2))
        if hi - lo < 1e-6:
            return
        kernel = ConstantKernel(1.0, 1.0)
        m_lo = equilibrium_series(kernel, lo, moment=1, tol=1e-12).value
        m_hi = equilibrium_series(kernel, hi, moment=1, tol=1e-12).value
        assert m_lo < m_hi


class TestEquilibriumProfile:
    def test_unit_coefficients_are_powers(self):
        prof = equilibrium_profile(ConstantKernel(1.0, 1.0), 0.5, 4)
        np.testing.assert_allclose(prof.coefficients, [0.5, 0.25, 0.125, 0.0625], rtol=1e-14)

    def test_power_law_at_unit_activity_equals_q(self):
        prof = equilibrium_profile(PowerLawKernel(4.0), 1.0, 3)
        np.testing.assert_allclose(prof.coefficients, [1.0, 0.0625, 1.0 / 81.0], rtol=1e-13)

    def test_mass_approaches_rho_with_truncation(self):
        prof = equilibrium_profile(ConstantKernel(1.0, 1.0), Z_STAR, 200)
        assert prof.mass == pytest.approx(1.0, abs=1e-12)
        assert prof.mass_tail_bound < 1e-12

    def test_overflow_names_first_offending_index(self):
        with pytest.raises(ProfileOverflowError) as err:
            equilibrium_profile(ConstantKernel(1.0, 1.0), 20.0, 400)
        assert err.value.i == 237  # first i with i*log(20) > 709

    def test_mass_tail_bound_rigorous(self):
        prof = equilibrium_profile(ConstantKernel(1.0, 1.0), 0.5, 30)
        true_tail = equilibrium_series(ConstantKernel(1.0, 1.0), 0.5, 1, tol=1e-15).value - prof.mass
        assert 0 < true_tail <= prof.mass_tail_bound


class TestSerialization:
    @pytest.mark.parametrize("kernel", [
        ConstantKernel(2.0, 3.0),
        LinearCoagulationKernel(1.5, 2.0),
        PowerLawKernel(4.0),
        TabulatedKernel((1.0, 2.0), (3.0, 4.0)),
    ])
    def test_round_trip(self, kernel):
        assert kernel_from_dict(kernel_to_dict(kernel)) == kernel
