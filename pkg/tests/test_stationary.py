import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdkinetics.errors import DivergentReferenceError, InvalidStateError
from bdkinetics.kernels import (
    ConstantKernel,
    PowerLawKernel,
    TabulatedKernel,
    activity_for_mass,
    equilibrium_profile,
)
from bdkinetics.state import Configuration, enumerate_states, from_monomers
from bdkinetics.stationary import (
    ctmc_stationary_oracle,
    detailed_balance_check,
    log_stationary_weight,
    nonequilibrium_potential,
    potential_decomposition,
    relative_entropy,
    stationary_table,
    stirling_remainder,
)

CONST = ConstantKernel(1.0, 1.0)
POWER = PowerLawKernel(4.0)
Z_STAR = activity_for_mass(CONST, 1.0, tol=1e-12)

# hand-solved three-state law: pi1*2 = pi2, pi2/3 = pi3
N3_LAW = np.array([3.0, 6.0, 2.0]) / 11.0


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


class TestWeights:
    def test_three_state_weight_ratios(self):
        # unnormalized weights proportional to 27/6 : 9 : 3 at any z
        cfgs = enumerate_states(3, 1.0)
        w = np.array([log_stationary_weight(c, CONST, 1.0) for c in cfgs])
        ratios = np.exp(w - w[-1]) * 3.0
        np.testing.assert_allclose(ratios, [4.5, 9.0, 3.0], rtol=1e-12)

    def test_activity_shift_is_state_independent(self):
        cfgs = enumerate_states(6, 1.0)
        lam = 1.7
        w1 = np.array([log_stationary_weight(c, CONST, 0.8) for c in cfgs])
        w2 = np.array([log_stationary_weight(c, CONST, 0.8 * lam) for c in cfgs])
        shifts = w2 - w1
        np.testing.assert_allclose(shifts, shifts[0], atol=1e-10)

    def test_single_state_space(self):
        table = stationary_table(1, 1.0, CONST, z=0.37)
        assert len(table) == 1
        assert table.probabilities[0] == pytest.approx(1.0, abs=1e-15)


class TestStationaryTable:
    def test_three_state_law(self):
        table = stationary_table(3, 1.0, CONST, z=1.0)
        np.testing.assert_allclose(table.probabilities, N3_LAW, atol=1e-14)
        assert table.probabilities.sum() == pytest.approx(1.0, abs=1e-12)

    def test_activity_invariance(self):
        a = stationary_table(3, 1.0, CONST, z=0.5)
        b = stationary_table(3, 1.0, CONST, z=2.0)
        np.testing.assert_allclose(a.probabilities, b.probabilities, atol=1e-12)

    def test_matches_table_weight_function(self):
        table = stationary_table(7, 1.0, POWER, z=0.9)
        for idx in (0, 3, len(table) - 1):
            cfg = table.configuration(idx)
            assert log_stationary_weight(cfg, POWER, 0.9) == pytest.approx(
                float(table.log_weights[idx]), rel=1e-12, abs=1e-10
            )


class TestOracleAgreement:
    def test_three_state_oracle_exact(self):
        np.testing.assert_allclose(ctmc_stationary_oracle(3, 1.0, CONST), N3_LAW, atol=1e-13)

    def test_two_state_balance(self):
        np.testing.assert_allclose(ctmc_stationary_oracle(2, 1.0, CONST), [0.5, 0.5], atol=1e-14)

    @pytest.mark.parametrize("kernel", [CONST, POWER,
                                        TabulatedKernel((0.7, 1.3, 0.9, 2.0, 1.1, 0.8),
                                                        (1.2, 0.6, 1.9, 0.8, 1.4, 1.0))])
    def test_table_matches_oracle(self, kernel):
        for n in range(2, 7):
            table = stationary_table(n, 1.0, kernel, z=1.0)
            oracle = ctmc_stationary_oracle(n, 1.0, kernel)
            assert total_variation(table.probabilities, oracle) <= 1e-10


class TestDetailedBalance:
    def test_three_state(self):
        assert detailed_balance_check(stationary_table(3, 1.0, CONST, z=1.0)) <= 1e-12

    def test_no_edges_at_n1(self):
        assert detailed_balance_check(stationary_table(1, 1.0, CONST, z=1.0)) == 0.0

    def test_power_law_n6(self):
        assert detailed_balance_check(stationary_table(6, 1.0, POWER, z=1.0)) <= 1e-10


class TestRelativeEntropy:
    def test_zero_at_reference(self):
        c = equilibrium_profile(CONST, Z_STAR, 200).coefficients
        assert relative_entropy(c, CONST, Z_STAR) == pytest.approx(0.0, abs=1e-12)

    def test_empty_state_gives_reference_sum(self):
        # only the Q_i z^i terms survive: geometric sum z/(1-z)
        z = Z_STAR
        assert relative_entropy(np.array([]), CONST, z) == pytest.approx(z / (1 - z), rel=1e-12)

    def test_monomeric_closed_form(self):
        h = relative_entropy(np.array([1.0]), CONST, Z_STAR)
        expected = (math.log(1.0 / Z_STAR) - 1.0) + Z_STAR / (1.0 - Z_STAR)
        assert h == pytest.approx(expected, rel=1e-12)
        assert h == pytest.approx(0.5804576388691017, rel=1e-10)

    def test_divergent_reference_rejected(self):
        with pytest.raises(DivergentReferenceError):
            relative_entropy(np.array([1.0]), CONST, 1.0)  # critical activity itself

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(min_value=0.0, max_value=2.0), min_size=1, max_size=12))
    def test_nonnegative(self, c):
        assert relative_entropy(np.array(c), CONST, 0.5) >= 0.0


class TestStirlingRemainder:
    def test_singleton_clusters_contribute_rho_over_n(self):
        cfg = Configuration(3, 1.0, {3: 1})
        assert stirling_remainder(cfg) == pytest.approx(1.0 / 3.0, rel=1e-14)
        cfg2 = Configuration(4, 2.0, {1: 1, 3: 1})
        assert stirling_remainder(cfg2) == pytest.approx(2.0 / 4.0 * 2.0, rel=1e-14)

    def test_large_monomeric_matches_stirling_series(self):
        n = 10**4
        cfg = from_monomers(n, 1.0)
        expected = 0.5 * math.log(2 * math.pi * n) / n
        assert stirling_remainder(cfg) == pytest.approx(expected, abs=1e-6)

    def test_summands_bounded_by_log(self):
        # each summand lies in [0, K (rho/n) ln(count)] for counts >= 2
        for count in (2, 5, 100, 10**6):
            value = math.lgamma(count + 1) - count * math.log(count) + count
            assert 0 <= value <= 2.0 * math.log(count)


class TestPotential:
    def test_three_state_value(self):
        table = stationary_table(3, 1.0, CONST, z=1.0)
        pot = nonequilibrium_potential(from_monomers(3, 1.0), table)
        assert pot == pytest.approx(0.4330943280434203, rel=1e-12)

    def test_argmin_is_mode(self):
        table = stationary_table(8, 1.0, CONST, z=0.7)
        pots = np.array([
            nonequilibrium_potential(table.configuration(i), table) for i in range(len(table))
        ])
        assert int(np.argmin(pots)) == int(np.argmax(table.probabilities))

    def test_foreign_state_rejected(self):
        table = stationary_table(4, 1.0, CONST, z=1.0)
        with pytest.raises(InvalidStateError):
            nonequilibrium_potential(from_monomers(5, 1.0), table)


class TestPotentialDecomposition:
    @pytest.mark.parametrize("kernel,zs", [(CONST, (0.3, 0.6, 0.9)), (POWER, (0.3, 0.6, 1.0))])
    def test_identity_exhaustive(self, kernel, zs):
        for z in zs:
            table = stationary_table(6, 1.0, kernel, z=z)
            for idx in range(len(table)):
                report = potential_decomposition(table.configuration(idx), kernel, z, table)
                assert report.identity_gap <= 1e-10

    def test_reconstruction_is_activity_free(self):
        cfg = Configuration(5, 1.0, {1: 1, 2: 2})
        values = []
        for z in (0.3, 0.6, 0.9):
            table = stationary_table(5, 1.0, CONST, z=z)
            values.append(potential_decomposition(cfg, CONST, z, table).reconstructed)
        np.testing.assert_allclose(values, values[0], atol=1e-11)

    def test_mismatched_activity_rejected(self):
        table = stationary_table(4, 1.0, CONST, z=0.5)
        with pytest.raises(ValueError):
            potential_decomposition(from_monomers(4, 1.0), CONST, 0.6, table)


class TestNormalizerTrend:
    def test_log_normalizer_nonpositive_and_shrinking(self):
        """(rho/n) log B at the mass-matched activity: <= 0 for all n and
        eventually monotone toward 0."""
        values = []
        for n in (10, 20, 30, 40, 50, 60):
            table = stationary_table(n, 1.0, CONST, z=Z_STAR)
            values.append(table.log_normalizer / n)
        values = np.array(values)
        assert np.all(values <= 0.0)
        magnitudes = np.abs(values)
        assert np.all(np.diff(magnitudes[1:]) < 0.0)  # monotone from n = 20 on
