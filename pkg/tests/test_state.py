import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bdkinetics.errors import InfeasibleJumpError, StateSpaceTooLargeError
from bdkinetics.state import (
    Configuration,
    apply_jump,
    enumerate_states,
    format_counts,
    from_monomers,
    parse_counts,
    partition_count,
    partition_table,
    to_concentrations,
)


def partition_count_oracle(n):
    """Independent oracle: dynamic-programming count of partitions."""
    ways = [1] + [0] * n
    for part in range(1, n + 1):
        for total in range(part, n + 1):
            ways[total] += ways[total - part]
    return ways[n]


class TestConfiguration:
    def test_from_monomers(self):
        cfg = from_monomers(5, 1.0)
        assert dict(cfg.counts) == {1: 5}
        assert cfg.mass == 1.0
        assert dict(from_monomers(1, 2.0).counts) == {1: 1}

    def test_monomeric_mass_is_rho(self):
        for n in (1, 7, 100):
            assert from_monomers(n, 3.5).mass == 3.5

    def test_mass_invariant_enforced(self):
        with pytest.raises(ValueError):
            Configuration(4, 1.0, {1: 3})  # mass 3 != 4
        with pytest.raises(ValueError):
            Configuration(4, 1.0, {5: 1})  # size beyond n

    def test_zero_counts_dropped(self):
        cfg = Configuration(4, 1.0, {1: 4, 2: 0})
        assert dict(cfg.counts) == {1: 4}


class TestConcentrations:
    def test_scaling(self):
        cfg = Configuration(4, 1.0, {1: 2, 2: 1})
        np.testing.assert_allclose(to_concentrations(cfg), [0.5, 0.25])

    def test_single_cluster(self):
        cfg = Configuration(3, 1.0, {3: 1})
        np.testing.assert_allclose(to_concentrations(cfg), [0.0, 0.0, 1.0 / 3.0])
        cfg2 = Configuration(3, 2.0, {3: 1})
        np.testing.assert_allclose(to_concentrations(cfg2), [0.0, 0.0, 2.0 / 3.0])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=25), st.floats(min_value=0.1, max_value=10))
    def test_mass_recovered(self, n, rho):
        cfg = from_monomers(n, rho)
        c = to_concentrations(cfg)
        assert float(np.arange(1, len(c) + 1) @ c) == pytest.approx(rho, rel=1e-14)


class TestApplyJump:
    def test_dimerization(self):
        cfg = apply_jump(from_monomers(5, 1.0), 1, "forward")
        assert dict(cfg.counts) == {1: 3, 2: 1}

    def test_growth_chain(self):
        cfg = Configuration(5, 1.0, {1: 3, 2: 1})
        cfg = apply_jump(cfg, 2, "forward")
        assert dict(cfg.counts) == {1: 2, 3: 1}
        back = apply_jump(cfg, 2, "backward")
        assert dict(back.counts) == {1: 3, 2: 1}

    def test_infeasible(self):
        with pytest.raises(InfeasibleJumpError):
            apply_jump(Configuration(2, 1.0, {2: 1}), 1, "forward")  # no monomers
        with pytest.raises(InfeasibleJumpError):
            apply_jump(from_monomers(3, 1.0), 2, "backward")  # no dimers

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=2, max_value=30), st.randoms(use_true_random=False))
    def test_random_walk_preserves_mass_and_inverse(self, n, rand):
        cfg = from_monomers(n, 1.0)
        for _ in range(40):
            feasible = []
            x1 = cfg.count(1)
            for size in cfg.counts:
                if x1 >= (2 if size == 1 else 1) and size < n and cfg.count(size) >= 1:
                    feasible.append((size, "forward"))
                if size >= 2:
                    feasible.append((size - 1, "backward"))
            if not feasible:
                break
            i, direction = feasible[rand.randrange(len(feasible))]
            nxt = apply_jump(cfg, i, direction)
            assert sum(s * c for s, c in nxt.counts.items()) == n
            inverse = "backward" if direction == "forward" else "forward"
            assert apply_jump(nxt, i, inverse) == cfg
            cfg = nxt


class TestEnumeration:
    def test_n4_exact_canonical_order(self):
        states = enumerate_states(4, 1.0)
        assert [dict(s.counts) for s in states] == [
            {1: 4}, {1: 2, 2: 1}, {2: 2}, {1: 1, 3: 1}, {4: 1},
        ]

    def test_tiny_counts(self):
        assert len(enumerate_states(1, 1.0)) == 1
        assert dict(enumerate_states(1, 1.0)[0].counts) == {1: 1}
        assert len(enumerate_states(5, 1.0)) == 7

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 21, 30, 40])
    def test_count_matches_dp_oracle(self, n):
        assert len(partition_table(n)) == partition_count_oracle(n)

    def test_pentagonal_matches_dp_oracle(self):
        for n in range(1, 41):
            assert partition_count(n) == partition_count_oracle(n)

    def test_cap_error_reports_estimate(self):
        with pytest.raises(StateSpaceTooLargeError) as err:
            enumerate_states(61, 1.0)
        assert err.value.estimate == partition_count(61)

    def test_index_of_round_trip(self):
        table = partition_table(9)
        for idx in range(len(table)):
            assert table.index_of(table.counts_dict(idx)) == idx

    def test_index_of_missing_state(self):
        table = partition_table(6)
        with pytest.raises(KeyError):
            table.index_of({1: 1, 2: 1})  # mass 3, not a state of n=6


class TestTextualLiteral:
    def test_round_trip(self):
        cfg = Configuration(7, 1.0, {1: 2, 2: 1, 3: 1})
        text = format_counts(cfg.counts)
        assert text == "1:2,2:1,3:1"
        assert parse_counts(text, 7, rho=1.0) == cfg

    def test_monomeric(self):
        assert parse_counts("1:5", 5) == {1: 5}

    def test_validation(self):
        with pytest.raises(ValueError):
            parse_counts("1:4", 5)  # wrong mass
        with pytest.raises(ValueError):
            parse_counts("1:2,1:3", 5)  # duplicate size
        with pytest.raises(ValueError):
            parse_counts("1-5", 5)  # malformed
