"""Core types: instances, allocations, outcomes, welfare accounting."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsd_market.market import (
    Allocation,
    HashedNormalValuations,
    MarketInstance,
    Outcome,
    TradeRecord,
    hashed_uniforms,
    instance_to_csv,
    load_instance,
    pareto_dominates,
    replay_trade_log,
    save_instance,
    total_welfare,
    utilities,
    utility,
    validate_outcome,
    zero_outcome,
)


@pytest.fixture
def paired_market() -> MarketInstance:
    # Two agents, two items: one agent cares a lot about the first item.
    return MarketInstance.from_matrix([[2, 1], [10, 1]], [5, 5])


class TestInstance:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            MarketInstance.from_matrix([[1.0, np.inf]], [0.0])
        with pytest.raises(ValueError):
            MarketInstance.from_matrix([[1.0, 2.0]], [0.0, 0.0])

    def test_null_item_is_worth_zero(self, paired_market):
        for agent in range(2):
            assert paired_market.value(agent, None) == 0.0

    def test_out_of_range_queries(self, paired_market):
        with pytest.raises(ValueError):
            paired_market.value(2, 0)
        with pytest.raises(ValueError):
            paired_market.value(0, 5)

    def test_json_roundtrip(self, paired_market, tmp_path):
        path = tmp_path / "inst.json"
        save_instance(paired_market, path)
        loaded = load_instance(path)
        assert np.array_equal(loaded.dense_matrix(), paired_market.dense_matrix())
        assert np.array_equal(loaded.budgets, paired_market.budgets)
        payload = json.loads(path.read_text())
        assert payload["n_agents"] == 2 and payload["n_items"] == 2

    def test_csv_export(self, paired_market, tmp_path):
        path = tmp_path / "inst.csv"
        instance_to_csv(paired_market, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "agent,item,value"
        assert len(lines) == 1 + 4
        assert lines[1].startswith("0,0,")


class TestHashedValuations:
    def test_bit_identical_across_access_patterns(self):
        field = HashedNormalValuations(
            key=1234,
            means=np.array([100.0, 5000.0, 900.0]),
            stds=np.array([25.0, 30.0, 28.0]),
            agent_count=4,
        )
        row = field.row(2)
        points = field.values(np.array([2, 2, 2]), np.array([0, 1, 2]))
        assert np.array_equal(row, points)
        assert np.array_equal(row, field.row(2))

    def test_distinct_cells_differ(self):
        field = HashedNormalValuations(
            key=7, means=np.full(50, 100.0), stds=np.full(50, 25.0), agent_count=50
        )
        assert len(set(field.row(0).tolist())) == 50

    def test_uniforms_are_open_unit_interval(self):
        u = hashed_uniforms(99, np.arange(10_000, dtype=np.uint64))
        assert u.min() > 0.0 and u.max() < 1.0


class TestAllocation:
    def test_injectivity_enforced(self):
        with pytest.raises(ValueError):
            Allocation((0, 0))
        Allocation((0, None, 1))  # nulls may repeat

    def test_array_roundtrip(self):
        alloc = Allocation((2, None, 0))
        assert Allocation.from_array(alloc.to_array()) == alloc

    def test_owner_map(self):
        alloc = Allocation((2, None, 0))
        assert alloc.owner_of() == {2: 0, 0: 2}


class TestUtility:
    def test_quasilinear_sum(self, paired_market):
        out = Outcome(Allocation((0, 1)), (0.0, 0.0))
        assert utility(paired_market, out, 0) == 7.0
        assert utility(paired_market, out, 1) == 6.0

    def test_swap_with_payment(self, paired_market):
        out = Outcome(Allocation((1, 0)), (2.0, -2.0))
        assert utilities(paired_market, out).tolist() == [8.0, 13.0]

    def test_null_assignment_contributes_nothing(self):
        inst = MarketInstance.from_matrix([[4.0]], [0.0])
        out = Outcome(Allocation((None,)), (0.0,))
        assert utility(inst, out, 0) == 0.0

    def test_agent_out_of_range(self, paired_market):
        out = zero_outcome(Allocation((0, 1)))
        with pytest.raises(ValueError):
            utility(paired_market, out, 7)

    @given(delta=st.floats(-1e6, 1e6), agent=st.integers(0, 1))
    @settings(max_examples=50, deadline=None)
    def test_additive_in_transfers(self, delta, agent):
        inst = MarketInstance.from_matrix([[2, 1], [10, 1]], [5, 5])
        base = Outcome(Allocation((0, 1)), (0.0, 0.0))
        transfers = [0.0, 0.0]
        transfers[agent] += delta
        shifted = Outcome(Allocation((0, 1)), tuple(transfers))
        assert utility(inst, shifted, agent) == pytest.approx(
            utility(inst, base, agent) + delta
        )


class TestTotalWelfare:
    def test_three_agent_table(self):
        inst = MarketInstance.from_matrix([[5, 0, 10], [0, 4, 0], [-10, 0, 5]])
        assert total_welfare(inst, Allocation((2, 0, 1))) == 10.0
        assert total_welfare(inst, Allocation((0, 1, 2))) == 14.0

    def test_empty_allocation(self):
        inst = MarketInstance.from_matrix([[5, 0], [1, 2]])
        assert total_welfare(inst, Allocation((None, None))) == 0.0

    def test_invariant_to_transfers(self, paired_market):
        a = Outcome(Allocation((1, 0)), (2.0, -2.0))
        b = Outcome(Allocation((1, 0)), (-4.0, 4.0))
        assert total_welfare(paired_market, a.allocation) == total_welfare(
            paired_market, b.allocation
        )


class TestValidateOutcome:
    def test_zero_sum_accepted(self, paired_market):
        out = Outcome(Allocation((1, 0)), (2.0, -2.0))
        assert validate_outcome(paired_market, out, atol=0) == []

    def test_nonzero_sum_reported(self, paired_market):
        out = Outcome(Allocation((0, 1)), (1.0, 0.0))
        problems = validate_outcome(paired_market, out, atol=0)
        assert any("transfer sum" in p for p in problems)

    def test_duplicate_item_reported(self, paired_market):
        with pytest.raises(ValueError):
            Outcome(Allocation((0, 0)), (0.0, 0.0))

    def test_out_of_range_item_reported(self, paired_market):
        out = Outcome(Allocation((0, 9)), (0.0, 0.0))
        assert any("out of range" in p for p in validate_outcome(paired_market, out))

    def test_log_replay_consistency(self, paired_market):
        log = (TradeRecord(0, proposer=1, counterparty=0, item_acquired=0, item_given=1,
                           price=5.0),)
        out = Outcome(Allocation((1, 0)), (5.0, -5.0), log)
        assert validate_outcome(paired_market, out, atol=0) == []
        pre, pre_t = replay_trade_log(out)
        assert pre.assignment == (0, 1)
        assert pre_t.tolist() == [0.0, 0.0]

    def test_corrupt_log_reported(self, paired_market):
        log = (TradeRecord(0, proposer=1, counterparty=0, item_acquired=1, item_given=0,
                           price=5.0),)
        out = Outcome(Allocation((1, 0)), (5.0, -5.0), log)
        assert validate_outcome(paired_market, out, atol=0)


class TestParetoDominates:
    def test_paired_swap_dominates(self, paired_market):
        plain = Outcome(Allocation((0, 1)), (0.0, 0.0))
        swapped = Outcome(Allocation((1, 0)), (2.0, -2.0))
        assert pareto_dominates(paired_market, swapped, plain)
        assert not pareto_dominates(paired_market, plain, swapped)

    def test_irreflexive(self, paired_market):
        out = Outcome(Allocation((0, 1)), (0.0, 0.0))
        assert not pareto_dominates(paired_market, out, out)

    def test_trade_off_is_not_dominance(self, paired_market):
        # (8, 5) against (7, 6): the second agent is worse off.
        a = Outcome(Allocation((0, 1)), (1.0, -1.0))
        b = Outcome(Allocation((0, 1)), (0.0, 0.0))
        assert not pareto_dominates(paired_market, a, b)
        assert not pareto_dominates(paired_market, b, a)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_asymmetric_on_random_outcomes(self, seed):
        rng = np.random.default_rng(seed)
        inst = MarketInstance.from_matrix(rng.integers(0, 9, (3, 3)).astype(float))
        perm_a, perm_b = rng.permutation(3), rng.permutation(3)
        t = rng.integers(-3, 4, 3).astype(float)
        t[-1] = -t[:-1].sum()
        a = Outcome(Allocation(tuple(int(i) for i in perm_a)), tuple(t))
        b = zero_outcome(Allocation(tuple(int(i) for i in perm_b)))
        assert not (pareto_dominates(inst, a, b) and pareto_dominates(inst, b, a))
