"""Mechanism engines: picks, cycle trading, transfer stages."""

import numpy as np
import pytest

from rsd_market.market import (
    Allocation,
    MarketInstance,
    total_welfare,
    utilities,
    validate_outcome,
)
from rsd_market.mechanisms import (
    NO_COST,
    TradePolicy,
    TransactionCost,
    expost_ce_transfers,
    expost_pairwise_transfers,
    interim_transfers,
    pairwise_aftermarket,
    parse_cost,
    rsd,
    serial_dictatorship,
    strategic_rsd_counterexample,
    ttc,
)
from rsd_market.scenarios import get_scenario


def identical_rows(n: int, seed: int) -> MarketInstance:
    rng = np.random.default_rng(seed)
    row = rng.integers(0, 100, n).astype(float)
    return MarketInstance.from_matrix(np.tile(row, (n, 1)))


class TestSerialDictatorship:
    def test_paired_market(self):
        sc = get_scenario("example-3.1")
        out = serial_dictatorship(sc.instance, (0, 1))
        assert out.allocation.assignment == (0, 1)
        assert utilities(sc.instance, out).tolist() == [7.0, 6.0]
        assert out.transfers == (0.0, 0.0)

    def test_dead_end_order(self):
        sc = get_scenario("example-4.1")
        out = serial_dictatorship(sc.instance, (0, 2, 1))
        assert out.allocation.assignment == (2, 0, 1)

    def test_single_agent(self):
        inst = MarketInstance.from_matrix([[3.0]])
        out = serial_dictatorship(inst, (0,))
        assert out.allocation.assignment == (0,)

    def test_more_agents_than_items(self):
        inst = MarketInstance.from_matrix([[5.0], [9.0]])
        out = serial_dictatorship(inst, (1, 0))
        assert out.allocation.assignment == (None, 0)

    def test_ties_break_to_lowest_item(self):
        inst = MarketInstance.from_matrix([[4.0, 4.0, 4.0]] * 3)
        out = serial_dictatorship(inst, (2, 0, 1))
        assert out.allocation.assignment == (1, 2, 0)

    def test_order_validation(self):
        inst = MarketInstance.from_matrix([[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(ValueError):
            serial_dictatorship(inst, (0, 0))


class TestRsd:
    def test_same_seed_same_outcome(self):
        rng = np.random.default_rng(5)
        inst = MarketInstance.from_matrix(rng.integers(0, 30, (6, 6)).astype(float))
        assert rsd(inst, 99) == rsd(inst, 99)

    def test_rank_property_under_identical_rows(self):
        inst = MarketInstance.from_matrix(
            np.tile(np.array([10.0, 40.0, 30.0, 20.0]), (4, 1))
        )
        out = rsd(inst, 31)
        order = np.random.default_rng(31).permutation(4)
        ranked_items = [1, 2, 3, 0]  # items sorted by the shared row, descending
        for rank, agent in enumerate(order):
            assert out.allocation.assignment[agent] == ranked_items[rank]

    def test_single_agent_any_seed(self):
        inst = MarketInstance.from_matrix([[2.0]])
        for seed in (0, 1, 17):
            assert rsd(inst, seed).allocation.assignment == (0,)


class TestTtc:
    def test_two_agent_swap(self):
        inst = MarketInstance.from_matrix([[1.0, 9.0], [9.0, 1.0]])
        result = ttc(inst, Allocation((0, 1)))
        assert result.assignment == (1, 0)

    def test_three_way_rotation(self):
        # Each agent prefers the next agent's endowed item.
        inst = MarketInstance.from_matrix(
            [[0.0, 9.0, 1.0], [1.0, 0.0, 9.0], [9.0, 1.0, 0.0]]
        )
        result = ttc(inst, Allocation((0, 1, 2)))
        assert result.assignment == (1, 2, 0)

    def test_truthful_picks_are_stable(self):
        rng = np.random.default_rng(404)
        for _ in range(40):
            n = int(rng.integers(2, 9))
            inst = MarketInstance.from_matrix(rng.integers(-5, 60, (n, n)).astype(float))
            order = tuple(int(j) for j in rng.permutation(n))
            endow = serial_dictatorship(inst, order).allocation
            assert ttc(inst, endow).assignment == endow.assignment

    def test_nonparticipants_stay_out(self):
        inst = MarketInstance.from_matrix([[1.0, 9.0], [9.0, 1.0]])
        result = ttc(inst, Allocation((0, None)))
        assert result.assignment == (0, None)

    def test_malformed_endowment(self):
        inst = MarketInstance.from_matrix([[1.0, 9.0], [9.0, 1.0]])
        with pytest.raises(ValueError):
            ttc(inst, Allocation((5, None)))


class TestExpostCeTransfers:
    def test_paired_market(self):
        sc = get_scenario("example-3.1")
        out = expost_ce_transfers(sc.instance, (0, 1))
        assert out.allocation.assignment == (1, 0)
        assert out.transfers == (1.0, -1.0)
        assert utilities(sc.instance, out).tolist() == [7.0, 14.0]

    def test_dead_end_reaches_optimum(self):
        sc = get_scenario("example-4.1")
        out = expost_ce_transfers(sc.instance, (0, 2, 1))
        assert out.allocation.assignment == (0, 1, 2)
        assert total_welfare(sc.instance, out.allocation) == 14.0
        assert sum(out.transfers) == 0.0

    def test_no_reshuffle_when_picks_optimal(self):
        inst = MarketInstance.from_matrix(np.diag([9.0, 7.0, 5.0]))
        out = expost_ce_transfers(inst, (0, 1, 2))
        assert out.allocation.assignment == (0, 1, 2)
        assert out.transfers == (0.0, 0.0, 0.0)


class TestPairwiseTransfers:
    def test_paired_market_midpoint_price(self):
        sc = get_scenario("example-3.1")
        out = expost_pairwise_transfers(sc.instance, (0, 1))
        assert len(out.trade_log) == 1
        rec = out.trade_log[0]
        assert (rec.proposer, rec.counterparty) == (1, 0)
        assert rec.price == 5.0
        assert utilities(sc.instance, out).tolist() == [11.0, 10.0]

    def test_dead_end_executes_nothing(self):
        sc = get_scenario("example-4.1")
        out = expost_pairwise_transfers(sc.instance, sc.default_order)
        assert out.trade_log == ()
        assert total_welfare(sc.instance, out.allocation) == 10.0

    def test_identical_preferences_match_plain_picks(self):
        for seed in range(10):
            inst = identical_rows(6, seed)
            order = tuple(int(j) for j in np.random.default_rng(seed).permutation(6))
            plain = serial_dictatorship(inst, order)
            traded = expost_pairwise_transfers(inst, order)
            assert traded.allocation.assignment == plain.allocation.assignment
            assert traded.transfers == plain.transfers
            assert traded.trade_log == ()

    def test_zero_sum_and_validity_on_random_markets(self):
        rng = np.random.default_rng(808)
        for _ in range(30):
            n = int(rng.integers(2, 9))
            inst = MarketInstance.from_matrix(rng.integers(-10, 60, (n, n)).astype(float))
            order = tuple(int(j) for j in rng.permutation(n))
            out = expost_pairwise_transfers(inst, order)
            assert validate_outcome(inst, out, atol=0) == []

    def test_fixed_point_not_worse_than_single_pass(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            n = int(rng.integers(3, 8))
            inst = MarketInstance.from_matrix(rng.integers(0, 60, (n, n)).astype(float))
            order = tuple(int(j) for j in rng.permutation(n))
            multi = expost_pairwise_transfers(inst, order)
            single = expost_pairwise_transfers(
                inst, order, TradePolicy(pairwise_mode="single-pass")
            )
            assert total_welfare(inst, multi.allocation) >= total_welfare(
                inst, single.allocation
            )

    def test_budget_blocks_unaffordable_trades(self):
        inst = MarketInstance.from_matrix([[2, 1], [10, 1]], [5, 2])
        policy = TradePolicy(budget_enforced=True)
        out = expost_pairwise_transfers(inst, (0, 1), policy)
        # Midpoint price 5 exceeds the buyer's budget of 2.
        assert out.trade_log == ()
        buyer_optimal = TradePolicy(surplus_split=0.0, budget_enforced=True)
        out = expost_pairwise_transfers(inst, (0, 1), buyer_optimal)
        assert len(out.trade_log) == 1 and out.trade_log[0].price == 1.0


class TestTransactionCosts:
    def test_parse_specs(self):
        assert parse_cost("none") == NO_COST
        assert parse_cost("fixed:3.5") == TransactionCost("fixed", 3.5)
        assert parse_cost("prop:0.1") == TransactionCost("proportional", 0.1)
        with pytest.raises(ValueError):
            parse_cost("fixed")

    def test_fee_gates_trades_by_surplus(self):
        sc = get_scenario("example-3.1")
        # Joint surplus is 8: a fee of 7.9 still trades, 8.1 does not.
        out = expost_pairwise_transfers(
            sc.instance, (0, 1), cost=TransactionCost("fixed", 7.9)
        )
        assert len(out.trade_log) == 1
        out = expost_pairwise_transfers(
            sc.instance, (0, 1), cost=TransactionCost("fixed", 8.1)
        )
        assert out.trade_log == ()

    def test_seller_made_whole_under_fixed_fee(self):
        sc = get_scenario("example-3.1")
        out = expost_pairwise_transfers(
            sc.instance,
            (0, 1),
            TradePolicy(surplus_split=0.0),
            TransactionCost("fixed", 2.0),
        )
        rec = out.trade_log[0]
        assert rec.cost == 2.0
        seller_net = (
            sc.instance.value(rec.counterparty, rec.item_given)
            - sc.instance.value(rec.counterparty, rec.item_acquired)
            + rec.price
            - rec.cost
        )
        assert seller_net == 0.0

    def test_proportional_fee_grosses_up(self):
        sc = get_scenario("example-3.1")
        out = expost_pairwise_transfers(
            sc.instance,
            (0, 1),
            TradePolicy(surplus_split=0.0),
            TransactionCost("proportional", 0.5),
        )
        rec = out.trade_log[0]
        assert rec.price == pytest.approx(2.0)  # reservation 1 grossed by 1/(1-0.5)
        assert rec.cost == pytest.approx(1.0)


class TestInterimTransfers:
    def test_miss_and_rescue(self):
        miss = get_scenario("example-5.1")
        for model in ("myopic", "lookback-strategic"):
            out = interim_transfers(miss.instance, miss.default_order, model)
            assert out.allocation.assignment == (0, 1, 2)
            assert out.trade_log == ()
        rescue = get_scenario("example-5.2")
        for model in ("myopic", "lookback-strategic"):
            out = interim_transfers(rescue.instance, rescue.default_order, model)
            assert out.allocation.assignment == (0, 1, 3, 2)
            assert len(out.trade_log) == 1
            assert total_welfare(rescue.instance, out.allocation) == 120.0

    def test_single_agent(self):
        inst = MarketInstance.from_matrix([[5.0]])
        out = interim_transfers(inst, (0,))
        assert out.allocation.assignment == (0,)
        assert out.trade_log == ()

    def test_zero_sum_on_random_markets(self):
        rng = np.random.default_rng(660)
        for model in ("myopic", "lookback-strategic"):
            for _ in range(20):
                n = int(rng.integers(2, 8))
                inst = MarketInstance.from_matrix(rng.integers(0, 80, (n, n)).astype(float))
                order = tuple(int(j) for j in rng.permutation(n))
                out = interim_transfers(inst, order, model)
                assert validate_outcome(inst, out, atol=0) == []

    def test_unknown_model_rejected(self):
        inst = MarketInstance.from_matrix([[1.0]])
        with pytest.raises(ValueError):
            interim_transfers(inst, (0,), "clairvoyant")


class TestStrategicScenario:
    def test_branch_payoffs_at_midpoint(self):
        report = strategic_rsd_counterexample(0.5)
        payoffs = {b.label: b.payoff for b in report.branches}
        assert payoffs == {
            "generic-room": 10.0,
            "honest-favorite": 20.0,
            "grab-and-resell": 115.0,
        }
        assert report.branches[2].transfer_received == 95.0
        assert report.best_label == "grab-and-resell"

    def test_buyer_optimal_split_still_weakly_dominant(self):
        report = strategic_rsd_counterexample(0.0)
        assert report.branches[2].payoff == 20.0
        assert report.manipulation_pays

    def test_manipulation_grows_with_split(self):
        gains = [strategic_rsd_counterexample(k / 10).manipulation_gain for k in range(11)]
        assert gains == sorted(gains)


class TestAftermarketEngine:
    def test_single_pass_buyer_exit(self):
        rng = np.random.default_rng(12)
        inst = MarketInstance.from_matrix(rng.normal(100, 30, (30, 30)))
        order = tuple(int(j) for j in rng.permutation(30))
        endow = serial_dictatorship(inst, order).allocation
        policy = TradePolicy(surplus_split=0.0, pairwise_mode="single-pass")
        _, _, log = pairwise_aftermarket(inst, endow, order, policy)
        bought_at: dict[int, int] = {}
        for rec in log:
            assert rec.proposer not in bought_at, "agent bought twice"
            assert rec.counterparty not in bought_at, "buyer later resurfaced as seller"
            bought_at[rec.proposer] = rec.step

    def test_sellers_exit_flag(self):
        rng = np.random.default_rng(13)
        inst = MarketInstance.from_matrix(rng.normal(100, 30, (30, 30)))
        order = tuple(int(j) for j in rng.permutation(30))
        endow = serial_dictatorship(inst, order).allocation
        policy = TradePolicy(
            surplus_split=0.0, pairwise_mode="single-pass", sellers_exit_after_sale=True
        )
        _, _, log = pairwise_aftermarket(inst, endow, order, policy)
        sellers = [rec.counterparty for rec in log]
        assert len(sellers) == len(set(sellers))
