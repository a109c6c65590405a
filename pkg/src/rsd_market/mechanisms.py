"""Mechanism engines: serial dictatorship variants with and without transfers.

Five engines share the same instance/order/policy inputs and are fully
deterministic given them:

* plain serial dictatorship (fixed or seeded-random order),
* serial dictatorship followed by top-trading-cycles (no money),
* ex-post transfers through competitive-equilibrium prices,
* ex-post bilateral transfers (fixed-point sweeps or a single pass),
* interim transfers, where each picker may buy a correction from a
  predecessor before the next pick.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .equilibrium import (
    ce_prices,
    max_welfare_allocation,
    transfers_from_prices,
)
from .errors import InternalInvariantError
from .market import (
    Allocation,
    MarketInstance,
    Outcome,
    TradeRecord,
    ValuationBackend,
    random_order,
    validate_order,
    zero_outcome,
)

PairwiseMode = Literal["fixed-point", "single-pass"]
AgentModel = Literal["myopic", "lookback-strategic"]


@dataclass(frozen=True)
class TradePolicy:
    """Knobs governing how bilateral trade prices are set.

    ``surplus_split`` is the fraction of the available gain captured by the
    seller; 0 prices every trade at the seller's reservation, 1 at the buyer's
    ceiling.  With ``seller_reservation_floor`` set, a seller never accepts a
    negative price even when they would happily swap for free.
    """

    surplus_split: float = 0.5
    seller_reservation_floor: bool = True
    pairwise_mode: PairwiseMode = "fixed-point"
    budget_enforced: bool = False
    # Single-pass only: retire agents from selling after their first sale.
    # Off by default, where only a purchase retires an agent.
    sellers_exit_after_sale: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.surplus_split <= 1.0:
            raise ValueError("surplus_split must lie in [0, 1]")
        if self.pairwise_mode not in ("fixed-point", "single-pass"):
            raise ValueError(f"unknown pairwise mode {self.pairwise_mode!r}")


@dataclass(frozen=True)
class TransactionCost:
    """Per-trade friction, charged on the seller's side of each executed trade.

    ``fixed`` charges a flat ``amount`` per trade; ``proportional`` charges
    ``amount`` (a rate) times the trade price.  Prices are grossed up so the
    seller still nets their reservation value after remitting the fee: the
    trade decision then reduces to joint surplus exceeding the fee, no matter
    which side nominally hands the money over.
    """

    kind: Literal["none", "fixed", "proportional"] = "none"
    amount: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "fixed", "proportional"):
            raise ValueError(f"unknown transaction cost kind {self.kind!r}")
        if self.amount < 0:
            raise ValueError("transaction cost must be nonnegative")
        if self.kind == "none" and self.amount != 0.0:
            raise ValueError("kind 'none' cannot carry an amount")

    def gross_price(self, reservation: np.ndarray | float) -> np.ndarray | float:
        """Minimum price at which the seller is whole after the fee."""
        r = reservation
        if self.kind == "fixed":
            return r + self.amount
        if self.kind == "proportional":
            if self.amount >= 1.0:
                # A rate >= 100% cannot be recovered from any positive price.
                return np.where(np.asarray(r) > 0, np.inf, r)
            return np.where(np.asarray(r) > 0, r / (1.0 - self.amount), r)
        return r

    def fee(self, price: np.ndarray | float) -> np.ndarray | float:
        if self.kind == "fixed":
            return self.amount if np.isscalar(price) else np.full_like(price, self.amount)
        if self.kind == "proportional":
            return self.amount * np.maximum(price, 0.0)
        return 0.0 if np.isscalar(price) else np.zeros_like(price)


NO_COST = TransactionCost()


def parse_cost(spec: str) -> TransactionCost:
    """Parse ``none``, ``fixed:X`` or ``prop:R`` cost specifications."""
    if spec == "none":
        return NO_COST
    kind, _, amt = spec.partition(":")
    if not amt:
        raise ValueError(f"malformed transaction cost spec {spec!r}")
    if kind == "fixed":
        return TransactionCost("fixed", float(amt))
    if kind in ("prop", "proportional"):
        return TransactionCost("proportional", float(amt))
    raise ValueError(f"malformed transaction cost spec {spec!r}")


# ---------------------------------------------------------------------------
# Pick stage
# ---------------------------------------------------------------------------


def sd_assignment(valuations: ValuationBackend, order: Sequence[int]) -> np.ndarray:
    """Truthful pick pass: each agent takes their best remaining item.

    Ties break toward the lowest item id; agents reaching an empty market get
    -1 (null).  Works on any valuation backend, dense or generated.
    """
    n = valuations.n_items
    available = np.ones(n, dtype=bool)
    out = np.full(valuations.n_agents, -1, dtype=np.int64)
    remaining = n
    for j in order:
        if remaining == 0:
            break
        row = valuations.row(j)
        pick = int(np.argmax(np.where(available, row, -np.inf)))
        out[j] = pick
        available[pick] = False
        remaining -= 1
    return out


def serial_dictatorship(instance: MarketInstance, order: Sequence[int]) -> Outcome:
    """Agents pick their favorite remaining item in the given order; no money moves."""
    order_t = validate_order(order, instance.n_agents)
    return zero_outcome(Allocation.from_array(sd_assignment(instance.valuations, order_t)))


def rsd(instance: MarketInstance, seed: int) -> Outcome:
    """Serial dictatorship under a uniformly random, seed-reproducible order."""
    return serial_dictatorship(instance, random_order(instance.n_agents, seed))


# ---------------------------------------------------------------------------
# Top trading cycles
# ---------------------------------------------------------------------------


def ttc(instance: MarketInstance, endowment: Allocation) -> Allocation:
    """Moneyless cycle trading from an endowment.

    Every endowed agent points at the owner of their favorite remaining item
    (ties to the lowest item id); cycles swap and leave.  Agents without an
    endowment do not participate.
    """
    problems = endowment.validate_for(instance)
    if problems:
        raise ValueError("; ".join(problems))
    owner = endowment.owner_of()
    active = {j for j, item in enumerate(endowment.assignment) if item is not None}
    remaining = np.zeros(instance.n_items, dtype=bool)
    remaining[list(owner)] = True
    result: list[int | None] = [None] * instance.n_agents

    while active:
        favorite: dict[int, int] = {}
        for j in active:
            row = instance.row(j)
            favorite[j] = int(np.argmax(np.where(remaining, row, -np.inf)))
        points_to = {j: owner[favorite[j]] for j in active}

        # Walk from the smallest active agent until a node repeats; the tail
        # of the walk is a trading cycle.
        walk: list[int] = [min(active)]
        seen = {walk[0]}
        while True:
            nxt = points_to[walk[-1]]
            if nxt in seen:
                cycle = walk[walk.index(nxt):]
                break
            walk.append(nxt)
            seen.add(nxt)
        for j in cycle:
            got = favorite[j]
            result[j] = got
            remaining[got] = False
            active.remove(j)
    return Allocation(tuple(result))


# ---------------------------------------------------------------------------
# Ex-post transfers via equilibrium prices
# ---------------------------------------------------------------------------


def expost_ce_transfers(instance: MarketInstance, order: Sequence[int]) -> Outcome:
    """Truthful picks fix endowments, then the endowed items are reshuffled to
    the welfare maximum with transfers read off minimal supporting prices."""
    order_t = validate_order(order, instance.n_agents)
    endowment = Allocation.from_array(sd_assignment(instance.valuations, order_t))
    items = endowment.items()
    if not items:
        return zero_outcome(endowment)
    allocation = max_welfare_allocation(instance, items)
    prices = ce_prices(instance, endowment, allocation)
    return Outcome(
        allocation=allocation,
        transfers=transfers_from_prices(endowment, allocation, prices),
    )


# ---------------------------------------------------------------------------
# Bilateral trade engine
# ---------------------------------------------------------------------------


def pairwise_aftermarket(
    instance: MarketInstance,
    endowment: Allocation,
    order: Sequence[int],
    policy: TradePolicy,
    cost: TransactionCost = NO_COST,
    *,
    max_sweeps: int | None = None,
) -> tuple[Allocation, tuple[float, ...], tuple[TradeRecord, ...]]:
    """Run bilateral trading from an endowment; returns (allocation, transfers, log).

    Proposers are visited in pick order and act as buyers: against every
    candidate seller the price is the seller's (floored, fee-grossed)
    reservation plus the policy's share of the remaining gain, and the best
    trade with strictly positive buyer gain executes.  ``single-pass`` visits
    each agent once and freezes buyers afterwards; ``fixed-point`` sweeps until
    a full pass executes nothing.
    """
    order_t = validate_order(order, instance.n_agents)
    problems = endowment.validate_for(instance)
    if problems:
        raise ValueError("; ".join(problems))

    m, n = instance.n_agents, instance.n_items
    assignment = endowment.to_array()
    owner = np.full(n, -1, dtype=np.int64)
    own_value = np.zeros(n)
    for j, item in enumerate(assignment):
        if item >= 0:
            owner[item] = j
            own_value[item] = instance.value(j, int(item))

    transfers = np.zeros(m)
    fees = np.zeros(m)
    bought = np.zeros(m, dtype=bool)
    sold = np.zeros(m, dtype=bool)
    log: list[TradeRecord] = []
    single_pass = policy.pairwise_mode == "single-pass"
    lam = policy.surplus_split

    def visit(j: int) -> bool:
        item_j = int(assignment[j])
        if item_j < 0:
            return False
        row = instance.row(j)
        mask = (owner >= 0) & (owner != j)
        if single_pass:
            mask &= ~bought[np.clip(owner, 0, None)]
            if policy.sellers_exit_after_sale:
                mask &= ~sold[np.clip(owner, 0, None)]
            mask &= row > row[item_j]
        cand = np.nonzero(mask)[0]
        if cand.size == 0:
            return False
        sellers = owner[cand]
        seller_other = instance.valuations.values(sellers, np.full(cand.size, item_j))
        reservation = own_value[cand] - seller_other
        if policy.seller_reservation_floor:
            reservation = np.maximum(reservation, 0.0)
        floor_price = np.asarray(cost.gross_price(reservation), dtype=np.float64)
        ceiling = row[cand] - row[item_j]
        price = floor_price + lam * (ceiling - floor_price)
        gain = ceiling - price
        ok = ceiling > floor_price
        if policy.budget_enforced:
            money = instance.budgets[j] + transfers[j] - fees[j]
            ok &= price <= money
        if not np.any(ok):
            return False
        gain = np.where(ok, gain, -np.inf)
        pick = int(np.argmax(gain))
        if not np.isfinite(gain[pick]):
            return False

        item_k = int(cand[pick])
        k = int(sellers[pick])
        p = float(price[pick])
        fee = float(np.asarray(cost.fee(p)))
        transfers[j] -= p
        transfers[k] += p
        fees[k] += fee
        assignment[j] = item_k
        assignment[k] = item_j
        owner[item_k] = j
        owner[item_j] = k
        own_value[item_k] = float(row[item_k])
        own_value[item_j] = float(seller_other[pick])
        log.append(
            TradeRecord(
                step=len(log),
                proposer=j,
                counterparty=k,
                item_acquired=item_k,
                item_given=item_j,
                price=p,
                cost=fee,
            )
        )
        if single_pass:
            bought[j] = True
            sold[k] = True
        return True

    if single_pass:
        for j in order_t:
            if not bought[j]:
                visit(j)
    else:
        # Each executed trade strictly raises total allocation welfare, which is
        # a pure function of the (finite) allocation state, so the sweeps must
        # reach a fixed point; the cap only guards against the impossible.
        cap = max_sweeps if max_sweeps is not None else max(1000, 20 * m * n)
        for _ in range(cap):
            if not any([visit(j) for j in order_t]):
                break
        else:
            raise InternalInvariantError("pairwise sweeps failed to reach a fixed point")

    return Allocation.from_array(assignment), tuple(float(t) for t in transfers), tuple(log)


def expost_pairwise_transfers(
    instance: MarketInstance,
    order: Sequence[int],
    policy: TradePolicy | None = None,
    cost: TransactionCost = NO_COST,
) -> Outcome:
    """Truthful picks, then bilateral trading until stable (or one pass)."""
    policy = policy or TradePolicy()
    order_t = validate_order(order, instance.n_agents)
    endowment = Allocation.from_array(sd_assignment(instance.valuations, order_t))
    allocation, transfers, log = pairwise_aftermarket(instance, endowment, order_t, policy, cost)
    return Outcome(allocation=allocation, transfers=transfers, trade_log=log)


# ---------------------------------------------------------------------------
# Interim transfers
# ---------------------------------------------------------------------------


def _bilateral_terms(
    vj_own: float,
    vj_other: float,
    vk_own: float,
    vk_other: float,
    policy: TradePolicy,
    cost: TransactionCost = NO_COST,
) -> tuple[bool, float, float]:
    """(feasible, price, buyer_gain) for one candidate swap."""
    reservation = vk_own - vk_other
    if policy.seller_reservation_floor:
        reservation = max(reservation, 0.0)
    floor_price = float(np.asarray(cost.gross_price(reservation)))
    ceiling = vj_other - vj_own
    if not ceiling > floor_price:
        return False, 0.0, 0.0
    price = floor_price + policy.surplus_split * (ceiling - floor_price)
    return True, price, ceiling - price


def interim_transfers(
    instance: MarketInstance,
    order: Sequence[int],
    agent_model: AgentModel = "lookback-strategic",
    policy: TradePolicy | None = None,
) -> Outcome:
    """Picks interleaved with at most one backward trade offer per agent.

    ``myopic`` agents take their favorite available item and then offer the
    single most profitable viable swap to an earlier picker, if any.
    ``lookback-strategic`` agents instead weigh, for each predecessor, picking
    the item that predecessor values most and selling it on, against simply
    keeping their own favorite; no one reasons about agents yet to pick.
    """
    if agent_model not in ("myopic", "lookback-strategic"):
        raise ValueError(f"unknown agent model {agent_model!r}")
    policy = policy or TradePolicy()
    order_t = validate_order(order, instance.n_agents)

    m, n = instance.n_agents, instance.n_items
    assignment = np.full(m, -1, dtype=np.int64)
    available = np.ones(n, dtype=bool)
    transfers = np.zeros(m)
    log: list[TradeRecord] = []

    for turn, j in enumerate(order_t):
        if not np.any(available):
            break
        row = instance.row(j)
        favorite = int(np.argmax(np.where(available, row, -np.inf)))
        earlier = [k for k in order_t[:turn] if assignment[k] >= 0]

        pick = favorite
        trade_with: int | None = None
        trade_price = 0.0

        if agent_model == "myopic":
            assignment[j] = favorite
            available[favorite] = False
            best_gain = 0.0
            for k in earlier:
                item_k = int(assignment[k])
                feasible, price, gain = _bilateral_terms(
                    float(row[favorite]),
                    float(row[item_k]),
                    instance.value(k, item_k),
                    instance.value(k, favorite),
                    policy,
                )
                if feasible and gain > best_gain:
                    best_gain = gain
                    trade_with = k
                    trade_price = price
        else:
            best_payoff = float(row[favorite])
            for k in earlier:
                item_k = int(assignment[k])
                krow = instance.row(k)
                # Picking what the predecessor likes best maximizes both the
                # proposer's bargaining position and the joint gain.
                lure = int(np.argmax(np.where(available, krow, -np.inf)))
                feasible, price, _ = _bilateral_terms(
                    float(row[lure]),
                    float(row[item_k]),
                    float(krow[item_k]),
                    float(krow[lure]),
                    policy,
                )
                if not feasible:
                    continue
                payoff = float(row[item_k]) - price
                if payoff > best_payoff:
                    best_payoff = payoff
                    pick = lure
                    trade_with = k
                    trade_price = price
            assignment[j] = pick
            available[pick] = False

        if trade_with is not None:
            k = trade_with
            item_j, item_k = int(assignment[j]), int(assignment[k])
            assignment[j] = item_k
            assignment[k] = item_j
            transfers[j] -= trade_price
            transfers[k] += trade_price
            log.append(
                TradeRecord(
                    step=len(log),
                    proposer=j,
                    counterparty=k,
                    item_acquired=item_k,
                    item_given=item_j,
                    price=trade_price,
                )
            )

    return Outcome(
        allocation=Allocation.from_array(assignment),
        transfers=tuple(float(t) for t in transfers),
        trade_log=tuple(log),
    )


# ---------------------------------------------------------------------------
# Scripted manipulation scenario
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrategyBranch:
    label: str
    description: str
    payoff: float
    transfer_received: float = 0.0


@dataclass(frozen=True)
class StrategyScenarioReport:
    """Payoffs of the first picker under honest and manipulative play."""

    surplus_split: float
    branches: tuple[StrategyBranch, ...]
    best_label: str
    manipulation_gain: float

    @property
    def manipulation_pays(self) -> bool:
        return self.manipulation_gain >= 0


def strategic_rsd_counterexample(
    surplus_split: float = 0.5, seller_reservation_floor: bool = True
) -> StrategyScenarioReport:
    """Three strategies for a first picker facing a deep-pocketed rival.

    The first picker values room 0 at 20 and everything else at 10; the second
    picker values room 1 at 200 and everything else at 10 and can pay.  Branch
    payoffs: settle for a generic room (10), take the favorite room (20), or
    grab the rival's favorite and sell it back at the policy price.
    """
    policy = TradePolicy(
        surplus_split=surplus_split, seller_reservation_floor=seller_reservation_floor
    )
    v_a_room0, v_a_other = 20.0, 10.0
    v_b_room1, v_b_other = 200.0, 10.0

    # Branch 3: A holds room 1, B holds room 0; B buys room 1 from A.
    feasible, price, _ = _bilateral_terms(
        vj_own=v_b_other,
        vj_other=v_b_room1,
        vk_own=v_a_other,
        vk_other=v_a_room0,
        policy=policy,
    )
    if not feasible:
        raise InternalInvariantError("the resale branch must always be viable")
    branches = (
        StrategyBranch("generic-room", "pick any room neither values; no resale", v_a_other),
        StrategyBranch("honest-favorite", "pick the privately best room", v_a_room0),
        StrategyBranch(
            "grab-and-resell",
            "pick the rival's favorite, then sell it back",
            v_a_room0 + price,
            transfer_received=price,
        ),
    )
    best = max(branches, key=lambda b: b.payoff)
    return StrategyScenarioReport(
        surplus_split=surplus_split,
        branches=branches,
        best_label=best.label,
        manipulation_gain=branches[2].payoff - branches[1].payoff,
    )
