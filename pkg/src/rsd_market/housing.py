"""Large-scale housing-market simulation with budgets and transaction costs.

One replication runs two arms over the same agents, rooms, and pick order:

* baseline: truthful serial dictatorship on private values, no trading;
* treatment: picks driven by resale-informed ("augmented") values, followed by
  a single-pass bilateral aftermarket at seller-indifference prices, subject
  to budgets and the configured transaction cost.

Room values are drawn from per-room normal distributions whose parameters are
themselves random, so tastes are correlated across agents.  Valuations are
generated on demand from a hash of (seed, agent, room), never materialized as
a full matrix, and are bit-identical for a given seed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .market import (
    Allocation,
    HashedNormalValuations,
    MarketInstance,
    TradeRecord,
    derive_seed,
)
from .mechanisms import NO_COST, TradePolicy, TransactionCost, pairwise_aftermarket, sd_assignment

MEAN_RANGE = (100.0, 10_000.0)
VARIANCE_RANGE = (500.0, 1_000.0)
DELTA_HISTOGRAM_BINS = 50


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WealthModel:
    """Initial cash: everyone equal, or exponentially spread income groups."""

    kind: Literal["equal", "power-law"] = "equal"
    amount: float = 10_000.0
    n_groups: int = 1000
    base: float = 1.01
    agents_per_group: int = 10

    def __post_init__(self) -> None:
        if self.kind not in ("equal", "power-law"):
            raise ValueError(f"unknown wealth model {self.kind!r}")
        if self.kind == "equal" and self.amount <= 0:
            raise ValueError("equal endowment must be positive")
        if self.kind == "power-law" and (
            self.n_groups < 1 or self.agents_per_group < 1 or self.base <= 0
        ):
            raise ValueError("power-law parameters must be positive")

    def budgets(self, n_agents: int) -> np.ndarray:
        if self.kind == "equal":
            return np.full(n_agents, float(self.amount))
        if n_agents != self.n_groups * self.agents_per_group:
            raise ValueError(
                "power-law wealth requires n_agents == n_groups * agents_per_group"
            )
        groups = np.arange(n_agents) // self.agents_per_group
        return np.power(float(self.base), groups.astype(np.float64))


def parse_wealth(spec: str) -> WealthModel:
    """Parse ``equal:AMOUNT`` or ``powerlaw:GROUPS,BASE,PER_GROUP``."""
    kind, _, rest = spec.partition(":")
    if kind == "equal":
        return WealthModel(kind="equal", amount=float(rest) if rest else 10_000.0)
    if kind in ("powerlaw", "power-law"):
        groups, base, per = rest.split(",")
        return WealthModel(
            kind="power-law",
            n_groups=int(groups),
            base=float(base),
            agents_per_group=int(per),
        )
    raise ValueError(f"malformed wealth spec {spec!r}")


@dataclass(frozen=True)
class SimConfig:
    """Per-replication settings; one market has as many rooms as agents."""

    n_agents: int = 10_000
    n_rooms: int | None = None
    wealth: WealthModel = field(default_factory=WealthModel)
    cost: TransactionCost = NO_COST
    surplus_split: float = 0.0
    seller_reservation_floor: bool = True
    budget_enforced: bool = True
    sellers_exit_after_sale: bool = False
    augmented_picks: bool = True
    n_reps: int = 1

    def __post_init__(self) -> None:
        rooms = self.n_agents if self.n_rooms is None else self.n_rooms
        object.__setattr__(self, "n_rooms", rooms)
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        if rooms != self.n_agents:
            raise ValueError("the market is square: n_rooms must equal n_agents")
        if self.n_reps < 1:
            raise ValueError("replication count must be >= 1")

    def trade_policy(self) -> TradePolicy:
        return TradePolicy(
            surplus_split=self.surplus_split,
            seller_reservation_floor=self.seller_reservation_floor,
            pairwise_mode="single-pass",
            budget_enforced=self.budget_enforced,
            sellers_exit_after_sale=self.sellers_exit_after_sale,
        )


@dataclass(frozen=True)
class HousingInstance:
    """A generated market plus the per-room distribution parameters."""

    market: MarketInstance
    means: np.ndarray
    variances: np.ndarray
    seed: int

    @property
    def n_agents(self) -> int:
        return self.market.n_agents


def generate_instance(config: SimConfig, seed: int) -> HousingInstance:
    """Deterministically generate rooms, the valuation field, and budgets."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    means = rng.uniform(*MEAN_RANGE, size=config.n_rooms)
    variances = rng.uniform(*VARIANCE_RANGE, size=config.n_rooms)
    key = int(np.random.SeedSequence(entropy=seed, spawn_key=(1,)).generate_state(1)[0])
    backend = HashedNormalValuations(
        key=key,
        means=means,
        stds=np.sqrt(variances),
        agent_count=config.n_agents,
    )
    budgets = config.wealth.budgets(config.n_agents)
    budgets.setflags(write=False)
    means.setflags(write=False)
    variances.setflags(write=False)
    return HousingInstance(
        market=MarketInstance(valuations=backend, budgets=budgets),
        means=means,
        variances=variances,
        seed=seed,
    )


def replication_order(config: SimConfig, seed: int) -> tuple[int, ...]:
    """The fixed random ordering shared by both arms of a replication."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2,)))
    return tuple(int(j) for j in rng.permutation(config.n_agents))


# ---------------------------------------------------------------------------
# Public and augmented valuations
# ---------------------------------------------------------------------------


def public_valuations(market: MarketInstance, order: Sequence[int]) -> np.ndarray:
    """Resale estimate per room: the value its truthful-pick winner places on it."""
    assignment = sd_assignment(market.valuations, order)
    v_pub = np.zeros(market.n_items)
    assigned = assignment >= 0
    agents = np.nonzero(assigned)[0]
    rooms = assignment[assigned]
    if agents.size:
        v_pub[rooms] = market.valuations.values(agents, rooms)
    return v_pub


@dataclass(frozen=True)
class AugmentedValuations:
    """Private values blended with a per-room public resale estimate.

    Each entry is ``max(private, (private + public) / 2)``: holding a room is
    always worth at least its private value, and a high resale estimate pulls
    the pick value up toward the average of the two.
    """

    base: object
    public: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.base.n_agents

    @property
    def n_items(self) -> int:
        return self.base.n_items

    def row(self, agent: int) -> np.ndarray:
        private = self.base.row(agent)
        return np.maximum(private, 0.5 * (private + self.public))

    def values(self, agents: np.ndarray, items: np.ndarray) -> np.ndarray:
        private = self.base.values(agents, items)
        return np.maximum(private, 0.5 * (private + self.public[np.asarray(items)]))


def augmented_valuations(
    market: MarketInstance, v_pub: np.ndarray, cost: TransactionCost = NO_COST
) -> AugmentedValuations:
    """Build the strategic pick values from private values and resale estimates.

    Agents know the transaction cost and discount the resale component by it:
    a fixed fee comes straight off the resale price, a proportional one scales
    it.  With no cost this is exactly the private/public blend.
    """
    if cost.kind == "fixed":
        net_public = v_pub - cost.amount
    elif cost.kind == "proportional":
        net_public = v_pub * max(0.0, 1.0 - cost.amount)
    else:
        net_public = v_pub
    return AugmentedValuations(base=market.valuations, public=net_public)


# ---------------------------------------------------------------------------
# One replication
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimReport:
    """Everything measured in one replication.

    Two reference points are tracked per agent.  ``delta`` compares the
    treatment arm against a separate truthful-pick run under the same seed and
    order (so it includes the noise of strategically distorted picks), while
    ``trade_stage_delta`` compares against the treatment arm's own pre-trade
    allocation and isolates what the transfer stage itself contributed; the
    latter is the no-losers statistic, since every executed trade weakly
    benefits both sides.
    """

    seed: int
    n_agents: int
    budgets0: np.ndarray
    baseline_assignment: np.ndarray
    treatment_endowment: np.ndarray
    final_assignment: np.ndarray
    transfers: np.ndarray
    fees: np.ndarray
    welfare_baseline: np.ndarray
    welfare_endowment: np.ndarray
    welfare_treatment: np.ndarray
    delta: np.ndarray
    trade_stage_delta: np.ndarray
    trades: tuple[TradeRecord, ...]
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray

    @property
    def trade_count(self) -> int:
        return len(self.trades)

    @property
    def total_baseline(self) -> float:
        return float(self.welfare_baseline.sum())

    @property
    def total_treatment(self) -> float:
        return float(self.welfare_treatment.sum())

    @property
    def total_gain(self) -> float:
        return float(self.delta.sum())

    @property
    def trade_stage_gain(self) -> float:
        return float(self.trade_stage_delta.sum())

    @property
    def fees_collected(self) -> float:
        return float(self.fees.sum())

    @property
    def negative_delta_count(self) -> int:
        return int(np.sum(self.delta < 0))

    @property
    def negative_delta_fraction(self) -> float:
        return self.negative_delta_count / self.n_agents

    @property
    def negative_trade_stage_count(self) -> int:
        return int(np.sum(self.trade_stage_delta < 0))

    @property
    def negative_trade_stage_fraction(self) -> float:
        return self.negative_trade_stage_count / self.n_agents


def _own_values(market: MarketInstance, assignment: np.ndarray) -> np.ndarray:
    values = np.zeros(assignment.size)
    mask = assignment >= 0
    agents = np.nonzero(mask)[0]
    if agents.size:
        values[mask] = market.valuations.values(agents, assignment[mask])
    return values


def run_housing_sim(config: SimConfig, seed: int) -> SimReport:
    """One full replication; identical (config, seed) gives a bit-identical report."""
    inst = generate_instance(config, seed)
    market = inst.market
    order = replication_order(config, seed)

    baseline = sd_assignment(market.valuations, order)

    if config.augmented_picks:
        v_pub = np.zeros(market.n_items)
        mask = baseline >= 0
        v_pub[baseline[mask]] = market.valuations.values(np.nonzero(mask)[0], baseline[mask])
        pick_values = augmented_valuations(market, v_pub, config.cost)
        endowment = sd_assignment(pick_values, order)
    else:
        endowment = baseline.copy()

    final_alloc, transfers_t, log = pairwise_aftermarket(
        market,
        Allocation.from_array(endowment),
        order,
        config.trade_policy(),
        config.cost,
    )
    transfers = np.asarray(transfers_t)
    fees = np.zeros(config.n_agents)
    for rec in log:
        fees[rec.counterparty] += rec.cost

    welfare_baseline = inst.market.budgets + _own_values(market, baseline)
    welfare_endowment = inst.market.budgets + _own_values(market, endowment)
    final_assignment = final_alloc.to_array()
    welfare_treatment = (
        inst.market.budgets + transfers - fees + _own_values(market, final_assignment)
    )
    delta = welfare_treatment - welfare_baseline
    counts, edges = np.histogram(delta, bins=DELTA_HISTOGRAM_BINS)
    return SimReport(
        seed=seed,
        n_agents=config.n_agents,
        budgets0=inst.market.budgets,
        baseline_assignment=baseline,
        treatment_endowment=endowment,
        final_assignment=final_assignment,
        transfers=transfers,
        fees=fees,
        welfare_baseline=welfare_baseline,
        welfare_endowment=welfare_endowment,
        welfare_treatment=welfare_treatment,
        delta=delta,
        trade_stage_delta=welfare_treatment - welfare_endowment,
        trades=log,
        histogram_counts=counts,
        histogram_edges=edges,
    )


# ---------------------------------------------------------------------------
# Batches and sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BatchReport:
    """Replications merged in index order, so parallelism cannot change results."""

    master_seed: int
    reports: tuple[SimReport, ...]

    @property
    def n_reps(self) -> int:
        return len(self.reports)

    @property
    def gains(self) -> np.ndarray:
        return np.array([r.total_gain for r in self.reports])

    @property
    def mean_gain(self) -> float:
        return float(self.gains.mean())

    @property
    def median_gain(self) -> float:
        return float(np.median(self.gains))

    @property
    def trade_counts(self) -> np.ndarray:
        return np.array([r.trade_count for r in self.reports])

    @property
    def pooled_delta(self) -> np.ndarray:
        return np.concatenate([r.delta for r in self.reports])

    @property
    def pooled_trade_stage_delta(self) -> np.ndarray:
        return np.concatenate([r.trade_stage_delta for r in self.reports])

    @property
    def negative_delta_fraction(self) -> float:
        pooled = self.pooled_delta
        return float(np.sum(pooled < 0) / pooled.size)

    @property
    def negative_trade_stage_fraction(self) -> float:
        pooled = self.pooled_trade_stage_delta
        return float(np.sum(pooled < 0) / pooled.size)

    def pooled_histogram(self, bins: int = DELTA_HISTOGRAM_BINS) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.pooled_delta, bins=bins)


def rep_seed(master_seed: int, rep: int) -> int:
    return derive_seed(master_seed, rep)


def batch_run(
    config: SimConfig, n_reps: int, master_seed: int, parallelism: int = 1
) -> BatchReport:
    """Independent replications on derived seeds, aggregated deterministically."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    seeds = [rep_seed(master_seed, r) for r in range(n_reps)]
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            reports = list(pool.map(lambda s: run_housing_sim(config, s), seeds))
    else:
        reports = [run_housing_sim(config, s) for s in seeds]
    return BatchReport(master_seed=master_seed, reports=tuple(reports))


@dataclass(frozen=True)
class SweepRow:
    tau: float
    mode: str
    total_gain: float
    trade_stage_gain: float
    trades: int


def transaction_cost_sweep(
    config: SimConfig,
    tau_values: Sequence[float],
    seed: int,
    kind: Literal["fixed", "proportional"] | None = None,
) -> list[SweepRow]:
    """Re-run one replication per friction level on a shared seed."""
    taus = [float(t) for t in tau_values]
    if any(t < 0 for t in taus) or sorted(taus) != taus:
        raise ValueError("tau values must be nonnegative and sorted")
    mode = kind or (config.cost.kind if config.cost.kind != "none" else "fixed")
    rows = []
    for tau in taus:
        cfg = replace(config, cost=TransactionCost(kind=mode, amount=tau))
        report = run_housing_sim(cfg, seed)
        rows.append(
            SweepRow(
                tau=tau,
                mode=mode,
                total_gain=report.total_gain,
                trade_stage_gain=report.trade_stage_gain,
                trades=report.trade_count,
            )
        )
    return rows


def prohibitive_cost_bound(instance: HousingInstance) -> float:
    """A fixed fee above every budget-plus-value sum, which stops all trade."""
    max_value = float(instance.means.max() + 12.0 * np.sqrt(instance.variances.max()))
    return float(instance.market.budgets.max()) + max_value + 1.0


# ---------------------------------------------------------------------------
# Transaction-cost checks
# ---------------------------------------------------------------------------


def tax_incidence_check(
    instance: MarketInstance,
    j: int,
    j_other: int,
    items: tuple[int, int, int],
    tau: float,
    splits: Sequence[float],
) -> bool:
    """Does the trade decision ignore how the fee is split between the parties?

    ``items`` is (the picker's fallback item, the item they would pick to
    trade away, the counterparty's item).  For every split the counterparty's
    minimal acceptable payment is substituted into the picker's preference;
    all decisions must agree with the split-free joint-surplus rule.
    """
    i_keep, i_give, i_get = items
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    base = (
        instance.value(j, i_get)
        + instance.value(j_other, i_give)
        - instance.value(j_other, i_get)
        - tau
        > instance.value(j, i_keep)
    )
    for c in splits:
        if not 0 <= c <= tau + 1e-12:
            raise ValueError("each split must lie within [0, tau]")
        min_payment = instance.value(j_other, i_get) + (tau - c) - instance.value(j_other, i_give)
        decision = instance.value(j, i_get) - c - min_payment > instance.value(j, i_keep)
        if decision != base:
            return False
    return True


@dataclass(frozen=True)
class SmallTauBound:
    """Friction headroom of an aftermarket run started from a fixed allocation."""

    gamma_star: float
    has_feasible_trade: bool


def small_tau_bound(
    instance: MarketInstance,
    allocation: Allocation,
    order: Sequence[int] | None = None,
    policy: TradePolicy | None = None,
) -> SmallTauBound:
    """Smallest executed-trade margin of the frictionless aftermarket.

    Any fixed fee strictly below the returned value leaves every trade
    decision (and hence the final room swaps) unchanged, because a fixed fee
    shifts all candidate prices uniformly.  Infinite with a flag when the
    frictionless run executes no trades.  Budgets are ignored: the bound
    concerns the trade decisions themselves.
    """
    order_t = tuple(range(instance.n_agents)) if order is None else tuple(order)
    pol = policy or TradePolicy(
        surplus_split=0.0, pairwise_mode="single-pass", budget_enforced=False
    )
    if pol.budget_enforced:
        raise ValueError("the friction bound is defined for unconstrained budgets")
    _, _, log = pairwise_aftermarket(instance, allocation, order_t, pol, NO_COST)
    if not log:
        return SmallTauBound(gamma_star=float("inf"), has_feasible_trade=False)
    margins = [
        instance.value(rec.proposer, rec.item_acquired)
        - instance.value(rec.proposer, rec.item_given)
        - rec.price
        for rec in log
    ]
    return SmallTauBound(gamma_star=float(min(margins)), has_feasible_trade=True)
