"""Timestamp loop: order flow, crossing, settlement, rebates, reporting."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import agents
from .agents import (
    AgentParams,
    AgentState,
    DmmParams,
    DmmQuoteInputs,
    DmmState,
    MatchedHistory,
    OrderIntent,
)
from .book import BUY, PARTIAL, PENDING, SELL, TICK, BookSnapshot, Order, OrderBook, TradeRecord
from .dynamics import (
    ArrivalModel,
    AssetSpec,
    FundamentalPath,
    NoiseDistributions,
    ShockSpec,
    apply_shock,
    draw_quantity,
    generate_fundamental_path,
    substream,
)

P1_ID = 1
P2_ID = 2
P3_ID = 3
FIRST_DMM_ID = 4

#: Orders from the collective noise group carry per-member owner ids from
#: here up, so two members can legally trade with each other; they all
#: settle into the one shared P2 ledger.
FIRST_P2_MEMBER_ID = 1000


def ledger_id(owner_id: int) -> int:
    """Collapse noise-group member ids onto the P2 ledger id."""
    return P2_ID if owner_id >= FIRST_P2_MEMBER_ID else owner_id

# RNG sub-stream purposes; append only, existing draws must never shift.
STREAM_FUNDAMENTAL = 0
STREAM_P1_ARRIVALS = 1
STREAM_P2_ARRIVALS = 2
STREAM_P3_ARRIVALS = 3
STREAM_P2_QUANTITY = 4
STREAM_DMM_SELECT = 5

TRADE = "TRADE"
REBATE = "REBATE"


def participant_names(num_dmms: int) -> dict[int, str]:
    names = {P1_ID: "p1", P2_ID: "p2", P3_ID: "p3"}
    for i in range(num_dmms):
        names[FIRST_DMM_ID + i] = f"mm{i + 1}"
    return names


@dataclass(frozen=True)
class FeeSchedule:
    maker_rebate_rate: float
    taker_fee_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.maker_rebate_rate < 0:
            raise ValueError("maker_rebate_rate must be >= 0")


@dataclass(frozen=True)
class LedgerEntry:
    time: int
    participant: int
    cash_delta: float
    inventory_delta: int
    reason: str


@dataclass(frozen=True)
class StepReport:
    time: int
    inventories: dict[int, int]
    cash: dict[int, float]
    price_history: float | None
    fundamental: float
    midprice: float | None
    difference: float | None


@dataclass
class SimConfig:
    rounds: int = 1000
    num_dmms: int = 3
    rebate_bps: int = 20
    seed: int = 0
    asset: AssetSpec = field(default_factory=lambda: AssetSpec("IBM", 0.0236, 0.13, 134.0))
    insider: AgentParams = field(default_factory=AgentParams)
    momentum: AgentParams = field(default_factory=AgentParams)
    dmm: DmmParams = field(default_factory=DmmParams)
    noise: NoiseDistributions = field(default_factory=NoiseDistributions)
    arrival: ArrivalModel = field(default_factory=lambda: ArrivalModel(2.0))
    shock: ShockSpec | None = None

    def validate(self) -> None:
        if self.rounds < 10:
            raise ValueError("rounds must be >= 10")
        if self.num_dmms < 1:
            raise ValueError("num_dmms must be >= 1")
        if self.rebate_bps < 0:
            raise ValueError("rebate_bps must be >= 0")
        if self.shock is not None and self.shock.shock_time >= self.rounds:
            raise ValueError("shock_time must fall within the run")

    def fee_schedule(self) -> FeeSchedule:
        return FeeSchedule(maker_rebate_rate=self.rebate_bps / 10000.0)

    def net_half_spread(self) -> float:
        """Quoted half-spread after netting out the expected maker rebate."""
        rebate_per_share = self.fee_schedule().maker_rebate_rate * self.asset.initial_price
        return max(self.dmm.base_half_spread - rebate_per_share, TICK)


@dataclass
class SimResult:
    config: SimConfig
    path: FundamentalPath
    trades: list[TradeRecord]
    snapshots: list[BookSnapshot]
    steps: list[StepReport]
    orders: list[Order]
    ledger: list[LedgerEntry]
    names: dict[int, str]

    @property
    def fundamental(self) -> np.ndarray:
        return self.path.values[: self.config.rounds]

    @property
    def dmm_ids(self) -> list[int]:
        return [FIRST_DMM_ID + i for i in range(self.config.num_dmms)]

    def valuation_price(self, t: int) -> float:
        """Mid at t, else last trade by t, else the fundamental."""
        mid = self.snapshots[t].midprice
        if mid is not None:
            return mid
        last = self.steps[t].price_history
        if last is not None:
            return last
        return float(self.path.values[t])

    def equity_series(self, participant: int) -> list[float]:
        return [
            mark_to_market(step.cash[participant], step.inventories[participant], self.valuation_price(step.time))
            for step in self.steps
        ]


def settle_trade(
    trade: TradeRecord,
    participants: dict[int, AgentState | DmmState],
    fees: FeeSchedule,
) -> list[LedgerEntry]:
    """Move cash and shares between buyer and seller; credit the maker rebate.

    The rebate is exchange-funded: the taker pays exactly the trade price.
    Noise-group member ids settle into the shared P2 ledger.
    """
    if trade.buyer_id == trade.seller_id:
        raise ValueError("self-trade reached settlement")
    notional = trade.matched_price * trade.matched_quantity
    buyer_led = ledger_id(trade.buyer_id)
    seller_led = ledger_id(trade.seller_id)
    buyer = participants[buyer_led]
    seller = participants[seller_led]
    buyer.cash -= notional
    buyer.inventory += trade.matched_quantity
    seller.cash += notional
    seller.inventory -= trade.matched_quantity
    entries = [
        LedgerEntry(trade.trade_time, buyer_led, -notional, trade.matched_quantity, TRADE),
        LedgerEntry(trade.trade_time, seller_led, notional, -trade.matched_quantity, TRADE),
    ]
    if fees.maker_rebate_rate > 0.0:
        rebate = notional * fees.maker_rebate_rate
        maker_led = ledger_id(trade.maker_id)
        participants[maker_led].cash += rebate
        entries.append(LedgerEntry(trade.trade_time, maker_led, rebate, 0, REBATE))
    return entries


def mark_to_market(cash: float, inventory: int, price: float) -> float:
    return cash + inventory * price


def run_simulation(config: SimConfig, path: FundamentalPath | None = None) -> SimResult:
    """Run one seeded simulation to the horizon.

    Each timestamp: participants act on the previous step's post-match
    state, the market makers re-quote with sight of that incoming flow,
    the book crosses once, trades settle with maker rebates, and the step
    is snapshotted.
    """
    config.validate()
    fees = config.fee_schedule()
    if path is None:
        path = generate_fundamental_path(
            config.asset, config.rounds, substream(config.seed, STREAM_FUNDAMENTAL)
        )
    if path.usable_rounds < config.rounds:
        raise ValueError(
            f"fundamental path supports {path.usable_rounds} rounds, need {config.rounds}"
        )
    if config.shock is not None:
        # Applied to the pre-generated path: the insider's lookahead sees
        # the shock five steps early, by design.
        path = apply_shock(path, config.shock)
    fund = path.values

    rounds = config.rounds
    lam = config.arrival.lambda_rate
    p1_acts = np.minimum(substream(config.seed, STREAM_P1_ARRIVALS).poisson(lam, rounds), 1)
    p2_arrivals = substream(config.seed, STREAM_P2_ARRIVALS).poisson(lam, rounds)
    p3_acts = np.minimum(substream(config.seed, STREAM_P3_ARRIVALS).poisson(lam, rounds), 1)
    qty_rng = substream(config.seed, STREAM_P2_QUANTITY)

    book = OrderBook(config.asset.ticker)
    p1 = AgentState(P1_ID, cash=config.insider.starting_cash)
    p2 = AgentState(P2_ID, cash=0.0)
    p3 = AgentState(P3_ID, cash=config.momentum.starting_cash)
    half_spread = config.net_half_spread()
    dmms = [
        DmmState(
            FIRST_DMM_ID + i,
            max_inventory=config.dmm.max_inventory,
            base_half_spread=half_spread,
            widen_factor=config.dmm.widen_factor,
            cash=config.dmm.starting_cash,
        )
        for i in range(config.num_dmms)
    ]
    participants: dict[int, AgentState | DmmState] = {P1_ID: p1, P2_ID: p2, P3_ID: p3}
    participants.update({d.participant_id: d for d in dmms})
    for dmm in dmms:
        dmm.mid_window.append(config.asset.initial_price)

    member_counter = [FIRST_P2_MEMBER_ID]

    def next_member_id() -> int:
        member_counter[0] += 1
        return member_counter[0] - 1

    flow_history: deque[int] = deque(maxlen=agents.FLOW_HISTORY)
    trades: list[TradeRecord] = []
    snapshots: list[BookSnapshot] = []
    steps: list[StepReport] = []
    ledger: list[LedgerEntry] = []
    prev_snapshot = BookSnapshot(-1, None, None, None, 0.0)
    last_price: float | None = None
    traded_low: float | None = None
    traded_high: float | None = None

    def place(owner: int, intent: OrderIntent, t: int) -> Order:
        order = Order(
            order_id=book.make_order_id(t),
            owner_id=owner,
            submit_time=t,
            asset=config.asset.ticker,
            side=intent.side,
            limit_price=intent.price,
            original_quantity=intent.quantity,
        )
        book.submit_order(order)
        state = participants[ledger_id(owner)]
        state.open_order_ids.add(order.order_id)
        if intent.side == BUY:
            state.open_buy_quantity += intent.quantity
        else:
            state.open_sell_quantity += intent.quantity
        return order

    def release_exposure(order: Order) -> None:
        state = participants[ledger_id(order.owner_id)]
        if order.side == BUY:
            state.open_buy_quantity -= order.remaining_quantity
        else:
            state.open_sell_quantity -= order.remaining_quantity
        state.open_order_ids.discard(order.order_id)

    def cancel_open_orders(state: AgentState | DmmState) -> None:
        for oid in sorted(state.open_order_ids):
            order = book.orders[oid]
            if order.status in (PENDING, PARTIAL):
                book.cancel_order(oid)
            release_exposure(order)

    for t in range(rounds):
        # Noise-group members withdraw whatever was left of yesterday's
        # orders before anyone reacts to today's state: they are takers
        # responding to posted prices, not standing liquidity.
        cancel_open_orders(p2)
        # Public participants decide on the previous step's state; the
        # same-step flow is visible only to the market makers. P1 and P3
        # replace (cancel) any order still open from an earlier decision.
        incoming: list[tuple[int, OrderIntent]] = []
        if t >= 1 and p1_acts[t]:
            cancel_open_orders(p1)
            intent = agents.p1_decide(p1, config.insider, fund[t - 1], fund[t + 5])
            if intent is not None:
                incoming.append((P1_ID, intent))
        if p2_arrivals[t]:
            history = MatchedHistory(traded_low, traded_high)
            for intent in agents.p2_decide(
                prev_snapshot,
                history,
                int(p2_arrivals[t]),
                lambda: draw_quantity(config.noise, qty_rng),
            ):
                incoming.append((next_member_id(), intent))
        if t >= 2 and p3_acts[t]:
            cancel_open_orders(p3)
            intent = agents.p3_decide(p3, config.momentum, fund[t - 2], fund[t - 1])
            if intent is not None:
                incoming.append((P3_ID, intent))
        placed: list[Order] = []
        for owner, intent in incoming:
            placed.append(place(owner, intent, t))

        incoming_quantities = [intent.quantity for _, intent in incoming]
        large = agents.detect_large_order(incoming_quantities, flow_history)
        mid, sigma2, pmax, pmin = agents.window_stats(dmms[0].mid_window)
        inputs = DmmQuoteInputs(
            mid=mid,
            sigma2=sigma2,
            pmax=pmax,
            pmin=pmin,
            time_horizon=(rounds - t) / rounds,
            large_order=large,
        )
        for dmm in dmms:
            for oid in sorted(dmm.open_order_ids):
                order = book.orders[oid]
                if order.status in (PENDING, PARTIAL):
                    book.cancel_order(oid)
                release_exposure(order)
            for intent in agents.dmm_quote(dmm, inputs):
                if intent is not None:
                    placed.append(place(dmm.participant_id, intent, t))
        flow_history.extend(incoming_quantities)

        step_trades = book.match_crossing(t)
        for order in book.stp_canceled:
            release_exposure(order)
        for trade in step_trades:
            ledger.extend(settle_trade(trade, participants, fees))
            participants[ledger_id(trade.buyer_id)].open_buy_quantity -= trade.matched_quantity
            participants[ledger_id(trade.seller_id)].open_sell_quantity -= trade.matched_quantity
            last_price = trade.matched_price
            if traded_low is None or trade.matched_price < traded_low:
                traded_low = trade.matched_price
            if traded_high is None or trade.matched_price > traded_high:
                traded_high = trade.matched_price
        trades.extend(step_trades)
        # Drop filled orders from the owners' open sets. Every trade has at
        # least one same-step side; the other is reachable as the maker.
        for trade in step_trades:
            maker = book.orders[trade.maker_order_id]
            if maker.remaining_quantity == 0:
                participants[ledger_id(maker.owner_id)].open_order_ids.discard(maker.order_id)
        for order in placed:
            if order.remaining_quantity == 0:
                participants[ledger_id(order.owner_id)].open_order_ids.discard(order.order_id)

        snap = book.snapshot(t)
        if snap.midprice is not None:
            for dmm in dmms:
                dmm.mid_window.append(snap.midprice)
        difference = None
        if snap.midprice is not None:
            difference = abs(snap.midprice - fund[t]) / fund[t]
        steps.append(
            StepReport(
                time=t,
                inventories={pid: state.inventory for pid, state in participants.items()},
                cash={pid: state.cash for pid, state in participants.items()},
                price_history=last_price,
                fundamental=float(fund[t]),
                midprice=snap.midprice,
                difference=difference,
            )
        )
        snapshots.append(snap)
        prev_snapshot = snap

    submitted = sorted(book.orders.values(), key=lambda o: o.seq)
    return SimResult(
        config=config,
        path=path,
        trades=trades,
        snapshots=snapshots,
        steps=steps,
        orders=submitted,
        ledger=ledger,
        names=participant_names(config.num_dmms),
    )
