"""Decision rules for the three trader classes and the designated market maker.

Participant 1 trades on a five-step-ahead fundamental signal, participant 2
is the collective noise-flow group hitting the standing quotes, participant
3 chases the previous fundamental move. The market maker centers its quotes
on an inventory-adjusted reservation price and skews its sizes toward a
trailing-range target weight.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .book import BUY, SELL, TICK, BookSnapshot, round_to_tick

#: Shares allowed per P1/P3 order.
ORDER_QUANTITY_CAP = 5

#: Trailing midprice window length used for the DMM's range and variance.
TRAILING_WINDOW = 20

#: Order-quantity observations retained for large-order detection.
FLOW_HISTORY = 50

#: Below this many observations the large-order detector stays quiet.
FLOW_WARMUP = 5


@dataclass
class AgentParams:
    price_premium: float = 0.5
    max_inventory: int = 50
    starting_cash: float = 100.0
    insider_lookahead: int = 5
    refrain_threshold: float = 0.10
    order_quantity_cap: int = ORDER_QUANTITY_CAP

    def __post_init__(self) -> None:
        if self.price_premium < 0:
            raise ValueError("price_premium must be >= 0")
        if self.max_inventory <= 0:
            raise ValueError("max_inventory must be > 0")
        if self.refrain_threshold <= 0:
            raise ValueError("refrain_threshold must be > 0")


@dataclass
class DmmParams:
    """Configuration of the market-maker bench.

    ``base_half_spread`` is quoted gross of the maker rebate; the engine
    nets the expected per-share rebate out of it when a fee schedule is in
    force, so richer rebates translate into tighter quotes.
    ``aggressiveness_step`` is the relative half-spread discount each
    additional maker quotes at (competition by undercutting): maker i runs
    a half-spread of net * (1 - step * (i-1)).
    """

    max_inventory: int = 50
    base_half_spread: float = 0.40
    widen_factor: float = 2.0
    starting_cash: float = 100.0
    aggressiveness_step: float = 0.05

    def __post_init__(self) -> None:
        if self.max_inventory <= 0:
            raise ValueError("max_inventory must be > 0")
        if self.base_half_spread <= 0:
            raise ValueError("base_half_spread must be > 0")
        if self.widen_factor < 1:
            raise ValueError("widen_factor must be >= 1")
        if not 0.0 <= self.aggressiveness_step < 1.0:
            raise ValueError("aggressiveness_step must be in [0, 1)")


@dataclass
class AgentState:
    participant_id: int
    cash: float = 0.0
    inventory: int = 0
    open_order_ids: set[str] = field(default_factory=set)
    # Unfilled remainders of resting orders, counted against the inventory
    # cap so late fills can never push |inventory| past max_inventory.
    open_buy_quantity: int = 0
    open_sell_quantity: int = 0


@dataclass
class DmmState:
    participant_id: int
    max_inventory: int
    base_half_spread: float
    widen_factor: float = 2.0
    cash: float = 0.0
    inventory: int = 0
    open_order_ids: set[str] = field(default_factory=set)
    open_buy_quantity: int = 0
    open_sell_quantity: int = 0
    mid_window: deque = field(default_factory=lambda: deque(maxlen=TRAILING_WINDOW))

    @property
    def max_quote_size(self) -> int:
        return self.max_inventory // 5


@dataclass(frozen=True)
class DmmQuoteInputs:
    """Per-timestamp view the market maker quotes from.

    ``sigma2`` is the trailing-window midprice variance in squared price
    units, ``pmax``/``pmin`` the window extremes, ``time_horizon`` the
    remaining fraction of the run.
    """

    mid: float
    sigma2: float
    pmax: float
    pmin: float
    time_horizon: float
    large_order: bool = False


@dataclass(frozen=True)
class MatchedHistory:
    """Running extremes of executed prices, the noise group's fallback."""

    lowest: float | None = None
    highest: float | None = None


@dataclass(frozen=True)
class OrderIntent:
    side: str
    price: float
    quantity: int


def buy_capacity(state: AgentState, params: AgentParams) -> int:
    return max(params.max_inventory - state.inventory - state.open_buy_quantity, 0)


def sell_capacity(state: AgentState, params: AgentParams) -> int:
    return max(params.max_inventory + state.inventory - state.open_sell_quantity, 0)


def p1_decide(
    state: AgentState, params: AgentParams, price_prev: float, price_future: float
) -> OrderIntent | None:
    """Insider order from the t-1 and t+5 fundamental values.

    Buys (sells) at the last price plus (minus) a premium share of the
    expected move; refrains entirely when the move exceeds the 10%
    threshold relative to the last price.
    """
    profit_margin = abs(price_future - price_prev)
    if profit_margin / price_prev > params.refrain_threshold:
        return None
    if price_future > price_prev:
        price = price_prev + params.price_premium * profit_margin
        quantity = min(buy_capacity(state, params), params.order_quantity_cap)
        side = BUY
    else:
        price = price_prev - params.price_premium * profit_margin
        quantity = min(sell_capacity(state, params), params.order_quantity_cap)
        side = SELL
    if quantity <= 0:
        return None
    return OrderIntent(side, round_to_tick(price), quantity)


def p3_decide(
    state: AgentState, params: AgentParams, price_prev2: float, price_prev: float
) -> OrderIntent | None:
    """Momentum order extrapolating the t-2 to t-1 fundamental move.

    An unchanged price takes the sell branch.
    """
    profit_margin = abs(price_prev - price_prev2)
    if price_prev > price_prev2:
        price = price_prev + params.price_premium * profit_margin
        quantity = min(buy_capacity(state, params), params.order_quantity_cap)
        side = BUY
    else:
        price = price_prev - params.price_premium * profit_margin
        quantity = min(sell_capacity(state, params), params.order_quantity_cap)
        side = SELL
    if quantity <= 0:
        return None
    return OrderIntent(side, round_to_tick(price), quantity)


def p2_decide(
    book_view: BookSnapshot,
    matched_history: MatchedHistory,
    arrivals: int = 1,
    draw_quantity: Callable[[], int] = lambda: 1,
) -> list[OrderIntent]:
    """Noise-group orders hitting the standing quotes.

    Each arrival sells at the best bid (or buys at the lowest executed
    price when no bids stand) and buys at the best ask (or sells at the
    highest executed price). With neither book nor history there is
    nothing to trade against.
    """
    intents: list[OrderIntent] = []
    for _ in range(arrivals):
        if book_view.best_bid is not None:
            intents.append(OrderIntent(SELL, book_view.best_bid, draw_quantity()))
        elif matched_history.lowest is not None:
            intents.append(OrderIntent(BUY, matched_history.lowest, draw_quantity()))
        if book_view.best_ask is not None:
            intents.append(OrderIntent(BUY, book_view.best_ask, draw_quantity()))
        elif matched_history.highest is not None:
            intents.append(OrderIntent(SELL, matched_history.highest, draw_quantity()))
    return intents


def dmm_reservation_price(inputs: DmmQuoteInputs, state: DmmState) -> float:
    """Inventory-adjusted quote center.

    r = s + (1 - 2 q_norm) (sigma^2 / 2) T with q_norm = (q + Q)/(2Q), so
    the tilt is -q/Q times the risk term: a long maker shades its quotes
    down, a short one up.
    """
    if state.max_inventory <= 0:
        raise ValueError("max_inventory must be positive")
    q_norm = (state.inventory + state.max_inventory) / (2.0 * state.max_inventory)
    return inputs.mid + (1.0 - 2.0 * q_norm) * (inputs.sigma2 / 2.0) * inputs.time_horizon


def dmm_target_weight(inputs: DmmQuoteInputs) -> float:
    """Position of the mid inside its trailing range, clamped to [0, 1].

    1 at the range bottom (favor buying), 0 at the top; a flat window is
    treated as balanced.
    """
    if inputs.pmax == inputs.pmin:
        return 0.5
    tw = (inputs.pmax - inputs.mid) / (inputs.pmax - inputs.pmin)
    return min(max(tw, 0.0), 1.0)


def detect_large_order(
    incoming_quantities: Iterable[int], history_quantities: Sequence[int]
) -> bool:
    """Flag any arrival larger than mean + 2 sd of recent order sizes."""
    n = len(history_quantities)
    if n < FLOW_WARMUP:
        return False
    mean = sum(history_quantities) / n
    var = sum((q - mean) ** 2 for q in history_quantities) / (n - 1)
    threshold = mean + 2.0 * math.sqrt(var)
    return any(q > threshold for q in incoming_quantities)


def dmm_quote(
    state: DmmState, inputs: DmmQuoteInputs
) -> tuple[OrderIntent | None, OrderIntent | None]:
    """Two-sided quote around the reservation price.

    The half-spread doubles (by ``widen_factor``) when large incoming flow
    was flagged. Sizes start from the per-side inventory headroom capped at
    ``max_quote_size``, then skew toward the target weight: the bid is
    scaled by TW and the ask by 1 - TW, rounded up. Two-sided quoting is an
    obligation, so a side with headroom is never below one share; only an
    exhausted inventory cap silences it.
    """
    r = dmm_reservation_price(inputs, state)
    h = state.base_half_spread * (state.widen_factor if inputs.large_order else 1.0)
    bid_price = round_to_tick(r - h)
    ask_price = round_to_tick(r + h)
    if ask_price <= bid_price:  # tick rounding collapsed the spread
        ask_price = bid_price + TICK
    tw = dmm_target_weight(inputs)
    bid_room = min(state.max_quote_size, state.max_inventory - state.inventory)
    ask_room = min(state.max_quote_size, state.max_inventory + state.inventory)
    bid_size = max(math.ceil(bid_room * tw), 1) if bid_room > 0 else 0
    ask_size = max(math.ceil(ask_room * (1.0 - tw)), 1) if ask_room > 0 else 0
    bid = OrderIntent(BUY, bid_price, bid_size) if bid_size > 0 and bid_price > 0 else None
    ask = OrderIntent(SELL, ask_price, ask_size) if ask_size > 0 else None
    return bid, ask


def window_stats(window: Sequence[float]) -> tuple[float, float, float, float]:
    """(mid, price variance, max, min) of a trailing midprice window.

    The variance is of midprice levels, in squared price units, so the
    reservation-price risk term lives on the price scale the quotes do.
    """
    if not window:
        raise ValueError("trailing window is empty")
    mid = window[-1]
    pmax = max(window)
    pmin = min(window)
    if len(window) < 2:
        return mid, 0.0, pmax, pmin
    mean = sum(window) / len(window)
    sigma2 = sum((p - mean) ** 2 for p in window) / (len(window) - 1)
    return mid, sigma2, pmax, pmin
