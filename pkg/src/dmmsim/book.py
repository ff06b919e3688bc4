"""Price-time-priority limit order book with batch crossing."""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

TICK = 0.01

BUY = "BUY"
SELL = "SELL"

PENDING = "PENDING"
PARTIAL = "PARTIAL"
EXECUTED = "EXECUTED"
CANCELED = "CANCELED"


def round_to_tick(price: float) -> float:
    """Round to the 0.01 price grid, half-up."""
    return math.floor(price * 100.0 + 0.5) / 100.0


@dataclass(eq=False, slots=True)
class Order:
    order_id: str
    owner_id: int
    submit_time: int
    asset: str
    side: str
    limit_price: float
    original_quantity: int
    remaining_quantity: int = -1
    status: str = PENDING
    seq: int = -1  # arrival sequence, assigned by the book on submit

    def __post_init__(self) -> None:
        if self.remaining_quantity < 0:
            self.remaining_quantity = self.original_quantity


@dataclass(frozen=True, slots=True)
class TradeRecord:
    trade_time: int
    matched_price: float
    matched_quantity: int
    buyer_id: int
    seller_id: int
    taker_side: str
    maker_order_id: str

    @property
    def maker_id(self) -> int:
        """Owner of the resting side; receives the maker rebate."""
        return self.seller_id if self.taker_side == BUY else self.buyer_id


@dataclass(frozen=True, slots=True)
class BookSnapshot:
    time: int
    best_ask: float | None
    best_bid: float | None
    midprice: float | None
    depth_value_at_best: float


class OrderBook:
    """Resting limit orders for one asset, crossed at price-time priority.

    Submission and matching are separate phases: ``submit_order`` only
    queues; ``match_crossing`` crosses the book once per timestamp, trading
    at the earlier-submitted (resting) order's limit price. A participant
    never trades with itself: when its own orders cross at the top of the
    book, the newer one skips to the next eligible counterparty, and is
    canceled outright when none exists (cancel-newest self-trade
    prevention), so the book is never left crossed.
    """

    def __init__(self, asset: str = "IBM"):
        self.asset = asset
        self.bids: list[Order] = []
        self.asks: list[Order] = []
        self._bid_keys: list[tuple[float, int]] = []
        self._ask_keys: list[tuple[float, int]] = []
        self.orders: dict[str, Order] = {}
        self.stp_canceled: list[Order] = []
        self._next_seq = 0
        self._next_id = 0

    def make_order_id(self, time: int) -> str:
        """Next id in the ``<time><asset><sequence>`` scheme."""
        oid = f"{time}{self.asset}{self._next_id}"
        self._next_id += 1
        return oid

    def submit_order(self, order: Order) -> None:
        if order.order_id in self.orders:
            raise ValueError(f"duplicate order_id {order.order_id!r}")
        if order.side not in (BUY, SELL):
            raise ValueError(f"order {order.order_id!r}: side must be BUY or SELL")
        if order.original_quantity <= 0:
            raise ValueError(f"order {order.order_id!r}: quantity must be positive")
        if order.limit_price <= 0:
            raise ValueError(f"order {order.order_id!r}: price must be positive")
        if order.remaining_quantity != order.original_quantity:
            raise ValueError(f"order {order.order_id!r}: submitted with partial fill")
        if order.status != PENDING:
            raise ValueError(f"order {order.order_id!r}: submitted with status {order.status}")
        order.seq = self._next_seq
        self._next_seq += 1
        if order.side == BUY:
            key = (-order.limit_price, order.seq)
            i = bisect_left(self._bid_keys, key)
            self._bid_keys.insert(i, key)
            self.bids.insert(i, order)
        else:
            key = (order.limit_price, order.seq)
            i = bisect_left(self._ask_keys, key)
            self._ask_keys.insert(i, key)
            self.asks.insert(i, order)
        self.orders[order.order_id] = order

    def cancel_order(self, order_id: str) -> Order:
        order = self.orders.get(order_id)
        if order is None:
            raise ValueError(f"unknown order_id {order_id!r}")
        if order.status in (EXECUTED, CANCELED):
            raise ValueError(f"order {order_id!r} already {order.status}; cannot cancel")
        self._remove(order)
        order.status = CANCELED
        return order

    def match_crossing(self, time: int) -> list[TradeRecord]:
        """Cross the book; returns trades in execution order.

        Self-trade-prevention cancellations performed during the call are
        exposed on ``self.stp_canceled`` until the next call.
        """
        trades: list[TradeRecord] = []
        self.stp_canceled = []
        while self.bids and self.asks:
            bid, ask = self.bids[0], self.asks[0]
            if bid.limit_price < ask.limit_price:
                break
            if bid.owner_id != ask.owner_id:
                self._execute(trades, time, 0, 0)
                continue
            pair = self._resolve_self_cross(bid, ask)
            if pair is not None:
                self._execute(trades, time, pair[0], pair[1])

        return trades

    def snapshot(self, time: int) -> BookSnapshot:
        best_bid = self.bids[0].limit_price if self.bids else None
        best_ask = self.asks[0].limit_price if self.asks else None
        mid = None
        if best_bid is not None and best_ask is not None:
            mid = (best_ask + best_bid) / 2.0
        depth = 0.0
        for order in self.bids:
            if order.limit_price != best_bid:
                break
            depth += order.limit_price * order.remaining_quantity
        for order in self.asks:
            if order.limit_price != best_ask:
                break
            depth += order.limit_price * order.remaining_quantity
        return BookSnapshot(time, best_ask, best_bid, mid, depth)

    def _resolve_self_cross(self, bid: Order, ask: Order) -> tuple[int, int] | None:
        """Pick a counterparty when the top orders share an owner.

        The newer of the pair skips past its owner's queue on the opposite
        side; failing that, the older one is offered to the rest of the
        newer one's side. If nobody else crosses, the newer order is
        canceled and the loop re-evaluates.
        """
        if bid.seq > ask.seq:
            j = self._first_eligible_ask(bid)
            if j is not None:
                return 0, j
            j = self._first_eligible_bid(ask)
            if j is not None:
                return j, 0
            newer = bid
        else:
            j = self._first_eligible_bid(ask)
            if j is not None:
                return j, 0
            j = self._first_eligible_ask(bid)
            if j is not None:
                return 0, j
            newer = ask
        self._remove(newer)
        newer.status = CANCELED
        self.stp_canceled.append(newer)
        return None

    def _first_eligible_ask(self, bid: Order) -> int | None:
        for j, order in enumerate(self.asks):
            if bid.limit_price < order.limit_price:
                return None
            if order.owner_id != bid.owner_id:
                return j
        return None

    def _first_eligible_bid(self, ask: Order) -> int | None:
        for j, order in enumerate(self.bids):
            if order.limit_price < ask.limit_price:
                return None
            if order.owner_id != ask.owner_id:
                return j
        return None

    def _execute(self, trades: list[TradeRecord], time: int, bi: int, ai: int) -> None:
        bid, ask = self.bids[bi], self.asks[ai]
        quantity = min(bid.remaining_quantity, ask.remaining_quantity)
        maker, taker = (bid, ask) if bid.seq < ask.seq else (ask, bid)
        trades.append(
            TradeRecord(
                trade_time=time,
                matched_price=maker.limit_price,
                matched_quantity=quantity,
                buyer_id=bid.owner_id,
                seller_id=ask.owner_id,
                taker_side=taker.side,
                maker_order_id=maker.order_id,
            )
        )
        for order in (bid, ask):
            order.remaining_quantity -= quantity
            if order.remaining_quantity == 0:
                order.status = EXECUTED
                self._remove(order)
            else:
                order.status = PARTIAL

    def _remove(self, order: Order) -> None:
        if order.side == BUY:
            keys, queue = self._bid_keys, self.bids
            key = (-order.limit_price, order.seq)
        else:
            keys, queue = self._ask_keys, self.asks
            key = (order.limit_price, order.seq)
        i = bisect_left(keys, key)
        if i >= len(keys) or keys[i] != key:
            raise AssertionError(f"order {order.order_id!r} not found in queue")
        del keys[i]
        del queue[i]
