"""Liquidity and efficiency metrics computed from trade and quote tapes.

All functions are pure. Relative metrics (quoted spread, realized spread,
adverse selection, price efficiency) are scale-invariant; depth scales with
price. Trade-level metrics use the trade sign q (+1 buyer-initiated, -1
seller-initiated) with value weights p*c, so that per trade

    q (p - m_t)/m_t  =  q (p - m_{t+k})/m_t  +  q (m_{t+k} - m_t)/m_t

decomposes the effective half-spread into realized spread and adverse
selection with identical weights and eligibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .book import BUY, BookSnapshot, Order, TradeRecord
from .dynamics import ShockSpec


@dataclass
class MetricsReport:
    ep_ratio: float
    qs: float
    db: float
    rs5: float
    rs10: float
    as5: float
    as10: float
    pe_series: list[float | None]
    recovery_timestamps: int | None = None

    def as_row(self) -> dict[str, float]:
        """The per-trial CSV row, with the published column names."""
        return {
            "EP_ratio": self.ep_ratio,
            "qs": self.qs,
            "DB": self.db,
            "RS5": self.rs5,
            "RS10": self.rs10,
            "AS5": self.as5,
            "AS10": self.as10,
        }


def ep_ratio(orders: Sequence[Order], exclude_owners: set[int] | None = None) -> float:
    """Executed orders over all submitted orders, judged at the horizon.

    A partially filled order counts as executed only once fully filled.
    ``exclude_owners`` drops a participant's orders from both sides of the
    ratio (used to filter out market-maker quotes).
    """
    if exclude_owners:
        orders = [o for o in orders if o.owner_id not in exclude_owners]
    if not orders:
        raise ValueError("no orders submitted")
    executed = sum(1 for o in orders if o.remaining_quantity == 0)
    return executed / len(orders)


def quoted_spread_tw(quotes: Sequence[BookSnapshot]) -> float:
    """Time-weighted mean of (ask - bid)/mid over two-sided snapshots."""
    total = 0.0
    count = 0
    for snap in quotes:
        if snap.best_ask is None or snap.best_bid is None:
            continue
        total += (snap.best_ask - snap.best_bid) / snap.midprice
        count += 1
    if count == 0:
        raise ValueError("no two-sided snapshot in the quote tape")
    return total / count


def depth_best_tw(quotes: Sequence[BookSnapshot]) -> float:
    """Time-weighted mean value resting at the best quotes.

    Empty-book snapshots contribute zero.
    """
    if not quotes:
        raise ValueError("empty quote tape")
    return sum(snap.depth_value_at_best for snap in quotes) / len(quotes)


def _signed_trade_terms(
    trades: Sequence[TradeRecord], quotes: Sequence[BookSnapshot], k: int
):
    """Yield (weight, sign, price, mid_now, mid_later) for eligible trades."""
    if k < 1:
        raise ValueError("k must be >= 1")
    horizon = len(quotes)
    for trade in trades:
        t = trade.trade_time
        if t + k >= horizon:
            continue
        mid_now = quotes[t].midprice
        mid_later = quotes[t + k].midprice
        if mid_now is None or mid_later is None:
            continue
        sign = 1.0 if trade.taker_side == BUY else -1.0
        weight = trade.matched_price * trade.matched_quantity
        yield weight, sign, trade.matched_price, mid_now, mid_later


def realized_spread_k(
    trades: Sequence[TradeRecord], quotes: Sequence[BookSnapshot], k: int
) -> float:
    """Value-weighted q (p - m_{t+k})/m_t: the markup the maker keeps."""
    num = 0.0
    den = 0.0
    for w, q, p, m_now, m_later in _signed_trade_terms(trades, quotes, k):
        num += w * q * (p - m_later) / m_now
        den += w
    if den == 0.0:
        raise ValueError(f"no trade with a midpoint {k} steps ahead")
    return num / den


def adverse_selection_k(
    trades: Sequence[TradeRecord], quotes: Sequence[BookSnapshot], k: int
) -> float:
    """Value-weighted q (m_{t+k} - m_t)/m_t: the maker's loss to informed flow."""
    num = 0.0
    den = 0.0
    for w, q, p, m_now, m_later in _signed_trade_terms(trades, quotes, k):
        num += w * q * (m_later - m_now) / m_now
        den += w
    if den == 0.0:
        raise ValueError(f"no trade with a midpoint {k} steps ahead")
    return num / den


def price_efficiency_series(
    quotes: Sequence[BookSnapshot], fundamental: Sequence[float]
) -> list[float | None]:
    """|mid - fundamental| / fundamental per timestamp; None without a mid."""
    if len(quotes) > len(fundamental):
        raise ValueError("fundamental path shorter than quote tape")
    series: list[float | None] = []
    for snap, value in zip(quotes, fundamental):
        if snap.midprice is None:
            series.append(None)
        else:
            series.append(abs(snap.midprice - value) / value)
    return series


def shock_recovery_time(
    pe_series: Sequence[float | None], shock: ShockSpec | None
) -> int | None:
    """Steps from the shock until the deviation re-enters the band.

    Returns None when the series never converges before the horizon
    (NOT_RECOVERED).
    """
    if shock is None:
        raise ValueError("no shock configured for this run")
    for dt in range(len(pe_series) - shock.shock_time):
        pe = pe_series[shock.shock_time + dt]
        if pe is not None and pe < shock.convergence_band:
            return dt
    return None


def compute_metrics(
    orders: Sequence[Order],
    trades: Sequence[TradeRecord],
    quotes: Sequence[BookSnapshot],
    fundamental: Sequence[float],
    shock: ShockSpec | None = None,
    exclude_owners: set[int] | None = None,
) -> MetricsReport:
    """Full per-trial metrics report from one run's tapes."""
    pe = price_efficiency_series(quotes, fundamental)
    recovery = shock_recovery_time(pe, shock) if shock is not None else None
    return MetricsReport(
        ep_ratio=ep_ratio(orders, exclude_owners),
        qs=quoted_spread_tw(quotes),
        db=depth_best_tw(quotes),
        rs5=realized_spread_k(trades, quotes, 5),
        rs10=realized_spread_k(trades, quotes, 10),
        as5=adverse_selection_k(trades, quotes, 5),
        as10=adverse_selection_k(trades, quotes, 10),
        pe_series=pe,
        recovery_timestamps=recovery,
    )
