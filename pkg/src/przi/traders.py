"""Zero-intelligence traders.

Every trader holds one unit assignment at a time and answers
``quote(book, t)`` with an integer price (or None). The fixed strategies
GVWY, SHVR and ZIC are the ``s = +1``, ``s = -1`` and ``s = 0`` corners of
the PRZI family; :class:`PRZITrader` covers the rest of ``[-1, +1]``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .engine import (DEFAULT_CACHE, BuyerMinEstimator, LutCache, SellerMaxEstimator,
                     draw_ci, quantize_s)

STRATEGY_KINDS = ("ZIU", "ZIC", "GVWY", "SHVR", "PRZI", "PRSH", "IPRZI")


class ConfigError(ValueError):
    pass


@dataclass
class MarketParams:
    """Market-wide constants every trader can see."""

    max_price: int = 500
    min_price: int = 1
    shvr_seed_low: int | None = None
    shvr_seed_high: int | None = None
    buyer_pmin: str = "zic-style"
    cache: LutCache = field(default=DEFAULT_CACHE, repr=False)

    def __post_init__(self):
        if self.shvr_seed_low is None:
            self.shvr_seed_low = self.min_price
        if self.shvr_seed_high is None:
            self.shvr_seed_high = self.max_price
        if not 1 <= self.min_price <= self.max_price:
            raise ConfigError("need 1 <= min_price <= max_price")


class Trader:
    kind = "?"
    loss_permitted = False

    def __init__(self, tid, is_buyer: bool, rng: random.Random | int | None = None,
                 market: MarketParams | None = None):
        self.tid = tid
        self.is_buyer = is_buyer
        self.rng = rng if isinstance(rng, random.Random) else random.Random(rng)
        self.market = market if market is not None else MarketParams()
        self.limit = None
        self.profit = 0
        self.trade_count = 0

    def __repr__(self):
        side = "B" if self.is_buyer else "S"
        return f"<{self.kind} {self.tid} {side} limit={self.limit}>"

    @property
    def direction(self) -> str:
        return "buy" if self.is_buyer else "sell"

    def assign(self, limit: int) -> None:
        if limit < self.market.min_price:
            raise ConfigError(f"limit {limit} below the minimum price")
        self.limit = limit

    def settle(self, surplus: int, price: int, t: float) -> None:
        self.profit += surplus
        self.trade_count += 1

    def quote(self, book, t: float):
        raise NotImplementedError

    @property
    def strategy_value(self) -> float:
        """Position in PRZI strategy space (``nan`` for ZIU)."""
        return float("nan")


class ZIUTrader(Trader):
    """Uniform over the whole price range, ignoring the limit. May trade at a loss."""

    kind = "ZIU"
    loss_permitted = True

    def quote(self, book, t):
        lo, hi = self.market.min_price, self.market.max_price
        return lo + int(self.rng.random() * (hi - lo + 1))


class ZICTrader(Trader):
    kind = "ZIC"

    def assign(self, limit):
        if not self.is_buyer and limit > self.market.max_price:
            raise ConfigError(f"seller limit {limit} above the system maximum price")
        super().assign(limit)

    def quote(self, book, t):
        if self.is_buyer:
            lo, hi = self.market.min_price, self.limit
        else:
            lo, hi = self.limit, self.market.max_price
        return lo + int(self.rng.random() * (hi - lo + 1))

    @property
    def strategy_value(self):
        return 0.0


class GVWYTrader(Trader):
    kind = "GVWY"

    def quote(self, book, t):
        return self.limit

    @property
    def strategy_value(self):
        return 1.0


def shvr_price(is_buyer: bool, limit: int, best_bid, best_ask, market: MarketParams) -> int:
    if is_buyer:
        if best_bid is None:
            return min(market.shvr_seed_low, limit)
        return min(best_bid + 1, limit)
    if best_ask is None:
        return max(market.shvr_seed_high, limit)
    return max(best_ask - 1, limit)


class SHVRTrader(Trader):
    """Improve the best price on its side by one tick, up to the limit.

    A SHVR that is itself the best quote shaves its own price.
    """

    kind = "SHVR"

    def quote(self, book, t):
        return shvr_price(self.is_buyer, self.limit, book.bids.best, book.asks.best, self.market)

    @property
    def strategy_value(self):
        return -1.0


class PRZITrader(Trader):
    """Fixed-strategy PRZI trader.

    Seller PMFs run from the limit up to a private ceiling estimate; buyer
    PMFs run from a floor (the minimum price, or a private estimate in
    ``heuristic`` mode) up to the limit. For ``s < 0`` the far bound is
    blended toward the SHVR price, collapsing onto it at ``s = -1``.
    """

    kind = "PRZI"

    def __init__(self, tid, is_buyer, rng=None, market=None, s: float = 0.0,
                 c_i: float | None = None):
        super().__init__(tid, is_buyer, rng, market)
        if c_i is None:
            c_i = draw_ci(self.rng)
        self.c_i = c_i
        m = self.market
        if is_buyer:
            self.bounds = BuyerMinEstimator(c_i, m.buyer_pmin, m.min_price)
        else:
            self.bounds = SellerMaxEstimator(c_i, m.max_price)
        self._tables = m.cache._tables
        self._build = m.cache._build
        self.set_s(s)

    def set_s(self, s: float) -> None:
        if not -1.0 <= s <= 1.0:
            raise ValueError(f"strategy {s} outside [-1, 1]")
        self.s = s
        self._sq = quantize_s(s)

    @property
    def strategy_value(self):
        return self.s

    def assign(self, limit):
        super().assign(limit)
        self.bounds.on_assignment(limit)

    def price_bounds(self, book, s: float):
        est = self.bounds
        lam = self.limit
        if self.is_buyer:
            if est.mode == "heuristic":
                est.observe_rival(book.rival_extreme_bid(self))
            return est.bound(s, lam, book.bids.best, self.market.shvr_seed_low), lam
        est.observe_rival(book.rival_extreme_ask(self))
        return lam, est.bound(s, lam, book.asks.best, self.market.shvr_seed_high)

    def distribution(self, book):
        lo, hi = self.price_bounds(book, self.s)
        key = (self._sq, lo, hi, self.is_buyer)
        dist = self._tables.get(key)
        if dist is None:
            dist = self._build(key)
        return dist

    def quote(self, book, t):
        return self.distribution(book).sample(self.rng.random())


def ziu_quote(trader, book=None):
    return ZIUTrader.quote(trader, book, 0.0)


def zic_quote(trader, book=None):
    return ZICTrader.quote(trader, book, 0.0)


def gvwy_quote(trader, book=None):
    return trader.limit


def shvr_quote(trader, book):
    return shvr_price(trader.is_buyer, trader.limit, book.best_bid, book.best_ask, trader.market)


FIXED_KINDS = {"ZIU": ZIUTrader, "ZIC": ZICTrader, "GVWY": GVWYTrader, "SHVR": SHVRTrader,
               "PRZI": PRZITrader}
