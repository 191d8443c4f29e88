"""Discrete-time continuous double auction.

The book holds at most one resting unit quote per trader. An incoming quote
that crosses the spread trades immediately at the standing quote's price;
otherwise it replaces the trader's previous quote. Only the top of book is
exposed to traders, but every resting quote is kept so the next best price
is known after a fill.
"""

from __future__ import annotations

import csv
import random
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple

BID, ASK = "bid", "ask"


class QuoteRejected(ValueError):
    pass


class UndefinedPrice(ValueError):
    """Raised when a price needs both sides of the book and one is empty."""


@dataclass(frozen=True)
class Quote:
    trader_id: object
    side: str
    price: int
    time: float = 0.0
    quantity: int = 1

    def __post_init__(self):
        if self.side not in (BID, ASK):
            raise ValueError(f"bad side {self.side!r}")
        if self.quantity != 1:
            raise ValueError("quotes are for a single unit")


class Trade(NamedTuple):
    time: float
    price: int
    buyer_id: object
    seller_id: object
    buyer_surplus: int
    seller_surplus: int


@dataclass(frozen=True)
class Assignment:
    trader_id: object
    direction: str  # "buy" | "sell"
    limit: int

    def __post_init__(self):
        if self.limit < 1:
            raise ValueError("limit price below one tick")


class _Side:
    __slots__ = ("is_bid", "levels", "best")

    def __init__(self, is_bid: bool):
        self.is_bid = is_bid
        self.levels: dict[int, deque] = {}
        self.best = None

    def add(self, owner, price: int) -> None:
        lv = self.levels.get(price)
        if lv is None:
            lv = self.levels[price] = deque()
        lv.append(owner)
        best = self.best
        if best is None or (price > best if self.is_bid else price < best):
            self.best = price

    def remove(self, owner, price: int) -> None:
        lv = self.levels[price]
        lv.remove(owner)
        if not lv:
            del self.levels[price]
            if price == self.best:
                self._reset_best()

    def pop_best(self):
        price = self.best
        lv = self.levels[price]
        owner = lv.popleft()
        if not lv:
            del self.levels[price]
            self._reset_best()
        return owner

    def _reset_best(self) -> None:
        if self.levels:
            self.best = max(self.levels) if self.is_bid else min(self.levels)
        else:
            self.best = None

    def best_qty(self) -> int:
        return len(self.levels[self.best]) if self.best is not None else 0

    def __len__(self) -> int:
        return sum(len(lv) for lv in self.levels.values())


class OrderBook:
    """Price-time priority book of single-unit quotes.

    Owners are arbitrary hashable objects (trader instances in a session).
    The book also tracks, per side, the most extreme quotes ever submitted by
    two distinct owners, so a trader can look up the most extreme quote by
    anyone other than itself in O(1).
    """

    def __init__(self, max_price: int | None = None):
        self.max_price = max_price
        self.bids = _Side(True)
        self.asks = _Side(False)
        self.resting: dict = {}
        self._ask_hi = [None, None, None, None]  # price1, owner1, price2, owner2
        self._bid_lo = [None, None, None, None]

    @property
    def best_bid(self):
        return self.bids.best

    @property
    def best_ask(self):
        return self.asks.best

    def top(self):
        """``(best_bid, bid_qty, best_ask, ask_qty)``; prices may be None."""
        return self.bids.best, self.bids.best_qty(), self.asks.best, self.asks.best_qty()

    def submit(self, owner, is_buyer: bool, price: int):
        """Route a quote; return ``(counterparty, trade_price)`` or None if it rested.

        No validation: callers in the hot loop are trusted traders.
        """
        resting = self.resting
        old = resting.pop(owner, None)
        if is_buyer:
            if old is not None:
                self.bids.remove(owner, old)
            self._track(self._bid_lo, owner, price, lower=True)
            ask = self.asks.best
            if ask is not None and price >= ask:
                seller = self.asks.pop_best()
                del resting[seller]
                return seller, ask
            self.bids.add(owner, price)
        else:
            if old is not None:
                self.asks.remove(owner, old)
            self._track(self._ask_hi, owner, price, lower=False)
            bid = self.bids.best
            if bid is not None and price <= bid:
                buyer = self.bids.pop_best()
                del resting[buyer]
                return buyer, bid
            self.asks.add(owner, price)
        resting[owner] = price
        return None

    def cancel(self, owner) -> None:
        price = self.resting.pop(owner, None)
        if price is None:
            return
        if owner in self.bids.levels.get(price, ()):
            self.bids.remove(owner, price)
        else:
            self.asks.remove(owner, price)

    @staticmethod
    def _track(slot: list, owner, price: int, lower: bool) -> None:
        p1, o1, p2, _ = slot
        if o1 == owner:
            if price < p1 if lower else price > p1:
                slot[0] = price
        elif p1 is None or (price < p1 if lower else price > p1):
            slot[:] = [price, owner, p1, o1]
        elif p2 is None or (price < p2 if lower else price > p2):
            slot[2] = price
            slot[3] = owner

    def rival_extreme_ask(self, owner):
        """Highest ask ever quoted by an owner other than ``owner``."""
        p1, o1, p2, _ = self._ask_hi
        return p2 if o1 == owner else p1

    def rival_extreme_bid(self, owner):
        """Lowest bid ever quoted by an owner other than ``owner``."""
        p1, o1, p2, _ = self._bid_lo
        return p2 if o1 == owner else p1

    def crossed(self) -> bool:
        b, a = self.bids.best, self.asks.best
        return b is not None and a is not None and b >= a


def submit_quote(book: OrderBook, q: Quote, assignments: dict):
    """Validated entry point: route ``q`` and return a :class:`Trade` or ``"rested"``.

    ``assignments`` maps trader ids to their current :class:`Assignment`.
    """
    a = assignments.get(q.trader_id)
    if a is None:
        raise QuoteRejected(f"trader {q.trader_id!r} has no assignment")
    if q.price < 1:
        raise QuoteRejected("price must be at least one tick")
    if book.max_price is not None and q.price > book.max_price:
        raise QuoteRejected("price above the system maximum")
    is_buyer = q.side == BID
    if is_buyer != (a.direction == "buy"):
        raise QuoteRejected("quote side does not match assignment direction")
    res = book.submit(q.trader_id, is_buyer, q.price)
    if res is None:
        return "rested"
    other, price = res
    buyer, seller = (q.trader_id, other) if is_buyer else (other, q.trader_id)
    return Trade(q.time, price, buyer, seller,
                 assignments[buyer].limit - price, price - assignments[seller].limit)


def mid_price(book: OrderBook) -> float:
    b, a = book.best_bid, book.best_ask
    if b is None or a is None:
        raise UndefinedPrice("mid-price needs both a bid and an ask")
    if b >= a:
        raise AssertionError("crossed book at rest")
    return (b + a) / 2


def surplus_of(trade_price: int, limit: int, is_buyer: bool) -> int:
    return limit - trade_price if is_buyer else trade_price - limit


@dataclass(frozen=True)
class BoxSchedule:
    """Perfectly elastic supply and demand: every seller gets ``seller_limit``,
    every buyer ``buyer_limit``."""

    seller_limit: int = 60
    buyer_limit: int = 100

    def __post_init__(self):
        if not 1 <= self.seller_limit < self.buyer_limit:
            raise ValueError("box schedule needs 1 <= seller_limit < buyer_limit")

    def limit_for(self, trader) -> int:
        return self.buyer_limit if trader.is_buyer else self.seller_limit


class TradeTape:
    """Streams trades to CSV. Usable as a context manager."""

    HEADER = ("time_s", "price", "buyer_id", "seller_id", "buyer_surplus", "seller_surplus")

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(self.HEADER)
        self.count = 0

    def append(self, tr: Trade) -> None:
        self._w.writerow((f"{tr.time:.6f}", tr.price, tr.buyer_id, tr.seller_id,
                          tr.buyer_surplus, tr.seller_surplus))
        self.count += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Session:
    """A single-threaded market session driven by a fixed-rate clock.

    Each step advances the clock by ``timestep`` and asks one uniformly
    chosen trader for a quote. Traders must provide ``tid``, ``is_buyer``,
    ``limit``, ``quote(book, t)``, ``settle(surplus, price, t)`` and
    ``assign(limit)``.
    """

    def __init__(self, traders, schedule=None, *, timestep: float = 1 / 60, seed: int = 0,
                 max_price: int = 500, tape=None, sample_interval: float | None = None,
                 on_sample: Callable[["Session", float], None] | None = None):
        self.traders = list(traders)
        self.schedule = schedule if schedule is not None else BoxSchedule()
        self.timestep = timestep
        self.book = OrderBook(max_price)
        self.rng = random.Random(seed)
        self.tape = tape
        self.steps = 0
        self.trade_count = 0
        self.buyer_profit = 0
        self.seller_profit = 0
        self.sample_interval = sample_interval
        self.on_sample = on_sample
        if sample_interval:
            self._every = max(1, int(round(sample_interval / timestep)))
            self._next_sample = 0
        else:
            self._every = 0
            self._next_sample = -1
        self._last = []
        for tr in self.traders:
            tr.assign(self.schedule.limit_for(tr))

    @property
    def time(self) -> float:
        return self.steps * self.timestep

    @property
    def total_profit(self) -> int:
        return self.buyer_profit + self.seller_profit

    def steps_for(self, duration: float) -> int:
        return int(round(duration / self.timestep))

    def step(self) -> list:
        """Advance one tick and return the trades it produced."""
        self._last = []
        self.run_steps(1, _collect=True)
        return self._last

    def run_for(self, duration: float) -> None:
        self.run_steps(self.steps_for(duration))

    def run_steps(self, n: int, _collect: bool = False) -> None:
        traders = self.traders
        n_tr = len(traders)
        rnd = self.rng.random
        submit = self.book.submit
        dt = self.timestep
        step = self.steps
        end = step + n
        if step == self._next_sample:
            self._sample()
        nxt = self._next_sample
        book = self.book
        while step < end:
            step += 1
            t = step * dt
            if n_tr:
                tr = traders[int(rnd() * n_tr)]
                price = tr.quote(book, t)
                if price is not None:
                    res = submit(tr, tr.is_buyer, price)
                    if res is not None:
                        self._settle(tr, res[0], res[1], t, _collect)
            if step == nxt:
                self.steps = step
                self._sample()
                nxt = self._next_sample
        self.steps = step

    def _sample(self) -> None:
        """Snapshot after ``steps`` steps; samples fall on exact multiples of the interval."""
        if self.on_sample is not None:
            self.on_sample(self, self.steps * self.timestep)
        self._next_sample += self._every

    def _settle(self, taker, maker, price: int, t: float, collect: bool) -> None:
        buyer, seller = (taker, maker) if taker.is_buyer else (maker, taker)
        bs = buyer.limit - price
        ss = price - seller.limit
        buyer.settle(bs, price, t)
        seller.settle(ss, price, t)
        self.buyer_profit += bs
        self.seller_profit += ss
        self.trade_count += 1
        if self.tape is not None or collect:
            tr = Trade(t, price, buyer.tid, seller.tid, bs, ss)
            if self.tape is not None:
                self.tape.append(tr)
            if collect:
                self._last.append(tr)
        sched = self.schedule
        buyer.assign(sched.limit_for(buyer))
        seller.assign(sched.limit_for(seller))


def step_session(session: Session) -> list:
    return session.step()
