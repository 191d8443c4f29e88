"""Order-book imbalance and opinion signals mapped onto PRZI strategy values."""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass

from .exchange import OrderBook, UndefinedPrice
from .traders import MarketParams, PRZITrader

DEFAULT_GAMMA = 4.0


@dataclass(frozen=True)
class TopOfBookView:
    bid: int
    bid_qty: int
    ask: int
    ask_qty: int

    def __post_init__(self):
        if self.bid_qty < 1 or self.ask_qty < 1:
            raise ValueError("top-of-book quantities must be at least 1")

    @classmethod
    def from_book(cls, book: OrderBook) -> "TopOfBookView":
        b, bq, a, aq = book.top()
        if b is None or a is None:
            raise UndefinedPrice("top of book needs both sides")
        return cls(b, bq, a, aq)

    @property
    def mid(self) -> float:
        return (self.bid + self.ask) / 2


def micro_price(view: TopOfBookView) -> float:
    """Quantity-weighted price: heavy bid depth pulls it toward the ask."""
    return (view.ask * view.bid_qty + view.bid * view.ask_qty) / (view.bid_qty + view.ask_qty)


def imbalance_delta(view: TopOfBookView) -> float:
    return micro_price(view) - view.mid


def saturate(x: float) -> float:
    return x / (1.0 + abs(x))


def impact_to_strategy(delta_m: float, is_buyer: bool, gamma: float = DEFAULT_GAMMA) -> float:
    """Excess demand (``delta_m > 0``) makes buyers more urgent and sellers more relaxed."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    s = saturate(gamma * delta_m)
    return s if is_buyer else -s


def opinion_to_strategy(omega: float, is_buyer: bool, mode: str = "identity",
                        gain: float = 3.0) -> float:
    """Map an opinion in ``[-1, 1]`` to ``s``: sellers follow it, buyers invert it.

    ``mode="sigmoid"`` uses ``tanh(gain*w)/tanh(gain)``, which keeps the
    endpoints but pushes mild opinions further out.
    """
    if not -1.0 <= omega <= 1.0:
        raise ValueError(f"opinion {omega} outside [-1, 1]")
    if mode == "identity":
        s = omega
    elif mode == "sigmoid":
        s = math.tanh(gain * omega) / math.tanh(gain)
    else:
        raise ValueError(f"unknown opinion mode {mode!r}")
    return s if not is_buyer else -s


class IPRZITrader(PRZITrader):
    """PRZI trader whose ``s`` tracks the book imbalance at every quote.

    With either side of the book empty the imbalance is undefined and the
    trader falls back to ``s = 0``.
    """

    kind = "IPRZI"

    def __init__(self, tid, is_buyer, rng=None, market=None, gamma: float = DEFAULT_GAMMA,
                 c_i: float | None = None):
        super().__init__(tid, is_buyer, rng, market, s=0.0, c_i=c_i)
        self.gamma = gamma
        self.last_delta = None

    def strategy_for(self, book) -> float:
        try:
            dm = imbalance_delta(TopOfBookView.from_book(book))
        except UndefinedPrice:
            self.last_delta = None
            return 0.0
        self.last_delta = dm
        return impact_to_strategy(dm, self.is_buyer, self.gamma)

    def quote(self, book, t):
        self.set_s(self.strategy_for(book))
        return self.distribution(book).sample(self.rng.random())


# --- scripted impact scenario ---------------------------------------------

@dataclass(frozen=True)
class BookEvent:
    """``action side price qty``, e.g. ``add bid 100 5``."""

    time: float
    action: str
    side: str
    price: int
    qty: int

    def __post_init__(self):
        if self.action not in ("add", "remove") or self.side not in ("bid", "ask"):
            raise ValueError(f"bad event {self.action} {self.side}")
        if self.qty < 1:
            raise ValueError("event quantity must be at least 1")

    @property
    def text(self) -> str:
        return f"{self.action} {self.side} {self.price} {self.qty}"

    @classmethod
    def parse(cls, time_s, text: str) -> "BookEvent":
        parts = text.split()
        if len(parts) != 4:
            raise ValueError(f"cannot parse event {text!r}")
        return cls(float(time_s), parts[0], parts[1], int(parts[2]), int(parts[3]))


def read_events(path) -> list[BookEvent]:
    with open(path, newline="") as fh:
        rows = [BookEvent.parse(r["time_s"], r["event"]) for r in csv.DictReader(fh)]
    return sorted(rows, key=lambda e: e.time)


def write_events(path, events) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "event"])
        for e in events:
            w.writerow([e.time, e.text])


class SyntheticDepth:
    """Resting liquidity owned by nobody in particular."""

    def __init__(self, book: OrderBook):
        self.book = book
        self._n = 0
        self._owners: dict[tuple, list] = {}

    def apply(self, ev: BookEvent) -> None:
        key = (ev.side, ev.price)
        held = self._owners.setdefault(key, [])
        if ev.action == "add":
            for _ in range(ev.qty):
                self._n += 1
                owner = ("synthetic", self._n)
                if self.book.submit(owner, ev.side == "bid", ev.price) is not None:
                    raise ValueError(f"synthetic quote {ev.text} would cross the book")
                held.append(owner)
        else:
            if ev.qty > len(held):
                raise ValueError(f"cannot remove {ev.qty} synthetic units at {ev.price}")
            for _ in range(ev.qty):
                self.book.cancel(held.pop())


@dataclass
class ImpactScenario:
    limit: int = 150
    is_buyer: bool = True
    gamma: float = DEFAULT_GAMMA
    quote_interval: float = 0.01
    duration: float = 20.0
    max_price: int = 500
    seed: int = 0


def run_impact_scenario(cfg: ImpactScenario, events, out_csv=None) -> list[tuple]:
    """Probe an IPRZI trader against a scripted book.

    Events at ``t <= 0`` build the initial book. The trader's quotes are
    recorded but never submitted, so the book only changes via the script.
    Returns ``(time_s, delta_m, s, price)`` rows.
    """
    book = OrderBook(cfg.max_price)
    depth = SyntheticDepth(book)
    trader = IPRZITrader("iprzi", cfg.is_buyer, random.Random(cfg.seed),
                         MarketParams(max_price=cfg.max_price), gamma=cfg.gamma)
    trader.assign(cfg.limit)
    pending = sorted(events, key=lambda e: e.time)
    i = 0
    rows = []
    n = int(round(cfg.duration / cfg.quote_interval))
    for step in range(n):
        t = step * cfg.quote_interval
        while i < len(pending) and pending[i].time <= t + 1e-12:
            depth.apply(pending[i])
            i += 1
        price = trader.quote(book, t)
        rows.append((t, trader.last_delta, trader.s, price))
    if out_csv is not None:
        with open(out_csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "delta_m", "s", "price"])
            for t, dm, s, p in rows:
                w.writerow([f"{t:.3f}", "" if dm is None else f"{dm:.6f}", f"{s:.6f}", p])
    return rows


def default_injection_events(bid: int = 100, ask: int = 120, inject_at: float = 10.0,
                             extra_bid_qty: int = 5) -> list[BookEvent]:
    """Balanced one-lot book, then a block of extra demand at the best bid."""
    return [BookEvent(0.0, "add", "bid", bid, 1), BookEvent(0.0, "add", "ask", ask, 1),
            BookEvent(inject_at, "add", "bid", bid, extra_bid_qty)]
