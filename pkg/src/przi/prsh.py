"""PRSH: a PRZI trader that tunes its own ``s`` by stochastic hill-climbing.

Each trader keeps ``k`` candidate strategies and trades with one at a time
for ``eval_period`` seconds, then moves to the next. After the last one it
keeps the best (profit per second) and refills the set with Gaussian mutants
of it. Strategy switches are checked lazily when the trader is next asked
to quote, so each evaluation window lasts at least ``eval_period``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .traders import ConfigError, PRZITrader

GENESIS_MODES = ("uniform", "constant", "grid")


def _clamp(s: float) -> float:
    return -1.0 if s < -1.0 else (1.0 if s > 1.0 else s)


def genesis(mode: str, k: int, rng, value: float = 0.0) -> list[float]:
    if k < 2:
        raise ConfigError("a strategy set needs k >= 2")
    if mode == "uniform":
        return [rng.uniform(-1.0, 1.0) for _ in range(k)]
    if mode == "constant":
        if not -1.0 <= value <= 1.0:
            raise ConfigError(f"initial strategy {value} outside [-1, 1]")
        return [float(value)] * k
    if mode == "grid":
        # round away float dust so grid points hit -1, -0.9, ... exactly
        return [round(2 * i / (k - 1) - 1, 12) for i in range(k)]
    raise ConfigError(f"unknown genesis mode {mode!r}")


def mutate(elite: float, rng, sigma: float = 0.01) -> float:
    return _clamp(elite + rng.gauss(0.0, sigma))


@dataclass
class PrshState:
    strategies: list
    eval_period: float = 7200.0
    tie_threshold: float = 1e-3
    sigma: float = 0.01
    active_index: int = 0
    profit: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    started: float = 0.0
    generation: int = 0
    history: list = field(default_factory=list, repr=False)
    keep_history: bool = False

    def __post_init__(self):
        k = len(self.strategies)
        if k < 2:
            raise ConfigError("a strategy set needs k >= 2")
        if any(not -1.0 <= s <= 1.0 for s in self.strategies):
            raise ConfigError("strategies must lie in [-1, 1]")
        if self.eval_period <= 0:
            raise ConfigError("eval_period must be positive")
        self.profit = [0] * k
        self.elapsed = [0.0] * k

    @property
    def k(self) -> int:
        return len(self.strategies)

    @property
    def active(self) -> float:
        return self.strategies[self.active_index]

    @property
    def elite(self) -> float:
        return self.strategies[0]

    def pps(self) -> list[float]:
        return [p / e if e > 0 else 0.0 for p, e in zip(self.profit, self.elapsed)]

    def credit(self, surplus) -> None:
        self.profit[self.active_index] += surplus

    def advance(self, t: float, rng) -> bool:
        """Close the active window if it has run its course; True if ``active`` changed."""
        if t - self.started < self.eval_period:
            return False
        self.elapsed[self.active_index] = t - self.started
        self.started = t
        self.active_index += 1
        if self.active_index == self.k:
            climb_step(self, rng, t)
        return True


def rank_and_select(state: PrshState, rng) -> float:
    scores = state.pps()
    order = sorted(range(state.k), key=scores.__getitem__, reverse=True)
    best, second = order[0], order[1]
    if abs(scores[best] - scores[second]) < state.tie_threshold:
        best = best if rng.random() < 0.5 else second
    return state.strategies[best]


def climb_step(state: PrshState, rng, t: float | None = None) -> list[float]:
    """Keep the elite, replace the rest with its mutants, and reset the accumulators."""
    elite = rank_and_select(state, rng)
    if state.keep_history:
        state.history.append((t, list(state.strategies), state.pps(), elite))
    state.strategies = [elite] + [mutate(elite, rng, state.sigma) for _ in range(state.k - 1)]
    state.profit = [0] * state.k
    state.elapsed = [0.0] * state.k
    state.active_index = 0
    state.generation += 1
    return state.strategies


class PRSHTrader(PRZITrader):
    kind = "PRSH"

    def __init__(self, tid, is_buyer, rng=None, market=None, *, state: PrshState,
                 c_i: float | None = None):
        super().__init__(tid, is_buyer, rng, market, s=state.active, c_i=c_i)
        self.use_state(state)

    def use_state(self, state: PrshState) -> None:
        self.state = state
        self.set_s(state.active)
        self._switch_at = state.started + state.eval_period

    def quote(self, book, t):
        if t >= self._switch_at:
            st = self.state
            st.advance(t, self.rng)
            self._switch_at = st.started + st.eval_period
            self.set_s(st.active)
        return self.distribution(book).sample(self.rng.random())

    def settle(self, surplus, price, t):
        self.profit += surplus
        self.trade_count += 1
        self.state.credit(surplus)


def make_prsh(tid, is_buyer, rng, market=None, *, k: int = 4, mode: str = "constant",
              init: float = 0.0, eval_period: float = 7200.0, sigma: float = 0.01,
              tie_threshold: float = 1e-3, keep_history: bool = False) -> PRSHTrader:
    state = PrshState(genesis(mode, k, rng, init), eval_period, tie_threshold, sigma,
                      keep_history=keep_history)
    return PRSHTrader(tid, is_buyer, rng, market, state=state)


class StrategyLog:
    """CSV of ``(time_s, trader_id, active_s, elite_s, pps)`` snapshots.

    ``pps`` is the running profit rate of the active strategy in its current
    window (blank before any time has elapsed).
    """

    HEADER = ("time_s", "trader_id", "active_s", "elite_s", "pps")

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(self.HEADER)

    def record(self, t: float, traders) -> None:
        for tr in traders:
            st = getattr(tr, "state", None)
            if st is None:
                continue
            run = t - st.started
            pps = f"{st.profit[st.active_index] / run:.6f}" if run > 0 else ""
            self._w.writerow((f"{t:.3f}", tr.tid, f"{st.active:.6f}", f"{st.elite:.6f}", pps))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_strategy_log(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["time_s"] = float(r["time_s"])
        r["active_s"] = float(r["active_s"])
        r["elite_s"] = float(r["elite_s"])
        r["pps"] = float(r["pps"]) if r["pps"] else math.nan
    return rows
