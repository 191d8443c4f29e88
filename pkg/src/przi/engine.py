"""PRZI quote-price distributions.

A PRZI trader draws its quote from a discrete PMF over ``[p_min, p_max]``
whose shape is warped by a strategy value ``s`` in ``[-1, +1]``:
``s = +1`` puts all mass on the limit price (GVWY), ``s = 0`` is uniform
(ZIC) and ``s = -1`` puts all mass on a one-tick improvement of the best
price on the book (SHVR). Distributions are built once per
``(s, p_min, p_max, side)`` key and shared through :class:`LutCache`.

Prices here are integer tick counts, so the tick size is always 1.
"""

from __future__ import annotations

import csv
import math
import threading
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

THETA0 = 100.0
EPS_THETA = 1e-6
TAN_GAIN = 4.0
S_RESOLUTION = 1e-4
_S_STEPS = int(round(1 / S_RESOLUTION))

# |m*tan| below this is float noise around the tangent's zeros at s = +-0.5
_TAN_NOISE = 1e-12


def rectifier_theta(x: float, theta0: float = THETA0, eps: float = EPS_THETA) -> float:
    """Clamp ``x`` to ``[-theta0, theta0]`` and push near-zero values out to ``+-eps``.

    Exact zero maps to ``+eps``.
    """
    if x >= eps or x <= -eps:
        return max(-theta0, min(theta0, x))
    if x < 0:
        return -eps
    return eps


def c_of_s(s: float, m: float = TAN_GAIN, theta0: float = THETA0, eps: float = EPS_THETA) -> float:
    """Curvature of the PMF envelope for strategy ``s`` (``s != 0``)."""
    x = m * math.tan(math.pi * (s + 0.5))
    if abs(x) < _TAN_NOISE:
        x = 0.0
    return rectifier_theta(x, theta0, eps)


def pmf_envelope(x, s: float, r: int = 1):
    """Unnormalised envelope value(s) at normalised price ``x`` in ``[0, 1]``.

    Works on scalars and numpy arrays. ``r`` is only used by the ``s == 0``
    branch, which is the constant ``1/r``.
    """
    if s == 0:
        if np.ndim(x):
            return np.full(np.shape(x), 1.0 / r)
        return 1.0 / r
    c = c_of_s(s)
    rising = np.expm1(c * np.asarray(x, dtype=float)) / math.expm1(c)
    out = rising if s > 0 else 1.0 - rising
    # 1 - (e^cx - 1)/(e^c - 1) can dip a hair below zero at x = 1
    out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class PrziDistribution:
    """An immutable PMF/CDF look-up table over ``[p_min, p_max]``."""

    s: float
    p_min: int
    p_max: int
    is_buyer: bool
    pmf: np.ndarray
    cdf: list = field(repr=False)

    @property
    def prices(self) -> np.ndarray:
        return np.arange(self.p_min, self.p_max + 1)

    @property
    def r(self) -> int:
        return self.p_max - self.p_min

    def sample(self, u: float) -> int:
        """Smallest price whose CDF value is >= ``u``, skipping zero-mass prefixes."""
        if u <= 0.0:
            return self.p_min + bisect_right(self.cdf, 0.0)
        return self.p_min + bisect_left(self.cdf, u)

    def mean(self) -> float:
        return float(np.dot(self.prices, self.pmf))


def _cdf(pmf: np.ndarray) -> list:
    # cumsum can overshoot 1 by an ulp before the last entry
    cdf = np.minimum(np.cumsum(pmf), 1.0).tolist()
    cdf[-1] = 1.0
    return cdf


def _single_point(s: float, price: int, p_min: int, p_max: int, is_buyer: bool) -> PrziDistribution:
    pmf = np.zeros(p_max - p_min + 1)
    pmf[price - p_min] = 1.0
    cdf = _cdf(pmf)
    return PrziDistribution(s, p_min, p_max, is_buyer, pmf, cdf)


def build_distribution(s: float, p_min: int, p_max: int, is_buyer: bool) -> PrziDistribution:
    """Build the normalised PMF and CDF for strategy ``s`` over ``[p_min, p_max]``.

    At ``s = +-1`` the PMF is the single-point asymptotic form at the
    envelope's peak: the high end of the range for urgent buyers and
    relaxed sellers, the low end otherwise.
    """
    if not -1.0 <= s <= 1.0:
        raise ValueError(f"strategy {s} outside [-1, 1]")
    if p_max < p_min:
        raise ValueError(f"empty price range [{p_min}, {p_max}]")
    r = p_max - p_min
    peak_high = (s > 0) == is_buyer
    if r == 0 or abs(s) == 1.0:
        return _single_point(s, p_max if peak_high else p_min, p_min, p_max, is_buyer)

    x = np.arange(r + 1) / r
    if not is_buyer:
        x = 1.0 - x
    env = pmf_envelope(x, s, r)
    pmf = env / env.sum()
    cdf = _cdf(pmf)
    return PrziDistribution(s, p_min, p_max, is_buyer, pmf, cdf)


def sample_price(dist: PrziDistribution, u: float) -> int:
    return dist.sample(u)


def quantize_s(s: float) -> int:
    """Integer cache key for ``s`` at :data:`S_RESOLUTION`."""
    return int(round(s * _S_STEPS))


class LutCache:
    """Shared ``(s, p_min, p_max, side) -> PrziDistribution`` store.

    Tables are immutable, so readers need no locking; insertion takes a lock
    and a racing duplicate build simply overwrites an identical table.
    """

    def __init__(self, max_entries: int = 200_000):
        self.max_entries = max_entries
        self._tables: dict = {}
        self._lock = threading.Lock()
        self.builds = 0

    def __len__(self) -> int:
        return len(self._tables)

    def get(self, s: float, p_min: int, p_max: int, is_buyer: bool) -> PrziDistribution:
        key = (quantize_s(s), p_min, p_max, is_buyer)
        dist = self._tables.get(key)
        if dist is None:
            dist = self._build(key)
        return dist

    def get_key(self, key: tuple) -> PrziDistribution:
        dist = self._tables.get(key)
        if dist is None:
            dist = self._build(key)
        return dist

    def _build(self, key: tuple) -> PrziDistribution:
        sq, p_min, p_max, is_buyer = key
        dist = build_distribution(sq / _S_STEPS, p_min, p_max, is_buyer)
        with self._lock:
            if len(self._tables) >= self.max_entries:
                self._tables.clear()
            self._tables[key] = dist
            self.builds += 1
        return dist

    def clear(self) -> None:
        with self._lock:
            self._tables.clear()
            self.builds = 0

    def dump_csv(self, path: str | Path) -> None:
        """Write ``(s, side, price, pmf, cdf)`` rows for every cached table."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "side", "price", "pmf", "cdf"])
            for key in sorted(self._tables):
                dist = self._tables[key]
                side = "buyer" if dist.is_buyer else "seller"
                for p, q, c in zip(dist.prices, dist.pmf, dist.cdf):
                    w.writerow([f"{dist.s:.4f}", side, int(p), repr(float(q)), repr(float(c))])


DEFAULT_CACHE = LutCache()


def _round_price(x: float) -> int:
    return int(math.floor(x + 0.5))


def draw_ci(rng) -> float:
    """Per-trader bound multiplier ``U(1, 10) ** 0.5``."""
    return math.sqrt(rng.uniform(1.0, 10.0))


class SellerMaxEstimator:
    """A seller's private guess at the highest price the market will bear."""

    __slots__ = ("c_i", "max_price", "limit_max_seen", "estimate")

    def __init__(self, c_i: float, max_price: int):
        if c_i < 1.0:
            raise ValueError("c_i must be at least 1")
        self.c_i = c_i
        self.max_price = max_price
        self.limit_max_seen = None
        self.estimate = None

    def on_assignment(self, limit: int) -> None:
        if self.limit_max_seen is None or limit > self.limit_max_seen:
            self.limit_max_seen = limit
            guess = min(_round_price(self.c_i * limit), self.max_price)
            if self.estimate is None or guess > self.estimate:
                self.estimate = guess

    def observe_rival(self, ask_price) -> None:
        """Raise the estimate when another seller has asked above it."""
        if ask_price is not None and ask_price > self.estimate:
            self.estimate = min(ask_price, self.max_price)

    def bound(self, s: float, limit: int, best_ask, empty_seed: int) -> int:
        """Upper PMF bound; for ``s < 0`` blended toward the SHVR ask."""
        if s >= 0:
            return max(self.estimate, limit)
        target = max(best_ask - 1, limit) if best_ask is not None else empty_seed
        return max(_round_price((1.0 + s) * self.estimate - s * target), limit)


class BuyerMinEstimator:
    """A buyer's lower PMF bound.

    ``mode="zic-style"`` pins the unblended bound at the minimum price;
    ``mode="heuristic"`` starts at ``limit / c_i`` and follows rival bids down.
    """

    __slots__ = ("c_i", "mode", "min_price", "limit_min_seen", "estimate")

    def __init__(self, c_i: float, mode: str = "zic-style", min_price: int = 1):
        if mode not in ("zic-style", "heuristic"):
            raise ValueError(f"unknown buyer p_min mode {mode!r}")
        self.c_i = c_i
        self.mode = mode
        self.min_price = min_price
        self.limit_min_seen = None
        self.estimate = min_price

    def on_assignment(self, limit: int) -> None:
        if self.mode == "zic-style":
            return
        if self.limit_min_seen is None:
            self.limit_min_seen = limit
            self.estimate = max(_round_price(limit / self.c_i), self.min_price)
        elif limit < self.limit_min_seen:
            self.limit_min_seen = limit
            self.estimate = min(self.estimate, max(_round_price(limit / self.c_i), self.min_price))

    def observe_rival(self, bid_price) -> None:
        if self.mode == "heuristic" and bid_price is not None and bid_price < self.estimate:
            self.estimate = max(bid_price, self.min_price)

    def bound(self, s: float, limit: int, best_bid, empty_seed: int) -> int:
        base = min(self.estimate, limit)
        if s >= 0:
            return base
        target = min(best_bid + 1, limit) if best_bid is not None else empty_seed
        return min(_round_price((1.0 + s) * base - s * target), limit)


def update_seller_pmax(estimator: SellerMaxEstimator, event: str, price: int) -> int:
    """Feed an ``"assign"`` (new limit price) or ``"rival_ask"`` event; return the estimate."""
    if event == "assign":
        estimator.on_assignment(price)
    elif event == "rival_ask":
        estimator.observe_rival(price)
    else:
        raise ValueError(f"unknown event {event!r}")
    return estimator.estimate
