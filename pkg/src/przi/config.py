"""Experiment configuration: flat ``key = value`` INI sections parsed into dataclasses."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .traders import ConfigError, STRATEGY_KINDS

WORKERS_ENV = "PRZI_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as e:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from e
    return max(1, n)


@dataclass(frozen=True)
class Group:
    """``count`` traders of one kind; ``s`` only applies to fixed PRZI traders."""

    kind: str
    count: int
    s: float | None = None


def parse_population(text: str) -> list[Group]:
    """Parse ``"PRSH:1, GVWY:29"`` or ``"PRZI@0.5:10"``; a bare kind means one trader."""
    groups = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, count = part.partition(":")
        kind, _, sval = name.strip().partition("@")
        kind = kind.strip().upper()
        if kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy {kind!r}")
        n = int(count) if count else 1
        if n < 0:
            raise ConfigError(f"negative count in {part!r}")
        s = float(sval) if sval else None
        if s is not None and not -1.0 <= s <= 1.0:
            raise ConfigError(f"strategy value {s} outside [-1, 1]")
        if n:
            groups.append(Group(kind, n, s))
    return groups


@dataclass
class MarketConfig:
    n_buyers: int = 30
    n_sellers: int = 30
    seller_limit: int = 60
    buyer_limit: int = 100
    min_price: int = 1
    max_price: int = 500
    steps_per_second: int = 60
    buyer_pmin: str = "zic-style"
    tick_size: float = 1.0
    buyers: str = "PRSH:30"
    sellers: str = "PRSH:30"

    @property
    def timestep(self) -> float:
        return 1.0 / self.steps_per_second

    def validate(self) -> None:
        if self.n_buyers < 1 or self.n_sellers < 1:
            raise ConfigError("need at least one buyer and one seller")
        if not 1 <= self.seller_limit < self.buyer_limit:
            raise ConfigError("box schedule needs 1 <= seller_limit < buyer_limit")
        if not self.min_price <= self.seller_limit or self.buyer_limit > self.max_price:
            raise ConfigError("limit prices must lie within [min_price, max_price]")
        if self.steps_per_second < 1:
            raise ConfigError("steps_per_second must be positive")
        if self.buyer_pmin not in ("zic-style", "heuristic"):
            raise ConfigError(f"unknown buyer_pmin {self.buyer_pmin!r}")
        for side, text, n in (("buyers", self.buyers, self.n_buyers),
                              ("sellers", self.sellers, self.n_sellers)):
            total = sum(g.count for g in parse_population(text))
            if total != n:
                raise ConfigError(f"{side} population {text!r} has {total} traders, expected {n}")


@dataclass
class PrshConfig:
    k: int = 4
    eval_period_s: float = 7200.0
    sigma: float = 0.01
    tie_threshold: float = 1e-3
    genesis: str = "constant"
    init: float = 0.0

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError("PRSH needs k >= 2")
        if self.eval_period_s <= 0 or self.sigma < 0 or self.tie_threshold < 0:
            raise ConfigError("PRSH periods and thresholds must be non-negative")
        if self.genesis not in ("uniform", "constant", "grid"):
            raise ConfigError(f"unknown genesis {self.genesis!r}")


@dataclass
class SessionConfig:
    duration_s: float = 86400.0
    seed: int = 1
    repetitions: int = 1
    sample_interval_s: float = 3600.0
    smoothing_window_h: float = 12.0
    write_tape: bool = True
    p0: float | None = None
    hist_bin_width: float = 0.1
    mode_min_share: float = 0.1
    profit_window_h: float = 24.0

    def validate(self) -> None:
        if self.duration_s < 0 or self.repetitions < 1 or self.sample_interval_s <= 0:
            raise ConfigError("bad session duration, repetitions or sampling interval")
        if self.p0 is not None and self.p0 <= 0:
            raise ConfigError("p0 must be positive")


@dataclass
class LandscapeConfig:
    delta_s: float = 0.05
    eval_period_s: float = 600.0
    side: str = "seller"

    @property
    def k(self) -> int:
        k = int(round(2.0 / self.delta_s)) + 1
        if k < 2:
            raise ConfigError("landscape grid needs at least two points")
        return k

    def validate(self) -> None:
        if self.delta_s <= 0:
            raise ConfigError("delta_s must be positive")
        if abs((self.k - 1) * self.delta_s - 2.0) > 1e-9:
            raise ConfigError("delta_s must divide 2 evenly")
        if self.side not in ("seller", "buyer"):
            raise ConfigError("landscape side is seller or buyer")


@dataclass
class RqaConfig:
    trajectory: str = ""
    per_component: float = 0.05
    eps: float | None = None
    v_min: int = 2
    downsample: int = 1

    def validate(self) -> None:
        if self.v_min < 1 or self.downsample < 1:
            raise ConfigError("v_min and downsample must be >= 1")


@dataclass
class ImpactConfig:
    events: str = ""
    limit: int = 150
    side: str = "buyer"
    gamma: float = 4.0
    quote_interval_s: float = 0.01
    duration_s: float = 20.0
    seed: int = 1
    bid: int = 100
    ask: int = 120
    inject_at_s: float = 10.0
    extra_bid_qty: int = 5


@dataclass
class ExperimentConfig:
    market: MarketConfig = field(default_factory=MarketConfig)
    prsh: PrshConfig = field(default_factory=PrshConfig)
    session: SessionConfig = field(default_factory=SessionConfig)
    landscape: LandscapeConfig = field(default_factory=LandscapeConfig)
    rqa: RqaConfig = field(default_factory=RqaConfig)
    impact: ImpactConfig = field(default_factory=ImpactConfig)
    source: Path | None = None

    def validate(self) -> "ExperimentConfig":
        for part in (self.market, self.prsh, self.session, self.landscape, self.rqa):
            part.validate()
        return self


_SECTIONS = {"market": MarketConfig, "prsh": PrshConfig, "session": SessionConfig,
             "landscape": LandscapeConfig, "rqa": RqaConfig, "impact": ImpactConfig}


def _coerce(raw: str, typ):
    t = typ if isinstance(typ, str) else getattr(typ, "__name__", str(typ))
    raw = raw.strip()
    if "None" in t and raw.lower() in ("", "none"):
        return None
    if t.startswith("bool"):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if t.startswith("int"):
        return int(raw)
    if t.startswith("float"):
        return float(raw)
    return raw


def _section(cls, items: dict, name: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, raw in items.items():
        if key not in known:
            raise ConfigError(f"unknown key [{name}] {key}")
        try:
            kwargs[key] = _coerce(raw, known[key].type)
        except ValueError as e:
            raise ConfigError(f"[{name}] {key}: {e}") from e
    return cls(**kwargs)


def parse_config(text: str, source: Path | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from e
    parts = {}
    for name in cp.sections():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        parts[name] = _section(_SECTIONS[name], dict(cp[name]), name)
    cfg = ExperimentConfig(**parts, source=source)
    if source is not None:
        base = source.parent
        for attr, owner in (("trajectory", cfg.rqa), ("events", cfg.impact)):
            val = getattr(owner, attr)
            if val and not Path(val).is_absolute():
                setattr(owner, attr, str(base / val))
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), source=path)
