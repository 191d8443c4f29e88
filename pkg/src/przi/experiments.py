"""Experiment runners and the metrics they report."""

from __future__ import annotations

import csv
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .config import ExperimentConfig, default_workers, parse_population
from .engine import LutCache
from .exchange import BoxSchedule, Session, TradeTape
from .prsh import PRSHTrader, PrshState, StrategyLog, genesis
from .rqa import write_trajectory
from .sensitivity import IPRZITrader
from .traders import FIXED_KINDS, ConfigError, MarketParams, PRZITrader


# --- seeding ------------------------------------------------------------

def session_seeds(master: int, index: int, n_traders: int) -> tuple[int, list[int]]:
    """Seed for the session clock plus one per trader, all derived from ``(master, index)``."""
    kids = np.random.SeedSequence([master, index]).spawn(n_traders + 1)
    vals = [int(k.generate_state(2, dtype=np.uint64)[0]) for k in kids]
    return vals[0], vals[1:]


# --- population ---------------------------------------------------------

def build_traders(cfg: ExperimentConfig, trader_seeds, cache: LutCache | None = None,
                  keep_history: bool = False):
    m = cfg.market
    market = MarketParams(max_price=m.max_price, min_price=m.min_price, buyer_pmin=m.buyer_pmin,
                          **({"cache": cache} if cache is not None else {}))
    p = cfg.prsh
    traders = []
    seeds = iter(trader_seeds)
    for is_buyer, text, prefix in ((False, m.sellers, "S"), (True, m.buyers, "B")):
        i = 0
        for g in parse_population(text):
            for _ in range(g.count):
                tid = f"{prefix}{i:02d}"
                rng = random.Random(next(seeds))
                if g.kind == "PRSH":
                    st = PrshState(genesis(p.genesis, p.k, rng, p.init), p.eval_period_s,
                                   p.tie_threshold, p.sigma, keep_history=keep_history)
                    tr = PRSHTrader(tid, is_buyer, rng, market, state=st)
                elif g.kind == "IPRZI":
                    tr = IPRZITrader(tid, is_buyer, rng, market, gamma=cfg.impact.gamma)
                elif g.kind == "PRZI":
                    tr = PRZITrader(tid, is_buyer, rng, market, s=g.s or 0.0)
                else:
                    tr = FIXED_KINDS[g.kind](tid, is_buyer, rng, market)
                traders.append(tr)
                i += 1
    return traders


# --- metrics ------------------------------------------------------------

def moving_average_s(series, window: int) -> np.ndarray:
    """Trailing mean over the last ``min(window, samples so far)`` samples (axis 0)."""
    x = np.asarray(series, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(x) == 0:
        return x.copy()
    c = np.cumsum(x, axis=0)
    out = np.empty_like(c)
    n = np.arange(1, len(x) + 1)
    head = min(window, len(x))
    shape = (-1,) + (1,) * (x.ndim - 1)
    out[:head] = c[:head] / n[:head].reshape(shape)
    if len(x) > window:
        out[window:] = (c[window:] - c[:-window]) / window
    return out


def smith_alpha(prices, p0: float) -> float | None:
    """``100 * RMS(price - p0) / p0``; None for an empty window."""
    if p0 <= 0:
        raise ValueError("p0 must be positive")
    x = np.asarray(prices, dtype=float)
    if x.size == 0:
        return None
    return 100.0 * math.sqrt(float(np.mean((x - p0) ** 2))) / p0


def histogram(values, bin_width: float = 0.1, lo: float = -1.0, hi: float = 1.0):
    nbins = int(round((hi - lo) / bin_width))
    counts, edges = np.histogram(np.clip(values, lo, hi), bins=nbins, range=(lo, hi))
    return counts, edges


def modality(counts, min_share: float = 0.1) -> int:
    """Number of runs of adjacent bins each holding at least ``min_share`` of the total."""
    counts = np.asarray(counts)
    total = counts.sum()
    if total == 0:
        return 0
    big = counts >= min_share * total
    return int(np.sum(big[1:] & ~big[:-1]) + big[0])


@dataclass
class Regression:
    rows: list
    slope: float | None
    intercept: float | None
    r_squared: float | None

    @property
    def degenerate(self) -> bool:
        return self.slope is None


def relaxed_fraction_vs_profit(runs) -> Regression:
    """Least-squares fit of mean profit on the fraction of relaxed (``s < 0``) traders.

    ``runs`` holds ``(relaxed_fraction, mean_profit, profit_std)`` tuples.
    """
    rows = [tuple(r) for r in runs]
    if len(rows) < 2:
        raise ValueError("need at least two runs for a regression")
    x = np.array([r[0] for r in rows], dtype=float)
    y = np.array([r[1] for r in rows], dtype=float)
    if np.ptp(x) == 0:
        return Regression(rows, None, None, None)
    fit = stats.linregress(x, y)
    return Regression(rows, float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2))


# --- sessions -----------------------------------------------------------

@dataclass
class MetricsSeries:
    tids: list
    sides: list
    adaptive: list
    times_h: list = field(default_factory=list)
    S: list = field(default_factory=list)
    pi_b: list = field(default_factory=list)
    pi_s: list = field(default_factory=list)
    trades: list = field(default_factory=list)
    s_hat: np.ndarray | None = None

    @property
    def pi_t(self) -> list:
        return [b + s for b, s in zip(self.pi_b, self.pi_s)]

    def terminal(self) -> np.ndarray:
        if self.s_hat is None or len(self.s_hat) == 0:
            return np.array([])
        return self.s_hat[-1]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def run_one_session(cfg: ExperimentConfig, index: int, out_dir: Path | None = None,
                    sample_hook=None) -> MetricsSeries:
    m, sc = cfg.market, cfg.session
    n = m.n_buyers + m.n_sellers
    clock_seed, seeds = session_seeds(sc.seed, index, n)
    traders = build_traders(cfg, seeds, cache=LutCache())
    ms = MetricsSeries([t.tid for t in traders], ["buyer" if t.is_buyer else "seller" for t in traders],
                       [isinstance(t, PRSHTrader) for t in traders])
    log = tape = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        if sc.write_tape:
            tape = TradeTape(out_dir / "trades.csv")
        if any(ms.adaptive):
            log = StrategyLog(out_dir / "strategy_log.csv")

    def sample(sess, t):
        ms.times_h.append(t / 3600.0)
        ms.S.append([tr.strategy_value for tr in traders])
        ms.pi_b.append(sess.buyer_profit)
        ms.pi_s.append(sess.seller_profit)
        ms.trades.append(sess.trade_count)
        if log is not None:
            log.record(t, traders)
        if sample_hook is not None:
            sample_hook(sess, t)

    sess = Session(traders, BoxSchedule(m.seller_limit, m.buyer_limit), timestep=m.timestep,
                   seed=clock_seed, max_price=m.max_price, tape=tape,
                   sample_interval=sc.sample_interval_s, on_sample=sample)
    try:
        sess.run_for(sc.duration_s)
    finally:
        if tape is not None:
            tape.close()
        if log is not None:
            log.close()
    window = max(1, int(round(sc.smoothing_window_h * 3600.0 / sc.sample_interval_s)))
    ms.s_hat = moving_average_s(np.array(ms.S, dtype=float).reshape(len(ms.S), n), window)
    if out_dir is not None:
        _write_session_outputs(ms, cfg, out_dir)
    return ms


def _write_session_outputs(ms: MetricsSeries, cfg: ExperimentConfig, out: Path) -> None:
    write_trajectory(out / "strategies.csv", ms.times_h, np.asarray(ms.S).reshape(len(ms.S), -1))
    with open(out / "s_hat.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_hours"] + ms.tids)
        for t, row in zip(ms.times_h, ms.s_hat):
            w.writerow([_fmt(t)] + ["" if math.isnan(v) else _fmt(v) for v in row])
    tick = cfg.market.tick_size
    with open(out / "profit.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_hours", "pi_B", "pi_S", "pi_T", "trades"])
        for t, b, s, k in zip(ms.times_h, ms.pi_b, ms.pi_s, ms.trades):
            w.writerow([_fmt(t), _fmt(b * tick), _fmt(s * tick), _fmt((b + s) * tick), k])
    p0 = cfg.session.p0
    if p0 is not None and cfg.session.write_tape:
        write_alpha_series(out / "trades.csv", out / "alpha.csv", p0, cfg.session.sample_interval_s)


def write_alpha_series(tape_csv, out_csv, p0: float, interval_s: float) -> None:
    """Smith's alpha over consecutive windows of the trade tape."""
    buckets: dict[int, list] = {}
    with open(tape_csv, newline="") as fh:
        for r in csv.DictReader(fh):
            buckets.setdefault(int(float(r["time_s"]) // interval_s), []).append(int(r["price"]))
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window_start_hours", "trades", "alpha_pct"])
        for b in sorted(buckets):
            a = smith_alpha(buckets[b], p0)
            w.writerow([_fmt(b * interval_s / 3600.0), len(buckets[b]), "" if a is None else _fmt(a)])


@dataclass
class RunSummary:
    index: int
    tids: list
    sides: list
    adaptive: list
    terminal: list
    relaxed_fraction: float
    profit_mean: float
    profit_std: float
    trades: int
    pi_t: float


def _summarise(index: int, ms: MetricsSeries, cfg: ExperimentConfig) -> RunSummary:
    term = ms.terminal()
    adaptive = [v for v, a in zip(term, ms.adaptive) if a]
    relaxed = float(np.mean(np.array(adaptive) < 0)) if adaptive else math.nan
    # per-sample increments of pi_T over the trailing profit window
    sc = cfg.session
    pit = np.array(ms.pi_t, dtype=float)
    inc = np.diff(pit) if len(pit) > 1 else np.array([])
    w = max(1, int(round(sc.profit_window_h * 3600.0 / sc.sample_interval_s)))
    tail = inc[-w:]
    return RunSummary(index, ms.tids, ms.sides, ms.adaptive, [float(v) for v in term], relaxed,
                      float(tail.mean()) if tail.size else math.nan,
                      float(tail.std()) if tail.size else math.nan,
                      ms.trades[-1] if ms.trades else 0, float(pit[-1]) if pit.size else 0.0)


def _session_job(args) -> RunSummary:
    cfg, index, out_dir = args
    ms = run_one_session(cfg, index, out_dir)
    return _summarise(index, ms, cfg)


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def run_session(cfg: ExperimentConfig, out_dir, workers: int | None = None) -> list[RunSummary]:
    """Run every repetition and write per-run artifacts plus pooled terminal-set reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = default_workers() if workers is None else workers
    jobs = [(cfg, i, out / f"run_{i:02d}") for i in range(cfg.session.repetitions)]
    runs = _map(_session_job, jobs, workers)
    write_terminal_reports(runs, cfg, out)
    return runs


def terminal_set(runs, side: str | None = None) -> list[float]:
    vals = []
    for r in runs:
        for v, sd, a in zip(r.terminal, r.sides, r.adaptive):
            if a and (side is None or sd == side):
                vals.append(v)
    return vals


def write_terminal_reports(runs, cfg: ExperimentConfig, out: Path) -> dict:
    sc = cfg.session
    with open(out / "terminal.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "trader_id", "side", "s_hat"])
        for r in runs:
            for tid, sd, a, v in zip(r.tids, r.sides, r.adaptive, r.terminal):
                if a:
                    w.writerow([r.index, tid, sd, _fmt(v)])
    summary = {"runs": len(runs)}
    with open(out / "histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["side", "bin_lo", "bin_hi", "count"])
        for side in ("seller", "buyer"):
            vals = terminal_set(runs, side)
            if not vals:
                continue
            counts, edges = histogram(vals, sc.hist_bin_width)
            for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                w.writerow([side, f"{lo:.4f}", f"{hi:.4f}", int(c)])
            summary[f"{side}_count"] = len(vals)
            summary[f"{side}_mean_s_hat"] = _fmt(float(np.mean(vals)))
            summary[f"{side}_modes"] = modality(counts, sc.mode_min_share)
    for r in runs:
        summary[f"run_{r.index:02d}_trades"] = r.trades
        summary[f"run_{r.index:02d}_pi_T"] = _fmt(r.pi_t)
    scored = [(r.relaxed_fraction, r.profit_mean, r.profit_std) for r in runs
              if not math.isnan(r.relaxed_fraction)]
    if len(scored) >= 2:
        reg = relaxed_fraction_vs_profit(scored)
        with open(out / "regression.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["relaxed_fraction", "profit_mean", "profit_std"])
            for row in reg.rows:
                w.writerow([_fmt(v) for v in row])
        summary["regression"] = "degenerate" if reg.degenerate else \
            f"slope={_fmt(reg.slope)} intercept={_fmt(reg.intercept)} r2={_fmt(reg.r_squared)}"
    with open(out / "summary.txt", "w") as fh:
        for k, v in summary.items():
            fh.write(f"{k}={v}\n")
    return summary


# --- landscape ----------------------------------------------------------

def _landscape_job(args):
    cfg, index = args
    land = cfg.landscape
    m = cfg.market
    n = m.n_buyers + m.n_sellers
    clock_seed, seeds = session_seeds(cfg.session.seed, index, n)
    traders = build_traders(cfg, seeds, cache=LutCache(), keep_history=True)
    probes = [t for t in traders if isinstance(t, PRSHTrader) and t.is_buyer == (land.side == "buyer")]
    if len(probes) != 1:
        raise ConfigError("a landscape needs exactly one PRSH trader on the probed side")
    probe = probes[0]
    p = cfg.prsh
    st = PrshState(genesis("grid", land.k, probe.rng), land.eval_period_s, p.tie_threshold,
                   p.sigma, keep_history=True)
    probe.use_state(st)
    sess = Session(traders, BoxSchedule(m.seller_limit, m.buyer_limit), timestep=m.timestep,
                   seed=clock_seed, max_price=m.max_price)
    # the last window closes lazily on the probe's next quote
    sess.run_for(land.k * land.eval_period_s)
    while not st.history:
        sess.run_for(1.0)
    _, strategies, pps, _ = st.history[0]
    return strategies, pps


def run_landscape(cfg: ExperimentConfig, out_dir, workers: int | None = None):
    """Profit-per-second of each grid strategy, one column per repetition plus the mean."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = default_workers() if workers is None else workers
    reps = cfg.session.repetitions
    results = _map(_landscape_job, [(cfg, i) for i in range(reps)], workers)
    grid = results[0][0]
    table = np.array([r[1] for r in results])  # reps x k
    mean = table.mean(axis=0)
    with open(out / "landscape.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s"] + [f"pps_{i:02d}" for i in range(reps)] + ["pps_mean"])
        for j, s in enumerate(grid):
            w.writerow([f"{s:.4f}"] + [_fmt(v) for v in table[:, j]] + [_fmt(mean[j])])
    return np.array(grid), mean, table


def local_maxima(values) -> list[int]:
    """Indices no lower than their neighbours and strictly above at least one of them."""
    v = np.asarray(values, dtype=float)
    out = []
    for i in range(len(v)):
        nb = [v[j] for j in (i - 1, i + 1) if 0 <= j < len(v)]
        if nb and all(v[i] >= x for x in nb) and any(v[i] > x for x in nb):
            out.append(i)
    return out
