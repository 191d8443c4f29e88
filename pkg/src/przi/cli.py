"""Command-line entry point: ``przi <verb> CONFIG OUT_DIR [--seed N] [--workers N]``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import rqa
from .config import WORKERS_ENV, load_config
from .experiments import run_landscape, run_session
from .sensitivity import ImpactScenario, default_injection_events, read_events, run_impact_scenario, write_events
from .traders import ConfigError

log = logging.getLogger("przi")


def _landscape(cfg, out, workers):
    grid, mean, _ = run_landscape(cfg, out, workers)
    best = int(np.argmax(mean))
    log.info("landscape: %d points, best s=%.2f (%.4f pps)", len(grid), grid[best], mean[best])


def _session(cfg, out, workers):
    runs = run_session(cfg, out, workers)
    log.info("session: %d run(s) written to %s", len(runs), out)


def _rqa(cfg, out, workers):
    r = cfg.rqa
    if not r.trajectory:
        raise ConfigError("[rqa] trajectory is required")
    times, samples = rqa.read_trajectory(r.trajectory)
    eps = r.eps if r.eps is not None else rqa.recurrence_radius(samples.shape[1], r.per_component)
    rp, dist, st = rqa.analyse_trajectory(samples, eps, r.v_min)
    st["diameter"] = rqa.phase_space_diameter(samples.shape[1])
    rqa.export_rp(rp, out, r.downsample)
    rqa.write_line_distribution(out / "lines.csv", dist)
    rqa.write_stats(out / "stats.txt", st)
    log.info("rqa: n=%d eps=%.3f TT=%s", rp.n, eps, st["trapping_time"])


def _impact(cfg, out, workers):
    ic = cfg.impact
    if ic.events:
        events = read_events(ic.events)
    else:
        events = default_injection_events(ic.bid, ic.ask, ic.inject_at_s, ic.extra_bid_qty)
    write_events(out / "events.csv", events)
    sc = ImpactScenario(ic.limit, ic.side == "buyer", ic.gamma, ic.quote_interval_s,
                        ic.duration_s, cfg.market.max_price, ic.seed)
    rows = run_impact_scenario(sc, events, out / "quotes.csv")
    injected = min((e.time for e in events if e.time > 0), default=None)
    if injected is None:
        return
    pre = [p for t, _, _, p in rows if t < injected]
    post = [p for t, _, _, p in rows if t >= injected]
    alt = "greater" if ic.side == "buyer" else "less"
    res = stats.ttest_ind(post, pre, equal_var=False, alternative=alt)
    rqa.write_stats(out / "impact.txt", {"pre_n": len(pre), "post_n": len(post),
                                          "pre_mean": f"{np.mean(pre):.4f}",
                                          "post_mean": f"{np.mean(post):.4f}",
                                          "welch_t": f"{res.statistic:.4f}",
                                          "p_value": f"{res.pvalue:.3e}"})
    log.info("impact: mean quote %.2f -> %.2f (p=%.2e)", np.mean(pre), np.mean(post), res.pvalue)


VERBS = {"landscape": _landscape, "session": _session, "rqa": _rqa, "impact-scenario": _impact}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="przi", description=__doc__)
    ap.add_argument("verb", choices=sorted(VERBS))
    ap.add_argument("config", type=Path)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--seed", type=int, help="override the config's master seed")
    ap.add_argument("--workers", type=int, help=f"parallel sessions (default: ${WORKERS_ENV} or 1)")
    ap.add_argument("-q", "--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.session = dataclasses.replace(cfg.session, seed=args.seed)
            cfg.impact = dataclasses.replace(cfg.impact, seed=args.seed)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        VERBS[args.verb](cfg, args.out_dir, args.workers)
    except (ConfigError, FileNotFoundError) as e:
        print(f"przi: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
