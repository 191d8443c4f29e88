"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (see ``conftest.report``) before asserting,
so the summary at the end of a pytest run lists every verdict. Desk-scale
runs read their settings from the checked-in configs.
"""

import math
import random
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from przi import cli, rqa
from przi.config import load_config, parse_config
from przi.engine import LutCache, build_distribution
from przi.exchange import ASK, BID, Assignment, OrderBook, Quote, Session, submit_quote, surplus_of
from przi.experiments import (build_traders, local_maxima, run_landscape, run_one_session,
                              run_session, session_seeds, terminal_set)
from przi.sensitivity import (ImpactScenario, TopOfBookView, default_injection_events,
                              imbalance_delta, micro_price, run_impact_scenario)
from przi.traders import GVWYTrader, MarketParams, PRZITrader, SHVRTrader, ZICTrader

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_01_pmf_normalisation(report):
    t0 = time.perf_counter()
    worst = 0.0
    tails_ok = True
    for j in range(-100, 101):
        for buyer in (True, False):
            d = build_distribution(j / 100, 60, 500, buyer)
            worst = max(worst, abs(d.pmf.sum() - 1))
            tails_ok &= d.cdf[-1] == 1.0
    dt = time.perf_counter() - t0
    ok = worst < 1e-9 and tails_ok and dt < 5
    report(1, ok, f"max |sum-1| = {worst:.1e}, cdf tails ok = {tails_ok}, {dt:.2f}s")
    assert ok


def test_02_anchor_equivalences(report):
    t0 = time.perf_counter()
    market = MarketParams(cache=LutCache())
    rng = random.Random(2024)

    # (a) s = 0 against ZIC, 1e5 quotes each
    n = 100_000
    p = PRZITrader("p", True, 1, market, s=0.0)
    z = ZICTrader("z", True, 2, market)
    p.assign(100)
    z.assign(100)
    empty = OrderBook(500)
    a = [p.quote(empty, 0) for _ in range(n)]
    b = [z.quote(empty, 0) for _ in range(n)]
    ks = stats.ks_2samp(a, b).statistic
    crit = 1.628 * math.sqrt(2 / n)  # alpha = 0.01 two-sample critical value
    ok_a = ks < crit

    # (b) s = +1 against GVWY over random assignments
    mism_b = 0
    for i in range(10_000):
        buyer = rng.random() < 0.5
        lim = rng.randint(1, 499)
        g = PRZITrader(i, buyer, rng.random(), market, s=1.0)
        g.assign(lim)
        mism_b += g.quote(empty, 0) != lim

    # (c) s = -1 against SHVR over random book states
    mism_c = 0
    for i in range(1000):
        buyer = rng.random() < 0.5
        lim = rng.randint(2, 400)
        book = OrderBook(500)
        bid, ask = sorted(rng.sample(range(1, 501), 2))
        if rng.random() < 0.85:
            book.submit("x", True, bid)
        if rng.random() < 0.85:
            book.submit("y", False, ask)
        q = PRZITrader(i, buyer, rng.random(), market, s=-1.0)
        q.assign(lim)
        sh = SHVRTrader("s", buyer, 0, market)
        sh.assign(lim)
        mism_c += q.quote(book, 0) != sh.quote(book, 0)
    dt = time.perf_counter() - t0
    ok = ok_a and mism_b == 0 and mism_c == 0 and dt < 30
    report(2, ok, f"KS {ks:.4f} < {crit:.4f}: {ok_a}; GVWY mismatches {mism_b}; "
                  f"SHVR mismatches {mism_c}; {dt:.1f}s")
    assert ok


def test_03_worked_examples(report):
    assign = {"seller": Assignment("seller", "sell", 4), "buyer": Assignment("buyer", "buy", 10)}
    book = OrderBook(500)
    submit_quote(book, Quote("seller", ASK, 7), assign)
    trade = submit_quote(book, Quote("buyer", BID, 10), assign)
    got = (surplus_of(15, 10, is_buyer=False), surplus_of(8, 10, is_buyer=True), trade.buyer_surplus)
    ok = got == (5, 2, 3) and trade.price == 7
    report(3, ok, f"surpluses {got}, crossing trade at {trade.price}")
    assert ok


def test_04_conservation(report):
    t0 = time.perf_counter()
    cfg = parse_config("[session]\nduration_s = 3600\nsample_interval_s = 60\nseed = 4\n"
                       "[prsh]\neval_period_s = 300\nsigma = 0.05\n")
    ms = run_one_session(cfg, 0)
    per_sample = all(t == b + s == 40 * n for b, s, t, n in zip(ms.pi_b, ms.pi_s, ms.pi_t, ms.trades))
    dt = time.perf_counter() - t0
    ok = per_sample and ms.trades[-1] > 0 and len(ms.trades) == 61 and dt < 60
    report(4, ok, f"{ms.trades[-1]} trades, pi_T = {ms.pi_t[-1]}, every sample conserved = "
                  f"{per_sample}, {dt:.1f}s")
    assert ok


def test_05_micro_price(report):
    got = (micro_price(TopOfBookView(10, 4, 12, 4)), micro_price(TopOfBookView(10, 3, 12, 1)),
           micro_price(TopOfBookView(10, 1, 12, 3)), imbalance_delta(TopOfBookView(10, 3, 12, 1)))
    ok = got == (11.0, 11.5, 10.5, 0.5)
    report(5, ok, f"balanced {got[0]}, heavy bid {got[1]}, heavy ask {got[2]}, dm {got[3]}")
    assert ok


def test_06_impact_injection(report):
    t0 = time.perf_counter()
    ic = load_config(CONFIGS / "impact_buyer.ini").impact
    events = default_injection_events(ic.bid, ic.ask, ic.inject_at_s, ic.extra_bid_qty)
    rows = run_impact_scenario(ImpactScenario(ic.limit, True, ic.gamma, ic.quote_interval_s,
                                              ic.duration_s, 500, ic.seed), events)
    pre = [p for t, _, _, p in rows if t < ic.inject_at_s][-1000:]
    post = [p for t, _, _, p in rows if t >= ic.inject_at_s][:1000]
    res = stats.ttest_ind(post, pre, equal_var=False, alternative="greater")
    dt = time.perf_counter() - t0
    ok = len(pre) == len(post) == 1000 and res.pvalue < 0.01 and dt < 120
    report(6, ok, f"mean quote {np.mean(pre):.1f} -> {np.mean(post):.1f}, Welch p = {res.pvalue:.1e}, "
                  f"{dt:.1f}s")
    assert ok


def test_07_landscape_shape(report, tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(CONFIGS / "landscape_gvwy_desk.ini")
    grid, mean, _ = run_landscape(cfg, tmp_path)
    dt = time.perf_counter() - t0
    best = float(grid[int(np.argmax(mean))])
    low_peaks = [float(grid[i]) for i in local_maxima(mean) if grid[i] <= -0.9 + 1e-9]
    ok = best > 0.5 and bool(low_peaks) and dt < 600
    shape = " ".join(f"{s:+.1f}:{v:.1f}" for s, v in zip(grid[::2], mean[::2]))
    report(7, ok, f"global max at s = {best:+.1f}; local max at s <= -0.9: {low_peaks or 'none'}; "
                  f"{dt:.0f}s; pps {shape}")
    assert ok


def test_08_single_prsh_convergence(report, tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(CONFIGS / "single_prsh_gvwy_desk.ini")
    runs = run_session(cfg, tmp_path)
    finals = terminal_set(runs)
    hits = sum(0.7 <= v <= 1.0 for v in finals)
    dt = time.perf_counter() - t0
    ok = len(finals) == 5 and hits >= 4 and dt < 1800
    report(8, ok, f"terminal s_hat {[round(v, 2) for v in finals]}, {hits}/5 in [0.7, 1.0], {dt:.0f}s")
    assert ok


def test_09_coevolution(report, tmp_path):
    t0 = time.perf_counter()
    cfg = load_config(CONFIGS / "coevolve_zero_desk.ini")
    runs = run_session(cfg, tmp_path)
    sellers = terminal_set(runs, "seller")
    summary = dict(l.split("=", 1) for l in (tmp_path / "summary.txt").read_text().split("\n") if l)
    mean = float(np.mean(sellers))
    modes = int(summary["seller_modes"])
    dt = time.perf_counter() - t0
    ok = len(sellers) == 30 and 0.4 <= mean <= 0.95 and modes == 1 and dt < 3600
    report(9, ok, f"seller mean terminal s_hat {mean:.3f}, histogram modes {modes}, {dt:.0f}s")
    assert ok


def _naive_tt(m, v_min=2):
    lines = []
    for col in m:
        run = 0
        for v in list(col) + [False]:
            if v:
                run += 1
            elif run:
                lines.append(run)
                run = 0
    keep = [v for v in lines if v >= v_min]
    return sum(keep) / len(keep) if keep else None


def test_10_rqa(report):
    t0 = time.perf_counter()
    seq = "ABCDAAABCDEFE"
    traj = np.eye(26)[[ord(c) - 65 for c in seq]]
    cells = rqa.build_rp(traj, 0.5).cells
    seq_cells = {(0, 4), (0, 5), (0, 6), (0, 6), (1, 7), (2, 8), (3, 9)}
    exact = {tuple(x) for x in np.argwhere(cells)} == {(c, r) for c in range(13) for r in range(13)
                                                       if seq[c] == seq[r]}
    cells_ok = exact and all(cells[c, r] for c, r in seq_cells) and not cells[0, 7]
    rng = np.random.default_rng(10)
    tt_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 65))
        m = rng.random((n, n)) < rng.uniform(0.05, 0.95)
        tt_ok &= rqa.trapping_time(rqa.vertical_line_distribution(m)) == _naive_tt(m)
    eps, diam = rqa.recurrence_radius(60, 0.05), rqa.phase_space_diameter(60)
    arith = round(eps, 3) == 0.387 and round(diam, 3) == 15.492
    dt = time.perf_counter() - t0
    ok = cells_ok and tt_ok and arith and dt < 60
    report(10, ok, f"symbol-sequence cells {cells_ok}, TT oracle on 1000 matrices {tt_ok}, "
                   f"eps {eps:.3f}, diameter {diam:.3f}, {dt:.1f}s")
    assert ok


def test_11_determinism_and_speed(report, tmp_path):
    cfg_text = ("[session]\nduration_s = 1800\nsample_interval_s = 300\nrepetitions = 1\nseed = 11\n"
                "[prsh]\neval_period_s = 300\nsigma = 0.05\n")
    cfg_path = tmp_path / "det.ini"
    cfg_path.write_text(cfg_text)
    for d in ("a", "b"):
        assert cli.main(["session", str(cfg_path), str(tmp_path / d), "-q"]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)

    # one simulated day, 60 adaptive traders, 60 steps per second
    cfg = parse_config("[prsh]\neval_period_s = 600\nsigma = 0.05\n")
    clock, seeds = session_seeds(11, 0, 60)
    sess = Session(build_traders(cfg, seeds, cache=LutCache()), seed=clock)
    t0 = time.perf_counter()
    sess.run_for(86400)
    dt = time.perf_counter() - t0
    ok = same and len(files) >= 5 and sess.steps == 5_184_000 and dt <= 120
    report(11, ok, f"{len(files)} output files byte-identical = {same}; 1-day 60-trader session "
                   f"{sess.steps} steps in {dt:.1f}s")
    assert ok
