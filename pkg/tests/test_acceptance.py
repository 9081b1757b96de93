"""Acceptance suite: one test group per criterion, each printing a PASS/FAIL line at the end of the run.

Run alone with ``pytest tests/test_acceptance.py``; the verdicts appear in the
"acceptance criteria" section of the terminal summary.
"""
import time
from functools import lru_cache

import numpy as np
import pytest

from acceptance_log import record
from hoplp.dual import SolverConfig, solve, warm_state
from hoplp.edgesel import WCA_EPS, initial_tree, select_and_add, tighten_loop
from hoplp.exact import brute_force_map
from hoplp.experiments import ExperimentConfig, run_experiment
from hoplp.generators import gen_avgcut_chain, gen_avgcut_grid, gen_chain_exclusion
from hoplp.hop import EdgeSet
from oracles import check_hop_marginals, check_hop_min, random_hop_case
from strategies import random_tree_model

SIZES = (4, 6, 8)


def _timed_solve(model, edges):
    t = time.perf_counter()
    res = solve(model, EdgeSet.for_model(model, edges))
    return res, time.perf_counter() - t


# -- solver runs shared with the monotonicity criterion ----------------------------------------


@lru_cache(maxsize=None)
def exclusion_runs():
    out = {}
    for n in SIZES:
        m = gen_chain_exclusion(n, 10.0, 0.1)
        out[n] = (_timed_solve(m, ()), _timed_solve(m, m.edges))
    return out


@lru_cache(maxsize=None)
def avgcut_runs():
    out = {}
    for n in SIZES:
        m = gen_avgcut_chain(n, 1.0, 0.1)
        out[n] = (_timed_solve(m, ()), _timed_solve(m, m.edges), brute_force_map(m)[1])
    return out


@lru_cache(maxsize=None)
def tree_runs():
    out = []
    t = time.perf_counter()
    for seed in range(200):
        rng = np.random.default_rng(seed)
        m = random_tree_model(rng, int(rng.integers(2, 13)))
        out.append((seed, solve(m, EdgeSet.for_model(m, m.edges)), brute_force_map(m)[1]))
    return out, time.perf_counter() - t


# -- criterion 1 -----------------------------------------------------------------------------


@pytest.mark.parametrize("n", SIZES)
def test_criterion_1_exclusion_chain(n):
    (loose, t0), (tight, t1) = exclusion_runs()[n]
    ok = (abs(loose.bound - 0.1) <= 1e-4 and abs(tight.bound - 0.1 * n) <= 1e-6 and tight.certificate
          and list(tight.decoded) == [1] * n and max(t0, t1) < 1.0)
    record(1, ok, f"n={n}: unary bound {loose.bound:.6g}, edge bound {tight.bound:.9g}, "
                  f"certificate {tight.certificate}, {max(t0, t1):.2f}s")
    assert ok


# -- criterion 2 -----------------------------------------------------------------------------


@pytest.mark.parametrize("n", SIZES)
def test_criterion_2_avgcut_chain_unary_consistency(n):
    (loose, t0), _, _ = avgcut_runs()[n]
    want = -0.1 * (n / 2) ** 2
    ok = abs(loose.bound - want) <= 1e-4 and t0 < 1.0
    record(2, ok, f"n={n} S=empty: bound {loose.bound:.6g} vs {want:.6g}, {t0:.2f}s")
    assert ok


# For n=4 and n=6 the stated value c - lam (n/2)^2 (0.6 and 0.1) lies above the true
# optimum 0 of an uncut chain, so no valid lower bound can reach it.
@pytest.mark.parametrize("n", [
    pytest.param(4, marks=pytest.mark.xfail(strict=True, reason="target exceeds the MAP energy 0")),
    pytest.param(6, marks=pytest.mark.xfail(strict=True, reason="target exceeds the MAP energy 0")),
    8,
])
def test_criterion_2_avgcut_chain_edge_consistency(n):
    _, (tight, t1), e_map = avgcut_runs()[n]
    want = 1.0 - 0.1 * (n / 2) ** 2
    ok = abs(tight.bound - want) <= 1e-6 and tight.certificate and t1 < 1.0
    record(2, ok, f"n={n} S=E: bound {tight.bound:.9g} vs stated {want:.6g} (exact MAP {e_map:.6g}), "
                  f"certificate {tight.certificate}, {t1:.2f}s")
    assert ok


# -- criterion 3 -----------------------------------------------------------------------------


def test_criterion_3_full_edge_set_tight_on_trees():
    runs, secs = tree_runs()
    bad = [seed for seed, res, e in runs if abs(res.bound - e) > 1e-6]
    ok = not bad and secs < 60
    record(3, ok, f"{len(runs) - len(bad)}/200 tight, {secs:.1f}s" + (f", failing seeds {bad[:5]}" if bad else ""))
    assert ok


# -- criterion 4 -----------------------------------------------------------------------------


def test_criterion_4_oracle_equivalence():
    t = time.perf_counter()
    failures = []
    for kind, seed in (("cardinality", 401), ("pattern", 402)):
        rng = np.random.default_rng(seed)
        for i in range(200):
            case = random_hop_case(rng, kind)
            try:
                check_hop_min(*case)
                check_hop_marginals(*case)
            except AssertionError as exc:
                failures.append((kind, i, str(exc)[:80]))
    secs = time.perf_counter() - t
    ok = not failures and secs < 120
    record(4, ok, f"400 instances, {len(failures)} mismatches, {secs:.1f}s")
    assert ok, failures[:3]


# -- criterion 5 -----------------------------------------------------------------------------


def test_criterion_5_bound_traces_monotone():
    traces = []
    for a, b in exclusion_runs().values():
        traces += [a[0].bound_trace, b[0].bound_trace]
    for a, b, _ in avgcut_runs().values():
        traces += [a[0].bound_trace, b[0].bound_trace]
    traces += [res.bound_trace for _, res, _ in tree_runs()[0]]
    worst = max((x - y for tr in traces for x, y in zip(tr, tr[1:])), default=0.0)
    ok = worst <= 1e-9
    record(5, ok, f"{len(traces)} traces, largest single-step decrease {max(worst, 0.0):.3g}")
    assert ok


# -- criterion 6 -----------------------------------------------------------------------------


def test_criterion_6_positive_wca_edges_tighten():
    cfg = SolverConfig()
    t = time.perf_counter()
    checked, violations = 0, []
    for seed in range(50):
        m = gen_avgcut_grid(4, 4, seed)
        es = initial_tree(m)
        res = solve(m, es, cfg)
        while not res.certificate and res.hop_argmins is not None and len(res.hop_argmins):
            new_es, picks = select_and_add(m, es, res.final_state, res.hop_argmins, k=1, tw_max=None)
            if not picks:
                break
            edge, wca, truncated = picks[0]
            again = solve(m, new_es, cfg, warm_state(m, es, res.final_state, new_es), res.decoded)
            if wca > WCA_EPS and not truncated:
                checked += 1
                if not again.bound > res.bound:
                    violations.append((seed, edge, res.bound, again.bound))
            es, res = new_es, again
    secs = time.perf_counter() - t
    ok = not violations and checked > 0
    record(6, ok, f"{checked} additions with WCA > {WCA_EPS:g}, {len(violations)} without strict increase, {secs:.0f}s")
    assert ok, violations[:3]


# -- criterion 7 -----------------------------------------------------------------------------


def test_criterion_7_hamming_experiment():
    t = time.perf_counter()
    rep = run_experiment(ExperimentConfig("hamming", n=10, seeds=100, k=[1, 2, 3]))
    secs = time.perf_counter() - t
    cells = rep.summary["cells"]
    all_certified = all(c["tree_certified_rate"] == 1.0 for c in cells)
    monotone = True
    for k in (2, 3):
        rates = [c["unary_integral_rate"] for c in sorted((c for c in cells if c["k"] == k), key=lambda c: c["lam"])]
        monotone &= all(b <= a for a, b in zip(rates, rates[1:]))
    ok = all_certified and monotone and secs < 300
    record(7, ok, f"tree certified in every cell: {all_certified}; unary integral rate non-increasing "
                  f"in lambda for k>=2: {monotone}; {secs:.0f}s")
    assert ok


# -- criterion 8 -----------------------------------------------------------------------------


def test_criterion_8_wca_beats_random_orders():
    t = time.perf_counter()
    cfg = ExperimentConfig("edgesel-compare", rows=4, cols=4, seeds=20)
    rep = run_experiment(cfg)
    secs = time.perf_counter() - t
    curves = rep.summary["mean_bound_curve"]
    steps = rep.summary["mean_additions_to_certificate"]
    randoms = [c for c in curves if c.startswith("random")]
    # bounds are only resolved to the certificate tolerance once a run has certified
    dominates = all(w >= r - cfg.cert_tol for c in randoms for w, r in zip(curves["wca"], curves[c]))
    fewer = all(steps["wca"] < steps[c] for c in randoms)
    ok = dominates and fewer and secs < 600
    record(8, ok, f"WCA curve dominates random: {dominates}; mean additions to certificate "
                  + ", ".join(f"{c} {v:.2f}" for c, v in steps.items()) + f"; {secs:.0f}s")
    assert ok


# -- criterion 9 -----------------------------------------------------------------------------


def test_criterion_9_large_grid_smoke():
    t = time.perf_counter()
    m = gen_avgcut_grid(7, 7, 0, lam=0.004)
    es, trace, res = tighten_loop(m, k=8, tw_max=6)
    secs = time.perf_counter() - t
    bounds = trace.bounds()
    sound = (es.tw_bound <= 6 and all(b >= a - 1e-9 for a, b in zip(bounds, bounds[1:]))
             and all(b >= a - 1e-9 for a, b in zip(res.bound_trace, res.bound_trace[1:]))
             and res.gap >= -1e-8 and trace.stop_reason)
    ok = bool(sound) and secs < 300
    record(9, ok, f"7x7 grid: {trace.stop_reason} after {len(bounds)} rounds, bound {res.bound:.6g}, "
                  f"tree-width bound {es.tw_bound}, {secs:.0f}s")
    assert ok
