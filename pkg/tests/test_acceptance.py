"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL ...`` line. Run directly
with ``python tests/test_acceptance.py`` to get just the summary lines.
"""

import itertools
import os
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from weaklinks.amc import build_model
from weaklinks.compare import (island_bound_grid, island_family, scaling_trend,
                               sweep_star_scaling, two_node_grid)
from weaklinks.engine import InvariantMonitor, SimParams, estimate_welfare, simulate
from weaklinks.equilibrium import BeliefState, update_belief
from weaklinks.network import build_network, classify_regime, gen_clique, gen_island
from weaklinks.welfare import bound_discount, bound_no_weak

WORKERS = os.cpu_count() or 1


def _report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line, flush=True)
    return ok


# Exactly solvable cases shared with the oracle-equivalence check.
def _c1_cases():
    return [(gen_clique(n), SimParams(lam=1.0, epsilon=e, tau=0.0))
            for n in (1, 3, 6) for e in (0.01, 0.1)]


def _c2_case():
    return gen_clique(4), SimParams(lam=1.0, epsilon=0.1, tau=0.5)


def _c3_cases():
    net = gen_island([1, 1], [(0, 1)])
    return [(net, SimParams(lam=1.0, epsilon=e, gamma=g, phi=1e4))
            for e in (1e-3, 1e-2, 1e-1) for g in (0.1, 1.0, 10.0)]


def _partitions_upto(n, k):
    from weaklinks.compare import integer_partitions
    return [s for j in range(1, k + 1) for s in integer_partitions(n, j)]


def _c4_cases():
    out = []
    for sizes in _partitions_upto(6, 3):
        net = gen_island(sizes, [(0, c) for c in range(1, len(sizes))])
        for g in (0.5, 2.0):
            out.append((net, SimParams(lam=1.0, epsilon=0.01, gamma=g, phi=1e4)))
    return out


def _c5_cases():
    out = []
    for n in (6, 7):
        fam = island_family(n, 3)
        for phi in (1e4, 1e-4):
            p = SimParams(lam=1.0, epsilon=1e-4, gamma=2.0, phi=phi)
            out += [(f, p) for f in fam]
    return out


def check_1():
    t0 = time.perf_counter()
    worst_exact, misses = 0.0, []
    for i, (net, p) in enumerate(_c1_cases()):
        target = bound_no_weak(p.lam, p.epsilon)
        worst_exact = max(worst_exact, abs(build_model(net, p).welfare - target))
        est = estimate_welfare(net, p.replace(seed=100 + i), 100_000, replicas=8,
                               workers=WORKERS)
        if not est.contains(target, 0.99):
            misses.append((net.n, p.epsilon, est.mean))
    elapsed = time.perf_counter() - t0
    ok = worst_exact <= 1e-9 and not misses and elapsed < 60
    return _report(1, ok, f"max exact error {worst_exact:.1e}, MC misses {misses}, "
                          f"{elapsed:.0f}s")


def check_2():
    net, p = _c2_case()
    w = build_model(net, p).welfare
    mon = InvariantMonitor(net, p.tau)
    simulate(net, p.replace(seed=7), 20_000, np.random.default_rng(7), monitor=mon)
    changed = mon.violations["frozen_profile"]
    ok = abs(w - 0.5) <= 1e-12 and changed == 0 and mon.total_violations == 0
    return _report(2, ok, f"exact welfare {w!r}, profile changes {changed} "
                          f"over {mon.events} events")


def check_3():
    rows = two_node_grid()
    gaps = [r["welfare_strong"] - r["welfare_weak"] for r in rows]
    ok = len(rows) == 9 and all(r["ordered"] for r in rows)
    return _report(3, ok, f"min strong-weak gap {min(gaps):.3e} over {len(rows)} cells")


def check_4():
    rows = island_bound_grid(6, 3, 1.0, 0.01, (0.5, 2.0), 1e4)
    slack = [r["bound_island"] - r["welfare"] for r in rows]
    # a single island has no diverse states: bound evaluated at p = 0, and
    # the no-weak-link ceiling is checked as well
    single = [r for r in rows if r["bound_no_weak"] is not None]
    single_ok = all(r["welfare"] <= r["bound_no_weak"] + 1e-9 for r in single)
    ok = all(r["holds"] for r in rows) and single_ok and len(rows) == 14
    return _report(4, ok, f"{len(rows)} cases, min slack {min(slack):.3e}")


def check_5():
    tol = 1e-6
    failures, detail = [], []
    for n in (6, 7):
        fam = island_family(n, 3)
        for phi in (1e4, 1e-4):
            p = SimParams(lam=1.0, epsilon=1e-4, gamma=2.0, phi=phi)
            res = [(f, build_model(f.net, p)) for f in fam]
            star = next(m for f, m in res if f.is_star)
            best_w = max(m.welfare for _, m in res)
            best_eta = max(m.eta_core_good() for _, m in res)
            if star.welfare < best_w - tol or star.eta_core_good() < best_eta - tol:
                failures.append((n, phi))
            detail.append(f"n={n} phi={phi:g}: star-best {star.welfare - best_w:+.1e}")
    return _report(5, not failures, "; ".join(detail))


def check_6():
    p = SimParams(lam=1.0, epsilon=1e-4, gamma=2.0, phi=1e4)
    fam = island_family(6, 3)
    dks = {f.name: build_model(f.net, p).dk for f in fam}
    worst = max(np.abs(a - b).max() for a, b in itertools.combinations(dks.values(), 2))
    return _report(6, worst <= 1e-3, f"{len(dks)} members, max pairwise dk gap {worst:.2e}")


def check_7():
    t0 = time.perf_counter()
    rows = sweep_star_scaling([9, 25, 64, 144], epochs=20_000, replicas=8, seed=2024,
                              workers=WORKERS)
    elapsed = time.perf_counter() - t0
    trend_ok, used = scaling_trend(rows)
    last = rows[-1].mean
    sane = all(r.mean >= r.core_lower_bound - 1e-12 for r in rows)
    ok = trend_ok and last > 0.8 and elapsed < 600 and sane
    means = ", ".join(f"n={r.n}: {r.mean:.4f}+-{r.stderr:.4f}" for r in rows)
    return _report(7, ok, f"{means}; increasing={trend_ok} (exemptions {used}), "
                          f"n=144 above 0.8: {last > 0.8}, {elapsed:.0f}s")


def check_8():
    cases = [(net, p) for net, p in _c1_cases()] + [_c2_case()] + _c3_cases() + _c4_cases()
    cases += [(f.net, p) for f, p in _c5_cases()]
    misses = []
    for i, (net, p) in enumerate(cases):
        exact = build_model(net, p).welfare
        est = estimate_welfare(net, p.replace(seed=i), 20_000, replicas=8, workers=WORKERS)
        if not est.contains(exact, 0.99):
            lo, hi = est.ci(0.99)
            misses.append(f"case {i} (n={net.n}, {p}): exact {exact:.5f} "
                          f"outside [{lo:.5f}, {hi:.5f}]")
    return _report(8, not misses, f"{len(cases)} cases, {len(misses)} outside the 99% CI"
                                  + (": " + " | ".join(misses) if misses else ""))


def _random_case(rng):
    n = rng.randint(2, 8)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rng.shuffle(pairs)
    k = rng.randint(0, len(pairs))
    split = rng.randint(0, k)
    net = build_network(n, pairs[:split], pairs[split:k])
    p = SimParams(lam=rng.uniform(0.2, 2.0), gamma=rng.uniform(0, 4), phi=rng.uniform(0, 4),
                  epsilon=rng.uniform(0, 2), tau=rng.choice([0.0, 0.15, 0.3, 0.45, 0.7, 1.5]))
    return net, p


def check_9():
    rng = random.Random(99)
    events, totals, regimes = 0, {}, set()
    while events < 1_000_000:
        net, p = _random_case(rng)
        regimes.add(classify_regime(net, p.tau))
        mon = InvariantMonitor(net, p.tau)
        simulate(net, p, 2_000, np.random.default_rng(rng.getrandbits(32)), mode="agent",
                 monitor=mon)
        events += mon.events
        for k, v in mon.violations.items():
            totals[k] = totals.get(k, 0) + v
    belief_bad = 0
    for _ in range(10_000):
        mu0 = rng.choice([0, 1])
        lam = rng.uniform(1e-3, 10)
        # keep exp(-lam dt) well above double rounding at 1/2
        dt = rng.uniform(1e-9, 30 / lam)
        b = BeliefState().observe(0.0, mu0)
        m = update_belief(b, dt, lam)
        if (mu0 == 1 and not m > 0.5) or (mu0 == 0 and not m < 0.5):
            belief_bad += 1
    ok = sum(totals.values()) == 0 and belief_bad == 0
    names = sorted(r.value for r in regimes)
    return _report(9, ok, f"{events} events over regimes {names}, violations {totals}, "
                          f"belief violations {belief_bad}/10000")


def check_10():
    rng = random.Random(10)
    worst, mono_bad = 0.0, 0
    for _ in range(100):
        tau = rng.uniform(0, 5)
        dmin = rng.randint(1, 30)
        dmax = rng.randint(dmin, 40)
        exact = Fraction(tau) * dmin / (2 + Fraction(tau) * dmax)
        worst = max(worst, abs(bound_discount(tau, dmin, dmax) - float(exact)))
        b = bound_discount(tau, dmin, dmax)
        if bound_discount(tau + 0.1, dmin, dmax) < b or bound_discount(tau, dmin, dmax + 1) > b:
            mono_bad += 1
        if dmin < dmax and bound_discount(tau, dmin + 1, dmax) < b:
            mono_bad += 1
    ok = worst <= 1e-12 and mono_bad == 0
    return _report(10, ok, f"max error {worst:.1e}, monotonicity violations {mono_bad}")


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9,
          check_10]


@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_criterion(check, capsys):
    with capsys.disabled():
        print()
        ok = check()
    assert ok


if __name__ == "__main__":
    results = [c() for c in CHECKS]
    print(f"{sum(results)}/{len(results)} criteria pass")
