"""Cross-network welfare comparisons, network families and parameter sweeps."""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import amc
from .engine import EpochSnapshot, SimParams, estimate_welfare, replica_seed, simulate
from .network import NetworkSpec, Regime, classify_regime, gen_clique, gen_island, gen_star
from .welfare import Method, WelfareEstimate, bound_island, bound_no_weak


class BoundViolationError(RuntimeError):
    def __init__(self, report: ComparisonReport):
        self.report = report
        super().__init__(f"{len(report.violations)} bound violation(s): {report.violations}")


# --- families -------------------------------------------------------------

def integer_partitions(n: int, k: int, largest: int | None = None) -> list[list[int]]:
    """Partitions of ``n`` into exactly ``k`` positive parts, descending."""
    largest = n if largest is None else largest
    if k == 1:
        return [[n]] if 1 <= n <= largest else []
    out = []
    for first in range(min(n - k + 1, largest), 0, -1):
        out += [[first] + rest for rest in integer_partitions(n - first, k - 1, first)]
    return out


def _connected(k: int, edges: Sequence[tuple[int, int]]) -> bool:
    seen, stack = {0}, [0]
    while stack:
        u = stack.pop()
        for a, b in edges:
            for x, y in ((a, b), (b, a)):
                if x == u and y not in seen:
                    seen.add(y)
                    stack.append(y)
    return len(seen) == k


def weak_topologies(k: int, trees_only: bool = False) -> list[list[tuple[int, int]]]:
    """Connected simple graphs on ``k`` labelled islands."""
    pairs = list(itertools.combinations(range(k), 2))
    out = []
    for r in range(k - 1, len(pairs) + 1):
        if trees_only and r != k - 1:
            break
        for edges in itertools.combinations(pairs, r):
            if _connected(k, edges):
                out.append(list(edges))
    return out


def _island_key(sizes: Sequence[int], topo: Sequence[tuple[int, int]]):
    k = len(sizes)
    best = None
    for perm in itertools.permutations(range(k)):
        s = tuple(sizes[perm[c]] for c in range(k))
        inv = {perm[c]: c for c in range(k)}
        e = tuple(sorted(tuple(sorted((inv[a], inv[b]))) for a, b in topo))
        if best is None or (s, e) < best:
            best = (s, e)
    return best


@dataclass(frozen=True)
class IslandNet:
    name: str
    sizes: tuple[int, ...]
    topology: tuple[tuple[int, int], ...]

    @property
    def net(self) -> NetworkSpec:
        return gen_island(self.sizes, self.topology)

    @property
    def is_star(self) -> bool:
        k = len(self.sizes)
        return (all(s == 1 for s in self.sizes[1:])
                and sorted(self.topology) == [(0, c) for c in range(1, k)])


def island_family(n: int, k: int, trees_only: bool = False,
                  dedupe: bool = True) -> list[IslandNet]:
    """Island networks with ``n`` agents in ``k`` cliques, up to relabelling.

    Covers every partition of ``n`` into ``k`` parts combined with every
    connected weak topology between the islands.
    """
    out, seen = [], set()
    for sizes in integer_partitions(n, k):
        for topo in weak_topologies(k, trees_only):
            key = _island_key(sizes, topo)
            if dedupe and key in seen:
                continue
            seen.add(key)
            name = "-".join(map(str, sizes)) + ":" + ",".join(f"{a}{b}" for a, b in topo)
            out.append(IslandNet(name, tuple(sizes), tuple(topo)))
    return out


def is_island_network(net: NetworkSpec) -> bool:
    """Every strong component is a clique and weak links join distinct components."""
    parts = net.components
    strong = set(net.strong_edges)
    for members in parts.members:
        for i, j in itertools.combinations(members, 2):
            if (i, j) not in strong:
                return False
    return all(parts.component_of[i] != parts.component_of[j] for i, j in net.weak_edges)


# --- reports ----------------------------------------------------------------

@dataclass
class ComparisonEntry:
    name: str
    digest: str
    params: SimParams
    regime: Regime
    estimate: WelfareEstimate | None = None
    bounds: dict[str, float] = field(default_factory=dict)
    p_conditional: float | None = None
    eta_core_good: float | None = None
    error: str | None = None
    boundary: bool = False


@dataclass
class ComparisonReport:
    entries: list[ComparisonEntry]
    ranking: list[int]
    violations: list[tuple[str, str, float, float]]

    COLUMNS = ("rank", "name", "digest", "regime", "method", "mean", "stderr", "ci_lo",
               "ci_hi", "bound_no_weak", "bound_island", "p_conditional", "eta_core_good",
               "lam", "gamma", "phi", "epsilon", "tau", "error")

    def rows(self) -> list[dict]:
        rank = {idx: r + 1 for r, idx in enumerate(self.ranking)}
        out = []
        for idx, e in enumerate(self.entries):
            est = e.estimate
            out.append({
                "rank": rank.get(idx, ""), "name": e.name, "digest": e.digest,
                "regime": e.regime.value,
                "method": est.method.value if est else "",
                "mean": est.mean if est else "", "stderr": est.stderr if est else "",
                "ci_lo": est.ci95[0] if est else "", "ci_hi": est.ci95[1] if est else "",
                "bound_no_weak": e.bounds.get("no_weak", ""),
                "bound_island": e.bounds.get("island", ""),
                "p_conditional": "" if e.p_conditional is None else e.p_conditional,
                "eta_core_good": "" if e.eta_core_good is None else e.eta_core_good,
                "lam": e.params.lam, "gamma": e.params.gamma, "phi": e.params.phi,
                "epsilon": e.params.epsilon, "tau": e.params.tau,
                "error": e.error or "",
            })
        return out

    def write_csv(self, fh: TextIO) -> None:
        w = csv.DictWriter(fh, fieldnames=self.COLUMNS)
        w.writeheader()
        w.writerows(self.rows())

    def to_dict(self) -> dict:
        return {"entries": self.rows(), "ranking": [self.entries[i].name for i in self.ranking],
                "violations": [list(v) for v in self.violations]}


def applicable_bounds(net: NetworkSpec, params: SimParams,
                      p_conditional: float | None) -> dict[str, float]:
    regime = classify_regime(net, params.tau)
    out = {}
    if not net.weak_edges:
        if regime is Regime.COORDINATED:
            out["no_weak"] = bound_no_weak(params.lam, params.epsilon)
        elif regime is Regime.FROZEN:
            out["no_weak"] = 0.5
    if (regime is Regime.COORDINATED and is_island_network(net) and params.epsilon > 0
            and net.components.count > 1 and p_conditional is not None):
        out["island"] = bound_island(p_conditional, params.lam, params.epsilon,
                                     params.gamma, net.components.sizes)
    return out


def compare_networks(specs: Sequence[NetworkSpec | tuple[str, NetworkSpec]], params: SimParams,
                     method: Method = Method.EXACT_AMC, budget: dict | None = None,
                     strict: bool = True, level: float = 0.99,
                     exact_tol: float = 1e-9) -> ComparisonReport:
    """Welfare of each network with its applicable bounds, ranked by mean.

    Per-network failures (unsupported regime, capacity) are recorded on the
    entry. A bound exceeded beyond tolerance raises ``BoundViolationError``
    unless ``strict`` is False; Monte Carlo entries are judged by the lower
    edge of their ``level`` confidence interval.
    """
    from .network import regime_boundary

    if method is Method.MONTE_CARLO and not budget:
        raise ValueError("Monte Carlo comparisons need a budget")
    entries: list[ComparisonEntry] = []
    violations = []
    for i, item in enumerate(specs):
        name, net = item if isinstance(item, tuple) else (f"net{i}", item)
        e = ComparisonEntry(name, net.digest(), params, classify_regime(net, params.tau),
                            boundary=regime_boundary(net, params.tau))
        entries.append(e)
        model = None
        try:
            model = amc.build_model(net, params)
            e.p_conditional = model.p_conditional
            e.eta_core_good = model.eta_core_good()
        except amc.AmcError as exc:
            if method is Method.EXACT_AMC:
                e.error = f"{type(exc).__name__}: {exc}"
                continue
        if method is Method.EXACT_AMC:
            e.estimate = WelfareEstimate.exact(model.welfare)
        else:
            e.estimate = estimate_welfare(net, params, **budget)
        e.bounds = applicable_bounds(net, params, e.p_conditional)
        lo = e.estimate.mean - exact_tol if method is Method.EXACT_AMC else e.estimate.ci(level)[0]
        for bname, value in e.bounds.items():
            if lo > value:
                violations.append((name, bname, value, lo - value))
    ranked = [i for i, e in enumerate(entries) if e.estimate is not None]
    ranked.sort(key=lambda i: -entries[i].estimate.mean)
    report = ComparisonReport(entries, ranked, violations)
    if strict and violations:
        raise BoundViolationError(report)
    return report


def two_node_comparison(params: SimParams) -> dict[str, float]:
    """Strongly linked pair (closed form) against a weakly linked pair (exact).

    Intended for large ``phi``, where the weak link is almost never inactive.
    """
    strong = bound_no_weak(params.lam, params.epsilon)
    weak = amc.build_model(gen_island([1, 1], [(0, 1)]), params).welfare
    return {"welfare_strong": strong, "welfare_weak": weak}


# --- sweeps -----------------------------------------------------------------

def star_scaling_params(n: int, lam: float = 1.0, eps_ratio: float = 1e-4,
                        seed: int = 0) -> tuple[int, SimParams]:
    m = math.ceil(math.sqrt(n))
    return m, SimParams(lam=lam, gamma=math.sqrt(m) * lam, phi=m ** -0.25 * lam,
                        epsilon=eps_ratio * lam, seed=seed)


@dataclass
class ScalingRow:
    n: int
    m: int
    gamma: float
    phi: float
    mean: float
    stderr: float
    ci_lo: float
    ci_hi: float
    core_correct: float
    core_lower_bound: float


def _star_replica(args):
    net, params, epochs, burn_in, seed = args
    core = net.components.members[0]
    core_size = len(core)
    frac = np.empty(epochs - burn_in)
    core_ok = np.empty(epochs - burn_in, dtype=bool)

    def keep(s: EpochSnapshot) -> None:
        if s.k >= burn_in:
            frac[s.k - burn_in] = s.fraction_correct
            core_ok[s.k - burn_in] = s.P[core[0]] == s.R

    simulate(net, params, epochs, np.random.default_rng(seed), on_snapshot=keep)
    return frac, core_ok, core_size


def sweep_star_scaling(ns: Sequence[int], epochs: int, replicas: int, burn_in: int = 0,
                       lam: float = 1.0, eps_ratio: float = 1e-4, seed: int = 0,
                       workers: int = 1) -> list[ScalingRow]:
    """Monte Carlo welfare of star networks with ``m = ceil(sqrt(n))``.

    Rates follow ``gamma = sqrt(m) lam``, ``phi = m^(-1/4) lam`` and
    ``epsilon = eps_ratio * lam``.
    """
    from concurrent.futures import ProcessPoolExecutor

    rows = []
    for n in ns:
        m, params = star_scaling_params(n, lam, eps_ratio, seed)
        net = gen_star(n, m)
        jobs = [(net, params, epochs, burn_in, replica_seed(seed, r)) for r in range(replicas)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                runs = list(pool.map(_star_replica, jobs))
        else:
            runs = [_star_replica(j) for j in jobs]
        est = WelfareEstimate.from_replicas([r[0].mean() for r in runs], epochs - burn_in)
        core_freq = float(np.mean([r[1].mean() for r in runs]))
        core_size = runs[0][2]
        rows.append(ScalingRow(n, m, params.gamma, params.phi, est.mean, est.stderr,
                               est.ci95[0], est.ci95[1], core_freq, core_size / n * core_freq))
    return rows


def scaling_trend(rows: Sequence[ScalingRow]) -> tuple[bool, int]:
    """Whether means increase along n, allowing one overlapping-CI exemption.

    Returns ``(ok, exemptions_used)``.
    """
    exemptions = 0
    ok = True
    for a, b in zip(rows, rows[1:]):
        if b.mean > a.mean:
            continue
        if b.ci_hi >= a.ci_lo and exemptions == 0:
            exemptions += 1
        else:
            ok = False
    return ok, exemptions


SCALING_COLUMNS = tuple(ScalingRow.__dataclass_fields__)


def write_rows_csv(rows: Iterable, columns: Sequence[str], fh: TextIO) -> None:
    w = csv.writer(fh)
    w.writerow(columns)
    for r in rows:
        w.writerow([getattr(r, c) if not isinstance(r, dict) else r[c] for c in columns])


def two_node_grid(lam: float = 1.0, eps_ratios=(1e-3, 1e-2, 1e-1),
                  gamma_ratios=(0.1, 1.0, 10.0), phi_ratio: float = 1e4) -> list[dict]:
    rows = []
    for e in eps_ratios:
        for g in gamma_ratios:
            p = SimParams(lam=lam, epsilon=e * lam, gamma=g * lam, phi=phi_ratio * lam)
            r = two_node_comparison(p)
            rows.append({"epsilon": p.epsilon, "gamma": p.gamma, "phi": p.phi, **r,
                         "ordered": r["welfare_weak"] < r["welfare_strong"]})
    return rows


def island_bound_grid(n: int = 6, max_parts: int = 3, lam: float = 1.0,
                      epsilon: float = 0.01, gammas=(0.5, 2.0), phi: float = 1e4,
                      tol: float = 1e-9) -> list[dict]:
    """Exact welfare against the island bound for star-wired island networks.

    Single-island networks have no diverse states; their bound is evaluated
    with ``p = 0`` (vacuous) and reported alongside the no-weak-link bound.
    """
    rows = []
    for k in range(1, max_parts + 1):
        for sizes in integer_partitions(n, k):
            net = gen_island(sizes, [(0, c) for c in range(1, k)])
            for g in gammas:
                p = SimParams(lam=lam, epsilon=epsilon, gamma=g, phi=phi)
                model = amc.build_model(net, p)
                pc = model.p_conditional
                b = bound_island(pc if pc is not None else 0.0, lam, epsilon, g, sizes)
                rows.append({"sizes": "-".join(map(str, sizes)), "gamma": g,
                             "welfare": model.welfare, "p_raw": model.p_raw,
                             "p_conditional": pc, "bound_island": b,
                             "bound_no_weak": bound_no_weak(lam, epsilon) if k == 1 else None,
                             "holds": model.welfare <= b + tol})
    return rows


def star_vs_islands(n: int, k: int, lam: float = 1.0, eps_ratio: float = 1e-4,
                    gamma_ratio: float = 2.0, phi_ratio: float = 1e4,
                    trees_only: bool = False) -> list[dict]:
    p = SimParams(lam=lam, epsilon=eps_ratio * lam, gamma=gamma_ratio * lam,
                  phi=phi_ratio * lam)
    rows = []
    for fam in island_family(n, k, trees_only):
        model = amc.build_model(fam.net, p)
        rows.append({"name": fam.name, "n": n, "k": k, "phi": p.phi, "is_star": fam.is_star,
                     "weak_links": len(fam.topology), "welfare": model.welfare,
                     "eta_core_good": model.eta_core_good(),
                     "dk": json.dumps(model.dk.tolist())})
    rows.sort(key=lambda r: -r["welfare"])
    return rows


def no_weak_clique_rows(ns=(1, 3, 6), eps=(0.01, 0.1), lam: float = 1.0) -> list[dict]:
    rows = []
    for n in ns:
        for e in eps:
            p = SimParams(lam=lam, epsilon=e)
            w = amc.build_model(gen_clique(n), p).welfare
            rows.append({"n": n, "epsilon": e, "exact": w,
                         "bound_no_weak": bound_no_weak(lam, e)})
    return rows
