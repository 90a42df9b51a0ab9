"""Continuous-time event simulation of the adaptation dynamics.

Four Poisson clock families run in superposition: payoff shocks (rate
``lam``), trembles (rate ``epsilon``, agent uniform), a weak-activation clock
(rate ``gamma``, link uniform over the dormant disagreeing links) and one
recovery clock of rate ``phi`` per inactive weak link. Welfare is sampled at
payoff shocks, just before the better action is redrawn.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from .equilibrium import InfoEvent, InfoKind, cascade
from .network import NetworkSpec, Regime, classify_regime
from .welfare import WelfareEstimate


class ConsistencyError(RuntimeError):
    """An event that the sampler should never have produced."""


class EventKind(enum.Enum):
    PAYOFF_SHOCK = "payoff_shock"
    TREMBLE = "tremble"
    WEAK_ACTIVATION = "weak_activation"
    LINK_RECOVERY = "link_recovery"
    NULL_ACTIVATION = "null_activation"


class LinkState(enum.Enum):
    DORMANT = "dormant"
    INACTIVE = "inactive"


@dataclass(frozen=True)
class SimParams:
    lam: float
    gamma: float = 0.0
    phi: float = 0.0
    epsilon: float = 0.0
    tau: float = 0.0
    beta: float | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("lam", "gamma", "phi", "epsilon", "tau"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")
        if self.lam <= 0:
            raise ValueError("lam must be strictly positive")
        if self.beta is not None and not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def replace(self, **kw) -> SimParams:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return SimParams(**d)


@dataclass
class WorldState:
    t: float
    actions: list[int]
    better: int
    dormant: list[bool]
    epoch_index: int = 0
    n_ones: int = 0

    @property
    def link_state(self) -> list[LinkState]:
        return [LinkState.DORMANT if d else LinkState.INACTIVE for d in self.dormant]

    def copy(self) -> WorldState:
        return WorldState(self.t, list(self.actions), self.better, list(self.dormant),
                          self.epoch_index, self.n_ones)


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    # agent for TREMBLE, weak link index for WEAK_ACTIVATION / LINK_RECOVERY,
    # the redrawn better action for PAYOFF_SHOCK
    target: int = -1
    total_rate: float = math.nan


@dataclass(frozen=True)
class EpochSnapshot:
    k: int
    P: tuple[int, ...]
    R: int
    B: frozenset[int]
    fraction_correct: float

    @classmethod
    def take(cls, state: WorldState) -> EpochSnapshot:
        n = len(state.actions)
        correct = state.n_ones if state.better == 1 else n - state.n_ones
        B = frozenset(l for l, d in enumerate(state.dormant) if d)
        return cls(state.epoch_index, tuple(state.actions), state.better, B, correct / n)


def eligible_links(state: WorldState, net: NetworkSpec) -> list[int]:
    """Dormant weak links whose endpoints currently play different actions."""
    a = state.actions
    return [l for l, (i, j) in enumerate(net.weak_edges)
            if state.dormant[l] and a[i] != a[j]]


def resolve_mode(net: NetworkSpec, tau: float, mode: str = "auto") -> str:
    """Pick the cascade implementation.

    ``component`` flips whole strong components and is only valid in the
    coordinated regime; ``agent`` runs the per-agent FIFO cascade.
    """
    regime = classify_regime(net, tau)
    if mode == "auto":
        return "component" if regime is Regime.COORDINATED else "agent"
    if mode == "component" and regime is not Regime.COORDINATED:
        raise ValueError(f"component cascades need the coordinated regime, got {regime}")
    if mode not in ("agent", "component"):
        raise ValueError(f"unknown mode {mode!r}")
    return mode


def init_state(net: NetworkSpec, params: SimParams, rng) -> WorldState:
    better = 1 if rng.random() < 0.5 else 0
    return WorldState(0.0, [0] * net.n, better, [True] * len(net.weak_edges))


def next_event(state: WorldState, net: NetworkSpec, params: SimParams, rng) -> Event:
    """Sample the first tick among all running clocks.

    ``rng`` only needs a ``random()`` method returning floats in [0, 1).
    """
    n_inactive = len(state.dormant) - sum(state.dormant)
    lam, eps, gamma = params.lam, params.epsilon, params.gamma
    total = lam + eps + gamma + params.phi * n_inactive
    t = state.t - math.log(1.0 - rng.random()) / total
    v = rng.random() * total
    if v < lam:
        return Event(t, EventKind.PAYOFF_SHOCK, 1 if rng.random() < 0.5 else 0, total)
    v -= lam
    if v < eps:
        return Event(t, EventKind.TREMBLE, min(int(rng.random() * net.n), net.n - 1), total)
    v -= eps
    if v < gamma:
        w = eligible_links(state, net)
        if not w:
            return Event(t, EventKind.NULL_ACTIVATION, -1, total)
        return Event(t, EventKind.WEAK_ACTIVATION, w[min(int(rng.random() * len(w)), len(w) - 1)], total)
    inactive = [l for l, d in enumerate(state.dormant) if not d]
    return Event(t, EventKind.LINK_RECOVERY,
                 inactive[min(int(rng.random() * n_inactive), n_inactive - 1)], total)


def _component_cascade(net: NetworkSpec, state: WorldState, seeds: Sequence[int],
                       kind: InfoKind, record: bool, time: float) -> list[InfoEvent]:
    # coordinated regime: a seed playing the wrong action drags its whole
    # strong component to the revealed action, a seed playing the right one
    # changes nothing
    parts = net.components
    R = state.better
    a = state.actions
    log: list[InfoEvent] = []
    for s in sorted(set(seeds)):
        before = a[s]
        if before == R:
            if record:
                log.append(InfoEvent(s, kind, R, before, before, time))
            continue
        members = parts.members[parts.component_of[s]]
        for v in members:
            a[v] = R
        state.n_ones += len(members) if R == 1 else -len(members)
        if record:
            log.append(InfoEvent(s, kind, R, before, R, time))
            log.extend(InfoEvent(v, InfoKind.NEIGHBOR_DISAGREES, R, before, R, time)
                       for v in members if v != s)
    return log


def _agent_cascade(net: NetworkSpec, state: WorldState, seeds: Sequence[int],
                   kind: InfoKind, tau: float, time: float) -> list[InfoEvent]:
    profile, log = cascade(net, state.actions, seeds, state.better, tau, kind, time)
    state.actions[:] = profile
    state.n_ones = sum(profile)
    return log


def apply_event(state: WorldState, event: Event, net: NetworkSpec, params: SimParams,
                mode: str = "auto", record: bool = True
                ) -> tuple[WorldState, EpochSnapshot | None, list[InfoEvent]]:
    """Advance ``state`` (in place) through one event.

    Returns the state, the welfare snapshot if the event was a payoff shock,
    and the information arrivals it caused (empty in component mode unless
    ``record`` is set).
    """
    if event.time <= state.t:
        raise ConsistencyError(f"event at {event.time} does not follow t={state.t}")
    if mode == "auto":
        mode = resolve_mode(net, params.tau)
    state.t = event.time
    kind = event.kind
    snap = None
    log: list[InfoEvent] = []
    if kind is EventKind.PAYOFF_SHOCK:
        snap = EpochSnapshot.take(state)
        state.better = event.target
        state.epoch_index += 1
    elif kind is EventKind.WEAK_ACTIVATION:
        l = event.target
        i, j = net.weak_edges[l]
        if not state.dormant[l] or state.actions[i] == state.actions[j]:
            raise ConsistencyError(f"weak link {l} is not eligible")
        if mode == "component":
            log = _component_cascade(net, state, (i, j), InfoKind.WEAK_LINK_ACTIVATED,
                                     record, event.time)
        else:
            log = _agent_cascade(net, state, (i, j), InfoKind.WEAK_LINK_ACTIVATED,
                                 params.tau, event.time)
        state.dormant[l] = False
    elif kind is EventKind.TREMBLE:
        # the trembler plays the other action for an instant, sees both
        # payoffs, then best-responds from her intended action
        if mode == "component":
            log = _component_cascade(net, state, (event.target,), InfoKind.TREMBLE,
                                     record, event.time)
        else:
            log = _agent_cascade(net, state, (event.target,), InfoKind.TREMBLE,
                                 params.tau, event.time)
    elif kind is EventKind.LINK_RECOVERY:
        if state.dormant[event.target]:
            raise ConsistencyError(f"recovery of dormant link {event.target}")
        state.dormant[event.target] = True
    return state, snap, log


class _Uniforms:
    """Buffered uniform stream over a numpy Generator."""

    def __init__(self, gen: np.random.Generator, block: int = 8192):
        self.gen = gen
        self.block = block
        self.buf: list[float] = []
        self.pos = 0

    def random(self) -> float:
        if self.pos >= len(self.buf):
            self.buf = self.gen.random(self.block).tolist()
            self.pos = 0
        self.pos += 1
        return self.buf[self.pos - 1]


def _rle(actions: Sequence[int]) -> list[list[int]]:
    out: list[list[int]] = []
    for a in actions:
        if out and out[-1][0] == a:
            out[-1][1] += 1
        else:
            out.append([a, 1])
    return out


def trace_record(event: Event, state: WorldState) -> dict:
    return {"t": event.time, "kind": event.kind.value, "payload": event.target,
            "actions_after": _rle(state.actions), "better": state.better}


@dataclass
class InvariantMonitor:
    """Counts violations of the behavioral invariants along a run."""

    net: NetworkSpec
    tau: float
    events: int = 0
    violations: dict = field(default_factory=lambda: {
        "switch_without_info": 0, "component_uniformity": 0, "frozen_profile": 0,
        "lifecycle": 0, "eligibility": 0, "time_order": 0})
    activations: int = 0
    recoveries: int = 0
    scaled_gap_sum: float = 0.0

    def __post_init__(self):
        self.regime = classify_regime(self.net, self.tau)

    def check(self, before: WorldState, event: Event, after: WorldState,
              log: Sequence[InfoEvent]) -> None:
        v = self.violations
        self.events += 1
        if not event.time > before.t:
            v["time_order"] += 1
        if math.isfinite(event.total_rate):
            self.scaled_gap_sum += (event.time - before.t) * event.total_rate
        informed = {ev.agent for ev in log}
        for i, (a, b) in enumerate(zip(before.actions, after.actions)):
            if a != b and i not in informed:
                v["switch_without_info"] += 1
        if self.regime is Regime.COORDINATED:
            a = after.actions
            for members in self.net.components.members:
                if any(a[x] != a[members[0]] for x in members):
                    v["component_uniformity"] += 1
        elif self.regime is Regime.FROZEN and any(after.actions):
            v["frozen_profile"] += 1
        changed = [l for l, (x, y) in enumerate(zip(before.dormant, after.dormant)) if x != y]
        if event.kind is EventKind.WEAK_ACTIVATION:
            l = event.target
            i, j = self.net.weak_edges[l]
            if changed != [l] or not before.dormant[l]:
                v["lifecycle"] += 1
            if before.actions[i] == before.actions[j]:
                v["eligibility"] += 1
            self.activations += 1
        elif event.kind is EventKind.LINK_RECOVERY:
            if changed != [event.target] or before.dormant[event.target]:
                v["lifecycle"] += 1
            self.recoveries += 1
        elif changed:
            v["lifecycle"] += 1
        if self.activations - self.recoveries != len(after.dormant) - sum(after.dormant):
            v["lifecycle"] += 1

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())


def simulate(net: NetworkSpec, params: SimParams, epochs: int, rng=None, *,
             mode: str = "auto", on_snapshot: Callable[[EpochSnapshot], None] | None = None,
             on_event: Callable[[Event, WorldState], None] | None = None,
             monitor: InvariantMonitor | None = None, record: bool = False) -> WorldState:
    """Run the event loop until ``epochs`` payoff shocks have occurred."""
    if epochs <= 0:
        raise ValueError("epochs must be positive")
    gen = rng if rng is not None else np.random.default_rng(params.seed)
    stream = _Uniforms(gen) if isinstance(gen, np.random.Generator) else gen
    mode = resolve_mode(net, params.tau, mode)
    record = record or monitor is not None
    state = init_state(net, params, stream)
    while state.epoch_index < epochs:
        ev = next_event(state, net, params, stream)
        before = state.copy() if monitor is not None else None
        _, snap, log = apply_event(state, ev, net, params, mode, record)
        if monitor is not None:
            monitor.check(before, ev, state, log)
        if on_event is not None:
            on_event(ev, state)
        if snap is not None and on_snapshot is not None:
            on_snapshot(snap)
    return state


def run_epochs(net: NetworkSpec, params: SimParams, epochs: int, burn_in: int = 0,
               rng=None, *, mode: str = "auto", trace: TextIO | None = None,
               monitor: InvariantMonitor | None = None) -> list[EpochSnapshot]:
    """Snapshots of every payoff shock with index >= ``burn_in``."""
    if epochs <= 0:
        raise ValueError("epochs must be positive")
    if not 0 <= burn_in < epochs:
        raise ValueError("need 0 <= burn_in < epochs")
    snaps: list[EpochSnapshot] = []

    def keep(s: EpochSnapshot) -> None:
        if s.k >= burn_in:
            snaps.append(s)

    def write(ev: Event, st: WorldState) -> None:
        trace.write(json.dumps(trace_record(ev, st)) + "\n")

    simulate(net, params, epochs, rng, mode=mode, on_snapshot=keep,
             on_event=write if trace is not None else None, monitor=monitor)
    return snaps



def _fractions(net: NetworkSpec, params: SimParams, epochs: int, burn_in: int,
               seed: int, mode: str) -> np.ndarray:
    out = np.empty(epochs - burn_in)

    def keep(s: EpochSnapshot) -> None:
        if s.k >= burn_in:
            out[s.k - burn_in] = s.fraction_correct

    simulate(net, params, epochs, np.random.default_rng(seed), mode=mode, on_snapshot=keep)
    return out


def _replica(args) -> np.ndarray:
    return _fractions(*args)


def replica_seed(seed: int, replica: int) -> int:
    return int(seed) ^ int(replica)


def estimate_welfare(net: NetworkSpec, params: SimParams, epochs: int, burn_in: int = 0,
                     replicas: int = 1, *, workers: int = 1,
                     mode: str = "auto") -> WelfareEstimate:
    """Monte Carlo long-run welfare pooled over independently seeded replicas.

    Replica ``r`` is seeded with ``params.seed ^ r``. The standard error is
    taken across replica means; a single replica falls back to ten batch
    means.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if not 0 <= burn_in < epochs:
        raise ValueError("need 0 <= burn_in < epochs")
    mode = resolve_mode(net, params.tau, mode)
    jobs = [(net, params, epochs, burn_in, replica_seed(params.seed, r), mode)
            for r in range(replicas)]
    if workers > 1 and replicas > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_replica, jobs))
    else:
        runs = [_replica(j) for j in jobs]
    means = [float(r.mean()) for r in runs]
    batch_se, nb = None, None
    if replicas == 1:
        batches = np.array_split(runs[0], min(10, len(runs[0])))
        bm = np.array([b.mean() for b in batches if len(b)])
        nb = len(bm)
        batch_se = float(bm.std(ddof=1) / math.sqrt(nb)) if nb > 1 else math.nan
    return WelfareEstimate.from_replicas(means, epochs - burn_in, batch_se, nb)


SNAPSHOT_COLUMNS = ("k", "R", "fraction_correct", "dormant_count")


def write_snapshots_csv(snaps: Iterable[EpochSnapshot], fh: TextIO) -> None:
    w = csv.writer(fh)
    w.writerow(SNAPSHOT_COLUMNS)
    for s in snaps:
        w.writerow([s.k, s.R, repr(s.fraction_correct), len(s.B)])
