"""Myopic best responses, information cascades and belief tracking.

All information arrivals are fully revealing: an informed agent knows which
action currently has the higher material reward, and the reward gap is 1.
An agent's choice then reduces to comparing ``1 + tau * (other - same)``
with zero, where ``same``/``other`` count strong neighbors playing her
current action and the revealed better action.
"""

from __future__ import annotations

import enum
import json
import math
from collections import deque
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence, TextIO

from .network import NetworkSpec, Regime, build_network, classify_regime


class InfoKind(enum.Enum):
    WEAK_LINK_ACTIVATED = "weak_link_activated"
    NEIGHBOR_DISAGREES = "neighbor_disagrees"
    TREMBLE = "tremble"


@dataclass(frozen=True)
class InfoEvent:
    agent: int
    kind: InfoKind
    revealed_best: int
    action_before: int
    action_after: int
    time: float = 0.0

    def to_record(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass(frozen=True)
class BeliefState:
    """Belief that action 1 is better, with the last arrival time and value."""

    mu: float = 0.5
    last_info_time: float = 0.0
    mu_at_last_info: float = 0.5

    def observe(self, t: float, revealed_best: int) -> BeliefState:
        mu = float(revealed_best)
        return BeliefState(mu, t, mu)


def best_response(current: int, revealed_best: int, same_count: int,
                  other_count: int, tau: float) -> int:
    """Action chosen by an agent who has just learned ``revealed_best``.

    Ties go to ``revealed_best``.
    """
    if current == revealed_best:
        return current
    if 1.0 + tau * (other_count - same_count) >= 0.0:
        return revealed_best
    return current


def utility(action: int, better: int, same_neighbors: int, tau: float) -> float:
    """Material reward (gap normalised to 1) plus the coordination payoff."""
    return float(action == better) + tau * same_neighbors


def cascade(net: NetworkSpec, actions: Sequence[int], seeds: Iterable[int],
            revealed_best: int, tau: float,
            seed_kind: InfoKind = InfoKind.WEAK_LINK_ACTIVATED,
            time: float = 0.0) -> tuple[list[int], list[InfoEvent]]:
    """Propagate best responses from informed seeds along strong links.

    Agents are processed FIFO starting from ``sorted(seeds)``. A processed
    agent best-responds given the current profile; if she is a seed or has
    just switched, every strong neighbor now playing a different action
    observes her, learns ``revealed_best`` and is queued. Returns the fixed
    point profile and the ordered log of information arrivals.
    """
    profile = list(actions)
    nbrs = net.neighbors
    queue = deque((s, seed_kind) for s in sorted(set(seeds)))
    switched = set()
    log: list[InfoEvent] = []
    while queue:
        i, kind = queue.popleft()
        a = profile[i]
        same = 0
        for j in nbrs[i]:
            if profile[j] == a:
                same += 1
        new = best_response(a, revealed_best, same, len(nbrs[i]) - same, tau)
        log.append(InfoEvent(i, kind, revealed_best, a, new, time))
        if new != a:
            if i in switched:
                raise AssertionError(f"agent {i} switched twice in one cascade")
            switched.add(i)
            profile[i] = new
        if new != a or kind is not InfoKind.NEIGHBOR_DISAGREES:
            for j in nbrs[i]:
                if profile[j] != new:
                    queue.append((j, InfoKind.NEIGHBOR_DISAGREES))
    return profile, log


def update_belief(b: BeliefState, t: float, lam: float) -> float:
    """Belief at time ``t`` given no arrival since ``b.last_info_time``.

    With probability ``exp(-lam * dt)`` no payoff shock has happened and the
    last revealed value still holds; otherwise both actions are equally
    likely.
    """
    if t < b.last_info_time:
        raise ValueError(f"t={t} precedes last information time {b.last_info_time}")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    w = math.exp(-lam * (t - b.last_info_time))
    return 0.5 + w * (b.mu_at_last_info - 0.5)


def verify_equilibrium(net: NetworkSpec, actions: Sequence[int],
                       knowledge: Sequence[int | None], tau: float,
                       tol: float = 1e-12) -> bool:
    """Check that no agent gains strictly from a unilateral switch.

    ``knowledge[i]`` is the better action agent ``i`` has learned, or None
    if she is uninformed (belief 1/2, so only the network term matters).
    """
    for i, a in enumerate(actions):
        same = sum(1 for j in net.neighbors[i] if actions[j] == a)
        other = net.degrees[i] - same
        r = knowledge[i]
        if r is None:
            gain = tau * (other - same)
        else:
            gain = utility(1 - a, r, other, tau) - utility(a, r, same, tau)
        if gain > tol:
            return False
    return True


def informed_by_disagreement(net: NetworkSpec, actions: Sequence[int],
                             better: int) -> list[int | None]:
    """Agents with a disagreeing strong neighbor know ``better``; others do not."""
    return [better if any(actions[j] != actions[i] for j in net.neighbors[i]) else None
            for i in range(net.n)]


def find_split_equilibrium(tau: float = 0.4, max_clique: int = 6):
    """Search two cliques joined by one bridge for a split-action equilibrium.

    The left clique plays the better action (1), the right clique plays 0.
    Returns ``(net, actions, knowledge)`` for the smallest graph that is
    strongly connected, lies in the intermediate regime at ``tau`` and
    passes :func:`verify_equilibrium`, or None.
    """
    candidates = sorted(((a, b) for a in range(1, max_clique + 1)
                         for b in range(1, max_clique + 1)), key=lambda ab: (sum(ab), ab))
    for a, b in candidates:
        strong = [(i, j) for i in range(a) for j in range(i + 1, a)]
        strong += [(a + i, a + j) for i in range(b) for j in range(i + 1, b)]
        strong.append((0, a))
        net = build_network(a + b, strong)
        if classify_regime(net, tau) is not Regime.INTERMEDIATE:
            continue
        actions = [1] * a + [0] * b
        knowledge = informed_by_disagreement(net, actions, 1)
        if verify_equilibrium(net, actions, knowledge, tau):
            return net, actions, knowledge
    return None


def write_info_log(events: Iterable[InfoEvent], fh: TextIO) -> None:
    for ev in events:
        fh.write(json.dumps(ev.to_record()) + "\n")
