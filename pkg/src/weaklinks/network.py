"""Strong/weak link networks, strong components and benchmark topologies."""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import yaml

Pair = tuple[int, int]


class NetworkError(ValueError):
    """Base class for network validation failures."""


class SelfLoopError(NetworkError):
    pass


class EndpointRangeError(NetworkError):
    pass


class OverlapError(NetworkError):
    """A pair listed both as a strong and as a weak link."""


class DuplicateEdgeError(NetworkError):
    pass


class Regime(enum.Enum):
    COORDINATED = "coordinated"
    FROZEN = "frozen"
    INTERMEDIATE = "intermediate"


def _normalize(pairs: Iterable[Sequence[int]], n: int, kind: str) -> tuple[Pair, ...]:
    out = []
    seen = set()
    for p in pairs:
        if len(p) != 2:
            raise NetworkError(f"{kind} edge {p!r} is not a pair")
        i, j = int(p[0]), int(p[1])
        if i == j:
            raise SelfLoopError(f"{kind} edge ({i},{j}) is a self-loop")
        if not (0 <= i < n and 0 <= j < n):
            raise EndpointRangeError(f"{kind} edge ({i},{j}) outside [0, {n})")
        e = (i, j) if i < j else (j, i)
        if e in seen:
            raise DuplicateEdgeError(f"{kind} edge {e} listed twice")
        seen.add(e)
        out.append(e)
    return tuple(sorted(out))


@dataclass(frozen=True)
class NetworkSpec:
    """Undirected network with two edge classes.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j``. Degrees,
    neighborhoods and ``d_max``/``d_min`` refer to strong links only.
    """

    n: int
    strong_edges: tuple[Pair, ...] = ()
    weak_edges: tuple[Pair, ...] = ()
    labels: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.n) < 1:
            raise NetworkError(f"n must be positive, got {self.n}")
        strong = _normalize(self.strong_edges, self.n, "strong")
        weak = _normalize(self.weak_edges, self.n, "weak")
        both = set(strong) & set(weak)
        if both:
            raise OverlapError(f"pair in both edge sets: {sorted(both)}")
        if self.labels is not None and len(self.labels) != self.n:
            raise NetworkError("labels must have one entry per node")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "strong_edges", strong)
        object.__setattr__(self, "weak_edges", weak)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.strong_edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.neighbors)

    @property
    def d_max(self) -> int:
        return max(self.degrees)

    @property
    def d_min(self) -> int:
        return min(self.degrees)

    @cached_property
    def components(self) -> ComponentPartition:
        return strong_components(self)

    def to_dict(self) -> dict:
        d = {
            "n": self.n,
            "strong": [list(e) for e in self.strong_edges],
            "weak": [list(e) for e in self.weak_edges],
        }
        if self.labels is not None:
            d["labels"] = list(self.labels)
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ComponentPartition:
    """Partition of the agents by strong-link connectivity.

    Component ids are ordered by the lowest member index, so component 0
    always contains agent 0.
    """

    component_of: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]

    @property
    def count(self) -> int:
        return len(self.members)

    @property
    def sizes(self) -> list[int]:
        """Component sizes sorted descending."""
        return sorted((len(m) for m in self.members), reverse=True)

    @property
    def size_by_id(self) -> tuple[int, ...]:
        return tuple(len(m) for m in self.members)

    def largest(self) -> int:
        """Id of the largest component (lowest id among ties)."""
        sizes = self.size_by_id
        return max(range(len(sizes)), key=lambda c: (sizes[c], -c))


class _UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller index as root
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def build_network(n: int, strong: Iterable[Sequence[int]] = (),
                  weak: Iterable[Sequence[int]] = (),
                  labels: Sequence[str] | None = None) -> NetworkSpec:
    return NetworkSpec(n, tuple(map(tuple, strong)), tuple(map(tuple, weak)),
                       tuple(labels) if labels is not None else None)


def strong_components(net: NetworkSpec) -> ComponentPartition:
    uf = _UnionFind(net.n)
    for i, j in net.strong_edges:
        uf.union(i, j)
    ids: dict[int, int] = {}
    comp = []
    for v in range(net.n):
        r = uf.find(v)
        if r not in ids:
            ids[r] = len(ids)
        comp.append(ids[r])
    members: list[list[int]] = [[] for _ in ids]
    for v, c in enumerate(comp):
        members[c].append(v)
    return ComponentPartition(tuple(comp), tuple(tuple(m) for m in members))


def classify_regime(net: NetworkSpec, tau: float) -> Regime:
    """Coordinated iff tau <= 1/d_max, Frozen iff tau > 1/d_min.

    Comparisons are done as ``tau * d`` against 1 so that the boundary
    ``tau = 1/d`` is classified without division.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau * net.d_max <= 1.0:
        return Regime.COORDINATED
    if tau * net.d_min > 1.0:
        return Regime.FROZEN
    return Regime.INTERMEDIATE


def regime_boundary(net: NetworkSpec, tau: float) -> bool:
    """True when tau sits exactly on 1/d_max or 1/d_min."""
    return tau * net.d_max == 1.0 or (net.d_min > 0 and tau * net.d_min == 1.0)


# --- generators -----------------------------------------------------------

def gen_clique(n: int) -> NetworkSpec:
    strong = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return build_network(n, strong)


def gen_island(sizes: Sequence[int], weak_topology: Iterable[Sequence[int]] = (),
               endpoints: dict[int, int] | None = None) -> NetworkSpec:
    """Disjoint strong cliques joined by weak links.

    Island ``c`` occupies a contiguous block of node ids in the order given.
    Each weak_topology entry ``(a, b)`` adds one weak link between the
    representative nodes of islands ``a`` and ``b``; by default this is the
    lowest-index node of each island, ``endpoints`` overrides it per island.
    """
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise NetworkError("at least one island required")
    if any(s < 1 for s in sizes):
        raise NetworkError(f"island sizes must be positive: {sizes}")
    starts = []
    offset = 0
    strong = []
    for s in sizes:
        starts.append(offset)
        strong += [(offset + i, offset + j) for i in range(s) for j in range(i + 1, s)]
        offset += s
    rep = list(starts)
    for c, node in (endpoints or {}).items():
        if not starts[c] <= node < starts[c] + sizes[c]:
            raise NetworkError(f"endpoint {node} is not inside island {c}")
        rep[c] = node
    weak = []
    for a, b in weak_topology:
        if not (0 <= a < len(sizes) and 0 <= b < len(sizes)):
            raise NetworkError(f"weak link ({a},{b}) references a missing island")
        if a == b:
            raise NetworkError(f"weak self-link on island {a}")
        weak.append((rep[a], rep[b]))
    return build_network(offset, strong, weak)


def star_topology(k: int) -> list[Pair]:
    """Weak topology wiring island 0 to every other island."""
    return [(0, c) for c in range(1, k)]


def gen_star(n: int, m: int) -> NetworkSpec:
    """Core clique of ``n - m + 1`` nodes plus ``m - 1`` weakly attached leaves."""
    if not n > m >= 1:
        raise NetworkError(f"gen_star requires n > m >= 1, got n={n}, m={m}")
    sizes = [n - m + 1] + [1] * (m - 1)
    return gen_island(sizes, star_topology(m))


# --- file format ----------------------------------------------------------

_NETWORK_KEYS = {"n", "strong", "weak", "labels"}


def network_from_dict(d: dict) -> NetworkSpec:
    unknown = set(d) - _NETWORK_KEYS
    if unknown:
        raise NetworkError(f"unknown network keys: {sorted(unknown)}")
    if "n" not in d:
        raise NetworkError("network document needs 'n'")
    return build_network(d["n"], d.get("strong", []), d.get("weak", []), d.get("labels"))


def load_network(path: str | Path) -> NetworkSpec:
    """Read a network document (YAML or JSON, chosen by suffix)."""
    path = Path(path)
    text = path.read_text()
    d = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    return network_from_dict(d)


def save_network(net: NetworkSpec, path: str | Path) -> None:
    Path(path).write_text(net.canonical_json() + "\n")
