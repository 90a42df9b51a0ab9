import json

import pytest
from hypothesis import given, settings, strategies as st

from weaklinks.network import (DuplicateEdgeError, EndpointRangeError, OverlapError, Regime,
                               SelfLoopError, build_network, classify_regime, gen_clique,
                               gen_island, gen_star, load_network, network_from_dict,
                               regime_boundary, save_network, strong_components)


def test_two_node_strong_pair():
    net = build_network(2, [(0, 1)])
    assert net.degrees == (1, 1)
    assert strong_components(net).sizes == [2]


def test_singleton():
    net = build_network(1)
    assert net.d_max == 0 and net.d_min == 0
    assert gen_clique(1).n == 1


def test_rejects_pair_in_both_sets():
    with pytest.raises(OverlapError):
        build_network(3, [(0, 1)], [(1, 0)])


@pytest.mark.parametrize("strong, err", [
    ([(1, 1)], SelfLoopError),
    ([(0, 3)], EndpointRangeError),
    ([(-1, 0)], EndpointRangeError),
    ([(0, 1), (1, 0)], DuplicateEdgeError),
])
def test_validation(strong, err):
    with pytest.raises(err):
        build_network(3, strong)


def test_star_components():
    net = gen_star(8, 3)
    assert strong_components(net).sizes == [6, 1, 1]
    assert net.weak_edges == ((0, 6), (0, 7))
    core = [i for i in range(6)]
    assert all(j in net.neighbors[i] for i in core for j in core if i != j)
    assert net.neighbors[6] == () and net.neighbors[7] == ()


def test_no_edges_singletons():
    assert strong_components(build_network(4)).sizes == [1, 1, 1, 1]


def test_island_example_shape():
    net = gen_island([2, 2], [(0, 1)])
    assert net.strong_edges == ((0, 1), (2, 3))
    assert net.weak_edges == ((0, 2),)


def test_island_explicit_endpoints():
    net = gen_island([2, 2], [(0, 1)], endpoints={0: 1, 1: 3})
    assert net.weak_edges == ((1, 3),)


def test_component_ids_by_lowest_member():
    net = build_network(5, [(3, 4), (1, 2)])
    parts = strong_components(net)
    assert parts.component_of == (0, 1, 1, 2, 2)
    assert parts.largest() == 1


@pytest.mark.parametrize("tau, regime", [(0.2, Regime.COORDINATED), (0.25, Regime.COORDINATED),
                                         (0.3, Regime.FROZEN)])
def test_regime_clique5(tau, regime):
    assert classify_regime(gen_clique(5), tau) is regime


def test_boundary_flag():
    assert regime_boundary(gen_clique(5), 0.25)
    assert not regime_boundary(gen_clique(5), 0.2)


def test_intermediate_bridge_graph():
    # two cliques and a bridge: d_min = 1 (K2 end), d_max = 5
    strong = [(0, 1)] + [(i, j) for i in range(2, 7) for j in range(i + 1, 7)] + [(0, 2)]
    net = build_network(7, strong)
    assert classify_regime(net, 0.4) is Regime.INTERMEDIATE


def test_roundtrip_json_yaml(tmp_path):
    net = gen_star(6, 3)
    save_network(net, tmp_path / "n.json")
    assert load_network(tmp_path / "n.json") == net
    (tmp_path / "n.yaml").write_text("n: 3\nstrong: [[0, 1]]\nweak: [[1, 2]]\n")
    y = load_network(tmp_path / "n.yaml")
    assert y.strong_edges == ((0, 1),) and y.weak_edges == ((1, 2),)
    assert json.loads(net.canonical_json())["n"] == 6


def test_star_needs_a_core_larger_than_leaves():
    with pytest.raises(ValueError):
        gen_star(3, 3)


def test_unknown_network_key():
    with pytest.raises(ValueError):
        network_from_dict({"n": 2, "strng": []})


def test_digest_stable_under_edge_order():
    a = build_network(4, [(0, 1), (2, 3)], [(1, 2)])
    b = build_network(4, [(3, 2), (1, 0)], [(2, 1)])
    assert a.digest() == b.digest()


sizes_st = st.lists(st.integers(1, 5), min_size=1, max_size=5).map(
    lambda s: sorted(s, reverse=True))


@given(sizes_st, st.data())
def test_island_components_match_sizes(sizes, data):
    k = len(sizes)
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    topo = data.draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    net = gen_island(sizes, topo)
    assert strong_components(net).sizes == sizes
    assert len(net.weak_edges) == len(topo)


@given(st.integers(2, 40), st.data())
def test_star_shape(n, data):
    m = data.draw(st.integers(1, n - 1))
    net = gen_star(n, m)
    parts = net.components
    assert parts.count == m
    assert len(net.weak_edges) == m - 1
    assert parts.sizes[0] == n - m + 1


@st.composite
def random_net(draw):
    n = draw(st.integers(1, 8))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    split = draw(st.integers(0, len(chosen)))
    return n, chosen[:split], chosen[split:]


@given(random_net(), st.floats(0, 2), st.floats(0, 2))
def test_regime_monotone_in_tau(spec, t1, t2):
    net = build_network(*spec)
    lo, hi = sorted((t1, t2))
    if classify_regime(net, lo) is Regime.FROZEN:
        assert classify_regime(net, hi) is Regime.FROZEN
    if classify_regime(net, hi) is Regime.COORDINATED:
        assert classify_regime(net, lo) is Regime.COORDINATED


@given(random_net())
def test_components_ignore_weak_edges(spec):
    n, strong, weak = spec
    assert strong_components(build_network(n, strong, weak)) == \
        strong_components(build_network(n, strong))


@settings(max_examples=50)
@given(random_net())
def test_components_are_strong_paths(spec):
    net = build_network(*spec)
    parts = net.components
    assert sum(parts.sizes) == net.n
    # same id iff reachable over strong edges
    for s in range(net.n):
        seen, stack = {s}, [s]
        while stack:
            u = stack.pop()
            for v in net.neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        for t in range(net.n):
            assert (t in seen) == (parts.component_of[s] == parts.component_of[t])
