import io
import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weaklinks.engine import (ConsistencyError, Event, EventKind, InvariantMonitor, SimParams,
                              WorldState, apply_event, estimate_welfare, init_state, next_event,
                              run_epochs, simulate, write_snapshots_csv)
from weaklinks.equilibrium import InfoKind
from weaklinks.network import build_network, gen_clique, gen_island, gen_star
from weaklinks.welfare import bound_no_weak


def test_params_validation():
    with pytest.raises(ValueError):
        SimParams(lam=0)
    with pytest.raises(ValueError):
        SimParams(lam=1, gamma=-1)
    with pytest.raises(ValueError):
        SimParams(lam=1, beta=1.0)
    assert SimParams(lam=1).replace(epsilon=0.5).epsilon == 0.5


def test_init_state():
    net = gen_star(6, 3)
    p = SimParams(lam=1)
    s = init_state(net, p, np.random.default_rng(4))
    assert s.actions == [0] * 6
    assert s.dormant == [True, True]
    assert s == init_state(net, p, np.random.default_rng(4))


def test_only_shocks_without_other_clocks():
    net = gen_star(5, 2)
    p = SimParams(lam=1)
    rng = random.Random(0)
    s = init_state(net, p, rng)
    for _ in range(200):
        assert next_event(s, net, p, rng).kind is EventKind.PAYOFF_SHOCK


def test_exponential_race_mean_gap():
    net = gen_clique(2)
    p = SimParams(lam=1, epsilon=1)
    rng = random.Random(11)
    s = init_state(net, p, rng)
    gaps = [next_event(s, net, p, rng).time for _ in range(200_000)]
    assert abs(np.mean(gaps) - 0.5) < 0.005


def test_null_activation_when_all_agree():
    net = gen_island([2, 2], [(0, 1)])
    p = SimParams(lam=1e-9, gamma=1.0)
    rng = random.Random(3)
    s = init_state(net, p, rng)
    kinds = {next_event(s, net, p, rng).kind for _ in range(100)}
    assert kinds == {EventKind.NULL_ACTIVATION}


def _state(actions, better, dormant):
    return WorldState(0.0, list(actions), better, list(dormant), 0, sum(actions))


@pytest.mark.parametrize("mode", ["agent", "component"])
def test_tremble_toward_better_flips_component(mode):
    net = gen_clique(4)
    s = _state([0] * 4, 1, [])
    _, snap, log = apply_event(s, Event(1.0, EventKind.TREMBLE, 2), net, SimParams(lam=1), mode)
    assert s.actions == [1] * 4 and snap is None
    assert log[0].agent == 2 and log[0].kind is InfoKind.TREMBLE


@pytest.mark.parametrize("mode", ["agent", "component"])
def test_tremble_away_reverts(mode):
    net = gen_clique(4)
    s = _state([1] * 4, 1, [])
    apply_event(s, Event(1.0, EventKind.TREMBLE, 2), net, SimParams(lam=1), mode)
    assert s.actions == [1] * 4


@pytest.mark.parametrize("mode", ["agent", "component"])
def test_weak_activation_flips_core(mode):
    net = gen_star(6, 2)
    s = _state([0] * 5 + [1], 1, [True])
    apply_event(s, Event(1.0, EventKind.WEAK_ACTIVATION, 0), net, SimParams(lam=1), mode)
    assert s.actions == [1] * 6
    assert s.dormant == [False]


def test_consistency_errors():
    net = gen_star(4, 2)
    p = SimParams(lam=1)
    s = _state([0] * 4, 1, [True])
    with pytest.raises(ConsistencyError):
        apply_event(s, Event(1.0, EventKind.WEAK_ACTIVATION, 0), net, p)
    with pytest.raises(ConsistencyError):
        apply_event(s, Event(1.0, EventKind.LINK_RECOVERY, 0), net, p)
    s.t = 2.0
    with pytest.raises(ConsistencyError):
        apply_event(s, Event(1.5, EventKind.PAYOFF_SHOCK, 0), net, p)


def test_shock_snapshot_uses_ending_epoch():
    net = gen_clique(2)
    s = _state([1, 1], 1, [])
    _, snap, _ = apply_event(s, Event(1.0, EventKind.PAYOFF_SHOCK, 0), net, SimParams(lam=1))
    assert snap.R == 1 and snap.fraction_correct == 1.0 and snap.k == 0
    assert s.better == 0 and s.epoch_index == 1


def test_run_epochs_single():
    snaps = run_epochs(gen_clique(3), SimParams(lam=1, epsilon=1), 1, 0, np.random.default_rng(0))
    assert len(snaps) == 1


def test_no_channels_never_move():
    snaps = run_epochs(gen_star(6, 3), SimParams(lam=1, phi=1), 2000, 0,
                       np.random.default_rng(5))
    assert all(s.P == (0,) * 6 for s in snaps)


def test_seed_determinism_and_trace():
    net = gen_star(6, 3)
    p = SimParams(lam=1, gamma=2, phi=1, epsilon=0.3)
    outs = []
    for _ in range(2):
        trace, csvbuf = io.StringIO(), io.StringIO()
        snaps = run_epochs(net, p, 500, 0, np.random.default_rng(9), trace=trace)
        write_snapshots_csv(snaps, csvbuf)
        outs.append((trace.getvalue(), csvbuf.getvalue()))
    assert outs[0] == outs[1]
    first = json.loads(outs[0][0].splitlines()[0])
    assert set(first) == {"t", "kind", "payload", "actions_after", "better"}
    assert outs[0][1].splitlines()[0] == "k,R,fraction_correct,dormant_count"


def test_component_and_agent_modes_agree():
    # same uniform stream, same events, same snapshots in the coordinated regime
    net = gen_island([3, 2, 1], [(0, 1), (1, 2), (0, 2)])
    p = SimParams(lam=1, gamma=3, phi=0.7, epsilon=0.4, tau=0.1)
    a = run_epochs(net, p, 3000, 0, np.random.default_rng(2), mode="agent")
    b = run_epochs(net, p, 3000, 0, np.random.default_rng(2), mode="component")
    assert a == b


def test_component_mode_rejected_outside_coordinated():
    with pytest.raises(ValueError):
        run_epochs(gen_clique(4), SimParams(lam=1, tau=0.5), 10, mode="component")


def test_frozen_estimate_half():
    est = estimate_welfare(gen_clique(4), SimParams(lam=1, epsilon=0.5, tau=0.5, seed=3),
                           20_000, replicas=4)
    assert est.contains(0.5, 0.99)


def test_no_weak_clique_estimate():
    est = estimate_welfare(gen_clique(3), SimParams(lam=1, epsilon=0.1, seed=8), 20_000,
                           replicas=4)
    assert est.contains(bound_no_weak(1, 0.1), 0.99)


def test_no_learning_estimate_half():
    est = estimate_welfare(gen_star(5, 2), SimParams(lam=1, phi=1, seed=12), 20_000, replicas=4)
    assert est.contains(0.5, 0.99)


def test_parallel_matches_serial():
    net, p = gen_star(5, 2), SimParams(lam=1, gamma=1, phi=1, epsilon=0.2, seed=5)
    a = estimate_welfare(net, p, 2000, replicas=2, workers=1)
    b = estimate_welfare(net, p, 2000, replicas=2, workers=2)
    assert a == b and a.replica_means == b.replica_means


@st.composite
def random_setup(draw):
    n = draw(st.integers(1, 6))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    split = draw(st.integers(0, len(chosen)))
    net = build_network(n, chosen[:split], chosen[split:])
    rates = st.floats(0.0, 3.0)
    p = SimParams(lam=draw(st.floats(0.2, 2.0)), gamma=draw(rates), phi=draw(rates),
                  epsilon=draw(rates), tau=draw(st.sampled_from([0.0, 0.2, 0.4, 0.6, 1.2])))
    return net, p, draw(st.integers(0, 2**32))


@settings(max_examples=40, deadline=None)
@given(random_setup())
def test_invariants_hold(setup):
    net, p, seed = setup
    mon = InvariantMonitor(net, p.tau)
    simulate(net, p, 200, np.random.default_rng(seed), mode="agent", monitor=mon)
    assert mon.total_violations == 0, mon.violations
