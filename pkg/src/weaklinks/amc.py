"""Exact analysis through the chain embedded at payoff shocks.

A state is ``(P, R, B)``: the action of every strong component, the better
action of the epoch that just ended, and the set of dormant weak links.
Within an epoch with better action ``R`` the pair ``(P, B)`` evolves as a
continuous-time chain with generator ``Q_R``; the shock arrives after an
independent exponential(lam) time, so the one-epoch transition matrix is the
resolvent ``lam (lam I - Q_R)^{-1}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .engine import SimParams
from .network import NetworkSpec, Regime, classify_regime

DEFAULT_CAP = 2**12


class AmcError(RuntimeError):
    pass


class CapacityError(AmcError):
    pass


class UnsupportedRegimeError(AmcError):
    pass


class StructureError(AmcError):
    """Kernel is reducible or periodic where it must not be."""


class SolverError(AmcError):
    pass


@dataclass(frozen=True)
class AmcState:
    P: tuple[int, ...]   # action per strong component
    R: int
    B: frozenset[int]    # dormant weak links

    def agent_profile(self, component_of: Sequence[int]) -> tuple[int, ...]:
        return tuple(self.P[c] for c in component_of)


@dataclass
class _Layout:
    """Integer encoding: index = ((p * 2) + R) * 2**w + b."""

    regime: Regime
    n_comp: int
    n_weak: int
    sizes: tuple[int, ...]
    link_comps: tuple[tuple[int, int], ...]

    @property
    def n_p(self) -> int:
        return 2**self.n_comp if self.regime is Regime.COORDINATED else 1

    @property
    def n_b(self) -> int:
        return 2**self.n_weak

    @property
    def n_intra(self) -> int:
        return self.n_p * self.n_b

    @property
    def n_states(self) -> int:
        return self.n_p * 2 * self.n_b

    def index(self, p: int, R: int, b: int) -> int:
        return ((p * 2) + R) * self.n_b + b

    def decode(self, idx: int) -> tuple[int, int, int]:
        pr, b = divmod(idx, self.n_b)
        p, R = divmod(pr, 2)
        return p, R, b


def _layout(net: NetworkSpec, tau: float, cap: int) -> _Layout:
    regime = classify_regime(net, tau)
    if regime is Regime.INTERMEDIATE:
        raise UnsupportedRegimeError(
            "intermediate regime cascades are order dependent; no exact chain")
    parts = net.components
    lay = _Layout(regime, parts.count, len(net.weak_edges), parts.size_by_id,
                  tuple((parts.component_of[i], parts.component_of[j])
                        for i, j in net.weak_edges))
    if lay.n_states > cap:
        raise CapacityError(
            f"{lay.n_states} states ({parts.count} components, {lay.n_weak} weak links) "
            f"exceed the cap of {cap}")
    return lay


def _p_bits(lay: _Layout, p: int) -> tuple[int, ...]:
    if lay.regime is Regime.FROZEN:
        return (0,) * lay.n_comp
    return tuple((p >> c) & 1 for c in range(lay.n_comp))


def enumerate_states(net: NetworkSpec, tau: float, cap: int = DEFAULT_CAP) -> list[AmcState]:
    """All ``(P, R, B)`` states in canonical index order."""
    lay = _layout(net, tau, cap)
    out = []
    for idx in range(lay.n_states):
        p, R, b = lay.decode(idx)
        out.append(AmcState(_p_bits(lay, p), R,
                            frozenset(l for l in range(lay.n_weak) if (b >> l) & 1)))
    return out


def _transitions(lay: _Layout, params: SimParams, R: int, p: int, b: int, n: int):
    """Yield ``(target_intra_index, rate)`` for one intra-epoch state."""
    if lay.regime is Regime.COORDINATED:
        bits = [(p >> c) & 1 for c in range(lay.n_comp)]
        if params.epsilon > 0:
            for c in range(lay.n_comp):
                if bits[c] != R:
                    yield (p ^ (1 << c)) * lay.n_b + b, params.epsilon * lay.sizes[c] / n
        if params.gamma > 0:
            elig = [l for l, (ci, cj) in enumerate(lay.link_comps)
                    if (b >> l) & 1 and bits[ci] != bits[cj]]
            for l in elig:
                ci, cj = lay.link_comps[l]
                lag = ci if bits[ci] != R else cj
                yield (p ^ (1 << lag)) * lay.n_b + (b & ~(1 << l)), params.gamma / len(elig)
    # in the frozen regime nobody ever disagrees, so only recoveries remain
    if params.phi > 0:
        for l in range(lay.n_weak):
            if not (b >> l) & 1:
                yield p * lay.n_b + (b | (1 << l)), params.phi


def intra_epoch_generator(net: NetworkSpec, params: SimParams, R: int,
                          cap: int = DEFAULT_CAP) -> np.ndarray:
    """Rate matrix over intra-epoch states ``p * 2**w + b`` for better action R.

    Trembles that are immediately undone are left out (they would only add
    to the diagonal). The payoff shock is not part of the generator.
    """
    lay = _layout(net, params.tau, cap)
    return _generator(lay, params, R, net.n)


def _generator(lay: _Layout, params: SimParams, R: int, n: int) -> np.ndarray:
    Q = np.zeros((lay.n_intra, lay.n_intra))
    for p in range(lay.n_p):
        for b in range(lay.n_b):
            s = p * lay.n_b + b
            for tgt, rate in _transitions(lay, params, R, p, b, n):
                Q[s, tgt] += rate
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


def epoch_kernel(Q: np.ndarray, lam: float, tol: float = 1e-12) -> np.ndarray:
    """Distribution of the intra-epoch state at an exponential(lam) shock time."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    m = Q.shape[0]
    A = lam * np.eye(m) - Q
    lu = linalg.lu_factor(A, check_finite=True)
    E = linalg.lu_solve(lu, lam * np.eye(m))
    resid = float(np.abs(A @ E - lam * np.eye(m)).max())
    if not np.isfinite(resid) or resid > 1e-8 * max(1.0, float(np.abs(A).max())):
        raise SolverError(f"resolvent solve residual {resid:.3e}")
    E[E < 0] = 0.0  # round-off only; the exact resolvent is non-negative
    E /= E.sum(axis=1, keepdims=True)
    if np.abs(E.sum(axis=1) - 1).max() > tol:
        raise SolverError("epoch kernel rows do not sum to one")
    return E


def _check_stochastic(K: np.ndarray, tol: float = 1e-9) -> None:
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("kernel must be square")
    if (K < -tol).any() or np.abs(K.sum(axis=1) - 1).max() > tol:
        raise ValueError("kernel is not row-stochastic")


def is_irreducible(K: np.ndarray) -> bool:
    ncomp, _ = connected_components(csr_matrix(K > 0), directed=True, connection="strong")
    return ncomp == 1


def stationary(K: np.ndarray, method: str = "direct", tol: float = 1e-10) -> np.ndarray:
    """Unique stationary distribution of an irreducible, aperiodic kernel.

    The direct method solves ``(K^T - I) eta = 0`` with one equation replaced
    by the normalisation; power iteration is used when asked for, or when
    the direct residual exceeds ``tol``.
    """
    K = np.asarray(K, dtype=float)
    _check_stochastic(K)
    if not is_irreducible(K):
        raise StructureError("kernel is reducible")
    if not (np.diag(K) > 0).all():
        raise StructureError("kernel has a zero diagonal entry; aperiodicity unchecked")
    m = K.shape[0]
    eta = None
    if method == "direct":
        A = K.T - np.eye(m)
        A[-1, :] = 1.0
        rhs = np.zeros(m)
        rhs[-1] = 1.0
        eta = linalg.solve(A, rhs)
        eta[eta < 0] = 0.0
        eta /= eta.sum()
        if np.abs(eta @ K - eta).max() > tol:
            eta = None
    if eta is None:
        eta = np.full(m, 1.0 / m)
        for _ in range(10_000_000):
            nxt = eta @ K
            if np.abs(nxt - eta).max() <= 1e-12 * 1e-2:
                eta = nxt
                break
            eta = nxt
        else:
            raise SolverError("power iteration did not converge")
        eta /= eta.sum()
    resid = float(np.abs(eta @ K - eta).max())
    if resid > tol:
        raise SolverError(f"stationarity residual {resid:.3e} above {tol}")
    return eta


@dataclass
class AmcModel:
    net: NetworkSpec
    params: SimParams
    regime: Regime
    states: list[AmcState]
    kernel: np.ndarray
    recurrent: np.ndarray | None = None
    eta: np.ndarray | None = None
    welfare: float | None = None
    p_raw: float | None = None
    p_conditional: float | None = None
    dk: np.ndarray | None = field(default=None)

    @property
    def p_conformal(self) -> float | None:
        return self.p_conditional

    def fractions(self) -> np.ndarray:
        """Fraction of agents playing R in each state."""
        sizes = np.array(self.net.components.size_by_id)
        return np.array([sizes[np.array(s.P) == s.R].sum() for s in self.states]) / self.net.n

    def diverse_mask(self) -> np.ndarray:
        return np.array([0 < sum(s.P) < len(s.P) for s in self.states])

    def conformal_mask(self) -> np.ndarray:
        return np.array([all(a == s.R for a in s.P) for s in self.states])

    def correct_components(self) -> np.ndarray:
        return np.array([sum(a == s.R for a in s.P) for s in self.states])

    def eta_core_good(self) -> float:
        core = self.net.components.largest()
        mask = np.array([s.P[core] == s.R for s in self.states])
        return float(self.eta[mask].sum())

    def to_dict(self) -> dict:
        return {
            "states": [{"P": list(s.P), "R": s.R, "B": sorted(s.B)} for s in self.states],
            "kernel": self.kernel.tolist(),
            "eta": None if self.eta is None else self.eta.tolist(),
            "welfare": self.welfare,
            "p_conformal": self.p_conditional,
            "p_raw": self.p_raw,
            "dk": None if self.dk is None else self.dk.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def amc_kernel(net: NetworkSpec, params: SimParams, cap: int = DEFAULT_CAP) -> AmcModel:
    """Model with the shock-to-shock kernel filled in.

    ``K[(P, R, B) -> (P', R', B')] = 1/2 * E_{R'}[(P, B) -> (P', B')]``.
    """
    lay = _layout(net, params.tau, cap)
    nb, npp = lay.n_b, lay.n_p
    K = np.zeros((npp, 2, nb, npp, 2, nb))
    for R in (0, 1):
        E = epoch_kernel(_generator(lay, params, R, net.n), params.lam)
        E = E.reshape(npp, nb, npp, nb)
        for Rm in (0, 1):
            K[:, Rm, :, :, R, :] = 0.5 * E
    K = K.reshape(lay.n_states, lay.n_states)
    return AmcModel(net, params, lay.regime, enumerate_states(net, params.tau, cap), K)


def recurrent_class(net: NetworkSpec, params: SimParams, cap: int = DEFAULT_CAP) -> np.ndarray:
    """State indices of the closed class reached from the initial condition.

    The run starts with every agent on action 0 and every weak link dormant.
    Any single intra-epoch move can happen within one epoch under either
    better action, so reachability is computed on the union of both
    generators' transition graphs.
    """
    lay = _layout(net, params.tau, cap)
    rows, cols = [], []
    for R in (0, 1):
        for p in range(lay.n_p):
            for b in range(lay.n_b):
                for tgt, rate in _transitions(lay, params, R, p, b, net.n):
                    if rate > 0:
                        rows.append(p * lay.n_b + b)
                        cols.append(tgt)
    G = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(lay.n_intra, lay.n_intra))
    start = lay.n_b - 1  # p = 0, every link dormant
    reach = breadth_first_order(G, start, directed=True, return_predecessors=False)
    sub = G[reach][:, reach]
    ncomp, labels = connected_components(sub, directed=True, connection="strong")
    closed = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        out = sub[members].tocoo().col
        if np.all(labels[out] == c):
            closed.append(members)
    if len(closed) != 1:
        raise StructureError(f"{len(closed)} closed classes reachable from the start state")
    intra = np.sort(reach[closed[0]])
    p, b = np.divmod(intra, lay.n_b)
    idx = np.concatenate([((p * 2) + R) * lay.n_b + b for R in (0, 1)])
    return np.sort(idx)


def solve(model: AmcModel) -> AmcModel:
    """Stationary distribution on the recurrent class plus derived quantities."""
    rec = recurrent_class(model.net, model.params, cap=len(model.states))
    sub = model.kernel[np.ix_(rec, rec)]
    leak = float(np.abs(sub.sum(axis=1) - 1).max())
    if leak > 1e-9:
        raise StructureError(f"recurrent class leaks probability {leak:.3e}")
    sub = sub / sub.sum(axis=1, keepdims=True)
    eta = np.zeros(len(model.states))
    eta[rec] = stationary(sub)
    m = replace(model, recurrent=rec, eta=eta)
    m.welfare = exact_welfare(m)
    m.p_raw, m.p_conditional = conformal_prob(m)
    m.dk = components_correct_distribution(m)
    return m


def build_model(net: NetworkSpec, params: SimParams, cap: int = DEFAULT_CAP) -> AmcModel:
    return solve(amc_kernel(net, params, cap))


def exact_welfare(model: AmcModel) -> float:
    return float(model.eta @ model.fractions())


def conformal_prob(model: AmcModel) -> tuple[float | None, float | None]:
    """``(p_raw, p_conditional)``; both None when the diverse set carries no mass.

    ``p_raw`` sums ``P(C | s) eta_s`` over diverse states ``s``;
    ``p_conditional`` divides it by the stationary mass of the diverse set.
    """
    D = model.diverse_mask()
    mass = float(model.eta[D].sum())
    if not D.any() or mass <= 0.0:
        return None, None
    to_conformal = model.kernel[:, model.conformal_mask()].sum(axis=1)
    raw = float((to_conformal[D] * model.eta[D]).sum())
    return raw, raw / mass


def components_correct_distribution(model: AmcModel) -> np.ndarray:
    """Stationary probability that exactly k components play the better action."""
    k = model.correct_components()
    return np.bincount(k, weights=model.eta, minlength=len(model.states[0].P) + 1)
