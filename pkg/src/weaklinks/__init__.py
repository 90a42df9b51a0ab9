"""Learning on networks with strong and weak links.

Agents on a network choose between two actions whose relative payoff is
redrawn at random times. Strong links carry a coordination payoff and full
information; weak links only occasionally pass on what the other side knows.
The package simulates these dynamics, solves small instances exactly through
the chain sampled at payoff shocks, and evaluates closed-form welfare bounds.
"""

__version__ = "0.1.0"

from .network import (NetworkSpec, ComponentPartition, Regime, build_network,
                      classify_regime, gen_clique, gen_island, gen_star, load_network,
                      save_network, strong_components)
from .equilibrium import (BeliefState, InfoEvent, InfoKind, best_response, cascade,
                          update_belief, verify_equilibrium)
from .engine import SimParams, estimate_welfare, run_epochs, simulate
from .amc import build_model, conformal_prob, exact_welfare
from .welfare import (Method, WelfareEstimate, bound_discount, bound_island,
                      bound_no_weak)
from .compare import compare_networks, two_node_comparison, sweep_star_scaling

__all__ = [
    "NetworkSpec", "ComponentPartition", "Regime", "build_network", "classify_regime",
    "gen_clique", "gen_island", "gen_star", "load_network", "save_network",
    "strong_components", "BeliefState", "InfoEvent", "InfoKind", "best_response", "cascade",
    "update_belief", "verify_equilibrium", "SimParams", "estimate_welfare", "run_epochs",
    "simulate", "build_model", "conformal_prob", "exact_welfare", "Method", "WelfareEstimate",
    "bound_discount", "bound_island", "bound_no_weak", "compare_networks",
    "two_node_comparison", "sweep_star_scaling",
]
