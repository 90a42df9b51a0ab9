"""Beliefs between information arrivals, and a split equilibrium.

After a fully revealing arrival the belief decays back toward 1/2 at rate
lam but never crosses it, so nobody switches until new information comes.
When neighbors are heterogeneous in degree, coordination can hold a group
on the worse action even though one member knows better.
"""
import math

from weaklinks import BeliefState, update_belief, verify_equilibrium
from weaklinks.equilibrium import find_split_equilibrium

b = BeliefState().observe(0.0, 1)
for t in (0.0, 0.5, math.log(2), 2.0, 5.0, 20.0):
    print(f"t={t:5.2f}  mu={update_belief(b, t, 1.0):.6f}")

net, actions, knowledge = find_split_equilibrium(tau=0.4)
print("\nstrong edges:", net.strong_edges)
print("actions:     ", actions)
print("knows better:", knowledge)
print("equilibrium: ", verify_equilibrium(net, actions, knowledge, 0.4))
print("degrees:     ", net.degrees, "-> regime thresholds", 1 / net.d_max, 1 / net.d_min)
