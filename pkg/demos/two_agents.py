"""Two agents: one strong link versus one weak link.

A strong link lets the pair coordinate instantly, so one tremble teaches
both of them. A weak link only passes information when it fires, and it can
only fire while the two disagree.
"""
from weaklinks import SimParams, build_model, gen_clique, gen_island, bound_no_weak

strong = gen_clique(2)
weak = gen_island([1, 1], [(0, 1)])

print(" eps    gamma   strong     weak       gap")
for eps in (1e-3, 1e-2, 1e-1):
    for gamma in (0.1, 1.0, 10.0):
        p = SimParams(lam=1.0, epsilon=eps, gamma=gamma, phi=1e4)
        ws = build_model(strong, p).welfare
        ww = build_model(weak, p).welfare
        print(f"{eps:5.0e} {gamma:6.1f}  {ws:.6f}  {ww:.6f}  {ws - ww:.2e}")

# the strong pair sits exactly on the no-weak-link closed form
p = SimParams(lam=1.0, epsilon=0.1)
print("\nclosed form", bound_no_weak(1.0, 0.1), "exact", build_model(strong, p).welfare)

# without activations each singleton only learns from its own trembles,
# which hit it at rate eps / 2
p = SimParams(lam=1.0, epsilon=0.1, gamma=0.0, phi=1e4)
q = 0.05 / 1.05
print("gamma = 0:", build_model(weak, p).welfare, "vs", 0.5 * (1 + q))
