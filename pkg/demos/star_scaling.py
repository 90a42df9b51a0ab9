"""Growing star networks.

m = ceil(sqrt(n)) groups: a core clique plus m - 1 singleton leaves, with
gamma = sqrt(m), phi = m^(-1/4) and eps = 1e-4 (all relative to lam).

Weak links fire only across a disagreement, and with all agents agreeing
the only way to create one is a tremble. Trembles are rare here, so the
network spends most epochs conformal and welfare stays close to 1/2. The
exact chain for small stars shows the same plateau.
"""
from weaklinks import build_model, gen_star
from weaklinks.compare import star_scaling_params, sweep_star_scaling

for n in (9, 25):
    m, p = star_scaling_params(n)
    print(f"exact n={n:3d} m={m}: {build_model(gen_star(n, m), p).welfare:.6f}")

rows = sweep_star_scaling([9, 25, 64, 144], epochs=5_000, replicas=4, seed=1)
for r in rows:
    print(f"MC    n={r.n:3d} m={r.m:2d}: {r.mean:.4f} +- {r.stderr:.4f}   "
          f"core correct {r.core_correct:.3f}")
