"""Which island layout learns best?

Exhaustive exact comparison of all ways to place n agents in three cliques
joined by a connected weak topology (up to relabelling). Trembles are rare
and weak links either recover almost instantly or almost never.
"""
import json

import numpy as np

from weaklinks.compare import star_vs_islands

for n in (6, 7):
    for phi in (1e4, 1e-4):
        rows = star_vs_islands(n, 3, phi_ratio=phi)
        print(f"\nn={n}, phi={phi:g}")
        for r in rows[:5]:
            tag = "  <- star" if r["is_star"] else ""
            print(f"  {r['name']:18} welfare {r['welfare']:.9f}  core-good {r['eta_core_good']:.6f}{tag}")
        star = next(r for r in rows if r["is_star"])
        print(f"  star behind the best by {rows[0]['welfare'] - star['welfare']:.2e}")

# with fast recovery the number of correct islands has the same law for every layout
rows = star_vs_islands(6, 3, phi_ratio=1e4)
dk = np.array([json.loads(r["dk"]) for r in rows])
print("\nspread of dk across layouts:", np.ptp(dk, axis=0))
