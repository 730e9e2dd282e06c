"""Inner-product backends: quadrature on a box and empirical snapshots.

The whole pipeline consumes nothing but inner products of dictionary
functions, so the choice of backend is the only place where "analytic
system" versus "data only" matters.
"""

import numpy as np

from invprox import (
    Domain,
    DynamicsMap,
    EmpiricalSpace,
    QuadratureSpace,
    parse,
    write_snapshots,
    read_snapshots,
)

box = Domain(((-1.0, 1.0), (-1.0, 1.0)))
quad = QuadratureSpace(box, order=20)
print(f"{quad}: {quad.nodes.shape[0]} nodes, weight sum = "
      f"{np.sum(quad.weights):.15f} (the domain area)")

one, x1, x1sq = (parse(s, 2) for s in ("1", "x1", "x1^2"))
print("<1, 1>   =", quad.inner_product(one, one))
print("<1, x1>  =", quad.inner_product(one, x1))
print("<x1, x1> =", quad.inner_product(x1, x1), "(exactly 4/3 up to round-off)")

# Gram matrices batch those inner products; each atom is evaluated once per
# node and the result is exactly symmetric.
G = quad.gram((one, x1, x1sq))
print("Gram of (1, x1, x1^2):")
print(G.entries)

# The blocks needed by the operator pipeline: the dictionary Gram, the cross
# Gram against the composed functions, and the Gram of the compositions.
T = DynamicsMap.from_strings(["0.9*x1", "0.4*(sin(x2)+x1^2)+0.01*x2^2"], 2)
g_dict, g_cross, g_image = quad.koopman_gram_blocks((one, x1), T)
print("<x1, x1 o T> =", g_cross[1, 1], "(0.9 * 4/3: the map is linear in x1)")

# The empirical backend replaces integrals with weighted sums over snapshot
# pairs (x_i, y_i = T(x_i)); compositions are evaluated at the successors,
# so the dynamics map itself is never needed.
rng = np.random.default_rng(0)
X = rng.uniform(-1, 1, size=(2000, 2))
empirical = EmpiricalSpace(X, T(X))
ge_dict, ge_cross, _ = empirical.koopman_gram_blocks((one, x1))
print("empirical <x1, x1 o T> over 2000 random snapshots:", ge_cross[1, 1])

# Folding a quadrature rule into the snapshot weights makes the empirical
# backend reproduce the quadrature one exactly.
folded = EmpiricalSpace(quad.nodes, T(quad.nodes), weights=quad.weights)
gf_dict, gf_cross, _ = folded.koopman_gram_blocks((one, x1))
print("max |folded - quadrature| over the cross block:",
      np.max(np.abs(gf_cross - g_cross)))

# Snapshots round-trip through the CSV format losslessly.
write_snapshots("/tmp/invprox_demo_snapshots.csv", X[:5], T(X[:5]))
X2, Y2 = read_snapshots("/tmp/invprox_demo_snapshots.csv")
print("CSV round-trip exact:", np.array_equal(X[:5], X2))
