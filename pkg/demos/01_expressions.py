"""Expressions: the mini-language for dynamics and dictionary functions.

Everything downstream (inner products, Gram matrices, operator models) works
on plain evaluable objects; this script shows how those objects are built
from text.
"""

import numpy as np

from invprox import DynamicsMap, ParseError, compose_with_map, parse

# Scalar expressions are written over the fixed variable names x1..xn.
e = parse("0.4*(sin(x2)+x1^2)+0.01*x2^2", state_dim=2)
print("parsed:", e)
print("value at (1, 0):", e.eval((1.0, 0.0)))

# Evaluation is vectorized: an (m, n) array of points gives m values.
points = np.array([[0.0, 0.0], [1.0, 0.0], [-0.5, 0.3]])
print("batch values:", e(points))

# Precedence is the usual one; ^ binds tightest and is right-associative,
# with the exponent restricted to integer-valued constants.
print("2^3^2 =", parse("2^3^2", 1).eval((0.0,)))
print("-2^2  =", parse("-2^2", 1).eval((0.0,)))
try:
    parse("x1^0.5", 1)
except ParseError as exc:
    print("rejected as expected:", exc)

# A dynamics map bundles one expression per state coordinate.
T = DynamicsMap.from_strings(["0.9*x1", "0.4*(sin(x2)+x1^2)+0.01*x2^2"], 2)
x = np.array([1.0, 0.0])
print("T(1, 0) =", T(x))

# Composition with the map realizes the action of the operator on one
# observable: g = f o T, evaluated pointwise, no symbolic work.
f = parse("x1", 2)
g = compose_with_map(f, T)
print("x1 after one step from (1, 0):", g.eval(x))

# Non-finite arithmetic propagates IEEE-style; the inner-product backends
# reject such values with the offending point attached.
print("1/x1 at the origin:", parse("1/x1", 2).eval((0.0, 0.0)))
