"""The flag variety of GL(3) and its Gelfand-Tsetlin polytope.

The bundled presentation lists eight minors-with-multiplicities as
generators; their values cut out a three-dimensional polytope whose
dilations count weight vectors.  The script re-counts lattice points in
k-fold dilations and compares with the Weyl dimension formula.

Run:  python3 demos/flag_polytope.py
"""

import math
from fractions import Fraction

from okkit.catalog import load_example
from okkit.cli import body_svg
from okkit.okounkov import semigroup_hilbert

entry = load_example("gl3-flag")
print("entry:", entry.name)
print("  ", entry.description)
print()

body = entry.body
print("polytope vertices:")
for v in body.vertices:
    print("   (%s)" % ", ".join(str(x) for x in v))
print("volume:", body.volume, " degree:", entry.degree)
print()


def weyl_dim(a, b, c):
    return (a - b + 1) * (b - c + 1) * (a - c + 2) // 2


print(" k   lattice points of k*body   Hilbert H(k)   Weyl dim (2k,k,0)")
los = [min(v[i] for v in body.vertices) for i in range(body.ambient_dim)]
his = [max(v[i] for v in body.vertices) for i in range(body.ambient_dim)]
for k in range(1, 5):
    count = 0
    ranges = [
        range(math.ceil(lo * k), math.floor(hi * k) + 1)
        for lo, hi in zip(los, his)
    ]
    for x0 in ranges[0]:
        for x1 in ranges[1]:
            for x2 in ranges[2]:
                if body.contains((Fraction(x0, k), Fraction(x1, k), Fraction(x2, k))):
                    count += 1
    print(" %d   %22d   %12d   %17d"
          % (k, count, semigroup_hilbert(entry.semigroup, k), weyl_dim(2 * k, k, 0)))

print()
target = "flag_polytope.svg"
with open(target, "w", encoding="utf-8") as handle:
    handle.write(body_svg(body))
print("wrote a 2d projection of the polytope to", target)
