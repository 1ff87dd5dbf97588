"""A refined factor and its q -> 1 shadow.

For a single class g with Omega = 1 the refined automorphism sends x_b to
x_b * EXP(-q^{-1/2} [<b,g>]_{q^{-1}} x_g).  Setting q^{1/2} = 1 and moving to
the untwisted chart with xi(g) = -1 recovers the classical factor 1 + x_g.
"""

from ksquad.lattice import CentralCharge, ClassLattice, QuadraticRefinement, ray_of
from ksquad.quantum import classical_limit, refined_factor
from ksquad.wallcrossing import BPSStructure, ks_factor, wcf_check

D = 5
L = ClassLattice(((0, 2), (-2, 0)))
g = (0, 1)
xi = QuadraticRefinement((-1, -1))

for omega in (1, 2, -2):
    q = refined_factor(L, [g], {g: omega}, D)
    print(f"Omega = {omega}")
    print("  refined multiplier of x_1:", q.multipliers[0])
    s = BPSStructure(L, CentralCharge.from_complex([1 + 1j, 1j]), {g: omega}, xi)
    classical = ks_factor(s, ray_of(s.charge(g)), D)
    print("  classical multiplier:     ", classical.multipliers[0])
    print("  q -> 1 comparison:        ", wcf_check(classical_limit(q, xi), classical, D).certificate)
