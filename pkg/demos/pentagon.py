"""Two chambers of the A2 quiver and the identity that links them.

On one side of the wall only g1 and g2 are stable; on the other side their
sum g1+g2 appears as well.  The ordered products over the upper half-plane
agree as automorphisms of the torus, coefficient by coefficient.
"""

from ksquad.wallcrossing import UPPER_HALF_PLANE, pentagon_chambers, sector_product, wcf_check

D = 6
two, three = pentagon_chambers()

for name, s in (("two-ray chamber", two), ("three-ray chamber", three)):
    print(f"{name}: Omega = {dict(s.omega)}")
    for r in s.rays():
        if 0 < r.phase <= 1:
            print(f"  active ray at phase {r.phase:.3f}: {sorted(s.on_ray(r))}")

left = sector_product(two, UPPER_HALF_PLANE, D)
right = sector_product(three, UPPER_HALF_PLANE, D)
print("\nmultipliers of the two-ray product:")
for i, F in enumerate(left.multipliers):
    print(f"  x_{i + 1} -> x_{i + 1} * ({F})")
print("\nverdict:", wcf_check(left, right, D).certificate)

# drop the sum class and the identity fails at low degree
broken = type(three)(three.lattice, three.charge, {(1, 0): 1, (0, 1): 1}, three.refinement)
print("without g1+g2:", wcf_check(left, sector_product(broken, UPPER_HALF_PLANE, D), D).certificate)
