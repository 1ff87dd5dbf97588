"""Watching a BPS state appear for P(z) = z^3 - 3z + t.

Move t from i to 2i.  The scanner finds two saddle connections in a
half-plane of phases at the start and three at the end.  Carrying the
lattice along the path by continuity of periods, the measured BPS
structures give the same half-plane product, and so does the sequence of
flips between the WKB triangulations at the two edges of the half-plane.
"""

import time

from ksquad.scanner import (PolynomialDifferential, find_saddles, measured_bps, track_frame, wkb_frame,
                            wkb_triangulation)
from ksquad.surface import flip_sequence
from ksquad.wallcrossing import SectorSpec, flip_path_map, sector_product, strip_relabeling, wcf_check

D = 8
theta0 = -0.3
window = (theta0, theta0 + 1.0)
path = [PolynomialDifferential([1, 0, -3, 1j + 1j * n / 20]) for n in range(21)]

t0 = time.perf_counter()
start = find_saddles(path[0], window)
end = find_saddles(path[-1], window)
for label, recs in (("t = i ", start), ("t = 2i", end)):
    print(f"{label}: {len(recs)} saddles")
    for r in recs:
        print(f"    zeros {r.zero_a}-{r.zero_b}  phase {r.phase:+.6f}  Z = {r.period:.6f}")

frame = wkb_frame(path[0], theta0, start)
print("\nframe arcs:", frame.arcs, " skew form:", frame.lattice.skew)
s0, _ = measured_bps(path[0], window, frame, start)
s1, _ = measured_bps(path[-1], window, track_frame(frame, path), end)
print("Omega before:", dict(s0.omega))
print("Omega after: ", dict(s1.omega))

sec = SectorSpec(theta0 + 1.0, theta0)
before = sector_product(s0, sec, D)
print("\nsector products:", wcf_check(before, sector_product(s1, sec, D), D).certificate)

T0 = wkb_triangulation(path[0], theta0)
seq = flip_sequence(T0, wkb_triangulation(path[0], theta0 + 1.0))
flips = strip_relabeling(flip_path_map(T0, seq, D))
print(f"flips {seq} vs sector product:", wcf_check(flips, before, D).certificate)
print(f"({time.perf_counter() - t0:.1f}s)")
