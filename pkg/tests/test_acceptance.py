"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` or as a script; the
lines are also collected into the pytest terminal summary.
"""

import cmath
import math
import random
import time

import pytest

from ksquad.lattice import CentralCharge, ClassLattice, QuadraticRefinement
from ksquad.quantum import classical_limit, refined_factor
from ksquad.scanner import (PolynomialDifferential, find_saddles, measured_bps, period, scan_bps, track_frame,
                            wkb_frame, wkb_triangulation)
from ksquad.series import compose
from ksquad.surface import (annulus_triangulation, canonical_form, exchange_matrix, flip, flip_graph,
                            flip_sequence, polygon_fan, punctured_polygon_triangulation, surface_of, validate)
from ksquad.wallcrossing import (UPPER_HALF_PLANE, BPSStructure, SectorSpec, class_factor, dt_from_omega,
                                 flip_path_map, flow_factor, ks_factor, omega_from_dt, pentagon_chambers,
                                 sector_product, strip_relabeling, wcf_check)

RESULTS: list[str] = []


def report(n, title, ok, detail):
    line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def random_structures(count=20, seed=2024):
    """Generic rank-2/3 structures with |Omega| <= 2 on cone classes of degree <= 4."""
    rnd = random.Random(seed)
    out = []
    while len(out) < count:
        n = rnd.choice([2, 3])
        skew = [[0] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                skew[i][j] = rnd.randint(-2, 2)
                skew[j][i] = -skew[i][j]
        L = ClassLattice(tuple(map(tuple, skew)))
        Z = [cmath.rect(rnd.uniform(0.5, 2), math.pi * rnd.uniform(0.05, 0.95)) for _ in range(n)]
        classes = set()
        while len(classes) < rnd.randint(2, 5):
            g = tuple(rnd.randint(0, 2) for _ in range(n))
            if 0 < sum(g) <= 4:
                classes.add(g)
        omega = {g: rnd.choice([-2, -1, 1, 2]) for g in classes}
        signs = tuple(rnd.choice([-1, 1]) for _ in range(n))
        s = BPSStructure(L, CentralCharge.from_complex(Z), omega, QuadraticRefinement(signs))
        if s.is_generic():
            out.append(s)
    return out


def upper_rays(s):
    return [r for r in s.rays() if 0 < r.phase <= 1]


def test_criterion_1_pentagon():
    t0 = time.perf_counter()
    D = 10
    two, three = pentagon_chambers()
    left = sector_product(two, UPPER_HALF_PLANE, D)
    v = wcf_check(left, sector_product(three, UPPER_HALF_PLANE, D), D)
    elapsed = time.perf_counter() - t0
    # negative controls: one of the three signs flipped to +1
    L = two.lattice
    low = sector_product(two, UPPER_HALF_PLANE, 3)
    breaks = []
    for flipped in range(3):
        fs = [class_factor(L, g, 1, 1 if n == flipped else -1, 3) for n, g in enumerate([(0, 1), (1, 1), (1, 0)])]
        breaks.append(not wcf_check(low, compose(compose(fs[0], fs[1]), fs[2]), 3).equal)
    ok = v.equal and elapsed < 5 and all(breaks)
    report(1, "pentagon identity to degree 10", ok,
           f"{v.certificate}; {elapsed:.2f}s; sign-flip controls broken at degree <= 3: {breaks}")


def test_criterion_2_flow_equals_closed_form():
    t0 = time.perf_counter()
    D = 8
    checked = 0
    bad = []
    for k, s in enumerate(random_structures()):
        for r in upper_rays(s):
            checked += 1
            if flow_factor(s, r, D) != ks_factor(s, r, D):
                bad.append((k, r.phase))
    elapsed = time.perf_counter() - t0
    report(2, "flow factor = closed form on 20 random structures", not bad and elapsed < 30,
           f"{checked} rays, {len(bad)} mismatches, {elapsed:.2f}s")


def test_criterion_3_mobius_roundtrip():
    rnd = random.Random(7)
    bad = 0
    L = ClassLattice(((0, 1), (-1, 0)))
    Zc = CentralCharge.from_complex([1j, 1 + 1j])
    xi = QuadraticRefinement((-1, -1))
    for _ in range(100):
        gamma = rnd.choice([(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)])
        omega = {tuple(m * x for x in gamma): rnd.randint(-3, 3) for m in range(1, 7)}
        s = BPSStructure(L, Zc, omega, xi)
        table = {tuple(m * x for x in gamma): dt_from_omega(s, tuple(m * x for x in gamma)) for m in range(1, 7)}
        for g, v in omega.items():
            if omega_from_dt(table, g) != v:
                bad += 1
    report(3, "Mobius roundtrip on 100 tables", bad == 0, f"{bad} mismatches")


def test_criterion_4_flip_vs_sector_quadratic():
    D = 8
    phi = PolynomialDifferential([1, 0, -1])
    saddles = find_saddles(phi, (0.0, 1.0))
    frame = wkb_frame(phi, 0.0, saddles)
    bps, _ = measured_bps(phi, (0.0, 1.0), frame, saddles)
    sector = sector_product(bps, UPPER_HALF_PLANE, D)
    T0 = wkb_triangulation(phi, 0.25)
    T1 = wkb_triangulation(phi, 0.75)
    seq = flip_sequence(T0, T1)
    flips = strip_relabeling(flip_path_map(T0, seq, D))
    v = wcf_check(flips, sector, D)
    Z = period(phi, 0, 1)
    dz = abs(abs(Z) - math.pi)
    ok = v.equal and len(seq) == 1 and bps.omega == {(1,): 1} and bps.xi((1,)) == -1 and dz < 1e-6
    report(4, "z^2-1: flip map = measured sector product", ok,
           f"{v.certificate}; flips {seq}; ||Z|-pi| = {dz:.2e}")


def test_criterion_5_a2_wall_crossing():
    t0 = time.perf_counter()
    D = 8
    theta0 = -0.3
    window = (theta0, theta0 + 1.0)
    path = [PolynomialDifferential([1, 0, -3, 1j + 1j * n / 20]) for n in range(21)]
    before = find_saddles(path[0], window)
    after = find_saddles(path[-1], window)
    frame = wkb_frame(path[0], theta0, before)
    s0, _ = measured_bps(path[0], window, frame, before)
    tracked = track_frame(frame, path)
    s1, _ = measured_bps(path[-1], window, tracked, after)
    sec = SectorSpec(theta0 + 1.0, theta0)
    left = sector_product(s0, sec, D)
    v = wcf_check(left, sector_product(s1, sec, D), D)
    # the same map from the flips between the WKB triangulations at the two edges of the sector
    T0 = wkb_triangulation(path[0], theta0)
    seq = flip_sequence(T0, wkb_triangulation(path[0], theta0 + 1.0))
    vf = wcf_check(strip_relabeling(flip_path_map(T0, seq, D)), left, D)
    elapsed = time.perf_counter() - t0
    counts = (len(before), len(after))
    ok = counts == (2, 3) and v.equal and vf.equal and elapsed < 300
    report(5, "A2 wall-crossing across t = i .. 2i", ok,
           f"saddle counts {counts}; Omega {dict(s0.omega)} -> {dict(s1.omega)}; {v.certificate}; "
           f"flips {seq}: {vf.certificate}; {elapsed:.1f}s")


def test_criterion_6_quantum_bridge():
    D = 6
    bad, checked = [], 0
    for k, s in enumerate(random_structures()):
        for r in upper_rays(s):
            classes = sorted(g for g in s.on_ray(r) if all(x >= 0 for x in g))
            qm = refined_factor(s.lattice, classes, {g: s.Omega(g) for g in classes}, D)
            checked += 1
            if not wcf_check(classical_limit(qm, s.refinement), ks_factor(s, r, D), D).equal:
                bad.append((k, r.phase))
    report(6, "quantum bridge on single rays", not bad, f"{checked} rays, {len(bad)} mismatches")


def random_polynomials(count=10, seed=11):
    rnd = random.Random(seed)
    out = []
    while len(out) < count:
        k = rnd.choice([3, 4])
        rs = [complex(rnd.uniform(-1.5, 1.5), rnd.uniform(-1.5, 1.5)) for _ in range(k)]
        if min(abs(a - b) for i, a in enumerate(rs) for b in rs[i + 1:]) < 0.5:
            continue
        c = [complex(1)]
        for r in rs:
            c = [x - r * y for x, y in zip(c + [0], [0] + c)]
        out.append(PolynomialDifferential(c))
    return out


def test_criterion_7_scanner_invariants():
    t0 = time.perf_counter()
    worst_phase, worst_omega, wkb_bad, n_saddles = 0.0, 0, [], 0
    for m, phi in enumerate(random_polynomials()):
        recs, _, bps = scan_bps(phi, (0.0, 1.0))
        n_saddles += len(recs)
        worst_phase = max([worst_phase] + [r.phase_mismatch() for r in recs])
        worst_omega = max([worst_omega] + [abs(v) for v in bps.omega.values()])
        phases = sorted(r.phase for r in recs)
        cuts = phases + [phases[0] + 1.0]
        for a, b in zip(cuts, cuts[1:]):
            if b - a < 1e-3:
                continue
            T1 = wkb_triangulation(phi, a + (b - a) / 3)
            T2 = wkb_triangulation(phi, a + 2 * (b - a) / 3)
            if sorted(T1.arcs) != sorted(T2.arcs):
                wkb_bad.append((m, a, b))
    elapsed = time.perf_counter() - t0
    ok = worst_phase < 1e-6 and worst_omega <= 2 and not wkb_bad
    report(7, "scanner invariants on 10 random cubics/quartics", ok,
           f"{n_saddles} saddles, max phase mismatch {worst_phase:.1e}, max |Omega| {worst_omega}, "
           f"WKB changes inside gaps: {len(wkb_bad)}; {elapsed:.1f}s")


def test_criterion_8_combinatorics():
    nodes, edges = flip_graph(polygon_fan(5))
    degree = {i: 0 for i in range(len(nodes))}
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    cycle = len(nodes) == 5 and len(edges) == 5 and set(degree.values()) == {2}
    rnd = random.Random(99)
    starts = [polygon_fan(6), polygon_fan(8), annulus_triangulation(2, 2), annulus_triangulation(1, 3),
              punctured_polygon_triangulation(3), punctured_polygon_triangulation(5)]
    current = list(starts)
    failures = 0
    for _ in range(1000):
        i = rnd.randrange(len(current))
        T = current[i]
        k = rnd.choice(T.arcs)
        U = flip(T, k)
        B = exchange_matrix(U)
        n = len(B)
        good = (flip(U, k) == T and canonical_form(flip(U, k)) == canonical_form(T)
                and validate(U, surface_of(starts[i])) == []
                and all(B[a][b] == -B[b][a] and -2 <= B[a][b] <= 2 for a in range(n) for b in range(n)))
        failures += not good
        current[i] = U
    report(8, "flip-graph and exchange-matrix combinatorics", cycle and failures == 0,
           f"pentagon graph {len(nodes)} nodes / {len(edges)} edges; {failures} bad random flips out of 1000")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
