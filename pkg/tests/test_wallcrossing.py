import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from ksquad import conventions
from ksquad.lattice import CentralCharge, ClassLattice, QuadraticRefinement, Ray
from ksquad.series import BirationalTorusMap, ConeSeries, compose, power
from ksquad.surface import exchange_matrix, flip, flip_graph, polygon_fan
from ksquad.wallcrossing import (UPPER_HALF_PLANE, BPSStructure, NonGenericError, SectorSpec, class_factor,
                                 cluster_iota, cluster_kappa, cluster_mutation, dt_from_omega, dt_series,
                                 flip_path_map, flow_factor, height, ks_factor, omega_from_dt, pentagon_chambers,
                                 sector_product, sector_rays, strip_relabeling, wcf_check)

A2 = ClassLattice(((0, 1), (-1, 0)))
R1 = ClassLattice(((0,),))


def structure(L, charges, omega, signs=None):
    return BPSStructure(L, CentralCharge.from_complex(charges), omega,
                        QuadraticRefinement(tuple(signs or [-1] * L.rank)))


def test_dt_examples():
    s = structure(R1, [1j], {(1,): 1})
    assert dt_from_omega(s, (1,)) == 1
    assert dt_from_omega(s, (2,)) == Fraction(1, 4)
    assert dt_from_omega(structure(R1, [1j], {}), (3,)) == 0
    t = structure(R1, [1j], {(1,): 1, (2,): -2})
    assert dt_from_omega(t, (2,)) == Fraction(-7, 4)
    with pytest.raises(ValueError):
        dt_from_omega(s, (0,))


def test_omega_from_dt_examples():
    assert omega_from_dt({(1,): 1, (2,): Fraction(1, 4)}, (1,)) == 1
    assert omega_from_dt({(1,): 1, (2,): Fraction(1, 4)}, (2,)) == 0
    assert omega_from_dt({}, (4,)) == 0
    table = {(1,): 1, (2,): Fraction(1, 4), (3,): Fraction(1, 9)}
    assert [omega_from_dt(table, (k,)) for k in (1, 2, 3)] == [1, 0, 0]
    with pytest.raises(ValueError):
        omega_from_dt({(1,): Fraction(1, 2)}, (1,))


@given(st.dictionaries(st.integers(1, 6), st.integers(-3, 3)))
def test_dt_matches_naive_divisor_sum(om):
    omega = {(k, 2 * k): v for k, v in om.items()}
    s = structure(A2, [1j, 2j], omega)
    for k in range(1, 7):
        assert dt_from_omega(s, (k, 2 * k)) == oracles.naive_dt(s.omega, (k, 2 * k))


def test_dt_series_and_height():
    s = structure(R1, [2j], {(1,): 1})
    r = Ray(0.5)
    assert dt_series(s, r, 3).terms == {(1,): 1, (2,): Fraction(1, 4), (3,): Fraction(1, 9)}
    assert dt_series(s, Ray(0.1), 3).is_zero()
    t = structure(R1, [2j], {(1,): 1, (2,): 0})
    assert dt_series(t, r, 3) == dt_series(s, r, 3)
    assert height(s, r) == pytest.approx(2)
    assert height(s, Ray(0.1)) == float("inf")
    u = structure(R1, [2j], {(1,): 1, (3,): 2})
    assert height(u, r) == pytest.approx(2)


def test_ks_factor_examples():
    D = 6
    s = structure(A2, [1j, 1 + 1j], {(1, 0): 1})
    assert ks_factor(s, Ray(0.9), D) == BirationalTorusMap.identity(A2, D)
    f = ks_factor(s, Ray(0.5), D)
    one = ConeSeries.one(A2, D)
    x = ConeSeries.monomial(A2, D, (1, 0))
    # <e2, e1> = -1 in A2, <e1, e1> = 0
    assert f.multipliers[1] == power(one + x, -1)
    assert f.multipliers[0] == one
    cyl = structure(A2, [1j, 1 + 1j], {(1, 0): -2}, signs=[1, -1])
    g = ks_factor(cyl, Ray(0.5), D)
    assert g.multipliers[1] == power(one - x, 2)
    single = class_factor(A2, (1, 0), 1, 1, D)
    assert g == compose(power_map(single, -2), BirationalTorusMap.identity(A2, D))


def power_map(m, e):
    return BirationalTorusMap(m.lattice, m.D, None, [power(F, e) for F in m.multipliers])


def test_non_generic_ray_rejected():
    s = structure(A2, [1j, 2j], {(1, 0): 1, (0, 1): 1})
    assert not s.is_generic()
    with pytest.raises(NonGenericError):
        ks_factor(s, Ray(0.5), 4)


def test_flow_examples():
    s = structure(A2, [1j, 1 + 1j], {(0, 1): 1})
    assert flow_factor(s, Ray(0.1), 8) == BirationalTorusMap.identity(A2, 8)
    assert flow_factor(s, Ray(0.25), 8) == ks_factor(s, Ray(0.25), 8)
    t = structure(A2, [1j, 1 + 1j], {(0, 1): 2})
    assert flow_factor(t, Ray(0.25), 6) == ks_factor(t, Ray(0.25), 6)


def test_sector_product_examples():
    D = 6
    s = structure(A2, [1j, 1 + 1j], {(0, 1): 1})
    assert sector_product(s, SectorSpec(0.2, -0.5), D) == BirationalTorusMap.identity(A2, D)
    assert sector_product(s, UPPER_HALF_PLANE, D) == ks_factor(s, Ray(0.25), D)
    with pytest.raises(ValueError):
        sector_rays(s, SectorSpec(0.25, -0.5))
    with pytest.raises(ValueError):
        SectorSpec(0.0, 0.5)


def test_pentagon_oracle_fixes_the_convention():
    assert oracles.pentagon_holds("g1g2")
    assert not oracles.pentagon_holds("g2g1")
    assert conventions.PENTAGON_TWO_FACTOR_ORDER == ("g1", "g2")


def test_pentagon_matches_exact_rational_maps():
    D = 7
    two, three = pentagon_chambers()
    left = sector_product(two, UPPER_HALF_PLANE, D)
    skew = [[0, 1], [-1, 0]]
    exact = oracles.compose(oracles.ray_map(skew, (1, 0)), oracles.ray_map(skew, (0, 1)))
    ref = oracles.multiplier_coefficients(exact, 2, D)
    for i in range(2):
        assert left.multipliers[i].terms == ref[i]
    assert wcf_check(left, sector_product(three, UPPER_HALF_PLANE, D), D).equal


def test_pentagon_negative_controls():
    D = 4
    two, three = pentagon_chambers()
    L = two.lattice
    left = sector_product(two, UPPER_HALF_PLANE, D)
    classes = [(0, 1), (1, 1), (1, 0)]
    for flipped in range(3):
        factors = [class_factor(L, g, 1, 1 if n == flipped else -1, D) for n, g in enumerate(classes)]
        right = compose(compose(factors[0], factors[1]), factors[2])
        v = wcf_check(left, right, D)
        assert not v.equal
        assert "degree 1" in v.certificate or "degree 2" in v.certificate or "degree 3" in v.certificate


def test_perturbed_omega_mismatch_at_its_degree():
    D = 6
    two, three = pentagon_chambers()
    bad = BPSStructure(three.lattice, three.charge, {(1, 0): 1, (0, 1): 1, (1, 1): 2}, three.refinement)
    v = wcf_check(sector_product(two, UPPER_HALF_PLANE, D), sector_product(bad, UPPER_HALF_PLANE, D), D)
    assert not v.equal and "(degree 2)" in v.certificate
    assert wcf_check(sector_product(two, UPPER_HALF_PLANE, D), sector_product(two, UPPER_HALF_PLANE, D), D).equal


@given(st.integers(0, 10 ** 6))
def test_sector_splits_at_a_non_active_ray(seed):
    rnd = random.Random(seed)
    L = ClassLattice(((0, 1, -1), (-1, 0, 2), (1, -2, 0)))
    Z = [complex(rnd.uniform(-1, 1), rnd.uniform(0.2, 1)) for _ in range(3)]
    omega = {}
    for g in [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1)]:
        if rnd.random() < 0.6:
            omega[g] = rnd.choice([-2, -1, 1, 2])
    s = BPSStructure(L, CentralCharge.from_complex(Z), omega, QuadraticRefinement((-1, 1, -1)))
    if not s.is_generic():
        return
    cut = rnd.uniform(0.05, 0.95)
    if any(abs(r.phase - cut) < 1e-3 for r in s.rays()):
        return
    D = 5
    whole = sector_product(s, UPPER_HALF_PLANE, D)
    split = compose(sector_product(s, SectorSpec(1.0, cut), D), sector_product(s, SectorSpec(cut, 0.0), D))
    assert whole == split


def test_bps_json_roundtrip():
    two, _ = pentagon_chambers()
    data = two.to_json()
    assert data["omega"] == [{"class": [0, 1], "value": 1}, {"class": [1, 0], "value": 1}]
    assert BPSStructure.from_json(data) == two
    with pytest.raises(ValueError):
        BPSStructure(A2, two.charge, {(1, 0): 1, (-1, 0): 2}, two.refinement)


def test_cluster_maps_examples():
    D = 5
    B = [[0, 1], [-1, 0]]
    k = cluster_kappa(B, 1, D)
    one = ConeSeries.one(k.lattice, D)
    assert k.multipliers[0] == one + ConeSeries.monomial(k.lattice, D, (0, 1))
    assert k.multipliers[1] == one
    kron = cluster_kappa([[0, 2], [-2, 0]], 1, D)
    assert kron.multipliers[0] == power(ConeSeries.one(kron.lattice, D) + ConeSeries.monomial(kron.lattice, D, (0, 1)), 2)
    zero = cluster_kappa([[0, 0], [0, 0]], 0, D)
    assert zero.multipliers[1] == ConeSeries.one(zero.lattice, D)
    i1 = cluster_iota(B, 0, D)
    assert i1.column(0) == (-1, 0) and i1.column(1) == (1, 1)
    i2 = cluster_iota(B, 1, D)
    assert i2.column(0) == (1, 0)
    assert cluster_iota([[0]], 0, D).A == ((-1,),)


def test_flip_path_examples():
    D = 6
    T = polygon_fan(5)
    L = ClassLattice(tuple(map(tuple, exchange_matrix(T))))
    assert flip_path_map(T, [], D) == BirationalTorusMap.identity(L, D)
    assert flip_path_map(T, ["d0_2"], D) == cluster_mutation(exchange_matrix(T), 0, D)
    back = flip_path_map(T, ["d0_2", "d0_2"], D)
    assert back == BirationalTorusMap.identity(L, D)


def test_pentagon_five_cycle_periodicity():
    D = 8
    T = polygon_fan(5)
    seq = ["d0_2", "d0_3"] * 2 + ["d0_2"]
    U = T
    for k in seq:
        U = flip(U, k)
    assert len(flip_graph(T)[0]) == 5
    m = flip_path_map(T, seq, D)
    # lattice part: the arcs come back swapped
    assert sorted(map(tuple, m.A)) == [(0, 1), (1, 0)]
    assert all(F == ConeSeries.one(m.lattice, D) for F in m.multipliers)


def test_single_flip_equals_ks_factor_with_xi_minus_one():
    D = 8
    T = polygon_fan(4)
    L = ClassLattice(((0,),))
    s = BPSStructure(L, CentralCharge.from_complex([1j]), {(1,): 1}, QuadraticRefinement((-1,)))
    kappa = strip_relabeling(flip_path_map(T, ["d0_2"], D))
    assert wcf_check(kappa, ks_factor(s, Ray(0.5), D), D).equal
