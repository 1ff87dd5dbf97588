"""BPS structures, DT invariants, ray factors, sector products and cluster maps.

All torus maps live in the untwisted chart: a twisted character x_g is
replaced by xi(g) x_g, so a ray factor reads
x_b -> x_b prod_g (1 - xi(g) x_g)^{Omega(g) <b, g>}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .lattice import (DEFAULT_PHASE_TOL, CentralCharge, ClassLattice, QuadraticRefinement, Ray,
                      Vector, as_vector, normalize_phase, ray_of, same_ray_exact)
from .series import (BirationalTorusMap, ConeSeries, compose, flow_on_character, maps_equal, mul,
                     power)
from .surface import TaggedTriangulation, exchange_matrix, flip


class NonGenericError(ValueError):
    """Non-proportional classes share a ray."""


def _canonical(g: Vector) -> Vector:
    for x in g:
        if x:
            return g if x > 0 else tuple(-y for y in g)
    raise ValueError("the zero class has no BPS invariant")


def _gcd(g: Sequence[int]) -> int:
    out = 0
    for x in g:
        out = math.gcd(out, x)
    return out


def _primitive(g: Vector) -> tuple[Vector, int]:
    d = _gcd(g)
    return tuple(x // d for x in g), d


@dataclass(frozen=True)
class BPSStructure:
    """Lattice, central charge, Omega with finite support, and refinement signs.

    Omega is stored on canonical representatives (first nonzero coordinate
    positive) so that Omega(g) = Omega(-g) holds by construction.
    """

    lattice: ClassLattice
    charge: CentralCharge
    omega: Mapping[Vector, int]
    refinement: QuadraticRefinement
    phase_tol: float = DEFAULT_PHASE_TOL

    def __post_init__(self) -> None:
        n = self.lattice.rank
        if self.charge.rank != n or len(self.refinement.signs) != n:
            raise ValueError("lattice, charge and refinement ranks differ")
        clean: dict[Vector, int] = {}
        for g, v in self.omega.items():
            g = as_vector(g)
            if len(g) != n:
                raise ValueError(f"class {g} has wrong rank")
            if int(v) != v:
                raise ValueError("Omega values must be integers")
            key = _canonical(g)
            if key in clean and clean[key] != int(v):
                raise ValueError(f"conflicting Omega for {g} and its negative")
            if v:
                clean[key] = int(v)
        object.__setattr__(self, "omega", dict(sorted(clean.items())))

    def Omega(self, g: Sequence[int]) -> int:
        g = as_vector(g)
        if not any(g):
            return 0
        return self.omega.get(_canonical(g), 0)

    def xi(self, g: Sequence[int]) -> int:
        return self.refinement(self.lattice, g)

    def support(self) -> list[Vector]:
        return list(self.omega)

    def oriented_support(self) -> list[Vector]:
        """Both signs of every support class."""
        out = []
        for g in self.omega:
            out.append(g)
            out.append(tuple(-x for x in g))
        return out

    def on_ray(self, r: Ray) -> list[Vector]:
        """Support classes (oriented) whose charge lies on ``r``."""
        return [g for g in self.oriented_support() if r.contains(self.charge(g))]

    def rays(self) -> list[Ray]:
        """Active rays, one per direction, sorted by decreasing phase."""
        found: list[Ray] = []
        for g in self.oriented_support():
            r = ray_of(self.charge(g), self.phase_tol)
            if not any(r == s for s in found):
                found.append(r)
        return sorted(found, key=lambda r: -r.phase)

    def is_generic(self) -> bool:
        sup = self.oriented_support()
        for a in range(len(sup)):
            for b in range(a + 1, len(sup)):
                if self._share_ray(sup[a], sup[b]) and _primitive(sup[a])[0] != _primitive(sup[b])[0]:
                    return False
        return True

    def _share_ray(self, g: Vector, h: Vector) -> bool:
        if self.charge.exact:
            return same_ray_exact(self.charge.components(g), self.charge.components(h))
        return ray_of(self.charge(g), self.phase_tol) == ray_of(self.charge(h), self.phase_tol)

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice.to_json(),
            "charge": self.charge.to_json(),
            "omega": [{"class": list(g), "value": v} for g, v in self.omega.items()],
            "signs": list(self.refinement.signs),
        }

    @classmethod
    def from_json(cls, data: dict) -> "BPSStructure":
        L = ClassLattice.from_json(data["lattice"])
        Z = CentralCharge.from_json(data["charge"])
        omega: dict[Vector, int] = {}
        for item in data.get("omega", []):
            g = as_vector(item["class"])
            key = _canonical(g)
            if key in omega and omega[key] != int(item["value"]):
                raise ValueError(f"conflicting Omega entries for {g}")
            omega[key] = int(item["value"])
        signs = data.get("signs")
        xi = QuadraticRefinement(tuple(signs) if signs is not None else (-1,) * L.rank)
        return cls(L, Z, omega, xi)


def dt_from_omega(s: BPSStructure, g: Sequence[int]) -> Fraction:
    """DT(g) = sum over m | g of Omega(g / m) / m^2."""
    g = as_vector(g)
    d = _gcd(g)
    if d == 0:
        raise ValueError("DT invariant of the zero class is undefined")
    return sum((Fraction(s.Omega(tuple(x // m for x in g)), m * m) for m in range(1, d + 1) if d % m == 0),
               Fraction(0))


def _mobius(n: int) -> int:
    out, p = 1, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            out = -out
        p += 1
    return -out if n > 1 else out


def omega_from_dt(dt: Mapping[Sequence[int], object], g: Sequence[int]) -> int:
    """Invert the multi-cover sum: Omega(g) = sum_{m | g} mu(m) DT(g / m) / m^2."""
    g = as_vector(g)
    d = _gcd(g)
    if d == 0:
        raise ValueError("Omega of the zero class is undefined")
    table = {as_vector(k): Fraction(v) for k, v in dt.items()}

    def lookup(h: Vector) -> Fraction:
        if h in table:
            return table[h]
        neg = tuple(-x for x in h)
        return table.get(neg, Fraction(0))

    total = sum((_mobius(m) * lookup(tuple(x // m for x in g)) / (m * m)
                 for m in range(1, d + 1) if d % m == 0), Fraction(0))
    if total.denominator != 1:
        raise ValueError(f"inconsistent DT table: Omega{g} = {total} is not an integer")
    return int(total)


def _require_cone(g: Vector) -> None:
    if min(g) < 0:
        raise ValueError(f"class {g} on this ray lies outside the positive cone of the basis")


def _ray_classes(s: BPSStructure, r: Ray) -> list[Vector]:
    classes = s.on_ray(r)
    prims = {_primitive(g)[0] for g in classes}
    if len(prims) > 1:
        raise NonGenericError(f"non-proportional classes {sorted(prims)} share the ray of phase {r.phase}")
    return sorted(classes)


def dt_series(s: BPSStructure, r: Ray, D: int, transport: bool = False) -> ConeSeries:
    """sum of DT(g) x_g over classes on ``r`` of degree <= D.

    With ``transport`` each monomial carries xi(g), matching the untwisted chart.
    """
    L = s.lattice
    classes = _ray_classes(s, r)
    terms: dict[Vector, Fraction] = {}
    if classes:
        prim = _primitive(classes[0])[0]
        _require_cone(prim)
        deg = sum(prim)
        for m in range(1, D // deg + 1 if deg else 1):
            g = tuple(m * x for x in prim)
            c = dt_from_omega(s, g)
            if c:
                terms[g] = c * s.xi(g) if transport else c
    return ConeSeries(L, D, terms)


def height(s: BPSStructure, r: Ray) -> float:
    vals = [abs(s.charge(g)) for g in s.on_ray(r) if s.Omega(g)]
    return min(vals) if vals else math.inf


def class_factor(L: ClassLattice, g: Sequence[int], omega: int, sign: int, D: int) -> BirationalTorusMap:
    """x_b -> x_b (1 - sign x_g)^{omega <b, g>} for a single class g in the cone."""
    g = as_vector(g)
    _require_cone(g)
    one = ConeSeries.one(L, D)
    base = one - ConeSeries.monomial(L, D, g, sign)
    mults = []
    for i in range(L.rank):
        e = omega * L.pair(L.basis(i), g)
        mults.append(power(base, e) if e else one)
    return BirationalTorusMap(L, D, None, mults)


def ks_factor(s: BPSStructure, r: Ray, D: int) -> BirationalTorusMap:
    """x_b -> x_b prod_{g on r} (1 - xi(g) x_g)^{Omega(g) <b, g>}."""
    L = s.lattice
    one = ConeSeries.one(L, D)
    mults = [one] * L.rank
    for g in _ray_classes(s, r):
        f = class_factor(L, g, s.Omega(g), s.xi(g), D)
        mults = [mul(a, b) for a, b in zip(mults, f.multipliers)]
    return BirationalTorusMap(L, D, None, mults)


def flow_factor(s: BPSStructure, r: Ray, D: int) -> BirationalTorusMap:
    """Time-one flow of the Hamiltonian DT(r) (transported), applied to each basis character."""
    L = s.lattice
    H = dt_series(s, r, D, transport=True)
    return BirationalTorusMap(L, D, None, [flow_on_character(H, L.basis(i)) for i in range(L.rank)])


@dataclass(frozen=True)
class SectorSpec:
    """Convex sector swept clockwise from ``start`` down to ``end`` (units of pi)."""

    start: float
    end: float

    def __post_init__(self) -> None:
        width = self.start - self.end
        if not 0 < width <= 1 + 1e-12:
            raise ValueError("sector must satisfy 0 < start - end <= 1")

    def lift(self, phase: float, tol: float) -> float | None:
        """Lift of ``phase`` into [end, start], or None when outside."""
        for shift in (-4, -2, 0, 2, 4):
            p = phase + shift
            if self.end - tol < p < self.start + tol:
                return p
        return None

    def on_boundary(self, phase: float, tol: float) -> bool:
        return any(abs(normalize_phase(phase - b)) < tol for b in (self.start, self.end))


def sector_rays(s: BPSStructure, sec: SectorSpec, H: float = math.inf) -> list[Ray]:
    """Active rays strictly inside the sector with height < H, clockwise order."""
    out = []
    for r in s.rays():
        if sec.on_boundary(r.phase, r.tolerance):
            raise ValueError(f"boundary ray of phase {r.phase} is active")
        lifted = sec.lift(r.phase, r.tolerance)
        if lifted is not None and height(s, r) < H:
            out.append((lifted, r))
    out.sort(key=lambda t: -t[0])
    for (a, _), (b, _) in zip(out, out[1:]):
        if a == b:
            raise NonGenericError("two active rays with the same phase")
    return [r for _, r in out]


def sector_product(s: BPSStructure, sec: SectorSpec, D: int, H: float = math.inf) -> BirationalTorusMap:
    """S(l_1) o ... o S(l_k) over active rays in clockwise (decreasing phase) order."""
    out = BirationalTorusMap.identity(s.lattice, D)
    for r in sector_rays(s, sec, H):
        out = compose(out, ks_factor(s, r, D))
    return out


def _pos(n: int) -> int:
    return n if n > 0 else 0


def _lattice_from_matrix(B: Sequence[Sequence[int]]) -> ClassLattice:
    return ClassLattice(tuple(tuple(r) for r in B))


def cluster_kappa(B: Sequence[Sequence[int]], k: int, D: int) -> BirationalTorusMap:
    """kappa_k: x_g -> x_g (1 + x_{e_k})^{<g, e_k>}."""
    L = _lattice_from_matrix(B)
    base = ConeSeries.one(L, D) + ConeSeries.monomial(L, D, L.basis(k))
    return BirationalTorusMap(L, D, None, [power(base, B[i][k]) for i in range(L.rank)])


def cluster_iota(B: Sequence[Sequence[int]], k: int, D: int = 1) -> BirationalTorusMap:
    """iota_k: e_k -> -e_k and e_j -> e_j + [<e_k, e_j>]_+ e_k."""
    L = _lattice_from_matrix(B)
    n = L.rank
    A = [[int(i == j) for j in range(n)] for i in range(n)]
    for j in range(n):
        if j == k:
            A[k][k] = -1
        else:
            A[k][j] = _pos(B[k][j])
    return BirationalTorusMap(L, D, A)


def cluster_mutation(B: Sequence[Sequence[int]], k: int, D: int) -> BirationalTorusMap:
    """mu_k = iota_k o kappa_k."""
    return compose(cluster_iota(B, k, D), cluster_kappa(B, k, D))


def flip_path_map(T: TaggedTriangulation, arcs: Sequence[str], D: int,
                  orientation: int | None = None) -> BirationalTorusMap:
    """Transition map mu_{k_n} o ... o mu_{k_1} along a flip sequence.

    The running map sends the current coordinates X_j to x^{a_j} H_j with
    H_j in the cone.  Substituting into (1 + X_k) uses sign-coherence of a_k:
    when a_k <= 0 the factor is rewritten as x^{a_k} H_k (1 + x^{-a_k} / H_k),
    which keeps every multiplier inside the positive cone.
    """
    B0 = exchange_matrix(T, orientation)
    L = _lattice_from_matrix(B0)
    n = L.rank
    labels = list(T.arcs)
    index = {a: i for i, a in enumerate(labels)}
    one = ConeSeries.one(L, D)
    a_vec: list[list[int]] = [list(L.basis(j)) for j in range(n)]
    H: list[ConeSeries] = [one] * n
    current = T
    for label in arcs:
        if label not in index:
            raise ValueError(f"unknown arc {label!r}")
        k = index[label]
        B = exchange_matrix(current, orientation)
        ak = a_vec[k]
        if all(x >= 0 for x in ak):
            positive = True
            inner = one + mul(ConeSeries.monomial(L, D, ak), H[k])
        elif all(x <= 0 for x in ak):
            positive = False
            inner = one + mul(ConeSeries.monomial(L, D, [-x for x in ak]), power(H[k], -1))
        else:
            raise ValueError(f"c-vector {ak} is not sign-coherent")
        new_a, new_H = [None] * n, [None] * n
        for j in range(n):
            if j == k:
                new_a[j] = [-x for x in ak]
                new_H[j] = power(H[k], -1)
                continue
            b_jk = B[j][k]
            lift = _pos(B[k][j]) if positive else _pos(b_jk)
            new_a[j] = [x + lift * y for x, y in zip(a_vec[j], ak)]
            new_H[j] = mul(mul(H[j], power(H[k], lift)), power(inner, b_jk))
        a_vec, H = new_a, new_H
        current = flip(current, label)
    A = [[a_vec[j][i] for j in range(n)] for i in range(n)]
    return BirationalTorusMap(L, D, A, H)


def strip_relabeling(m: BirationalTorusMap) -> BirationalTorusMap:
    """Express a transition map in the fixed lattice: compose with the inverse lattice part."""
    from .series import _inverse_unimodular

    Ainv = _inverse_unimodular(m.A)
    return compose(BirationalTorusMap.lattice_map(m.lattice, m.D, Ainv), m)


@dataclass(frozen=True)
class Verdict:
    equal: bool
    degree: int
    certificate: str

    def __bool__(self) -> bool:
        return self.equal


def wcf_check(left: BirationalTorusMap, right: BirationalTorusMap, D: int) -> Verdict:
    ok, diff = maps_equal(left, right, D)
    if ok:
        return Verdict(True, D, f"equal to order {D}")
    return Verdict(False, D, f"mismatch: {diff}")


def pentagon_chambers(signs: Sequence[int] = (-1, -1)) -> tuple[BPSStructure, BPSStructure]:
    """The rank-2 lattice with <g1, g2> = 1 on the two sides of its wall.

    In the first chamber Z(g1) lies to the left of Z(g2) and only g1, g2 are
    active; in the second the order is reversed and g1 + g2 appears between them.
    """
    L = ClassLattice(((0, 1), (-1, 0)))
    xi = QuadraticRefinement(tuple(signs))
    two = BPSStructure(L, CentralCharge(("-1", "1"), ("1", "1")), {(1, 0): 1, (0, 1): 1}, xi)
    three = BPSStructure(L, CentralCharge(("1", "-1"), ("1", "1")), {(1, 0): 1, (0, 1): 1, (1, 1): 1}, xi)
    return two, three


UPPER_HALF_PLANE = SectorSpec(1.0, 0.0)
