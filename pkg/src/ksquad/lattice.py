"""Charge lattice, skew pairing, central charges, rays and the quadratic refinement.

Classes are plain integer tuples. Charges may be exact (``Fraction`` real and
imaginary parts) or floating point; exact charges give exact ray grouping.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence

Vector = tuple[int, ...]

DEFAULT_PHASE_TOL = 1e-9


def as_vector(g: Iterable[int]) -> Vector:
    raw = list(g)
    out = tuple(int(x) for x in raw)
    if any(x != y for x, y in zip(out, raw)):
        raise ValueError(f"class coordinates must be integers, got {raw!r}")
    return out


def _check_dim(n: int, *vecs: Sequence[int]) -> None:
    for v in vecs:
        if len(v) != n:
            raise ValueError(f"dimension mismatch: expected length {n}, got {len(v)}")


@dataclass(frozen=True)
class ClassLattice:
    """Lattice Z^n with an antisymmetric integer form ``<a, b> = a^T skew b``."""

    skew: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(int(x) for x in row) for row in self.skew)
        object.__setattr__(self, "skew", rows)
        n = len(rows)
        if n == 0:
            raise ValueError("rank-0 lattices are not supported")
        for i, row in enumerate(rows):
            if len(row) != n:
                raise ValueError("skew matrix must be square")
            if row[i] != 0:
                raise ValueError(f"skew[{i}][{i}] must vanish")
            for j in range(i):
                if row[j] != -rows[j][i]:
                    raise ValueError(f"skew is not antisymmetric at ({i}, {j})")

    @property
    def rank(self) -> int:
        return len(self.skew)

    def pair(self, a: Sequence[int], b: Sequence[int]) -> int:
        _check_dim(self.rank, a, b)
        total = 0
        for i, ai in enumerate(a):
            if ai:
                row = self.skew[i]
                total += ai * sum(r * bj for r, bj in zip(row, b))
        return total

    def basis(self, i: int) -> Vector:
        return tuple(1 if j == i else 0 for j in range(self.rank))

    def zero(self) -> Vector:
        return (0,) * self.rank

    def to_json(self) -> dict:
        return {"rank": self.rank, "skew": [list(r) for r in self.skew]}

    @classmethod
    def from_json(cls, data: dict) -> "ClassLattice":
        lat = cls(tuple(tuple(r) for r in data["skew"]))
        if "rank" in data and int(data["rank"]) != lat.rank:
            raise ValueError("declared rank does not match skew matrix")
        return lat


def skew_pair(L: ClassLattice, a: Sequence[int], b: Sequence[int]) -> int:
    """Return ``a^T skew b``."""
    return L.pair(a, b)


def _exact(x) -> Fraction | float:
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Decimal):
        return Fraction(x)
    return float(x)


@dataclass(frozen=True)
class CentralCharge:
    """Values of a homomorphism Z: Gamma -> C on the basis vectors.

    ``re`` and ``im`` hold either Fractions (exact) or floats.
    """

    re: tuple
    im: tuple
    upper_half_plane: bool = False

    def __post_init__(self) -> None:
        re = tuple(_exact(x) for x in self.re)
        im = tuple(_exact(x) for x in self.im)
        if len(re) != len(im) or not re:
            raise ValueError("charge needs matching non-empty re/im lists")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)
        if self.upper_half_plane:
            for i, (x, y) in enumerate(zip(re, im)):
                if not (y > 0 or (y == 0 and x < 0)):
                    raise ValueError(f"basis value {i} is not in the upper half plane")

    @classmethod
    def from_complex(cls, values: Iterable[complex], upper_half_plane: bool = False) -> "CentralCharge":
        vals = [complex(v) for v in values]
        return cls(tuple(v.real for v in vals), tuple(v.imag for v in vals), upper_half_plane)

    @property
    def rank(self) -> int:
        return len(self.re)

    @property
    def exact(self) -> bool:
        return all(isinstance(x, Fraction) for x in self.re + self.im)

    @property
    def basis_values(self) -> tuple[complex, ...]:
        return tuple(complex(float(x), float(y)) for x, y in zip(self.re, self.im))

    def components(self, g: Sequence[int]) -> tuple:
        """Real and imaginary part of Z(g), exact when the charge is exact."""
        _check_dim(self.rank, g)
        x = sum((gi * r for gi, r in zip(g, self.re)), Fraction(0) if self.exact else 0.0)
        y = sum((gi * r for gi, r in zip(g, self.im)), Fraction(0) if self.exact else 0.0)
        return x, y

    def __call__(self, g: Sequence[int]) -> complex:
        x, y = self.components(g)
        return complex(float(x), float(y))

    def to_json(self) -> dict:
        def fmt(v):
            if isinstance(v, Fraction):
                if v.denominator == 1:
                    return str(v.numerator)
                d = Decimal(v.numerator) / Decimal(v.denominator)
                if Fraction(d) == v:
                    return str(d)
                return f"{v.numerator}/{v.denominator}"
            return repr(float(v))

        return {"re": [fmt(v) for v in self.re], "im": [fmt(v) for v in self.im]}

    @classmethod
    def from_json(cls, data: dict) -> "CentralCharge":
        def parse(s):
            if isinstance(s, str) and "/" in s:
                return Fraction(s)
            return _exact(s) if isinstance(s, (str, int)) else float(s)

        return cls(tuple(parse(s) for s in data["re"]), tuple(parse(s) for s in data["im"]),
                   bool(data.get("upper_half_plane", False)))


def eval_charge(Z: CentralCharge, g: Sequence[int]) -> complex:
    """Return ``sum_i g_i Z(e_i)``."""
    return Z(g)


@dataclass(frozen=True)
class QuadraticRefinement:
    """Signs on a basis, extended by xi(a+b) = (-1)^<a,b> xi(a) xi(b)."""

    signs: tuple[int, ...]

    def __post_init__(self) -> None:
        signs = tuple(int(s) for s in self.signs)
        if any(s not in (1, -1) for s in signs):
            raise ValueError("refinement signs must be +1 or -1")
        object.__setattr__(self, "signs", signs)

    def __call__(self, L: ClassLattice, g: Sequence[int]) -> int:
        return refine(self, L, g)

    def to_json(self) -> dict:
        return {"signs": list(self.signs)}

    @classmethod
    def from_json(cls, data: dict) -> "QuadraticRefinement":
        return cls(tuple(data["signs"]))


def refine(xi: QuadraticRefinement, L: ClassLattice, g: Sequence[int]) -> int:
    """Evaluate the refinement on an arbitrary class.

    Adding basis vectors one at a time, every pair of copies of e_i and e_j
    (i < j) contributes <e_i, e_j> once, so the parity is
    sum_{i<j} g_i g_j skew[i][j].
    """
    _check_dim(L.rank, g, xi.signs)
    odd = 0
    for i, s in enumerate(xi.signs):
        if s == -1 and g[i] % 2:
            odd ^= 1
    cross = 0
    for i in range(L.rank):
        if g[i]:
            row = L.skew[i]
            for j in range(i + 1, L.rank):
                cross += g[i] * g[j] * row[j]
    return -1 if (odd ^ (cross % 2)) else 1


def normalize_phase(theta: float) -> float:
    """Map a phase (units of pi) into (-1, 1]."""
    t = math.fmod(theta, 2.0)
    if t <= -1.0:
        t += 2.0
    elif t > 1.0:
        t -= 2.0
    return t


@dataclass(frozen=True)
class Ray:
    """The ray R_{>0} e^{i pi phase} with a membership tolerance."""

    phase: float
    tolerance: float = DEFAULT_PHASE_TOL

    def __post_init__(self) -> None:
        if not self.tolerance > 0:
            raise ValueError("ray tolerance must be positive")
        object.__setattr__(self, "phase", normalize_phase(float(self.phase)))

    def distance(self, theta: float) -> float:
        d = abs(normalize_phase(theta - self.phase))
        return d

    def contains(self, z: complex) -> bool:
        if z == 0:
            return False
        return self.distance(cmath.phase(z) / math.pi) < self.tolerance

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ray):
            return NotImplemented
        return self.distance(other.phase) < max(self.tolerance, other.tolerance)

    def __hash__(self) -> int:
        return hash(round(self.phase / self.tolerance))


def ray_of(z: complex, tol: float = DEFAULT_PHASE_TOL) -> Ray:
    """Ray through ``z``; phases are normalized to (-1, 1]."""
    if abs(z) <= tol:
        raise ValueError("charge too close to the origin to define a ray")
    return Ray(cmath.phase(z) / math.pi, tol)


def same_ray_exact(a: tuple, b: tuple) -> bool:
    """Exact test that two nonzero points (x, y) lie on a common open ray."""
    (x1, y1), (x2, y2) = a, b
    return x1 * y2 - y1 * x2 == 0 and x1 * x2 + y1 * y2 > 0
