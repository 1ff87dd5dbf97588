"""Quantum torus with x_a * x_b = (-q^{1/2})^{<a,b>} x_{a+b}, plethystic exponentials
and refined ray factors.

Coefficients are Laurent polynomials in q^{1/2}; the exponent of q^{1/2} is
stored as an integer (so q itself has exponent 2).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from .lattice import ClassLattice, QuadraticRefinement, Vector, as_vector
from .series import BirationalTorusMap, ConeSeries


class LaurentQ:
    """Finite sum of c_k q^{k/2} with exact rational c_k."""

    __slots__ = ("_c",)

    def __init__(self, coeffs: Mapping[int, object] | None = None):
        self._c = {int(k): Fraction(v) for k, v in (coeffs or {}).items() if Fraction(v)}

    @classmethod
    def const(cls, c) -> "LaurentQ":
        return cls({0: c})

    @classmethod
    def q_half(cls, k: int, c=1) -> "LaurentQ":
        """c * q^{k/2}."""
        return cls({k: c})

    @property
    def coeffs(self) -> dict[int, Fraction]:
        return dict(sorted(self._c.items()))

    def is_zero(self) -> bool:
        return not self._c

    def __bool__(self) -> bool:
        return bool(self._c)

    def __add__(self, other: "LaurentQ") -> "LaurentQ":
        out = dict(self._c)
        for k, v in other._c.items():
            out[k] = out.get(k, 0) + v
        return LaurentQ(out)

    def __neg__(self) -> "LaurentQ":
        return LaurentQ({k: -v for k, v in self._c.items()})

    def __sub__(self, other: "LaurentQ") -> "LaurentQ":
        return self + (-other)

    def __mul__(self, other) -> "LaurentQ":
        if not isinstance(other, LaurentQ):
            c = Fraction(other)
            return LaurentQ({k: c * v for k, v in self._c.items()})
        out: dict[int, Fraction] = {}
        for k1, v1 in self._c.items():
            for k2, v2 in other._c.items():
                out[k1 + k2] = out.get(k1 + k2, 0) + v1 * v2
        return LaurentQ(out)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = LaurentQ.const(other)
        if not isinstance(other, LaurentQ):
            return NotImplemented
        return self._c == other._c

    def __hash__(self) -> int:
        return hash(tuple(sorted(self._c.items())))

    def __repr__(self) -> str:
        if not self._c:
            return "0"
        return " + ".join(f"{v}*q^({k}/2)" for k, v in sorted(self._c.items()))

    def at_one(self) -> Fraction:
        """Value at q^{1/2} = 1 (Laurent polynomials have no pole there)."""
        return sum(self._c.values(), Fraction(0))

    def adams(self, n: int) -> "LaurentQ":
        """Substitute q^{1/2} -> q^{n/2}; n = -1 inverts the variable."""
        return LaurentQ({n * k: v for k, v in self._c.items()})

    def power(self, n: int) -> "LaurentQ":
        if n < 0:
            if len(self._c) != 1:
                raise ValueError("only monomials can be inverted")
            (k, v), = self._c.items()
            return LaurentQ({k * n: Fraction(1) / v ** (-n)})
        out = LaurentQ.const(1)
        for _ in range(n):
            out = out * self
        return out

    def to_json(self) -> dict:
        return {"coeffs": [{"half_exp": k, "num": str(v.numerator), "den": str(v.denominator)}
                           for k, v in sorted(self._c.items())]}

    @classmethod
    def from_json(cls, data) -> "LaurentQ":
        if isinstance(data, (int, str)):
            return cls.const(Fraction(data))
        return cls({int(t["half_exp"]): Fraction(int(t["num"]), int(t.get("den", 1))) for t in data["coeffs"]})


Q = LaurentQ.q_half(2)
Q_INV = LaurentQ.q_half(-2)


def quantum_integer(n: int, t: LaurentQ = Q) -> LaurentQ:
    """[n]_t = (t^n - 1)/(t - 1): 1 + t + ... + t^{n-1}, and -(t^n + ... + t^{-1}) for n < 0."""
    if n >= 0:
        out, p = LaurentQ(), LaurentQ.const(1)
        for _ in range(n):
            out, p = out + p, p * t
        return out
    out = LaurentQ()
    for i in range(n, 0):
        out = out + t.power(i)
    return -out


def _deg(v: Sequence[int]) -> int:
    return sum(v)


class QTorusSeries:
    """Truncated series over the positive cone with LaurentQ coefficients."""

    __slots__ = ("lattice", "D", "_terms")

    def __init__(self, lattice: ClassLattice, D: int, terms: Mapping[Sequence[int], LaurentQ] | None = None):
        self.lattice, self.D = lattice, int(D)
        clean: dict[Vector, LaurentQ] = {}
        for key, c in (terms or {}).items():
            v = as_vector(key)
            if len(v) != lattice.rank or min(v) < 0:
                raise ValueError(f"exponent {v} is not a cone vector of rank {lattice.rank}")
            if not isinstance(c, LaurentQ):
                c = LaurentQ.const(c)
            if _deg(v) <= self.D:
                clean[v] = clean.get(v, LaurentQ()) + c
        self._terms = {k: c for k, c in clean.items() if c}

    @classmethod
    def one(cls, lattice: ClassLattice, D: int) -> "QTorusSeries":
        return cls(lattice, D, {lattice.zero(): LaurentQ.const(1)})

    @classmethod
    def monomial(cls, lattice: ClassLattice, D: int, v: Sequence[int], c: LaurentQ | int = 1) -> "QTorusSeries":
        return cls(lattice, D, {tuple(v): c if isinstance(c, LaurentQ) else LaurentQ.const(c)})

    @property
    def terms(self) -> dict[Vector, LaurentQ]:
        return dict(self._terms)

    def coefficient(self, v: Sequence[int]) -> LaurentQ:
        return self._terms.get(tuple(v), LaurentQ())

    def is_zero(self) -> bool:
        return not self._terms

    def __add__(self, other: "QTorusSeries") -> "QTorusSeries":
        self._check(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, LaurentQ()) + c
        return QTorusSeries(self.lattice, self.D, out)

    def __neg__(self) -> "QTorusSeries":
        return QTorusSeries(self.lattice, self.D, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: "QTorusSeries") -> "QTorusSeries":
        return self + (-other)

    def scale(self, c) -> "QTorusSeries":
        return QTorusSeries(self.lattice, self.D, {k: v * c for k, v in self._terms.items()})

    def __mul__(self, other: "QTorusSeries") -> "QTorusSeries":
        return star_mul(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QTorusSeries):
            return NotImplemented
        return self.lattice == other.lattice and self.D == other.D and self._terms == other._terms

    def __repr__(self) -> str:
        parts = [f"({c})*x^{list(k)}" for k, c in sorted(self._terms.items(), key=lambda t: (_deg(t[0]), t[0]))]
        return f"QTorusSeries({' + '.join(parts) or '0'}, D={self.D})"

    def _check(self, other: "QTorusSeries") -> None:
        if other.lattice != self.lattice or other.D != self.D:
            raise ValueError("series differ in lattice or truncation")

    def to_json(self) -> dict:
        return {"D": self.D, "terms": [{"exp": list(k), "coeff": c.to_json()}
                                       for k, c in sorted(self._terms.items())]}


def _cocycle(p: int) -> LaurentQ:
    """(-q^{1/2})^p."""
    return LaurentQ.q_half(p, -1 if p % 2 else 1)


def star_mul(a: QTorusSeries, b: QTorusSeries) -> QTorusSeries:
    """Twisted convolution x_al * x_be = (-q^{1/2})^{<al,be>} x_{al+be}, truncated."""
    a._check(b)
    L, D = a.lattice, a.D
    out: dict[Vector, LaurentQ] = {}
    bl = sorted(b._terms.items(), key=lambda t: _deg(t[0]))
    for ka, ca in a._terms.items():
        room = D - _deg(ka)
        for kb, cb in bl:
            if _deg(kb) > room:
                break
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, LaurentQ()) + _cocycle(L.pair(ka, kb)) * ca * cb
    return QTorusSeries(L, D, out)


def _check_commuting(L: ClassLattice, classes: Sequence[Vector]) -> None:
    for i, a in enumerate(classes):
        for b in classes[i + 1:]:
            if L.pair(a, b):
                raise ValueError(f"classes {a} and {b} do not commute (<a,b> = {L.pair(a, b)})")


def _series_exp(g: QTorusSeries) -> QTorusSeries:
    """exp(g) for g without constant term and pairwise commuting support."""
    L, D = g.lattice, g.D
    parts = [dict() for _ in range(D + 1)]
    for k, c in g._terms.items():
        parts[_deg(k)][k] = c
    E = [QTorusSeries.one(L, D)]
    for n in range(1, D + 1):
        acc = QTorusSeries(L, D)
        for k in range(1, n + 1):
            if parts[k]:
                acc = acc + star_mul(QTorusSeries(L, D, parts[k]), E[n - k]).scale(k)
        E.append(acc.scale(Fraction(1, n)))
    total = QTorusSeries(L, D)
    for e in E:
        total = total + e
    return total


def plethystic_exp(f: QTorusSeries) -> QTorusSeries:
    """EXP(f) = exp(sum_{n>=1} psi_n(f) / n), psi_n: c(q^{1/2}) x_g -> c(q^{n/2}) x_{ng}."""
    L, D = f.lattice, f.D
    if f.coefficient(L.zero()):
        raise ValueError("plethystic exponential needs zero constant term")
    _check_commuting(L, list(f._terms))
    g: dict[Vector, LaurentQ] = {}
    for k, c in f._terms.items():
        d = _deg(k)
        for n in range(1, D // d + 1):
            key = tuple(n * x for x in k)
            g[key] = g.get(key, LaurentQ()) + c.adams(n) * Fraction(1, n)
    return _series_exp(QTorusSeries(L, D, g))


class QTorusMap:
    """x_{e_i} -> x_{e_i} * G_i with G_i of constant term 1; lattice part identity."""

    __slots__ = ("lattice", "D", "multipliers")

    def __init__(self, lattice: ClassLattice, D: int, multipliers: Sequence[QTorusSeries]):
        if len(multipliers) != lattice.rank:
            raise ValueError("need one multiplier per basis vector")
        for G in multipliers:
            if G.coefficient(lattice.zero()) != LaurentQ.const(1):
                raise ValueError("multipliers must have constant term 1")
        self.lattice, self.D, self.multipliers = lattice, D, tuple(multipliers)

    @classmethod
    def identity(cls, lattice: ClassLattice, D: int) -> "QTorusMap":
        return cls(lattice, D, [QTorusSeries.one(lattice, D)] * lattice.rank)

    def to_json(self) -> dict:
        return {"D": self.D, "lattice": self.lattice.to_json(),
                "multipliers": [G.to_json() for G in self.multipliers]}


def refined_exponent(lattice: ClassLattice, beta: Sequence[int], omega_q: Mapping[Vector, LaurentQ],
                     D: int) -> QTorusSeries:
    """-sum_g q^{-1/2} [<beta, g>]_{q^{-1}} Omega_g(q^{-1/2}) x_g."""
    terms = {}
    for g, om in omega_q.items():
        m = lattice.pair(beta, g)
        if m and om:
            terms[g] = -(LaurentQ.q_half(-1) * quantum_integer(m, Q_INV) * om.adams(-1))
    return QTorusSeries(lattice, D, terms)


def refined_image(lattice: ClassLattice, beta: Sequence[int], omega_q: Mapping[Vector, LaurentQ],
                  D: int) -> QTorusSeries:
    """G with S(x_beta) = x_beta * G."""
    return plethystic_exp(refined_exponent(lattice, beta, omega_q, D))


def refined_factor(lattice: ClassLattice, classes: Sequence[Sequence[int]],
                   omega_q: Mapping[Sequence[int], LaurentQ | int], D: int) -> QTorusMap:
    """Refined factor for one slope class; the classes must pairwise commute."""
    cls_list = [as_vector(g) for g in classes]
    _check_commuting(lattice, cls_list)
    om: dict[Vector, LaurentQ] = {}
    for g, v in omega_q.items():
        g = as_vector(g)
        if g not in cls_list:
            raise ValueError(f"Omega given for {g}, which is not in the slope class")
        om[g] = v if isinstance(v, LaurentQ) else LaurentQ.const(v)
    return QTorusMap(lattice, D, [refined_image(lattice, lattice.basis(i), om, D) for i in range(lattice.rank)])


def classical_limit(obj, xi: QuadraticRefinement | None = None):
    """Set q^{1/2} = 1; with ``xi`` each monomial x_g is rescaled by xi(g).

    The cocycle (-1)^{<a,b>} left at q^{1/2} = 1 is exactly the twisted-torus
    sign, and rescaling by xi moves the result to the untwisted chart.
    """
    if isinstance(obj, QTorusSeries):
        L = obj.lattice
        terms = {k: c.at_one() * (xi(L, k) if xi is not None else 1) for k, c in obj._terms.items()}
        return ConeSeries(L, obj.D, terms)
    if isinstance(obj, QTorusMap):
        return BirationalTorusMap(obj.lattice, obj.D, None, [classical_limit(G, xi) for G in obj.multipliers])
    raise TypeError(f"cannot take the classical limit of {type(obj).__name__}")


def classical_limit_twisted(obj: QTorusSeries) -> ConeSeries:
    """q^{1/2} = 1 without transport (coefficients in the twisted chart)."""
    return classical_limit(obj, None)
