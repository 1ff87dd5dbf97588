"""Truncated series over the positive cone and substitution maps of the torus.

A ``ConeSeries`` stores exact rational coefficients of monomials x^v with
v >= 0 and total degree <= D.  A ``BirationalTorusMap`` acts on characters by
x^g -> x^{A g} * prod_i F_i^{g_i}; every F_i has constant term 1, so negative
powers exist in the truncated ring.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .lattice import ClassLattice, Vector, as_vector

Coeff = Fraction


def _deg(v: Sequence[int]) -> int:
    return sum(v)


def _add(u: Sequence[int], v: Sequence[int]) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def _sort_key(v: Vector) -> tuple:
    return (sum(v), v)


class ConeSeries:
    """Exact series truncated at total degree ``D`` over a lattice."""

    __slots__ = ("lattice", "D", "_terms")

    def __init__(self, lattice: ClassLattice, D: int, terms: Mapping[Sequence[int], object] | None = None):
        if D < 0:
            raise ValueError("truncation degree must be non-negative")
        self.lattice = lattice
        self.D = int(D)
        clean: dict[Vector, Fraction] = {}
        for key, c in (terms or {}).items():
            v = as_vector(key)
            if len(v) != lattice.rank:
                raise ValueError(f"exponent {v} has wrong length for rank {lattice.rank}")
            if min(v) < 0:
                raise ValueError(f"exponent {v} lies outside the positive cone")
            c = Fraction(c)
            if c and _deg(v) <= self.D:
                clean[v] = clean.get(v, Fraction(0)) + c
        self._terms = {k: c for k, c in clean.items() if c}

    # construction helpers
    @classmethod
    def one(cls, lattice: ClassLattice, D: int) -> "ConeSeries":
        return cls(lattice, D, {lattice.zero(): 1})

    @classmethod
    def zero(cls, lattice: ClassLattice, D: int) -> "ConeSeries":
        return cls(lattice, D)

    @classmethod
    def monomial(cls, lattice: ClassLattice, D: int, v: Sequence[int], c=1) -> "ConeSeries":
        return cls(lattice, D, {tuple(v): c})

    @classmethod
    def _raw(cls, lattice: ClassLattice, D: int, terms: dict) -> "ConeSeries":
        s = cls.__new__(cls)
        s.lattice, s.D = lattice, D
        s._terms = {k: c for k, c in terms.items() if c}
        return s

    # access
    @property
    def terms(self) -> dict[Vector, Fraction]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[Vector, Fraction]]:
        for k in sorted(self._terms, key=_sort_key):
            yield k, self._terms[k]

    def coefficient(self, v: Sequence[int]) -> Fraction:
        return self._terms.get(tuple(v), Fraction(0))

    @property
    def constant(self) -> Fraction:
        return self.coefficient(self.lattice.zero())

    def is_zero(self) -> bool:
        return not self._terms

    def homogeneous_parts(self) -> list[dict[Vector, Fraction]]:
        parts: list[dict[Vector, Fraction]] = [dict() for _ in range(self.D + 1)]
        for k, c in self._terms.items():
            parts[_deg(k)][k] = c
        return parts

    def truncate(self, D: int) -> "ConeSeries":
        return ConeSeries._raw(self.lattice, D, {k: c for k, c in self._terms.items() if _deg(k) <= D})

    def _check(self, other: "ConeSeries") -> None:
        if other.lattice != self.lattice:
            raise ValueError("series live on different lattices")
        if other.D != self.D:
            raise ValueError(f"mismatched truncation: {self.D} vs {other.D}")

    # arithmetic
    def __add__(self, other: "ConeSeries") -> "ConeSeries":
        self._check(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, Fraction(0)) + c
        return ConeSeries._raw(self.lattice, self.D, out)

    def __neg__(self) -> "ConeSeries":
        return ConeSeries._raw(self.lattice, self.D, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: "ConeSeries") -> "ConeSeries":
        return self + (-other)

    def scale(self, c) -> "ConeSeries":
        c = Fraction(c)
        return ConeSeries._raw(self.lattice, self.D, {k: c * v for k, v in self._terms.items()})

    def __mul__(self, other: "ConeSeries") -> "ConeSeries":
        return mul(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConeSeries):
            return NotImplemented
        return self.lattice == other.lattice and self.D == other.D and self._terms == other._terms

    def __repr__(self) -> str:
        if not self._terms:
            return f"ConeSeries(0, D={self.D})"
        parts = [f"{c}*x^{list(k)}" for k, c in self.items()]
        return f"ConeSeries({' + '.join(parts)}, D={self.D})"

    # serialization
    def to_json(self) -> dict:
        return {
            "D": self.D,
            "terms": [{"exp": list(k), "num": str(c.numerator), "den": str(c.denominator)}
                      for k, c in self.items()],
        }

    @classmethod
    def from_json(cls, lattice: ClassLattice, data: dict) -> "ConeSeries":
        terms: dict[Vector, Fraction] = {}
        for t in data["terms"]:
            k = as_vector(t["exp"])
            terms[k] = terms.get(k, Fraction(0)) + Fraction(int(t["num"]), int(t.get("den", 1)))
        return cls(lattice, int(data["D"]), terms)


def _mul_terms(a: Mapping[Vector, Fraction], b: Mapping[Vector, Fraction], D: int) -> dict[Vector, Fraction]:
    out: dict[Vector, Fraction] = {}
    bl = sorted(((_deg(k), k, c) for k, c in b.items()), key=lambda t: t[0])
    for ka, ca in a.items():
        room = D - _deg(ka)
        if room < 0:
            continue
        for db, kb, cb in bl:
            if db > room:
                break
            key = _add(ka, kb)
            out[key] = out.get(key, 0) + ca * cb
    return out


def mul(a: ConeSeries, b: ConeSeries) -> ConeSeries:
    """Convolution product truncated at degree D."""
    a._check(b)
    return ConeSeries._raw(a.lattice, a.D, _mul_terms(a._terms, b._terms, a.D))


def power(a: ConeSeries, m) -> ConeSeries:
    """``a**m`` for a series with constant term 1 and any rational exponent m.

    Uses the Euler-operator recurrence: with b = a^m and homogeneous parts
    a_k, b_n, one has n b_n = sum_{k=1}^n (m k - (n - k)) a_k b_{n-k}.
    """
    if a.constant != 1:
        raise ValueError("power needs a series with constant term exactly 1")
    m = Fraction(m)
    if m == 0:
        return ConeSeries.one(a.lattice, a.D)
    if m == 1:
        return a
    ap = a.homogeneous_parts()
    bp: list[dict[Vector, Fraction]] = [{a.lattice.zero(): Fraction(1)}]
    for n in range(1, a.D + 1):
        acc: dict[Vector, Fraction] = {}
        for k in range(1, n + 1):
            if not ap[k] or not bp[n - k]:
                continue
            w = m * k - (n - k)
            if w == 0:
                continue
            for key, c in _mul_terms(ap[k], bp[n - k], a.D).items():
                acc[key] = acc.get(key, 0) + w * c
        bp.append({key: c / n for key, c in acc.items() if c})
    out: dict[Vector, Fraction] = {}
    for part in bp:
        out.update(part)
    return ConeSeries._raw(a.lattice, a.D, out)


def power_vector(factors: Sequence[ConeSeries], v: Sequence[int], lattice: ClassLattice, D: int) -> ConeSeries:
    """prod_i factors[i] ** v[i]."""
    out = ConeSeries.one(lattice, D)
    for f, e in zip(factors, v):
        if e:
            out = mul(out, power(f, e))
    return out


def poisson_bracket(a: ConeSeries, b: ConeSeries) -> ConeSeries:
    """Bilinear extension of {x_al, x_be} = <al, be> x_{al+be}."""
    a._check(b)
    L, D = a.lattice, a.D
    out: dict[Vector, Fraction] = {}
    bl = sorted(((_deg(k), k, c) for k, c in b._terms.items()), key=lambda t: t[0])
    for ka, ca in a._terms.items():
        room = D - _deg(ka)
        for db, kb, cb in bl:
            if db > room:
                break
            p = L.pair(ka, kb)
            if p:
                key = _add(ka, kb)
                out[key] = out.get(key, 0) + p * ca * cb
    return ConeSeries._raw(L, D, out)


def _nilpotent_exp(step: Callable[[ConeSeries], ConeSeries], start: ConeSeries) -> ConeSeries:
    total, term, k = start, start, 0
    while not term.is_zero():
        k += 1
        term = step(term).scale(Fraction(1, k))
        total = total + term
        if k > start.D + 1:
            raise RuntimeError("derivation failed to raise degree")
    return total


def _check_no_constant(H: ConeSeries) -> None:
    if H.constant != 0:
        raise ValueError("Hamiltonian must have zero constant term")


def exp_flow(H: ConeSeries, target: ConeSeries) -> ConeSeries:
    """Time-1 Hamiltonian flow: sum_k {H, -}^k (target) / k!."""
    _check_no_constant(H)
    return _nilpotent_exp(lambda s: poisson_bracket(H, s), target)


def flow_on_character(H: ConeSeries, beta: Sequence[int]) -> ConeSeries:
    """Multiplier F with exp{H, -}(x_beta) = x_beta * F, for any class beta.

    The derivation {H, x_beta F} = x_beta ({H, F} + F * sum_g <g, beta> H_g x_g)
    acts on the multiplier alone, so beta need not lie in the cone.
    """
    _check_no_constant(H)
    L = H.lattice
    twist = ConeSeries._raw(L, H.D, {g: L.pair(g, beta) * c for g, c in H._terms.items()})
    return _nilpotent_exp(lambda F: poisson_bracket(H, F) + mul(F, twist), ConeSeries.one(L, H.D))


def _identity_matrix(n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))


def _matvec(A: Sequence[Sequence[int]], v: Sequence[int]) -> Vector:
    return tuple(sum(a * x for a, x in zip(row, v)) for row in A)


def _matmul(A, B) -> tuple[tuple[int, ...], ...]:
    n = len(A)
    return tuple(tuple(sum(A[i][k] * B[k][j] for k in range(n)) for j in range(n)) for i in range(n))


def _det(A) -> int:
    M = [[Fraction(x) for x in row] for row in A]
    n, det = len(M), Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c]), None)
        if p is None:
            return 0
        if p != c:
            M[c], M[p] = M[p], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            for j in range(c, n):
                M[r][j] -= f * M[c][j]
    return int(det)


def _inverse_unimodular(A) -> tuple[tuple[int, ...], ...]:
    n = len(A)
    M = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(A)]
    for c in range(n):
        p = next(r for r in range(c, n) if M[r][c])
        M[c], M[p] = M[p], M[c]
        piv = M[c][c]
        M[c] = [x / piv for x in M[c]]
        for r in range(n):
            if r != c and M[r][c]:
                f = M[r][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return tuple(tuple(int(x) for x in row[n:]) for row in M)


class BirationalTorusMap:
    """Pullback x^g -> x^{A g} prod_i F_i^{g_i} on characters.

    ``A`` is stored row-wise and acts on column vectors.  Composition follows
    maps of points: ``compose(f, g)`` is f o g, so its pullback substitutes
    g's pullback into f's.
    """

    __slots__ = ("lattice", "D", "A", "multipliers")

    def __init__(self, lattice: ClassLattice, D: int, A: Sequence[Sequence[int]] | None = None,
                 multipliers: Sequence[ConeSeries] | None = None):
        n = lattice.rank
        self.lattice, self.D = lattice, int(D)
        self.A = _identity_matrix(n) if A is None else tuple(tuple(int(x) for x in row) for row in A)
        if len(self.A) != n or any(len(r) != n for r in self.A):
            raise ValueError("lattice part must be rank x rank")
        if abs(_det(self.A)) != 1:
            raise ValueError("lattice part must be unimodular")
        if multipliers is None:
            multipliers = [ConeSeries.one(lattice, D)] * n
        if len(multipliers) != n:
            raise ValueError("need one multiplier per basis vector")
        fs = []
        for i, f in enumerate(multipliers):
            if f.lattice != lattice:
                raise ValueError("multiplier on a different lattice")
            f = f if f.D == self.D else f.truncate(self.D) if f.D > self.D else None
            if f is None:
                raise ValueError("multiplier truncated below the map degree")
            if f.constant != 1:
                raise ValueError(f"multiplier {i} must have constant term 1")
            fs.append(f)
        self.multipliers = tuple(fs)

    @classmethod
    def identity(cls, lattice: ClassLattice, D: int) -> "BirationalTorusMap":
        return cls(lattice, D)

    @classmethod
    def lattice_map(cls, lattice: ClassLattice, D: int, A) -> "BirationalTorusMap":
        return cls(lattice, D, A)

    def image_class(self, g: Sequence[int]) -> Vector:
        return _matvec(self.A, g)

    def column(self, j: int) -> Vector:
        return tuple(row[j] for row in self.A)

    def is_identity_lattice(self) -> bool:
        return self.A == _identity_matrix(self.lattice.rank)

    def truncate(self, D: int) -> "BirationalTorusMap":
        if D > self.D:
            raise ValueError("cannot raise truncation degree")
        return BirationalTorusMap(self.lattice, D, self.A, [f.truncate(D) for f in self.multipliers])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BirationalTorusMap):
            return NotImplemented
        return maps_equal(self, other, min(self.D, other.D))[0] and self.D == other.D

    def __repr__(self) -> str:
        return f"BirationalTorusMap(A={self.A}, multipliers={self.multipliers}, D={self.D})"

    def to_json(self) -> dict:
        return {
            "D": self.D,
            "lattice": self.lattice.to_json(),
            "lattice_part": [list(r) for r in self.A],
            "multipliers": [f.to_json() for f in self.multipliers],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BirationalTorusMap":
        L = ClassLattice.from_json(data["lattice"])
        D = int(data["D"])
        mults = [ConeSeries.from_json(L, m) for m in data.get("multipliers", [])] or None
        return cls(L, D, data.get("lattice_part"), mults)


def apply_map(m: BirationalTorusMap, g: Sequence[int], D: int | None = None) -> tuple[Vector, ConeSeries]:
    """Image class ``A g`` and tail ``prod_i F_i^{g_i}`` truncated at D."""
    D = m.D if D is None else D
    if D > m.D:
        raise ValueError("requested degree exceeds the map's truncation")
    g = as_vector(g)
    if len(g) != m.lattice.rank:
        raise ValueError("dimension mismatch")
    fs = [f.truncate(D) for f in m.multipliers]
    return m.image_class(g), power_vector(fs, g, m.lattice, D)


def _cone_safe(A) -> bool:
    return all(x >= 0 for row in A for x in row) and all(
        sum(A[i][j] for i in range(len(A))) >= 1 for j in range(len(A)))


def substitute(s: ConeSeries, m: BirationalTorusMap) -> ConeSeries:
    """Apply the pullback of ``m`` to a series: x^d -> x^{A d} prod F^d.

    Exact at degree D only when A maps the cone into itself without lowering
    degree; other lattice parts are rejected unless ``s`` is constant.
    """
    L, D = m.lattice, m.D
    if s.D < D:
        raise ValueError("series truncated below the map degree")
    nonconst = [k for k in s._terms if any(k)]
    if not nonconst:
        return ConeSeries._raw(L, D, {L.zero(): s.constant} if s.constant else {})
    if not _cone_safe(m.A):
        raise ValueError("lattice part does not preserve the positive cone; substitution not exact")
    images: dict[Vector, ConeSeries] = {L.zero(): ConeSeries.one(L, D)}
    gens = [mul(ConeSeries.monomial(L, D, m.column(j)), m.multipliers[j]) for j in range(L.rank)]

    def image(v: Vector) -> ConeSeries:
        got = images.get(v)
        if got is None:
            j = next(i for i, x in enumerate(v) if x)
            prev = v[:j] + (v[j] - 1,) + v[j + 1:]
            got = mul(image(prev), gens[j])
            images[v] = got
        return got

    out: dict[Vector, Fraction] = {}
    for k in sorted(s._terms, key=_sort_key):
        if _deg(k) > D:
            continue
        c = s._terms[k]
        for key, v in image(k)._terms.items():
            out[key] = out.get(key, 0) + c * v
    return ConeSeries._raw(L, D, out)


def compose(f: BirationalTorusMap, g: BirationalTorusMap) -> BirationalTorusMap:
    """The map f o g; its pullback is g* applied after f*."""
    if f.lattice != g.lattice:
        raise ValueError("maps live on different lattices")
    D = min(f.D, g.D)
    f, g = (f if f.D == D else f.truncate(D)), (g if g.D == D else g.truncate(D))
    L = f.lattice
    A = _matmul(g.A, f.A)
    mults = []
    for i in range(L.rank):
        shift = power_vector(g.multipliers, f.column(i), L, D)
        mults.append(mul(shift, substitute(f.multipliers[i], g)))
    return BirationalTorusMap(L, D, A, mults)


def compose_all(maps: Iterable[BirationalTorusMap], lattice: ClassLattice, D: int) -> BirationalTorusMap:
    """Left-to-right composite m1 o m2 o ... (identity when empty)."""
    out = BirationalTorusMap.identity(lattice, D)
    for m in maps:
        out = compose(out, m)
    return out


def inverse(m: BirationalTorusMap) -> BirationalTorusMap:
    """Two-sided inverse to order D.

    For identity lattice part the multipliers solve G = 1 / F(x G) by fixed
    point iteration, each round fixing one more degree.  A general map is
    split as m = (lattice map A) o n.
    """
    L, D = m.lattice, m.D
    if not m.is_identity_lattice():
        Ainv = _inverse_unimodular(m.A)
        n_mults = [power_vector(m.multipliers, _matvec(Ainv, L.basis(i)), L, D) for i in range(L.rank)]
        n = BirationalTorusMap(L, D, None, n_mults)
        return compose(inverse(n), BirationalTorusMap.lattice_map(L, D, Ainv))
    G = BirationalTorusMap.identity(L, D)
    for _ in range(D + 1):
        G = BirationalTorusMap(L, D, None, [power(substitute(F, G), -1) for F in m.multipliers])
    return G


def maps_equal(f: BirationalTorusMap, g: BirationalTorusMap, D: int | None = None) -> tuple[bool, str | None]:
    """Compare lattice parts exactly and multipliers up to degree D.

    Returns ``(True, None)`` or ``(False, description of first difference)``;
    differences are reported in basis order, then by (degree, exponent).
    """
    if f.lattice != g.lattice:
        return False, "maps live on different lattices"
    D = min(f.D, g.D) if D is None else D
    if D > min(f.D, g.D):
        raise ValueError("comparison degree exceeds truncation of an input")
    if f.A != g.A:
        return False, f"lattice parts differ: {f.A} vs {g.A}"
    for i, (a, b) in enumerate(zip(f.multipliers, g.multipliers)):
        diff = (a.truncate(D) - b.truncate(D))
        if not diff.is_zero():
            k, _ = next(diff.items())
            return False, (f"multiplier {i}: coefficient of x^{list(k)} (degree {sum(k)}) "
                           f"is {a.coefficient(k)} vs {b.coefficient(k)}")
    return True, None
