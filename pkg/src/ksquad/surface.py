"""Marked bordered surfaces, tagged triangulations, flips and exchange matrices.

A triangle is a triple of edge labels listed clockwise together with its
three corners: edge ``edges[i]`` runs from ``corners[i]`` to
``corners[i+1]``.  Corner labels name marked points, so punctures keep their
identity (and their sign) through flips.  When corners are omitted they are
reconstructed from the gluing.

Tagged triangulations are stored as a signed ideal triangulation.  A
puncture of valency one sits inside a self-folded triangle; its sign is
normalized to +1 by exchanging the labels of the loop and the inner edge,
which encodes the same tagged arcs.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import conventions
from .lattice import ClassLattice


class TriangulationError(ValueError):
    """An invariant of a (tagged) triangulation is violated."""


@dataclass(frozen=True)
class MarkedBorderedSurface:
    genus: int
    boundary_marked: tuple[int, ...]
    punctures: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "boundary_marked", tuple(int(m) for m in self.boundary_marked))
        if self.genus < 0 or self.punctures < 0:
            raise TriangulationError("genus and puncture count must be non-negative")
        if any(m < 1 for m in self.boundary_marked):
            raise TriangulationError("every boundary component needs a marked point")
        if not self.boundary_marked and self.punctures == 1:
            raise TriangulationError("excluded surface: closed with exactly one marked point")
        if self.num_arcs < 0:
            raise TriangulationError("surface admits no ideal triangulation")

    @property
    def num_boundary(self) -> int:
        return len(self.boundary_marked)

    @property
    def num_arcs(self) -> int:
        c = sum(self.boundary_marked)
        return 6 * self.genus + 3 * self.num_boundary + 3 * self.punctures + c - 6

    @property
    def euler_characteristic(self) -> int:
        return 2 - 2 * self.genus - self.num_boundary

    def to_json(self) -> dict:
        return {"genus": self.genus, "boundary": list(self.boundary_marked), "punctures": self.punctures}

    @classmethod
    def from_json(cls, data: dict) -> "MarkedBorderedSurface":
        return cls(int(data.get("genus", 0)), tuple(data.get("boundary", [])), int(data.get("punctures", 0)))


Triangle = tuple[tuple[str, str, str], tuple[str, str, str]]


def _rotate(tri: Triangle, r: int) -> Triangle:
    e, c = tri
    return (e[r:] + e[:r], c[r:] + c[:r])


def _canonical_rotation(tri: Triangle) -> Triangle:
    return min(_rotate(tri, r) for r in range(3))


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _reconstruct_corners(edge_triples: Sequence[Sequence[str]]) -> list[tuple[str, str, str]]:
    slots: dict[str, list[tuple[int, int]]] = {}
    for t, tri in enumerate(edge_triples):
        for i, e in enumerate(tri):
            slots.setdefault(e, []).append((t, i))
    uf = _UnionFind()
    for e, occ in slots.items():
        if len(occ) == 2:
            (t, i), (u, j) = occ
            uf.union((t, i), (u, (j + 1) % 3))
            uf.union((t, (i + 1) % 3), (u, j))
    names: dict = {}
    out = []
    for t in range(len(edge_triples)):
        row = []
        for i in range(3):
            root = uf.find((t, i))
            if root not in names:
                names[root] = f"v{len(names)}"
            row.append(names[root])
        out.append(tuple(row))
    return out


class TaggedTriangulation:
    """Signed ideal triangulation standing for a tagged triangulation."""

    __slots__ = ("triangles", "signing")

    def __init__(self, triangles: Iterable, corners: Iterable | None = None,
                 signing: dict | None = None, normalize: bool = True):
        edge_triples = [tuple(str(e) for e in t) for t in triangles]
        if any(len(t) != 3 for t in edge_triples):
            raise TriangulationError("triangles must have three sides")
        corner_triples = ([tuple(str(v) for v in c) for c in corners] if corners is not None
                          else _reconstruct_corners(edge_triples))
        if len(corner_triples) != len(edge_triples):
            raise TriangulationError("need one corner triple per triangle")
        tris = [(e, c) for e, c in zip(edge_triples, corner_triples)]
        self.triangles: tuple[Triangle, ...] = tuple(sorted(_canonical_rotation(t) for t in tris))
        sign = {str(p): int(s) for p, s in (signing or {}).items()}
        if any(s not in (1, -1) for s in sign.values()):
            raise TriangulationError("signs must be +1 or -1")
        self.signing = sign
        if normalize:
            self._normalize()

    # basic structure
    def slots(self) -> dict[str, list[tuple[int, int]]]:
        out: dict[str, list[tuple[int, int]]] = {}
        for t, (edges, _) in enumerate(self.triangles):
            for i, e in enumerate(edges):
                out.setdefault(e, []).append((t, i))
        return out

    @property
    def arcs(self) -> tuple[str, ...]:
        return tuple(sorted(e for e, occ in self.slots().items() if len(occ) == 2))

    @property
    def boundary_segments(self) -> tuple[str, ...]:
        return tuple(sorted(e for e, occ in self.slots().items() if len(occ) == 1))

    def endpoints(self, t: int, i: int) -> tuple[str, str]:
        _, c = self.triangles[t]
        return c[i], c[(i + 1) % 3]

    @property
    def vertices(self) -> tuple[str, ...]:
        return tuple(sorted({v for _, c in self.triangles for v in c}))

    @property
    def boundary_vertices(self) -> frozenset[str]:
        slots = self.slots()
        return frozenset(v for b in self.boundary_segments for v in self.endpoints(*slots[b][0]))

    @property
    def punctures(self) -> tuple[str, ...]:
        bv = self.boundary_vertices
        return tuple(v for v in self.vertices if v not in bv)

    def sign(self, p: str) -> int:
        return self.signing.get(p, 1)

    def self_folded(self) -> dict[int, tuple[str, str, str]]:
        """Map triangle index -> (inner edge, loop, puncture) for self-folded triangles."""
        out = {}
        for t, (e, c) in enumerate(self.triangles):
            for i in range(3):
                if e[(i + 1) % 3] == e[(i + 2) % 3]:
                    inner = e[(i + 1) % 3]
                    out[t] = (inner, e[i], c[(i + 2) % 3])
        return out

    def pi(self) -> dict[str, str]:
        """Self-folded inner edges map to their loops; other arcs to themselves."""
        m = {a: a for a in self.arcs}
        for inner, loop, _ in self.self_folded().values():
            m[inner] = loop
        return m

    def valency(self, v: str) -> int:
        count = 0
        slots = self.slots()
        for a in self.arcs:
            count += self.endpoints(*slots[a][0]).count(v)
        return count

    # normalization and equality
    def _normalize(self) -> None:
        changed = True
        while changed:
            changed = False
            for inner, loop, p in self.self_folded().values():
                if self.sign(p) == -1:
                    self.triangles = _swap_labels(self.triangles, inner, loop)
                    self.signing = {**self.signing, p: 1}
                    changed = True
                    break
        self.signing = {p: s for p, s in self.signing.items() if s == -1}

    def key(self) -> tuple:
        return (self.triangles, tuple(sorted(self.signing.items())))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaggedTriangulation):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"TaggedTriangulation({[list(e) for e, _ in self.triangles]}, signing={self.signing})"

    def to_json(self) -> dict:
        sf = {inner: loop for inner, loop, _ in self.self_folded().values()}
        return {
            "triangles": [list(e) for e, _ in self.triangles],
            "vertices": [list(c) for _, c in self.triangles],
            "self_folded": sf,
            "signing": dict(sorted(self.signing.items())),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TaggedTriangulation":
        T = cls(data["triangles"], data.get("vertices"), data.get("signing"))
        declared = data.get("self_folded") or {}
        actual = {inner: loop for inner, loop, _ in T.self_folded().values()}
        if declared and {str(k): str(v) for k, v in declared.items()} != actual:
            raise TriangulationError(f"self_folded marker {declared} does not match triangles {actual}")
        return T


def _swap_labels(triangles: Sequence[Triangle], a: str, b: str) -> tuple[Triangle, ...]:
    sw = {a: b, b: a}
    return tuple(sorted(_canonical_rotation((tuple(sw.get(e, e) for e in es), cs)) for es, cs in triangles))


def validate(T: TaggedTriangulation, S: MarkedBorderedSurface | None = None) -> list[str]:
    """Return a list of violated invariants (empty when T is a valid triangulation of S)."""
    errors: list[str] = []
    if S is None:
        pass
    elif not S.boundary_marked and S.punctures == 1:
        errors.append("excluded surface: closed with exactly one marked point")
    slots = T.slots()
    for e, occ in sorted(slots.items()):
        if len(occ) > 2:
            errors.append(f"arc multiplicity: {e!r} occurs in {len(occ)} triangle slots")
    for e, occ in sorted(slots.items()):
        if len(occ) == 2:
            (t, i), (u, j) = occ
            s1, e1 = T.endpoints(t, i)
            s2, e2 = T.endpoints(u, j)
            if (s1, e1) != (e2, s2):
                errors.append(f"gluing: endpoints of {e!r} do not match ({s1}->{e1} vs {s2}->{e2})")
    if errors:
        return errors
    V, E, F = len(T.vertices), len(slots), len(T.triangles)
    chi = V - E + F
    # boundary components as cycles of boundary segments
    succ: dict[str, str] = {}
    for b in T.boundary_segments:
        s, e = T.endpoints(*slots[b][0])
        if s in succ:
            errors.append(f"boundary: two boundary segments start at {s!r}")
        succ[s] = e
    cycles, seen = [], set()
    for start in sorted(succ):
        if start in seen:
            continue
        length, v = 0, start
        while v not in seen:
            seen.add(v)
            length += 1
            v = succ.get(v)
            if v is None:
                errors.append(f"boundary: chain from {start!r} does not close")
                break
        cycles.append(length)
    for p, s in T.signing.items():
        if p not in T.punctures:
            errors.append(f"signing: {p!r} is not a puncture")
    if S is not None:
        if chi != S.euler_characteristic:
            errors.append(f"euler characteristic {chi} != {S.euler_characteristic}")
        if sorted(cycles) != sorted(S.boundary_marked):
            errors.append(f"boundary marked points {sorted(cycles)} != {sorted(S.boundary_marked)}")
        if len(T.punctures) != S.punctures:
            errors.append(f"punctures: found {len(T.punctures)}, expected {S.punctures}")
        if len(T.arcs) != S.num_arcs:
            errors.append(f"arc count {len(T.arcs)} != {S.num_arcs}")
    return errors


def check(T: TaggedTriangulation, S: MarkedBorderedSurface | None = None) -> None:
    errors = validate(T, S)
    if errors:
        raise TriangulationError("; ".join(errors))


def exchange_matrix(T: TaggedTriangulation, orientation: int | None = None) -> list[list[int]]:
    """B[j][i] = <gamma_j, gamma_i>, summed over non-self-folded triangles.

    A triangle contributes +1 when pi(j) follows pi(i) in its clockwise order
    and -1 when it precedes it; ``orientation`` multiplies the result.
    """
    sign = conventions.ORIENTATION_SIGN if orientation is None else orientation
    if sign not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    arcs = T.arcs
    idx = {a: n for n, a in enumerate(arcs)}
    pi = T.pi()
    pre: dict[str, list[int]] = {}
    for a, img in pi.items():
        pre.setdefault(img, []).append(idx[a])
    B = [[0] * len(arcs) for _ in arcs]
    folded = T.self_folded()
    for t, (edges, _) in enumerate(T.triangles):
        if t in folded:
            continue
        for s in range(3):
            for i in pre.get(edges[s], ()):
                for j in pre.get(edges[(s + 1) % 3], ()):
                    B[j][i] += sign
                    B[i][j] -= sign
    return B


def skew_lattice(T: TaggedTriangulation, orientation: int | None = None) -> ClassLattice:
    return ClassLattice(tuple(tuple(r) for r in exchange_matrix(T, orientation)))


def _ordinary_flip(triangles: tuple[Triangle, ...], k: str) -> tuple[Triangle, ...]:
    occ = [(t, i) for t, (e, _) in enumerate(triangles) for i, x in enumerate(e) if x == k]
    (t, i), (u, j) = occ
    if t == u:
        raise TriangulationError(f"arc {k!r} is the inner edge of a self-folded triangle")
    (_, a, b), (v0, v1, v2) = _rotate(triangles[t], i)
    (_, c, d), (w0, w1, w2) = _rotate(triangles[u], j)
    new1 = ((k, b, c), (w2, v2, v0))
    new2 = ((k, d, a), (v2, w2, v1))
    rest = [tri for n, tri in enumerate(triangles) if n not in (t, u)]
    return tuple(sorted(_canonical_rotation(x) for x in rest + [new1, new2]))


def flip(T: TaggedTriangulation, k: str) -> TaggedTriangulation:
    """Flip the tagged arc labelled ``k``; the new arc keeps the label."""
    k = str(k)
    if k not in T.arcs:
        raise TriangulationError(f"unknown arc label {k!r}")
    triangles, signing = T.triangles, dict(T.signing)
    for inner, loop, p in T.self_folded().values():
        if inner == k:
            # move the tagged arc into the loop position of the other signed representative
            triangles = _swap_labels(triangles, inner, loop)
            signing[p] = -T.sign(p)
            break
    out = TaggedTriangulation.__new__(TaggedTriangulation)
    out.triangles = _ordinary_flip(triangles, k)
    out.signing = signing
    out._normalize()
    return out


def canonical_form(T: TaggedTriangulation) -> tuple:
    """Label-free encoding: internal arcs renamed in breadth-first order.

    The search starts from the smallest boundary segment; closed surfaces
    take the minimum over all starting slots.
    """
    arcs = set(T.arcs)
    slots = T.slots()

    def encode(t0: int, r0: int) -> tuple:
        names: dict[str, str] = {}
        out, seen = [], set()
        queue = deque([(t0, r0)])
        while queue:
            t, r = queue.popleft()
            if t in seen:
                continue
            seen.add(t)
            edges, corners = _rotate(T.triangles[t], r)
            row = []
            for e in edges:
                if e in arcs:
                    if e not in names:
                        names[e] = f"#{len(names)}"
                        for u, j in slots[e]:
                            if u not in seen:
                                queue.append((u, j))
                    row.append(names[e])
                else:
                    row.append(e)
            out.append((tuple(row), corners))
        return tuple(out)

    bsegs = T.boundary_segments
    if bsegs:
        t0, r0 = slots[bsegs[0]][0]
        enc = encode(t0, r0)
    else:
        enc = min(encode(t, r) for t in range(len(T.triangles)) for r in range(3))
    return enc, tuple(sorted(T.signing.items()))


def flip_graph(T: TaggedTriangulation, limit: int = 10_000) -> tuple[list[TaggedTriangulation], set[tuple[int, int]]]:
    """Enumerate triangulations reachable by flips (up to relabelling of arcs)."""
    nodes = [T]
    index = {canonical_form(T): 0}
    edges: set[tuple[int, int]] = set()
    queue = deque([0])
    while queue:
        n = queue.popleft()
        for k in nodes[n].arcs:
            U = flip(nodes[n], k)
            key = canonical_form(U)
            if key not in index:
                if len(nodes) >= limit:
                    raise RuntimeError("flip graph exceeds enumeration limit")
                index[key] = len(nodes)
                nodes.append(U)
                queue.append(index[key])
            m = index[key]
            edges.add((min(n, m), max(n, m)))
    return nodes, edges


def flip_sequence(T1: TaggedTriangulation, T2: TaggedTriangulation, bound: int = 64) -> list[str] | None:
    """Shortest flip sequence from T1 to T2 (labels as in T1), or None beyond ``bound``.

    Ties are broken lexicographically by arc label.
    """
    target = canonical_form(T2)
    start = canonical_form(T1)
    if start == target:
        return []
    parent: dict[tuple, tuple[tuple, str]] = {start: (None, None)}
    frontier = [(start, T1)]
    for _ in range(bound):
        nxt = []
        for key, U in frontier:
            for k in U.arcs:
                V = flip(U, k)
                vk = canonical_form(V)
                if vk in parent:
                    continue
                parent[vk] = (key, k)
                if vk == target:
                    path = []
                    while parent[vk][0] is not None:
                        vk, k = parent[vk]
                        path.append(k)
                    return path[::-1]
                nxt.append((vk, V))
        if not nxt:
            return None
        frontier = nxt
    return None


@dataclass(frozen=True)
class Quiver:
    vertices: int
    arrows: tuple[tuple[int, int], ...]

    def multiplicity(self, i: int, j: int) -> int:
        return sum(1 for a in self.arrows if a == (i, j))


def quiver_from_matrix(B: Sequence[Sequence[int]]) -> Quiver:
    """B[j][i] > 0 gives B[j][i] arrows i -> j."""
    n = len(B)
    for i in range(n):
        for j in range(n):
            if B[i][j] != -B[j][i]:
                raise ValueError("exchange matrix must be antisymmetric")
    arrows = tuple((i, j) for i in range(n) for j in range(n) for _ in range(max(B[j][i], 0)))
    return Quiver(n, arrows)


def euler_form(Q: Quiver, a: Sequence[int], b: Sequence[int]) -> int:
    if len(a) != Q.vertices or len(b) != Q.vertices:
        raise ValueError("dimension mismatch")
    return sum(x * y for x, y in zip(a, b)) - sum(a[i] * b[j] for i, j in Q.arrows)


def euler_skew_form(Q: Quiver, a: Sequence[int], b: Sequence[int]) -> int:
    """(a, b) - (b, a) for the Euler form of the quiver."""
    return euler_form(Q, a, b) - euler_form(Q, b, a)


# standard triangulations

def polygon_triangulation(m: int, triangles: Iterable[Sequence[int]]) -> TaggedTriangulation:
    """Triangulation of a disk with marked points 0..m-1 placed counterclockwise.

    Triangles are vertex triples; edges are named ``b{i}`` for the boundary
    segment i -> i+1 and ``d{i}_{j}`` for the diagonal between i < j.
    """
    def name(i: int, j: int) -> str:
        i, j = min(i, j), max(i, j)
        if j - i == 1:
            return f"b{i}"
        if (i, j) == (0, m - 1):
            return f"b{m - 1}"
        return f"d{i}_{j}"

    tris, corners = [], []
    for tri in triangles:
        i, j, l = sorted(tri)
        # counterclockwise i < j < l; clockwise traversal i -> l -> j -> i
        tris.append((name(i, l), name(j, l), name(i, j)))
        corners.append((f"m{i}", f"m{l}", f"m{j}"))
    return TaggedTriangulation(tris, corners)


def polygon_fan(m: int) -> TaggedTriangulation:
    return polygon_triangulation(m, [(0, i, i + 1) for i in range(1, m - 1)])


def annulus_triangulation(outer: int, inner: int) -> TaggedTriangulation:
    """Zig-zag triangulation of an annulus with the given marked points."""
    tris, corners = [], []
    u = v = 0
    steps = ["o"] * outer + ["i"] * inner
    for t, step in enumerate(steps):
        s_cur, s_next = f"s{t}", f"s{(t + 1) % len(steps)}"
        if step == "o":
            nu = (u + 1) % outer
            tris.append((s_cur, s_next, f"bo{u}"))
            corners.append((f"o{u}", f"i{v}", f"o{nu}"))
            u = nu
        else:
            nv = (v + 1) % inner
            tris.append((s_cur, f"bi{v}", s_next))
            corners.append((f"o{u}", f"i{v}", f"i{nv}"))
            v = nv
    return TaggedTriangulation(tris, corners)


def punctured_polygon_triangulation(m: int) -> TaggedTriangulation:
    """Star triangulation of a once-punctured disk with m boundary marked points."""
    tris, corners = [], []
    for i in range(m):
        j = (i + 1) % m
        # triangle m_i, m_j, p: counterclockwise i -> j -> p, so clockwise i -> p -> j
        tris.append((f"r{i}", f"r{j}", f"b{i}"))
        corners.append((f"m{i}", "p", f"m{j}"))
    return TaggedTriangulation(tris, corners)


def surface_of(T: TaggedTriangulation) -> MarkedBorderedSurface:
    """Recover (genus, boundary, punctures) from a triangulation's cell structure."""
    slots = T.slots()
    succ = {}
    for b in T.boundary_segments:
        s, e = T.endpoints(*slots[b][0])
        succ[s] = e
    cycles, seen = [], set()
    for s in sorted(succ):
        if s in seen:
            continue
        n, v = 0, s
        while v not in seen:
            seen.add(v)
            n += 1
            v = succ[v]
        cycles.append(n)
    chi = len(T.vertices) - len(slots) + len(T.triangles)
    genus = (2 - len(cycles) - chi) // 2
    return MarkedBorderedSurface(genus, tuple(sorted(cycles)), len(T.punctures))
