"""Numerical side for phi = P(z) dz^2 on the sphere, P a polynomial with simple zeros.

Trajectories of phase theta are straight lines in the flat coordinate
w = int sqrt(P) dz, running along e^{i pi theta}.  The tracer follows that
line directly: each step solves int_z^{z'} sqrt(P) dz = e^{i pi theta} h for
z' by Newton's method with a short Gauss-Legendre rule, carrying the branch
of sqrt(P) by continuity.  Periods are 2 int sqrt(P) dz along a polyline with
the square-root singularity at end zeros removed by z = a + (q - a) u^2.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .lattice import CentralCharge, ClassLattice, QuadraticRefinement, Vector
from .surface import TaggedTriangulation, exchange_matrix, polygon_triangulation


class ScannerError(RuntimeError):
    """Numerical failure in the scanner."""


class GMNViolation(ValueError):
    """The polynomial has a (numerically) repeated root or too small degree."""


class BranchError(ScannerError):
    """Continuation of sqrt(P) jumped between sheets."""


class RefineGridError(ScannerError):
    """Two saddle phases could not be separated on the scan grid."""


class ActivePhaseError(ScannerError):
    """A WKB triangulation was requested at a phase carrying a saddle."""


class ClassificationError(ScannerError):
    """A period is not an integer combination of the frame periods."""


@dataclass(frozen=True)
class Tolerances:
    root_tol: float = 1e-9
    hit_tol: float = 1e-6
    bisect_tol: float = 1e-8
    quad_tol: float = 1e-10
    class_tol: float = 1e-6
    phase_tol: float = 1e-6
    step_fraction: float = 0.25
    max_steps: int = 20000
    escape_factor: float = 10.0
    grid: int = 64


DEFAULT_TOL = Tolerances()

_GL = {n: np.polynomial.legendre.leggauss(n) for n in (6, 8, 16)}


def _aligned_sqrt(w: complex, ref: complex) -> complex:
    s = cmath.sqrt(w)
    return s if s.real * ref.real + s.imag * ref.imag >= 0 else -s


class PolynomialDifferential:
    """phi = P(z) dz^2 with P given by coefficients, highest degree first."""

    def __init__(self, coeffs: Sequence[complex], tol: Tolerances = DEFAULT_TOL):
        c = [complex(x) for x in coeffs]
        while c and c[0] == 0:
            c.pop(0)
        if len(c) < 3:
            raise GMNViolation("need degree >= 2 for saddle connections")
        self.coeffs = tuple(c)
        self.tol = tol
        self.roots = self._compute_roots()
        self.lead = c[0]
        self._deflated = [np.polydiv(np.array(c), np.array([1, -r]))[0] for r in self.roots]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def pole_order(self) -> int:
        return self.degree + 4

    @property
    def marked_points(self) -> int:
        return self.degree + 2

    @property
    def rank(self) -> int:
        return self.degree - 1

    @property
    def escape_radius(self) -> float:
        return self.tol.escape_factor * (1 + max(abs(r) for r in self.roots))

    @property
    def min_separation(self) -> float:
        return min(abs(a - b) for a, b in itertools.combinations(self.roots, 2))

    def _compute_roots(self) -> tuple[complex, ...]:
        raw = np.roots(np.array(self.coeffs))
        polished = []
        d = np.polyder(np.array(self.coeffs))
        for r in raw:
            r = complex(r)
            for _ in range(8):
                dp = complex(np.polyval(d, r))
                if dp == 0:
                    break
                step = complex(np.polyval(np.array(self.coeffs), r)) / dp
                r -= step
                if abs(step) < 1e-16 * (1 + abs(r)):
                    break
            polished.append(r)
        polished.sort(key=lambda z: (round(z.real, 12), round(z.imag, 12)))
        for a, b in itertools.combinations(polished, 2):
            if abs(a - b) <= self.tol.root_tol * max(1.0, abs(a)) or abs(a - b) < 1e3 * self.tol.root_tol:
                raise GMNViolation(f"GMN violation: repeated root near {a:.6g}")
        return tuple(polished)

    def P(self, z: complex) -> complex:
        out = self.lead
        for r in self.roots:
            out *= z - r
        return out

    def P_array(self, z: np.ndarray) -> np.ndarray:
        out = np.full(z.shape, self.lead, dtype=complex)
        for r in self.roots:
            out = out * (z - r)
        return out

    def Q_array(self, i: int, z: np.ndarray) -> np.ndarray:
        """P(z) / (z - root_i), evaluated without cancellation."""
        out = np.full(z.shape, self.lead, dtype=complex)
        for j, r in enumerate(self.roots):
            if j != i:
                out = out * (z - r)
        return out

    def dP(self, z: complex) -> complex:
        return complex(np.polyval(np.polyder(np.array(self.coeffs)), z))

    def rotated(self, theta0: float) -> "PolynomialDifferential":
        """e^{-2 pi i theta0} phi: its phase-theta trajectories are phi's at theta + theta0."""
        f = cmath.exp(-2j * math.pi * theta0)
        return PolynomialDifferential([f * c for c in self.coeffs], self.tol)

    def scaled(self, c: complex) -> "PolynomialDifferential":
        return PolynomialDifferential([c * c * x for x in self.coeffs], self.tol)

    def direction_index(self, z: complex, theta: float) -> tuple[int, float]:
        """Nearest asymptotic direction at infinity and the fractional mismatch."""
        n = self.degree + 2
        x = n * cmath.phase(z) / (2 * math.pi) - theta + cmath.phase(self.lead) / (2 * math.pi)
        m = round(x)
        return m % n, abs(x - m)

    def direction_angle(self, m: int, theta: float) -> float:
        n = self.degree + 2
        return 2 * math.pi * (theta + m - cmath.phase(self.lead) / (2 * math.pi)) / n


def roots(coeffs: Sequence[complex], tol: Tolerances = DEFAULT_TOL) -> tuple[complex, ...]:
    return PolynomialDifferential(coeffs, tol).roots


# ---------------------------------------------------------------- quadrature

def _gl_segment(fz, u0: float, u1: float, n: int, ref: complex):
    """Gauss-Legendre on [u0, u1] (either orientation) of jac(u) * t(u) with t tracked.

    ``fz(u)`` returns (jacobian values, values whose square root is tracked).
    """
    x, w = _GL[n]
    if u1 < u0:
        x, w = x[::-1], w[::-1]
    u = 0.5 * (u0 + u1) + 0.5 * (u1 - u0) * x
    jac, radicand = fz(u)
    roots_ = np.sqrt(radicand)
    worst = 0.0
    vals = np.empty_like(roots_)
    r = ref
    for i, s in enumerate(roots_):
        s = complex(s)
        if s.real * r.real + s.imag * r.imag < 0:
            s = -s
        denom = max(abs(s), abs(r))
        if denom > 0:
            worst = max(worst, abs(s - r) / denom)
        vals[i] = s
        r = s
    total = 0.5 * (u1 - u0) * complex(np.sum(w * jac * vals))
    return total, r, worst


def _adaptive(fz, u0: float, u1: float, ref: complex, tol: float, depth: int = 0):
    a, ra, ja = _gl_segment(fz, u0, u1, 8, ref)
    b, rb, jb = _gl_segment(fz, u0, u1, 16, ref)
    err = abs(a - b)
    if (err <= tol and jb < 0.5) or depth > 40:
        if jb >= 0.5:
            raise BranchError("square-root branch jumped by more than 50% in one step")
        return b, rb, err
    um = 0.5 * (u0 + u1)
    left, rl, el = _adaptive(fz, u0, um, ref, tol / 2, depth + 1)
    right, rr, er = _adaptive(fz, um, u1, rl, tol / 2, depth + 1)
    return left + right, rr, el + er


def path_integral(phi: PolynomialDifferential, pts: Sequence[complex], start_zero: int | None = None,
                  end_zero: int | None = None, ref: complex | None = None, tol: float | None = None):
    """int sqrt(P) dz along the polyline ``pts`` with a continuous branch.

    ``start_zero``/``end_zero`` flag that the first/last point is that root.
    Returns (integral, error estimate, sqrt(P) at the final point or None).
    """
    tol = phi.tol.quad_tol if tol is None else tol
    pts = [complex(p) for p in pts]
    if len(pts) < 2:
        return 0j, 0.0, ref
    if len(pts) == 2 and start_zero is not None and end_zero is not None:
        mid = 0.5 * (pts[0] + pts[1])
        pts = [pts[0], mid, pts[1]]
    nseg = len(pts) - 1
    total, err = 0j, 0.0
    per = tol / nseg
    for i in range(nseg):
        p, q = pts[i], pts[i + 1]
        if i == 0 and start_zero is not None:
            a = start_zero
            sq = cmath.sqrt(q - p)

            def fz(u, p=p, q=q, a=a):
                z = p + (q - p) * u * u
                return 2 * (q - p) * sq * u * u, phi.Q_array(a, z)

            t_ref = cmath.sqrt(phi.Q_array(a, np.array([p]))[0]) if ref is None else ref / sq
            val, t_end, e = _adaptive(fz, 0.0, 1.0, t_ref, per)
            ref = sq * t_end
        elif i == nseg - 1 and end_zero is not None:
            b = end_zero
            sq = cmath.sqrt(p - q)

            def fz(u, p=p, q=q, b=b):
                z = q + (p - q) * u * u
                return 2 * (p - q) * sq * u * u, phi.Q_array(b, z)

            t_ref = cmath.sqrt(phi.Q_array(b, np.array([p]))[0]) if ref is None else ref / sq
            val, _, e = _adaptive(fz, 1.0, 0.0, t_ref, per)
            ref = 0j
        else:
            def fz(u, p=p, q=q):
                z = p + (q - p) * u
                return np.full(u.shape, q - p), phi.P_array(z)

            r0 = cmath.sqrt(phi.P(p)) if ref is None else ref
            val, ref, e = _adaptive(fz, 0.0, 1.0, r0, per)
        total += val
        err += e
    return total, err, ref


def period(phi: PolynomialDifferential, a: int, b: int, path: Sequence[complex] | None = None) -> complex:
    """Z = 2 int_a^b sqrt(P) dz along ``path`` (interior points; default straight segment)."""
    pts = [phi.roots[a], *(path or []), phi.roots[b]]
    val, err, _ = path_integral(phi, pts, a, b)
    if err > max(phi.tol.quad_tol, 1e-12 * abs(val)) * 10:
        raise ScannerError(f"quadrature did not converge (error estimate {err:.3g})")
    return 2 * val


# ---------------------------------------------------------------- tracing

@dataclass
class Trajectory:
    phase: float
    points: list[complex]
    termination: str  # "hit", "escaped", "step_limit", "closed"
    zero: int | None = None
    direction: int | None = None
    distance: float | None = None
    length: float = 0.0
    approach: dict = field(default_factory=dict)  # zero -> (flat distance, signed offset)

    @property
    def outcome(self) -> tuple:
        if self.termination == "hit":
            return ("hit", self.zero)
        if self.termination == "escaped":
            return ("esc", self.direction)
        return (self.termination, None)


_GL6_U = [0.5 + 0.5 * float(x) for x in _GL[6][0]]
_GL6_W = [0.5 * float(w) for w in _GL[6][1]]


def _short_integral(phi: PolynomialDifferential, z0: complex, z1: complex, s0: complex):
    """int_{z0}^{z1} sqrt(P) dz on a short segment, branch continued from s0."""
    lead, rts = phi.lead, phi.roots
    dz = z1 - z0
    r = s0
    acc = 0j
    for u, w in zip(_GL6_U, _GL6_W):
        z = z0 + dz * u
        p = lead
        for c in rts:
            p *= z - c
        s = cmath.sqrt(p)
        if s.real * r.real + s.imag * r.imag < 0:
            s = -s
        acc += w * s
        r = s
    return dz * acc, _aligned_sqrt(phi.P(z1), r)


def trace(phi: PolynomialDifferential, start: complex, theta: float, s0: complex | None = None,
          exclude: int | None = None, max_steps: int | None = None, detect_closed: bool = False,
          label_phase: float | None = None) -> Trajectory:
    """Follow the phase-theta trajectory from ``start`` in the direction e^{i pi theta} / sqrt(P).

    ``s0`` fixes the branch of sqrt(P) at the start (and so the direction);
    ``exclude`` suppresses hit detection at that zero until the path has left it.
    Escape directions are labelled at ``label_phase`` (default theta); the
    labels shift by one when theta moves by 1, so backward traces pass the
    forward phase here.
    """
    tol = phi.tol
    max_steps = tol.max_steps if max_steps is None else max_steps
    e = cmath.exp(1j * math.pi * theta)
    z = complex(start)
    s = cmath.sqrt(phi.P(z)) if s0 is None else _aligned_sqrt(phi.P(z), s0)
    if s == 0:
        raise ScannerError("trajectory started at a zero")
    roots_ = phi.roots
    sep = phi.min_separation
    R = phi.escape_radius
    pts = [z]
    flat = 0.0
    approach: dict[int, tuple[float, float]] = {}
    released = exclude is None
    z_start = z
    left_start = False
    for _ in range(max_steps):
        dists = [abs(z - r) for r in roots_]
        scale = min(min(dists), 1.0 + abs(z))
        hz = tol.step_fraction * scale
        hw = hz * abs(s)
        target = e * hw
        zn = z + target / s
        zn = z + target / _aligned_sqrt(phi.P(0.5 * (z + zn)), s)
        s_end = s
        for _it in range(8):
            G, s_end = _short_integral(phi, z, zn, s)
            resid = G - target
            zn -= resid / s_end
            # quadratic convergence: this correction leaves ~ (resid/hw)^2
            if abs(resid) <= 1e-7 * hw:
                break
        s_new = _aligned_sqrt(phi.P(zn), s_end)
        if abs(s_new - s) > 0.5 * max(abs(s), abs(s_new)) * 4:
            raise BranchError("branch of sqrt(P) jumped along a trajectory")
        z_prev, z, s = z, zn, s_new
        pts.append(z)
        flat += hw
        if not released and abs(z - roots_[exclude]) > 0.25 * sep:
            released = True
        for i, r in enumerate(roots_):
            if i == exclude and not released:
                continue
            if abs(z - r) < 0.5 * sep:
                dw = (2.0 / 3.0) * (z - r) * s
                fd = abs(dw)
                off = (dw * e.conjugate()).imag
                if i not in approach or fd < approach[i][0]:
                    approach[i] = (fd, off)
                if fd < tol.hit_tol:
                    return Trajectory(theta, pts, "hit", zero=i, distance=fd, length=flat, approach=approach)
        if detect_closed:
            if not left_start and abs(z - z_start) > 10 * abs(pts[1] - pts[0]):
                left_start = True
            elif left_start:
                d = _point_segment_distance(z_start, z_prev, z)
                if d < tol.hit_tol * (1 + abs(z_start)):
                    return Trajectory(theta, pts, "closed", length=flat, approach=approach)
        if abs(z) > R:
            m, mismatch = phi.direction_index(z, theta if label_phase is None else label_phase)
            if mismatch < 0.25 or abs(z) > 100 * R:
                return Trajectory(theta, pts, "escaped", direction=m, length=flat, approach=approach)
    return Trajectory(theta, pts, "step_limit", length=flat, approach=approach)


def _point_segment_distance(p: complex, a: complex, b: complex) -> float:
    ab = b - a
    if ab == 0:
        return abs(p - a)
    t = ((p - a) * ab.conjugate()).real / abs(ab) ** 2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * ab))


def separatrices(phi: PolynomialDifferential, i: int, theta: float) -> list[complex]:
    """Unit directions d at root i with arg P'(z0) + 3 arg d = 2 pi theta (mod 2 pi)."""
    a = cmath.phase(phi.dP(phi.roots[i]))
    return [cmath.exp(1j * (2 * math.pi * theta - a + 2 * math.pi * j) / 3) for j in range(3)]


def _separatrix_start(phi: PolynomialDifferential, i: int, d: complex, theta: float) -> tuple[complex, complex]:
    rho = 1e-7 * max(1.0, phi.min_separation)
    z0 = phi.roots[i] + rho * d
    s = cmath.sqrt(phi.P(z0))
    e = cmath.exp(1j * math.pi * theta)
    if ((e / s) * d.conjugate()).real < 0:
        s = -s
    return z0, s


def trace_separatrix(phi: PolynomialDifferential, i: int, j: int, theta: float) -> Trajectory:
    d = separatrices(phi, i, theta)[j]
    z0, s = _separatrix_start(phi, i, d, theta)
    traj = trace(phi, z0, theta, s, exclude=i)
    traj.points.insert(0, phi.roots[i])
    return traj


# ---------------------------------------------------------------- saddles

@dataclass
class SaddleRecord:
    zero_a: int
    zero_b: int
    phase: float
    period: complex
    path: list[complex] = field(repr=False, default_factory=list)
    cls: Vector | None = None

    @property
    def closed(self) -> bool:
        return self.zero_a == self.zero_b

    def phase_mismatch(self) -> float:
        """|arg(Z)/pi - phase| modulo 1."""
        d = (cmath.phase(self.period) / math.pi - self.phase) % 1.0
        return min(d, 1.0 - d)

    def horizontal_defect(self) -> float:
        """Im(e^{-i pi phase} Z) relative to |Z|, and a flag that the real part is positive."""
        w = self.period * cmath.exp(-1j * math.pi * self.phase)
        return abs(w.imag) / abs(w) if w.real > 0 else math.inf


def _within(theta: float, window: tuple[float, float]) -> float | None:
    lo, hi = window
    for shift in (-2, 0, 2):
        t = theta + shift
        if lo < t <= hi:
            return t
    return None


def _saddle_from_trace(phi: PolynomialDifferential, a: int, traj: Trajectory, theta: float,
                       window: tuple[float, float]) -> SaddleRecord:
    b = traj.zero
    pts = traj.points[:]
    # points[0] is root a; finish exactly at root b
    path = pts[1:]
    val, err, _ = path_integral(phi, [phi.roots[a], *path, phi.roots[b]], a, b)
    Z = 2 * val
    w = Z * cmath.exp(-1j * math.pi * theta)
    if w.real < 0:
        Z = -Z
    return SaddleRecord(a, b, theta, Z, [phi.roots[a], *path, phi.roots[b]])


def _locate(phi: PolynomialDifferential, a: int, j: int, lo: float, t_lo: Trajectory,
            hi: float, t_hi: Trajectory, window, out: list, depth: int = 0) -> None:
    """Find all saddle phases for separatrix (a, j) between lo and hi."""
    tol = phi.tol
    if t_lo.outcome == t_hi.outcome or depth > 12:
        return
    # stage 1: bisect on the outcome until a zero is singled out
    target = None
    while hi - lo > tol.bisect_tol:
        mid = 0.5 * (lo + hi)
        tm = trace_separatrix(phi, a, j, mid)
        if tm.termination == "hit":
            target = (mid, tm)
            break
        if tm.outcome == t_lo.outcome:
            lo, t_lo = mid, tm
        elif tm.outcome == t_hi.outcome:
            hi, t_hi = mid, tm
        else:
            # a third outcome: split and handle both halves
            _locate(phi, a, j, lo, t_lo, mid, tm, window, out, depth + 1)
            _locate(phi, a, j, mid, tm, hi, t_hi, window, out, depth + 1)
            return
    if target is None:
        near = _closest_zero(t_lo, t_hi)
        if near is None:
            raise RefineGridError(f"unresolved escape jump for zero {a} near phase {0.5 * (lo + hi):.9f}")
        b = near
    else:
        b = target[1].zero
    # stage 2: bisect on the signed miss distance to zero b
    f_lo = _offset(t_lo, b)
    f_hi = _offset(t_hi, b)
    if f_lo is None or f_hi is None or f_lo * f_hi > 0:
        if target is None:
            raise RefineGridError(f"cannot bracket saddle from zero {a} near phase {0.5 * (lo + hi):.9f}")
        theta_star = target[0]
    else:
        while hi - lo > tol.bisect_tol:
            mid = 0.5 * (lo + hi)
            tm = trace_separatrix(phi, a, j, mid)
            fm = _offset(tm, b)
            if fm is None:
                break
            if fm * f_lo > 0:
                lo, f_lo = mid, fm
            else:
                hi, f_hi = mid, fm
        theta_star = 0.5 * (lo + hi)
    tm = trace_separatrix(phi, a, j, theta_star)
    if tm.termination != "hit":
        raise RefineGridError(f"no zero hit at bisected phase {theta_star:.10f} (zero {a})")
    rec = _saddle_from_trace(phi, a, tm, theta_star, window)
    out.append(rec)
    eps = 4 * tol.bisect_tol
    left = trace_separatrix(phi, a, j, theta_star - eps)
    right = trace_separatrix(phi, a, j, theta_star + eps)
    if theta_star - eps > lo:
        _locate(phi, a, j, lo, t_lo, theta_star - eps, left, window, out, depth + 1)
    if theta_star + eps < hi:
        _locate(phi, a, j, theta_star + eps, right, hi, t_hi, window, out, depth + 1)


def _closest_zero(t1: Trajectory, t2: Trajectory) -> int | None:
    best = None
    for t in (t1, t2):
        for i, (fd, _) in t.approach.items():
            if best is None or fd < best[0]:
                best = (fd, i)
    return None if best is None else best[1]


def _offset(t: Trajectory, b: int) -> float | None:
    got = t.approach.get(b)
    return None if got is None else got[1]


def find_saddles(phi: PolynomialDifferential, window: tuple[float, float] = (0.0, 1.0),
                 grid: int | None = None) -> list[SaddleRecord]:
    """Saddle connections with phase in the half-open window (lo, hi], one per trajectory."""
    lo, hi = float(window[0]), float(window[1])
    if hi - lo > 1 + 1e-12:
        raise ValueError("window longer than 1")
    if hi <= lo:
        return []
    tol = phi.tol
    n = grid or tol.grid
    thetas = [lo + (hi - lo) * g / n for g in range(n + 1)]
    found: list[SaddleRecord] = []
    for a in range(len(phi.roots)):
        for j in range(3):
            trajs = [trace_separatrix(phi, a, j, t) for t in thetas]
            for g in range(n):
                if trajs[g].termination == "hit":
                    rec = _saddle_from_trace(phi, a, trajs[g], thetas[g], window)
                    found.append(rec)
                    continue
                if trajs[g + 1].termination == "hit":
                    continue
                _locate(phi, a, j, thetas[g], trajs[g], thetas[g + 1], trajs[g + 1], window, found)
            if trajs[n].termination == "hit":
                found.append(_saddle_from_trace(phi, a, trajs[n], thetas[n], window))
    return _dedupe(phi, found, (lo, hi))


def _dedupe(phi: PolynomialDifferential, recs: list[SaddleRecord], window) -> list[SaddleRecord]:
    out: list[SaddleRecord] = []
    tol = phi.tol
    for r in recs:
        t = _within(r.phase, window)
        if t is None:
            continue
        r.phase = t
        dup = False
        for o in out:
            same_pair = {o.zero_a, o.zero_b} == {r.zero_a, r.zero_b}
            if same_pair and abs(o.phase - r.phase) < 100 * tol.phase_tol and \
                    abs(o.period - r.period) < 1e-5 * (1 + abs(o.period)):
                dup = True
                break
        if not dup:
            out.append(r)
    out.sort(key=lambda r: (r.phase, min(r.zero_a, r.zero_b), max(r.zero_a, r.zero_b)))
    return out


# ---------------------------------------------------------------- WKB triangulation

def _zero_triangle(phi: PolynomialDifferential, i: int, theta: float) -> tuple[int, int, int]:
    ends = []
    for j in range(3):
        t = trace_separatrix(phi, i, j, theta)
        if t.termination != "escaped":
            raise ActivePhaseError(f"separatrix {j} of zero {i} does not escape at phase {theta} ({t.termination})")
        ends.append(t.direction)
    if len(set(ends)) != 3:
        raise ScannerError(f"separatrices of zero {i} share an asymptotic direction: {ends}")
    return tuple(sorted(ends))


def wkb_triangles(phi: PolynomialDifferential, theta: float) -> dict[int, tuple[int, int, int]]:
    """Zero index -> vertices of the triangle containing it."""
    return {i: _zero_triangle(phi, i, theta) for i in range(len(phi.roots))}


def _away_index(phi: PolynomialDifferential, pts: Sequence[complex], i: int) -> int:
    """First sample at a comfortable distance from its starting zero."""
    r = phi.roots[i]
    for k in range(1, len(pts) - 1):
        if abs(pts[k] - r) > 0.3 * phi.min_separation:
            return k
    return len(pts) - 2


def generic_arcs(phi: PolynomialDifferential, theta: float, offset: float = 1e-2) -> set[tuple[int, int]]:
    """Endpoint pairs of generic trajectories running beside each separatrix."""
    e = cmath.exp(1j * math.pi * theta)
    pairs = set()
    for i in range(len(phi.roots)):
        for j in range(3):
            sep = trace_separatrix(phi, i, j, theta)
            if sep.termination != "escaped":
                raise ActivePhaseError(f"phase {theta} carries a saddle (zero {i})")
            k = _away_index(phi, sep.points, i)
            p, q = sep.points[k], sep.points[k + 1]
            tangent = (q - p) / abs(q - p)
            normal = 1j * tangent
            dist = min(abs(p - r) for r in phi.roots)
            for side in (1, -1):
                z = p + side * offset * dist * normal
                s = cmath.sqrt(phi.P(z))
                if ((e / s) * tangent.conjugate()).real < 0:
                    s = -s
                fwd = trace(phi, z, theta, s)
                bwd = trace(phi, z, theta + 1.0, s, label_phase=theta)
                if fwd.termination != "escaped" or bwd.termination != "escaped":
                    raise ActivePhaseError(f"generic trajectory near zero {i} did not escape at phase {theta}")
                a_, b_ = sorted((fwd.direction, bwd.direction))
                if a_ != b_:
                    pairs.add((a_, b_))
    return pairs


def wkb_triangulation(phi: PolynomialDifferential, theta: float, check_generic: bool = True) -> TaggedTriangulation:
    """Triangulation of the (k+2)-gon cut out by the phase-theta foliation."""
    tris = wkb_triangles(phi, theta)
    n = phi.marked_points
    T = polygon_triangulation(n, tris.values())
    if len(T.arcs) != phi.degree - 1 or len(T.triangles) != phi.degree:
        raise ScannerError(f"WKB arc count mismatch: {len(T.arcs)} arcs for degree {phi.degree}")
    if check_generic:
        # every generic leaf runs along some diagonal, but near a saddle phase the
        # strips beside a separatrix get thin, so shrink the offset until all show up
        expected = {(int(a[1:].split("_")[0]), int(a.split("_")[1])) for a in T.arcs}
        diag: set[tuple[int, int]] = set()
        for offset in (1e-2, 1e-3, 1e-4, 1e-5):
            diag |= {tuple(sorted(p)) for p in generic_arcs(phi, theta, offset)
                     if (p[1] - p[0]) % n not in (1, n - 1)}
            if not diag <= expected or diag == expected:
                break
        if diag != expected:
            raise ScannerError(f"generic trajectories {sorted(diag)} disagree with separatrix triangles {sorted(expected)}")
    return T


# ---------------------------------------------------------------- frames and classes

@dataclass
class PeriodFrame:
    """Basis saddles (their periods define Z on the basis) plus the lattice skew form."""

    basis: list[SaddleRecord]
    periods: list[complex]
    lattice: ClassLattice
    arcs: list[str] | None = None
    log: list[str] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return len(self.periods)

    def charge(self) -> CentralCharge:
        return CentralCharge.from_complex(self.periods)


def integer_solve(Z: complex, periods: Sequence[complex], tol: float, bound: int = 6,
                  nonnegative: bool = False) -> Vector | None:
    """Unique small integer vector n with |Z - sum n_i periods_i| < tol * max(1, |Z|), or None."""
    rng = range(0, bound + 1) if nonnegative else range(-bound, bound + 1)
    hits = []
    scale = tol * max(1.0, abs(Z))
    P = np.array(periods, dtype=complex)
    for n in itertools.product(rng, repeat=len(periods)):
        if abs(Z - complex(np.dot(n, P))) < scale:
            hits.append(tuple(n))
            if len(hits) > 1:
                raise ClassificationError(f"ambiguous class for period {Z}: {hits}")
    return hits[0] if hits else None


def classify(saddles: Iterable[SaddleRecord], frame: PeriodFrame, tol: float | None = None) -> list[SaddleRecord]:
    out = []
    for s in saddles:
        n = integer_solve(s.period, frame.periods, tol if tol is not None else 1e-6)
        if n is None:
            raise ClassificationError(f"period {s.period} of saddle {s.zero_a}-{s.zero_b} is not in the frame lattice")
        out.append(replace(s, cls=n))
    return out


def wkb_frame(phi: PolynomialDifferential, theta0: float, saddles: Sequence[SaddleRecord] | None = None,
              orientation: int | None = None) -> PeriodFrame:
    """Frame of standard saddle classes for the WKB triangulation at theta0.

    The simple saddles of the half-plane window (theta0, theta0 + 1] form a
    basis in which every saddle of the window is a non-negative combination;
    each is matched to the arc separating the triangles of its two zeros, and
    the skew form is the exchange matrix of that triangulation.
    """
    T = wkb_triangulation(phi, theta0)
    if saddles is None:
        saddles = find_saddles(phi, (theta0, theta0 + 1.0))
    tris = wkb_triangles(phi, theta0)
    k = phi.rank
    tol = phi.tol.class_tol
    basis = None
    for combo in itertools.combinations(range(len(saddles)), k):
        periods = [saddles[c].period for c in combo]
        ok = True
        for s in saddles:
            try:
                n = integer_solve(s.period, periods, tol, nonnegative=True)
            except ClassificationError:
                ok = False
                break
            if n is None:
                ok = False
                break
        if ok:
            basis = [saddles[c] for c in combo]
            break
    if basis is None:
        raise ClassificationError("no basis of simple saddles found in the half-plane window")
    arc_of: dict[str, SaddleRecord] = {}
    for rec in basis:
        ta, tb = set(tris[rec.zero_a]), set(tris[rec.zero_b])
        shared = sorted(ta & tb)
        if len(shared) != 2:
            raise ScannerError(f"simple saddle {rec.zero_a}-{rec.zero_b} does not cross a single arc")
        i, j = shared
        label = f"d{i}_{j}"
        if label not in T.arcs:
            raise ScannerError(f"simple saddle crosses the boundary segment {i}-{j}")
        arc_of[label] = rec
    arcs = list(T.arcs)
    ordered = [arc_of[a] for a in arcs]
    B = exchange_matrix(T, orientation)
    L = ClassLattice(tuple(tuple(r) for r in B))
    return PeriodFrame(ordered, [r.period for r in ordered], L, arcs,
                       [f"WKB frame at phase {theta0}: arcs {arcs}"])


def track_frame(frame: PeriodFrame, path: Sequence[PolynomialDifferential]) -> PeriodFrame:
    """Continue the basis periods along a parameter path (Gauss-Manin by continuity).

    Each basis cycle is carried as a polyline between its two zeros; the
    zeros are matched to their nearest successors and interior points move
    by the polynomial interpolation of the zero displacements.
    """
    if not path:
        return frame
    cur_roots = list(path[0].roots)
    paths = [list(b.path) for b in frame.basis]
    ends = [(b.zero_a, b.zero_b) for b in frame.basis]
    periods = list(frame.periods)
    log = list(frame.log)
    for step, phi in enumerate(path[1:], 1):
        new_roots = list(phi.roots)
        perm = []
        for r in cur_roots:
            j = min(range(len(new_roots)), key=lambda j: abs(new_roots[j] - r))
            perm.append(j)
        if len(set(perm)) != len(perm):
            raise ScannerError(f"zeros collide along the path at step {step}")
        shift = np.array([new_roots[perm[i]] - cur_roots[i] for i in range(len(cur_roots))])
        coeffs = np.polyfit(np.array(cur_roots), shift, len(cur_roots) - 1) if len(cur_roots) > 1 else shift
        new_periods = []
        for n, pts in enumerate(paths):
            arr = np.array(pts)
            moved = arr + np.polyval(coeffs, arr)
            a, b = ends[n]
            a2, b2 = perm[a], perm[b]
            moved[0], moved[-1] = new_roots[a2], new_roots[b2]
            val, err, _ = path_integral(phi, list(moved), a2, b2)
            Z = 2 * val
            if abs(Z + periods[n]) < abs(Z - periods[n]):
                Z = -Z
            if abs(Z - periods[n]) > 0.5 * abs(periods[n]):
                raise ScannerError(f"period of basis cycle {n} jumped at step {step}")
            new_periods.append(Z)
            paths[n] = list(moved)
            ends[n] = (a2, b2)
        periods = new_periods
        cur_roots = new_roots
        log.append(f"step {step}: periods " + ", ".join(f"{p.real:.6f}{p.imag:+.6f}i" for p in periods))
    basis = [replace(b, zero_a=ends[n][0], zero_b=ends[n][1], period=periods[n], path=paths[n])
             for n, b in enumerate(frame.basis)]
    return PeriodFrame(basis, periods, frame.lattice, frame.arcs, log)


def find_cylinders(phi: PolynomialDifferential, saddles: Sequence[SaddleRecord]) -> list[tuple[complex, float]]:
    """Closed trajectories found by probing beside each saddle at its phase.

    Returns (period, phase) pairs; for polynomial differentials the list is
    expected to be empty.
    """
    found = []
    for rec in saddles:
        pts = rec.path
        if len(pts) < 4:
            continue
        m = len(pts) // 2
        p, q = pts[m], pts[m + 1]
        tangent = (q - p) / abs(q - p)
        dist = min(abs(p - r) for r in phi.roots)
        for side in (1, -1):
            z = p + side * 1e-3 * dist * 1j * tangent
            t = trace(phi, z, rec.phase, detect_closed=True, max_steps=5000)
            if t.termination == "closed":
                val, _, _ = path_integral(phi, t.points + [t.points[0]])
                found.append((val, rec.phase))
    return found


def shift_to_window(saddles: Sequence[SaddleRecord], window: tuple[float, float]) -> list[SaddleRecord]:
    """Re-express saddles in another half-plane window: phase +-1 flips the orientation."""
    out = []
    for r in saddles:
        for shift in (-2, -1, 0, 1, 2):
            t = r.phase + shift
            if window[0] < t <= window[1]:
                if shift % 2:
                    r = replace(r, zero_a=r.zero_b, zero_b=r.zero_a, period=-r.period, path=r.path[::-1])
                out.append(replace(r, phase=t))
                break
    out.sort(key=lambda r: (r.phase, min(r.zero_a, r.zero_b), max(r.zero_a, r.zero_b)))
    return out


def frame_phase(saddles: Sequence[SaddleRecord], preferred: float, margin: float = 1e-3) -> float:
    """``preferred`` unless a saddle phase is within ``margin`` of it (mod 1); else the middle of the widest gap."""
    phases = sorted(r.phase % 1.0 for r in saddles)
    if not phases:
        return preferred
    def gap(t):
        return min(min((t - p) % 1.0, (p - t) % 1.0) for p in phases)
    if gap(preferred) > margin:
        return preferred
    best = max(range(len(phases)), key=lambda i: ((phases[(i + 1) % len(phases)] - phases[i]) % 1.0) or 1.0)
    width = ((phases[(best + 1) % len(phases)] - phases[best]) % 1.0) or 1.0
    return phases[best] + width / 2


def scan_bps(phi: PolynomialDifferential, window: tuple[float, float] = (0.0, 1.0), grid: int | None = None,
             orientation: int | None = None):
    """Saddles in a half-plane window, classified in a WKB frame, and the measured BPS structure."""
    saddles = find_saddles(phi, window, grid)
    if not saddles:
        return saddles, None, None
    theta0 = frame_phase(saddles, window[0])
    fwin = (theta0, theta0 + 1.0)
    frame = wkb_frame(phi, theta0, shift_to_window(saddles, fwin), orientation)
    bps, _ = measured_bps(phi, fwin, frame, shift_to_window(saddles, fwin))
    return classify(saddles, frame, phi.tol.class_tol), frame, bps


def measured_bps(phi: PolynomialDifferential, window: tuple[float, float], frame: PeriodFrame,
                 saddles: Sequence[SaddleRecord] | None = None):
    """BPS structure measured in ``frame``: Omega counts non-closed saddles minus twice the cylinders."""
    from .wallcrossing import BPSStructure

    if saddles is None:
        saddles = find_saddles(phi, window)
    recs = classify(saddles, frame, phi.tol.class_tol)
    omega: dict[Vector, int] = {}
    for r in recs:
        if r.closed:
            continue
        key = _canonical(r.cls)
        omega[key] = omega.get(key, 0) + 1
    for Z, _ in find_cylinders(phi, recs):
        n = integer_solve(Z, frame.periods, phi.tol.class_tol)
        if n is None:
            raise ClassificationError(f"cylinder period {Z} is not in the frame lattice")
        key = _canonical(n)
        omega[key] = omega.get(key, 0) - 2
    xi = QuadraticRefinement((-1,) * frame.rank)
    return BPSStructure(frame.lattice, frame.charge(), omega, xi, phase_tol=phi.tol.phase_tol), recs


def _canonical(g: Sequence[int]) -> Vector:
    g = tuple(g)
    for x in g:
        if x:
            return g if x > 0 else tuple(-y for y in g)
    raise ClassificationError("saddle with zero class")
