"""Command-line entry point.

Exit codes: 0 success or equal, 1 verified unequal, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, replace
from typing import Sequence

from . import conventions
from .lattice import Ray, as_vector
from .quantum import LaurentQ, classical_limit, refined_factor
from .scanner import (DEFAULT_TOL, ClassificationError, GMNViolation, PolynomialDifferential, ScannerError,
                      Tolerances, find_saddles, scan_bps, trace_separatrix)
from .series import BirationalTorusMap, compose
from .surface import MarkedBorderedSurface, TaggedTriangulation, TriangulationError, flip, validate
from .wallcrossing import (UPPER_HALF_PLANE, BPSStructure, NonGenericError, SectorSpec, class_factor,
                           flip_path_map, flow_factor, ks_factor, pentagon_chambers, sector_product,
                           strip_relabeling, wcf_check)

PRECISION = 12


class InputError(ValueError):
    """Malformed or inconsistent command input (exit code 2)."""


@dataclass(frozen=True)
class CommandConfig:
    subcommand: str
    degree: int
    orientation: int
    tolerances: Tolerances
    output: str | None
    fmt: str


def _fmt(x: float) -> str:
    s = f"{x:.{PRECISION}f}"
    return "0." + "0" * PRECISION if s.startswith("-") and float(s) == 0 else s


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _emit(cfg: CommandConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc})") from exc


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise InputError(f"expected {n} numbers, got {text!r}")
    return vals


def _poly(text: str) -> list[complex]:
    try:
        return [complex(x.strip().replace("i", "j")) for x in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad polynomial coefficients {text!r}") from exc


# ---------------------------------------------------------------- scan

def cmd_scan(cfg: CommandConfig, args) -> int:
    phi = PolynomialDifferential(_poly(args.poly), cfg.tolerances)
    if args.separatrices is not None:
        return _emit_separatrices(cfg, phi, args.separatrices)
    lo, hi = _floats(args.window, 2)
    if abs((hi - lo) - 1.0) < 1e-12:
        classified, _, bps = scan_bps(phi, (lo, hi), args.grid, cfg.orientation)
    else:
        classified, bps = find_saddles(phi, (lo, hi), grid=args.grid), None
    rows = []
    for s in classified:
        row = {"zero_a": s.zero_a, "zero_b": s.zero_b, "theta": _fmt(s.phase),
               "re_Z": _fmt(s.period.real), "im_Z": _fmt(s.period.imag)}
        if s.cls is not None:
            row["class"] = list(s.cls)
        rows.append(row)
    if cfg.fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        rank = phi.rank
        w.writerow(["zero_a", "zero_b", "theta", "re_Z", "im_Z"] + [f"class_{i}" for i in range(rank)])
        for r in rows:
            w.writerow([r["zero_a"], r["zero_b"], r["theta"], r["re_Z"], r["im_Z"]] + list(r.get("class", [""] * rank)))
        _emit(cfg, buf.getvalue())
        if args.bps_output and bps is not None:
            with open(args.bps_output, "w", encoding="utf-8") as fh:
                fh.write(_dump(_bps_json(bps)))
    else:
        out = {"precision": PRECISION, "roots": [[_fmt(z.real), _fmt(z.imag)] for z in phi.roots],
               "window": [lo, hi], "saddles": rows, "bps": _bps_json(bps) if bps is not None else None}
        _emit(cfg, _dump(out))
    return 0


def _bps_json(bps: BPSStructure) -> dict:
    data = bps.to_json()
    data["charge"] = {"re": [_fmt(float(x)) for x in bps.charge.re], "im": [_fmt(float(x)) for x in bps.charge.im]}
    return data


def _emit_separatrices(cfg: CommandConfig, phi: PolynomialDifferential, theta: float) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["zero", "separatrix", "step", "re", "im", "termination"])
    for i in range(len(phi.roots)):
        for j in range(3):
            t = trace_separatrix(phi, i, j, theta)
            end = f"{t.outcome[0]}:{t.outcome[1]}"
            for n, z in enumerate(t.points):
                w.writerow([i, j, n, _fmt(z.real), _fmt(z.imag), end])
    _emit(cfg, buf.getvalue())
    return 0


# ---------------------------------------------------------------- map specifications

def _build(spec: dict, cfg: CommandConfig) -> BirationalTorusMap:
    """Evaluate a map specification (see README for the schema)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise InputError("map specification needs a 'kind'")
    D = cfg.degree
    kind = spec["kind"]
    if kind == "sector":
        s = BPSStructure.from_json(spec["bps"])
        start, end = spec["sector"]
        return sector_product(s, SectorSpec(float(start), float(end)), D)
    if kind in ("ks", "flow"):
        s = BPSStructure.from_json(spec["bps"])
        r = Ray(float(spec["phase"]), s.phase_tol)
        return ks_factor(s, r, D) if kind == "ks" else flow_factor(s, r, D)
    if kind == "flip_path":
        T = TaggedTriangulation.from_json(spec["triangulation"])
        m = flip_path_map(T, list(spec.get("arcs", [])), D, cfg.orientation)
        return strip_relabeling(m) if spec.get("strip", True) else m
    if kind == "map":
        m = BirationalTorusMap.from_json(spec["map"])
        return m.truncate(D) if m.D > D else m
    if kind == "compose":
        parts = [_build(p, cfg) for p in spec["factors"]]
        if not parts:
            raise InputError("compose needs at least one factor")
        out = parts[0]
        for p in parts[1:]:
            out = compose(out, p)
        return out
    raise InputError(f"unknown map kind {kind!r}")


def cmd_verify(cfg: CommandConfig, args) -> int:
    left = _build(_load_json(args.left), cfg)
    right = _build(_load_json(args.right), cfg)
    if left.lattice != right.lattice:
        raise InputError("the two sides live on different lattices")
    v = wcf_check(left, right, cfg.degree)
    if cfg.fmt == "json":
        _emit(cfg, _dump({"equal": v.equal, "degree": v.degree, "certificate": v.certificate}))
    else:
        _emit(cfg, v.certificate + "\n")
    return 0 if v.equal else 1


def cmd_flip(cfg: CommandConfig, args) -> int:
    T = TaggedTriangulation.from_json(_load_json(args.triangulation))
    S = MarkedBorderedSurface.from_json(_load_json(args.surface)) if args.surface else None
    errs = validate(T, S)
    if errs:
        raise InputError("invalid triangulation: " + "; ".join(errs))
    arcs = [a for a in (args.arcs or "").split(",") if a]
    cur = T
    for a in arcs:
        cur = flip(cur, a)
    m = flip_path_map(T, arcs, cfg.degree, cfg.orientation)
    if args.strip:
        m = strip_relabeling(m)
    _emit(cfg, _dump({"map": m.to_json(), "final_triangulation": cur.to_json()}))
    return 0


def cmd_ks(cfg: CommandConfig, args) -> int:
    s = BPSStructure.from_json(_load_json(args.bps))
    r = Ray(args.phase, s.phase_tol)
    m = flow_factor(s, r, cfg.degree) if args.flow else ks_factor(s, r, cfg.degree)
    _emit(cfg, _dump(m.to_json()))
    return 0


def cmd_sector(cfg: CommandConfig, args) -> int:
    s = BPSStructure.from_json(_load_json(args.bps))
    start, end = _floats(args.sector, 2)
    _emit(cfg, _dump(sector_product(s, SectorSpec(start, end), cfg.degree).to_json()))
    return 0


def _refined_omega(data: dict, s: BPSStructure) -> dict:
    out = {}
    for item in data.get("refined", []):
        out[as_vector(item["class"])] = LaurentQ.from_json(item)
    return out


def cmd_quantum(cfg: CommandConfig, args) -> int:
    data = _load_json(args.bps)
    s = BPSStructure.from_json(data)
    refined = _refined_omega(data, s)
    D = cfg.degree
    L = s.lattice
    rays = []
    all_equal = True
    for r in s.rays():
        classes = sorted(g for g in s.on_ray(r) if all(x >= 0 for x in g))
        if not classes:
            continue
        for a in classes:
            for b in classes:
                if L.pair(a, b):
                    raise NonGenericError(f"classes {a} and {b} on the ray of phase {r.phase} do not commute")
        omega_q = {g: refined.get(g, LaurentQ.const(s.Omega(g))) for g in classes}
        qf = refined_factor(L, classes, omega_q, D)
        limit = classical_limit(qf, s.refinement)
        target = _ks_commuting(s, classes, D)
        v = wcf_check(limit, target, D)
        all_equal &= v.equal
        rays.append({"phase": _fmt(r.phase), "classes": [list(g) for g in classes],
                     "refined": qf.to_json(), "classical_limit": v.certificate, "equal": v.equal})
    _emit(cfg, _dump({"degree": D, "rays": rays, "equal": all_equal}))
    return 0 if all_equal else 1


def _ks_commuting(s: BPSStructure, classes, D: int) -> BirationalTorusMap:
    """prod_g (1 - xi(g) x_g)^{Omega(g) <e_i, g>} for pairwise commuting classes."""
    out = BirationalTorusMap.identity(s.lattice, D)
    for g in classes:
        out = compose(out, class_factor(s.lattice, g, s.Omega(g), s.xi(g), D))
    return out


def cmd_pentagon(cfg: CommandConfig, args) -> int:
    D = cfg.degree
    two, three = pentagon_chambers()
    v = wcf_check(sector_product(two, UPPER_HALF_PLANE, D), sector_product(three, UPPER_HALF_PLANE, D), D)
    if cfg.fmt == "json":
        _emit(cfg, _dump({"equal": v.equal, "degree": D, "certificate": v.certificate}))
    else:
        _emit(cfg, f"pentagon: {v.certificate}\n")
    return 0 if v.equal else 1


# ---------------------------------------------------------------- argument parsing

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--degree", type=int, default=8, help="truncation degree D (>= 1)")
    common.add_argument("--orientation", type=int, choices=(1, -1), default=None,
                        help=f"global sign of exchange matrices (default {conventions.ORIENTATION_SIGN})")
    common.add_argument("--output", help="write to this file instead of standard output")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"), default=None)
    for name in ("root", "hit", "bisect", "quad", "class", "phase"):
        common.add_argument(f"--tol-{name}", type=float, default=None)

    p = argparse.ArgumentParser(prog="ksquad", description="Wall-crossing for quadratic differentials.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("scan", parents=[common], help="find saddle connections of P(z) dz^2")
    s.add_argument("--poly", required=True, help="coefficients, highest degree first, e.g. 1,0,-1")
    s.add_argument("--window", default="0,1", help="phase window lo,hi in units of pi (length <= 1)")
    s.add_argument("--grid", type=int, default=None, help="phase grid size per separatrix")
    s.add_argument("--bps-output", help="with --format csv, also write the BPS structure here")
    s.add_argument("--separatrices", type=float, default=None, metavar="THETA",
                   help="instead of scanning, emit the separatrix point lists at THETA as CSV")

    v = sub.add_parser("verify", parents=[common], help="compare two map specifications to order D")
    v.add_argument("left")
    v.add_argument("right")

    f = sub.add_parser("flip", parents=[common], help="transition map of a flip sequence")
    f.add_argument("--surface")
    f.add_argument("--triangulation", required=True)
    f.add_argument("--arcs", default="", help="comma-separated arc labels")
    f.add_argument("--strip", action="store_true", help="remove the lattice relabeling")

    q = sub.add_parser("quantum", parents=[common], help="refined factors and their classical limit")
    q.add_argument("bps")

    k = sub.add_parser("ks", parents=[common], help="factor of a single active ray")
    k.add_argument("bps")
    k.add_argument("--phase", type=float, required=True)
    k.add_argument("--flow", action="store_true", help="build it as a Hamiltonian flow")

    c = sub.add_parser("sector", parents=[common], help="ordered product over a convex sector")
    c.add_argument("bps")
    c.add_argument("--sector", required=True, help="start,end phases with 0 < start - end <= 1")

    sub.add_parser("pentagon", parents=[common], help="self-test: the pentagon identity")
    return p


_COMMANDS = {"scan": cmd_scan, "verify": cmd_verify, "flip": cmd_flip, "quantum": cmd_quantum,
             "ks": cmd_ks, "sector": cmd_sector, "pentagon": cmd_pentagon}


def _config(args) -> CommandConfig:
    if args.degree < 1:
        raise InputError("--degree must be at least 1")
    tol = DEFAULT_TOL
    overrides = {f"{n}_tol": getattr(args, f"tol_{n}") for n in ("root", "hit", "bisect", "quad", "class", "phase")}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if any(v <= 0 for v in overrides.values()):
        raise InputError("tolerances must be positive")
    if overrides:
        tol = replace(tol, **overrides)
    if getattr(args, "grid", None) is not None and args.grid < 2:
        raise InputError("--grid must be at least 2")
    fmt = args.fmt or ("csv" if args.subcommand == "scan" else "json")
    orientation = conventions.ORIENTATION_SIGN if args.orientation is None else args.orientation
    return CommandConfig(args.subcommand, args.degree, orientation, tol, args.output, fmt)


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        return _COMMANDS[args.subcommand](cfg, args)
    except GMNViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (ClassificationError, ScannerError) as exc:
        print(f"error: scanner: {exc}", file=sys.stderr)
    except (InputError, TriangulationError, NonGenericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (KeyError, TypeError, ValueError, OSError) as exc:
        print(f"error: invalid input: {exc!r}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
