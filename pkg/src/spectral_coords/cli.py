"""Command-line front end.

Subcommands: validate, solve, verify, grid, gallery, dress. All machine
output is JSON or CSV on stdout (or --out); diagnostics go to stderr.

Exit codes are a stable contract:
    0  pass
    1  check failure
    2  input error (bad JSON, bad flags, unknown gallery name)
    3  singular linear solve
    4  dressing-specific failure (fat tail, singular integral operator)
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import baker, dressing, gallery, geometry
from .curve import (SpectralData, check_involution, check_Q_residues,
                    check_regular, validate_counting)
from .errors import (InputError, SingularFredholm, SingularSystem,
                     SpectralError, TailTooFat)

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_INPUT = 2
EXIT_SINGULAR = 3
EXIT_DRESSING = 4


@dataclass
class RunConfig:
    command: str
    input_path: str = None
    u: np.ndarray = None
    grid: dict = None  # axis (0-based) -> 1-D array of values
    fd_h: float = None
    fd_order: int = None
    tol: float = 1e-4
    out: str = None
    fmt: str = "json"

    def __post_init__(self):
        if self.tol is not None and self.tol <= 0:
            raise InputError("tolerances must be positive")
        if self.grid:
            for axis, values in self.grid.items():
                if len(values) < 2:
                    raise InputError(
                        f"grid axis {axis + 1} needs at least 2 points")


def _parse_u(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise InputError(f"cannot parse --u {text!r}: {exc}") from None


def _parse_grid(text: str) -> dict:
    """--grid "axis:lo:hi:count;…" with 1-based axis indices."""
    out = {}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 4:
            raise InputError(f"bad grid segment {part!r}, "
                             "expected axis:lo:hi:count")
        try:
            axis = int(bits[0])
            lo, hi = float(bits[1]), float(bits[2])
            count = int(bits[3])
        except ValueError as exc:
            raise InputError(f"bad grid segment {part!r}: {exc}") from None
        if axis < 1:
            raise InputError("grid axes are 1-based")
        out[axis - 1] = np.linspace(lo, hi, count)
    if not out:
        raise InputError("empty grid spec")
    return out


def _lattice(grid: dict, n: int) -> np.ndarray:
    """Row-major lattice over the grid spec; unlisted axes sit at 0."""
    axes = []
    for k in range(n):
        if k in grid:
            axes.append(np.asarray(grid[k], dtype=float))
        else:
            axes.append(np.array([0.0]))
    for axis in grid:
        if axis >= n:
            raise InputError(f"grid axis {axis + 1} exceeds n = {n}")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _emit(text: str, out: str = None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _max_workers() -> int:
    env = os.environ.get("SPECTRAL_COORDS_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InputError("SPECTRAL_COORDS_THREADS must be an integer")
        if cap >= 1:
            return cap
    return min(8, os.cpu_count() or 1)


def _fd_configs(cfg: RunConfig):
    first = geometry.FIRST_DERIVATIVE_FD
    if cfg.fd_h is not None or cfg.fd_order is not None:
        first = geometry.FDConfig(h=cfg.fd_h or first.h,
                                  order=cfg.fd_order or first.order)
    return first, geometry.SECOND_DERIVATIVE_FD


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    data = SpectralData.from_json(_load_json(cfg.input_path))
    checks = {}
    failures = []

    try:
        counting = validate_counting(data)
        checks["counting"] = {
            "passed": True,
            "unknowns": counting.unknowns,
            "equations": counting.equations,
            "genus": counting.genus,
            "genus_nodal_sum": counting.genus_nodal_sum,
            "deg_D": counting.deg_D,
            "warnings": counting.warnings,
        }
    except SpectralError as exc:
        checks["counting"] = {"passed": False, "error": str(exc)}
        failures.append("counting")

    regular = check_regular(data)
    bad = [k for k, v in enumerate(regular.sums)
           if abs(v) > regular.tol]
    checks["regularity"] = {
        "passed": regular.passed,
        "max_abs_residue_sum": regular.max_abs,
        "failing_gluings": bad,
    }
    if not regular.passed:
        failures.append("regularity (gluings %s)" % bad)

    try:
        eta0_sq = check_Q_residues(data)
        checks["q_residues"] = {"passed": True, "eta0_squared": eta0_sq}
    except SpectralError as exc:
        checks["q_residues"] = {"passed": False, "error": str(exc)}
        failures.append("q_residues")

    if data.sigma is not None:
        try:
            details = check_involution(data)
            checks["involution"] = {"passed": True, **details}
        except SpectralError as exc:
            checks["involution"] = {"passed": False, "error": str(exc)}
            failures.append("involution")

    _emit(_dump({"checks": checks, "failures": failures,
                 "passed": not failures}), cfg.out)
    return EXIT_OK if not failures else EXIT_CHECK


def cmd_solve(cfg: RunConfig) -> int:
    data = SpectralData.from_json(_load_json(cfg.input_path))
    if cfg.u is None:
        raise InputError("solve requires --u")
    if len(cfg.u) != data.n:
        raise InputError(f"--u needs {data.n} components")
    coeffs, diag = baker.solve_coefficients(data, cfg.u)
    x, imag_max = baker.coordinate_map(data, cfg.u)
    h = baker.h_values(data, coeffs)
    fd_first, _ = _fd_configs(cfg)
    g, _g_imag = geometry.metric(data, cfg.u, fd_first)
    H = geometry.lame(g)
    _emit(_dump({
        "u": [float(v) for v in cfg.u],
        "x": [[float(v.real), float(v.imag)] for v in x],
        "imag_max": imag_max,
        "H": [float(v) for v in H],
        "h": [[float(v.real), float(v.imag)] for v in h],
        "diagnostics": {
            "condition": diag.condition_estimate,
            "residual": diag.residual_norm,
        },
    }), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    data = SpectralData.from_json(_load_json(cfg.input_path))
    grid = cfg.grid or {k: np.linspace(-0.4, 0.4, 3) for k in range(data.n)}
    samples = _lattice(grid, data.n)
    fd_first, fd_second = _fd_configs(cfg)
    solver = baker.Solver(data)

    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        reports = list(pool.map(
            lambda u: geometry.build_report(solver.map_batch, u,
                                            fd_first, fd_second),
            samples))

    spread = geometry.epsilon_invariant(data, samples, fd_first)
    breaches = []
    worst = {
        "reality": 0.0, "orthogonality": 0.0, "eq1": 0.0, "eq2": 0.0,
        "eq4": 0.0, "eq5": 0.0, "riemann": 0.0, "immersion": 0.0,
    }
    for rep in reports:
        x_scale = 1.0 + max(abs(v[0]) for v in rep.x)
        h_scale = 1.0 + max(rep.lame) ** 2
        gates = {
            "reality": (rep.imag_max, 1e-9 * x_scale),
            "orthogonality": (rep.g_offdiag_max, 1e-6 * h_scale),
            "eq1": (rep.eq1_max, cfg.tol * h_scale),
            "eq2": (rep.eq2_max, cfg.tol * h_scale),
            "eq4": (rep.eq4_max, cfg.tol * h_scale),
            "eq5": (rep.eq5_max, cfg.tol * h_scale),
            "riemann": (rep.riemann_max, cfg.tol * h_scale),
            "immersion": (rep.immersion_max, cfg.tol * x_scale),
        }
        for name, (value, bound) in gates.items():
            worst[name] = max(worst[name], value)
            if value > bound:
                breaches.append({"check": name, "u": rep.u,
                                 "value": value, "bound": bound})
    eps_max = float(np.max(spread)) if len(samples) > 1 else 0.0
    worst["epsilon_spread"] = eps_max
    if eps_max > 1e-6:
        breaches.append({"check": "epsilon_spread", "value": eps_max,
                         "bound": 1e-6})

    _emit(_dump({"samples": len(samples), "worst": worst,
                 "breaches": breaches, "passed": not breaches}), cfg.out)
    return EXIT_OK if not breaches else EXIT_CHECK


def cmd_grid(cfg: RunConfig) -> int:
    data = SpectralData.from_json(_load_json(cfg.input_path))
    if not cfg.grid:
        raise InputError("grid command requires --grid")
    samples = _lattice(cfg.grid, data.n)
    solver = baker.Solver(data)
    xs = solver.map_batch(samples)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"u{k + 1}" for k in range(data.n)]
                    + [f"x{k + 1}" for k in range(data.n)])
    for u, x in zip(samples, xs):
        writer.writerow([repr(float(v)) for v in u]
                        + [repr(float(v.real)) for v in x])
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_gallery(cfg: RunConfig) -> int:
    entry = gallery.build(cfg.input_path)
    _emit(_dump(entry.data.to_json()), cfg.out)
    return EXIT_OK


def cmd_dress(cfg: RunConfig, s: float, s_max: float, nodes: int,
              rule: str) -> int:
    spec = dressing.KernelSpec.from_json(_load_json(cfg.input_path))
    grid = dressing.Grid(s=s, s_max=s_max, N=nodes, rule=rule)
    samples = (_lattice(cfg.grid, spec.n) if cfg.grid
               else np.zeros((1, spec.n)))
    betas = [dressing.rotation_from_dressing(spec, u, grid) for u in samples]

    def beta_at(u):
        return dressing.rotation_from_dressing(spec, u, grid)

    probes = sorted({0, len(samples) // 2, len(samples) - 1})
    res4 = res5 = 0.0
    for k in probes:
        res = dressing.check_beta_systems(beta_at, spec.n, samples[k])
        res4 = max(res4, float(max((abs(v) for v in res.eq4), default=0.0)))
        res5 = max(res5, float(max((abs(v) for v in res.eq5), default=0.0)))
    passed = bool(res4 <= cfg.tol and res5 <= cfg.tol)

    if cfg.fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"u{k + 1}" for k in range(spec.n)]
                        + [f"beta_{i + 1}_{j + 1}" for i in range(spec.n)
                           for j in range(spec.n)])
        for u, b in zip(samples, betas):
            writer.writerow([repr(float(v)) for v in u]
                            + [repr(float(v)) for v in np.ravel(b)])
        _emit(buf.getvalue(), cfg.out)
        print(_dump({"eq4_max": res4, "eq5_max": res5, "passed": passed}),
              file=sys.stderr)
    else:
        _emit(_dump({
            "beta": [{"u": [float(v) for v in u],
                      "beta": np.asarray(b).tolist()}
                     for u, b in zip(samples, betas)],
            "residuals": {"eq4_max": res4, "eq5_max": res5},
            "passed": passed,
        }), cfg.out)
    return EXIT_OK if passed else EXIT_CHECK


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="spectral-coords",
        description="Orthogonal curvilinear coordinate systems from "
                    "rational spectral data.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_input=True):
        if needs_input:
            sp.add_argument("input", help="path to a JSON config")
        sp.add_argument("--out", default=None, help="write output here "
                        "instead of stdout")
        sp.add_argument("--tol", type=float, default=1e-4,
                        help="residual tolerance for pass/fail gates")

    sp = sub.add_parser("validate", help="run the spectral-data validators")
    common(sp)

    sp = sub.add_parser("solve", help="evaluate the coordinate map at one u")
    common(sp)
    sp.add_argument("--u", required=True, help='comma list, e.g. "0.0,1.0"')
    sp.add_argument("--fd-h", type=float, default=None)
    sp.add_argument("--fd-order", type=int, default=None, choices=(2, 4))

    sp = sub.add_parser("verify", help="sweep geometric checks over a grid")
    common(sp)
    sp.add_argument("--grid", default=None,
                    help='"axis:lo:hi:count;…", 1-based axes; '
                         "default 3 points in [-0.4,0.4] per axis")
    sp.add_argument("--fd-h", type=float, default=None)
    sp.add_argument("--fd-order", type=int, default=None, choices=(2, 4))

    sp = sub.add_parser("grid", help="emit CSV coordinate lines")
    common(sp)
    sp.add_argument("--grid", required=True,
                    help='"axis:lo:hi:count;…", 1-based axes')

    sp = sub.add_parser("gallery", help="print a catalog entry as JSON")
    sp.add_argument("name", help="entry name, e.g. polar")
    sp.add_argument("--out", default=None)

    sp = sub.add_parser("dress", help="rotation coefficients from a kernel "
                                      "spec via the integral equation")
    common(sp)
    sp.add_argument("--grid", default=None,
                    help='u-grid "axis:lo:hi:count;…"; default u = 0')
    sp.add_argument("--s", type=float, default=-2.0)
    sp.add_argument("--s-max", type=float, default=6.0)
    sp.add_argument("--nodes", type=int, default=200)
    sp.add_argument("--rule", default="gauss-legendre",
                    choices=("trapezoid", "gauss-legendre"))
    sp.add_argument("--format", dest="fmt", default="json",
                    choices=("json", "csv"))
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK

    try:
        cfg = RunConfig(
            command=args.command,
            input_path=getattr(args, "input", None)
            or getattr(args, "name", None),
            u=_parse_u(args.u) if getattr(args, "u", None) else None,
            grid=_parse_grid(args.grid) if getattr(args, "grid", None)
            else None,
            fd_h=getattr(args, "fd_h", None),
            fd_order=getattr(args, "fd_order", None),
            tol=getattr(args, "tol", 1e-4),
            out=args.out,
            fmt=getattr(args, "fmt", "json"),
        )
        if cfg.command == "validate":
            return cmd_validate(cfg)
        if cfg.command == "solve":
            return cmd_solve(cfg)
        if cfg.command == "verify":
            return cmd_verify(cfg)
        if cfg.command == "grid":
            return cmd_grid(cfg)
        if cfg.command == "gallery":
            return cmd_gallery(cfg)
        if cfg.command == "dress":
            return cmd_dress(cfg, s=args.s, s_max=args.s_max,
                             nodes=args.nodes, rule=args.rule)
        raise InputError(f"unknown command {cfg.command!r}")
    except (TailTooFat, SingularFredholm) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DRESSING
    except SingularSystem as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SpectralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: malformed input ({exc})", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
