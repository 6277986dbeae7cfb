"""Command-line driver: ``solve``, ``particles`` and ``convergence``.

Exit codes: 0 success, 1 usage or configuration error, 2 non-convergence.
"""

import argparse
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import problems
from .config import _floats, load_config
from .errors import ConfigurationError, ConvergenceError, GeometryError
from .fmm import FMMPlan, ParticleSystem, direct_evaluate
from .postprocess import (check_points, disk_solution, eval_field, grid_points, max_error,
                          reference_solution)
from .quadrature import SUPPORTED_ORDERS
from .solver import solve

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2
DIRECT_CAP = 16384


@dataclass
class RunReport:
    """Config echo plus result tables (``N | # Iterations | Time | Error`` style)."""

    echo: str = ""
    tables: list = field(default_factory=list)     # (title, headers, rows)
    notes: list = field(default_factory=list)

    def add(self, title, headers, rows):
        self.tables.append((title, list(headers), [list(r) for r in rows]))

    def render(self):
        out = []
        if self.echo:
            out.append("# configuration")
            out.extend("# " + line if line else "#" for line in self.echo.splitlines())
            out.append("")
        for title, headers, rows in self.tables:
            out.append(title)
            out.append(_format_table(headers, rows))
            out.append("")
        out.extend(self.notes)
        return "\n".join(out).rstrip() + "\n"


def _cell(v):
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(v)
    if v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e5):
        return f"{v:.3e}"
    return f"{v:.3f}"


def _format_table(headers, rows):
    cells = [[_cell(v) for v in r] for r in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(headers)]
    line = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    body = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join([line, "-" * len(line)] + body)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text):
    text = text.split("=", 1)[1] if "=" in text else text
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None


def _grid(text):
    vals = _int_list(text)
    if len(vals) != 2 or min(vals) < 2:
        raise argparse.ArgumentTypeError("--field-grid expects nx,ny with nx, ny >= 2")
    return vals


def _solver_flags(p):
    p.add_argument("--quad-order", type=int, choices=SUPPORTED_ORDERS)
    p.add_argument("--gmres-tol", type=float)
    p.add_argument("--backend", choices=("dense", "fmm"))
    p.add_argument("--fmm-tol", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sweep", type=_int_list, help="nodes per curve, e.g. N=64,128,256")
    p.add_argument("--output", default=".", help="directory for report.txt and field data")


def build_parser():
    parser = _Parser(prog="modhelm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ps = sub.add_parser("solve", help="solve the problem described by a config file")
    ps.add_argument("config")
    _solver_flags(ps)
    ps.add_argument("--field-grid", type=_grid, help="nx,ny tensor grid for field output")
    pc = sub.add_parser("convergence", help="error tables for every quadrature order")
    pc.add_argument("config")
    _solver_flags(pc)
    pp = sub.add_parser("particles", help="FMM versus direct summation benchmark")
    pp.add_argument("--n", type=int, default=4096)
    pp.add_argument("--sweep", type=_int_list, help="particle counts, e.g. N=1024,2048")
    pp.add_argument("--distribution", choices=("clustered", "uniform"), default="clustered")
    pp.add_argument("--alpha", type=float, default=0.1)
    pp.add_argument("--fmm-tol", type=float, default=1e-11)
    pp.add_argument("--compare-direct", action="store_true")
    pp.add_argument("--direct-cap", type=int, default=DIRECT_CAP)
    pp.add_argument("--threads", type=int, default=1)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--output", default=".")
    return parser


def _configure(args):
    cfg = load_config(args.config)
    seed = args.seed
    return cfg.with_overrides(quad_order=args.quad_order, gmres_tol=args.gmres_tol,
                              backend=args.backend, fmm_tol=args.fmm_tol, threads=args.threads,
                              seed=seed, domain_seed=seed)


def _sweep(cfg, args):
    sweep = args.sweep or (list(cfg.sweep) if cfg.sweep else [cfg.nodes])
    if any(n < 16 or n % 2 for n in sweep):
        raise ConfigurationError("sweep: nodes per curve must be even and >= 16")
    return sweep


class _ErrorProbe:
    """Fixed check points and reference values for a configuration."""

    def __init__(self, cfg, finest):
        self.cfg = cfg
        self.points = self.values = None
        if cfg.sources is None and cfg.analytic is None:
            return
        domain = cfg.build_domain(finest)
        self.points = check_points(domain, cfg.check_points, seed=cfg.check_seed)
        if cfg.analytic == "disk":
            c = cfg.curves[0]
            center = np.array(_floats(c.param("center", "0, 0"), 2, "[curve]"))
            r = np.hypot(*(self.points - center).T)
            data = cfg.boundary_data(domain)[0]
            if np.ptp(data) != 0:
                raise ConfigurationError("analytic = disk needs constant boundary data")
            self.values = disk_solution(r, float(c.param("radius", "1")), cfg.alpha, cfg.kind,
                                        float(data[0]), exterior=not cfg.bounded)
        else:
            self.values = reference_solution(cfg.reference_sources(), cfg.alpha, self.points,
                                             domain)

    def error(self, solution):
        if self.points is None:
            return None
        # check points are placed clear of the boundary on purpose, so the
        # near flag (which grows with the node spacing) is not applied
        return max_error(eval_field(solution, self.points).values, self.values)


def _timed_solve(spec):
    t0 = time.perf_counter()
    sol = solve(spec)
    return sol, time.perf_counter() - t0


def _solve_rows(cfg, sweep, probe, warmup=True):
    rows, last = [], None
    if warmup:
        # untimed run so that one-time costs do not distort the first row
        solve(cfg.build_spec(sweep[0]))
    for n in sweep:
        spec = cfg.build_spec(n)
        sol, elapsed = _timed_solve(spec)
        rows.append([spec.size, sol.iterations, elapsed, probe.error(sol)])
        last = sol
    return rows, last


def _emit(report, output):
    text = report.render()
    sys.stdout.write(text)
    os.makedirs(output, exist_ok=True)
    with open(os.path.join(output, "report.txt"), "w") as fh:
        fh.write(text)


def cmd_solve(args):
    cfg = _configure(args)
    sweep = _sweep(cfg, args)
    probe = _ErrorProbe(cfg, max(sweep))
    rows, sol = _solve_rows(cfg, sweep, probe)
    report = RunReport(echo=cfg.to_ini())
    report.add(f"# {cfg.kind}, alpha = {cfg.alpha:g}, p = {cfg.quad_order}, "
               f"backend = {cfg.backend}",
               ["N", "# Iterations", "Time (s)", "Error"], rows)
    if args.field_grid:
        nx, ny = args.field_grid
        pts = grid_points(sol.spec.domain, nx, ny, pad=0.0 if cfg.bounded else 0.25)
        grid = eval_field(sol, pts)
        os.makedirs(args.output, exist_ok=True)
        path = os.path.join(args.output, "field.txt")
        grid.write(path)
        report.notes.append(f"field data: {path} ({nx} x {ny} points)")
    _emit(report, args.output)
    return EXIT_OK


def cmd_convergence(args):
    cfg = _configure(args)
    if cfg.sources is None and cfg.analytic is None:
        raise ConfigurationError("convergence runs need [reference] sources or analytic")
    sweep = args.sweep or (list(cfg.sweep) if cfg.sweep else [64, 128, 256, 512])
    probe = _ErrorProbe(cfg, max(sweep))
    report = RunReport(echo=cfg.to_ini())
    warm = True
    for p in SUPPORTED_ORDERS:
        c = cfg.with_overrides(quad_order=p)
        rows, _ = _solve_rows(c, sweep, probe, warmup=warm)
        warm = False
        label = "trapezoid rule" if p == 0 else f"order {p} correction"
        report.add(f"# p = {p} ({label})", ["N", "# Iterations", "Time (s)", "Error"], rows)
    _emit(report, args.output)
    return EXIT_OK


def fit_exponent(sizes, times):
    """Least-squares slope of log(time) against log(size)."""
    return float(np.polyfit(np.log(sizes), np.log(times), 1)[0])


def cmd_particles(args):
    sizes = args.sweep or [args.n]
    if min(sizes) < 2:
        raise ConfigurationError("particles: N must be >= 2")
    if not args.alpha > 0:
        raise ConfigurationError("particles: alpha must be positive")
    make = problems.clustered_points if args.distribution == "clustered" else problems.uniform_points
    rows, fmm_times = [], []
    for i, n in enumerate(sizes):
        rng = np.random.default_rng(args.seed + n)
        pts = make(n, args.seed)
        q = rng.standard_normal(n)
        mu = rng.standard_normal(n)
        th = rng.uniform(0, 2 * np.pi, n)
        dirs = np.column_stack([np.cos(th), np.sin(th)])
        if i == 0:
            FMMPlan(pts, args.alpha, directions=dirs, tolerance=args.fmm_tol).apply(q, mu)
        t0 = time.perf_counter()
        plan = FMMPlan(pts, args.alpha, directions=dirs, tolerance=args.fmm_tol,
                       threads=args.threads)
        fast = plan.apply(q, mu).potential
        t_fmm = time.perf_counter() - t0
        fmm_times.append(t_fmm)
        t_dir = err = None
        if args.compare_direct and n <= args.direct_cap:
            t0 = time.perf_counter()
            ref = direct_evaluate(ParticleSystem(pts, args.alpha, charges=q, dipoles=mu,
                                                 directions=dirs)).potential
            t_dir = time.perf_counter() - t0
            err = float(np.max(np.abs(fast - ref)) / np.max(np.abs(ref)))
        elif args.compare_direct:
            t_dir = "skipped"
        rows.append([n, t_fmm, t_dir, err])
    report = RunReport(echo=(f"distribution = {args.distribution}\nalpha = {args.alpha!r}\n"
                             f"fmm_tol = {args.fmm_tol!r}\nseed = {args.seed}"))
    report.add("# Yukawa sum, mixed charges and dipoles",
               ["N", "FMM (s)", "Direct (s)", "Max rel. error"], rows)
    if len(sizes) >= 3:
        report.notes.append(f"fitted time exponent: {fit_exponent(sizes, fmm_times):.3f}")
    _emit(report, args.output)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "particles": cmd_particles}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, GeometryError) as exc:
        print(f"modhelm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        hist = ", ".join(f"{r:.2e}" for r in exc.residuals[-5:])
        print(f"modhelm: {exc} (last residuals: {hist})", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
