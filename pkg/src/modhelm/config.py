"""INI problem configuration for the command-line driver.

Sections
--------
``[domain]``
    ``bounded`` (yes/no), ``nodes`` (default nodes per curve), optional
    ``preset`` (``example1``, ``example2``, ``example3``) which supplies the
    curves, and ``seed`` for the random parts of presets.
``[curve.<name>]`` (in order; the first is the outer boundary when bounded)
    ``shape`` = ``circle`` (``center``, ``radius``), ``ellipse`` (``center``,
    ``semi_axes``, ``rotation``) or ``fourier`` (``modes`` as
    ``k:coefficient`` pairs, e.g. ``0:0, 1:1, -3:0.1j``); optional ``nodes``;
    boundary data by exactly one of ``constant = <v>``, ``reference = yes``,
    ``file = <path>`` or ``random = yes``.
``[problem]``
    ``alpha``, ``kind`` (dirichlet/neumann), ``quad_order``, ``seed`` and
    ``data`` (default data mode for preset curves: ``reference``, ``random``
    or a number).
``[solver]``
    ``gmres_tol``, ``backend``, ``fmm_tol``, ``threads``, ``max_iter``, ``restart``.
``[reference]``
    ``sources`` (``x y; x y; ...``) or ``preset = example1`` for the field
    ``sum_k K_0(|x - x_k|/alpha)``; or ``analytic = disk`` for a single
    circle with constant data. ``check_points`` and ``check_seed`` set the
    error sample. ``sweep`` lists nodes per curve for convergence runs.
"""

import configparser
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import problems
from .errors import ConfigurationError, GeometryError
from .geometry import Domain, curve_from_fourier, ellipse
from .kernels import KernelKind
from .postprocess import reference_boundary_data
from .quadrature import SUPPORTED_ORDERS
from .solver import ProblemSpec

PRESETS = ("example1", "example2", "example3")
SHAPES = ("circle", "ellipse", "fourier")
DATA_MODES = ("constant", "reference", "file", "random")


@dataclass(frozen=True)
class CurveConfig:
    name: str
    shape: str
    params: tuple              # sorted (key, value-string) pairs
    nodes: int = None
    data_mode: str = "constant"
    data_value: str = "0"

    def param(self, key, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration; :meth:`to_ini` reproduces an equivalent file."""

    bounded: bool = True
    nodes: int = 64
    preset: str = None
    domain_seed: int = 0
    curves: tuple = ()
    alpha: float = 1.0
    kind: str = "dirichlet"
    quad_order: int = 8
    seed: int = 0
    data: str = "reference"
    gmres_tol: float = 1e-11
    backend: str = "dense"
    fmm_tol: float = 1e-12
    threads: int = 1
    max_iter: int = 500
    restart: int = None
    sources: tuple = None      # ((x, y), ...)
    analytic: str = None
    check_points: int = 20
    check_seed: int = 0
    sweep: tuple = None
    base_dir: str = field(default=".", compare=False)

    # -- construction --
    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        cfg = replace(self, **kw)
        cfg.validate()
        return cfg

    def validate(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigurationError("[problem] alpha: must be a positive number")
        KernelKind.parse(self.kind)
        if self.quad_order not in SUPPORTED_ORDERS:
            raise ConfigurationError(
                f"[problem] quad_order: {self.quad_order} not in {SUPPORTED_ORDERS}")
        if self.backend not in ("dense", "fmm"):
            raise ConfigurationError(f"[solver] backend: {self.backend!r} is not dense|fmm")
        if not 0 < self.gmres_tol < 1:
            raise ConfigurationError("[solver] gmres_tol: must lie in (0, 1)")
        if self.threads < 1:
            raise ConfigurationError("[solver] threads: must be >= 1")
        if self.preset is None and not self.curves:
            raise ConfigurationError("[domain]: no preset and no [curve.*] sections")
        for c in self.curves:
            if c.shape not in SHAPES:
                raise ConfigurationError(f"[curve.{c.name}] shape: {c.shape!r} not in {SHAPES}")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigurationError(f"[domain] preset: {self.preset!r} not in {PRESETS}")
        if self.analytic not in (None, "disk"):
            raise ConfigurationError(f"[reference] analytic: unknown {self.analytic!r}")
        if self.analytic == "disk" and (len(self.curves) != 1 or
                                        self.curves[0].shape != "circle"):
            raise ConfigurationError("[reference] analytic = disk needs a single circle curve")
        modes = [c.data_mode for c in self.curves] or [self._preset_mode()]
        if "reference" in modes and self.sources is None:
            raise ConfigurationError("reference boundary data need [reference] sources")
        if self.sweep is not None and any(n < 16 or n % 2 for n in self.sweep):
            raise ConfigurationError("sweep: nodes per curve must be even and >= 16")

    def _preset_mode(self):
        try:
            float(self.data)
            return "constant"
        except ValueError:
            if self.data not in ("reference", "random"):
                raise ConfigurationError(
                    f"[problem] data: {self.data!r} is not reference, random or a number"
                ) from None
            return self.data

    # -- builders --
    def build_domain(self, nodes=None):
        n = nodes or self.nodes
        try:
            if self.preset == "example1":
                return problems.example1_domain(n)
            if self.preset == "example2":
                return problems.example2_domain(n)
            if self.preset == "example3":
                return problems.example3_domain(n, seed=self.domain_seed)
            curves = [self._build_curve(c, nodes or c.nodes or self.nodes) for c in self.curves]
            return Domain(curves, self.bounded)
        except GeometryError as exc:
            raise ConfigurationError(f"[domain]: {exc}") from exc

    @staticmethod
    def _build_curve(c, n):
        where = f"[curve.{c.name}]"
        try:
            if c.shape == "circle":
                r = float(c.param("radius", "1"))
                return ellipse(_floats(c.param("center", "0, 0"), 2, where), (r, r), 0.0, n)
            if c.shape == "ellipse":
                return ellipse(_floats(c.param("center", "0, 0"), 2, where),
                               _floats(c.param("semi_axes"), 2, where),
                               float(c.param("rotation", "0")), n)
            if c.shape == "fourier":
                return curve_from_fourier(_modes(c.param("modes"), where), n)
        except ConfigurationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"{where}: {exc}") from exc
        raise ConfigurationError(f"{where} shape: unknown {c.shape!r}")

    def reference_sources(self):
        return None if self.sources is None else np.array(self.sources, dtype=float)

    def boundary_data(self, domain):
        kind = KernelKind.parse(self.kind)
        modes = ([(c.data_mode, c.data_value) for c in self.curves] if not self.preset
                 else [(self._preset_mode(), self.data)] * domain.n_curves)
        constants = problems.random_constants(domain.n_curves, self.seed)
        ref = None
        out = []
        for k, (mode, value) in enumerate(modes):
            c = domain.curves[k]
            if mode == "constant":
                out.append(np.full(c.n, float(value)))
            elif mode == "random":
                out.append(np.full(c.n, constants[k]))
            elif mode == "reference":
                if ref is None:
                    ref = reference_boundary_data(domain, kind, self.reference_sources(),
                                                  self.alpha)
                out.append(ref[k])
            else:
                path = value if os.path.isabs(value) else os.path.join(self.base_dir, value)
                try:
                    vals = np.loadtxt(path, ndmin=1)
                except OSError as exc:
                    raise ConfigurationError(f"curve {k} data file: {exc}") from exc
                if vals.shape != (c.n,):
                    raise ConfigurationError(
                        f"curve {k} data file {value!r}: {vals.size} values for {c.n} nodes")
                out.append(vals)
        return out

    def build_spec(self, nodes=None):
        domain = self.build_domain(nodes)
        return ProblemSpec(domain, self.alpha, self.kind, self.boundary_data(domain),
                           quad_order=self.quad_order, gmres_tol=self.gmres_tol,
                           backend=self.backend, fmm_tol=self.fmm_tol, threads=self.threads,
                           max_iter=self.max_iter, restart=self.restart)

    # -- serialization --
    def to_ini(self):
        cp = configparser.ConfigParser(interpolation=None)
        dom = {"bounded": "yes" if self.bounded else "no", "nodes": str(self.nodes)}
        if self.preset:
            dom["preset"] = self.preset
            dom["seed"] = str(self.domain_seed)
        cp["domain"] = dom
        for c in self.curves:
            sec = {"shape": c.shape, **dict(c.params)}
            if c.nodes:
                sec["nodes"] = str(c.nodes)
            sec[c.data_mode] = "yes" if c.data_mode in ("reference", "random") else c.data_value
            cp[f"curve.{c.name}"] = sec
        cp["problem"] = {"alpha": repr(self.alpha), "kind": self.kind,
                         "quad_order": str(self.quad_order), "seed": str(self.seed),
                         "data": self.data}
        solver = {"gmres_tol": repr(self.gmres_tol), "backend": self.backend,
                  "fmm_tol": repr(self.fmm_tol), "threads": str(self.threads),
                  "max_iter": str(self.max_iter)}
        if self.restart:
            solver["restart"] = str(self.restart)
        cp["solver"] = solver
        ref = {"check_points": str(self.check_points), "check_seed": str(self.check_seed)}
        if self.sources is not None:
            ref["sources"] = "; ".join(f"{x!r} {y!r}" for x, y in self.sources)
        if self.analytic:
            ref["analytic"] = self.analytic
        if self.sweep:
            ref["sweep"] = ", ".join(map(str, self.sweep))
        cp["reference"] = ref
        lines = []
        for name in cp.sections():
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in cp[name].items())
            lines.append("")
        return "\n".join(lines)


def _floats(text, count, where):
    if text is None:
        raise ConfigurationError(f"{where}: missing value")
    vals = [float(v) for v in text.replace(",", " ").split()]
    if len(vals) != count:
        raise ConfigurationError(f"{where}: expected {count} numbers, got {text!r}")
    return tuple(vals)


def _modes(text, where):
    if not text:
        raise ConfigurationError(f"{where} modes: missing")
    out = []
    for item in text.split(","):
        k, _, c = item.partition(":")
        if not _:
            raise ConfigurationError(f"{where} modes: {item.strip()!r} is not k:coefficient")
        out.append((int(k), complex(c.strip().replace(" ", ""))))
    return out


def _get(sec, key, conv, default, where):
    if key not in sec:
        return default
    raw = sec[key].strip()
    if raw == "":
        return default
    try:
        return conv(raw)
    except ValueError:
        raise ConfigurationError(f"{where} {key}: cannot parse {raw!r}") from None


def _bool(text):
    t = text.lower()
    if t in ("yes", "true", "on", "1"):
        return True
    if t in ("no", "false", "off", "0"):
        return False
    raise ValueError(text)


def _sources(text):
    pts = []
    for item in text.split(";"):
        if item.strip():
            v = [float(x) for x in item.replace(",", " ").split()]
            if len(v) != 2:
                raise ValueError(item)
            pts.append((v[0], v[1]))
    return tuple(pts)


_KNOWN = {
    "domain": {"bounded", "nodes", "preset", "seed"},
    "problem": {"alpha", "kind", "quad_order", "seed", "data"},
    "solver": {"gmres_tol", "backend", "fmm_tol", "threads", "max_iter", "restart"},
    "reference": {"sources", "preset", "analytic", "check_points", "check_seed", "sweep"},
}
_CURVE_KEYS = {"shape", "center", "radius", "semi_axes", "rotation", "modes", "nodes",
               *DATA_MODES}


def parse_config(text, base_dir="."):
    """Parse INI text into a validated :class:`RunConfig`."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax: {exc}") from exc
    for name in cp.sections():
        known = _CURVE_KEYS if name.startswith("curve.") else _KNOWN.get(name)
        if known is None:
            raise ConfigurationError(f"unknown section [{name}]")
        extra = set(cp[name]) - known
        if extra:
            raise ConfigurationError(f"[{name}]: unknown key(s) {sorted(extra)}")
    if "domain" not in cp or "problem" not in cp:
        raise ConfigurationError("config needs [domain] and [problem] sections")
    d, p = cp["domain"], cp["problem"]
    s = cp["solver"] if "solver" in cp else {}
    r = cp["reference"] if "reference" in cp else {}
    preset = _get(d, "preset", str, None, "[domain]")
    curves = []
    for name in cp.sections():
        if not name.startswith("curve."):
            continue
        sec = cp[name]
        where = f"[{name}]"
        given = [m for m in DATA_MODES if m in sec]
        if len(given) > 1:
            raise ConfigurationError(f"{where}: give only one of {given}")
        mode = given[0] if given else "constant"
        value = sec.get(mode, "0").strip() if given else "0"
        if mode == "constant":
            _get(sec, "constant", float, 0.0, where)
        elif mode in ("reference", "random"):
            if not _get(sec, mode, _bool, True, where):
                raise ConfigurationError(f"{where} {mode}: only 'yes' is meaningful")
            value = "yes"
        params = tuple(sorted((k, v.strip()) for k, v in sec.items()
                              if k not in DATA_MODES and k not in ("shape", "nodes")))
        curves.append(CurveConfig(name[len("curve."):], _get(sec, "shape", str, "ellipse", where),
                                  params, _get(sec, "nodes", int, None, where), mode, value))
    sources = _get(r, "sources", _sources, None, "[reference]")
    ref_preset = _get(r, "preset", str, None, "[reference]")
    if ref_preset is not None:
        if ref_preset != "example1":
            raise ConfigurationError(f"[reference] preset: unknown {ref_preset!r}")
        sources = tuple(map(tuple, problems.example1_sources().tolist()))
    sweep = _get(r, "sweep", lambda t: tuple(int(v) for v in t.replace(",", " ").split()),
                 None, "[reference]")
    cfg = RunConfig(
        bounded=_get(d, "bounded", _bool, True, "[domain]"),
        nodes=_get(d, "nodes", int, 64, "[domain]"),
        preset=preset,
        domain_seed=_get(d, "seed", int, 0, "[domain]"),
        curves=tuple(curves),
        alpha=_get(p, "alpha", float, 1.0, "[problem]"),
        kind=_get(p, "kind", str, "dirichlet", "[problem]").lower(),
        quad_order=_get(p, "quad_order", int, 8, "[problem]"),
        seed=_get(p, "seed", int, 0, "[problem]"),
        data=_get(p, "data", str, "reference", "[problem]"),
        gmres_tol=_get(s, "gmres_tol", float, 1e-11, "[solver]"),
        backend=_get(s, "backend", str, "dense", "[solver]"),
        fmm_tol=_get(s, "fmm_tol", float, 1e-12, "[solver]"),
        threads=_get(s, "threads", int, 1, "[solver]"),
        max_iter=_get(s, "max_iter", int, 500, "[solver]"),
        restart=_get(s, "restart", int, None, "[solver]"),
        sources=sources,
        analytic=_get(r, "analytic", str, None, "[reference]"),
        check_points=_get(r, "check_points", int, 20, "[reference]"),
        check_seed=_get(r, "check_seed", int, 0, "[reference]"),
        sweep=sweep,
        base_dir=base_dir,
    )
    cfg.validate()
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
