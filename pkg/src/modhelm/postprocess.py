"""Field evaluation from a solved density, reference solutions and error metrics."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fmm.summation import FMMPlan, ParticleSystem, direct_evaluate
from .kernels import KernelKind
from .special import bessel_i_scaled, bessel_k01, bessel_k_scaled

NEAR_FACTOR = 5.0
_DIRECT_PAIRS = 4_000_000


@dataclass
class FieldGrid:
    """Field values at evaluation points.

    ``values`` is NaN where ``inside`` is False. ``near`` marks interior points
    within a few panel lengths of the boundary, where the smooth quadrature
    loses accuracy.
    """

    points: np.ndarray
    values: np.ndarray
    inside: np.ndarray
    near: np.ndarray

    @property
    def reliable(self):
        return self.inside & ~self.near

    def write(self, path):
        """Write ``x y value inside_flag`` rows with 17 significant digits."""
        with open(path, "w") as fh:
            fh.write("# x y value inside_flag\n")
            for (x, y), v, m in zip(self.points, self.values, self.inside):
                val = f"{v:.17g}" if m else "nan"
                fh.write(f"{x:.17g} {y:.17g} {val} {int(m)}\n")

    @classmethod
    def read(cls, path):
        data = np.loadtxt(path, comments="#")
        data = np.atleast_2d(data)
        inside = data[:, 3].astype(bool)
        return cls(data[:, :2], data[:, 2], inside, np.zeros(len(data), dtype=bool))


def near_boundary(domain, points, factor=NEAR_FACTOR):
    """True for points within ``factor`` local node spacings of any boundary node."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(points), dtype=bool)
    for c in domain.curves:
        spacing = c.h * c.speed
        for s in range(0, len(points), 2048):
            d = np.linalg.norm(points[s:s + 2048, None, :] - c.points[None], axis=-1)
            out[s:s + 2048] |= np.any(d < factor * spacing[None, :], axis=1)
    return out


def layer_potential(domain, kind, alpha, density, targets, backend="auto", fmm_tol=1e-12,
                    threads=1):
    """Double-layer (Dirichlet) or single-layer (Neumann) potential at ``targets``.

    ``u(x) = (1/(2 pi alpha^2)) sum_n W_n sigma_n G_n(x)``, with ``G_n`` the
    dipole field ``n_y . grad_y K_0`` for Dirichlet and ``K_0`` for Neumann.
    """
    kind = KernelKind.parse(kind)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(targets) == 0:
        return np.zeros(0)
    strength = domain.weights * np.asarray(density, dtype=float) / (2 * np.pi * alpha**2)
    dipole = kind is KernelKind.DIRICHLET
    if backend == "auto":
        backend = "dense" if domain.size * len(targets) <= _DIRECT_PAIRS else "fmm"
    if backend == "dense":
        system = ParticleSystem(domain.points, alpha,
                                charges=None if dipole else strength,
                                dipoles=strength if dipole else None,
                                directions=domain.normals if dipole else None,
                                targets=targets)
        return direct_evaluate(system).potential
    if backend != "fmm":
        raise ConfigurationError(f"unknown backend {backend!r}")
    plan = FMMPlan(domain.points, alpha, targets=targets,
                   directions=domain.normals if dipole else None,
                   tolerance=fmm_tol, threads=threads)
    if dipole:
        return plan.apply(dipoles=strength).potential
    return plan.apply(charges=strength).potential


def eval_field(solution, points, backend="auto", near_factor=NEAR_FACTOR):
    """Evaluate the solved layer potential at ``points`` inside the domain."""
    spec = solution.spec
    points = np.atleast_2d(np.asarray(points, dtype=float))
    inside = spec.domain.contains(points)
    values = np.full(len(points), np.nan)
    values[inside] = layer_potential(spec.domain, spec.kind, spec.alpha, solution.density,
                                     points[inside], backend=backend, fmm_tol=spec.fmm_tol,
                                     threads=spec.threads)
    near = np.zeros(len(points), dtype=bool)
    near[inside] = near_boundary(spec.domain, points[inside], near_factor)
    return FieldGrid(points, values, inside, near)


def grid_points(domain, nx, ny, pad=0.0):
    """Tensor grid over the domain's bounding box (padded for unbounded domains)."""
    lo, hi = domain.bounding_box()
    if pad:
        span = hi - lo
        lo, hi = lo - pad * span, hi + pad * span
    xs = np.linspace(lo[0], hi[0], nx)
    ys = np.linspace(lo[1], hi[1], ny)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def _check_sources(domain, sources):
    inside = domain.contains(sources)
    if np.any(inside):
        raise ConfigurationError(
            "reference sources must lie outside the domain; "
            f"source {int(np.flatnonzero(inside)[0])} is inside")


def reference_solution(sources, alpha, targets, domain=None, strengths=None):
    """``u(x) = sum_k c_k K_0(|x - x_k|/alpha)`` at ``targets``.

    When ``domain`` is given the sources are checked to lie outside it, so
    that ``u`` solves the homogeneous equation in the domain.
    """
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if domain is not None:
        _check_sources(domain, sources)
    c = np.ones(len(sources)) if strengths is None else np.asarray(strengths, dtype=float)
    out = np.zeros(len(targets))
    for xk, ck in zip(sources, c):
        r = np.hypot(*(targets - xk).T) / alpha
        k0, _ = bessel_k01(r)
        out += ck * k0
    return out


def reference_normal_derivative(sources, alpha, points, normals, domain=None, strengths=None):
    """Normal derivative ``n . grad u`` of :func:`reference_solution`."""
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    if domain is not None:
        _check_sources(domain, sources)
    c = np.ones(len(sources)) if strengths is None else np.asarray(strengths, dtype=float)
    out = np.zeros(len(points))
    for xk, ck in zip(sources, c):
        d = points - xk
        r = np.hypot(d[:, 0], d[:, 1])
        _, k1 = bessel_k01(r / alpha)
        out -= ck * k1 / alpha * np.einsum("ij,ij->i", d, normals) / r
    return out


def reference_boundary_data(domain, kind, sources, alpha, strengths=None):
    """Per-curve Dirichlet values or Neumann data generated by the reference field."""
    kind = KernelKind.parse(kind)
    out = []
    for k, c in enumerate(domain.curves):
        if kind is KernelKind.DIRICHLET:
            out.append(reference_solution(sources, alpha, c.points, domain, strengths))
        else:
            out.append(reference_normal_derivative(sources, alpha, c.points, domain.normal(k),
                                                   domain, strengths))
    return out


def disk_solution(r, radius, alpha, kind="dirichlet", value=1.0, exterior=False):
    """Radial solution for constant data on a circle of ``radius``.

    Interior: ``I_0(r/alpha)/I_0(R/alpha)`` (Dirichlet) or
    ``alpha I_0(r/alpha)/I_1(R/alpha)`` (Neumann); exterior: ``K_0`` and
    ``K_1`` in place of ``I_0`` and ``I_1``, with the normal pointing toward
    the center.
    """
    kind = KernelKind.parse(kind)
    r = np.asarray(r, dtype=float)
    x, X = r / alpha, radius / alpha
    if not exterior:
        # e^{-x} I scaled ratios; exponent difference x - X <= 0 inside
        num = bessel_i_scaled(0, x)
        den = bessel_i_scaled(0 if kind is KernelKind.DIRICHLET else 1, X)
        out = value * num / den * np.exp(x - X)
    else:
        num = bessel_k_scaled(0, x)
        den = bessel_k_scaled(0 if kind is KernelKind.DIRICHLET else 1, X)
        out = value * num / den * np.exp(X - x)
    if kind is KernelKind.NEUMANN:
        out = out * alpha
    return out


def _spacing_clearance(domain, points):
    """Distance to each curve in units of that curve's largest node spacing (min over curves)."""
    out = np.full(len(points), np.inf)
    for c in domain.curves:
        sp = float(np.max(c.h * c.speed))
        d = np.linalg.norm(points[:, None, :] - c.points[None], axis=-1).min(axis=1)
        out = np.minimum(out, d / sp)
    return out


def check_points(domain, count=20, clearance=10.0, seed=0, max_tries=200):
    """Deterministic interior points at least ``clearance`` node spacings from every curve.

    Spacings are per curve, so a point near a coarsely sampled outer curve
    needs more room than one near a finely sampled small hole. The
    clearance is capped at half the best value seen in a seeded probe
    sample, so very coarse grids still get check points. Candidates come
    from a seeded uniform sample of the bounding box (enlarged for
    unbounded domains); the first ``count`` admissible ones are kept.
    """
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box()
    if not domain.bounded:
        span = hi - lo
        lo, hi = lo - 0.25 * span, hi + 0.25 * span
    need = clearance
    probe = lo + (hi - lo) * rng.random((4096, 2))
    probe = probe[domain.contains(probe)]
    if len(probe):
        need = min(need, 0.5 * float(np.max(_spacing_clearance(domain, probe))))
    kept = []
    for _ in range(max_tries):
        cand = lo + (hi - lo) * rng.random((256, 2))
        cand = cand[domain.contains(cand)]
        if len(cand):
            cand = cand[_spacing_clearance(domain, cand) >= need]
        kept.extend(cand)
        if len(kept) >= count:
            return np.array(kept[:count])
    raise ConfigurationError(f"could not place {count} check points with clearance {need:.3g}")


def max_error(field, reference):
    """Max absolute error over the reliable points of ``field``.

    ``field`` is a :class:`FieldGrid` or an array (then all points count).
    """
    if isinstance(field, FieldGrid):
        mask = field.reliable
        values = field.values
    else:
        values = np.asarray(field, dtype=float)
        mask = np.ones(values.shape, dtype=bool)
    reference = np.asarray(reference, dtype=float)
    if reference.shape != values.shape:
        raise ConfigurationError("field and reference have different point sets")
    if not np.any(mask):
        raise ConfigurationError("no comparable points (all outside or near the boundary)")
    return float(np.max(np.abs(values[mask] - reference[mask])))
