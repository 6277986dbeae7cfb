"""Geometries and boundary data for the benchmark problems.

The layouts mirror the structure of the published examples (a circle with
ten elliptic holes; the same holes without the outer circle; a larger
field of randomly shaped holes) with fixed, self-chosen parameters.
"""

import numpy as np

from .geometry import Domain, ellipse
from .kernels import KernelKind
from .postprocess import reference_boundary_data
from .solver import ProblemSpec

# (center x, center y, semi-axis a, semi-axis b, rotation)
EXAMPLE1_ELLIPSES = (
    (0.45, 0.05, 0.14, 0.06, 0.3),
    (0.20, 0.42, 0.10, 0.05, 1.2),
    (-0.18, 0.48, 0.12, 0.07, -0.4),
    (-0.50, 0.22, 0.09, 0.05, 0.9),
    (-0.52, -0.20, 0.13, 0.06, 2.0),
    (-0.22, -0.50, 0.11, 0.05, 0.1),
    (0.18, -0.46, 0.12, 0.06, -1.0),
    (0.55, -0.35, 0.08, 0.05, 0.6),
    (0.00, 0.05, 0.16, 0.08, 0.7),
    (0.62, 0.40, 0.07, 0.04, -0.7),
)
EXAMPLE1_RADIUS = 1.0
EXAMPLE1_ALPHA = 0.1


def example1_holes(n=64):
    return [ellipse((cx, cy), (a, b), rot, n) for cx, cy, a, b, rot in EXAMPLE1_ELLIPSES]


SOURCE_OFFSET = 0.6


def example1_sources(offset=None):
    """One reference source per hole, on its minor axis at ``offset`` times
    the minor semi-axis from the center. Sources close to the flat side of a
    hole make the boundary data vary on a length scale comparable to the
    coarse node spacing."""
    f = SOURCE_OFFSET if offset is None else offset
    return np.array([[cx - f * b * np.sin(rot), cy + f * b * np.cos(rot)]
                     for cx, cy, a, b, rot in EXAMPLE1_ELLIPSES])


def example1_domain(n=64):
    """Bounded circle with ten elliptic holes, ``n`` nodes per curve."""
    outer = ellipse((0.0, 0.0), (EXAMPLE1_RADIUS, EXAMPLE1_RADIUS), 0.0, n)
    return Domain([outer] + example1_holes(n), bounded=True)


def example2_domain(n=64):
    """The ten holes of :func:`example1_domain` in the unbounded plane."""
    return Domain(example1_holes(n), bounded=False)


def example3_domain(n=256, seed=0, grid=5, spacing=0.3, radius=1.25):
    """Circle with ``grid**2 - 1`` randomly shaped and oriented elliptic holes.

    Hole centers sit on a jittered square lattice without its middle site.
    """
    rng = np.random.default_rng(seed)
    offs = (np.arange(grid) - (grid - 1) / 2) * spacing
    holes = []
    for y in offs:
        for x in offs:
            if abs(x) < 1e-12 and abs(y) < 1e-12:
                continue
            a = rng.uniform(0.05, 0.11)
            b = a * rng.uniform(0.35, 0.9)
            jitter = rng.uniform(-0.02, 0.02, 2)
            holes.append(ellipse((x + jitter[0], y + jitter[1]), (a, b),
                                 rng.uniform(0, np.pi), n))
    outer = ellipse((0.0, 0.0), (radius, radius), 0.0, n)
    return Domain([outer] + holes, bounded=True)


def random_constants(n_curves, seed=0):
    """Constant boundary values drawn uniformly from (-1, 1)."""
    return np.random.default_rng(seed + 1).uniform(-1.0, 1.0, n_curves)


def reference_spec(domain, kind, alpha, sources=None, **kwargs):
    """Problem whose boundary data come from the reference sources."""
    if sources is None:
        sources = example1_sources()
    kind = KernelKind.parse(kind)
    data = reference_boundary_data(domain, kind, sources, alpha)
    return ProblemSpec(domain, alpha, kind, data, **kwargs)


def clustered_points(n, seed=0):
    """Half of the points uniform in the unit square, half on two ellipses."""
    rng = np.random.default_rng(seed)
    m = n // 2
    square = rng.random((n - m, 2))
    t1 = rng.random(m // 2) * 2 * np.pi
    t2 = rng.random(m - m // 2) * 2 * np.pi
    e1 = np.column_stack([0.3 + 0.2 * np.cos(t1), 0.4 + 0.1 * np.sin(t1)])
    e2 = np.column_stack([0.7 + 0.15 * np.cos(t2), 0.6 + 0.25 * np.sin(t2)])
    return np.vstack([square, e1, e2])


def uniform_points(n, seed=0):
    return np.random.default_rng(seed).random((n, 2))
