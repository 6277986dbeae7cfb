"""Spectrally sampled closed curves and multiply-connected domains.

Curves are stored counterclockwise in their parameter ``t in [0, 2pi)``.
``Curve.normal`` is the right-hand normal ``(w_2, -w_1)/|w|``, which points
away from the region the curve encloses, and ``Curve.curvature`` is signed
so that a counterclockwise circle of radius r has curvature 1/r.

A :class:`Domain` attaches an orientation sign to each curve so that its
normals point out of the domain: +1 on a bounded outer boundary, -1 on the
boundaries of holes.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LinearRing

from .errors import GeometryError

MIN_NODES = 16
# curves closer than this many node spacings trigger a warning
SEPARATION_FACTOR = 2.0


def _check_even(n, minimum=2):
    if int(n) != n or n % 2 or n < minimum:
        raise GeometryError(f"node count must be an even integer >= {minimum}, got {n}")
    return int(n)


def _wavenumbers(n):
    return np.fft.fftfreq(n, d=1.0 / n)


def spectral_derivative(values, order=1):
    """Differentiate periodic samples on ``t_j = 2*pi*j/N`` through their
    trigonometric interpolant (exact for degree < N/2)."""
    values = np.asarray(values)
    n = _check_even(values.shape[0])
    k = _wavenumbers(n)
    mult = (1j * k) ** order
    if order % 2:
        mult[n // 2] = 0.0
    coef = np.fft.fft(values, axis=0)
    shape = (n,) + (1,) * (values.ndim - 1)
    out = np.fft.ifft(coef * mult.reshape(shape), axis=0)
    return out if np.iscomplexobj(values) else out.real


def fourier_interpolate(values, t):
    """Evaluate the trigonometric interpolant of periodic samples at ``t``.

    The Nyquist mode is split symmetrically, so real data stays real.
    """
    values = np.asarray(values)
    n = _check_even(values.shape[0])
    t = np.asarray(t, dtype=float)
    coef = np.fft.fft(values, axis=0) / n
    k = _wavenumbers(n)
    phase = np.exp(1j * np.multiply.outer(t, k))
    phase[..., n // 2] = np.cos(0.5 * n * t)
    out = np.tensordot(phase, coef, axes=(-1, 0))
    return out if np.iscomplexobj(values) else out.real


def periodic_sinc(n, t):
    """Cardinal function of the even-``n`` trigonometric interpolant."""
    t = np.asarray(t, dtype=float)
    t = np.mod(t + np.pi, 2 * np.pi) - np.pi
    out = np.ones_like(t)
    nz = np.abs(t) > 1e-14
    out[nz] = np.sin(0.5 * n * t[nz]) / (n * np.tan(0.5 * t[nz]))
    return out


def shift_matrix(n, shift):
    """Dense operator mapping samples ``f(t_m)`` to ``f(t_j + shift)``."""
    h = 2 * np.pi / n
    j = np.arange(n)
    return periodic_sinc(n, (j[:, None] - j[None, :]) * h + shift)


def shift_multiplier(n, shift):
    """Fourier-space multiplier realising the same shift as :func:`shift_matrix`."""
    k = _wavenumbers(n)
    mult = np.exp(1j * k * shift)
    mult[n // 2] = np.cos(0.5 * n * shift)
    return mult


def apply_shift(values, multiplier):
    values = np.asarray(values)
    shape = (values.shape[0],) + (1,) * (values.ndim - 1)
    out = np.fft.ifft(np.fft.fft(values, axis=0) * multiplier.reshape(shape), axis=0)
    return out if np.iscomplexobj(values) else out.real


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Curve:
    """A smooth closed curve sampled at ``n`` equispaced parameter values."""

    points: np.ndarray
    description: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError("curve samples must have shape (N, 2)")
        _check_even(pts.shape[0], MIN_NODES)
        z = pts[:, 0] + 1j * pts[:, 1]
        dz = spectral_derivative(z)
        d2z = spectral_derivative(z, order=2)
        speed = np.abs(dz)
        if np.any(speed < 1e-14 * max(1.0, np.max(np.abs(z)))):
            raise GeometryError("curve parametrization has vanishing speed")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "_z", z)
        object.__setattr__(self, "_dz", dz)
        object.__setattr__(self, "deriv", _frozen(np.column_stack([dz.real, dz.imag])))
        object.__setattr__(self, "deriv2", _frozen(np.column_stack([d2z.real, d2z.imag])))
        object.__setattr__(self, "speed", _frozen(speed))
        object.__setattr__(self, "normal", _frozen(np.column_stack([dz.imag, -dz.real]) / speed[:, None]))
        cross = dz.real * d2z.imag - dz.imag * d2z.real
        object.__setattr__(self, "curvature", _frozen(cross / speed**3))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def h(self):
        return 2 * np.pi / self.n

    @property
    def params(self):
        return self.h * np.arange(self.n)

    @property
    def z(self):
        return self._z.copy()

    def arc_length(self):
        return self.h * float(np.sum(self.speed))

    def signed_area(self):
        x, y = self.points.T
        dx, dy = self.deriv.T
        return 0.5 * self.h * float(np.sum(x * dy - y * dx))

    def spacing(self):
        """Largest arc-length gap between consecutive nodes."""
        return self.h * float(np.max(self.speed))

    def at(self, t):
        """Points, first derivatives at arbitrary parameter values (spectral)."""
        zt = fourier_interpolate(self._z, t)
        dzt = fourier_interpolate(self._dz, t)
        return np.stack([zt.real, zt.imag], -1), np.stack([dzt.real, dzt.imag], -1)

    def resample(self, n):
        """Same curve on ``n`` nodes (exact for band-limited curves)."""
        t = 2 * np.pi * np.arange(n) / n
        pts, _ = self.at(t)
        return Curve(pts, dict(self.description, n=n))

    def is_simple(self):
        return LinearRing(self.points).is_simple


def ellipse(center=(0.0, 0.0), semi_axes=(1.0, 1.0), rotation=0.0, n=64):
    """Counterclockwise ellipse ``c + R(rotation) (a cos t, b sin t)``."""
    a, b = (float(v) for v in semi_axes)
    if a <= 0 or b <= 0:
        raise GeometryError("ellipse semi-axes must be positive")
    n = _check_even(n, MIN_NODES)
    t = 2 * np.pi * np.arange(n) / n
    c, s = np.cos(rotation), np.sin(rotation)
    x, y = a * np.cos(t), b * np.sin(t)
    pts = np.column_stack([center[0] + c * x - s * y, center[1] + s * x + c * y])
    desc = dict(kind="ellipse", center=tuple(map(float, center)), axes=(a, b),
                rotation=float(rotation), n=n)
    return Curve(pts, desc)


def _normalize_modes(coefficients):
    if isinstance(coefficients, dict):
        items = coefficients.items()
    else:
        items = coefficients
    modes = {}
    for k, c in items:
        modes[int(k)] = modes.get(int(k), 0) + complex(c)
    return modes


def curve_from_fourier(coefficients, n=64):
    """Curve ``z(t) = sum_k c_k exp(i k t)`` from ``{k: c_k}`` or ``[(k, c_k), ...]``.

    Clockwise input is reparametrized by ``t -> -t``. Self-intersecting
    samples raise :class:`GeometryError`.
    """
    n = _check_even(n, MIN_NODES)
    modes = _normalize_modes(coefficients)
    if not modes or max(abs(k) for k in modes) >= n // 2:
        raise GeometryError(f"Fourier modes must satisfy |k| < N/2 = {n // 2}")
    t = 2 * np.pi * np.arange(n) / n
    z = sum(c * np.exp(1j * k * t) for k, c in modes.items())
    pts = np.column_stack([z.real, z.imag])
    if not LinearRing(pts).is_simple:
        raise GeometryError("Fourier curve is self-intersecting")
    desc = dict(kind="fourier", coefficients=sorted(modes.items()), n=n)
    curve = Curve(pts, desc)
    if curve.signed_area() < 0:
        pts = pts[(-np.arange(n)) % n]
        curve = Curve(pts, desc)
    return curve


def winding_number(curve_points, targets, chunk=4096):
    """Winding number of a closed polygon around each target point."""
    zc = curve_points[:, 0] + 1j * curve_points[:, 1]
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    zt = targets[:, 0] + 1j * targets[:, 1]
    out = np.empty(zt.shape[0])
    nxt = np.roll(zc, -1)
    for s in range(0, zt.size, chunk):
        p = zt[s:s + chunk, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ang = np.angle((nxt[None, :] - p) / (zc[None, :] - p))
        out[s:s + chunk] = np.sum(ang, axis=1) / (2 * np.pi)
    return np.rint(out).astype(int)


class Domain:
    """Ordered collection of curves; ``curves[0]`` is the outer boundary when bounded.

    Normals returned by the domain point out of D on every component.
    """

    def __init__(self, curves, bounded, min_separation=None, validate=True):
        self.curves = tuple(curves)
        self.bounded = bool(bounded)
        if not self.curves:
            raise GeometryError("a domain needs at least one curve")
        self.signs = np.array([1.0 if (self.bounded and k == 0) else -1.0
                               for k in range(len(self.curves))])
        sizes = [c.n for c in self.curves]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.min_separation = min_separation
        if validate:
            self.validate()

    @property
    def n_curves(self):
        return len(self.curves)

    @property
    def M(self):
        """Number of interior curves (holes)."""
        return self.n_curves - (1 if self.bounded else 0)

    @property
    def size(self):
        return int(self.offsets[-1])

    def curve_slice(self, k):
        return slice(self.offsets[k], self.offsets[k + 1])

    @property
    def points(self):
        return np.vstack([c.points for c in self.curves])

    @property
    def normals(self):
        return np.vstack([s * c.normal for s, c in zip(self.signs, self.curves)])

    @property
    def curvature(self):
        return np.concatenate([s * c.curvature for s, c in zip(self.signs, self.curves)])

    @property
    def speeds(self):
        return np.concatenate([c.speed for c in self.curves])

    @property
    def weights(self):
        """Trapezoid arc-length weights ``h_k |w_j|``."""
        return np.concatenate([c.h * c.speed for c in self.curves])

    @property
    def curve_index(self):
        return np.repeat(np.arange(self.n_curves), [c.n for c in self.curves])

    def normal(self, k):
        return self.signs[k] * self.curves[k].normal

    def signed_curvature(self, k):
        return self.signs[k] * self.curves[k].curvature

    def with_nodes(self, n):
        """Same geometry with ``n`` nodes per curve (int or per-curve sequence)."""
        ns = [n] * self.n_curves if np.ndim(n) == 0 else list(n)
        return Domain([c.resample(m) for c, m in zip(self.curves, ns)], self.bounded,
                      self.min_separation, validate=False)

    def contains(self, targets):
        """Boolean mask: target strictly inside D (by winding numbers)."""
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        inside = np.ones(targets.shape[0], dtype=bool)
        for k, c in enumerate(self.curves):
            w = winding_number(c.points, targets)
            if self.bounded and k == 0:
                inside &= w != 0
            else:
                inside &= w == 0
        return inside

    def distance_to_boundary(self, targets):
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        pts = self.points
        out = np.full(targets.shape[0], np.inf)
        for s in range(0, targets.shape[0], 2048):
            d = np.linalg.norm(targets[s:s + 2048, None, :] - pts[None], axis=-1)
            out[s:s + 2048] = d.min(axis=1)
        return out

    def bounding_box(self):
        pts = self.points
        return pts.min(axis=0), pts.max(axis=0)

    def validate(self):
        for k, c in enumerate(self.curves):
            if not c.is_simple():
                raise GeometryError(f"curve {k} is self-intersecting")
            if c.signed_area() <= 0:
                raise GeometryError(f"curve {k} is not counterclockwise")
        # disjointness: no curve's samples inside another region, no crossings
        for k, ck in enumerate(self.curves):
            for m, cm in enumerate(self.curves):
                if k == m:
                    continue
                w = winding_number(cm.points, ck.points)
                if self.bounded and m == 0:
                    if np.any(w == 0):
                        raise GeometryError(f"curve {k} is not inside the outer boundary")
                elif np.any(w != 0):
                    raise GeometryError(f"curve {k} intersects or lies inside hole {m}")
        self._check_separation()
        self._check_normals()

    def _check_separation(self):
        for k in range(self.n_curves):
            for m in range(k + 1, self.n_curves):
                ck, cm = self.curves[k], self.curves[m]
                thresh = self.min_separation
                if thresh is None:
                    thresh = SEPARATION_FACTOR * max(ck.spacing(), cm.spacing())
                d = np.min(np.linalg.norm(ck.points[:, None] - cm.points[None], axis=-1))
                if d < thresh:
                    warnings.warn(f"curves {k} and {m} are {d:.3g} apart (< {thresh:.3g}); "
                                  "near-interaction quadrature error may be large",
                                  stacklevel=3)

    def _check_normals(self):
        for k, c in enumerate(self.curves):
            idx = np.arange(0, c.n, max(1, c.n // 8))
            eps = 1e-3 * c.spacing()
            n = self.normal(k)[idx]
            outside = self.contains(c.points[idx] + eps * n)
            inside = self.contains(c.points[idx] - eps * n)
            if np.any(outside) or not np.all(inside):
                raise GeometryError(f"normals of curve {k} do not point out of the domain")
