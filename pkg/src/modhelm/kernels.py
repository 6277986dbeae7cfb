"""Boundary-integral kernels and the Nystrom operator.

Both integral equations have the form

    sigma(x) + (1/pi) int_Gamma K(y, x) sigma(y) ds_y = F(x),
    K(y, x) = (1/alpha) K_1(|y - x|/alpha) (y - x) . n / |y - x|,

with ``n = n_y`` for the Dirichlet (double-layer) equation and ``n = n_x``
for the Neumann (single-layer) equation; normals point out of the domain.
On a smooth curve ``K(y, x) -> kappa(x)/2`` (Dirichlet) and ``-kappa(x)/2``
(Neumann) as ``y -> x``, with ``kappa`` signed relative to that normal.

The discrete operator uses the periodic trapezoid rule between curves and,
on a target's own curve, the trapezoid rule outside the band
``|n - j| < a`` plus the hybrid Gauss-trapezoid correction nodes, whose
density, position, speed and normal come from trigonometric interpolation.
"""

from enum import Enum

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DomainError
from .fmm.summation import FMMPlan
from .geometry import apply_shift, periodic_sinc, shift_multiplier
from .quadrature import alpert_rule
from .special import bessel_k01

DENSE_CAP = 8192
_ROW_BLOCK = 512


class KernelKind(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"unknown boundary condition kind {value!r}") from None


def kernel_eval(kind, y, x, n_y, n_x, alpha):
    """Kernel ``K(y, x)``; arrays broadcast over leading axes of shape (..., 2)."""
    kind = KernelKind.parse(kind)
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r == 0):
        raise DomainError("kernel_eval at coincident points; use kernel_diagonal")
    n = np.asarray(n_y if kind is KernelKind.DIRICHLET else n_x, dtype=float)
    dn = d[..., 0] * n[..., 0] + d[..., 1] * n[..., 1]
    _, k1 = bessel_k01(r / alpha)
    out = k1 * dn / (alpha * r)
    return float(out) if np.ndim(out) == 0 else out


def kernel_diagonal(kappa, kind=KernelKind.DIRICHLET):
    """Limit of the kernel on the diagonal: ``kappa/2`` (Dirichlet), ``-kappa/2`` (Neumann).

    ``(y - x) . n_y`` and ``(y - x) . n_x`` have opposite signs to leading
    order on a curved boundary, hence the sign flip between the two kinds.
    """
    half = 0.5 if KernelKind.parse(kind) is KernelKind.DIRICHLET else -0.5
    return half * np.asarray(kappa, dtype=float) if np.ndim(kappa) else half * float(kappa)


class _CurveCorrection:
    """Off-grid quadrature data for one curve: kernel weights at the
    ``2l`` correction nodes of every target and the interpolation shifts."""

    def __init__(self, curve, sign, rule, kind, alpha):
        n, h = curve.n, curve.h
        self.n = n
        offs = np.concatenate([rule.offsets, -rule.offsets]) * h
        wts = np.concatenate([rule.weights, rule.weights]) * h
        t = curve.params
        tt = t[:, None] + offs[None, :]
        pos, der = curve.at(tt)
        speed = np.hypot(der[..., 0], der[..., 1])
        normal = sign * np.stack([der[..., 1], -der[..., 0]], -1) / speed[..., None]
        x = curve.points[:, None, :]
        nx = np.broadcast_to((sign * curve.normal)[:, None, :], normal.shape)
        k = kernel_eval(kind, pos, x, normal, nx, alpha)
        self.offsets = offs
        self.coef = k * speed * wts[None, :] / np.pi          # (n, 2l)
        self.multipliers = [shift_multiplier(n, s) for s in offs]

    def apply(self, sigma):
        out = np.zeros(self.n)
        for q, mult in enumerate(self.multipliers):
            out += self.coef[:, q] * apply_shift(sigma, mult)
        return out

    def dense(self):
        n = self.n
        j = np.arange(n)
        lag = (j[None, :] - j[:, None]) % n           # m - j
        h = 2 * np.pi / n
        out = np.zeros((n, n))
        for q, s in enumerate(self.offsets):
            # sigma(t_j + s) = sum_m sinc(t_j + s - t_m) sigma_m
            c = periodic_sinc(n, s - h * np.arange(n))
            out += self.coef[:, q][:, None] * c[lag]
        return out


class DiscreteOperator:
    """Nystrom discretization of the second-kind equation on a domain.

    ``backend`` is ``"dense"`` (assembled matrix, up to ``dense_cap``
    unknowns) or ``"fmm"`` (matrix-free, O(N) per application).
    """

    def __init__(self, domain, kind, alpha, quad_order=8, backend="dense", fmm_tol=1e-12,
                 threads=1, dense_cap=DENSE_CAP, s_max=40):
        self.domain = domain
        self.kind = KernelKind.parse(kind)
        if not alpha > 0:
            raise ConfigurationError("alpha must be positive")
        self.alpha = float(alpha)
        self.rule = alpert_rule(quad_order)
        if backend not in ("dense", "fmm"):
            raise ConfigurationError(f"unknown backend {backend!r}")
        self.backend = backend
        self.fmm_tol = fmm_tol
        self.threads = threads
        self.dense_cap = dense_cap
        self.s_max = s_max
        for k, c in enumerate(domain.curves):
            if c.n < max(self.rule.min_nodes(), 4 * self.rule.a):
                raise ConfigurationError(
                    f"curve {k} has {c.n} nodes; order-{self.rule.order} rule needs more")
        self.points = domain.points
        self.normals = domain.normals
        self.weights = domain.weights
        self.curvature = domain.curvature
        self._corrections = None
        self._matrix = None
        self._plan = None
        self._band = None

    @property
    def size(self):
        return self.domain.size

    # -- pieces shared by both backends --
    def corrections(self):
        if self._corrections is None:
            self._corrections = [
                _CurveCorrection(c, s, self.rule, self.kind, self.alpha) if self.rule.l else None
                for c, s in zip(self.domain.curves, self.domain.signs)
            ]
        return self._corrections

    def diagonal(self):
        """Diagonal quadrature term; nonzero only for the plain trapezoid rule."""
        if self.rule.order != 0:
            return np.zeros(self.size)
        return self.weights * kernel_diagonal(self.curvature, self.kind) / np.pi

    def _band_offsets(self):
        return [d for d in range(-(self.rule.a - 1), self.rule.a) if d != 0]

    def band_matrix(self):
        """Sparse trapezoid entries ``K W / pi`` inside the excluded band (off-diagonal)."""
        if self._band is None:
            rows, cols = [], []
            for k, c in enumerate(self.domain.curves):
                base = self.domain.offsets[k]
                j = np.arange(c.n)
                for d in self._band_offsets():
                    rows.append(base + j)
                    cols.append(base + (j + d) % c.n)
            if rows:
                r = np.concatenate(rows)
                cidx = np.concatenate(cols)
                vals = self._entries(r, cidx)
            else:
                r = cidx = np.zeros(0, dtype=int)
                vals = np.zeros(0)
            self._band = sp.csr_matrix((vals, (r, cidx)), shape=(self.size, self.size))
        return self._band

    def _entries(self, rows, cols):
        """Trapezoid entries ``K(y_col, x_row) W_col / pi``."""
        k = kernel_eval(self.kind, self.points[cols], self.points[rows],
                        self.normals[cols], self.normals[rows], self.alpha)
        return k * self.weights[cols] / np.pi

    # -- dense backend --
    def assemble(self):
        if self._matrix is not None:
            return self._matrix
        n = self.size
        if n > self.dense_cap:
            raise ConfigurationError(f"{n} unknowns exceed the dense cap {self.dense_cap}")
        A = np.empty((n, n))
        pts, nrm = self.points, self.normals
        wts = self.weights / np.pi
        for s in range(0, n, _ROW_BLOCK):
            e = min(n, s + _ROW_BLOCK)
            d = pts[None, :, :] - pts[s:e, None, :]
            r = np.hypot(d[..., 0], d[..., 1])
            rows = np.arange(s, e)
            r[rows - s, rows] = 1.0
            if self.kind is KernelKind.DIRICHLET:
                dn = d[..., 0] * nrm[None, :, 0] + d[..., 1] * nrm[None, :, 1]
            else:
                dn = d[..., 0] * nrm[s:e, None, 0] + d[..., 1] * nrm[s:e, None, 1]
            _, k1 = bessel_k01(r / self.alpha)
            A[s:e] = k1 * dn / (self.alpha * r) * wts[None, :]
            A[rows, rows] = 0.0
        for k, c in enumerate(self.domain.curves):
            sl = self.domain.curve_slice(k)
            base = sl.start
            j = np.arange(c.n)
            for dd in self._band_offsets():
                A[base + j, base + (j + dd) % c.n] = 0.0
            corr = self.corrections()[k]
            if corr is not None:
                A[sl, sl] += corr.dense()
        A[np.diag_indices(n)] += 1.0 + self.diagonal()
        self._matrix = A
        return A

    # -- fmm backend --
    def plan(self):
        if self._plan is None:
            directions = self.normals if self.kind is KernelKind.DIRICHLET else None
            self._plan = FMMPlan(self.points, self.alpha, directions=directions,
                                 tolerance=self.fmm_tol, s_max=self.s_max,
                                 threads=self.threads, cache=True)
        return self._plan

    def _apply_fmm(self, sigma):
        c = self.weights * sigma / np.pi
        plan = self.plan()
        if self.kind is KernelKind.DIRICHLET:
            far = plan.apply(dipoles=-c).potential
        else:
            g = plan.apply(charges=c, potential=False, gradient=True).gradient
            far = np.einsum("ij,ij->i", g, self.normals)
        out = sigma + far - self.band_matrix() @ sigma + self.diagonal() * sigma
        for k, corr in enumerate(self.corrections()):
            if corr is not None:
                sl = self.domain.curve_slice(k)
                out[sl] += corr.apply(sigma[sl])
        return out

    def apply(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if sigma.shape != (self.size,):
            raise ConfigurationError(f"density has shape {sigma.shape}, expected ({self.size},)")
        if self.backend == "dense":
            return self.assemble() @ sigma
        return self._apply_fmm(sigma)

    __call__ = apply


def assemble_dense(op):
    """Dense Nystrom matrix of ``op`` (identity included)."""
    return op.assemble()


def apply_operator(op, sigma):
    """``A sigma`` with the operator's backend."""
    return op.apply(sigma)
