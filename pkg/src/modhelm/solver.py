"""Problem setup, GMRES and the boundary-integral solve."""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConvergenceError
from .geometry import Domain
from .kernels import DiscreteOperator, KernelKind
from .quadrature import SUPPORTED_ORDERS


@dataclass
class ProblemSpec:
    """Boundary-value problem for ``u - alpha^2 lap u = 0``.

    ``data`` holds one array of boundary samples per curve: Dirichlet values
    ``f`` or Neumann values ``g`` (normal derivative along the normal that
    points out of the domain). A scalar per curve is broadcast.
    """

    domain: Domain
    alpha: float
    kind: KernelKind = KernelKind.DIRICHLET
    data: list = None
    quad_order: int = 8
    gmres_tol: float = 1e-11
    backend: str = "dense"
    fmm_tol: float = 1e-12
    threads: int = 1
    max_iter: int = 500
    restart: int = None

    def __post_init__(self):
        self.kind = KernelKind.parse(self.kind)
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ConfigurationError("alpha must be a positive length")
        if self.quad_order not in SUPPORTED_ORDERS:
            raise ConfigurationError(f"quadrature order must be one of {SUPPORTED_ORDERS}")
        if not 0 < self.gmres_tol < 1:
            raise ConfigurationError("gmres tolerance must lie in (0, 1)")
        if self.backend not in ("dense", "fmm"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        curves = self.domain.curves
        if self.data is None:
            raise ConfigurationError("boundary data is required")
        if len(self.data) != len(curves):
            raise ConfigurationError(
                f"{len(self.data)} boundary data blocks for {len(curves)} curves")
        blocks = []
        for k, (d, c) in enumerate(zip(self.data, curves)):
            d = np.asarray(d, dtype=float)
            if d.ndim == 0:
                d = np.full(c.n, float(d))
            if d.shape != (c.n,):
                raise ConfigurationError(
                    f"curve {k}: {d.size} boundary samples for {c.n} nodes")
            if not np.all(np.isfinite(d)):
                raise ConfigurationError(f"curve {k}: boundary data is not finite")
            blocks.append(d)
        self.data = blocks

    @property
    def size(self):
        return self.domain.size

    def operator(self):
        return DiscreteOperator(self.domain, self.kind, self.alpha, self.quad_order,
                                backend=self.backend, fmm_tol=self.fmm_tol,
                                threads=self.threads)


@dataclass
class GMRESResult:
    x: np.ndarray
    iterations: int
    residuals: list            # relative residual after each iteration, starting at 1
    converged: bool
    true_residual: float


@dataclass
class Solution:
    """Layer density with run statistics."""

    spec: ProblemSpec
    density: np.ndarray
    iterations: int
    residuals: list
    wall_time: float
    operator: DiscreteOperator = field(default=None, repr=False)

    @property
    def per_curve(self):
        d = self.spec.domain
        return [self.density[d.curve_slice(k)] for k in range(d.n_curves)]

    @property
    def relative_residual(self):
        return self.residuals[-1] if self.residuals else 0.0


def build_rhs(spec):
    """Right-hand side ``F = -2 alpha^2 f`` (Dirichlet) or ``2 alpha^2 g`` (Neumann)."""
    data = np.concatenate(spec.data)
    scale = -2.0 if spec.kind is KernelKind.DIRICHLET else 2.0
    return scale * spec.alpha**2 * data


def check_linearity(apply, n, rng=None, rtol=1e-8):
    """Probabilistic test ``A(u + 2v) == A u + 2 A v`` on random vectors."""
    rng = np.random.default_rng(rng if rng is not None else 0)
    u, v = rng.standard_normal(n), rng.standard_normal(n)
    lhs = apply(u + 2 * v)
    rhs = apply(u) + 2 * apply(v)
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
    return np.linalg.norm(lhs - rhs) <= rtol * scale


def _arnoldi_step(apply, V, H, k):
    """Extend the Krylov basis by one vector with MGS (plus one reorthogonalization)."""
    w = apply(V[k])
    before = np.linalg.norm(w)
    for i in range(k + 1):
        H[i, k] = V[i] @ w
        w = w - H[i, k] * V[i]
    if np.linalg.norm(w) < 0.7 * before:
        # cancellation: second pass restores orthogonality
        for i in range(k + 1):
            c = V[i] @ w
            H[i, k] += c
            w = w - c * V[i]
    H[k + 1, k] = np.linalg.norm(w)
    return w


def gmres(apply, rhs, tol=1e-11, max_iter=500, restart=None, x0=None, check_linear=False,
          raise_on_failure=True):
    """Solve ``A x = rhs`` by GMRES with Givens rotations.

    ``apply`` maps a vector to ``A`` times it. Without ``restart`` the Krylov
    space grows up to ``max_iter`` (full orthogonalization). Convergence means
    ``||rhs - A x|| <= tol ||rhs||`` for the true residual.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.size
    if max_iter < 1:
        raise ConfigurationError("max_iter must be >= 1")
    if check_linear and not check_linearity(apply, n):
        raise ConfigurationError("operator failed the linearity check")
    bnorm = np.linalg.norm(rhs)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return GMRESResult(np.zeros(n), 0, [0.0], True, 0.0)
    m = min(restart or max_iter, max_iter, n)
    history = []
    total = 0
    r = rhs - apply(x) if x0 is not None else rhs.copy()
    rel = np.linalg.norm(r) / bnorm
    history.append(rel)
    while rel > tol and total < max_iter:
        beta = np.linalg.norm(r)
        size = min(m, max_iter - total)
        V = np.zeros((size + 1, n))
        H = np.zeros((size + 1, size))
        cs, sn = np.zeros(size), np.zeros(size)
        g = np.zeros(size + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        breakdown = False
        for k in range(size):
            w = _arnoldi_step(apply, V, H, k)
            for i in range(k):
                a, b = H[i, k], H[i + 1, k]
                H[i, k] = cs[i] * a + sn[i] * b
                H[i + 1, k] = -sn[i] * a + cs[i] * b
            d = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = (1.0, 0.0) if d == 0 else (H[k, k] / d, H[k + 1, k] / d)
            hk1 = H[k + 1, k]
            H[k, k], H[k + 1, k] = d, 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k_used = k + 1
            total += 1
            history.append(abs(g[k + 1]) / bnorm)
            if hk1 <= 1e-14 * beta:
                breakdown = True
            if history[-1] <= tol or breakdown:
                break
            V[k + 1] = w / hk1
        y = _back_substitute(H[:k_used, :k_used], g[:k_used])
        x = x + V[:k_used].T @ y
        r = rhs - apply(x)
        rel = np.linalg.norm(r) / bnorm
        if rel > tol and history[-1] <= tol:
            # estimate hit tolerance but the true residual did not; keep iterating
            history[-1] = rel
        if breakdown and rel > tol:
            # invariant subspace without convergence: restarting cannot help
            break
    converged = rel <= tol
    if not converged and raise_on_failure:
        raise ConvergenceError(
            f"GMRES reached relative residual {rel:.3e} > {tol:.1e} after {total} iterations",
            residuals=history, iterations=total)
    return GMRESResult(x, total, history, converged, rel)


def _back_substitute(R, g):
    y = np.zeros(len(g))
    for i in range(len(g) - 1, -1, -1):
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def solve(spec, operator=None):
    """Solve the discrete second-kind system for the layer density."""
    t0 = time.perf_counter()
    op = operator if operator is not None else spec.operator()
    rhs = build_rhs(spec)
    res = gmres(op.apply, rhs, tol=spec.gmres_tol, max_iter=spec.max_iter,
                restart=spec.restart)
    return Solution(spec, res.x, res.iterations, res.residuals,
                    time.perf_counter() - t0, op)
