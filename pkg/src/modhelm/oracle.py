"""Independent reference implementations used by the tests.

Nothing here shares code paths with the production modules beyond the
quadrature tables: Bessel functions are summed from their power series in
mpmath with the working precision raised to absorb the cancellation in K
at large arguments, kernels are evaluated from these (or from scipy's
AMOS-based ``kv``, a different code path from the Cephes ``k1e`` seed
used by the library), and sums run in plain loops.
"""

from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special as _sp

from .geometry import fourier_interpolate
from .quadrature import ALPERT_TABLES

DEFAULT_DPS = 50


def _dps_for(x, dps):
    # K_n(x) ~ e^{-x} is obtained from terms of size ~e^{x}: 2x/ln(10) digits lost
    return int(dps + 0.8686 * float(x) + 10)


def _i_series(n, x):
    q = (x / 2) ** 2
    term = (x / 2) ** n / mpmath.factorial(n)
    total = term
    k = 0
    while True:
        k += 1
        term = term * q / (k * (k + n))
        total += term
        if abs(term) < abs(total) * mpmath.eps:
            return total


def _k_series(n, x):
    """K_n(x) from the ascending series (n = 0 or 1)."""
    half = x / 2
    q = half**2
    finite = mpmath.mpf(0)
    for k in range(n):
        finite += mpmath.factorial(n - k - 1) / mpmath.factorial(k) * (-q) ** k
    finite *= half ** (-n) / 2
    log_part = (-1) ** (n + 1) * mpmath.log(half) * _i_series(n, x)
    k = 0
    term = half**n / mpmath.factorial(n)
    psi = mpmath.digamma(1) + mpmath.digamma(n + 1)
    total = term * psi
    while True:
        k += 1
        term = term * q / (k * (k + n))
        psi += mpmath.mpf(1) / k + mpmath.mpf(1) / (k + n)
        inc = term * psi
        total += inc
        if abs(inc) < abs(total) * mpmath.eps and k > q:
            break
    return finite + log_part + (-1) ** n * total / 2


def mp_bessel_k_seq(nmax, x, dps=DEFAULT_DPS):
    """[K_0(x), ..., K_nmax(x)] as mpf, by series for orders 0, 1 and upward recurrence."""
    with mpmath.workdps(_dps_for(x, dps)):
        x = mpmath.mpf(x)
        k0 = _k_series(0, x)
        out = [k0]
        if nmax >= 1:
            out.append(_k_series(1, x))
        for m in range(1, nmax):
            out.append(out[m - 1] + 2 * m / x * out[m])
        return [+v for v in out]


def mp_bessel_i_seq(nmax, x, dps=DEFAULT_DPS):
    """[I_0(x), ..., I_nmax(x)] as mpf, by series at the top two orders and
    downward recurrence."""
    x = mpmath.mpf(x)
    if x == 0:
        return [mpmath.mpf(1)] + [mpmath.mpf(0)] * nmax
    with mpmath.workdps(dps + 20):
        top = _i_series(nmax + 1, x)
        cur = _i_series(nmax, x)
        out = [cur]
        nxt = top
        for m in range(nmax, 0, -1):
            prev = nxt + 2 * m / x * cur
            out.append(prev)
            nxt, cur = cur, prev
        return [+v for v in out[::-1]]


def mp_bessel_k(n, x, dps=DEFAULT_DPS):
    return mp_bessel_k_seq(abs(int(n)), x, dps)[-1]


def mp_bessel_i(n, x, dps=DEFAULT_DPS):
    return mp_bessel_i_seq(abs(int(n)), x, dps)[-1]


def derived_constants():
    """Values quoted as derived constants, regenerated at 50 digits."""
    with mpmath.workdps(DEFAULT_DPS):
        k0_1 = mp_bessel_k(0, 1)
        return {
            "K0(1)": k0_1,
            "K1(1)": mp_bessel_k(1, 1),
            "I1(2)": mp_bessel_i(1, 2),
            "K0(1)*I0(1)": k0_1 * mp_bessel_i(0, 1),
            "1/I0(2)": 1 / mp_bessel_i(0, 2),
        }


@dataclass(frozen=True)
class DiskSolution:
    """Radial solution of ``u - alpha^2 lap u = 0`` on a disk or its exterior.

    Normals point out of the domain: outward radially for the interior
    problem, toward the center for the exterior one.
    """

    radius: float
    alpha: float
    kind: str = "dirichlet"
    value: float = 1.0
    exterior: bool = False

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.vectorize(self._eval, otypes=[float])(r)
        return float(out) if out.ndim == 0 else out

    def _eval(self, r):
        a, R, c = self.alpha, self.radius, self.value
        with mpmath.workdps(30):
            if not self.exterior:
                i0r = mp_bessel_i(0, r / a, 30)
                if self.kind == "dirichlet":
                    return float(c * i0r / mp_bessel_i(0, R / a, 30))
                return float(c * a * i0r / mp_bessel_i(1, R / a, 30))
            k0r = mp_bessel_k(0, r / a, 30)
            if self.kind == "dirichlet":
                return float(c * k0r / mp_bessel_k(0, R / a, 30))
            # du/dn = -u'(R) = g  =>  u = g alpha K0(r/alpha) / K1(R/alpha)
            return float(c * a * k0r / mp_bessel_k(1, R / a, 30))


def _kernel_plain(kind, d, ny, nx, alpha):
    r = np.hypot(d[..., 0], d[..., 1])
    n = ny if kind == "dirichlet" else nx
    return _sp.kv(1, r / alpha) * (d[..., 0] * n[..., 0] + d[..., 1] * n[..., 1]) / (alpha * r)


def _chords(coef, tj, t):
    """``z(t) - z(tj)`` from the Fourier series without cancellation.

    ``e^{ik t} - e^{ik tj} = 2i sin(k delta/2) e^{ik (t + tj)/2}`` with
    ``delta = t - tj``, so the difference keeps full relative accuracy as
    ``t -> tj``. The Nyquist mode is the split cosine.
    """
    n = len(coef)
    k = np.fft.fftfreq(n, 1.0 / n)
    delta = t - tj
    mid = 0.5 * (t + tj)
    terms = 2j * np.sin(0.5 * np.outer(delta, k)) * np.exp(1j * np.outer(mid, k))
    nyq = n // 2
    terms[:, nyq] = -2 * np.sin(0.5 * nyq * (t + tj)) * np.sin(0.5 * nyq * delta)
    dz = terms @ coef
    return np.column_stack([dz.real, dz.imag])


def oversampled_operator(curve, kind, alpha, sigma, factor=8, sign=1.0):
    """``sigma(x_j) + (1/pi) int K(y, x_j) sigma(y) ds_y`` on a single curve.

    ``sigma`` holds samples at the curve nodes; the integral uses the order-16
    rule on a grid ``factor`` times finer with the band-limited interpolant
    of ``sigma`` and of the curve. ``sign`` orients the normals (+1: the
    curve's right-hand normal, -1: reversed).
    """
    if factor < 8:
        raise ValueError("oversample factor must be >= 8")
    kind = str(getattr(kind, "value", kind))
    n = curve.n
    m = n * factor
    h = 2 * np.pi / m
    a, pairs = ALPERT_TABLES[16]
    v = np.array([float(p[0]) for p in pairs])
    u = np.array([float(p[1]) for p in pairs])
    sigma = np.asarray(sigma, dtype=float)
    coef = np.fft.fft(curve.z) / n
    out = np.empty(n)
    idx = np.arange(a, m - a + 1)
    for j in range(n):
        tj = 2 * np.pi * j / n
        _, dx = curve.at(np.array([tj]))
        nx = sign * np.array([dx[0, 1], -dx[0, 0]]) / np.hypot(*dx[0])
        t = np.concatenate([tj + h * idx, tj + h * v, tj - h * v])
        w = np.concatenate([np.full(len(idx), h), h * u, h * u])
        _, dy = curve.at(t)
        speed = np.hypot(dy[:, 0], dy[:, 1])
        ny = sign * np.column_stack([dy[:, 1], -dy[:, 0]]) / speed[:, None]
        d = _chords(coef, tj, t)
        k = _kernel_plain(kind, d, ny, np.broadcast_to(nx, ny.shape), alpha)
        s = fourier_interpolate(sigma, t)
        out[j] = sigma[j] + np.sum(w * k * speed * s) / np.pi
    return out


def direct_sum_mp(sources, targets, alpha, charges=None, dipoles=None, directions=None,
                  dps=30):
    """Potential sum at ``targets`` in extended precision (skips coincident pairs)."""
    out = []
    charges = None if charges is None else np.asarray(charges, dtype=float)
    dipoles = None if dipoles is None else np.asarray(dipoles, dtype=float)
    directions = None if directions is None else np.asarray(directions, dtype=float)
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    with mpmath.workdps(dps):
        al = mpmath.mpf(alpha)
        for x in np.atleast_2d(np.asarray(targets, dtype=float)):
            acc = mpmath.mpf(0)
            for i, y in enumerate(sources):
                ex = mpmath.mpf(x[0]) - mpmath.mpf(y[0])
                ey = mpmath.mpf(x[1]) - mpmath.mpf(y[1])
                r = mpmath.sqrt(ex * ex + ey * ey)
                if r == 0:
                    continue
                k0, k1 = mp_bessel_k_seq(1, r / al, dps)
                if charges is not None:
                    acc += mpmath.mpf(charges[i]) * k0
                if dipoles is not None:
                    d = directions[i]
                    dot = mpmath.mpf(d[0]) * ex + mpmath.mpf(d[1]) * ey
                    acc += mpmath.mpf(dipoles[i]) / al * k1 * dot / r
            out.append(float(acc))
    return np.array(out)
