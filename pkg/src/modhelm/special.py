"""Modified Bessel functions I_l and K_l of integer order and real argument.

Orders 0 and 1 are seeded from the Cephes minimax approximations shipped
with scipy (``k0e``, ``k1e``, ``i0e``); higher orders are generated here:

* ``K_l`` by forward recurrence, which is stable for the decaying solution;
* ``I_l`` from the ratio ``I_{L+1}/I_L`` (continued fraction, modified Lentz)
  followed by backward ratio recurrence down to ``I_0``; for very large
  arguments the Hankel asymptotic series is used instead.

Every routine also has a scaled (``e^{x} K``, ``e^{-x} I``) and a log-domain
variant. The log-domain sequences never overflow and are what the multipole
translation operators are built from.
"""

import numpy as np
from scipy import special as _sp

from .errors import BesselOverflowError, ConfigurationError, DomainError

MAX_ORDER = 60

# Beyond this argument the asymptotic series is accurate to full precision
# for the orders used here; below it the continued fraction converges in
# O(x) iterations.
_ASYMPTOTIC_X = 1000.0
_CF_TINY = 1e-300


def _check_order(l):
    l = abs(int(l))
    if l > MAX_ORDER:
        raise ConfigurationError(f"Bessel order {l} exceeds the cap {MAX_ORDER}")
    return l


def _positive(x, allow_zero=False):
    x = np.asarray(x, dtype=float)
    bad = (x < 0) if allow_zero else (x <= 0)
    if np.any(bad) or np.any(np.isnan(x)):
        kind = "x >= 0" if allow_zero else "x > 0"
        raise DomainError(f"modified Bessel function requires {kind}")
    return x


def _ratio_cf1(nu, x, rtol=4e-16, maxiter=200000):
    """I_{nu+1}(x) / I_nu(x) for x > 0 by the modified Lentz algorithm."""
    f = np.full_like(x, _CF_TINY)
    c = f.copy()
    d = np.zeros_like(x)
    for k in range(1, maxiter):
        b = 2.0 * (nu + k) / x
        d = b + d
        c = b + 1.0 / c
        d = 1.0 / d
        delta = c * d
        f = f * delta
        if np.all(np.abs(delta - 1.0) < rtol):
            return f
    raise RuntimeError("continued fraction for I_{nu+1}/I_nu did not converge")


def _ive_asymptotic(nu, x):
    mu = 4.0 * nu * nu
    term = np.ones_like(x)
    total = term.copy()
    for k in range(1, 400):
        term = -term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        total += term
        if np.all(np.abs(term) < 1e-17 * np.abs(total)):
            break
    return total / np.sqrt(2.0 * np.pi * x)


def _asymptotic_threshold(nmax):
    return max(_ASYMPTOTIC_X, 0.5 * nmax * nmax)


def _log_ratio_seq_i(nmax, x):
    """log(I_{m+1}/I_m) for m = 0..nmax-1 (x > 0, below asymptotic range)."""
    r = np.empty((nmax + 1,) + x.shape)
    r[nmax] = _ratio_cf1(nmax, x)
    for m in range(nmax, 0, -1):
        r[m - 1] = 1.0 / (2.0 * m / x + r[m])
    return r[:nmax]


def ive_seq(nmax, x):
    """Return ``e^{-x} I_m(x)`` for ``m = 0..nmax`` stacked on a leading axis."""
    shape = np.shape(x)
    out = _ive_seq(nmax, np.atleast_1d(np.asarray(x, dtype=float)))
    return out.reshape((int(nmax) + 1,) + shape)


def _ive_seq(nmax, x):
    x = _positive(x, allow_zero=True)
    nmax = int(nmax)
    out = np.zeros((nmax + 1,) + x.shape)
    out[0] = _sp.i0e(x)
    pos = x > 0
    if nmax == 0 or not np.any(pos):
        return out
    big = x >= _asymptotic_threshold(nmax)
    mid = pos & ~big
    if np.any(mid):
        xm = x[mid]
        r = _log_ratio_seq_i(nmax, xm)
        vals = out[0][mid]
        for m in range(nmax):
            vals = vals * r[m]
            out[m + 1][mid] = vals
    if np.any(big):
        xb = x[big]
        for m in range(1, nmax + 1):
            out[m][big] = _ive_asymptotic(m, xb)
    return out


def kve_seq(nmax, x):
    """Return ``e^{x} K_m(x)`` for ``m = 0..nmax``; entries may overflow to inf."""
    shape = np.shape(x)
    out = _kve_seq(nmax, np.atleast_1d(np.asarray(x, dtype=float)))
    return out.reshape((int(nmax) + 1,) + shape)


def _kve_seq(nmax, x):
    x = _positive(x)
    nmax = int(nmax)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = _sp.k0e(x)
    if nmax >= 1:
        out[1] = _sp.k1e(x)
    with np.errstate(over="ignore", invalid="ignore"):
        for m in range(1, nmax):
            out[m + 1] = out[m - 1] + (2.0 * m / x) * out[m]
    return out


def log_kv_seq(nmax, x):
    """Natural log of ``K_m(x)`` for ``m = 0..nmax``; finite for every x > 0."""
    shape = np.shape(x)
    out = _log_kv_seq(nmax, np.atleast_1d(np.asarray(x, dtype=float)))
    return out.reshape((int(nmax) + 1,) + shape)


def _log_kv_seq(nmax, x):
    x = _positive(x)
    nmax = int(nmax)
    out = np.empty((nmax + 1,) + x.shape)
    k0 = _sp.k0e(x)
    out[0] = np.log(k0) - x
    if nmax == 0:
        return out
    rho = _sp.k1e(x) / k0
    out[1] = out[0] + np.log(rho)
    for m in range(1, nmax):
        rho = 1.0 / rho + 2.0 * m / x
        out[m + 1] = out[m] + np.log(rho)
    return out


def log_iv_seq(nmax, x):
    """Natural log of ``I_m(x)`` for ``m = 0..nmax``; ``-inf`` where I_m(0) = 0."""
    shape = np.shape(x)
    out = _log_iv_seq(nmax, np.atleast_1d(np.asarray(x, dtype=float)))
    return out.reshape((int(nmax) + 1,) + shape)


def _log_iv_seq(nmax, x):
    x = _positive(x, allow_zero=True)
    nmax = int(nmax)
    out = np.full((nmax + 1,) + x.shape, -np.inf)
    out[0] = np.log(_sp.i0e(x)) + x
    pos = x > 0
    if nmax == 0 or not np.any(pos):
        return out
    big = x >= _asymptotic_threshold(nmax)
    mid = pos & ~big
    if np.any(mid):
        xm = x[mid]
        lr = np.log(_log_ratio_seq_i(nmax, xm))
        acc = out[0][mid]
        for m in range(nmax):
            acc = acc + lr[m]
            out[m + 1][mid] = acc
    if np.any(big):
        xb = x[big]
        for m in range(1, nmax + 1):
            out[m][big] = np.log(_ive_asymptotic(m, xb)) + xb
    return out


def _scalar_or_array(value, x):
    return float(value) if np.ndim(x) == 0 else value


def bessel_k_scaled(l, x):
    """``e^{x} K_l(x)`` for ``x > 0``."""
    l = _check_order(l)
    xa = _positive(x)
    with np.errstate(over="ignore"):
        val = kve_seq(l, xa)[l]
    if np.any(np.isinf(val)):
        raise BesselOverflowError(f"e^x K_{l}(x) overflows for the smallest arguments given")
    return _scalar_or_array(val, x)


def bessel_i_scaled(l, x):
    """``e^{-x} I_l(x)`` for ``x >= 0``."""
    l = _check_order(l)
    xa = _positive(x, allow_zero=True)
    return _scalar_or_array(ive_seq(l, xa)[l], x)


def bessel_k(l, x):
    """Modified Bessel function of the second kind, ``K_l(x)``, for ``x > 0``.

    Negative orders map to positive ones. Raises :class:`BesselOverflowError`
    if the value exceeds the double range; large arguments underflow toward
    zero (use :func:`bessel_k_scaled` there).
    """
    l = _check_order(l)
    xa = _positive(x)
    with np.errstate(over="ignore", under="ignore"):
        scaled = kve_seq(l, xa)[l]
        val = scaled * np.exp(-xa)
    if np.any(np.isinf(val)):
        raise BesselOverflowError(f"K_{l}(x) is not representable; use bessel_k_scaled")
    return _scalar_or_array(val, x)


def bessel_i(l, x):
    """Modified Bessel function of the first kind, ``I_l(x)``, for ``x >= 0``."""
    l = _check_order(l)
    xa = _positive(x, allow_zero=True)
    scaled = ive_seq(l, xa)[l]
    with np.errstate(over="ignore"):
        val = scaled * np.exp(xa)
    if np.any(np.isinf(val)):
        raise BesselOverflowError(f"I_{l}(x) overflows; use bessel_i_scaled")
    return _scalar_or_array(val, x)


def bessel_k01(x):
    """Return ``(K_0(x), K_1(x))`` in one pass."""
    xa = _positive(x)
    with np.errstate(under="ignore"):
        e = np.exp(-xa)
        k0 = _sp.k0e(xa) * e
        k1 = _sp.k1e(xa) * e
    if np.ndim(x) == 0:
        return float(k0), float(k1)
    return k0, k1
