"""Multipole and local expansions of the Yukawa kernel ``K_0(|x - y|)``.

All routines work in coordinates scaled by ``1/alpha``. With
``R_m(z) = I_m(|z|) e^{i m arg z}`` and ``S_m(z) = K_m(|z|) e^{i m arg z}``:

* multipole about s:  ``Phi(x) = sum_l M_l S_l(x - s)``,
  ``M_l = sum_i q_i R_{-l}(x_i - s)``;
* local about c:      ``Phi(x) = sum_l L_l R_l(x - c)``;
* M2L:  ``L_l = (-1)^l sum_n M_n K_{l-n}(rho_0) e^{-i(l-n) theta_0}`` where
  ``(rho_0, theta_0)`` are polar coordinates of ``c - s``;
* M2M / L2L are Graf shifts with ``I_{l-n}``.

The field is real, so ``c_{-l} = conj(c_l)`` and only ``l = 0..p`` is kept.
Batched code stores coefficients as real vectors
``[Re c_0 .. Re c_p, Im c_1 .. Im c_p]`` (length ``2p+1``), and every
translation becomes a real matrix. Coefficients of a box of width ``b``
(scaled) are stored as ``M_l e^{-E} S^{-l}`` and ``L_l e^{E} S^{l}`` with
``E = b/sqrt(2)`` and ``S = min(1, b)``, which keeps them in double range
for any box-size to alpha ratio.
"""

import numpy as np

from ..special import log_iv_seq, log_kv_seq


def box_scaling(width):
    """``(E, log S)`` for a box of scaled width ``width``."""
    width = float(width)
    return width / np.sqrt(2.0), min(0.0, np.log(width))


def n_real(p):
    return 2 * p + 1


def to_real(c):
    """Complex coefficients (p+1, ...) -> real layout (2p+1, ...)."""
    c = np.asarray(c)
    return np.concatenate([c.real, c.imag[1:]], axis=0)


def to_complex(v):
    """Real layout (2p+1, ...) -> complex coefficients (p+1, ...)."""
    v = np.asarray(v)
    p = (v.shape[0] - 1) // 2
    out = v[:p + 1].astype(complex)
    out[1:] += 1j * v[p + 1:]
    return out


def _realify(A, B):
    """Real matrix of the map ``c -> A c + B conj(c)`` (B column k acts on c_k, k >= 1)."""
    p = A.shape[0] - 1
    Bp = np.zeros_like(A)
    Bp[:, 1:] = B
    top = np.hstack([A.real + Bp.real, (-A.imag + Bp.imag)[:, 1:]])
    bot = np.hstack([A.imag + Bp.imag, (A.real - Bp.real)[:, 1:]])[1:]
    return np.vstack([top, bot])


def _translation(log_bessel, theta, p, row_log, col_log, alternating=False):
    """``T[r, c] = (-1)^{r} exp(LB[|r-c|] + row_log[r] + col_log[|c|]) e^{-i(r-c)theta}``
    for r in 0..p, c in -p..p, returned as a real (2p+1)^2 matrix."""
    r = np.arange(p + 1)[:, None]
    c = np.arange(-p, p + 1)[None, :]
    with np.errstate(under="ignore"):
        mag = np.exp(log_bessel[np.abs(r - c)] + row_log[r] + col_log[np.abs(c)])
    T = mag * np.exp(-1j * (r - c) * theta)
    if alternating:
        T = T * (-1.0) ** r
    A = T[:, p:]
    B = T[:, :p][:, ::-1]
    return _realify(A, B)


def _polar(v):
    v = np.asarray(v, dtype=float)
    return float(np.hypot(v[0], v[1])), float(np.arctan2(v[1], v[0]))


def m2m_matrix(shift, p, child_scale=(0.0, 0.0), parent_scale=(0.0, 0.0)):
    """Real M2M matrix for ``shift = child center - parent center`` (scaled)."""
    rho, th = _polar(shift)
    lb = log_iv_seq(2 * p, rho)
    l = np.arange(p + 1)
    row = -parent_scale[0] - l * parent_scale[1]
    col = child_scale[0] + l * child_scale[1]
    return _translation(lb, th, p, row, col)


def l2l_matrix(shift, p, parent_scale=(0.0, 0.0), child_scale=(0.0, 0.0)):
    """Real L2L matrix for ``shift = child center - parent center`` (scaled)."""
    rho, th = _polar(shift)
    lb = log_iv_seq(2 * p, rho)
    l = np.arange(p + 1)
    row = child_scale[0] + l * child_scale[1]
    col = -parent_scale[0] - l * parent_scale[1]
    # L^c_m = sum_l L_l I_{l-m}(|d|) e^{i(l-m) theta_d}
    return _translation(lb, th, p, row, col)


def m2l_matrix(shift, p, source_scale=(0.0, 0.0), target_scale=(0.0, 0.0)):
    """Real M2L matrix for ``shift = target center - source center`` (scaled)."""
    rho, th = _polar(shift)
    if rho == 0.0:
        raise ValueError("M2L needs separated boxes")
    lb = log_kv_seq(2 * p, rho)
    l = np.arange(p + 1)
    row = target_scale[0] + l * target_scale[1]
    col = source_scale[0] + l * source_scale[1]
    return _translation(lb, th, p, row, col, alternating=True)


# --- per-point rows -------------------------------------------------------

def _rel(points, center):
    d = np.atleast_2d(points) - np.asarray(center, dtype=float)
    return np.hypot(d[:, 0], d[:, 1]), np.arctan2(d[:, 1], d[:, 0])


def _scaled(log_seq, lo, hi, shift, log_s):
    """exp(log_seq[m] + shift + m*log_s) for m in lo..hi, shape (npts, hi-lo+1)."""
    m = np.arange(lo, hi + 1)
    with np.errstate(under="ignore", over="ignore"):
        return np.exp(log_seq[np.abs(m)].T + shift + m * log_s)


def p2m_rows(rel_points, p, scale=(0.0, 0.0), directions=None):
    """Complex (npts, p+1) contribution of each unit source to ``M_l``.

    Monopoles by default; with ``directions`` (npts, 2) the sources are unit
    dipoles ``d . grad_source`` of the monopole kernel.
    """
    r, th = _rel(rel_points, (0.0, 0.0))
    E, ls = scale
    if directions is None:
        li = log_iv_seq(p, r)
        mag = _scaled(li, 0, p, -E, -ls)
        return mag * np.exp(-1j * np.arange(p + 1) * th[:, None])
    li = log_iv_seq(p + 1, r)
    d = directions[:, 0] + 1j * directions[:, 1]
    l = np.arange(p + 1)
    # (d . grad) R_{-l} = (conj(d) R_{1-l} + d R_{-l-1}) / 2
    with np.errstate(under="ignore", over="ignore"):
        lo = np.exp(li[np.abs(l - 1)].T - E - l * ls) * np.exp(-1j * (l - 1) * th[:, None])
        hi = np.exp(li[l + 1].T - E - l * ls) * np.exp(-1j * (l + 1) * th[:, None])
    return 0.5 * (np.conj(d)[:, None] * lo + d[:, None] * hi)


def p2l_rows(rel_points, p, scale=(0.0, 0.0), directions=None):
    """Complex (npts, p+1) contribution of each unit source to ``L_l``
    (source position relative to the expansion center)."""
    r, th = _rel(rel_points, (0.0, 0.0))
    E, ls = scale
    l = np.arange(p + 1)
    if directions is None:
        lk = log_kv_seq(p, r)
        return _scaled(lk, 0, p, E, ls) * np.exp(-1j * l * th[:, None])
    lk = log_kv_seq(p + 1, r)
    d = directions[:, 0] + 1j * directions[:, 1]
    with np.errstate(under="ignore", over="ignore"):
        lo = np.exp(lk[np.abs(l - 1)].T + E + l * ls) * np.exp(-1j * (l - 1) * th[:, None])
        hi = np.exp(lk[l + 1].T + E + l * ls) * np.exp(-1j * (l + 1) * th[:, None])
    # (d . grad) S_{-l} = -(conj(d) S_{1-l} + d S_{-l-1}) / 2
    return -0.5 * (np.conj(d)[:, None] * lo + d[:, None] * hi)


def _weights(p):
    w = np.full(p + 1, 2.0)
    w[0] = 1.0
    return w


def _potential_rows(basis, p):
    """Real rows mapping real-layout coefficients to ``sum_l c_l b_l``."""
    w = _weights(p)
    return np.hstack([w * basis.real, -(w * basis.imag)[:, 1:]])


def _gradient_rows(a, b):
    """Rows for ``G = sum_l c_l a_l + sum_{l>=1} conj(c_l) b_l``; returns (Gx, Gy)."""
    s = a + b
    t = a - b
    gx = np.hstack([s.real, -t.imag[:, 1:]])
    gy = np.hstack([s.imag, t.real[:, 1:]])
    return gx, gy


def l2p_rows(rel_points, p, scale=(0.0, 0.0), gradient=False):
    """Real rows evaluating a local expansion (and its scaled-coordinate gradient)."""
    r, th = _rel(rel_points, (0.0, 0.0))
    E, ls = scale
    li = log_iv_seq(p + 1, r)
    l = np.arange(p + 1)
    e = np.exp(1j * l * th[:, None])
    basis = _scaled(li, 0, p, -E, -ls) * e
    pot = _potential_rows(basis, p)
    if not gradient:
        return pot
    with np.errstate(under="ignore", over="ignore"):
        a = np.exp(li[l + 1].T - E - l * ls) * np.exp(1j * (l + 1) * th[:, None])
        b = np.exp(li[np.abs(l - 1)].T - E - l * ls) * np.exp(-1j * (l - 1) * th[:, None])
    b[:, 0] = 0.0
    return (pot,) + _gradient_rows(a, b)


def m2p_rows(rel_points, p, scale=(0.0, 0.0), gradient=False):
    """Real rows evaluating a multipole expansion (and its scaled gradient)."""
    r, th = _rel(rel_points, (0.0, 0.0))
    E, ls = scale
    lk = log_kv_seq(p + 1, r)
    l = np.arange(p + 1)
    basis = _scaled(lk, 0, p, E, ls) * np.exp(1j * l * th[:, None])
    pot = _potential_rows(basis, p)
    if not gradient:
        return pot
    with np.errstate(under="ignore", over="ignore"):
        a = -np.exp(lk[l + 1].T + E + l * ls) * np.exp(1j * (l + 1) * th[:, None])
        b = -np.exp(lk[np.abs(l - 1)].T + E + l * ls) * np.exp(-1j * (l - 1) * th[:, None])
    b[:, 0] = 0.0
    return (pot,) + _gradient_rows(a, b)


# --- single-box API (physical coordinates, unscaled coefficients) ---------

def _scaled_coords(points, center, alpha):
    return (np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(center, dtype=float)) / alpha


def p2m(positions, center, alpha, p, charges=None, dipoles=None, directions=None):
    """Multipole coefficients ``M_0..M_p`` (complex) of monopoles and/or dipoles.

    Dipole strengths are with respect to the physical source position, i.e.
    a unit dipole along ``d`` generates ``d . grad_y K_0(|x - y|/alpha)``.
    """
    rel = _scaled_coords(positions, center, alpha)
    out = np.zeros(p + 1, dtype=complex)
    if charges is not None:
        out += np.asarray(charges, dtype=float) @ p2m_rows(rel, p)
    if dipoles is not None:
        dirs = np.atleast_2d(np.asarray(directions, dtype=float))
        out += (np.asarray(dipoles, dtype=float) / alpha) @ p2m_rows(rel, p, directions=dirs)
    return out


def p2l(positions, center, alpha, p, charges=None, dipoles=None, directions=None):
    """Local coefficients ``L_0..L_p`` about ``center`` of distant sources."""
    rel = _scaled_coords(positions, center, alpha)
    out = np.zeros(p + 1, dtype=complex)
    if charges is not None:
        out += np.asarray(charges, dtype=float) @ p2l_rows(rel, p)
    if dipoles is not None:
        dirs = np.atleast_2d(np.asarray(directions, dtype=float))
        out += (np.asarray(dipoles, dtype=float) / alpha) @ p2l_rows(rel, p, directions=dirs)
    return out


def m2m(coefficients, child_center, parent_center, alpha):
    p = len(coefficients) - 1
    shift = (np.asarray(child_center, float) - np.asarray(parent_center, float)) / alpha
    return to_complex(m2m_matrix(shift, p) @ to_real(coefficients))


def l2l(coefficients, parent_center, child_center, alpha):
    p = len(coefficients) - 1
    shift = (np.asarray(child_center, float) - np.asarray(parent_center, float)) / alpha
    return to_complex(l2l_matrix(shift, p) @ to_real(coefficients))


def m2l(coefficients, source_center, target_center, alpha, half_width=None):
    """Local coefficients about ``target_center`` from a multipole expansion.

    With ``half_width`` given, both boxes are taken to have that half-width
    and adjacent (neighbour) boxes are rejected.
    """
    p = len(coefficients) - 1
    sep = np.asarray(target_center, float) - np.asarray(source_center, float)
    if half_width is not None and np.max(np.abs(sep)) < 4 * half_width * (1 - 1e-12):
        raise ValueError("m2l called on neighbouring boxes")
    return to_complex(m2l_matrix(sep / alpha, p) @ to_real(coefficients))


def _evaluate(rows_fn, coefficients, center, targets, alpha):
    p = len(coefficients) - 1
    rel = _scaled_coords(targets, center, alpha)
    pot, gx, gy = rows_fn(rel, p, gradient=True)
    c = to_real(coefficients)
    grad = np.column_stack([gx @ c, gy @ c]) / alpha
    return pot @ c, grad


def l2p(coefficients, center, targets, alpha):
    """Potential and physical gradient of a local expansion at ``targets``."""
    return _evaluate(l2p_rows, coefficients, center, targets, alpha)


def m2p(coefficients, center, targets, alpha):
    """Potential and physical gradient of a multipole expansion at ``targets``."""
    return _evaluate(m2p_rows, coefficients, center, targets, alpha)
