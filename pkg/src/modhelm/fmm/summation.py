"""Adaptive fast multipole evaluation of Yukawa sums.

For sources ``y_i`` with charges ``q_i`` and dipoles ``mu_i`` along unit
directions ``d_i``, and targets ``x_j``:

    Phi(x_j) = sum_{i != j} q_i K_0(|x_j - y_i|/alpha)
             + mu_i d_i . grad_{y_i} K_0(|x_j - y_i|/alpha)

and optionally ``grad_x Phi``. A target that *is* a source (same identity,
not the same coordinates) skips that source.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import special as _sp

from ..errors import ConfigurationError, DomainError
from . import expansions as ex
from .tree import build_lists, build_tree

DEFAULT_S_MAX = 40
_NEAR_BATCH = 1 << 20

# Smallest expansion order meeting each tolerance, produced by
# ``calibrate_truncation()`` (two-box worst case over box widths 1e-4..1e2 alpha).
TRUNCATION_TABLE = (
    (1e-3, 12), (1e-4, 14), (1e-5, 16), (1e-6, 20), (1e-7, 24), (1e-8, 26),
    (1e-9, 30), (1e-10, 32), (1e-11, 36), (1e-12, 38), (1e-13, 42), (1e-14, 44),
)


def _corner_points(half, shrink=0.999):
    return half * shrink * np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


def _pair_fields(tgt, src, dirs):
    """Exact monopole potential, dipole potential and monopole gradient (scaled units)."""
    e = tgt[:, None, :] - src[None, :, :]
    r = np.hypot(e[..., 0], e[..., 1])
    k0, k1 = _sp.k0(r), _sp.k1(r)
    de = dirs[None, :, 0] * e[..., 0] + dirs[None, :, 1] * e[..., 1]
    gx, gy = -k1 * e[..., 0] / r, -k1 * e[..., 1] / r
    return k0, k1 * de / r, gx, gy


def _calibration_error(width, p):
    """Worst normalized truncation error of the far-field paths for one box width.

    Sources and targets sit in box corners. Errors are measured against the
    larger of the strongest interaction in the configuration and the field of
    a unit source one screening length away.
    """
    sc = ex.box_scaling(width)
    h = width / 2
    corners = _corner_points(h)
    dirs = np.tile([np.cos(0.3), np.sin(0.3)], (4, 1))
    worst = 0.0

    def measure(approx, exact, floor):
        return float(np.max(np.abs(approx - exact)) / max(np.max(np.abs(exact)), floor))

    def compare(rows, coef, tgt, src, shift):
        nonlocal worst
        k0, kd, gx, gy = _pair_fields(tgt + shift, src, dirs)
        pot, rx, ry = rows
        mono, dip = coef
        worst = max(worst, measure(pot @ mono, k0, _sp.k0(1.0)),
                    measure(pot @ dip, kd, _sp.k1(1.0)),
                    measure(rx @ mono, gx, _sp.k1(1.0)), measure(ry @ mono, gy, _sp.k1(1.0)))

    def mp(src):
        return (ex.to_real(ex.p2m_rows(src, p, sc).T),
                ex.to_real(ex.p2m_rows(src, p, sc, directions=dirs[:len(src)]).T))

    # M2L between same-level boxes at the closest V-list offsets
    for off in ((2, 0), (2, 1), (2, 2)):
        shift = np.array(off, dtype=float) * width
        mono, dip = mp(corners)
        op = ex.m2l_matrix(shift, p, sc, sc)
        compare(ex.l2p_rows(corners, p, sc, gradient=True), (op @ mono, op @ dip),
                corners, corners, shift)
    # multipole evaluated at targets one box width away (W list)
    ys = np.linspace(-1.5 * width, 1.5 * width, 7)
    tgt = np.column_stack([np.full(7, 1.5 * width), ys])
    compare(ex.m2p_rows(tgt, p, sc, gradient=True), mp(corners), tgt, corners, 0.0)
    # sources one box width away feeding a local expansion (X list)
    src = tgt
    dirs7 = np.tile(dirs[0], (len(src), 1))
    lmono = ex.to_real(ex.p2l_rows(src, p, sc).T)
    ldip = ex.to_real(ex.p2l_rows(src, p, sc, directions=dirs7).T)
    k0, kd, gx, gy = _pair_fields(corners, src, dirs7)
    pot, rx, ry = ex.l2p_rows(corners, p, sc, gradient=True)
    worst = max(worst, measure(pot @ lmono, k0, _sp.k0(1.0)),
                measure(pot @ ldip, kd, _sp.k1(1.0)),
                measure(rx @ lmono, gx, _sp.k1(1.0)), measure(ry @ lmono, gy, _sp.k1(1.0)))
    return worst


def calibrate_truncation(tolerances=None, widths=None, orders=None):
    """Build the tolerance -> expansion order table from the two-box worst case.

    Returns ``((tol, p), ...)`` with ``p`` the smallest order whose error is
    below ``tol`` for every width in ``widths`` (scaled by ``alpha``).
    """
    tolerances = [10.0**-k for k in range(3, 15)] if tolerances is None else tolerances
    widths = np.logspace(-4, 2, 13) if widths is None else widths
    orders = range(4, 61, 2) if orders is None else orders
    errors = {p: max(_calibration_error(w, p) for w in widths) for p in orders}
    table = []
    for tol in tolerances:
        ok = [p for p in orders if errors[p] <= tol]
        if not ok:
            raise ConfigurationError(f"no order up to {max(orders)} reaches {tol:g}")
        table.append((tol, min(ok)))
    return tuple(table)


def truncation_order(tolerance):
    """Smallest calibrated expansion order reaching ``tolerance``."""
    if not (1e-14 <= tolerance <= 1e-3):
        raise ConfigurationError("FMM tolerance must lie in [1e-14, 1e-3]")
    for tol, p in TRUNCATION_TABLE:
        if tolerance >= tol * (1 - 1e-12):
            return p
    return TRUNCATION_TABLE[-1][1]


@dataclass
class ParticleSystem:
    """Sources (charges and/or dipoles) and targets for a Yukawa sum.

    ``targets=None`` means the targets are the sources themselves, each
    skipping its own contribution. ``exclude[j]`` optionally names the source
    index identical to target ``j`` (-1 for none).
    """

    sources: np.ndarray
    alpha: float
    charges: np.ndarray = None
    dipoles: np.ndarray = None
    directions: np.ndarray = None
    targets: np.ndarray = None
    exclude: np.ndarray = None
    potential: bool = True
    gradient: bool = False

    def __post_init__(self):
        self.sources = np.atleast_2d(np.asarray(self.sources, dtype=float))
        ns = len(self.sources)
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ConfigurationError("alpha must be positive")
        if self.targets is None:
            self.targets = self.sources
            if self.exclude is None:
                self.exclude = np.arange(ns)
        else:
            self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        nt = len(self.targets)
        if self.exclude is None:
            self.exclude = np.full(nt, -1)
        self.exclude = np.asarray(self.exclude, dtype=int)
        if self.exclude.shape != (nt,):
            raise ConfigurationError("exclude must have one entry per target")
        for name in ("charges", "dipoles"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (ns,):
                    raise ConfigurationError(f"{name} must have one entry per source")
                setattr(self, name, v)
        if self.dipoles is not None:
            if self.directions is None:
                raise ConfigurationError("dipoles need directions")
            self.directions = np.atleast_2d(np.asarray(self.directions, dtype=float))
            if self.directions.shape != (ns, 2):
                raise ConfigurationError("directions must have shape (n_sources, 2)")
        for arr in (self.sources, self.targets):
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("positions must be finite")

    @property
    def n_sources(self):
        return len(self.sources)

    @property
    def n_targets(self):
        return len(self.targets)


@dataclass
class FieldResult:
    potential: np.ndarray = None
    gradient: np.ndarray = None


# --- direct interactions ----------------------------------------------------

def _pair_terms(e, r, alpha, q, mu, d, want_pot, want_grad):
    """Per-pair potential and gradient for scaled separations ``e`` (target - source)."""
    if np.any(r == 0):
        raise DomainError("a target coincides with a source it is not excluded from")
    with np.errstate(under="ignore"):
        ex_ = np.exp(-r)
        k0 = _sp.k0e(r) * ex_
        k1 = _sp.k1e(r) * ex_
    pot = grad = None
    if want_pot:
        pot = np.zeros_like(r)
        if q is not None:
            pot += q * k0
        if mu is not None:
            de = d[:, 0] * e[:, 0] + d[:, 1] * e[:, 1]
            pot += (mu / alpha) * k1 * de / r
    if want_grad:
        grad = np.zeros_like(e)
        if q is not None:
            grad -= (q * k1 / r)[:, None] * e
        if mu is not None:
            de = d[:, 0] * e[:, 0] + d[:, 1] * e[:, 1]
            m = mu / alpha
            grad += (m * k1 / r)[:, None] * d
            grad -= (m * de * (k0 * r + 2 * k1) / r**3)[:, None] * e
        grad /= alpha
    return pot, grad


def direct_evaluate(system, chunk=2048):
    """O(N M) reference sum; the oracle for every FMM test."""
    s = system
    nt = s.n_targets
    pot = np.zeros(nt) if s.potential else None
    grad = np.zeros((nt, 2)) if s.gradient else None
    ns = s.n_sources
    for a in range(0, nt, chunk):
        b = min(nt, a + chunk)
        ti = np.repeat(np.arange(a, b), ns)
        si = np.tile(np.arange(ns), b - a)
        keep = s.exclude[ti] != si
        ti, si = ti[keep], si[keep]
        e = (s.targets[ti] - s.sources[si]) / s.alpha
        r = np.hypot(e[:, 0], e[:, 1])
        p_, g_ = _pair_terms(e, r, s.alpha,
                             None if s.charges is None else s.charges[si],
                             None if s.dipoles is None else s.dipoles[si],
                             None if s.directions is None else s.directions[si],
                             s.potential, s.gradient)
        if s.potential:
            pot[a:b] = np.bincount(ti - a, p_, minlength=b - a)
        if s.gradient:
            grad[a:b, 0] = np.bincount(ti - a, g_[:, 0], minlength=b - a)
            grad[a:b, 1] = np.bincount(ti - a, g_[:, 1], minlength=b - a)
    return FieldResult(pot, grad)


# --- the plan ---------------------------------------------------------------

def _ranges_by_leaf(tree, leaf_key):
    """Stable order of points by leaf and per-box [start, stop) into that order."""
    order = np.argsort(leaf_key, kind="stable")
    keys = leaf_key[order]
    lo = np.searchsorted(keys, tree.start, side="left")
    hi = np.searchsorted(keys, tree.stop, side="left")
    return order, lo, hi


def _concat_ranges(starts, stops):
    """Concatenation of ``arange(a, b)`` for each pair, plus the owning pair index."""
    sizes = stops - starts
    total = int(sizes.sum())
    owner = np.repeat(np.arange(len(sizes)), sizes)
    offs = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    idx = starts[owner] + (np.arange(total) - offs[owner])
    return idx, owner


class FMMPlan:
    """Tree, interaction lists and translation operators for a fixed
    source/target geometry; :meth:`apply` evaluates for any strengths.

    With ``cache=True`` the per-point expansion rows and the near-field
    interactions are stored as matrices, so repeated applications (Krylov
    iterations) cost only sparse/dense products.
    """

    def __init__(self, sources, alpha, targets=None, directions=None, exclude=None,
                 tolerance=1e-11, order=None, s_max=DEFAULT_S_MAX, threads=1, cache=False):
        self.system = ParticleSystem(sources=sources, alpha=alpha, targets=targets,
                                     exclude=exclude, directions=directions,
                                     dipoles=None if directions is None else np.zeros(len(sources)))
        self.alpha = float(alpha)
        self.tolerance = tolerance
        self.p = truncation_order(tolerance) if order is None else int(order)
        self.threads = max(1, int(threads))
        self.cache = cache
        self._cached = {}
        sysm = self.system
        shared = targets is None
        pts = sysm.sources if shared else np.vstack([sysm.sources, sysm.targets])
        self.tree = tree = build_tree(pts, s_max)
        build_lists(tree)
        leaf = tree.leaf_of_points()
        key = tree.start[leaf]
        ns = sysm.n_sources
        self.src_order, self.src_lo, self.src_hi = _ranges_by_leaf(tree, key[:ns])
        if shared:
            self.tgt_order, self.tgt_lo, self.tgt_hi = self.src_order, self.src_lo, self.src_hi
        else:
            self.tgt_order, self.tgt_lo, self.tgt_hi = _ranges_by_leaf(tree, key[ns:])
        self._setup_scales()
        self._setup_translations()
        self._setup_lists()

    # -- setup --
    def _setup_scales(self):
        t = self.tree
        self.n_levels = t.depth + 1
        self.width = [2 * t.root_half_width / 2**lev / self.alpha for lev in range(self.n_levels)]
        self.scale = [ex.box_scaling(w) for w in self.width]
        self.box_scale = np.array([self.scale[lev] for lev in t.level])
        self.center_scaled = t.center / self.alpha

    def _setup_translations(self):
        p, t = self.p, self.tree
        self.m2m_ops, self.l2l_ops = {}, {}
        for lev in range(1, self.n_levels):
            h = 0.25 * self.width[lev - 1]
            for q in range(4):
                shift = np.array([h if q % 2 else -h, h if q // 2 else -h])
                self.m2m_ops[lev, q] = ex.m2m_matrix(shift, p, self.scale[lev], self.scale[lev - 1])
                self.l2l_ops[lev, q] = ex.l2l_matrix(shift, p, self.scale[lev - 1], self.scale[lev])
        boxes_by_level = [np.flatnonzero(t.level == lev) for lev in range(self.n_levels)]
        self.quadrant = (t.ij[:, 0] % 2 + 2 * (t.ij[:, 1] % 2)).astype(int)
        self.up_groups = []
        for lev in range(self.n_levels - 1, 0, -1):
            bl = boxes_by_level[lev]
            self.up_groups.append([(lev, q, bl[self.quadrant[bl] == q]) for q in range(4)])

    def _has_sources(self):
        return self.src_hi - self.src_lo > 0

    def _has_targets(self):
        return self.tgt_hi - self.tgt_lo > 0

    def _setup_lists(self):
        t, p = self.tree, self.p
        L = t.lists
        hs, ht = self._has_sources(), self._has_targets()
        groups = {}
        for b in range(t.n_boxes):
            if not ht[b]:
                continue
            for s in L["V"][b]:
                if not hs[s]:
                    continue
                off = (int(t.ij[b, 0] - t.ij[s, 0]), int(t.ij[b, 1] - t.ij[s, 1]))
                groups.setdefault((int(t.level[b]), off), ([], []))
                groups[int(t.level[b]), off][0].append(b)
                groups[int(t.level[b]), off][1].append(s)
        self.m2l_groups = []
        for (lev, off), (tg, sr) in sorted(groups.items()):
            shift = np.array(off, dtype=float) * self.width[lev]
            op = ex.m2l_matrix(shift, p, self.scale[lev], self.scale[lev])
            self.m2l_groups.append((op, np.array(tg), np.array(sr)))
        leaves = t.leaves
        # X list: sources of leaf B -> local expansion of box D
        xb, xd = [], []
        for d in range(t.n_boxes):
            if not ht[d]:
                continue
            for b in L["X"][d]:
                if hs[b]:
                    xb.append(b)
                    xd.append(d)
        self.x_pairs = (np.array(xb, dtype=int), np.array(xd, dtype=int))
        # W list: multipole of box D -> targets of leaf B
        wb, wd = [], []
        for b in leaves:
            if not ht[b]:
                continue
            for d in L["W"][b]:
                if hs[d]:
                    wb.append(b)
                    wd.append(d)
        self.w_pairs = (np.array(wb, dtype=int), np.array(wd, dtype=int))
        ub, uc = [], []
        for b in leaves:
            if not ht[b]:
                continue
            for c in L["U"][b]:
                if hs[c]:
                    ub.append(b)
                    uc.append(c)
        self.u_pairs = (np.array(ub, dtype=int), np.array(uc, dtype=int))
        self.leaves = leaves[hs[leaves]]
        self.target_leaves = leaves[ht[leaves]]

    # -- per-point rows (cached on demand) --
    def _rows(self, key, build):
        if key in self._cached:
            return self._cached[key]
        val = build()
        if self.cache:
            self._cached[key] = val
        return val

    def _src_leaf_rel(self):
        idx, owner = _concat_ranges(self.src_lo[self.leaves], self.src_hi[self.leaves])
        boxes = self.leaves[owner]
        src = self.src_order[idx]
        rel = self.system.sources[src] / self.alpha - self.center_scaled[boxes]
        return src, boxes, rel

    def _p2m_rows(self, dipole):
        def build():
            src, boxes, rel = self._src_leaf_rel()
            rows = np.empty((len(src), ex.n_real(self.p)))
            for lev in np.unique(self.tree.level[boxes]):
                m = self.tree.level[boxes] == lev
                dirs = self.system.directions[src[m]] if dipole else None
                c = ex.p2m_rows(rel[m], self.p, self.scale[lev], directions=dirs)
                rows[m] = ex.to_real(c.T).T
            return src, boxes, rows
        return self._rows(("p2m", dipole), build)

    def _p2l_rows(self, dipole):
        def build():
            xb, xd = self.x_pairs
            if len(xb) == 0:
                return None
            idx, owner = _concat_ranges(self.src_lo[xb], self.src_hi[xb])
            src = self.src_order[idx]
            boxes = xd[owner]
            rel = self.system.sources[src] / self.alpha - self.center_scaled[boxes]
            rows = np.empty((len(src), ex.n_real(self.p)))
            for lev in np.unique(self.tree.level[boxes]):
                m = self.tree.level[boxes] == lev
                dirs = self.system.directions[src[m]] if dipole else None
                c = ex.p2l_rows(rel[m], self.p, self.scale[lev], directions=dirs)
                rows[m] = ex.to_real(c.T).T
            return src, boxes, rows
        return self._rows(("p2l", dipole), build)

    def _eval_rows(self, kind, gradient):
        """Rows evaluating local (leaf) or multipole (W-list) expansions at targets."""
        def build():
            if kind == "l2p":
                lv = self.target_leaves
                idx, owner = _concat_ranges(self.tgt_lo[lv], self.tgt_hi[lv])
                boxes = lv[owner]
                fn = ex.l2p_rows
            else:
                wb, wd = self.w_pairs
                if len(wb) == 0:
                    return None
                idx, owner = _concat_ranges(self.tgt_lo[wb], self.tgt_hi[wb])
                boxes = wd[owner]
                fn = ex.m2p_rows
            tgt = self.tgt_order[idx]
            rel = self.system.targets[tgt] / self.alpha - self.center_scaled[boxes]
            n = ex.n_real(self.p)
            rows = np.empty((3 if gradient else 1, len(tgt), n))
            for lev in np.unique(self.tree.level[boxes]):
                m = self.tree.level[boxes] == lev
                r = fn(rel[m], self.p, self.scale[lev], gradient=gradient)
                if gradient:
                    rows[0, m], rows[1, m], rows[2, m] = r
                else:
                    rows[0, m] = r
            return tgt, boxes, rows
        return self._rows((kind, gradient), build)

    # -- near field --
    def _near_batches(self):
        ub, uc = self.u_pairs
        nt = self.tgt_hi[ub] - self.tgt_lo[ub]
        ns = self.src_hi[uc] - self.src_lo[uc]
        sizes = nt * ns
        bounds = [0]
        acc = 0
        for i, sz in enumerate(sizes):
            acc += sz
            if acc >= _NEAR_BATCH:
                bounds.append(i + 1)
                acc = 0
        if bounds[-1] != len(sizes):
            bounds.append(len(sizes))
        out = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            out.append((ub[a:b], uc[a:b]))
        return out

    def _near_pairs(self, ub, uc):
        nt = self.tgt_hi[ub] - self.tgt_lo[ub]
        ns = self.src_hi[uc] - self.src_lo[uc]
        sizes = nt * ns
        total = int(sizes.sum())
        pid = np.repeat(np.arange(len(ub)), sizes)
        offs = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        k = np.arange(total) - offs[pid]
        tpos = self.tgt_lo[ub][pid] + k // ns[pid]
        spos = self.src_lo[uc][pid] + k % ns[pid]
        ti = self.tgt_order[tpos]
        si = self.src_order[spos]
        keep = self.system.exclude[ti] != si
        return ti[keep], si[keep]

    def _near_terms(self, ti, si, q, mu, want_pot, want_grad):
        s = self.system
        e = (s.targets[ti] - s.sources[si]) / self.alpha
        r = np.hypot(e[:, 0], e[:, 1])
        return _pair_terms(e, r, self.alpha,
                           None if q is None else q[si],
                           None if mu is None else mu[si],
                           None if mu is None else s.directions[si],
                           want_pot, want_grad)

    def _near_matrices(self, dipole, gradient):
        """Sparse near-field operators (potential[, grad x, grad y]) for unit strengths."""
        key = ("near", dipole, gradient)
        if key in self._cached:
            return self._cached[key]
        nt, ns = self.system.n_targets, self.system.n_sources
        parts = [[] for _ in range(3 if gradient else 1)]
        tis, sis = [], []
        one = np.ones(ns)
        for ub, uc in self._near_batches():
            ti, si = self._near_pairs(ub, uc)
            pot, grad = self._near_terms(ti, si, None if dipole else one, one if dipole else None,
                                         True, gradient)
            tis.append(ti)
            sis.append(si)
            parts[0].append(pot)
            if gradient:
                parts[1].append(grad[:, 0])
                parts[2].append(grad[:, 1])
        ti = np.concatenate(tis) if tis else np.zeros(0, int)
        si = np.concatenate(sis) if sis else np.zeros(0, int)
        mats = [sp.csr_matrix((np.concatenate(v) if v else np.zeros(0), (ti, si)), shape=(nt, ns))
                for v in parts]
        self._cached[key] = mats
        return mats

    def _near(self, q, mu, want_pot, want_grad):
        nt = self.system.n_targets
        pot = np.zeros(nt) if want_pot else None
        grad = np.zeros((nt, 2)) if want_grad else None
        if self.cache:
            for dipole, strength in ((False, q), (True, mu)):
                if strength is None:
                    continue
                mats = self._near_matrices(dipole, want_grad)
                if want_pot:
                    pot += mats[0] @ strength
                if want_grad:
                    grad[:, 0] += mats[1] @ strength
                    grad[:, 1] += mats[2] @ strength
            return pot, grad

        def work(batch):
            ti, si = self._near_pairs(*batch)
            p_, g_ = self._near_terms(ti, si, q, mu, want_pot, want_grad)
            bp = np.bincount(ti, p_, minlength=nt) if want_pot else None
            bg = None
            if want_grad:
                bg = np.column_stack([np.bincount(ti, g_[:, 0], minlength=nt),
                                      np.bincount(ti, g_[:, 1], minlength=nt)])
            return bp, bg

        batches = self._near_batches()
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                results = list(pool.map(work, batches))
        else:
            results = [work(b) for b in batches]
        for bp, bg in results:
            if want_pot:
                pot += bp
            if want_grad:
                grad += bg
        return pot, grad

    # -- evaluation --
    def apply(self, charges=None, dipoles=None, potential=True, gradient=False):
        """Evaluate potential and/or physical gradient at the targets."""
        s = self.system
        if charges is None and dipoles is None:
            raise ConfigurationError("give charges and/or dipoles")
        q = None if charges is None else np.asarray(charges, dtype=float)
        mu = None if dipoles is None else np.asarray(dipoles, dtype=float)
        if mu is not None and s.directions is None:
            raise ConfigurationError("this plan was built without dipole directions")
        t = self.tree
        n = ex.n_real(self.p)
        M = np.zeros((t.n_boxes, n))
        for dipole, strength in ((False, q), (True, mu)):
            if strength is None:
                continue
            src, boxes, rows = self._p2m_rows(dipole)
            w = strength[src] / (self.alpha if dipole else 1.0)
            np.add.at(M, boxes, rows * w[:, None])
        # upward pass
        for group in self.up_groups:
            for lev, qd, kids in group:
                if len(kids):
                    M[t.parent[kids]] += M[kids] @ self.m2m_ops[lev, qd].T
        L = np.zeros((t.n_boxes, n))
        for op, tg, sr in self.m2l_groups:
            L[tg] += M[sr] @ op.T
        for dipole, strength in ((False, q), (True, mu)):
            if strength is None:
                continue
            res = self._p2l_rows(dipole)
            if res is None:
                continue
            src, boxes, rows = res
            w = strength[src] / (self.alpha if dipole else 1.0)
            np.add.at(L, boxes, rows * w[:, None])
        # downward pass
        for group in reversed(self.up_groups):
            for lev, qd, kids in group:
                if len(kids):
                    L[kids] += L[t.parent[kids]] @ self.l2l_ops[lev, qd].T
        nt = s.n_targets
        pot = np.zeros(nt) if potential else None
        grad = np.zeros((nt, 2)) if gradient else None
        for kind, coef in (("l2p", L), ("m2p", M)):
            res = self._eval_rows(kind, gradient)
            if res is None:
                continue
            tgt, boxes, rows = res
            c = coef[boxes]
            if potential:
                pot += np.bincount(tgt, np.einsum("ij,ij->i", rows[0], c), minlength=nt)
            if gradient:
                gx = np.einsum("ij,ij->i", rows[1], c) / self.alpha
                gy = np.einsum("ij,ij->i", rows[2], c) / self.alpha
                grad[:, 0] += np.bincount(tgt, gx, minlength=nt)
                grad[:, 1] += np.bincount(tgt, gy, minlength=nt)
        np_, ng = self._near(q, mu, potential, gradient)
        if potential:
            pot += np_
        if gradient:
            grad += ng
        return FieldResult(pot, grad)


def evaluate(system, tolerance=1e-11, s_max=DEFAULT_S_MAX, order=None, threads=1):
    """FMM evaluation of a :class:`ParticleSystem` (max-norm relative error
    against :func:`direct_evaluate` of order ``tolerance``)."""
    truncation_order(tolerance)
    plan = FMMPlan(system.sources, system.alpha, targets=None if system.targets is system.sources
                   else system.targets, directions=system.directions, exclude=system.exclude,
                   tolerance=tolerance, order=order, s_max=s_max, threads=threads)
    return plan.apply(system.charges, system.dipoles, system.potential, system.gradient)
