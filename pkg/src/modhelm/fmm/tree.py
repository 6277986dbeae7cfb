"""Adaptive quad-tree with the standard adaptive-FMM interaction lists.

For a box B the lists are

* U (leaves only): leaves adjacent to B, including B itself (direct sums);
* V: children of the parent's colleagues that are not adjacent to B (M2L);
* W (leaves only): boxes D that are not adjacent to B while their parent is;
  D's multipole expansion is evaluated directly at B's targets;
* X: the dual of W, leaves B with this box in W(B); B's sources feed this
  box's local expansion directly.

Boxes are numbered in breadth-first order; leaves are additionally ranked
in depth-first order so that every box owns a contiguous range of points.
"""

import warnings
from dataclasses import dataclass

import numpy as np

MAX_DEPTH = 40


@dataclass
class QuadTree:
    """Flat arrays describing the tree; ``box`` arrays are indexed by box id."""

    center: np.ndarray       # (nbox, 2)
    half_width: np.ndarray   # (nbox,)
    level: np.ndarray        # (nbox,)
    parent: np.ndarray       # (nbox,), -1 at the root
    children: np.ndarray     # (nbox, 4), -1 where absent
    ij: np.ndarray           # (nbox, 2) integer coordinates at the box's level
    order: np.ndarray        # point permutation: sorted position -> input index
    start: np.ndarray        # (nbox,) range of sorted points owned by the box
    stop: np.ndarray
    root_center: np.ndarray
    root_half_width: float
    lists: dict = None

    @property
    def n_boxes(self):
        return len(self.level)

    @property
    def depth(self):
        return int(self.level.max())

    def is_leaf(self, b):
        return self.children[b, 0] < 0

    @property
    def leaves(self):
        return np.flatnonzero(self.children[:, 0] < 0)

    def counts(self):
        return self.stop - self.start

    def leaf_of_points(self):
        """Leaf id of every input point."""
        out = np.empty(len(self.order), dtype=int)
        for b in self.leaves:
            out[self.order[self.start[b]:self.stop[b]]] = b
        return out

    def quadrant(self, b):
        """Position (0..3) of box ``b`` inside its parent: bit 0 = x, bit 1 = y."""
        return int(self.ij[b, 0] % 2 + 2 * (self.ij[b, 1] % 2))


def _bounding_square(points):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    center = 0.5 * (lo + hi)
    half = 0.5 * float(np.max(hi - lo))
    if half == 0.0:
        half = 0.5 * max(1.0, float(np.max(np.abs(center))))
    return center, half * (1.0 + 1e-10)


def build_tree(points, s_max=40, max_depth=MAX_DEPTH):
    """Adaptive quad-tree over ``points`` with at most ``s_max`` points per leaf.

    Subdivision is deterministic for a fixed input order. Clusters of more
    than ``s_max`` coincident points stop at ``max_depth`` with a warning.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2 or len(points) < 1:
        raise ValueError("build_tree needs an (n, 2) array with n >= 1")
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    if not np.all(np.isfinite(points)):
        raise ValueError("positions must be finite")
    root_c, root_h = _bounding_square(points)

    centers, halves, levels, parents, ij = [root_c], [root_h], [0], [-1], [(0, 0)]
    children = [[-1, -1, -1, -1]]
    members = [np.arange(len(points))]
    hit_depth = False
    b = 0
    while b < len(levels):
        idx = members[b]
        if len(idx) > s_max:
            if levels[b] >= max_depth:
                hit_depth = True
            else:
                c, h = centers[b], halves[b]
                p = points[idx]
                quad = (p[:, 0] >= c[0]).astype(int) + 2 * (p[:, 1] >= c[1]).astype(int)
                for q in range(4):
                    sub = idx[quad == q]
                    if len(sub) == 0:
                        continue
                    sx, sy = q % 2, q // 2
                    child = len(levels)
                    children[b][q] = child
                    centers.append(c + 0.5 * h * np.array([2 * sx - 1, 2 * sy - 1]))
                    halves.append(0.5 * h)
                    levels.append(levels[b] + 1)
                    parents.append(b)
                    ij.append((2 * ij[b][0] + sx, 2 * ij[b][1] + sy))
                    children.append([-1, -1, -1, -1])
                    members.append(sub)
                members[b] = None
        b += 1
    if hit_depth:
        warnings.warn("quad-tree reached maximum depth; points are (nearly) coincident",
                      stacklevel=2)

    nbox = len(levels)
    children = np.array(children, dtype=int)
    # depth-first leaf order gives contiguous point ranges per box
    order, start, stop = [], np.zeros(nbox, dtype=int), np.zeros(nbox, dtype=int)
    pos = 0
    stack = [(0, False)]
    while stack:
        b, done = stack.pop()
        if done:
            stop[b] = pos
            continue
        start[b] = pos
        if children[b, 0] < 0 and members[b] is not None:
            order.append(members[b])
            pos += len(members[b])
            stop[b] = pos
            continue
        stack.append((b, True))
        for q in (3, 2, 1, 0):
            if children[b, q] >= 0:
                stack.append((children[b, q], False))
    # compact children so that leaves are exactly the boxes without any child
    tree = QuadTree(
        center=np.array(centers), half_width=np.array(halves), level=np.array(levels),
        parent=np.array(parents), children=_packed_children(children),
        ij=np.array(ij, dtype=np.int64), order=np.concatenate(order),
        start=start, stop=stop, root_center=root_c, root_half_width=root_h,
    )
    tree.child_by_quadrant = children
    return tree


def _packed_children(children):
    # leaf test is children[:, 0] < 0; move existing children to the front
    out = np.full_like(children, -1)
    for b in range(len(children)):
        kids = children[b][children[b] >= 0]
        out[b, :len(kids)] = kids
    return out


def _touch(ija, la, ijb, lb):
    """Closed squares of two boxes (integer coords, levels) touch or overlap."""
    if la > lb:
        ija, la, ijb, lb = ijb, lb, ija, la
    k = 1 << (lb - la)
    x0, y0 = ija[0] * k, ija[1] * k
    return x0 - 1 <= ijb[0] <= x0 + k and y0 - 1 <= ijb[1] <= y0 + k


def build_lists(tree):
    """Compute U, V, W, X lists and store them in ``tree.lists``."""
    nbox = tree.n_boxes
    ij = tree.ij.tolist()
    lev = tree.level.tolist()
    kids = [[int(c) for c in row if c >= 0] for row in tree.children]
    parent = tree.parent.tolist()
    colleagues = [None] * nbox
    colleagues[0] = [0]
    V = [[] for _ in range(nbox)]
    U = [set() for _ in range(nbox)]
    W = [[] for _ in range(nbox)]
    X = [[] for _ in range(nbox)]
    for b in range(1, nbox):
        bx, by = ij[b]
        coll, far = [], []
        for c in colleagues[parent[b]]:
            for d in kids[c]:
                dx, dy = ij[d]
                if abs(dx - bx) <= 1 and abs(dy - by) <= 1:
                    coll.append(d)
                else:
                    far.append(d)
        colleagues[b] = coll
        V[b] = far
    for b in tree.leaves.tolist():
        U[b].add(b)
        stack = [c for c in colleagues[b] if c != b]
        while stack:
            c = stack.pop()
            if not kids[c]:
                U[b].add(c)
                U[c].add(b)
                continue
            for d in kids[c]:
                if _touch(ij[b], lev[b], ij[d], lev[d]):
                    stack.append(d)
                else:
                    W[b].append(d)
                    X[d].append(b)
    tree.lists = dict(U=[sorted(s) for s in U], V=V, W=W, X=X, colleagues=colleagues)
    return tree.lists
