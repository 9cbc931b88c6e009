"""Random planar flow networks and their leaf-observation design matrices.

A network is built from points in [-1,1]^2 ordered by distance from the
origin. Edges only point from inner to outer nodes, so the graph is a DAG;
candidate edges that would cross an already accepted edge are discarded, so
the drawing stays planar. Nodes without outgoing edges are leaves.

Unit flow injected at an internal node splits equally over outgoing edges at
every hop; the design matrix records the fraction of that flow absorbed at
each leaf. Every column sums to one because all flow eventually reaches an
out-degree-zero node.

Segment crossing is decided exactly: a floating-point orientation test with
a rigorous error bound falls back to rational arithmetic only when the float
result cannot be trusted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .linalg import CoefficientVector, DesignMatrix, ResponseVector

_EPS = float(np.finfo(float).eps)
# |computed det| above 8 eps (|t1| + |t2|) guarantees the true sign; the
# exact rounding bound for t1 - t2 with one product each is under 4 eps
_ORIENT_SAFETY = 8.0 * _EPS

COLUMN_SUM_TOL = 1e-12


def _orient_parts(a, b, c):
    t1 = (b[0] - a[0]) * (c[1] - a[1])
    t2 = (b[1] - a[1]) * (c[0] - a[0])
    return t1 - t2, _ORIENT_SAFETY * (abs(t1) + abs(t2))


def _orient_sign_exact(a, b, c) -> int:
    ax, ay = Fraction(a[0]), Fraction(a[1])
    det = (Fraction(b[0]) - ax) * (Fraction(c[1]) - ay) - (Fraction(b[1]) - ay) * (
        Fraction(c[0]) - ax
    )
    return (det > 0) - (det < 0)


def _orient_sign(a, b, c) -> int:
    det, err = _orient_parts(a, b, c)
    if det > err:
        return 1
    if det < -err:
        return -1
    return _orient_sign_exact(a, b, c)


def _collinear_open_overlap(p1, p2, p3, p4) -> bool:
    # all four points on one line; compare exact 1-D open intervals on the
    # axis where the first segment extends the most
    if abs(p2[0] - p1[0]) >= abs(p2[1] - p1[1]):
        axis = 0
    else:
        axis = 1
    a_lo, a_hi = sorted((p1[axis], p2[axis]))
    b_lo, b_hi = sorted((p3[axis], p4[axis]))
    if a_lo == a_hi or b_lo == b_hi:
        return False
    return max(a_lo, b_lo) < min(a_hi, b_hi)


def _cross_with_orient(p1, p2, p3, p4, orient) -> bool:
    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    if d1 == 0 and d2 == 0 and d3 == 0 and d4 == 0:
        return _collinear_open_overlap(p1, p2, p3, p4)
    return False


def segments_cross(p1, p2, p3, p4) -> bool:
    """True iff the open segments (p1,p2) and (p3,p4) intersect.

    Touching at an endpoint does not count; collinear segments sharing more
    than a point do. The decision is exact: ambiguous float orientations are
    recomputed in rational arithmetic.
    """
    return _cross_with_orient(tuple(map(float, p1)), tuple(map(float, p2)),
                              tuple(map(float, p3)), tuple(map(float, p4)),
                              _orient_sign)


def segments_cross_exact(p1, p2, p3, p4) -> bool:
    """Pure rational-arithmetic variant of segments_cross (testing oracle)."""
    return _cross_with_orient(tuple(map(float, p1)), tuple(map(float, p2)),
                              tuple(map(float, p3)), tuple(map(float, p4)),
                              _orient_sign_exact)


def _crosses_any(cand_a, cand_b, seg_a: np.ndarray, seg_b: np.ndarray) -> bool:
    """Does segment (cand_a, cand_b) cross any of the stored segments?

    Vectorized float orientation filter over all stored segments; only pairs
    whose sign cannot be trusted (mostly shared endpoints, which produce
    exact zero determinants) fall through to the exact scalar predicate.
    """
    m = seg_a.shape[0]
    if m == 0:
        return False

    def odet(A, B, C):
        t1 = (B[:, 0] - A[:, 0]) * (C[:, 1] - A[:, 1])
        t2 = (B[:, 1] - A[:, 1]) * (C[:, 0] - A[:, 0])
        return t1 - t2, _ORIENT_SAFETY * (np.abs(t1) + np.abs(t2))

    a = np.broadcast_to(np.asarray(cand_a, dtype=float), (m, 2))
    b = np.broadcast_to(np.asarray(cand_b, dtype=float), (m, 2))
    d1, e1 = odet(seg_a, seg_b, a)
    d2, e2 = odet(seg_a, seg_b, b)
    d3, e3 = odet(a, b, seg_a)
    d4, e4 = odet(a, b, seg_b)
    sure1 = np.abs(d1) > e1
    sure2 = np.abs(d2) > e2
    sure3 = np.abs(d3) > e3
    sure4 = np.abs(d4) > e4
    all_sure = sure1 & sure2 & sure3 & sure4
    crossing = all_sure & (d1 * d2 < 0) & (d3 * d4 < 0)
    if bool(np.any(crossing)):
        return True
    # definitely separated: both endpoints strictly on one side of a line
    clear = (sure1 & sure2 & (d1 * d2 > 0)) | (sure3 & sure4 & (d3 * d4 > 0))
    unresolved = np.flatnonzero(~clear & ~crossing)
    ca = tuple(map(float, cand_a))
    cb = tuple(map(float, cand_b))
    for i in unresolved:
        if _cross_with_orient(ca, cb, tuple(seg_a[i]), tuple(seg_b[i]), _orient_sign):
            return True
    return False


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """A planar DAG on points ordered by distance from the origin.

    positions are stored in processing order (index 0 nearest the origin);
    ``order`` maps that index back to the raw sample index. Edges (j, k)
    always satisfy j < k. Leaves are the nodes with no outgoing edge.
    """

    positions: np.ndarray
    order: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must be an (N, 2) array")
        order = np.array(self.order, dtype=int, copy=True)
        if sorted(order.tolist()) != list(range(pos.shape[0])):
            raise ValueError("order must be a permutation of node indices")
        edges = np.array(self.edges, dtype=int, copy=True).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= pos.shape[0]:
                raise ValueError("edge endpoint out of range")
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("edges must point from lower to higher index")
        for arr in (pos, order, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "edges", edges)

    @property
    def n_nodes(self) -> int:
        return self.positions.shape[0]

    @property
    def leaf_set(self) -> np.ndarray:
        out_degree = np.zeros(self.n_nodes, dtype=int)
        if self.edges.size:
            np.add.at(out_degree, self.edges[:, 0], 1)
        return np.flatnonzero(out_degree == 0)

    @property
    def internal_set(self) -> np.ndarray:
        out_degree = np.zeros(self.n_nodes, dtype=int)
        if self.edges.size:
            np.add.at(out_degree, self.edges[:, 0], 1)
        return np.flatnonzero(out_degree > 0)

    def verify_planarity(self, rational: bool = False) -> bool:
        """Pairwise open-segment disjointness of all edges (O(E^2) oracle).

        Every pair is decided exactly either way. The default path filters
        with a rigorous float error bound and escalates only uncertain pairs
        to rational arithmetic; rational=True forces rational arithmetic on
        every pair (slow, kept as an independent oracle).
        """
        E = self.edges
        P = self.positions
        m = E.shape[0]
        if rational:
            for i in range(m):
                for j in range(i + 1, m):
                    if segments_cross_exact(P[E[i, 0]], P[E[i, 1]], P[E[j, 0]], P[E[j, 1]]):
                        return False
            return True
        seg_a = P[E[:, 0]]
        seg_b = P[E[:, 1]]
        for i in range(m - 1):
            if _crosses_any(P[E[i, 0]], P[E[i, 1]], seg_a[i + 1:], seg_b[i + 1:]):
                return False
        return True

    def to_json(self) -> str:
        return json.dumps(
            {
                "positions": self.positions.tolist(),
                "order": self.order.tolist(),
                "edges": self.edges.tolist(),
                "leaf_set": self.leaf_set.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "NetworkTopology":
        data = json.loads(text)
        return cls(
            positions=np.asarray(data["positions"], dtype=float),
            order=np.asarray(data["order"], dtype=int),
            edges=np.asarray(data["edges"], dtype=int).reshape(-1, 2),
        )


def generate_network(n_nodes: int, K: int, nu_del: float, seed) -> NetworkTopology:
    """Sample a planar DAG.

    Nodes are uniform on [-1,1]^2 and processed from the origin outward.
    Each node proposes edges to its K nearest higher-ordered neighbors, in
    increasing distance order; each candidate first draws an independent
    Bernoulli(nu_del) deletion, then is dropped if it would cross an accepted
    edge. nu_del = 1 therefore deletes everything. Deterministic per seed.
    """
    if n_nodes < 2:
        raise ValueError("need at least two nodes")
    if K < 1:
        raise ValueError("K must be at least 1")
    if not 0.0 <= nu_del <= 1.0:
        raise ValueError("nu_del must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    raw = rng.uniform(-1.0, 1.0, size=(n_nodes, 2))
    dist = np.hypot(raw[:, 0], raw[:, 1])
    order = np.argsort(dist, kind="stable")
    pos = raw[order]
    edges = []
    seg_a = np.empty((0, 2))
    seg_b = np.empty((0, 2))
    for k in range(n_nodes - 1):
        later = np.arange(k + 1, n_nodes)
        gaps = np.hypot(pos[later, 0] - pos[k, 0], pos[later, 1] - pos[k, 1])
        nearest = later[np.argsort(gaps, kind="stable")[:K]]
        for j in nearest:
            if rng.random() < nu_del:
                continue
            if _crosses_any(pos[k], pos[j], seg_a, seg_b):
                continue
            edges.append((k, int(j)))
            seg_a = np.vstack([seg_a, pos[k][None, :]])
            seg_b = np.vstack([seg_b, pos[j][None, :]])
    return NetworkTopology(positions=pos, order=order, edges=np.asarray(edges, dtype=int).reshape(-1, 2))


def flow_design_matrix(topology: NetworkTopology) -> DesignMatrix:
    """Leaf-by-internal matrix of equal-split flow fractions.

    Injecting unit flow at internal node j and propagating in index order,
    entry (i, j) is the amount absorbed at leaf i. Each column sums to one.
    The column ids on the result name the internal node behind each column.
    """
    N = topology.n_nodes
    leaves = topology.leaf_set
    internal = topology.internal_set
    if internal.size == 0:
        raise ValueError("topology has no internal nodes; the design matrix would be empty")
    if leaves.size == 0:
        raise ValueError("topology has no leaves")
    children = [[] for _ in range(N)]
    for a, b in topology.edges:
        children[a].append(int(b))
    leaf_row = {int(node): i for i, node in enumerate(leaves)}
    X = np.zeros((leaves.size, internal.size))
    for col, j in enumerate(internal):
        flow = np.zeros(N)
        flow[j] = 1.0
        for k in range(int(j), N):
            if flow[k] == 0.0:
                continue
            kids = children[k]
            if kids:
                share = flow[k] / len(kids)
                for m in kids:
                    flow[m] += share
                flow[k] = 0.0
        X[:, col] = flow[leaves]
    sums = X.sum(axis=0)
    bad = np.abs(sums - 1.0) > COLUMN_SUM_TOL
    if np.any(bad):
        raise RuntimeError(f"flow conservation violated on columns {np.flatnonzero(bad).tolist()}")
    keep = np.flatnonzero(sums > 0)
    # all-zero columns cannot occur (flow always reaches an out-degree-0
    # node) but dropping keeps the standardization contract safe regardless
    return DesignMatrix(X[:, keep], column_ids=internal[keep])


@dataclass(frozen=True, eq=False)
class TomographyInstance:
    """Design matrix, ground-truth losses, and noise level of one network.

    ``topology`` is None for the hand-written fixture whose matrix is given
    directly rather than derived from drawn positions.
    """

    X: DesignMatrix
    beta_star: CoefficientVector
    sigma: float
    topology: Optional[NetworkTopology] = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        vals = self.X.values
        # equal-split propagation accumulates rounding of order eps per hop
        if float(np.min(vals)) < -COLUMN_SUM_TOL or float(np.max(vals)) > 1.0 + COLUMN_SUM_TOL:
            raise ValueError("flow matrix entries must lie in [0, 1]")
        sums = vals.sum(axis=0)
        if float(np.max(np.abs(sums - 1.0))) > COLUMN_SUM_TOL:
            raise ValueError("every flow matrix column must sum to 1")
        if self.beta_star.p != self.X.p:
            raise ValueError("beta_star length must equal the column count")
        if float(np.min(self.beta_star.values)) < 0.0:
            raise ValueError("loss rates must be nonnegative")


def toy_instance(sigma: float = 0.0) -> TomographyInstance:
    """The fixed 3-leaf, 3-internal-node instance with losses (10, 10, 0)."""
    X = DesignMatrix(
        [[0.3, 0.5, 0.0], [0.3, 0.0, 0.5], [0.4, 0.5, 0.5]],
        column_ids=np.arange(3),
    )
    return TomographyInstance(
        X=X,
        beta_star=CoefficientVector([10.0, 10.0, 0.0]),
        sigma=float(sigma),
        topology=None,
    )


def simulate_observations(inst: TomographyInstance, seed) -> ResponseVector:
    """Y = X beta_star + Gaussian noise of standard deviation inst.sigma."""
    rng = np.random.default_rng(seed)
    mean = inst.X.values @ inst.beta_star.values
    if inst.sigma == 0.0:
        return ResponseVector(mean)
    return ResponseVector(mean + inst.sigma * rng.standard_normal(mean.shape[0]))
