"""Planar point sets, the three metrics, covers and s-chain components.

Points are stored as ``complex128``.  The point at infinity of the Riemann
sphere is the value ``complex(inf, inf)`` (see :data:`INFINITY`); only the
spherical metric accepts it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree

from .errors import DomainError

INFINITY = complex(math.inf, math.inf)
DUPLICATE_TOL = 1e-12
# component sizes above this use hull/extreme-point tricks for the diameter
_BRUTE_DIAMETER_MAX = 2048
_CHUNK = 1024


def is_infinity(z) -> bool:
    z = complex(z)
    return math.isinf(z.real) or math.isinf(z.imag)


def _as_points(values: Iterable) -> np.ndarray:
    if isinstance(values, np.ndarray) and values.dtype.kind in "fciu":
        pts = values.astype(np.complex128).ravel()
        if np.isnan(pts.real).any() or np.isnan(pts.imag).any():
            raise DomainError("NaN coordinate in point set")
        inf = np.isinf(pts.real) | np.isinf(pts.imag)
        if inf.any():
            pts = pts.copy()
            pts[inf] = INFINITY
        return pts
    out = []
    for v in values:
        if isinstance(v, str):
            v = v.strip().lower()
            z = INFINITY if v in ("inf", "infinity", "oo") else complex(v.replace("i", "j"))
        else:
            z = complex(v)
        if is_infinity(z):
            z = INFINITY
        elif math.isnan(z.real) or math.isnan(z.imag):
            raise DomainError("NaN coordinate in point set")
        out.append(z)
    return np.asarray(out, dtype=np.complex128)


@dataclass(frozen=True, eq=False)
class PointSet2D:
    """Finite ordered set of points of the extended plane.

    Two points count as duplicates when ``|a - b| <= 1e-12 * max(1, |a|, |b|)``;
    duplicates are rejected.
    """

    points: np.ndarray
    labels: tuple | None = None

    def __post_init__(self):
        pts = _as_points(self.points)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = tuple(None if l is None else str(l) for l in self.labels)
            if len(labels) != len(pts):
                raise DomainError("labels must match points one-to-one")
            object.__setattr__(self, "labels", labels)
        dup = _find_duplicate(pts)
        if dup is not None:
            i, j = dup
            raise DomainError(f"duplicate points at indices {i} and {j}: {pts[i]!r}")

    @classmethod
    def from_iterable(cls, values: Iterable, labels: Sequence | None = None) -> "PointSet2D":
        return cls(_as_points(values), None if labels is None else tuple(labels))

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def __iter__(self):
        return iter(self.points)

    @property
    def infinite_mask(self) -> np.ndarray:
        return np.isinf(self.points.real) | np.isinf(self.points.imag)

    @property
    def has_infinity(self) -> bool:
        return bool(self.infinite_mask.any())

    def subset(self, indices) -> "PointSet2D":
        idx = np.asarray(indices, dtype=np.intp)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return PointSet2D(self.points[idx], labels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for i, z in enumerate(self.points):
            row = ["inf", "inf"] if is_infinity(z) else [_fmt(z.real), _fmt(z.imag)]
            if self.labels is not None:
                row.append(self.labels[i] or "")
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PointSet2D":
        pts, labels, any_label = [], [], False
        for row in csv.reader(io.StringIO(text)):
            if not row or not "".join(row).strip():
                continue
            if len(row) not in (2, 3):
                raise DomainError(f"bad point row {row!r}")
            re_, im_ = row[0].strip().lower(), row[1].strip().lower()
            if re_ in ("inf", "+inf") and im_ in ("inf", "+inf"):
                pts.append(INFINITY)
            else:
                pts.append(complex(float(re_), float(im_)))
            if len(row) == 3:
                any_label = True
                labels.append(row[2] or None)
            else:
                labels.append(None)
        return cls(np.asarray(pts, dtype=np.complex128), tuple(labels) if any_label else None)


def _fmt(x: float) -> str:
    return "%.17g" % x


def _find_duplicate(pts: np.ndarray):
    inf_idx = np.flatnonzero(np.isinf(pts.real) | np.isinf(pts.imag))
    if len(inf_idx) > 1:
        return int(inf_idx[0]), int(inf_idx[1])
    finite_idx = np.flatnonzero(np.isfinite(pts.real) & np.isfinite(pts.imag))
    if len(finite_idx) < 2:
        return None
    z = pts[finite_idx]
    scale = max(1.0, float(np.abs(z).max()))
    tree = cKDTree(np.column_stack([z.real, z.imag]))
    pairs = tree.query_pairs(DUPLICATE_TOL * scale, output_type="ndarray")
    if len(pairs):
        a, b = z[pairs[:, 0]], z[pairs[:, 1]]
        ok = np.abs(a - b) <= DUPLICATE_TOL * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        if ok.any():
            k = int(np.flatnonzero(ok)[0])
            return int(finite_idx[pairs[k, 0]]), int(finite_idx[pairs[k, 1]])
    return None


# -- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class Euclidean:
    name = "euclidean"


@dataclass(frozen=True)
class Spherical:
    """Chordal metric ``q(z, w) = |z - w| / sqrt((1+|z|^2)(1+|w|^2))``."""

    name = "spherical"


@dataclass(frozen=True, eq=False)
class UltrametricRatio:
    """Ultrametric ``d_U(x, y) = max(|x - o|, |y - o|)`` for ``x != y``.

    Only defined on a registered ratio sequence: instances are normally
    produced by :func:`nagata_lab.dimension.ratio_sequence_certificate`.
    """

    basepoint: complex
    lam: float
    members: tuple = ()
    _lookup: dict = field(default_factory=dict, init=False, repr=False)

    name = "ultrametric"

    def __post_init__(self):
        if not self.lam > 1:
            raise DomainError("lambda must exceed 1")
        members = tuple(complex(m) for m in self.members)
        object.__setattr__(self, "basepoint", complex(self.basepoint))
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "_lookup", {m: i for i, m in enumerate(members)})

    def radius(self, z) -> np.ndarray:
        """Distance to the basepoint; raises for unregistered points."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        if np.any(np.isinf(z.real) | np.isinf(z.imag)):
            raise DomainError("the ultrametric does not accept the point at infinity")
        for v in z:
            if complex(v) not in self._lookup and not self._near_member(v):
                raise DomainError(f"point {complex(v)!r} is not in the registered ratio sequence")
        return np.abs(z - self.basepoint)

    def _near_member(self, v) -> bool:
        if not self.members:
            return False
        m = np.asarray(self.members)
        return bool(np.any(np.abs(m - v) <= DUPLICATE_TOL * np.maximum(1.0, np.abs(m))))


MetricKind = Union[Euclidean, Spherical, UltrametricRatio]
EUCLIDEAN = Euclidean()
SPHERICAL = Spherical()


def _check_finite(metric, *arrays):
    if isinstance(metric, Spherical):
        return
    for a in arrays:
        if np.any(np.isinf(a.real) | np.isinf(a.imag)):
            raise DomainError(f"{metric.name} metric does not accept the point at infinity")


def pair_distances(a, b, metric: MetricKind = EUCLIDEAN) -> np.ndarray:
    """Elementwise distances between two equally shaped point arrays."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    a, b = np.broadcast_arrays(a, b)
    _check_finite(metric, a, b)
    if isinstance(metric, Euclidean):
        return np.abs(a - b)
    if isinstance(metric, Spherical):
        ia = np.isinf(a.real) | np.isinf(a.imag)
        ib = np.isinf(b.real) | np.isinf(b.imag)
        fa = np.where(ia, 0, a)
        fb = np.where(ib, 0, b)
        with np.errstate(invalid="ignore"):
            out = np.abs(fa - fb) / np.sqrt((1 + np.abs(fa) ** 2) * (1 + np.abs(fb) ** 2))
        out = np.where(ia & ~ib, 1 / np.sqrt(1 + np.abs(fb) ** 2), out)
        out = np.where(ib & ~ia, 1 / np.sqrt(1 + np.abs(fa) ** 2), out)
        return np.where(ia & ib, 0.0, out)
    if isinstance(metric, UltrametricRatio):
        ra = metric.radius(a.ravel()).reshape(a.shape)
        rb = metric.radius(b.ravel()).reshape(b.shape)
        return np.where(a == b, 0.0, np.maximum(ra, rb))
    raise DomainError(f"unknown metric {metric!r}")


def distance(a, b, metric: MetricKind = EUCLIDEAN) -> float:
    """Distance between two points (either may be :data:`INFINITY` for the spherical metric)."""
    return float(pair_distances(np.asarray([complex(a)]), np.asarray([complex(b)]), metric)[0])


def inversion(z):
    """``z -> 1/z`` on the Riemann sphere, with ``0 <-> infinity``."""
    z = np.asarray(z, dtype=np.complex128)
    inf = np.isinf(z.real) | np.isinf(z.imag)
    zero = z == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 1 / np.where(inf | zero, 1, z)
    out = np.where(inf, 0, out)
    out = np.where(zero, INFINITY, out)
    return out if out.ndim else complex(out)


def distance_matrix(ps: PointSet2D, metric: MetricKind = EUCLIDEAN, idx=None) -> np.ndarray:
    z = ps.points if idx is None else ps.points[np.asarray(idx)]
    return pair_distances(z[:, None], z[None, :], metric)


def _spherical_embedding(z: np.ndarray) -> np.ndarray:
    """Points on the sphere of radius 1/2 whose chord lengths equal ``q``."""
    inf = np.isinf(z.real) | np.isinf(z.imag)
    w = np.where(inf, 0, z)
    n2 = np.abs(w) ** 2
    out = np.column_stack([w.real, w.imag, (n2 - 1) / 2]) / (1 + n2)[:, None]
    out[inf] = (0.0, 0.0, 0.5)
    return out


def pairs_within(ps: PointSet2D, s: float, metric: MetricKind = EUCLIDEAN) -> np.ndarray:
    """All index pairs ``i < j`` with ``d(p_i, p_j) <= s`` (exact test on the metric formula)."""
    z = ps.points
    n = len(z)
    _check_finite(metric, z)
    if n < 2:
        return np.empty((0, 2), dtype=np.intp)
    if isinstance(metric, UltrametricRatio):
        r = metric.radius(z)
        small = np.flatnonzero(r <= s)
        if len(small) < 2:
            return np.empty((0, 2), dtype=np.intp)
        i, j = np.triu_indices(len(small), 1)
        return np.column_stack([small[i], small[j]])
    if isinstance(metric, Euclidean):
        coords, radius = np.column_stack([z.real, z.imag]), s * (1 + 1e-12)
    else:
        coords, radius = _spherical_embedding(z), s * (1 + 1e-9) + 1e-15
    cand = cKDTree(coords).query_pairs(radius, output_type="ndarray")
    if len(cand) == 0:
        return np.empty((0, 2), dtype=np.intp)
    d = pair_distances(z[cand[:, 0]], z[cand[:, 1]], metric)
    return cand[d <= s]


def diameter(ps: PointSet2D, idx=None, metric: MetricKind = EUCLIDEAN) -> float:
    """Exact diameter of ``ps`` (or of the points ``idx``)."""
    idx = np.arange(len(ps)) if idx is None else np.asarray(idx, dtype=np.intp)
    if len(idx) < 2:
        return 0.0
    z = ps.points[idx]
    if isinstance(metric, UltrametricRatio):
        return float(metric.radius(z).max())
    _check_finite(metric, z)
    if len(z) > _BRUTE_DIAMETER_MAX and isinstance(metric, Euclidean):
        z = z[_extreme_points(z)]
    return _brute_diameter(z, metric)


def _brute_diameter(z: np.ndarray, metric) -> float:
    best = 0.0
    for start in range(0, len(z), _CHUNK):
        block = z[start:start + _CHUNK]
        d = pair_distances(block[:, None], z[None, :], metric)
        best = max(best, float(d.max()))
    return best


def _extreme_points(z: np.ndarray) -> np.ndarray:
    """Indices that contain a diametral pair: hull vertices, or line endpoints."""
    xy = np.column_stack([z.real, z.imag])
    try:
        return ConvexHull(xy).vertices
    except (QhullError, ValueError):
        centred = xy - xy.mean(axis=0)
        direction = np.linalg.svd(centred, full_matrices=False)[2][0]
        proj = centred @ direction
        # nearly collinear: keep a thin band at both ends to stay exact
        span = proj.max() - proj.min()
        keep = (proj <= proj.min() + 1e-9 * span) | (proj >= proj.max() - 1e-9 * span)
        return np.flatnonzero(keep)


# -- s-chain components --------------------------------------------------------


@dataclass(frozen=True)
class ChainDecomposition:
    s: float
    components: tuple  # tuple of tuples of point indices
    diameters: tuple

    def component_of(self, i: int) -> int:
        for k, comp in enumerate(self.components):
            if i in comp:
                return k
        raise IndexError(i)


class ChainStructure:
    """Single-linkage structure of a point set, reusable across scales.

    Keeps a minimum spanning tree of the complete distance graph; the
    s-components are the connected components of the MST edges of length
    at most ``s``.
    """

    def __init__(self, ps: PointSet2D, metric: MetricKind = EUCLIDEAN):
        self.ps = ps
        self.metric = metric
        _check_finite(metric, ps.points)
        self._ultra = isinstance(metric, UltrametricRatio)
        if self._ultra:
            self._radii = metric.radius(ps.points) if len(ps) else np.empty(0)
            self.edges = np.empty((0, 2), dtype=np.intp)
            self.weights = np.empty(0)
        else:
            self.edges, self.weights = _mst_edges(ps, metric)

    def components(self, s: float, rtol: float = 0.0) -> ChainDecomposition:
        if not s > 0:
            raise DomainError("scale s must be positive")
        n = len(self.ps)
        thr = s * (1 + rtol)
        if self._ultra:
            labels = np.arange(n)
            small = np.flatnonzero(self._radii <= thr)
            if len(small) > 1:
                labels[small] = small[0]
        else:
            keep = self.weights <= thr
            e = self.edges[keep]
            graph = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
            _, labels = connected_components(graph, directed=False)
        groups: dict = {}
        for i, lab in enumerate(labels.tolist()):
            groups.setdefault(lab, []).append(i)
        comps = sorted((tuple(g) for g in groups.values()), key=lambda g: g[0])
        diams = tuple(diameter(self.ps, c, self.metric) for c in comps)
        return ChainDecomposition(s=float(s), components=tuple(comps), diameters=diams)


def _mst_edges(ps: PointSet2D, metric) -> tuple:
    z = ps.points
    n = len(z)
    if n < 2:
        return np.empty((0, 2), dtype=np.intp), np.empty(0)
    if isinstance(metric, Euclidean):
        cand = _delaunay_candidates(z)
    else:
        cand = None
    if cand is None:
        if n > 6000:
            raise DomainError("dense single-linkage limited to 6000 points for this metric")
        i, j = np.triu_indices(n, 1)
        cand = np.column_stack([i, j])
    w = pair_distances(z[cand[:, 0]], z[cand[:, 1]], metric)
    # zero-length edges cannot exist (duplicates are rejected), but keep them visible to scipy
    graph = coo_matrix((np.maximum(w, np.finfo(float).tiny), (cand[:, 0], cand[:, 1])), shape=(n, n))
    tree = minimum_spanning_tree(graph).tocoo()
    edges = np.column_stack([tree.row, tree.col]).astype(np.intp)
    return edges, pair_distances(z[edges[:, 0]], z[edges[:, 1]], metric)


def _delaunay_candidates(z: np.ndarray):
    """Edges of a Delaunay triangulation (they contain a Euclidean MST)."""
    n = len(z)
    xy = np.column_stack([z.real, z.imag])
    if n == 2:
        return np.array([[0, 1]])
    centred = xy - xy.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        direction = np.linalg.svd(centred, full_matrices=False)[2][0]
        order = np.argsort(centred @ direction, kind="stable")
        return np.column_stack([order[:-1], order[1:]])
    try:
        tri = Delaunay(xy)
    except QhullError:
        return None
    s = tri.simplices
    e = np.vstack([s[:, [0, 1]], s[:, [1, 2]], s[:, [0, 2]]])
    e.sort(axis=1)
    e = np.unique(e, axis=0)
    if len(np.unique(e)) < n:  # qhull dropped coplanar points
        return None
    return e


def s_chain_components(ps: PointSet2D, s: float, metric: MetricKind = EUCLIDEAN,
                       rtol: float = 0.0) -> ChainDecomposition:
    """Partition ``ps`` into its s-chain components.

    Components are ordered by their smallest member index.  ``rtol`` widens
    the adjacency test to ``d <= s * (1 + rtol)``, for point sets whose
    spacing is exact only up to rounding.
    """
    return ChainStructure(ps, metric).components(s, rtol=rtol)


# -- covers ----------------------------------------------------------------------


@dataclass(frozen=True)
class Cover:
    blocks: tuple
    s: float
    c: float = 1.0
    n_plus_1: int = 1

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        if not blocks:
            raise DomainError("empty cover")
        if any(len(b) == 0 for b in blocks):
            raise DomainError("cover blocks must be nonempty")
        if not self.s > 0:
            raise DomainError("scale s must be positive")
        if not self.c >= 1:
            raise DomainError("bound constant c must be >= 1")
        if self.n_plus_1 < 1:
            raise DomainError("claimed multiplicity must be >= 1")
        object.__setattr__(self, "blocks", blocks)


@dataclass(frozen=True)
class CoverVerdict:
    bounded: bool
    multiplicity_upper: int
    exact: bool
    witness: tuple | None
    block_diameters: tuple
    mode: str

    @property
    def within_claim(self) -> bool:
        return self.witness is None


def verify_cover(ps: PointSet2D, cover: Cover, metric: MetricKind = EUCLIDEAN,
                 mode: str = "clique") -> CoverVerdict:
    """Check boundedness and s-multiplicity of a cover.

    ``mode="clique"`` bounds the multiplicity by the clique number of the
    block graph whose edges join blocks at distance ``<= s``.  This is exact
    whenever the bound is at most 2 (and for the run-partitions of the line
    built by this library) and an upper bound otherwise; ``exact`` in the
    verdict records which.  ``mode="exact"`` searches every maximal clique
    of the point threshold graph, i.e. every maximal set of diameter
    ``<= s`` (Euclidean and ultrametric only), and is limited to 20 blocks.
    """
    if not isinstance(cover, Cover):
        raise DomainError("cover must be a Cover")
    n = len(ps)
    membership: list = [[] for _ in range(n)]
    for b, block in enumerate(cover.blocks):
        for i in block:
            if not 0 <= i < n:
                raise DomainError(f"cover block {b} indexes missing point {i}")
            membership[i].append(b)
    missing = [i for i in range(n) if not membership[i]]
    if missing:
        raise DomainError(f"cover misses point indices {missing[:10]}")

    diams = tuple(diameter(ps, blk, metric) for blk in cover.blocks)
    bounded = all(d <= cover.c * cover.s for d in diams)
    pairs = pairs_within(ps, cover.s, metric)

    if mode == "clique":
        g = nx.Graph()
        g.add_nodes_from(range(len(cover.blocks)))
        for bs in membership:  # shared points put blocks at distance 0
            for x in range(len(bs)):
                for y in range(x + 1, len(bs)):
                    g.add_edge(bs[x], bs[y])
        for i, j in pairs.tolist():
            for a in membership[i]:
                for b in membership[j]:
                    if a != b:
                        g.add_edge(a, b)
        clique, size = nx.max_weight_clique(g, weight=None)
        size = max(int(size), 1)
        exact = size <= 2
    elif mode == "exact":
        if len(cover.blocks) > 20:
            raise DomainError("exact multiplicity search is limited to 20 blocks")
        if isinstance(metric, Spherical):
            raise DomainError("exact mode supports Euclidean and ultrametric metrics")
        g = nx.Graph()
        g.add_nodes_from(range(n))
        g.add_edges_from(pairs.tolist())
        size, clique = 0, []
        for pc in nx.find_cliques(g):
            met = sorted({b for i in pc for b in membership[i]})
            if len(met) > size:
                size, clique = len(met), met
        exact = True
    else:
        raise DomainError(f"unknown mode {mode!r}")

    witness = tuple(sorted(int(b) for b in clique)) if size > cover.n_plus_1 else None
    return CoverVerdict(bounded=bounded, multiplicity_upper=size, exact=exact,
                        witness=witness, block_diameters=diams, mode=mode)
