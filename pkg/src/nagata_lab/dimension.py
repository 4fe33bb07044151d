"""Scale-windowed dimension certificates.

A finite point set always has Nagata dimension zero, so nothing here
computes a dimension.  Every certificate is taken over an explicit window
of scales; "dimension at least one" shows up as certificate constants that
keep growing as the window widens, and as delta-chains whose diameters keep
increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order
from scipy.spatial import cKDTree

from ._serialize import jsonable
from .errors import DomainError
from .metric import (
    EUCLIDEAN,
    ChainStructure,
    Euclidean,
    Cover,
    MetricKind,
    PointSet2D,
    UltrametricRatio,
    _extreme_points,
    diameter,
    pair_distances,
)


@dataclass(frozen=True)
class ScaleGrid:
    s_min: float
    s_max: float
    ratio: float = 2.0

    def __post_init__(self):
        if not (self.s_min > 0 and self.s_max > self.s_min and self.ratio > 1):
            raise DomainError("need 0 < s_min < s_max and ratio > 1")
        if len(self.scales) < 3:
            raise DomainError("a scale grid needs at least 3 scales")

    @property
    def scales(self) -> tuple:
        out, i = [], 0
        while True:
            s = self.s_min * self.ratio ** i
            if s > self.s_max * (1 + 1e-12):
                return tuple(out)
            out.append(s)
            i += 1


@dataclass(frozen=True)
class Ndim0Certificate:
    grid: ScaleGrid
    scales: tuple
    ratios: tuple  # max component diameter / s, per scale
    n_components: tuple
    C: float
    C_max: float
    passed: bool

    def to_dict(self) -> dict:
        return jsonable(self)


def default_c_max(theoretical: float | None = None) -> float:
    return 4.0 * (theoretical if theoretical is not None else 10.0)


def ndim0_certificate(ps: PointSet2D, grid: ScaleGrid, metric: MetricKind = EUCLIDEAN,
                      C_max: float | None = None, rtol: float = 0.0) -> Ndim0Certificate:
    """Largest ``diam(component) / s`` over the s-chain components, for each grid scale."""
    if C_max is None:
        C_max = default_c_max()
    structure = ChainStructure(ps, metric)
    ratios, counts = [], []
    for s in grid.scales:
        dec = structure.components(s, rtol=rtol)
        ratios.append(max(dec.diameters, default=0.0) / s)
        counts.append(len(dec.components))
    C = max(ratios)
    return Ndim0Certificate(grid=grid, scales=grid.scales, ratios=tuple(ratios),
                            n_components=tuple(counts), C=C, C_max=float(C_max),
                            passed=bool(C <= C_max))


def union_constant_bound(c_y: float, c_z: float) -> float:
    """Chain constant bound for ``X = Y u Z`` from constants of ``Y`` and ``Z``.

    If every s-component of ``Y`` has diameter ``<= c_y s`` and every
    t-component of ``Z`` has diameter ``<= c_z t``, then the Z-points of an
    s-chain of ``X`` form a t-chain for ``t = (c_y + 2) s``, and every s-component
    of ``X`` has diameter at most ``(c_z (c_y + 2) + 2 c_y + 2) s``.  The ``Z``
    constant must therefore be taken over the window scaled by ``c_y + 2``.
    """
    return c_z * (c_y + 2) + 2 * c_y + 2


# -- exponential sequences -------------------------------------------------------


def exp_sequence(lam: float, n_points: int) -> PointSet2D:
    """The points ``lam, lam**2, ..., lam**n_points`` on the real line."""
    if not lam > 1:
        raise DomainError("lambda must exceed 1")
    return PointSet2D(np.asarray([lam ** k for k in range(1, n_points + 1)], dtype=float))


def exp_sequence_cover(lam: float, n_points: int, s: float) -> Cover:
    """Multiplicity-one cover of ``exp_sequence(lam, n_points)`` at scale ``s``.

    Picks ``N`` with ``lam**(N-1) (lam-1) <= s < lam**N (lam-1)``, lumps
    ``lam, ..., lam**N`` into one block and leaves later points as singletons.
    ``N`` is then nudged up while a floating-point gap past it fails to
    exceed ``s``, so the cover is exact in the arithmetic actually used.
    """
    if not lam > 1:
        raise DomainError("lambda must exceed 1")
    if not s > 0:
        raise DomainError("scale s must be positive")
    if n_points < 1:
        raise DomainError("need at least one point")
    x = exp_sequence(lam, n_points).points.real
    big_n = math.floor(math.log(s / (lam - 1), lam)) + 1
    while big_n > 0 and lam ** (big_n - 1) * (lam - 1) > s:
        big_n -= 1
    while lam ** big_n * (lam - 1) <= s:
        big_n += 1
    big_n = max(big_n, 1)
    # gaps x[k] - x[k-1] for 1-based k > N must exceed s
    while big_n < n_points and x[big_n] - x[big_n - 1] <= s:
        big_n += 1
    head = min(big_n, n_points)
    blocks = [tuple(range(head))] + [(k,) for k in range(head, n_points)]
    return Cover(blocks=tuple(blocks), s=s, c=lam / (lam - 1), n_plus_1=1)


# -- chains ------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainGrowthWitness:
    delta: float
    chains: tuple  # index paths
    diameters: tuple
    source: str  # "components" or "prefixes"

    def to_dict(self) -> dict:
        return jsonable(self)


def is_chain(ps: PointSet2D, path, delta: float, metric: MetricKind = EUCLIDEAN,
             rtol: float = 0.0) -> bool:
    path = np.asarray(path, dtype=np.intp)
    if len(path) < 2:
        return len(path) == 1
    gaps = pair_distances(ps.points[path[:-1]], ps.points[path[1:]], metric)
    return bool(np.all(gaps <= delta * (1 + rtol)))


def diametral_pair(ps: PointSet2D, idx, metric: MetricKind = EUCLIDEAN) -> tuple:
    """Indices of two points of ``idx`` at maximal distance."""
    idx = np.asarray(idx, dtype=np.intp)
    if len(idx) > 2048 and isinstance(metric, Euclidean):
        idx = idx[_extreme_points(ps.points[idx])]
    z = ps.points[idx]
    best, pair = -1.0, (int(idx[0]), int(idx[0]))
    for start in range(0, len(z), 1024):
        d = pair_distances(z[start:start + 1024, None], z[None, :], metric)
        a, b = np.unravel_index(int(np.argmax(d)), d.shape)
        if d[a, b] > best:
            best, pair = float(d[a, b]), (int(idx[start + a]), int(idx[b]))
    return pair


def chain_growth_witness(ps: PointSet2D, delta: float, min_chains: int = 2,
                         metric: MetricKind = EUCLIDEAN, rtol: float = 1e-9):
    """Delta-chains with strictly increasing diameters, or ``None``.

    Each multi-point delta-component contributes one chain: the spanning-tree
    path between a diametral pair, so the chain's diameter is the
    component's.  When the distinct component diameters are too few, the
    prefixes of the longest such chain are used instead.  ``rtol`` widens the
    gap test to absorb rounding in evenly spaced inputs.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    structure = ChainStructure(ps, metric)
    dec = structure.components(delta, rtol=rtol)
    n = len(ps)
    keep = structure.weights <= delta * (1 + rtol)
    e = structure.edges[keep]
    graph = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()
    graph = graph + graph.T

    found = []
    for comp, diam in zip(dec.components, dec.diameters):
        if len(comp) < 2:
            continue
        u, v = diametral_pair(ps, comp, metric)
        _, pred = breadth_first_order(graph, u, directed=False, return_predecessors=True)
        path = [v]
        while path[-1] != u:
            path.append(int(pred[path[-1]]))
        found.append((diam, tuple(path[::-1])))
    if not found:
        return None
    found.sort(key=lambda t: t[0])

    chains, diams = [], []
    for d, path in found:
        if not diams or d > diams[-1]:
            chains.append(path)
            diams.append(d)
    if len(chains) >= min_chains:
        return ChainGrowthWitness(delta=delta, chains=tuple(chains), diameters=tuple(diams),
                                  source="components")

    longest = found[-1][1]
    lengths = range(2, len(longest) + 1)
    if len(longest) > 512:
        lengths = sorted({int(round(x)) for x in np.geomspace(2, len(longest), 64)})
    chains, diams = [], []
    for m in lengths:
        d = diameter(ps, longest[:m], metric)
        if not diams or d > diams[-1]:
            chains.append(longest[:m])
            diams.append(d)
    if len(chains) >= min_chains:
        return ChainGrowthWitness(delta=delta, chains=tuple(chains), diameters=tuple(diams),
                                  source="prefixes")
    return None


# -- ratio sequences ---------------------------------------------------------------


@dataclass(frozen=True)
class RatioSequenceCertificate:
    basepoint: complex
    lam: float
    checked: bool
    biLip_lower: float
    biLip_upper: float
    order: tuple
    min_ratio: float
    strong_triangle_ok: bool | None = None
    bilipschitz_ok: bool | None = None
    metric: UltrametricRatio | None = field(default=None, metadata={"serialize": False})

    def to_dict(self) -> dict:
        return jsonable(self)


def ratio_sequence_certificate(ps: PointSet2D, o: complex, lam: float,
                               rtol: float = 1e-12) -> RatioSequenceCertificate:
    """Check ``|x_{k+1} - o| >= lam |x_k - o|`` and build the ultrametric.

    Points are taken in order of distance from ``o``.  When the ratio test
    passes (each ratio may fall short of ``lam`` by a relative ``rtol``,
    to absorb rounding in sequences such as ``e**k``), the certificate
    carries the registered :class:`UltrametricRatio` metric and the
    outcome of checking the strong triangle inequality on every triple and
    both bi-Lipschitz bounds on every pair.
    """
    if not lam > 1:
        raise DomainError("lambda must exceed 1")
    if ps.has_infinity:
        raise DomainError("ratio sequences live in the finite plane")
    o = complex(o)
    z = ps.points
    r = np.abs(z - o)
    order = np.argsort(r, kind="stable")
    rs = r[order]
    if np.any(np.diff(rs) == 0):
        raise DomainError("tied distances from the basepoint: d_U is ill-defined")
    lower, upper = lam / (lam + 1), lam / (lam - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = rs[1:] / rs[:-1]
    min_ratio = float(ratios.min()) if len(ratios) else math.inf
    checked = bool(np.all(rs[1:] >= lam * rs[:-1] * (1 - rtol)))
    if not checked:
        return RatioSequenceCertificate(o, lam, False, lower, upper, tuple(order.tolist()),
                                        min_ratio)
    metric = UltrametricRatio(o, lam, tuple(z[order]))
    zs = z[order]
    d_u = np.where(np.eye(len(zs), dtype=bool), 0.0, np.maximum(rs[:, None], rs[None, :]))
    strong = strong_triangle_holds(d_u) if len(zs) <= 2000 else None
    d = np.abs(zs[:, None] - zs[None, :])
    off = ~np.eye(len(zs), dtype=bool)
    tol = 1e-12
    bilip = bool(np.all(lower * d[off] <= d_u[off] * (1 + tol)) and
                 np.all(d_u[off] <= upper * d[off] * (1 + tol)))
    return RatioSequenceCertificate(o, lam, True, lower, upper, tuple(order.tolist()),
                                    min_ratio, strong, bilip, metric)


def strong_triangle_holds(d: np.ndarray) -> bool:
    """Exact check of ``d(x, z) <= max(d(x, y), d(y, z))`` over all triples."""
    for y in range(len(d)):
        if np.any(d > np.maximum(d[:, y][:, None], d[y, :][None, :])):
            return False
    return True


def ratio_check_log(log_radii, lam: float) -> tuple:
    """Ratio test in log space, for radii too large to represent.

    Returns ``(passed, min_log_ratio)`` where the test is
    ``log r_{k+1} - log r_k >= log lam`` for consecutive entries.
    """
    lr = np.asarray(log_radii, dtype=float)
    steps = np.diff(lr)
    m = float(steps.min()) if len(steps) else math.inf
    return bool(m >= math.log(lam)), m


# -- covering exponent ------------------------------------------------------------


@dataclass(frozen=True)
class CoveringExponent:
    center: complex
    R: float
    radii: tuple
    counts: tuple
    s_hat: float

    def to_dict(self) -> dict:
        return jsonable(self)


def greedy_net_size(xy: np.ndarray, r: float, chunk: int = 4096) -> int:
    """Size of the greedy r-net built in index order.

    A point joins the net when no earlier net point lies within ``r``; the
    lowest index is always the first net point.  Balls of radius ``r``
    about the net cover every input point.  Work proceeds in chunks: points
    already covered by the net of earlier chunks are discarded with a
    KD-tree query, and only the rest go through the sequential test.
    """
    if len(xy) == 0:
        return 0
    net = np.empty((0, 2))
    r2 = r * r
    for start in range(0, len(xy), chunk):
        block = xy[start:start + chunk]
        if len(net):
            d, _ = cKDTree(net).query(block, distance_upper_bound=r * 2)
            block = block[~(d <= r)]
        fresh = np.empty((len(block), 2))
        m = 0
        for pt in block:
            if m == 0 or np.min(((fresh[:m] - pt) ** 2).sum(axis=1)) > r2:
                fresh[m] = pt
                m += 1
        net = np.concatenate([net, fresh[:m]])
    return len(net)


def covering_exponent(ps: PointSet2D, center: complex, R: float, r_list) -> CoveringExponent:
    """Fit ``log N(r) ~ s log(R / r)`` for greedy r-net counts inside ``B(center, R)``."""
    r_list = [float(r) for r in r_list]
    if len(r_list) < 2:
        raise DomainError("need at least two radii")
    if any(b >= a for a, b in zip(r_list, r_list[1:])):
        raise DomainError("radii must be strictly decreasing")
    if not r_list[0] < R:
        raise DomainError("radii must be smaller than R")
    if ps.has_infinity:
        raise DomainError("covering counts need finite points")
    z = ps.points
    inside = z[np.abs(z - center) <= R]
    xy = np.column_stack([inside.real, inside.imag])
    counts = [greedy_net_size(xy, r) for r in r_list]
    if min(counts) == 0:
        raise DomainError("no points inside B(center, R)")
    x = np.log(R / np.asarray(r_list))
    y = np.log(np.asarray(counts, dtype=float))
    slope = float(np.polyfit(x, y, 1)[0])
    if all(c == counts[0] for c in counts):
        slope = 0.0
    return CoveringExponent(complex(center), float(R), tuple(r_list), tuple(counts), slope)
