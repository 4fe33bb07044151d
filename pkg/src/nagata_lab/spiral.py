"""Polynomial spirals ``t**-p e^{i pi t}``, their thickened domains, and porosity.

``ray_gap_report`` does the interval bookkeeping along a ray from 0:
inside ``B(0, r0)`` the domain meets each ray in the intervals
``(a_k, b_k)``, and every gap between them is shorter than ``2 c r0``.
``porosity_estimate`` measures empty balls in sampled sets directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.spatial import cKDTree

from ._serialize import jsonable
from .errors import DomainError
from .metric import PointSet2D

ANGLE_SLACK = 1e-12


def spiral_point(t, p: float):
    t = np.asarray(t, dtype=float)
    return t ** (-p) * np.exp(1j * np.pi * t)


def spiral_sample(p: float, t_max: float, h_abs: float = math.inf, h_rel: float = 0.01,
                  t_min: float = 1.0) -> PointSet2D:
    """Points of the spiral for ``t`` in ``[t_min, t_max]`` with arc spacing ``min(h_abs, h_rel |z|)``.

    The ``t``-grid is obtained by inverting the cumulative point density
    ``speed(t) / spacing(t)``, so neighbouring points are about one target
    spacing apart along the curve.
    """
    if not p > 0:
        raise DomainError("p must be positive")
    if not t_max > t_min >= 1:
        raise DomainError("need 1 <= t_min < t_max")
    if not (h_rel > 0 and h_abs > 0):
        raise DomainError("spacings must be positive")

    def density(t):
        speed = t ** (-p) * np.sqrt(np.pi ** 2 + (p / t) ** 2)
        return speed / np.minimum(h_abs, h_rel * t ** (-p))

    grid = np.geomspace(t_min, t_max, 200_001)
    count = cumulative_trapezoid(density(grid), grid, initial=0.0)
    m = int(math.floor(count[-1]))
    t = np.interp(np.arange(m + 1), count, grid)
    t = np.unique(np.append(t, t_max))
    return PointSet2D(spiral_point(t, p))


@dataclass(frozen=True)
class SpiralParams:
    p: float
    c: float
    eps_angle: float
    k0: int
    r0: float


def spiral_constants(p: float, c: float, eps_angle: float = math.pi / 4) -> SpiralParams:
    """Least integer ``k0 >= max(3p/(4c), 2x/(1-x))`` with ``x = (1-2c)**(1/p)``, and ``r0 = (2 k0)**-p``."""
    if not p > 0:
        raise DomainError("p must be positive")
    if not 0 < c < 0.5:
        raise DomainError("porosity constant c must lie in (0, 1/2)")
    if not 0 < eps_angle < math.pi / 2:
        raise DomainError("angular half-width must lie in (0, pi/2)")
    x = (1 - 2 * c) ** (1 / p)
    m = max(3 * p / (4 * c), 2 * x / (1 - x))
    # values within rounding of an integer count as that integer
    k0 = max(1, math.ceil(m - 1e-9 * max(1.0, m)))
    return SpiralParams(p=p, c=c, eps_angle=eps_angle, k0=k0, r0=(2 * k0) ** (-p))


def in_spiral_domain(z, p: float, eps_angle: float):
    """Membership in ``{t**-p e^{i pi t} e^{i theta} : t > 1, |theta| < eps}``.

    ``t`` is recovered from the modulus; the angular offset is reduced to
    ``(-pi, pi]``, which is unambiguous because ``eps < pi/2``.
    """
    z = np.asarray(z, dtype=np.complex128)
    r = np.abs(z)
    with np.errstate(divide="ignore"):
        t = r ** (-1 / p)
    theta = np.angle(z) - np.pi * np.where(np.isfinite(t), t, 0.0)
    theta = (theta + np.pi) % (2 * np.pi) - np.pi
    out = (r > 0) & (r < 1) & (np.abs(theta) < eps_angle - ANGLE_SLACK)
    return out if out.ndim else bool(out)


@dataclass(frozen=True)
class RayGapReport:
    alpha: float
    k: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    gaps: np.ndarray = field(repr=False)  # b_k - a_{k+1} for k0 < k < k_max
    outer_gap: float = 0.0  # r0 - a_{k0+1}
    max_gap: float = 0.0
    bound: float = 0.0  # 2 c r0
    passed: bool = False
    chain_ok: bool = False  # b_k - a_{k+1} <= 3p (2k - 3/2)**(-p-1) for every computed k
    margin: float = 0.0  # 1 - max_gap / bound

    def rows(self):
        """``(alpha, k, a_k, b_k, gap, bound, pass)`` rows; gap is ``b_k - a_{k+1}``."""
        gap_of = dict(zip(self.k[1:-1].tolist(), self.gaps.tolist()))
        for k, a, b in zip(self.k.tolist(), self.a.tolist(), self.b.tolist()):
            g = gap_of.get(k, math.nan)
            yield (self.alpha, k, a, b, g, self.bound, self.passed)


def ray_gap_report(params: SpiralParams, alpha: float, k_max: int) -> RayGapReport:
    if not -math.pi <= alpha < math.pi:
        raise DomainError("alpha must lie in [-pi, pi)")
    if not k_max > params.k0 + 1:
        raise DomainError("k_max must exceed k0 + 1")
    p, eps = params.p, params.eps_angle
    k = np.arange(params.k0, k_max + 1)
    a = (2 * k + (alpha + eps) / math.pi) ** (-p)
    b = (2 * k + (alpha - eps) / math.pi) ** (-p)
    gaps = b[1:-1] - a[2:]  # k = k0+1 .. k_max-1
    outer = params.r0 - a[1]
    max_gap = float(max(gaps.max(initial=-math.inf), outer))
    bound = 2 * params.c * params.r0
    chain = bool(np.all(gaps <= 3 * p * (2 * k[1:-1] - 1.5) ** (-p - 1)))
    return RayGapReport(alpha=alpha, k=k, a=a, b=b, gaps=gaps, outer_gap=float(outer),
                        max_gap=max_gap, bound=bound, passed=bool(max_gap < bound),
                        chain_ok=chain, margin=1 - max_gap / bound)


@dataclass(frozen=True)
class PorosityEstimate:
    center: complex
    R: float
    probe_radii: tuple
    probe_centers: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)  # shape (n_centers, n_radii)
    c_hat: float = 0.0

    def to_dict(self) -> dict:
        return jsonable({"center": self.center, "R": self.R, "probe_radii": self.probe_radii,
                         "n_probes": len(self.probe_centers), "c_hat": self.c_hat})


def hex_disk(step: float) -> np.ndarray:
    """Hexagonal lattice points of spacing ``step`` inside the closed unit disk."""
    n = int(math.ceil(1 / step)) + 1
    i, j = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    z = step * (i + 0.5 * j) + 1j * step * (math.sqrt(3) / 2) * j
    z = z.ravel()
    return z[np.abs(z) <= 1]


def porosity_estimate(ps: PointSet2D, center: complex, R: float, probe_radii,
                      probe_centers=None, max_probes: int = 256,
                      candidate_step: float = 1 / 16) -> PorosityEstimate:
    """Smallest best-empty-ball ratio over probe balls ``B(x, r)``.

    For each probe ball the candidates ``z`` form a hexagonal grid of
    spacing ``candidate_step * r`` in ``B(x, r)``; the empty radius of ``z``
    is ``min(dist(z, E), r - |z - x|)``.  Probe centres default to the set
    points inside ``B(center, R)``, thinned by a fixed stride to at most
    ``max_probes``.
    """
    radii = tuple(float(r) for r in probe_radii)
    if not radii or min(radii) <= 0:
        raise DomainError("probe radii must be a nonempty list of positive numbers")
    if ps.has_infinity:
        raise DomainError("porosity needs finite points")
    z = ps.points
    if probe_centers is None:
        inside = z[np.abs(z - center) <= R]
        if len(inside) == 0:
            raise DomainError("no points inside the window")
        stride = max(1, math.ceil(len(inside) / max_probes))
        probe_centers = inside[::stride]
    probe_centers = np.asarray(probe_centers, dtype=np.complex128).ravel()
    if len(probe_centers) == 0:
        raise DomainError("no probe centres")
    tree = cKDTree(np.column_stack([z.real, z.imag]))
    unit = hex_disk(candidate_step)
    ratios = np.empty((len(probe_centers), len(radii)))
    for j, r in enumerate(radii):
        offs = unit * r
        for i, x in enumerate(probe_centers):
            cand = x + offs
            d, _ = tree.query(np.column_stack([cand.real, cand.imag]))
            empty = np.minimum(d, r - np.abs(offs))
            ratios[i, j] = max(0.0, float(empty.max())) / r
    return PorosityEstimate(complex(center), float(R), radii, probe_centers, ratios,
                            float(ratios.min()))
