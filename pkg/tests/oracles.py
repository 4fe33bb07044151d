"""Independent reference computations used by the tests.

Everything here is deliberately naive: full distance matrices, explicit
loops, high-precision arithmetic.  None of it calls the package's own
distance or component code.
"""

from __future__ import annotations

import itertools
import math

import mpmath
import networkx as nx
import numpy as np


def euclid(a: complex, b: complex) -> float:
    return abs(complex(a) - complex(b))


def chordal(a: complex, b: complex) -> float:
    """Spherical distance computed on the unit-diameter sphere, infinity allowed."""
    def lift(z):
        if math.isinf(z.real) or math.isinf(z.imag):
            return np.array([0.0, 0.0, 1.0])
        d = 1 + abs(z) ** 2
        return np.array([z.real / d, z.imag / d, abs(z) ** 2 / d])
    return float(np.linalg.norm(lift(complex(a)) - lift(complex(b))))


def brute_components(points, s: float, dist=euclid) -> set:
    g = nx.Graph()
    g.add_nodes_from(range(len(points)))
    for i, j in itertools.combinations(range(len(points)), 2):
        if dist(points[i], points[j]) <= s:
            g.add_edge(i, j)
    return {frozenset(c) for c in nx.connected_components(g)}


def brute_diameter(points, dist=euclid) -> float:
    return max((dist(a, b) for a, b in itertools.combinations(points, 2)), default=0.0)


def run_partition(rng, n_points: int, n_blocks: int) -> tuple:
    """Random collinear points and a partition into contiguous runs."""
    x = np.sort(rng.uniform(0, 10, n_points))
    cuts = np.sort(rng.choice(np.arange(1, n_points), n_blocks - 1, replace=False))
    bounds = [0, *cuts.tolist(), n_points]
    blocks = [tuple(range(a, b)) for a, b in zip(bounds, bounds[1:])]
    return x.astype(complex), blocks


def log_abs_product(m, coeffs, alphas, z, dps=50) -> float:
    """``m log|z| + Re q(z) + sum log|1 - z/alpha|`` in high precision."""
    with mpmath.workdps(dps):
        z = mpmath.mpc(z)
        q = sum(mpmath.mpc(a) * z ** k for k, a in enumerate(coeffs))
        total = m * mpmath.log(abs(z)) + mpmath.re(q)
        for a in alphas:
            total += mpmath.log(abs(1 - z / mpmath.mpc(a)))
        return float(total)
