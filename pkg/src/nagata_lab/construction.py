"""Sets whose Nagata dimension drops from one to zero under a genus-one product.

Pipeline: annuli ``D_n`` with scales ``s_n = c_A**n``; covers of the zero set
at scale ``s_n`` thickened by ``eps * s_n``; admissible gaps on the positive
real axis; arithmetic patches of spacing ``delta`` in those gaps; and a
ratio certificate showing ``|F(z_{k+1}) / F(z_k)|`` eventually stays above
some ``Lambda > 1``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._serialize import jsonable
from .complex_maps import (
    Explicit,
    Genus1Function,
    Geometric,
    log_abs_F,
    radial_growth_constants,
)
from .dimension import exp_sequence_cover
from .errors import CapabilityError, ConstructionError, DomainError
from .metric import PointSet2D, diameter, s_chain_components

SLACK = 1e-12
J_SEARCH_CAP = 1_000_000


@dataclass(frozen=True)
class ConstructionParams:
    f: Genus1Function
    c_A: float
    epsilon: float
    delta: float
    n_range: tuple | None = None  # inclusive (n_min, n_max); None = first two annuli past max(n_q, N_A)
    admissibility: str = "per-block"  # or "global"
    max_points: int = 5_000_000

    def __post_init__(self):
        if not self.c_A > 1:
            raise DomainError("c_A must exceed 1")
        if not 0 < self.epsilon < 1e-2:
            raise DomainError("epsilon must lie in (0, 0.01)")
        if not 0 < self.delta < self.c_A:
            raise DomainError("delta must lie in (0, c_A)")
        if self.admissibility not in ("per-block", "global"):
            raise DomainError("admissibility is 'per-block' or 'global'")
        if self.n_range is not None:
            lo, hi = self.n_range
            if not (1 <= lo <= hi):
                raise DomainError("n_range must satisfy 1 <= n_min <= n_max")
        radial_growth_constants(self.f.q)  # rejects a bad leading coefficient early

    @property
    def zeros(self):
        return self.f.zeros

    def inner(self, n):
        return 4 / (self.c_A - 1) * self.c_A ** (np.asarray(n, dtype=float) + 2)

    def outer(self, n):
        # equal to c_A * inner(n), written so consecutive annuli tile exactly
        return self.inner(np.asarray(n) + 1)

    def s(self, n):
        return self.c_A ** np.asarray(n, dtype=float)


# -- schedule ------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnulusSchedule:
    n_values: tuple
    inner: tuple
    outer: tuple
    s: tuple
    R0: float
    c0: float
    n_q: int
    J_A: int
    N_A: int
    tail_target: float
    in_regime: tuple  # per n: n > max(n_q, N_A), where every estimate applies

    def to_dict(self) -> dict:
        return jsonable(self)


def annulus_index(params: ConstructionParams, r) -> np.ndarray:
    """``n`` with ``inner(D_n) <= r < outer(D_n)``; 0 below ``D_1``."""
    r = np.asarray(r, dtype=float)
    base = float(params.inner(1))
    with np.errstate(divide="ignore"):
        n = np.floor(np.log(np.maximum(r, base) / base) / math.log(params.c_A)).astype(np.int64) + 1
    n = np.where(r < params.inner(n), n - 1, n)
    n = np.where(r >= params.outer(n), n + 1, n)
    return np.where(r < base, 0, n)


def build_schedule(params: ConstructionParams) -> AnnulusSchedule:
    """Annuli over ``n_range`` with the thresholds ``n_q``, ``J_A`` and ``N_A``.

    ``J_A`` is the least ``J`` with ``T(J + 1)`` below
    ``(eps d a_d / 16) (c_A - 1) / (c_A**2 (c_A**2 + eps))``; ``N_A`` is the
    least ``n >= 1`` whose inner radius exceeds ``|alpha_{J_A + 1}|``.
    """
    q, zeros, c, eps = params.f.q, params.zeros, params.c_A, params.epsilon
    rg = radial_growth_constants(q)
    d, a_d = q.degree, q.leading.real
    target = eps * d * a_d / 16 * (c - 1) / (c ** 2 * (c ** 2 + eps))
    J_A = _least_tail_index(zeros, target)
    if isinstance(zeros, Explicit) and zeros.finite and J_A + 1 > len(zeros.values):
        r_next = 0.0
    else:
        r_next = float(np.abs(zeros.alpha(J_A + 1)))
    N_A = 1
    while not params.inner(N_A) > r_next:
        N_A += 1
    n_q = max(1, int(annulus_index(params, rg.R0)))
    start = max(n_q, N_A) + 1
    lo, hi = params.n_range if params.n_range is not None else (start, start + 1)
    ns = tuple(range(lo, hi + 1))
    return AnnulusSchedule(
        n_values=ns,
        inner=tuple(float(params.inner(n)) for n in ns),
        outer=tuple(float(params.outer(n)) for n in ns),
        s=tuple(float(params.s(n)) for n in ns),
        R0=rg.R0, c0=rg.c0, n_q=n_q, J_A=J_A, N_A=N_A, tail_target=target,
        in_regime=tuple(n > max(n_q, N_A) for n in ns),
    )


def _least_tail_index(zeros, target: float) -> int:
    if not zeros.tail(J_SEARCH_CAP + 1) <= target:
        raise CapabilityError("tail inequality unsatisfiable within 10**6 terms")
    lo, hi = 0, 1
    while not zeros.tail(hi + 1) <= target:
        lo, hi = hi, hi * 2
    while lo < hi:
        mid = (lo + hi) // 2
        if zeros.tail(mid + 1) <= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


# -- covers and intervals ----------------------------------------------------------


def zero_blocks(params: ConstructionParams, n: int) -> list:
    """A ``c_A s_n``-bounded, ``s_n``-disjoint cover of the zeros that can reach ``D_n``.

    Geometric zeros use the exponential-sequence cover; other zero sets use
    ``s_n``-chain components of a prefix, which are ``s_n``-disjoint by
    construction and whose diameters are checked against ``c_A s_n``.
    """
    zeros, s = params.zeros, float(params.s(n))
    reach = float(params.outer(n)) + params.epsilon * s
    if isinstance(zeros, Geometric):
        count = zeros.count_below(reach) + 1
        values = zeros.alpha(np.arange(1, count + 1)).astype(np.complex128)
        cover = exp_sequence_cover(zeros.lam, count, s)
        blocks = [values[list(b)] for b in cover.blocks]
    else:
        margin = reach + (params.c_A + 1) * s
        if isinstance(zeros, Explicit):
            values = np.asarray([a for a in zeros.values if abs(a) <= margin], dtype=np.complex128)
            if not zeros.finite and len(values) == len(zeros.values):
                raise CapabilityError("listed zeros end before the annulus is covered")
        else:
            count = zeros.count_below(margin) + 1
            values = np.asarray(zeros.alpha(np.arange(1, count + 1)), dtype=np.complex128)
        if len(values) == 0:
            return []
        ps = PointSet2D(values)
        dec = s_chain_components(ps, s)
        blocks = [values[list(comp)] for comp in dec.components
                  if np.min(np.abs(values[list(comp)])) <= reach]
    for b in blocks:
        if diameter(PointSet2D(b)) > params.c_A * s * (1 + SLACK):
            raise ConstructionError(f"a cover block at n={n} exceeds diameter c_A s_n; raise c_A")
    return blocks


def _block_trace(block: np.ndarray, rho: float) -> list:
    """``N_rho(block)`` intersected with the real axis, as merged open intervals."""
    iv = []
    for a in block:
        if abs(a.imag) < rho:
            w = math.sqrt(rho * rho - a.imag * a.imag)
            iv.append((a.real - w, a.real + w))
    return _merge(iv)


def _merge(iv: list) -> list:
    out = []
    for lo, hi in sorted(iv):
        if out and lo < out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def _traces(params: ConstructionParams, n: int) -> list:
    rho = params.epsilon * float(params.s(n))
    return [t for t in (_block_trace(b, rho) for b in zero_blocks(params, n)) if t]


def thickened_real_blocks(params: ConstructionParams, n: int) -> list:
    """Open intervals of ``(union of thickened blocks) n D_n n R+``."""
    lo, hi = float(params.inner(n)), float(params.outer(n))
    pieces = [(max(a, lo), min(b, hi)) for t in _traces(params, n) for a, b in t]
    return [p for p in _merge(pieces) if p[1] > p[0]]


@dataclass(frozen=True)
class AdmissibleIntervals:
    n: int
    s_n: float
    intervals: tuple  # closed (a, b)
    lengths: tuple
    n_candidates: int
    n_inadmissible: int
    n_short: int

    def to_dict(self) -> dict:
        return jsonable(self)


def admissible_intervals(params: ConstructionParams, n: int) -> AdmissibleIntervals:
    """Closed gaps of ``D_n n R+`` between thickened blocks that pass admissibility.

    A gap ``[a, b]`` is admissible when every thickened block misses
    ``(-inf, a]`` or misses ``[b, inf)``; with ``admissibility="global"``
    one side must work for all blocks at once.  Gaps shorter than
    ``s_n (1 - 2 eps)``, which only arise against the annulus boundary,
    are dropped.
    """
    s = float(params.s(n))
    lo, hi = float(params.inner(n)), float(params.outer(n))
    traces = _traces(params, n)
    covered = _merge([(max(a, lo), min(b, hi)) for t in traces for a, b in t if b > lo and a < hi])
    gaps, cur = [], lo
    for a, b in covered:
        if a > cur:
            gaps.append((cur, a))
        cur = max(cur, b)
    if hi > cur:
        gaps.append((cur, hi))

    spans = [(t[0][0], t[-1][1]) for t in traces]
    keep, bad, short = [], 0, 0
    for a, b in gaps:
        tol = SLACK * max(1.0, abs(b))
        avoid_left = [l >= a - tol for l, _ in spans]
        avoid_right = [r <= b + tol for _, r in spans]
        if params.admissibility == "per-block":
            ok = all(x or y for x, y in zip(avoid_left, avoid_right))
        else:
            ok = all(avoid_left) or all(avoid_right)
        if not ok:
            bad += 1
        elif b - a < s * (1 - 2 * params.epsilon) * (1 - SLACK):
            short += 1
        else:
            keep.append((a, b))
    if not keep:
        raise ConstructionError(f"no admissible interval in D_{n}")
    return AdmissibleIntervals(n=n, s_n=s, intervals=tuple(keep),
                               lengths=tuple(b - a for a, b in keep), n_candidates=len(gaps),
                               n_inadmissible=bad, n_short=short)


# -- patches -----------------------------------------------------------------------


@dataclass(frozen=True)
class Patches:
    points: PointSet2D
    x: np.ndarray = field(repr=False)  # real coordinates, increasing
    annulus: np.ndarray = field(repr=False)
    interval: np.ndarray = field(repr=False)  # global interval id
    M: dict = field(default_factory=dict)  # n -> longest patch in D_n
    intervals: tuple = ()


def patch_points(a: float, b: float, eps_s: float, delta: float) -> np.ndarray:
    """``a + eps_s + m delta`` for ``m = 1 .. floor((b - a - eps_s) / delta)``."""
    count = int(math.floor((b - a - eps_s) / delta))
    if count <= 0:
        return np.empty(0)
    return a + eps_s + delta * np.arange(1, count + 1)


def place_patches(params: ConstructionParams, intervals: list) -> Patches:
    """Arithmetic patches of spacing ``delta`` in each admissible interval."""
    xs, ann, ids, M, flat = [], [], [], {}, []
    total = 0
    for fam in sorted(intervals, key=lambda f: f.n):
        eps_s = params.epsilon * fam.s_n
        M[fam.n] = 0
        for a, b in fam.intervals:
            pts = patch_points(a, b, eps_s, params.delta)
            total += len(pts)
            if total > params.max_points:
                raise CapabilityError(f"more than {params.max_points} patch points; shrink n_range")
            M[fam.n] = max(M[fam.n], len(pts))
            if len(pts):
                xs.append(pts)
                ann.append(np.full(len(pts), fam.n))
                ids.append(np.full(len(pts), len(flat)))
            flat.append((fam.n, a, b))
    if not xs:
        raise ConstructionError("no patch points placed")
    x = np.concatenate(xs)
    order = np.argsort(x, kind="stable")
    x = x[order]
    return Patches(points=PointSet2D(x.astype(np.complex128)), x=x,
                   annulus=np.concatenate(ann)[order], interval=np.concatenate(ids)[order],
                   M=M, intervals=tuple(flat))


# -- ratio certificate ----------------------------------------------------------


@dataclass(frozen=True)
class RatioCertificate:
    z: np.ndarray = field(repr=False)
    L: np.ndarray = field(repr=False)  # log|F(z_{k+1})| - log|F(z_k)|
    gap: np.ndarray = field(repr=False)
    case: np.ndarray = field(repr=False)  # gap type 1, 2 or 3; 1 is Case I
    n: np.ndarray = field(repr=False)
    J: np.ndarray = field(repr=False)
    log_E: np.ndarray = field(repr=False)
    log_Q1: np.ndarray = field(repr=False)
    log_Q2: np.ndarray = field(repr=False)
    floor: np.ndarray = field(repr=False)
    trichotomy_ok: np.ndarray = field(repr=False)
    point_annulus: np.ndarray = field(repr=False)
    eval_error: float = 0.0  # bound on |error in L_k| from truncation
    K: int | None = None
    n_K: int | None = None
    Lambda: float | None = None
    Lambda_floor_I: float | None = None
    Lambda_floor_II: float | None = None
    offending: tuple = ()

    @property
    def passed(self) -> bool:
        return self.K is not None and self.Lambda is not None and self.Lambda > 1

    def pruned(self) -> np.ndarray:
        """``X = X_tilde n D_{>= n_K}``."""
        if self.n_K is None:
            return np.empty(0)
        return self.z[self.point_annulus >= self.n_K]

    def summary(self) -> dict:
        case1 = self.case == 1
        return jsonable({
            "n_pairs": len(self.L), "K": self.K, "n_K": self.n_K, "Lambda": self.Lambda,
            "log_Lambda": None if self.Lambda is None else math.log(self.Lambda),
            "Lambda_floor_I": self.Lambda_floor_I, "Lambda_floor_II": self.Lambda_floor_II,
            "n_case_I": int(case1.sum()), "n_case_II": int((~case1).sum()),
            "floors_respected": bool(np.all(self.L >= self.floor - 1e-6)),
            "trichotomy_ok": bool(np.all(self.trichotomy_ok)),
            "eval_error": self.eval_error, "n_offending": len(self.offending),
        })


def ratio_certificate(params: ConstructionParams, patches: Patches,
                      schedule: AnnulusSchedule | None = None) -> RatioCertificate:
    """Consecutive log-ratios of ``|F|`` along the patches, with rigorous lower bounds.

    Every floor is a rigorous lower bound for ``L_k``.  Case I (gap
    ``delta`` inside one interval) uses ``c0 delta``,
    ``(J+1) log(1 - delta/(eps s_n))`` and the tail term
    ``-kappa (delta/lam) T(J+1)`` with ``lam = 1/c_A - 1/c_A**2``.  Case II
    uses ``c0 eps s_n``, ``-theta (J+1)`` with ``theta = log(3 c_A**2 / eps)``
    and ``-kappa gamma s_n T(J+1)`` with ``gamma = (2 c_A**2 + 2 eps)/lam``.
    ``kappa = 2`` when every neglected ratio is at most one half.  When the
    gap is wider than ``(2 c_A**2 + 2 eps) s_n``, the floor falls back to
    the same bounds with the observed gap.  Floors are ``-inf`` where a
    bound does not apply (``z_k < R0`` or ``delta >= eps s_n``).
    """
    sched = schedule or build_schedule(params)
    zeros, c, eps, delta = params.zeros, params.c_A, params.epsilon, params.delta
    x = patches.x
    if len(x) < 2:
        raise ConstructionError("need at least two points")
    tol = 1e-8 * delta
    ev = log_abs_F(params.f, x.astype(np.complex128), tol)
    L = np.diff(ev.value)
    eval_error = float(np.max(ev.tail_bound[1:] + ev.tail_bound[:-1]))
    h = np.diff(x)
    n = patches.annulus[:-1]
    s_n = params.s(n)
    same_iv = patches.interval[1:] == patches.interval[:-1]
    same_n = patches.annulus[1:] == patches.annulus[:-1]
    case = np.where(same_iv, 1, np.where(same_n, 2, 3))

    ns = np.unique(n)
    J_of = {int(m): zeros.count_below(float(params.inner(m + 2))) + 1 for m in ns}
    J = np.asarray([J_of[int(m)] for m in n], dtype=np.int64)
    T = np.asarray(zeros.tail(J + 1), dtype=float)
    a_next = {int(m): _alpha_mod(zeros, J_of[int(m)] + 2) for m in ns}
    A2 = np.asarray([a_next[int(m)] for m in n])

    lam = 1 / c - 1 / c ** 2
    theta = math.log(3 * c ** 2 / eps)
    gamma = (2 * c ** 2 + 2 * eps) / lam
    c0, R0 = sched.c0, sched.R0
    tol_n = 1e-9 * s_n
    wide = h <= (2 * c ** 2 + 2 * eps) * s_n + tol_n

    with np.errstate(divide="ignore", invalid="ignore"):
        # Case I
        q1_base = 1 - delta / (eps * s_n)
        logE1 = np.full(len(h), c0 * delta)
        logQ1_1 = np.where(q1_base > 0, (J + 1) * np.log(np.where(q1_base > 0, q1_base, 1)), -np.inf)
        g1 = np.full(len(h), delta / lam)
        # Case II
        logE2 = c0 * np.minimum(eps * s_n, h)
        theta_k = np.where(wide, theta, np.maximum(theta, np.log1p(h / (eps * s_n))))
        logQ1_2 = -theta_k * (J + 1)
        g2 = np.where(wide, gamma * s_n, h / lam)

        is1 = case == 1
        g = np.where(is1, g1, g2)
        w_max = g / A2
        kappa = np.where(w_max <= 0.5, 2.0, 1 / (1 - w_max))
        logQ2 = np.where(w_max < 1, -kappa * g * T, -np.inf)
        logE = np.where(is1, logE1, logE2)
        logQ1 = np.where(is1, logQ1_1, logQ1_2)
        floor = logE + logQ1 + logQ2
    floor = np.where(x[:-1] >= R0, floor, -np.inf)
    floor = np.where(np.isnan(floor), -np.inf, floor)

    trich = np.where(
        case == 1, np.abs(h - delta) <= tol_n,
        np.where(case == 2,
                 (h >= eps * s_n - tol_n) & (h <= (c + 2 * eps) * s_n + tol_n),
                 (h >= eps * s_n - tol_n) & (h <= (2 * c ** 2 + 2 * eps) * s_n + tol_n)))

    bad = np.flatnonzero(L <= 0)
    K = n_K = Lam = lam_I = lam_II = None
    if len(bad) < len(L):
        k_least = int(bad[-1]) + 1 if len(bad) else 0
        n_K = int(patches.annulus[k_least])
        if k_least > 0 and patches.annulus[k_least - 1] == n_K:
            n_K += 1
        starts = np.flatnonzero(patches.annulus[:-1] >= n_K)
        if len(starts):
            K = int(starts[0])
            sel1 = case[K:] == 1
            with np.errstate(over="ignore"):  # huge ratios report as inf
                Lam = float(np.exp(L[K:].min()))
                if sel1.any():
                    lam_I = float(np.exp(floor[K:][sel1].min()))
                if (~sel1).any():
                    lam_II = float(np.exp(floor[K:][~sel1].min()))
        else:
            n_K = None
    cert = RatioCertificate(z=x, L=L, gap=h, case=case, n=n, J=J, log_E=logE, log_Q1=logQ1,
                            log_Q2=logQ2, floor=floor, trichotomy_ok=trich,
                            point_annulus=patches.annulus, eval_error=eval_error,
                            K=K, n_K=n_K, Lambda=Lam, Lambda_floor_I=lam_I, Lambda_floor_II=lam_II,
                            offending=tuple(int(k) for k in bad))
    return cert


def _alpha_mod(zeros, j: int) -> float:
    if isinstance(zeros, Explicit) and j > len(zeros.values):
        if zeros.finite:
            return math.inf
        return 1 / zeros.tail_bound if zeros.tail_bound else math.inf
    return float(np.abs(zeros.alpha(j)))


# -- checks on the output ------------------------------------------------------------


def zero_clearance(params: ConstructionParams, patches: Patches) -> float:
    """``min |alpha - z| / (eps s_{n(z)})`` over the placed points; at least 1 by design."""
    zeros = params.zeros
    x = patches.x
    if isinstance(zeros, Explicit):
        alphas = np.asarray(zeros.values, dtype=np.complex128)
    else:
        top = float(x.max()) * 2 + 1
        alphas = np.asarray(zeros.alpha(np.arange(1, zeros.count_below(top) + 2)), dtype=np.complex128)
    tree = cKDTree(np.column_stack([alphas.real, alphas.imag]))
    d, _ = tree.query(np.column_stack([x, np.zeros_like(x)]))
    return float(np.min(d / (params.epsilon * params.s(patches.annulus))))


def alpha_separation_ok(params: ConstructionParams, cert: RatioCertificate, sample: int = 2000,
                        extra: int = 40) -> bool:
    """``|alpha_j - z_k| >= (1/c_A - 1/c_A**2) |alpha_j|`` for ``j >= J(k)`` on a sample of ``k``."""
    lam = 1 / params.c_A - 1 / params.c_A ** 2
    ks = np.unique(np.linspace(0, len(cert.L) - 1, min(sample, len(cert.L))).astype(int))
    for k in ks:
        j = np.arange(cert.J[k], cert.J[k] + extra)
        a = params.zeros.alpha(j)
        if np.any(np.abs(a - cert.z[k]) < lam * np.abs(a) * (1 - SLACK)):
            return False
    return True


# -- pipeline and output -----------------------------------------------------------


@dataclass
class ConstructionRun:
    params: ConstructionParams
    schedule: AnnulusSchedule
    intervals: list
    patches: Patches
    certificate: RatioCertificate

    def to_dict(self) -> dict:
        return {
            "params": {"f": self.params.f.to_text(), "c_A": self.params.c_A,
                       "epsilon": self.params.epsilon, "delta": self.params.delta,
                       "n_range": [self.schedule.n_values[0], self.schedule.n_values[-1]],
                       "admissibility": self.params.admissibility},
            "schedule": self.schedule.to_dict(),
            "intervals": [{"n": f.n, "count": len(f.intervals), "min_length": min(f.lengths),
                           "n_candidates": f.n_candidates, "n_inadmissible": f.n_inadmissible,
                           "n_short": f.n_short} for f in self.intervals],
            "M": {str(k): v for k, v in self.patches.M.items()},
            "n_points": len(self.patches.x),
            "certificate": self.certificate.summary(),
        }


def run_construction(params: ConstructionParams) -> ConstructionRun:
    sched = build_schedule(params)
    fams = [admissible_intervals(params, n) for n in sched.n_values]
    patches = place_patches(params, fams)
    cert = ratio_certificate(params, patches, sched)
    return ConstructionRun(params, sched, fams, patches, cert)


def write_construction(run: ConstructionRun, out_dir: str) -> list:
    """Write ``construction.json``, ``X.csv`` (pruned set) and ``ratios.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    p = os.path.join(out_dir, "construction.json")
    with open(p, "w") as fh:
        json.dump(jsonable(run.to_dict()), fh, indent=2, sort_keys=True)
    paths.append(p)

    p = os.path.join(out_dir, "X.csv")
    X = run.certificate.pruned()
    with open(p, "w") as fh:
        fh.write("re,im\n")
        np.savetxt(fh, np.column_stack([X, np.zeros_like(X)]), fmt="%.17g", delimiter=",")
    paths.append(p)

    p = os.path.join(out_dir, "ratios.csv")
    c = run.certificate
    k = np.arange(len(c.L))
    with open(p, "w") as fh:
        fh.write("k,gap,case,L_k,floor\n")
        for row in zip(k.tolist(), c.gap.tolist(), c.case.tolist(), c.L.tolist(), c.floor.tolist()):
            fh.write(f"{row[0]},{row[1]:.17g},{'I' if row[2] == 1 else 'II'},{row[3]:.17g},{row[4]:.17g}\n")
    paths.append(p)
    return paths
