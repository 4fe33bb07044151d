"""Acceptance criteria 1 to 9, each at its stated tolerance and runtime budget."""

import math

import numpy as np

from nagata_lab.complex_maps import (
    Genus1Function,
    PolynomialSpec,
    exp_preimage_sequence,
    log_abs_F,
    log_abs_F_truncated,
    radial_growth_constants,
    rational_unit_square,
)
from nagata_lab.construction import ConstructionParams, run_construction
from nagata_lab.dimension import (
    ScaleGrid,
    chain_growth_witness,
    covering_exponent,
    exp_sequence,
    exp_sequence_cover,
    ndim0_certificate,
    ratio_sequence_certificate,
)
from nagata_lab.harness import half_lattice, merge_close
from nagata_lab.metric import Cover, PointSet2D, s_chain_components, verify_cover
from nagata_lab.spiral import (
    porosity_estimate,
    ray_gap_report,
    spiral_constants,
    spiral_sample,
)

from oracles import brute_components, run_partition


def test_criterion_1_exponential_covers(criterion):
    rec = criterion(1, 1.0)
    ok, worst = True, 0
    for lam in (2.0, math.e, 5.0):
        ps = exp_sequence(lam, 30)
        for s in np.geomspace(1e-2, 1e8, 12):
            cover = exp_sequence_cover(lam, 30, float(s))
            v = verify_cover(ps, cover)
            ok &= cover.c == lam / (lam - 1) and v.bounded and v.exact and v.multiplicity_upper == 1
            worst = max(worst, v.multiplicity_upper)
    assert rec.finish(ok, f"3 lambdas x 12 scales, max multiplicity {worst}")


def test_criterion_2_ultrametric(criterion):
    rec = criterion(2, 1.0)
    ps = PointSet2D(np.array([2.0 ** k for k in range(1, 21)], dtype=complex))
    cert = ratio_sequence_certificate(ps, 0, 2.0, rtol=0.0)
    ok = cert.checked and cert.strong_triangle_ok is True and cert.bilipschitz_ok
    assert rec.finish(ok, f"strong triangle {cert.strong_triangle_ok}, "
                          f"bi-Lipschitz [{cert.biLip_lower:.4g}, {cert.biLip_upper:.4g}] "
                          f"{cert.bilipschitz_ok}")


def test_criterion_3_polynomial_constants(criterion):
    rec = criterion(3, 1.0)
    rng = np.random.default_rng(2024)
    violations = 0
    for _ in range(20):
        d = int(rng.integers(1, 6))
        lower = rng.normal(size=d) * 5 + 1j * rng.normal(size=d) * 5
        q = PolynomialSpec((*lower, rng.uniform(0.1, 3.0)))
        g = radial_growth_constants(q, n_r=50, n_h=20)
        assert g.grid_shape == (50, 20)
        violations += g.violations
    assert rec.finish(violations == 0, f"20 polynomials, {violations} grid violations")


def test_criterion_4_half_lattice(criterion):
    rec = criterion(4, 5.0)
    dom = half_lattice(40, 40)
    w = chain_growth_witness(dom, 1.0)
    top = max(w.diameters) if w else 0.0
    image, spread = merge_close(np.exp(dom.points))
    cert = ratio_sequence_certificate(PointSet2D(image), 0, math.e)
    ok = w is not None and top >= 39 and cert.checked and len(image) == 40
    assert rec.finish(ok, f"max chain diameter {top:g}, image of {len(image)} points "
                          f"certified at lambda = e: {cert.checked}")


def test_criterion_5_exp_preimages(criterion):
    rec = criterion(5, 5.0)
    pre = exp_preimage_sequence(rational_unit_square(200))
    x = pre.points.points
    doubling = bool(np.all(np.abs(x[1:]) >= 2 * np.abs(x[:-1]))) and pre.doubling_exact()
    err = pre.max_rel_error()
    nd = ndim0_certificate(pre.points, ScaleGrid(1.0, 512.0, 2.0), C_max=3.0)
    ok = doubling and err <= 1e-12 and nd.passed and len(nd.scales) == 10
    assert rec.finish(ok, f"doubling {doubling}, max rel error {err:.1e}, C = {nd.C:.4f}")


def test_criterion_6_construction(criterion):
    rec = criterion(6, 60.0)
    f = Genus1Function.parse("m=1, q=0,1, zeros=geometric:2")
    res = run_construction(ConstructionParams(f, 2.0, 1e-3, 1.0, n_range=(1, 14)))
    M = [res.patches.M[n] for n in sorted(res.patches.M)]
    a = all(b >= a for a, b in zip(M, M[1:])) and M[-1] >= 10 * M[0]
    c = res.certificate
    b = c.passed and bool(np.all(c.L[c.K:] >= math.log(c.Lambda)))
    floors = bool(np.all(c.L >= c.floor - 1e-6))
    assert rec.finish(a and b and floors,
                      f"(a) M {M[0]}..{M[-1]} {a}; (b) K = {c.K}, Lambda = {c.Lambda:.4f} {b}; "
                      f"(c) floors {floors}")


def test_criterion_7_ray_gaps(criterion):
    rec = criterion(7, 2.0)
    rng = np.random.default_rng(7)
    ok, margins = True, []
    for p, c in ((1, 0.1), (2, 0.05), (0.5, 0.2)):
        sp = spiral_constants(p, c)
        for alpha in rng.uniform(-math.pi, math.pi, 64):
            r = ray_gap_report(sp, float(alpha), sp.k0 + 2000)
            ok &= r.passed and r.chain_ok
            margins.append(r.margin)
    # strict inequality with at least 5% to spare
    ok &= min(margins) >= 0.05
    assert rec.finish(ok, f"192 rays, worst margin {min(margins):.3f}")


def test_criterion_8_porosity_trend(criterion):
    rec = criterion(8, 30.0)
    c_hats = []
    for k0 in (8, 16, 32):
        r0 = 1 / (2 * k0)
        ps = spiral_sample(1.0, 16 / (2 * r0), h_rel=0.004, t_min=1 / (2 * r0))
        z = ps.points
        pc = z[(np.abs(z) >= r0 / 2) & (np.abs(z) <= r0)]
        pc = pc[::max(1, len(pc) // 200)]
        c_hats.append(porosity_estimate(ps, 0, r0, [r0 / 4, r0 / 8], probe_centers=pc).c_hat)
    trend = all(b <= a for a, b in zip(c_hats, c_hats[1:]))

    r0 = 1 / 64
    radii = [r0 / 2 ** i for i in range(3, 8)]
    ps = spiral_sample(1.0, 8 / radii[-1], h_abs=radii[-1] / 4, h_rel=1.0, t_min=1 / (2 * r0))
    ce = covering_exponent(ps, 0, r0, radii)
    assert rec.finish(trend and ce.s_hat >= 1.5,
                      "c_hat " + ", ".join(f"{c:.4f}" for c in c_hats) + f"; s_hat = {ce.s_hat:.3f}")


def test_criterion_9_oracles(criterion):
    rec = criterion(9, 30.0)
    rng = np.random.default_rng(99)

    comp_ok = 0
    for _ in range(100):
        z = rng.uniform(0, 10, 50) + 1j * rng.uniform(0, 10, 50)
        s = float(rng.uniform(0.3, 2.5))
        got = {frozenset(c) for c in s_chain_components(PointSet2D(z), s).components}
        comp_ok += got == brute_components(z, s)

    cover_ok = 0
    for _ in range(50):
        z, blocks = run_partition(rng, 45, int(rng.integers(2, 16)))
        cover = Cover(tuple(blocks), s=float(rng.uniform(0.05, 2.0)), c=100.0)
        ps = PointSet2D(z)
        cover_ok += (verify_cover(ps, cover).multiplicity_upper
                     == verify_cover(ps, cover, mode="exact").multiplicity_upper)

    # the quadratic exponent reaches |log|F|| ~ 2e4, where one ulp is ~4e-12,
    # so its tolerance is set above float resolution
    fns = [(Genus1Function.parse("m=1, q=0,1, zeros=geometric:2"), 1e-12),
           (Genus1Function.parse("m=2, q=0.5,-1,0.25, zeros=geometric:1.5"), 1e-9)]
    eval_ok = 0
    for i in range(200):
        f, tol = fns[i % 2]
        z = complex(*rng.uniform(-300, 300, 2))
        r = log_abs_F(f, z, tol)
        oracle = log_abs_F_truncated(f, z, 2 * r.J_used)
        eval_ok += abs(r.value - oracle) <= r.tail_bound
    ok = comp_ok == 100 and cover_ok == 50 and eval_ok == 200
    assert rec.finish(ok, f"components {comp_ok}/100, covers {cover_ok}/50, "
                          f"log|F| {eval_ok}/200")
