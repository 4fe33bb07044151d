import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nagata_lab.complex_maps import (
    Explicit,
    Genus1Function,
    Geometric,
    PolynomialSpec,
    Power,
    choose_truncation,
    counting_function,
    counting_sweep,
    cross_ratio,
    exp_preimage_sequence,
    increment_real_part,
    log_abs_F,
    log_abs_F_truncated,
    parse_zeros,
    radial_growth_constants,
    rational_unit_square,
)
from nagata_lab.errors import CapabilityError, DomainError, PoleError
from nagata_lab.metric import INFINITY, SPHERICAL

from oracles import log_abs_product

DEFAULT = Genus1Function.parse("m=1, q=0,1, zeros=geometric:2")


# -- polynomials ------------------------------------------------------------------------


@pytest.mark.parametrize("coeffs, C, R0, c0", [
    ((0, 1), 0.0, 1.0, 0.5),
    ((0, 0, 1), 0.0, 1.0, 1.0),
    ((0, 10, 1), 10.0, 10.0, 1.0),
    ((0, -10, 1), 10.0, 10.0, 1.0),
])
def test_growth_constants_examples(coeffs, C, R0, c0):
    g = radial_growth_constants(PolynomialSpec(coeffs))
    assert (g.C, g.R0, g.c0) == (C, R0, c0)
    assert g.violations == 0


def test_growth_needs_positive_real_leading_coefficient():
    with pytest.raises(DomainError):
        radial_growth_constants(PolynomialSpec((0, -1)))
    with pytest.raises(DomainError):
        radial_growth_constants(PolynomialSpec((0, 1j)))
    with pytest.raises(DomainError):
        PolynomialSpec((3, 0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4), st.floats(0.1, 5),
       st.floats(1.0, 50.0), st.floats(1e-3, 10.0))
def test_growth_inequality_holds_beyond_R0(lower, lead, t, h):
    q = PolynomialSpec((*lower, lead))
    g = radial_growth_constants(q, n_r=5, n_h=5)
    r = g.R0 * t
    lhs = increment_real_part(q, r, h)
    assert lhs >= g.c0 * r ** (q.degree - 1) * h * (1 - 1e-9)


def test_increment_matches_direct_difference():
    q = PolynomialSpec((1, -3, 0.5, 2))
    r, h = 3.0, 0.25
    assert increment_real_part(q, r, h) == pytest.approx((q(r + h) - q(r)).real, rel=1e-12)


def test_polynomial_text_round_trip():
    q = PolynomialSpec((1, 2 - 1j, 0, 3))
    assert PolynomialSpec.parse(q.to_text()) == q


# -- zero sets --------------------------------------------------------------------------


@pytest.mark.parametrize("zeros, R, n", [
    (Geometric(2), 10, 3),
    (Geometric(2), 8, 2),
    (Geometric(2), 2, 0),
    (Power(2), 10, 3),
    (Power(2), 9, 2),
    (Explicit((1, -2, 3j)), 3, 2),
])
def test_counting_examples(zeros, R, n):
    assert counting_function(zeros, R) == n


@settings(max_examples=60, deadline=None)
@given(st.floats(1.05, 10), st.floats(1.0, 1e12))
def test_geometric_count_matches_enumeration(lam, R):
    brute, j = 0, 1
    while lam ** j < R:
        brute, j = brute + 1, j + 1
    assert counting_function(Geometric(lam), R) == brute


@settings(max_examples=60, deadline=None)
@given(st.floats(1.1, 4), st.floats(0.5, 3), st.floats(1.0, 1e5))
def test_power_count_matches_enumeration(beta, scale, R):
    brute, j = 0, 1
    while scale * j ** beta < R:
        brute, j = brute + 1, j + 1
    assert counting_function(Power(beta, scale), R) == brute


def test_geometric_density_decreasing():
    sweep = counting_sweep(Geometric(2), t_max=30)
    assert sweep.decreasing
    assert sweep.counts[:4] == (0, 1, 2, 3)


def test_power_tail_dominates_sum():
    z = Power(2.0, 1.5)
    for J in (0, 1, 5, 50):
        exact = sum(1 / (1.5 * j ** 2) for j in range(J + 1, 200_000))
        assert exact <= float(z.tail(J))


def test_explicit_prefix_needs_tail_to_count_beyond():
    z = Explicit((1, 2, 4), tail_bound=0.25)
    assert counting_function(z, 3) == 2
    with pytest.raises(CapabilityError):
        counting_function(z, 10)


def test_parse_zeros():
    assert parse_zeros("geometric:3") == Geometric(3.0)
    assert parse_zeros("power:2:0.5") == Power(2.0, 0.5)
    assert parse_zeros("explicit:1|2j").values == (1 + 0j, 2j)
    with pytest.raises(DomainError):
        parse_zeros("lattice:1")


@pytest.mark.parametrize("text", [
    "m=1, q=0,1, zeros=geometric:2",
    "m=2, q=1,0,3, zeros=power:2.5:0.5",
    "m=1, q=0,1, zeros=explicit:2|-3|(4+1j), tail=0.1",
])
def test_function_text_round_trip(text):
    f = Genus1Function.parse(text)
    assert Genus1Function.parse(f.to_text()) == f


# -- log|F| -------------------------------------------------------------------------------


def test_log_abs_F_at_one_frozen():
    r = log_abs_F(DEFAULT, 1.0)
    # sum of log(1 - 2**-j) plus Re q(1) = 1; independent value at 50 digits
    oracle = log_abs_product(1, (0, 1), [2.0 ** j for j in range(1, 200)], 1.0)
    assert r.value == pytest.approx(-0.24206209481196, abs=1e-12)
    assert abs(r.value - oracle) <= r.tail_bound + 1e-14
    assert r.tail_bound < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 1e4), st.floats(0.01, math.pi))
def test_log_abs_F_within_tail_of_long_product(r, theta):
    z = r * complex(math.cos(theta), math.sin(theta))
    res = log_abs_F(DEFAULT, z, tol=1e-10)
    oracle = log_abs_product(1, (0, 1), [2.0 ** j for j in range(1, 120)], z)
    assert abs(res.value - oracle) <= res.tail_bound + 1e-12 * (1 + abs(oracle))


def test_log_abs_F_against_doubled_truncation():
    rng = np.random.default_rng(0)
    z = rng.uniform(-200, 200, 50) + 1j * rng.uniform(-200, 200, 50)
    res = log_abs_F(DEFAULT, z, tol=1e-9)
    for zi, v, t, J in zip(z, res.value, res.tail_bound, res.J_used):
        oracle = log_abs_F_truncated(DEFAULT, zi, 2 * int(J) + 10)
        assert abs(v - oracle) <= t + 1e-12 * (1 + abs(oracle))


def test_rounding_dominates_tiny_tolerance_on_large_values():
    f = Genus1Function.parse("m=2, q=0.5,-1,0.25, zeros=geometric:1.5")
    z = 280 + 5j
    r = log_abs_F(f, z, tol=1e-12)
    oracle = log_abs_F_truncated(f, z, 2 * r.J_used)
    ulp = math.ulp(abs(r.value))
    assert ulp > r.tail_bound
    assert abs(r.value - oracle) <= r.tail_bound + 4 * ulp


def test_truncation_is_least_admissible():
    zeros = Geometric(2)
    for r in (0.5, 3.0, 100.0, 1e5):
        J = int(choose_truncation(zeros, np.array([r]), 1e-10)[0])
        def ok(j):
            return 2 * r * zeros.tail(j) < 1e-10 and r <= 2.0 ** (j + 1) / 2
        assert ok(J)
        assert J == 0 or not ok(J - 1)


def test_conjugation_symmetry_for_real_data():
    f = Genus1Function.parse("m=2, q=0.5,1,0.25, zeros=power:2")
    z = np.array([1 + 2j, -3 + 0.5j, 10 - 7j])
    a = log_abs_F(f, z, tol=1e-4).value
    b = log_abs_F(f, np.conj(z), tol=1e-4).value
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_power_zeros_against_oracle():
    f = Genus1Function.parse("m=1, q=0,1, zeros=power:3")
    z = 5.5 + 2j
    res = log_abs_F(f, z, tol=1e-8)
    oracle = log_abs_product(1, (0, 1), [float(j) ** 3 for j in range(1, 20_000)], z, dps=30)
    # the oracle itself omits a tail below 2|z|/(2 * 20000**2)
    assert abs(res.value - oracle) <= res.tail_bound + 1e-7


def test_finite_explicit_product_is_exact():
    f = Genus1Function.parse("m=1, q=0,1, zeros=explicit:2|-3|4j")
    z = 1.5 - 0.5j
    res = log_abs_F(f, z)
    assert res.tail_bound == 0.0
    assert res.value == pytest.approx(log_abs_product(1, (0, 1), [2, -3, 4j], z), abs=1e-13)


def test_poles_raise():
    with pytest.raises(PoleError):
        log_abs_F(DEFAULT, 0)
    with pytest.raises(PoleError):
        log_abs_F(DEFAULT, 4.0)


def test_unreachable_tolerance_is_a_capability_error():
    f = Genus1Function.parse("m=1, q=0,1, zeros=explicit:2|3, tail=0.5")
    with pytest.raises(CapabilityError):
        log_abs_F(f, 1.0, tol=1e-6)


# -- exp preimages --------------------------------------------------------------------


def test_exp_preimage_branches_for_unit_targets():
    # Log 1 = 0 sits inside the first disk, so the first branch is k = 1
    pre = exp_preimage_sequence([1.0] * 6)
    assert pre.k == (1, 3, 7, 15, 31, 63)
    assert pre.doubling_exact()
    assert pre.max_rel_error() < 1e-30


def test_exp_preimage_escapes_and_maps_back():
    targets = rational_unit_square(200)
    pre = exp_preimage_sequence(targets)
    mods = np.abs(pre.points.points)
    assert np.all(mods[1:] >= 2 * mods[:-1])
    # radii are stored rounded, so compare allowing one rounding step
    assert all(float(m) >= r * (1 - 2 ** -52) for m, r in zip(pre.moduli_exact(), pre.radii))
    assert pre.max_rel_error() < 1e-30


def test_exp_preimage_rejects_zero():
    with pytest.raises(DomainError):
        exp_preimage_sequence([1, 0])


def test_rational_square_is_distinct_and_in_square():
    pts = rational_unit_square(300)
    assert len(set(pts)) == 300
    assert all(0 <= p.real <= 1 and 0 <= p.imag <= 1 and p != 0 for p in pts)


# -- cross ratios ---------------------------------------------------------------------


def test_cross_ratio_examples():
    assert cross_ratio(0, 1, -1, INFINITY, SPHERICAL) == pytest.approx(1.0)
    assert cross_ratio(0, 1, 2, 3) == pytest.approx(1 * 1 / (2 * 2))


def test_cross_ratio_swap_gives_reciprocal():
    x, a, b, c = 0.3j, 1.0, -2 + 1j, 4 - 1j
    assert cross_ratio(x, a, b, c) * cross_ratio(x, b, a, c) == pytest.approx(1.0)


def test_cross_ratio_metric_independent():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = rng.normal(size=4) * 3 + 1j * rng.normal(size=4) * 3
        e = cross_ratio(*p)
        s = cross_ratio(*p, metric=SPHERICAL)
        assert abs(e - s) <= 1e-12 * max(1.0, e)


def test_cross_ratio_needs_distinct_points():
    with pytest.raises(DomainError):
        cross_ratio(0, 0, 1, 2)
