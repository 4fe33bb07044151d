import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nagata_lab.errors import DomainError
from nagata_lab.metric import (
    EUCLIDEAN,
    INFINITY,
    SPHERICAL,
    ChainStructure,
    Cover,
    PointSet2D,
    UltrametricRatio,
    diameter,
    distance,
    inversion,
    pairs_within,
    s_chain_components,
    verify_cover,
)

from oracles import brute_components, brute_diameter, chordal, run_partition

finite = st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)


# -- point sets -------------------------------------------------------------------


def test_duplicates_rejected():
    with pytest.raises(DomainError):
        PointSet2D(np.array([1 + 1j, 1 + 1j]))


def test_near_duplicates_within_relative_tolerance_rejected():
    with pytest.raises(DomainError):
        PointSet2D(np.array([1e6, 1e6 * (1 + 1e-14)], dtype=complex))


def test_csv_round_trip_with_infinity_and_labels():
    ps = PointSet2D(np.array([0.1 + 0.2j, INFINITY, -3.0]), labels=("a", "inf", "c"))
    back = PointSet2D.from_csv(ps.to_csv())
    assert np.array_equal(back.infinite_mask, ps.infinite_mask)
    assert np.array_equal(back.points[~back.infinite_mask], ps.points[~ps.infinite_mask])
    assert back.labels == ps.labels


def test_infinity_needs_spherical_metric():
    ps = PointSet2D(np.array([0, INFINITY]))
    assert diameter(ps, metric=SPHERICAL) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        diameter(ps, metric=EUCLIDEAN)


# -- spherical metric -----------------------------------------------------------


def test_spherical_examples():
    assert distance(0, INFINITY, SPHERICAL) == pytest.approx(1.0)
    assert distance(1, -1, SPHERICAL) == pytest.approx(1.0)
    assert distance(INFINITY, INFINITY, SPHERICAL) == 0.0


@given(finite, finite)
def test_spherical_matches_chordal_oracle(a, b):
    assert distance(a, b, SPHERICAL) == pytest.approx(chordal(a, b), abs=1e-12)


@given(finite.filter(lambda z: abs(z) > 1e-6), finite.filter(lambda z: abs(z) > 1e-6))
def test_inversion_is_spherical_isometry(a, b):
    d0 = distance(a, b, SPHERICAL)
    d1 = distance(inversion(a), inversion(b), SPHERICAL)
    assert d1 == pytest.approx(d0, rel=1e-9, abs=1e-12)


def test_inversion_swaps_zero_and_infinity():
    assert inversion(0) == INFINITY
    assert inversion(INFINITY) == 0


# -- ultrametric --------------------------------------------------------------------


def test_ultrametric_rejects_unregistered_points():
    u = UltrametricRatio(0, 2.0, (2, 4, 8))
    assert distance(2, 8, u) == 8
    with pytest.raises(DomainError):
        distance(2, 3, u)


# -- chain components ---------------------------------------------------------------


def test_components_small_example():
    dec = s_chain_components(PointSet2D(np.array([0, 1, 2, 10], dtype=complex)), 1.0)
    assert dec.components == ((0, 1, 2), (3,))
    assert dec.diameters == (2.0, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_components_match_brute_force(seed, s):
    rng = np.random.default_rng(seed)
    z = rng.uniform(0, 6, 40) + 1j * rng.uniform(0, 6, 40)
    got = {frozenset(c) for c in s_chain_components(PointSet2D(z), s).components}
    assert got == brute_components(z, s)


def test_components_collinear_match_brute_force():
    rng = np.random.default_rng(3)
    z = np.sort(rng.uniform(0, 20, 60)).astype(complex) * (1 + 1j)
    for s in (0.1, 0.5, 2.0):
        got = {frozenset(c) for c in s_chain_components(PointSet2D(z), s).components}
        assert got == brute_components(z, s)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 1.0))
def test_spherical_components_match_brute_force(seed, s):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=30) * 5 + 1j * rng.normal(size=30) * 5
    pts = np.append(z, INFINITY)
    got = {frozenset(c) for c in s_chain_components(PointSet2D(pts), s, SPHERICAL).components}
    assert got == brute_components(list(pts), s, chordal)


def test_ultrametric_components_are_prefix_plus_singletons():
    pts = tuple(2.0 ** k for k in range(1, 9))
    u = UltrametricRatio(0, 2.0, pts)
    dec = s_chain_components(PointSet2D(np.array(pts, dtype=complex)), 16, u)
    assert dec.components == ((0, 1, 2, 3), (4,), (5,), (6,), (7,))


def test_chain_structure_reuse_is_consistent():
    rng = np.random.default_rng(1)
    ps = PointSet2D(rng.normal(size=200) + 1j * rng.normal(size=200))
    cs = ChainStructure(ps)
    for s in (0.05, 0.2, 0.8):
        assert cs.components(s).components == s_chain_components(ps, s).components


def test_pairs_within_matches_brute_force():
    rng = np.random.default_rng(2)
    z = rng.uniform(0, 3, 80) + 1j * rng.uniform(0, 3, 80)
    got = {tuple(p) for p in pairs_within(PointSet2D(z), 0.4).tolist()}
    want = {(i, j) for i in range(80) for j in range(i + 1, 80) if abs(z[i] - z[j]) <= 0.4}
    assert got == want


def test_large_diameter_matches_brute_force():
    rng = np.random.default_rng(4)
    z = rng.normal(size=3000) + 1j * rng.normal(size=3000)
    d = diameter(PointSet2D(z))
    far = np.abs(z[:, None] - z[None, :]).max()
    assert d == far


def test_small_diameter_oracle():
    z = [0, 3 + 4j, 1j, -2]
    assert diameter(PointSet2D(np.array(z))) == pytest.approx(brute_diameter(z))


# -- covers ------------------------------------------------------------------------


def test_exponential_cover_is_multiplicity_one():
    ps = PointSet2D(np.array([2, 4, 8, 16, 32], dtype=complex))
    cover = Cover(((0, 1), (2,), (3,), (4,)), s=2.0, c=2.0)
    for mode in ("clique", "exact"):
        v = verify_cover(ps, cover, mode=mode)
        assert v.bounded and v.multiplicity_upper == 1 and v.witness is None


def test_cover_must_cover_every_point():
    ps = PointSet2D(np.array([0, 1, 2], dtype=complex))
    with pytest.raises(DomainError):
        verify_cover(ps, Cover(((0, 1),), s=1.0))


def test_multiplicity_witness_reported():
    ps = PointSet2D(np.array([0, 1, 2], dtype=complex))
    v = verify_cover(ps, Cover(((0,), (1,), (2,)), s=2.0, n_plus_1=2), mode="exact")
    assert v.multiplicity_upper == 3
    assert v.witness == (0, 1, 2)


def test_exact_mode_limits():
    ps = PointSet2D(np.arange(25, dtype=complex))
    with pytest.raises(DomainError):
        verify_cover(ps, Cover(tuple((i,) for i in range(25)), s=1.0), mode="exact")
    with pytest.raises(DomainError):
        verify_cover(PointSet2D(np.arange(3, dtype=complex)), Cover(((0, 1, 2),), 1.0),
                     SPHERICAL, mode="exact")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 15), st.floats(0.05, 2.0))
def test_clique_bound_exact_on_run_partitions(seed, n_blocks, s):
    rng = np.random.default_rng(seed)
    z, blocks = run_partition(rng, 40, n_blocks)
    cover = Cover(tuple(blocks), s=s, c=100.0)
    ps = PointSet2D(z)
    assert verify_cover(ps, cover).multiplicity_upper == verify_cover(ps, cover, mode="exact").multiplicity_upper


def test_clique_bound_is_upper_bound_in_general():
    # three blocks pairwise within s with no common small set: a triangle
    z = np.array([0, 1, 0.5 + 0.9j], dtype=complex)
    cover = Cover(((0,), (1,), (2,)), s=1.05)
    ps = PointSet2D(z)
    assert verify_cover(ps, cover).multiplicity_upper >= verify_cover(ps, cover, mode="exact").multiplicity_upper
