import numpy as np
import pytest
from hypothesis import given, strategies as st

from floquet_lab.lattice import (
    HOP_OFFSETS,
    LatticeBox,
    Site,
    build_operator,
    diagonal,
    hopping,
    neighbors,
    parabola_points,
    resonant_sites,
)

sites_st = st.builds(
    Site,
    st.integers(min_value=-50, max_value=50),
    st.integers(min_value=-50, max_value=50),
)
small_boxes = st.builds(
    LatticeBox,
    st.builds(Site, st.integers(-5, 5), st.integers(-10, 10)),
    st.integers(0, 4),
    st.integers(0, 6),
)


@given(sites_st)
def test_diagonal(a):
    assert diagonal(a) == a.n + a.j**2


@given(sites_st, sites_st)
def test_hopping_symmetric_and_supported(a, b):
    assert hopping(a, b, 0.1) == hopping(b, a, 0.1)
    expected = 0.1 if (abs(a.j - b.j) == 1 and abs(a.n - b.n) == 1) else 0.0
    assert hopping(a, b, 0.1) == expected


@given(sites_st)
def test_neighbors_are_the_four_diagonal_offsets(a):
    nbs = neighbors(a)
    assert len(nbs) == 4
    assert {(b.j - a.j, b.n - a.n) for b in nbs} == set(HOP_OFFSETS)


@given(small_boxes)
def test_box_enumeration(box):
    ss = box.sites()
    assert len(ss) == box.site_count == len(set(ss))
    assert all(box.contains(s) for s in ss)
    # row-major: n ascending, then j
    assert ss == sorted(ss, key=lambda s: (s.n, s.j))


def test_from_ranges():
    box = LatticeBox.from_ranges(-3, 3, -10, 2)
    assert box.j_range() == (-3, 3)
    assert box.n_range() == (-10, 2)
    with pytest.raises(ValueError):
        LatticeBox.from_ranges(-3, 4, 0, 2)


def test_boundary_sites():
    box = LatticeBox.square(Site(0, 0), 2)
    rim = box.boundary_sites()
    assert len(rim) == 25 - 9
    assert all(max(abs(s.j), abs(s.n)) == 2 for s in rim)


@given(small_boxes, st.floats(min_value=0.0, max_value=0.2))
def test_operator_symmetric_with_correct_stencil(box, delta):
    op = build_operator(box, delta)
    M = op.dense()
    assert np.array_equal(M, M.T)
    assert np.array_equal(np.diag(M), [diagonal(s) for s in op.sites])
    off = M - np.diag(np.diag(M))
    assert set(np.unique(off)) <= {0.0, delta}
    # at most four hops per row
    assert np.count_nonzero(off, axis=1).max(initial=0) <= 4


@given(small_boxes)
def test_matrix_free_apply_matches_assembled(box):
    op = build_operator(box, 0.13)
    rng = np.random.default_rng(7)
    v = rng.standard_normal(op.dim)
    np.testing.assert_allclose(op.apply(v), op.apply_matrix_free(v), atol=1e-12)


@given(st.integers(-30, 30))
def test_translation_covariance_in_n(k):
    # shifting the box in n shifts the spectrum by exactly k
    a = build_operator(LatticeBox.square(Site(0, 0), 3), 0.1)
    b = build_operator(LatticeBox.square(Site(0, k), 3), 0.1)
    ea = np.linalg.eigvalsh(a.dense())
    eb = np.linalg.eigvalsh(b.dense())
    np.testing.assert_allclose(eb, ea + k, atol=1e-10)


def test_j_reflection_symmetry():
    ea = np.linalg.eigvalsh(build_operator(LatticeBox.square(Site(0, 0), 4), 0.1).dense())
    # the box and the diagonal are invariant under j -> -j
    box = LatticeBox.square(Site(0, 0), 4)
    op = build_operator(box, 0.1)
    perm = [op.index[Site(-s.j, s.n)] for s in op.sites]
    M = op.dense()
    np.testing.assert_allclose(M, M[np.ix_(perm, perm)], atol=0)
    assert ea is not None


def test_excluded_sites_give_the_principal_submatrix():
    box = LatticeBox.square(Site(0, 0), 3)
    full = build_operator(box, 0.1)
    drop = {Site(0, 0), Site(1, -1)}
    sub = build_operator(box, 0.1, drop)
    keep = [i for i, s in enumerate(full.sites) if s not in drop]
    np.testing.assert_allclose(sub.dense(), full.dense()[np.ix_(keep, keep)], atol=0)
    assert sub.dim == full.dim - 2


def test_excluded_outside_box_rejected():
    box = LatticeBox.square(Site(0, 0), 2)
    with pytest.raises(ValueError):
        build_operator(box, 0.1, [Site(5, 5)])


def test_negative_delta_rejected_and_large_delta_warned():
    box = LatticeBox.square(Site(0, 0), 2)
    with pytest.raises(ValueError):
        build_operator(box, -0.1)
    with pytest.warns(UserWarning):
        build_operator(box, 0.3)


def test_resonant_sites_five_site_window():
    box = LatticeBox.square(Site(0, 0), 8)
    res = resonant_sites(box, 0.0, 0.1)
    assert res == [Site(0, 0), Site(1, -1), Site(-1, -1), Site(2, -4), Site(-2, -4)]


@given(small_boxes, st.floats(-1, 1), st.floats(0.01, 0.2))
def test_resonant_sites_definition(box, E, delta):
    res = resonant_sites(box, E, delta)
    expected = {s for s in box.sites() if abs(diagonal(s) - E) <= 2 * delta}
    assert set(res) == expected
    keys = [(abs(s.j), -s.j, s.n) for s in res]
    assert keys == sorted(keys)


def test_parabola_points():
    pts = parabola_points(3)
    assert all(s.n + s.j**2 == 0 for s in pts)
    assert len(pts) == 7
    assert pts[0] == Site(0, 0)


def test_export_coo_roundtrip(tmp_path):
    op = build_operator(LatticeBox.square(Site(1, -2), 2), 0.07)
    path = tmp_path / "op.coo"
    op.export_coo(path)
    M = np.zeros((op.dim, op.dim))
    header = 0
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            header += 1
            continue
        a, b, v = line.split()
        M[int(a), int(b)] = float(v)
    assert header == 4
    np.testing.assert_allclose(M, op.dense(), atol=0)
