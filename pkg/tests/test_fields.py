import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pressrec.errors import OutOfDomainError, ShapeError
from pressrec.fields import (CartesianGrid2, PointSet2, ScalarSamples, VectorSamples, bilinear_resample,
                             disk_predicate, grid_scalar, grid_vector, mask_void_region)


def unit_grid(n=5):
    return CartesianGrid2(n, n, 1.0 / (n - 1))


def test_arrays_are_read_only():
    pts = PointSet2(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        pts.coords[0, 0] = 1.0
    with pytest.raises(ValueError):
        pts.valid[0] = False


def test_mask_length_mismatch():
    with pytest.raises(ShapeError):
        PointSet2(np.zeros((3, 2)), valid=np.ones(2, bool))


def test_grid_layout_is_row_major():
    g = CartesianGrid2(4, 3, 0.5, (1.0, 2.0))
    pts = g.points()
    j, i = 2, 1
    assert tuple(pts.coords[j * g.nx + i]) == (1.0 + 0.5 * i, 2.0 + 0.5 * j)
    assert g.shape == (3, 4)
    f = grid_scalar(g, np.arange(12.0))
    assert f.as_grid()[j, i] == j * 4 + i


def test_grid_extent_and_json_roundtrip():
    g = CartesianGrid2(8, 8, 0.25, (0.0, 0.0), periodic=True)
    assert g.extent == (2.0, 2.0)
    assert CartesianGrid2(8, 8, 0.25).extent == (1.75, 1.75)
    assert CartesianGrid2.from_json(g.to_json()) == g


def test_vector_samples_shape_checks():
    pts = PointSet2(np.zeros((4, 2)))
    with pytest.raises(ShapeError):
        VectorSamples(pts, np.zeros((4, 4)))
    v = VectorSamples(pts, np.zeros((4, 3)))
    assert v.ncomp == 3
    g = CartesianGrid2(3, 3, 1.0)
    assert grid_vector(g, np.ones((3, 3, 2))).as_grid().shape == (3, 3, 2)


def test_resample_constant():
    g = unit_grid()
    f = grid_scalar(g, np.full(g.size, 5.0))
    out = bilinear_resample(f, PointSet2([[0.3, 0.41], [0.77, 0.1]]))
    assert np.all(out.values == 5.0)


def test_resample_linear_in_x():
    g = unit_grid()
    f = grid_scalar(g, g.points().x)
    out = bilinear_resample(f, PointSet2([[0.25, 0.7]]))
    assert out.values[0] == pytest.approx(0.25, abs=1e-15)


def test_resample_cell_center_of_2x2():
    # smallest legal grid is 3x3; the lower-left cell carries 0,1 / 2,3
    g = CartesianGrid2(3, 3, 1.0)
    vals = np.zeros((3, 3))
    vals[0, 0], vals[0, 1], vals[1, 0], vals[1, 1] = 0, 1, 2, 3
    out = bilinear_resample(grid_scalar(g, vals), PointSet2([[0.5, 0.5]]))
    assert out.values[0] == 1.5


def test_resample_own_nodes_is_bit_exact():
    g = CartesianGrid2(7, 5, 0.3, (-1.0, 2.0))
    rng = np.random.default_rng(0)
    f = grid_scalar(g, rng.normal(size=g.size))
    out = bilinear_resample(f, g.points())
    assert np.array_equal(out.values, f.values)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10), c=st.floats(-10, 10),
       sx=st.floats(0, 1), sy=st.floats(0, 1))
def test_resample_exact_for_affine(a, b, c, sx, sy):
    g = CartesianGrid2(6, 4, 0.2, (-0.5, 1.0))
    P = g.points()
    f = grid_scalar(g, a + b * P.x + c * P.y)
    x = -0.5 + sx * 5 * 0.2
    y = 1.0 + sy * 3 * 0.2
    out = bilinear_resample(f, PointSet2([[x, y]])).values[0]
    assert out == pytest.approx(a + b * x + c * y, abs=1e-12 * (1 + abs(a) + abs(b) + abs(c)))


def test_resample_out_of_domain_names_index():
    g = unit_grid()
    f = grid_scalar(g, np.zeros(g.size))
    with pytest.raises(OutOfDomainError) as ei:
        bilinear_resample(f, PointSet2([[0.5, 0.5], [1.5, 0.5]]))
    assert ei.value.index == 1


def _field(n=20):
    g = CartesianGrid2(n, n, 1.0 / (n - 1))
    P = g.points()
    return VectorSamples(P, np.column_stack([P.x, P.y]), g)


def test_mask_identity_and_full():
    v = _field()
    same = mask_void_region(v, lambda x, y: np.zeros_like(x, bool))
    assert np.array_equal(same.values, v.values)
    assert same.points.valid.all()
    allv = mask_void_region(v, lambda x, y: np.ones_like(x, bool))
    assert not allv.points.valid.any()
    assert np.all(np.isnan(allv.values))


def test_mask_disk_count_matches_brute_force():
    v = _field(31)
    r = 0.23
    m = mask_void_region(v, disk_predicate((0.5, 0.5), r))
    brute = sum(1 for x, y in v.points.coords if (x - 0.5) ** 2 + (y - 0.5) ** 2 < r * r)
    assert int((~m.points.valid).sum()) == brute


def test_mask_idempotent():
    v = _field()
    pred = disk_predicate((0.3, 0.6), 0.2)
    once = mask_void_region(v, pred)
    twice = mask_void_region(once, pred)
    assert np.array_equal(once.points.valid, twice.points.valid)
    assert np.array_equal(once.values, twice.values, equal_nan=True)


def test_scalar_samples_length_check():
    with pytest.raises(ShapeError):
        ScalarSamples(PointSet2(np.zeros((3, 2))), np.zeros(4))
