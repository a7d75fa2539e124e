import numpy as np

from pressrec import io
from pressrec.fields import CartesianGrid2
from pressrec.meshkit import delaunay_triangulate
from pressrec.synthlab import seed_uniform_random


def test_field_csv_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    xy = rng.uniform(-1, 1, (50, 2))
    vals = rng.normal(size=(50, 2)) * 10.0 ** rng.integers(-20, 20, (50, 1))
    vals[3, 1] = np.nan
    path = tmp_path / "f.csv"
    io.write_field_csv(path, xy, vals)
    c2, v2, grid = io.read_field_csv(path)
    assert grid is None
    assert np.array_equal(c2, xy) and np.array_equal(v2, vals, equal_nan=True)
    vec = io.load_vector(path)
    assert not vec.points.valid[3] and vec.points.valid.sum() == 49


def test_grid_sidecar(tmp_path):
    g = CartesianGrid2(5, 4, 0.25, (-1.0, 0.5))
    path = tmp_path / "p.csv"
    io.write_field_csv(path, g.points().coords, np.arange(20.0), g)
    assert io.grid_sidecar_path(path).name == "p.grid.json"
    f = io.load_scalar(path)
    assert f.grid == g and f.as_grid()[1, 0] == 5.0
    pts, grid = io.load_points(path)
    assert grid == g and pts.boundary is not None


def test_mesh_roundtrip(tmp_path):
    m = delaunay_triangulate(seed_uniform_random(40, 1.0, rng_seed=2))
    io.save_mesh(tmp_path / "m.json", m)
    back = io.load_mesh(tmp_path / "m.json")
    assert np.array_equal(back.cells, m.cells) and np.array_equal(back.vertices, m.vertices)


def test_pgm(tmp_path):
    img = np.array([[0.0, 1.0, 2.0], [3.0, np.nan, 4.0]])
    io.write_pgm(tmp_path / "h.pgm", img)
    q = io.read_pgm(tmp_path / "h.pgm")
    assert q.shape == (2, 3)
    assert q[0, 0] == 0 and q[1, 2] == 255 and q[1, 1] == 0
    side = io.read_json(tmp_path / "h.json")
    assert side["min"] == 0.0 and side["max"] == 4.0
    # row 0 is written last so the image is upright
    raw = (tmp_path / "h.pgm").read_bytes()
    assert raw.startswith(b"P5\n3 2\n255\n") and raw[-3:] == bytes(q[0])
