import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnot_ma.grid import Box, Grid, GridFunction, read_grid_function, write_grid_function


def test_grid_geometry():
    g = Grid(Box((-1, 0), (1, 2)), (5, 3))
    assert g.shape == (5, 3)
    np.testing.assert_allclose(g.h, [0.5, 1.0])
    assert g.interior_shape == (3, 1)
    assert g.boundary_mask().sum() == 15 - 3
    assert g.points().shape == (15, 2)


def test_grid_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        Grid(Box((0,), (1,)), (2,))
    with pytest.raises(ValueError):
        Box((0, 1), (1, 1))


def test_gridfunction_rejects_nonfinite():
    g = Grid(Box((0,), (1,)), (4,))
    with pytest.raises(ValueError, match="finite"):
        GridFunction(g, [0, np.nan, 0, 0])


def test_subbox_helpers():
    b = Box((-1, -1), (1, 1))
    half = b.scaled(0.5)
    assert half.lower == (-0.5, -0.5) and half.strictly_inside(b)
    assert not b.strictly_inside(b)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(arrays(np.float64, (4, 3), elements=finite))
@settings(max_examples=40, deadline=None)
def test_hex_round_trip_is_bit_exact(tmp_path_factory, values):
    g = Grid(Box((-1.0, 0.0), (np.pi, 1.0 / 3.0)), (4, 3))
    u = GridFunction(g, values)
    stem = tmp_path_factory.mktemp("rt") / "u"
    write_grid_function(u, stem, hex_floats=True)
    back = read_grid_function(stem)
    assert back.grid == g
    assert back.values.tobytes() == u.values.tobytes()


def test_decimal_round_trip_is_exact_too(tmp_path):
    g = Grid(Box((0.0,), (1.0,)), (7,))
    u = GridFunction(g, np.random.default_rng(1).standard_normal(7) * 1e-7)
    write_grid_function(u, tmp_path / "u")
    assert read_grid_function(tmp_path / "u").values.tobytes() == u.values.tobytes()


def test_header_and_extra_fields(tmp_path):
    g = Grid(Box((0.0,), (1.0,)), (3,))
    csv_path, json_path = write_grid_function(GridFunction.zeros(g), tmp_path / "z", extra={"seed": 7})
    header = json.loads(json_path.read_text())
    assert header["seed"] == 7 and header["columns"] == ["x1", "value", "boundary"]
    assert csv_path.read_text().splitlines()[0] == "x1,value,boundary"


def test_mismatched_rows_rejected(tmp_path):
    g = Grid(Box((0.0,), (1.0,)), (3,))
    write_grid_function(GridFunction.zeros(g), tmp_path / "z")
    lines = (tmp_path / "z.csv").read_text().splitlines()
    (tmp_path / "z.csv").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ValueError, match="rows"):
        read_grid_function(tmp_path / "z")


def test_no_temp_files_left(tmp_path):
    g = Grid(Box((0.0,), (1.0,)), (3,))
    write_grid_function(GridFunction.zeros(g), tmp_path / "z")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["z.csv", "z.json"]
