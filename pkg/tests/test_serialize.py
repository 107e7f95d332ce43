import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dloplace.elastica import ElasticaParams, Pose, ShapeError, StiffnessSpec, eval_shape
from dloplace.planner import PlanPath
from dloplace.serialize import (
    dumps_shape_csv,
    read_points_csv,
    read_shape_csv,
    write_points_csv,
    write_shape_csv,
)

ST = StiffnessSpec(1.0, 0.3)


@given(st.floats(0.0, 0.95), st.floats(0, 1), st.floats(0.3, 2.4), st.floats(-3, 3), st.integers(2, 80))
@settings(max_examples=30, deadline=None)
def test_shape_round_trip(tmp_path_factory, k, q, lt, phi, n):
    shape = eval_shape(Pose(0.1, -0.2, phi), ElasticaParams(k, q * lt, lt), ST, n)
    f = tmp_path_factory.mktemp("s") / "s.csv"
    write_shape_csv(f, shape)
    back = read_shape_csv(f)
    for a in ("s", "x", "y", "phi", "kappa"):
        assert getattr(back, a).tobytes() == getattr(shape, a).tobytes()
    assert back.params == shape.params and back.base == shape.base and back.stiffness == shape.stiffness
    assert dumps_shape_csv(back) == dumps_shape_csv(shape)


def test_points_round_trip(tmp_path):
    pts = np.random.default_rng(0).normal(size=(17, 2))
    write_points_csv(tmp_path / "p.csv", pts, {"L": 0.3})
    back, header = read_points_csv(tmp_path / "p.csv")
    assert back.tobytes() == pts.tobytes() and header == {"L": 0.3}


def test_points_from_shape_file(tmp_path):
    shape = eval_shape(Pose(), ElasticaParams(0.5, 0.2, 0.8), ST, 30)
    write_shape_csv(tmp_path / "s.csv", shape)
    pts, header = read_points_csv(tmp_path / "s.csv")
    assert np.array_equal(pts, shape.points()) and header["k"] == 0.5


def test_headerless_points(tmp_path):
    (tmp_path / "p.csv").write_text("0,0\n0.1,0\n\n0.2,0\n")
    pts, header = read_points_csv(tmp_path / "p.csv")
    assert pts.shape == (3, 2) and header == {}


@pytest.mark.parametrize(
    "text",
    [
        "",
        "x,y\n",
        "x,y\n1,2\n3\n",
        "x,y\n1,zz\n",
        "# {bad json\nx,y\n1,2\n",
        "a,b,c\n1,2,3\n",
        "x,y,z\n1,2\n",
    ],
)
def test_malformed_points(tmp_path, text):
    (tmp_path / "p.csv").write_text(text)
    with pytest.raises(ShapeError):
        read_points_csv(tmp_path / "p.csv")


@pytest.mark.parametrize(
    "text",
    [
        "x,y\n1,2\n",
        '# {"k": 0.5}\ns,x,y,phi,kappa\n0,0,0,0,0\n',
        "s,x,y,phi,kappa\n0,0,0,0,0\n",
    ],
)
def test_malformed_shape(tmp_path, text):
    (tmp_path / "s.csv").write_text(text)
    with pytest.raises(ShapeError):
        read_shape_csv(tmp_path / "s.csv")


def test_plan_round_trip(nominal_paths, tmp_path):
    p = nominal_paths[0]
    p.save(tmp_path / "p.json")
    back = PlanPath.load(tmp_path / "p.json")
    assert back.dumps() == p.dumps()
    assert json.loads(back.dumps())["nodes"][0]["stage"] == "I"
