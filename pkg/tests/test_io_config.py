import json
import math
import struct

import numpy as np
import pytest

from polysle import config as C
from polysle import io
from polysle.driving import driven_path, simulate_driver
from polysle.geometry import ConfigError, PrevertexConfig
from polysle.loewner import compute_trace, flow_point
from polysle.scmap import polygon_snapshot

CFG = PrevertexConfig((-1.0, 0.5, 2.0), (0.3, 0.4, 0.5), 3.0)


@pytest.fixture(scope="module")
def path():
    return simulate_driver(CFG, 0.01, 1e-4, seed=12)


def test_csv_round_trip(path, tmp_path):
    f = tmp_path / "p.csv"
    io.write_path_csv(path, f)
    header, data = io.read_csv(f)
    assert header == ["t", "W", "Z_1", "Z_2", "Z_3", "D_re", "D_im", "A"]
    assert np.array_equal(data, io.path_matrix(path))


def test_binary_round_trip(path, tmp_path):
    f = tmp_path / "p.bin"
    io.write_path_binary(path, f)
    raw = f.read_bytes()
    assert raw[:4] == b"PSLE"
    magic, version, n, m, dt, seed, sigma, kappa = struct.unpack_from("<4sIIQdQdd", raw)
    assert (version, n, m, dt, seed, kappa) == (1, 3, path.m, 1e-4, 12, 3.0)
    assert math.isnan(sigma)
    back = io.read_path_binary(f)
    for name in ("t", "W", "Z", "D", "A"):
        assert np.array_equal(getattr(back, name), getattr(path, name))
    assert back.betas == path.betas and back.sigma is None


def test_binary_rejects_foreign_file(tmp_path):
    f = tmp_path / "x.bin"
    f.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(ValueError):
        io.read_path_binary(f)


def test_trace_and_flow_csv(tmp_path):
    p = driven_path(PrevertexConfig((-5.0, 5.0), (0.0, 0.0), 2.0), np.zeros(11), 1e-3)
    io.write_trace_csv(compute_trace(p), tmp_path / "t.csv")
    header, data = io.read_csv(tmp_path / "t.csv")
    assert header == ["t", "re", "im"] and data.shape == (11, 3)
    io.write_flow_csv(flow_point(p, 1 + 1j), tmp_path / "f.csv")
    header, data = io.read_csv(tmp_path / "f.csv")
    assert data[0, 1:3].tolist() == [1.0, 1.0]


def test_svg_viewport_and_markup():
    x0, y0, x1, y1 = io.viewport([0, 2 + 1j])
    assert (x0, y0, x1, y1) == pytest.approx((-0.1, -0.05, 2.1, 1.05))
    p = driven_path(PrevertexConfig((-2.0, -1.0, 1.0, 2.0), (0.5,) * 4, 4.0), np.zeros(3), 1e-4)
    svg = io.snapshot_svg(polygon_snapshot(p, 0.0))
    assert svg.startswith("<svg") and svg.count("<circle") == 4 and "<polygon" in svg


def test_snapshot_json_marks_infinity():
    p = driven_path(PrevertexConfig((-1.0, 1.0), (1.0, 0.5), 2.0), np.zeros(3), 1e-4)
    d = io.snapshot_dict(polygon_snapshot(p, 0.0))
    assert d["corners"][0]["finite"] is False and d["corners"][0]["position"] is None
    json.loads(io.dumps(d))


# -- config ------------------------------------------------------------------

BASE = {"kappa": 4, "prevertices": [-1, 1], "betas": [0.5, 0.5]}


def test_defaults_filled():
    full = C.parse(dict(BASE))
    assert full["seed"] == 0 and full["solver"]["dt"] == 1e-4
    assert C.prevertex_config(full) == PrevertexConfig((-1, 1), (0.5, 0.5), 4)


def test_rhos_accepted():
    full = C.parse({"kappa": 4, "prevertices": [-1, 1], "rhos": [1, 1]})
    assert C.prevertex_config(full).betas == (0.5, 0.5)


@pytest.mark.parametrize("doc", [
    {**BASE, "extra": 1},
    {**BASE, "solver": {"dtt": 1e-3}},
    {**BASE, "rhos": [1, 1]},
    {"kappa": 4, "prevertices": [-1, 1]},
    {**BASE, "kappa": -1},
    {**BASE, "betas": [0.5]},
    {**BASE, "seed": -3},
    {**BASE, "verify": {"drift_sign": 0}},
])
def test_rejected_configs(doc):
    with pytest.raises(ConfigError):
        C.parse(doc)


def test_load_bad_json(tmp_path):
    f = tmp_path / "c.json"
    f.write_text("{not json")
    with pytest.raises(ConfigError):
        C.load(f)
