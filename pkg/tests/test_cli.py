import json
import math
import subprocess
import sys

import numpy as np
import pytest

from polysle import io
from polysle.cli import main
from polysle.driving import brownian_increments


def write(tmp_path, doc, name="cfg.json"):
    f = tmp_path / name
    f.write_text(json.dumps(doc))
    return f


def run(tmp_path, doc, *args, out="out"):
    f = write(tmp_path, doc)
    code = main([args[0], "--config", str(f), "--out", str(tmp_path / out), *args[1:]])
    return code, tmp_path / out


FLAT = {"kappa": 2.0, "prevertices": [-3, 3], "betas": [0, 0], "seed": 21,
        "solver": {"T": 0.01, "dt": 1e-4}}
SQUARE = {"kappa": 4, "prevertices": [-2, -1, 1, 2], "betas": [0.5, 0.5, 0.5, 0.5], "seed": 3,
          "solver": {"T": 0.004, "dt": 1e-4}}


def test_simulate_flat_driver(tmp_path):
    code, out = run(tmp_path, FLAT, "simulate")
    assert code == 0
    header, data = io.read_csv(out / "path.csv")
    raw = np.concatenate([[0.0], np.cumsum(brownian_increments(21, 100, 1e-4))])
    assert np.array_equal(data[:, 1], math.sqrt(2.0) * raw)
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 21 and man["sigma"] is None and len(man["config_hash"]) == 16


def test_seed_override(tmp_path):
    code, out = run(tmp_path, FLAT, "simulate", "--seed", "22")
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 22


def test_rerun_is_byte_identical(tmp_path):
    run(tmp_path, SQUARE, "simulate", out="a")
    run(tmp_path, SQUARE, "simulate", out="b")
    for name in ("path.csv", "path.bin", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_records_sigma(tmp_path):
    doc = {"kappa": 6, "prevertices": [-0.4, 0.5], "betas": [0.1, 0.1],
           "solver": {"T": 0.05, "dt": 1e-4}}
    for seed in range(20):
        code, out = run(tmp_path, {**doc, "seed": seed}, "simulate", out=f"s{seed}")
        man = json.loads((out / "manifest.json").read_text())
        if man["sigma"] is not None:
            assert 0 < man["sigma"] <= 0.05
            _, data = io.read_csv(out / "path.csv")
            assert data[-1, 0] <= man["sigma"]
            return
    pytest.fail("no seed reached the collision time")


def test_trace_constant_driver_is_vertical(tmp_path):
    doc = {**FLAT, "solver": {"T": 0.01, "dt": 1e-4, "driver": "constant"}}
    code, out = run(tmp_path, doc, "trace")
    assert code == 0
    _, data = io.read_csv(out / "trace.csv")
    assert np.all(data[:, 1] == 0.0)
    assert np.allclose(data[:, 2], 2 * np.sqrt(data[:, 0]))
    assert "<polyline" in (out / "trace.svg").read_text()


def test_map_flat_is_real_line(tmp_path):
    code, out = run(tmp_path, {**FLAT, "map": {"t": 0.0}}, "map")
    assert code == 0
    snap = json.loads((out / "snapshot.json").read_text())
    pos = np.array([c["position"] for c in snap["corners"]])
    assert np.allclose(pos, [[-3.0, 0.0], [3.0, 0.0]], rtol=0, atol=1e-14)


def test_map_square(tmp_path):
    code, out = run(tmp_path, SQUARE, "map")
    snap = json.loads((out / "snapshot.json").read_text())
    assert code == 0 and snap["turning_sum"] == 2.0 and len(snap["corners"]) == 4
    assert (out / "snapshot.svg").read_text().count("<circle") == 4


def test_evolve_frames(tmp_path):
    code, out = run(tmp_path, SQUARE, "evolve", "--frames", "0,0.002,0.004")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["files"] == ["frame_0000", "frame_0001", "frame_0002"]
    assert (out / "frame_0002.svg").exists()


def test_evolve_frame_past_sigma(tmp_path):
    doc = {"kappa": 6, "prevertices": [-0.05, 0.05], "betas": [0.1, 0.1], "seed": 0,
           "solver": {"T": 0.01, "dt": 1e-4}}
    code, _ = run(tmp_path, doc, "evolve", "--frames", "0.01")
    assert code == 3


def test_verify_sc_oracles(tmp_path):
    doc = {"kappa": 2, "prevertices": [-1, 1], "betas": [-1, -1]}
    code, out = run(tmp_path, doc, "verify", "--test", "sc-oracles")
    assert code == 0
    assert json.loads((out / "report.json").read_text())["status"] == "pass"


def test_verify_martingale_inconclusive(tmp_path):
    doc = {"kappa": 4, "prevertices": [-0.05, 0.05], "betas": [0.5, 0.5],
           "verify": {"N": 200, "T": 0.05, "dt": 1e-4}}
    code, out = run(tmp_path, doc, "verify", "--test", "martingale")
    assert code == 2
    assert json.loads((out / "report.json").read_text())["status"] == "inconclusive"


def test_verify_hitting_formula(tmp_path):
    doc = {"kappa": 8, "prevertices": [-1, 1], "betas": [0, 0], "verify": {"x": 1, "y": 3}}
    code, out = run(tmp_path, doc, "verify", "--test", "hitting-formula")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert abs(rep["estimate"] - 2 / 3) < 1e-8


def test_verify_threads_independent(tmp_path):
    doc = {"kappa": 4, "prevertices": [-1, 1], "betas": [0.5, 0.5], "seed": 5,
           "verify": {"N": 300, "T": 0.01, "dt": 1e-4}}
    run(tmp_path, doc, "verify", "--test", "martingale", "--threads", "1", out="t1")
    run(tmp_path, doc, "verify", "--test", "martingale", "--threads", "3", out="t3")
    a = json.loads((tmp_path / "t1" / "report.json").read_text())
    b = json.loads((tmp_path / "t3" / "report.json").read_text())
    assert a["estimate"] == b["estimate"] and a["se"] == b["se"]


@pytest.mark.parametrize("argv", [
    ["verify", "--test", "nope"],
    ["bogus"],
    ["simulate"],
])
def test_usage_errors(tmp_path, argv):
    f = write(tmp_path, FLAT)
    if argv[0] == "verify":
        argv = [*argv, "--config", str(f)]
    assert main(argv) == 3


def test_config_errors(tmp_path):
    f = write(tmp_path, {**FLAT, "unknown": 1})
    assert main(["simulate", "--config", str(f), "--out", str(tmp_path)]) == 3
    g = write(tmp_path, {**FLAT, "prevertices": [1, 3]}, "g.json")
    assert main(["simulate", "--config", str(g), "--out", str(tmp_path)]) == 3
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 3


def test_console_entry_point(tmp_path):
    f = write(tmp_path, {"kappa": 2, "prevertices": [-1, 1], "betas": [-1, -1]})
    r = subprocess.run([sys.executable, "-m", "polysle.cli", "verify", "--test", "sc-oracles",
                        "--config", str(f), "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert "pass" in r.stdout
