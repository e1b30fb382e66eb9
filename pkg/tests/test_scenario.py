import json

import numpy as np
import pytest

from nlwave import ConfigError, Grid
from nlwave.expressions import ExpressionError, compile_expression
from nlwave.report import read_snapshot, write_snapshot
from nlwave.scenario import build, load_scenario, parse_scenario, shipped_scenarios

BASE = {
    "name": "t", "mode": "linear",
    "grid": {"dim": 1, "points": 16, "length": 6.283185307179586, "periodic_data": True},
    "operator": {"kind": "scalar", "a": 1.0},
    "alpha": {"atoms": [[0.5, 0.1, 0.0]]},
    "data": {"phi": {"terms": [{"type": "planewave", "k": [1]}]}},
    "time": {"T": 1.0, "K": 16},
}


def dump(cfg):
    return json.dumps(cfg, indent=2)


def test_shipped_scenarios_validate_and_build():
    names = shipped_scenarios()
    assert {"planewave-linear", "manufactured-nonlocal", "density-linear", "rank-one-system",
            "wentzell-linear", "cubic-picard"} <= set(names)
    for name in names:
        built = build(load_scenario(name))
        assert built.problem.K >= 8


def test_unknown_key_reports_field_and_line():
    cfg = json.loads(json.dumps(BASE))
    cfg["time"]["bogus"] = 1
    text = dump(cfg)
    with pytest.raises(ConfigError) as info:
        parse_scenario(text)
    err = info.value
    assert "bogus" in str(err)
    assert err.line == next(i for i, l in enumerate(text.splitlines(), 1) if "bogus" in l)


def test_top_level_unknown_key():
    cfg = dict(BASE, extra=True)
    with pytest.raises(ConfigError):
        parse_scenario(dump(cfg))


def test_malformed_json_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_scenario('{\n  "name": "x",\n  oops\n}')
    assert info.value.line == 3


def test_wrong_type_reports_field():
    cfg = json.loads(json.dumps(BASE))
    cfg["time"]["K"] = "many"
    with pytest.raises(ConfigError) as info:
        parse_scenario(dump(cfg))
    assert info.value.field.startswith("time")


def test_density_from_csv(tmp_path):
    t = np.linspace(0, 1, 11)
    (tmp_path / "alpha.csv").write_text("t,w,wi\n" + "".join(f"{a},{0.2 * a},{0.1}\n" for a in t))
    cfg = json.loads(json.dumps(BASE))
    cfg["alpha"] = {"density": {"csv": "alpha.csv", "column": "w", "imag_column": "wi"}}
    sc = parse_scenario(dump(cfg), base_dir=tmp_path)
    m = build(sc).problem.alpha
    np.testing.assert_allclose(m.density, 0.2 * t + 0.1j)


def test_missing_csv_is_config_error(tmp_path):
    cfg = json.loads(json.dumps(BASE))
    cfg["alpha"] = {"density": {"csv": "nope.csv"}}
    with pytest.raises(ConfigError):
        build(parse_scenario(dump(cfg), base_dir=tmp_path))


def test_density_expression():
    cfg = json.loads(json.dumps(BASE))
    cfg["alpha"] = {"density": {"expression": "0.5*sin(pi*t)", "samples": 21}}
    m = build(parse_scenario(dump(cfg))).problem.alpha
    np.testing.assert_allclose(m.density, 0.5 * np.sin(np.pi * np.linspace(0, 1, 21)), atol=1e-15)


def test_snapshot_round_trip(tmp_path, rng):
    grid = Grid(2, 8, 1.0)
    vals = rng.standard_normal((3, 64, 2)) + 1j * rng.standard_normal((3, 64, 2))
    write_snapshot(tmp_path / "u.bin", vals, grid, 0.5)
    back, meta = read_snapshot(tmp_path / "u.bin")
    np.testing.assert_array_equal(back, vals)
    assert meta["K"] == 2 and meta["N"] == 2 and meta["format_version"] == 1
    # byte layout: interleaved little-endian float64, time-major then mode then channel
    raw = np.frombuffer((tmp_path / "u.bin").read_bytes(), "<f8")
    assert raw[0] == vals[0, 0, 0].real and raw[1] == vals[0, 0, 0].imag
    assert raw[2] == vals[0, 0, 1].real


def test_snapshot_as_data(tmp_path):
    grid = Grid(1, 16, 6.283185307179586)
    x = grid.coordinates()[0]
    write_snapshot(tmp_path / "phi.bin", np.cos(x)[:, None], grid, 0.0)
    cfg = json.loads(json.dumps(BASE))
    cfg["data"] = {"phi": {"snapshot": "phi.bin"}}
    prob = build(parse_scenario(dump(cfg), base_dir=tmp_path)).problem
    np.testing.assert_allclose(prob.phi[:, 0], np.cos(x))


@pytest.mark.parametrize("text", ["__import__('os')", "t.__class__", "open('x')", "lambda: 1",
                                  "[1, 2]", "t if t else 1", "unknown(t)", "y + 1"])
def test_expression_rejects_unsafe_input(text):
    with pytest.raises(ExpressionError):
        compile_expression(text, ("t",))


def test_expression_evaluates():
    f = compile_expression("exp(-t**2) * cos(pi*t) + abs(-2)", ("t",))
    t = np.linspace(0, 1, 5)
    np.testing.assert_allclose(f(t), np.exp(-t**2) * np.cos(np.pi * t) + 2)
    assert compile_expression("3", ("t",))(t).shape == (5,)


def test_seed_changes_random_fields():
    cfg = json.loads(json.dumps(BASE))
    cfg["data"] = {"phi": {"terms": [{"type": "random", "cutoff": 3}]}}
    sc = parse_scenario(dump(cfg))
    a, b, c = build(sc, seed=1).problem.phi, build(sc, seed=1).problem.phi, build(sc, seed=2).problem.phi
    np.testing.assert_array_equal(a, b)
    assert np.any(a != c)
