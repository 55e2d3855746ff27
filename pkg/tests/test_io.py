import json
import math

import numpy as np
import pytest

from skinlab import hyperbolic as hb
from skinlab.config import ConfigError, SCHEMA, build_body, build_group, echo, load_config, validate
from skinlab.convex import Ball, GeodesicLine, Horoball
from skinlab.io import load_measure, load_patterson, read_csv, save_measure, save_patterson, write_csv, write_json
from skinlab.measures import AtomicMeasure, MeasureError

from conftest import CONFIGS

MINIMAL = {"seed": 1, "group": {"kind": "cyclic", "generators": [[2, 0, 0, 0.5]]}, "orbit": {"radius": 10}}


# --- CSV / JSON ------------------------------------------------------------------

def test_csv_format(tmp_path):
    p = write_csv(tmp_path / "x.csv", ["a", "b"], [(0.1, 2), (1e-300, -3.5)])
    raw = p.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0] == b"a,b"
    header, data = read_csv(p)
    assert header == ["a", "b"]
    assert data[1, 0] == 1e-300 and data[0, 0] == 0.1


def test_csv_requires_header(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(MeasureError):
        read_csv(tmp_path / "e.csv")


def test_json_cleaning(tmp_path):
    p = write_json(tmp_path / "r.json", {"x": np.float64(1.5), "n": np.int64(3), "inf": math.inf,
                                         "z": 1 + 2j, "a": np.arange(3), "b": np.bool_(True)})
    d = json.loads(p.read_text())
    assert d == {"x": 1.5, "n": 3, "inf": "inf", "z": [1.0, 2.0], "a": [0, 1, 2], "b": True}


def test_boundary_measure_round_trip(tmp_path, schottky_patterson):
    P = schottky_patterson
    save_patterson(P, tmp_path / "p.csv")
    Q = load_patterson(tmp_path / "p.csv")
    assert np.array_equal(Q.theta, P.theta)
    assert np.array_equal(Q.weights, P.weights)
    assert np.array_equal(Q.base.source, P.base.source)
    assert (Q.delta, Q.s_used, Q.orbit_radius, Q.horizon) == (P.delta, P.s_used, P.orbit_radius, P.horizon)
    side = json.loads((tmp_path / "p.json").read_text())
    assert {"delta", "s_used", "basepoint", "radius"} <= set(side)


def test_tangent_measure_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    F = hb.frame_from_base_dir(1j + rng.random(5), rng.random(5))
    m = AtomicMeasure(F, rng.random(5), "tangent", 2j)
    save_measure(m, tmp_path / "t.csv")
    m2, side = load_measure(tmp_path / "t.csv")
    assert np.array_equal(m2.atoms, m.atoms) and np.array_equal(m2.weights, m.weights)
    assert m2.basepoint == 2j and m2.source is None and side["n_atoms"] == 5


def test_measure_header_mismatch(tmp_path):
    m = AtomicMeasure(np.array([0.1, 0.2]), np.array([1.0, 2.0]))
    save_measure(m, tmp_path / "m.csv")
    side = json.loads((tmp_path / "m.json").read_text())
    side["kind"] = "tangent"
    (tmp_path / "m.json").write_text(json.dumps(side))
    with pytest.raises(MeasureError):
        load_measure(tmp_path / "m.csv")


# --- config ------------------------------------------------------------------------

def test_defaults_materialised():
    cfg = validate(MINIMAL)
    assert cfg["patterson"]["equivariance_tol"] == 0.05
    assert cfg["equidistribution"]["t_grid"] == list(range(9))
    assert cfg["body"] == {"type": "geodesic", "endpoints": [-1.0, 1.0]}
    assert cfg["basepoint"] == [0.0, 1.0]


def test_echo_round_trip(tmp_path):
    cfg = load_config(CONFIGS / "schottky.json")
    (tmp_path / "echo.json").write_text(echo(cfg))
    again = load_config(tmp_path / "echo.json")
    assert again == cfg
    assert echo(again) == echo(cfg)


@pytest.mark.parametrize("mutate,key", [
    (lambda c: c.update(bogus=1), "<root>"),
    (lambda c: c["orbit"].update(radiu=3), "orbit"),
    (lambda c: c.pop("seed"), "<root>"),
    (lambda c: c["group"].update(kind="free"), "group.kind"),
    (lambda c: c["orbit"].update(radius=-1), "orbit.radius"),
])
def test_invalid_configs(mutate, key):
    raw = json.loads(json.dumps(MINIMAL))
    mutate(raw)
    with pytest.raises(ConfigError) as e:
        validate(raw, "x.json")
    assert e.value.key == key and e.value.path == "x.json"
    assert "x.json" in str(e.value)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError) as e:
        load_config(tmp_path / "bad.json")
    assert "bad.json" in str(e.value)


def test_builders():
    cfg = validate(MINIMAL)
    G = build_group(cfg)
    assert G.kind == "cyclic" and len(G.generators) == 1
    C = build_body(cfg)
    assert isinstance(C, GeodesicLine)
    assert C.minus == pytest.approx(hb.theta_from_real(-1.0))
    cfg["body"] = {"type": "geodesic", "endpoints": [0.0, "inf"]}
    assert build_body(cfg).plus == 0.0
    cfg["body"] = {"type": "horoball", "center_real": "inf", "through": [0.0, 2.0]}
    assert isinstance(build_body(cfg), Horoball)
    cfg["body"] = {"type": "ball", "center": [0.0, 1.0], "radius": 0.5}
    assert isinstance(build_body(cfg), Ball)
    cfg["body"] = {"type": "ball", "center": [0.0, 1.0]}
    with pytest.raises(ConfigError):
        build_body(cfg)
    cfg["group"]["generators"] = [[0, -1, 1, 0]]
    with pytest.raises(ConfigError):
        build_group(cfg)


def test_schema_rejects_unknown_keys_everywhere():
    def walk(s):
        if s.get("type") == "object":
            assert s.get("additionalProperties") is False
            for sub in s.get("properties", {}).values():
                walk(sub)
        if isinstance(s.get("items"), dict):
            walk(s["items"])
    walk(SCHEMA)
