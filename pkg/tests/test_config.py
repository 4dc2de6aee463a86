import pytest
import yaml

from spinbell.config import load_config, parse_config
from spinbell.errors import ConfigError


def error_path(raw, base_dir=None):
    with pytest.raises(ConfigError) as exc:
        parse_config(raw, base_dir)
    return exc.value.path


def test_defaults():
    cfg = parse_config({"lattice": {"length": 6}})
    assert cfg.lattice.shape == 6 and cfg.state.kind == "ground"
    assert cfg.basis == ["x", "y", "z"] and cfg.seesaw.restarts == 20
    assert cfg.fit.lam_range == (0.05, 5.0) and cfg.fit.grid == 40


@pytest.mark.parametrize("raw, path", [
    ({"seed": -1, "lattice": {"length": 4}}, "seed"),
    ({"seed": 2**64, "lattice": {"length": 4}}, "seed"),
    ({"seed": 1.5, "lattice": {"length": 4}}, "seed"),
    ({"lattice": {}}, "lattice.length"),
    ({"lattice": {"length": 4, "metric": "taxicab"}}, "lattice.metric"),
    ({"lattice": {"geometry": "grid", "width": 2}}, "lattice.height"),
    ({"lattice": {"length": 4}, "model": {"name": "tfim", "Delta": 1.0}}, "model.Delta"),
    ({"lattice": {"length": 4}, "model": {"name": "tfim", "g": ".nan"}}, "model.g"),
    ({"lattice": {"length": 4}, "state": {"kind": "thermal"}}, "state.beta"),
    ({"lattice": {"length": 4}, "state": {"kind": "thermal", "beta": -1}}, "state.beta"),
    ({"lattice": {"length": 4}, "state": {"kind": "thermal", "beta": 1, "beta_star": -1}},
     "state.beta_star"),
    ({"lattice": {"length": 4}, "state": {"kind": "quench", "times": []}}, "state.times"),
    ({"lattice": {"length": 4}, "state": {"kind": "product", "initial": ["sideways"]}},
     "state.initial"),
    ({"lattice": {"length": 4}, "operators": {"basis": ["w"]}}, "operators.basis"),
    ({"lattice": {"length": 4}, "regions": {"pairs": [[[0]]]}}, "regions.pairs[0]"),
    ({"lattice": {"length": 4}, "regions": {"sets": [[[0], []]]}}, "regions.sets[0][1]"),
    ({"lattice": {"length": 4}, "fit": {"lambda_range": [2, 1]}}, "fit.lambda_range"),
    ({"lattice": {"length": 4}, "fit": {"C": 1.0}}, "fit"),
    ({"lattice": {"length": 4}, "seesaw": {"restarts": 0}}, "seesaw.restarts"),
    ({"lattice": {"length": 4}, "inequality": "nope.yaml"}, "inequality"),
    ({"lattice": {"length": 4}, "certify": {"formula": "thm99"}}, "certify.formula"),
    ({"lattice": {"length": 4}, "bogus": 1}, "bogus"),
    ({"lattice": {"length": 4}, "model": {"name": "custom",
                                          "terms": [{"sites": [0], "matrix": [[1, 0]]}]}},
     "model.terms[0].matrix"),
])
def test_errors_report_key_path(raw, path):
    if raw.get("model", {}).get("g") == ".nan":
        raw["model"]["g"] = float("nan")
    assert error_path(raw) == path


def test_custom_terms_parse():
    raw = {"lattice": {"length": 1},
           "model": {"name": "custom",
                     "terms": [{"sites": [0], "matrix": [[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]}]}}
    cfg = parse_config(raw)
    assert cfg.model.terms[0]["matrix"] == [[1 + 0j, 0j], [0j, -1 + 0j]]


def test_inequality_path_relative_to_config(tmp_path):
    (tmp_path / "ineq.yaml").write_text("parties: 2\nsettings: [1, 1]\n")
    (tmp_path / "c.yaml").write_text(yaml.safe_dump({"lattice": {"length": 4},
                                                     "inequality": "ineq.yaml"}))
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg.inequality == str(tmp_path / "ineq.yaml")


def test_overrides_and_hash(tmp_path):
    (tmp_path / "c.yaml").write_text(yaml.safe_dump({"seed": 1, "lattice": {"length": 4}}))
    a = load_config(tmp_path / "c.yaml")
    b = load_config(tmp_path / "c.yaml", {"seed": 2, "out": str(tmp_path / "o")})
    c = load_config(tmp_path / "c.yaml", {"out": "elsewhere"})
    assert b.seed == 2 and b.output_dir == str(tmp_path / "o")
    assert a.config_hash() != b.config_hash()
    assert a.config_hash() == c.config_hash()  # output location is not part of the experiment


def test_yaml_errors(tmp_path):
    (tmp_path / "bad.yaml").write_text("lattice: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.yaml")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
