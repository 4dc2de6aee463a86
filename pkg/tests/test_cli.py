import csv
import json
import math

import numpy as np
import pytest
import yaml

from spinbell.bell import chsh
from spinbell.bell.bounds import quench_epsilon
from spinbell.cli import main
from spinbell.clustering import connected_correlator
from spinbell.lattice import build_lattice
from spinbell.quantum import ManyBodyState, pauli


def write_config(tmp_path, raw, name="cfg.yaml"):
    raw.setdefault("output", {"dir": str(tmp_path / "out")})
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_product_state_scan(tmp_path):
    cfg = write_config(tmp_path, {"seed": 4, "lattice": {"length": 5},
                                  "state": {"kind": "product", "initial": ["up", "plus", "mixed",
                                                                           "down", "minus"]}})
    assert main(["chsh-scan", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out" / "chsh_scan.csv")
    assert len(rows) == 10
    for row in rows:
        assert float(row["chsh_sup"]) <= 2 + 1e-8
        assert float(row["epsilon"]) == 0 and row["satisfied"] == "true"


def test_scan_rows_revalidate_and_carry_provenance(tmp_path):
    cfg = write_config(tmp_path, {"seed": 9, "lattice": {"length": 8},
                                  "model": {"name": "tfim", "J": 1.0, "g": 2.0},
                                  "regions": {"pairs": [[[0], [3]], [[1, 2], [6]]]}})
    assert main(["chsh-scan", str(cfg)]) == 0
    for row in read_csv(tmp_path / "out" / "chsh_scan.csv"):
        satisfied = float(row["chsh_sup"]) <= float(row["bound"]) + 1e-9
        assert (row["satisfied"] == "true") == satisfied
        assert float(row["bound"]) == 2 + float(row["epsilon"])
    records = read_jsonl(tmp_path / "out" / "chsh_scan.jsonl")
    head = records[0]
    assert head["record"] == "run" and head["command"] == "chsh-scan"
    assert len(head["config_hash"]) == 64 and len(head["input_digest"]) == 64
    assert head["wall_time_s"] >= 0 and head["fit"]["kind"] == "clustering"
    assert head["fit"]["C"] > 0
    assert [r["record"] for r in records[1:]] == ["row", "row"]
    # a second run appends
    assert main(["chsh-scan", str(cfg)]) == 0
    assert len(read_jsonl(tmp_path / "out" / "chsh_scan.jsonl")) == 6


def test_thermal_scan_adds_margin_columns(tmp_path):
    cfg = write_config(tmp_path, {"lattice": {"length": 6},
                                  "model": {"name": "tfim", "g": 2.0},
                                  "state": {"kind": "thermal", "beta": 0.1, "beta_star": 0.05},
                                  "regions": {"pairs": [[[0], [2]], [[0], [5]]]}})
    assert main(["chsh-scan", str(cfg)]) == 0
    head = read_jsonl(tmp_path / "out" / "chsh_scan.jsonl")[0]
    assert head["beta_star"] == 0.05 and head["below_beta_star"] is False
    for row in read_csv(tmp_path / "out" / "chsh_scan.csv"):
        assert float(row["delta"]) > 0
        assert row["fixed_ok"] == "true"
        if row["beyond_r_star"] == "true":
            assert float(row["chsh_fixed_alice"]) <= 2 + 1e-9


def test_determinism(tmp_path):
    raw = {"seed": 77, "lattice": {"length": 6}, "model": {"name": "xxz", "J": 1.0,
                                                           "Delta": 0.5, "h": 0.1},
           "regions": {"pairs": "all-singletons"}}
    a = write_config(tmp_path, dict(raw, output={"dir": str(tmp_path / "a")}), "a.yaml")
    b = write_config(tmp_path, dict(raw, output={"dir": str(tmp_path / "b")}), "b.yaml")
    assert main(["chsh-scan", str(a)]) == 0 and main(["chsh-scan", str(b)]) == 0
    assert (tmp_path / "a" / "chsh_scan.csv").read_bytes() == (
        tmp_path / "b" / "chsh_scan.csv").read_bytes()


def test_cross_path_consistency(tmp_path, repo_root):
    pairs = [[[0], [4]], [[2], [9]], [[1, 2], [6, 7]]]
    raw = {"seed": 123, "lattice": {"length": 10}, "model": {"name": "tfim", "g": 2.0},
           "inequality": str(repo_root / "inequalities" / "chsh.yaml"),
           "regions": {"pairs": pairs, "sets": pairs}}
    cfg = write_config(tmp_path, raw)
    assert main(["chsh-scan", str(cfg)]) == 0
    assert main(["bell-certify", str(cfg)]) == 0
    scan = read_csv(tmp_path / "out" / "chsh_scan.csv")
    cert = read_csv(tmp_path / "out" / "certificates.csv")
    assert len(scan) == len(cert) == 3
    for s, c in zip(scan, cert):
        assert c["formula"] == "lemma1"
        assert abs(float(s["chsh_sup"]) - float(c["value"])) <= 1e-12
        assert abs(float(s["bound"]) - float(c["bound"])) <= 1e-12


def test_gamma_certificate_uses_gamma_four(tmp_path, repo_root):
    raw = {"lattice": {"length": 8}, "model": {"name": "tfim", "g": 2.0},
           "inequality": str(repo_root / "inequalities" / "chsh_gamma.yaml"),
           "certify": {"formula": "thm7_general"}, "regions": {"sets": [[[0], [5]]]}}
    cfg = write_config(tmp_path, raw)
    assert main(["bell-certify", str(cfg)]) == 0
    rows = [r for r in read_jsonl(tmp_path / "out" / "certificates.jsonl") if r["record"] == "row"]
    inputs = rows[0]["inputs"]
    assert inputs["gamma"] == 4
    assert rows[0]["bound"] == pytest.approx(2 + inputs["C"] * 4 * math.exp(-inputs["lam"] * 5))


def test_two_body_certificates(tmp_path, repo_root):
    raw = {"lattice": {"length": 12}, "model": {"name": "tfim", "g": 2.0},
           "inequality": str(repo_root / "inequalities" / "twobody3.yaml"),
           "regions": {"sets": [[[0], [4], [8]], [[3], [7], [11]]]}, "seesaw": {"restarts": 6}}
    cfg = write_config(tmp_path, raw)
    assert main(["bell-certify", str(cfg)]) == 0
    for row in read_csv(tmp_path / "out" / "certificates.csv"):
        assert row["formula"] == "lemma2_twobody" and row["satisfied"] == "true"
        assert (float(row["value"]) <= float(row["bound"]) + 1e-9)


def test_violation_exit_code(tmp_path):
    # the two-site Heisenberg antiferromagnet has the singlet as ground state
    raw = {"lattice": {"length": 2}, "model": {"name": "heisenberg", "J": 1.0},
           "fit": {"C": 1e-6, "lambda": 1.0}, "regions": {"pairs": [[[0], [1]]]}}
    cfg = write_config(tmp_path, raw)
    assert main(["chsh-scan", str(cfg)]) == 4
    row = read_csv(tmp_path / "out" / "chsh_scan.csv")[0]
    assert float(row["chsh_sup"]) == pytest.approx(2 * math.sqrt(2), abs=1e-6)


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {"lattice": {"length": 4}, "state": {"kind": "thermal",
                                                                      "beta": -2}})
    assert main(["chsh-scan", str(cfg)]) == 2
    assert "state.beta" in capsys.readouterr().err
    cfg = write_config(tmp_path, {"lattice": {"length": 4}, "regions": {"pairs": [[[0], [7]]]}},
                       "c2.yaml")
    assert main(["chsh-scan", str(cfg)]) == 2
    cfg = write_config(tmp_path, {"lattice": {"length": 6}, "model": {"name": "tfim"},
                                  "state": {"kind": "ground"}}, "c3.yaml")
    assert main(["bell-certify", str(cfg)]) == 2  # no inequality file


def test_formula_mismatch_is_config_error(tmp_path, repo_root):
    raw = {"lattice": {"length": 6}, "model": {"name": "tfim", "g": 2.0},
           "inequality": str(repo_root / "inequalities" / "chsh.yaml"),
           "certify": {"formula": "thm3_quench"}, "regions": {"sets": [[[0], [4]]]}}
    assert main(["bell-certify", str(write_config(tmp_path, raw))]) == 2


def test_numeric_failure_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"lattice": {"length": 4},
                                  "state": {"kind": "product", "initial": "up"}})
    assert main(["clustering-fit", str(cfg)]) == 3  # every sample is floored
    cfg = write_config(tmp_path, {"lattice": {"length": 4}, "model": {"name": "tfim"},
                                  "state": {"kind": "quench", "initial": "up",
                                            "times": [0.0, 0.5]},
                                  "fit": {"floor": -1.0}}, "c2.yaml")
    assert main(["quench", str(cfg)]) == 2  # negative floor rejected by validation


def test_clustering_fit_outputs(tmp_path):
    cfg = write_config(tmp_path, {"lattice": {"length": 8}, "model": {"name": "tfim", "g": 2.0},
                                  "operators": {"basis": ["x", "z"]}})
    assert main(["clustering-fit", str(cfg)]) == 0
    out = tmp_path / "out"
    fit = json.loads((out / "fit.json").read_text())
    report = json.loads((out / "dominance.json").read_text())
    assert fit["kind"] == "clustering" and fit["lam"] > 0
    assert report["dominates"] and report["worst_ratio"] <= 1
    assert len(read_csv(out / "samples.csv")) == 28 * 4


def test_quench_synthetic_self_test(tmp_path):
    raw = {"lattice": {"length": 10},
           "state": {"kind": "quench", "times": [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]},
           "regions": {"min_distance": 1},
           "quench": {"synthetic": {"C": 1.0, "lambda": 1.0, "v": 2.0}}}
    assert main(["quench", str(write_config(tmp_path, raw))]) == 0
    rows = read_csv(tmp_path / "out" / "light_cone.csv")
    assert all(r["dominated"] == "true" for r in rows)
    assert all(float(r["value"]) == 0 for r in rows if float(r["t"]) == 0)
    fit = json.loads((tmp_path / "out" / "fit.json").read_text())
    assert fit["C"] == pytest.approx(1, abs=1e-6)
    assert fit["lam"] == pytest.approx(1, abs=1e-6)
    assert fit["v"] == pytest.approx(2, abs=1e-6)


def test_quench_grid_matches_saved_states(tmp_path):
    times = [0.0, 0.2, 0.4, 0.6]
    raw = {"lattice": {"length": 10}, "model": {"name": "tfim", "J": 1.0, "g": 1.0},
           "state": {"kind": "quench", "initial": "up", "times": times},
           "regions": {"pairs": [[[0], [r]] for r in range(1, 9)]},
           "quench": {"save_states": True}}
    assert main(["quench", str(write_config(tmp_path, raw))]) == 0
    out = tmp_path / "out"
    saved = np.load(out / "states.npz")
    assert list(saved["t"]) == times
    rows = read_csv(out / "light_cone.csv")
    fit = json.loads((out / "fit.json").read_text())
    lat = build_lattice(10)
    for row in rows:
        t, r = float(row["t"]), float(row["r"])
        psi = ManyBodyState(saved["data"][times.index(t)], 10)
        direct = max(abs(connected_correlator(psi, pauli(a, 0), pauli(b, int(r))))
                     for a in "xyz" for b in "xyz")
        assert float(row["value"]) == pytest.approx(direct, abs=1e-12)
        envelope = fit["C"] * math.expm1(fit["lam"] * fit["v"] * t) * math.exp(-fit["lam"] * r)
        assert float(row["bound"]) == pytest.approx(envelope, rel=1e-12)
        assert row["dominated"] == "true"
        if t == 0:
            assert float(row["value"]) == 0
    assert lat.n_sites == 10


def test_quench_scan_uses_light_cone_epsilon(tmp_path):
    raw = {"lattice": {"length": 6}, "model": {"name": "tfim", "g": 1.0},
           "state": {"kind": "quench", "initial": "up", "times": [0.0, 0.5]},
           "fit": {"C": 1.0, "lambda": 1.0, "v": 2.0},
           "regions": {"pairs": [[[0], [4]]]}}
    assert main(["chsh-scan", str(write_config(tmp_path, raw))]) == 0
    rows = read_csv(tmp_path / "out" / "chsh_scan.csv")
    assert [r["formula"] for r in rows] == ["thm3_quench"] * 2
    assert float(rows[0]["epsilon"]) == 0
    assert float(rows[1]["epsilon"]) == pytest.approx(quench_epsilon(1, 1, 1, 1, 2, 0.5, 4))


def test_local_bound_command(repo_root, capsys):
    assert main(["local-bound", str(repo_root / "inequalities" / "chsh.yaml")]) == 0
    out = capsys.readouterr().out
    assert "delta_c: 2\n" in out
    assignment = json.loads(out.split("assignment: ")[1])
    assert len(assignment) == 2 and all(len(a) == 2 for a in assignment)
    assert main(["local-bound", str(repo_root / "inequalities" / "single_correlator.yaml")]) == 0
    assert "delta_c: 1\n" in capsys.readouterr().out
    assert main(["local-bound", str(repo_root / "inequalities" / "mermin3.yaml")]) == 0
    assert "delta_c: 2\n" in capsys.readouterr().out


def test_local_bound_errors(tmp_path):
    big = {"parties": 11, "settings": [2] * 11, "alpha": [[0, 0, 1.0]]}
    (tmp_path / "big.yaml").write_text(yaml.safe_dump(big))
    assert main(["local-bound", str(tmp_path / "big.yaml")]) == 3
    (tmp_path / "bad.yaml").write_text("parties: 2\nsettings: [1, 1]\ndelta_c: 5\n")
    assert main(["local-bound", str(tmp_path / "bad.yaml")]) == 2


def test_self_test(capsys):
    assert main(["self-test"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_chsh_inequality_object_matches_file(repo_root):
    from spinbell.bell import load_inequality
    assert load_inequality(repo_root / "inequalities" / "chsh.yaml").beta == chsh().beta


@pytest.mark.parametrize("name, command", [
    ("tfim_ground", "chsh-scan"), ("product", "chsh-scan"), ("clustering", "clustering-fit"),
    ("synthetic_quench", "quench"), ("certify_chsh", "bell-certify"),
    ("certify_gamma", "bell-certify"),
])
def test_shipped_configs_run(repo_root, tmp_path, name, command):
    assert main([command, str(repo_root / "configs" / f"{name}.yaml"),
                 "--out", str(tmp_path)]) == 0
