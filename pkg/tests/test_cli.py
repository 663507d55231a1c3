import json
import subprocess
import sys
from fractions import Fraction as F

import pytest

from grabforest import InvalidSequence, NotNormalized, ParseError, PlanarTree
from grabforest.cli import main, parse_law_spec, parse_tree_spec, resolve_config, UsageError


def test_parse_law_spec():
    law = parse_law_spec("0:0.5,2:0.5")
    assert law.pmf(0) == 0.5 and law.pmf(2) == 0.5 and not law.exact
    exact = parse_law_spec("0:1/2,2:1/2", "rational")
    assert exact.exact and exact.pmf(2) == F(1, 2)
    with pytest.raises(NotNormalized):
        parse_law_spec("0:0.5,2:0.6")
    with pytest.raises(NotNormalized):
        parse_law_spec("0:1/2,2:1/3", "rational")
    with pytest.raises(ParseError):
        parse_law_spec("0:0.5,x:0.5")


def test_parse_tree_spec():
    assert parse_tree_spec("(0)") == PlanarTree((0,))
    assert parse_tree_spec("(2,0,0)") == PlanarTree((2, 0, 0))
    with pytest.raises(InvalidSequence):
        parse_tree_spec("(0,0)")


def test_verify_lemma1_example(capsys):
    assert main(["verify-lemma1", "--arms", "2,0,0"], {}) == 0
    err = capsys.readouterr().err
    assert "uniform over 4 states, exact" in err


def test_kemperman_example(capsys):
    code = main(["kemperman", "--mu", "0:1/2,1:1/4,2:1/4", "--n-max", "40", "--mode", "rational"], {})
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["passed"]
    devs = {row["statistic"]: row["value"] for row in doc["rows"]}
    assert devs["max_dev_walk_formula"] == "0" and devs["max_dev_enumerated_normalizer"] == "0"


@pytest.mark.slow
def test_theorem2_example(tmp_path):
    out = tmp_path / "t2.json"
    argv = ["theorem2", "--mu", "0:0.5,2:0.5", "--tree", "(0)", "--n", "50,200,800", "--reps", "2000",
            "--seed", "42", "--out", str(out)]
    assert main(argv, {}) == 0
    doc = json.loads(out.read_text())
    l2 = [row["value"] for row in doc["rows"] if row["statistic"] == "l2"]
    assert l2[0] > l2[1] > l2[2]
    assert doc["parameters"]["config"]["seed"] == 42
    assert (tmp_path / "t2.l2.csv").exists()


def test_usage_errors(capsys):
    assert main([], {}) == 2
    assert main(["nonsense"], {}) == 2
    assert main(["theorem2", "--mu", "0:0.5,2:0.5", "--n", "10", "--reps", "5"], {}) == 2  # no seed
    assert main(["tilt", "--mu", "0:0.5,1:0.5", "--target", "1.5"], {}) == 2  # Unreachable
    assert main(["sizebias", "--mu", "0:0.5,2:0.6"], {}) == 2
    assert main(["sizebias", "--mu", "0:0.5,2:0.5", "--format", "xml"], {}) == 2
    assert main(["ratio", "--mu", "0:0.5,1:0.5", "--n", "10"], {}) == 2  # not critical
    assert main(["simulate", "--seed", "1"], {}) == 2
    assert "error" in capsys.readouterr().err


def test_criterion_failure_exit_code(capsys):
    # ratio still far from 1 at small n
    assert main(["ratio", "--mu", "0:0.35,1:0.3,2:0.35", "--n", "20,40", "--tol", "0.01"], {}) == 1


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"mu": "0:0.5,2:0.5", "n": [10, 20], "reps": 7, "seed": 3}))
    cfg = resolve_config("theorem2", {"config": str(cfg_file)}, {})
    assert cfg["reps"] == 7 and cfg["n"] == [10, 20] and cfg["tree"] == "(0)"
    cfg = resolve_config("theorem2", {"config": str(cfg_file)}, {"GF_REPS": "9"})
    assert cfg["reps"] == 9
    cfg = resolve_config("theorem2", {"config": str(cfg_file), "reps": "11"}, {"GF_REPS": "9"})
    assert cfg["reps"] == 11
    cfg = resolve_config("theorem2", {}, {"GF_CONFIG": str(cfg_file)})
    assert cfg["seed"] == 3


def test_config_rejects_unknown_keys(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"mu": "0:0.5,2:0.5", "colour": "red"}))
    with pytest.raises(UsageError):
        resolve_config("sizebias", {"config": str(cfg_file)}, {})
    assert main(["sizebias", "--config", str(cfg_file)], {}) == 2
    assert main(["sizebias", "--config", str(tmp_path / "missing.json")], {}) == 2


def test_env_seed(tmp_path, capsys):
    argv = ["simulate", "--arms", "2,0,0", "--reps", "3"]
    assert main(argv, {"GF_SEED": "5"}) == 0
    lines = capsys.readouterr().out.splitlines()
    assert json.loads(lines[0])["config"]["seed"] == 5 and len(lines) == 4


def test_simulate_records(tmp_path):
    out = tmp_path / "sim.jsonl"
    assert main(["simulate", "--mu", "0:0.5,1:0.3,2:0.2", "--n", "50", "--reps", "4", "--seed", "9",
                 "--full", "--out", str(out)], {}) == 0
    lines = out.read_text().splitlines()
    header, records = json.loads(lines[0]), [json.loads(x) for x in lines[1:]]
    assert header["config"]["seed"] == 9 and "rng" in header
    assert [r["stream"] for r in records] == [0, 1, 2, 3]
    assert all(r["n"] == 50 and "elapsed_ns" not in r and "vertex_labels" in r for r in records)
    meta = (tmp_path / "sim.meta.jsonl").read_text().splitlines()
    assert len(meta) == 4 and "elapsed_ns" in meta[0]


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--arms", "3,0,1,0,0", "--reps", "20", "--seed", "4"],
        ["dwass", "--mu", "0:0.5,2:0.5", "--reps", "2000", "--seed", "4", "--format", "csv"],
        ["configcmp", "--mu", "0:0.5,1:0.3,2:0.2", "--n", "2000", "--reps", "2000", "--seed", "4", "--tol", "0.2"],
    ],
)
def test_reruns_byte_identical(tmp_path, argv):
    a, b = tmp_path / "a" / "out.txt", tmp_path / "b" / "out.txt"
    assert main(argv + ["--out", str(a)], {}) == main(argv + ["--out", str(b)], {})
    for f in sorted(a.parent.iterdir()):
        if ".meta." not in f.name:
            assert f.read_bytes() == (b.parent / f.name).read_bytes(), f.name


def test_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "grabforest.cli", "sizebias", "--mu", "0:1/2,1:3/10,2:1/5", "--mode", "rational"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    doc = json.loads(proc.stdout)
    assert doc["details"]["nu"] == "0:3/7,1:4/7" and doc["details"]["molloy_reed"] == "-3/10"
