"""Command-line behaviour: exit codes, outputs, determinism."""

import json

import pytest

from coghier import bp, documents
from coghier.cli import main


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def thecat_doc(tmp_path):
    return write_json(tmp_path / "thecat.json", documents.thecat_document())


@pytest.fixture
def thecat_tree_doc(tmp_path):
    return write_json(tmp_path / "tree.json", bp.tree_to_document(bp.thecat_tree()))


# ---------------------------------------------------------------------------
# validate


def test_validate_hierarchy_document_ok(thecat_doc, capsys):
    assert main(["validate", thecat_doc]) == 0
    assert "OK" in capsys.readouterr().out


def test_validate_tree_document_ok(thecat_tree_doc, capsys):
    assert main(["validate", thecat_tree_doc]) == 0
    assert "OK (tree)" in capsys.readouterr().out


def test_validate_cyclic_document_fails(tmp_path, capsys):
    doc = documents.thecat_document()
    doc["edges"].append({"lower": "N4", "upper": "N1", "functions": "noop.edge"})
    path = write_json(tmp_path / "cyclic.json", doc)
    assert main(["validate", path]) == 1
    assert "cycle" in capsys.readouterr().out


def test_validate_malformed_json_is_input_error(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["validate", str(path)]) == 2
    assert "parse error" in capsys.readouterr().err


def test_validate_missing_file_is_input_error(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "absent.json")]) == 2


# ---------------------------------------------------------------------------
# bp


def test_bp_fixture_passes_and_prints_beliefs(thecat_tree_doc, capsys):
    assert main(["bp", thecat_tree_doc]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert "BEL(N2) = [0, 1]" in out


def test_bp_random_suite_passes(capsys):
    assert main(["bp", "--random", "10", "--seed", "7"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 10


def test_bp_zero_tolerance_fails_on_rounding(capsys):
    assert main(["bp", "--random", "3", "--seed", "1", "--tolerance", "0"]) == 1


def test_bp_requires_input():
    with pytest.raises(SystemExit) as err:
        main(["bp"])
    assert err.value.code == 2


def test_bp_negative_tolerance_is_input_error(thecat_tree_doc):
    assert main(["bp", thecat_tree_doc, "--tolerance", "-1"]) == 2


# ---------------------------------------------------------------------------
# servo


def test_servo_writes_outputs_and_reports_reduction(tmp_path, capsys):
    csv_path = tmp_path / "trials.csv"
    json_path = tmp_path / "summary.json"
    code = main(
        [
            "servo",
            "--trials",
            "5",
            "--seed",
            "42",
            "--csv",
            str(csv_path),
            "--json",
            str(json_path),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "reduction:" in out
    assert csv_path.exists() and json_path.exists()
    summary = json.loads(json_path.read_text())
    assert summary["reduction_percent"] >= 90.0
    assert set(summary) == {"context", "no_context", "reduction_percent"}
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "trial,mode,mean_error"
    assert len(lines) == 1 + 5 * 2


def test_servo_outputs_bit_identical_across_runs(tmp_path):
    args = ["servo", "--trials", "3", "--seed", "9"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--csv", str(first)]) == 0
    assert main(args + ["--csv", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_servo_single_mode_csv(tmp_path, capsys):
    csv_path = tmp_path / "one.csv"
    code = main(
        ["servo", "--trials", "2", "--mode", "no_context", "--csv", str(csv_path)]
    )
    assert code == 0
    body = csv_path.read_text()
    assert "no_context" in body
    assert ",context," not in body
    assert "reduction" not in capsys.readouterr().out


def test_servo_deterministic_without_noise(capsys):
    args = ["servo", "--trials", "1", "--noise-sigma", "0"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == first


def test_servo_bad_params_are_input_errors(capsys):
    assert main(["servo", "--dt", "0"]) == 2
    assert "bad parameters" in capsys.readouterr().err
