"""Exit codes, file handling, and golden outputs of the four
subcommands, driven through main() with real files."""

from __future__ import annotations

import json
import subprocess
import sys

import pytest

import cmimpute.casestudy
from cmimpute.casestudy import IMPUTATION_PARTITION, fixture_text
from cmimpute.cli import (
    EXIT_INSUFFICIENT,
    EXIT_INTERNAL,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_UNLABELED,
    EXIT_USAGE,
    SEED_ENV_VAR,
    main,
)

QUERY_HEADER = "P1,P2,P3,P4\n"
NEW_RECORD_ROW = "2,5,2,9\n"


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def impute_files(tmp_path):
    """Input data, schema, and a config pinning the reference
    partition, ready for the impute subcommand."""
    data = write(tmp_path / "data.csv", fixture_text("table03_missing_raw.csv"))
    schema = write(tmp_path / "schema.json", fixture_text("schema_missing.json"))
    config = write(
        tmp_path / "run.json",
        json.dumps(
            {
                "mode": "paper-signed",
                "init": {
                    "policy": "fixed-partition",
                    "groups": [list(g) for g in IMPUTATION_PARTITION],
                },
            }
        ),
    )
    return tmp_path, data, schema, config


@pytest.fixture
def classify_files(tmp_path):
    train = write(tmp_path / "train.csv", fixture_text("table16_classification.csv"))
    schema = write(tmp_path / "schema.json", fixture_text("schema_classification.json"))
    query = write(tmp_path / "query.csv", QUERY_HEADER + NEW_RECORD_ROW)
    config = write(
        tmp_path / "run.json",
        json.dumps(
            {
                "init": {
                    "policy": "fixed-partition",
                    "groups": [
                        ["R1", "R4", "R6", "R9"],
                        ["R2", "R7", "R8", "R3", "R5"],
                    ],
                }
            }
        ),
    )
    return tmp_path, train, schema, query, config


# --- impute ---


def test_impute_recovers_the_reference_table(impute_files):
    tmp_path, data, schema, config = impute_files
    out = tmp_path / "out.csv"
    report = tmp_path / "prov.csv"
    code = main(
        [
            "impute",
            "--data", data,
            "--schema", schema,
            "--config", config,
            "--out", str(out),
            "--report", str(report),
        ]
    )
    assert code == EXIT_OK
    assert out.read_text() == fixture_text("table01_raw.csv")
    lines = report.read_text().strip().splitlines()
    assert lines[1] == "R3,A3,R8,2,d32,paper-signed,single-donor"
    assert lines[2] == "R5,A4,R8,7,,paper-signed,single-donor"


def test_impute_complete_input_is_identity(tmp_path):
    data = write(tmp_path / "data.csv", fixture_text("table01_raw.csv"))
    schema = write(tmp_path / "schema.json", fixture_text("schema_missing.json"))
    out = tmp_path / "out.csv"
    report = tmp_path / "prov.csv"
    code = main(
        ["impute", "--data", data, "--schema", schema, "--out", str(out), "--report", str(report)]
    )
    assert code == EXIT_OK
    assert out.read_text() == fixture_text("table01_raw.csv")
    assert report.read_text().strip().splitlines() == [
        "query,attribute,donors,value,symbol,mode,tie_policy"
    ]


def test_impute_all_missing_record_exits_3_naming_it(tmp_path, capsys):
    data = write(
        tmp_path / "data.csv",
        "A1,A2,A3,A4,Class\nc11,5,d31,10,CLASS-1\nc13,7,d31,5,CLASS-2\n?,?,?,?,CLASS-1\n",
    )
    schema = write(tmp_path / "schema.json", fixture_text("schema_missing.json"))
    code = main(["impute", "--data", data, "--schema", schema, "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_INSUFFICIENT
    assert "R3" in capsys.readouterr().err


def test_impute_missing_data_file_exits_2(tmp_path, capsys):
    schema = write(tmp_path / "schema.json", fixture_text("schema_missing.json"))
    code = main(
        ["impute", "--data", str(tmp_path / "nope.csv"), "--schema", schema, "--out", str(tmp_path / "o.csv")]
    )
    assert code == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_impute_missing_required_flag_exits_2(capsys):
    assert main(["impute", "--out", "x.csv"]) == EXIT_USAGE
    assert "--data" in capsys.readouterr().err


def test_impute_rejects_overwriting_its_input(impute_files, capsys):
    _, data, schema, _ = impute_files
    code = main(["impute", "--data", data, "--schema", schema, "--out", data])
    assert code == EXIT_USAGE
    assert "overwrite" in capsys.readouterr().err


def test_impute_does_not_mutate_inputs(impute_files):
    tmp_path, data, schema, config = impute_files
    before = (open(data).read(), open(schema).read())
    main(["impute", "--data", data, "--schema", schema, "--config", config, "--out", str(tmp_path / "o.csv")])
    assert (open(data).read(), open(schema).read()) == before


def test_impute_identical_invocations_identical_outputs(impute_files):
    tmp_path, data, schema, config = impute_files
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["impute", "--data", data, "--schema", schema, "--config", config]
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert a.read_text() == b.read_text()


def test_flag_beats_config_file(impute_files):
    tmp_path, data, schema, config = impute_files
    report = tmp_path / "prov.csv"
    code = main(
        [
            "impute",
            "--data", data,
            "--schema", schema,
            "--config", config,
            "--mode", "absolute",
            "--out", str(tmp_path / "o.csv"),
            "--report", str(report),
        ]
    )
    assert code == EXIT_OK
    # The config file says paper-signed; the flag overrides it.
    assert ",absolute," in report.read_text().splitlines()[1]


def test_invalid_mode_value_in_config_exits_2(tmp_path, capsys):
    data = write(tmp_path / "data.csv", fixture_text("table03_missing_raw.csv"))
    schema = write(tmp_path / "schema.json", fixture_text("schema_missing.json"))
    config = write(tmp_path / "run.json", json.dumps({"mode": "sideways"}))
    code = main(["impute", "--data", data, "--schema", schema, "--config", config, "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_USAGE
    assert "mode" in capsys.readouterr().err


def test_invalid_mode_flag_raises_argparse_exit():
    with pytest.raises(SystemExit) as excinfo:
        main(["impute", "--mode", "sideways"])
    assert excinfo.value.code == EXIT_USAGE


def test_malformed_config_json_exits_2(tmp_path, capsys):
    data = write(tmp_path / "data.csv", fixture_text("table03_missing_raw.csv"))
    schema = write(tmp_path / "schema.json", fixture_text("schema_missing.json"))
    config = write(tmp_path / "run.json", "{broken")
    code = main(["impute", "--data", data, "--schema", schema, "--config", config, "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_USAGE
    assert "JSON" in capsys.readouterr().err


def test_seed_from_environment(impute_files, monkeypatch):
    tmp_path, data, schema, _ = impute_files
    monkeypatch.setenv(SEED_ENV_VAR, "7")
    code = main(["impute", "--data", data, "--schema", schema, "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_OK


def test_non_integer_environment_seed_exits_2(impute_files, monkeypatch, capsys):
    tmp_path, data, schema, _ = impute_files
    monkeypatch.setenv(SEED_ENV_VAR, "lucky")
    code = main(["impute", "--data", data, "--schema", schema, "--out", str(tmp_path / "o.csv")])
    assert code == EXIT_USAGE
    assert SEED_ENV_VAR in capsys.readouterr().err


# --- classify ---


def test_classify_reference_query_signed(classify_files, tmp_path):
    _, train, schema, query, config = classify_files
    out = tmp_path / "labels.csv"
    code = main(
        [
            "classify",
            "--train", train,
            "--schema", schema,
            "--query", query,
            "--config", config,
            "--mode", "paper-signed",
            "--out", str(out),
        ]
    )
    assert code == EXIT_OK
    assert out.read_text() == "query,labels,nearest\nQ1,Level-2,R8\n"


def test_classify_reference_query_absolute_with_baseline(classify_files, tmp_path):
    _, train, schema, query, config = classify_files
    out = tmp_path / "labels.csv"
    code = main(
        [
            "classify",
            "--train", train,
            "--schema", schema,
            "--query", query,
            "--config", config,
            "--with-knn-baseline",
            "--out", str(out),
        ]
    )
    assert code == EXIT_OK
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "query,labels,nearest,knn_labels,knn_nearest"
    assert lines[1] == "Q1,Level-2,R9,Level-1;Level-2,R4;R9"


def test_classify_writes_to_stdout_without_out(classify_files, capsys):
    _, train, schema, query, config = classify_files
    code = main(
        ["classify", "--train", train, "--schema", schema, "--query", query, "--config", config]
    )
    assert code == EXIT_OK
    assert "Q1,Level-2" in capsys.readouterr().out


def test_classify_empty_query_file_gives_header_only_report(classify_files, tmp_path):
    _, train, schema, _, config = classify_files
    empty = write(tmp_path / "empty.csv", "")
    out = tmp_path / "labels.csv"
    code = main(
        ["classify", "--train", train, "--schema", schema, "--query", empty, "--config", config, "--out", str(out)]
    )
    assert code == EXIT_OK
    assert out.read_text() == "query,labels,nearest\n"


def test_classify_wrong_arity_query_exits_2_naming_row(classify_files, tmp_path, capsys):
    _, train, schema, _, config = classify_files
    bad = write(tmp_path / "bad.csv", QUERY_HEADER + "2,5,2,9\n1,2,3\n")
    code = main(["classify", "--train", train, "--schema", schema, "--query", bad, "--config", config])
    assert code == EXIT_USAGE
    assert "row 3" in capsys.readouterr().err


def test_classify_incomplete_query_exits_2(classify_files, tmp_path, capsys):
    _, train, schema, _, config = classify_files
    holed = write(tmp_path / "holed.csv", QUERY_HEADER + "2,?,2,9\n")
    code = main(["classify", "--train", train, "--schema", schema, "--query", holed, "--config", config])
    assert code == EXIT_USAGE
    assert "missing" in capsys.readouterr().err


def test_classify_unlabeled_training_exits_4(tmp_path, capsys):
    rows = fixture_text("table16_classification.csv").splitlines()
    rows[3] = rows[3].rsplit(",", 1)[0] + ","  # drop R3's label
    train = write(tmp_path / "train.csv", "\n".join(rows) + "\n")
    schema = write(tmp_path / "schema.json", fixture_text("schema_classification.json"))
    query = write(tmp_path / "query.csv", QUERY_HEADER + NEW_RECORD_ROW)
    code = main(["classify", "--train", train, "--schema", schema, "--query", query])
    assert code == EXIT_UNLABELED
    assert "R3" in capsys.readouterr().err


# --- evaluate ---


def test_evaluate_writes_report_and_summary(tmp_path):
    spec = write(
        tmp_path / "exp.json",
        json.dumps(
            {
                "synthetic": {"records": 15, "seed": 4},
                "methods": ["cluster-map-absolute", "per-class-mean-mode"],
                "rates": [0.1],
                "trials": 2,
                "master_seed": 5,
            }
        ),
    )
    out = tmp_path / "report.json"
    summary = tmp_path / "summary.csv"
    code = main(["evaluate", "--config", spec, "--out", str(out), "--summary", str(summary)])
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert {r["method"] for r in payload["results"]} == {
        "cluster-map-absolute",
        "per-class-mean-mode",
    }
    assert len(payload["results"]) == 4
    assert summary.read_text().startswith("method,rate,trial")


def test_evaluate_plan_reproduces_the_reference_scores(tmp_path, capsys):
    write(tmp_path / "data.csv", fixture_text("table01_raw.csv"))
    write(tmp_path / "schema.json", fixture_text("schema_missing.json"))
    spec = write(
        tmp_path / "exp.json",
        json.dumps(
            {
                "dataset": "data.csv",
                "schema": "schema.json",
                "plan": [["R3", 2], ["R5", 3]],
                "methods": ["cluster-map-paper-signed"],
            }
        ),
    )
    code = main(["evaluate", "--config", spec])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    row = payload["results"][0]
    assert row["numeric_rmse"] == 0.0
    assert row["categorical_accuracy"] == 1.0


def test_evaluate_unknown_method_exits_2(tmp_path, capsys):
    spec = write(
        tmp_path / "exp.json",
        json.dumps({"synthetic": {"records": 12}, "methods": ["telepathy"]}),
    )
    assert main(["evaluate", "--config", spec]) == EXIT_USAGE
    assert "telepathy" in capsys.readouterr().err


def test_evaluate_requires_config_flag(capsys):
    assert main(["evaluate"]) == EXIT_USAGE
    assert "--config" in capsys.readouterr().err


def test_evaluate_missing_config_file_exits_2(tmp_path):
    assert main(["evaluate", "--config", str(tmp_path / "nope.json")]) == EXIT_USAGE


# --- casestudy ---


def test_casestudy_default_run_passes(capsys):
    code = main(["casestudy"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "0 mismatches" in out
    assert "4 documented errata" in out


def test_casestudy_writes_report_file(tmp_path, capsys):
    out = tmp_path / "report.txt"
    code = main(["casestudy", "--out", str(out)])
    assert code == EXIT_OK
    assert out.read_text() == capsys.readouterr().out


def test_casestudy_tight_tolerance_reports_mismatches(capsys):
    # The reference tables print six decimals, so a tolerance below
    # their rounding error must surface mismatches and exit 5.
    code = main(["casestudy", "--tolerance", "1e-9"])
    captured = capsys.readouterr()
    assert code == EXIT_MISMATCH
    assert "mismatch" in captured.err


def test_casestudy_nonpositive_tolerance_exits_2(capsys):
    assert main(["casestudy", "--tolerance", "0"]) == EXIT_USAGE
    assert "positive" in capsys.readouterr().err


def test_casestudy_missing_fixture_exits_2(monkeypatch, capsys):
    def boom(name):
        raise FileNotFoundError(f"fixture {name} is gone")

    monkeypatch.setattr(cmimpute.casestudy, "fixture_text", boom)
    assert main(["casestudy"]) == EXIT_USAGE
    assert "gone" in capsys.readouterr().err


# --- dispatch ---


def test_exit_code_constants_are_documented_values():
    assert (EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_INSUFFICIENT, EXIT_UNLABELED, EXIT_MISMATCH) == (
        0, 1, 2, 3, 4, 5,
    )


def test_unknown_subcommand_raises_argparse_exit():
    with pytest.raises(SystemExit) as excinfo:
        main(["transmogrify"])
    assert excinfo.value.code == EXIT_USAGE


def test_installed_console_script_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "cmimpute.cli"],
        capture_output=True,
        text=True,
    )
    # Module execution without a subcommand is a usage error.
    assert proc.returncode == EXIT_USAGE
