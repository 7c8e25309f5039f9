import json

import pandas as pd
import pytest

from compbias.harness import ExperimentConfig, run_sweep
from compbias.report_cli import (
    COMPLEXITY_COLUMNS,
    build_parser,
    cli_main,
    curves_frame,
    load_config,
    read_runs,
    runs_frame,
    write_csv,
)

QUICK_ARGS = ["--epochs", "5"]


def test_no_arguments_prints_usage(capsys):
    assert cli_main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_is_a_usage_error(capsys):
    assert cli_main(["enumerate", "--bogus"]) == 2
    assert cli_main(["nonsense"]) == 2


def test_enumerate_footer(capsys):
    assert cli_main(["enumerate", "--L", "2", "--V", "2"]) == 0
    out = capsys.readouterr().out
    assert "total: 256" in out
    assert "compositional: 8" in out
    assert "holistic: 16" in out
    assert "non-bijection: 232" in out
    assert "fully degenerate: 4" in out


def test_enumerate_limit_is_a_runtime_error():
    assert cli_main(["enumerate", "--L", "2", "--V", "3"]) == 1


def test_complexity_csv(tmp_path):
    out = tmp_path / "cl.csv"
    assert cli_main(["complexity", "--L", "2", "--V", "2", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == COMPLEXITY_COLUMNS
    assert len(frame) == 256
    assert frame.loc[27, "sequence"] == "Sb0;Sr1;Sx0;Sc1"
    assert '"Sbx,rx,bc,rc00"' in out.read_text()

    manifest = json.loads((tmp_path / "cl_manifest.json").read_text())
    assert manifest["alphabet"]["attribute_0"] == {"blue": "b", "red": "r"}


def test_complexity_into_directory(tmp_path):
    assert cli_main(["complexity", "--out", str(tmp_path / "results")]) == 0
    assert (tmp_path / "results" / "complexity.csv").exists()


def test_bounds(capsys, tmp_path):
    assert cli_main(["bounds", "--L", "2", "--V", "2", "--out", str(tmp_path / "gamma.csv")]) == 0
    out = capsys.readouterr().out
    assert "8.0000" in out and "4.0000" in out
    assert "k_shared=1: 6.0000" in out
    grid = pd.read_csv(tmp_path / "gamma.csv")
    assert len(grid) == 25
    assert grid["regime_holds"].all()


def test_config_load_order(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"encoding": "oht3", "seed": 3, "epochs": 10}))
    parser = build_parser()

    args = parser.parse_args(["train", "--out", "x", "--config", str(path)])
    assert load_config(args, environ={}).seed == 3
    assert load_config(args, environ={"COMP_BIAS_SEED": "9"}).seed == 9

    args = parser.parse_args(["train", "--out", "x", "--config", str(path), "--seed", "11", "--lr", "0.01"])
    config = load_config(args, environ={"COMP_BIAS_SEED": "9"})
    assert config.seed == 11
    assert config.learning_rate == 0.01
    assert config.encoding.value == "oht3"
    assert config.epochs == 10


def test_config_file_with_unknown_field_fails(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"batch_size": 4}))
    assert cli_main(["train", "--out", str(tmp_path / "out"), "--config", str(path)]) == 1


def test_runs_round_trip(tmp_path):
    results = run_sweep(ExperimentConfig(epochs=5), mapping_ids=[0, 27, 30, 200])
    write_csv(runs_frame(results), tmp_path / "runs.csv")
    write_csv(curves_frame(results), tmp_path / "curves.csv")
    assert read_runs(tmp_path) == results


@pytest.mark.slow
def test_train_correlate_plot(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert cli_main(["train", *QUICK_ARGS, "--out", str(out), "--dump-dataset"]) == 0
    for name in ("runs.csv", "curves.csv", "manifest.json", "inputs.csv", "labels.csv"):
        assert (out / name).exists()

    runs = pd.read_csv(out / "runs.csv")
    assert len(runs) == 256
    assert len(pd.read_csv(out / "curves.csv")) == 256 * 5
    assert len(pd.read_csv(out / "inputs.csv")) == 4
    assert len(pd.read_csv(out / "labels.csv")) == 256 * 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["epochs"] == 5
    assert manifest["prng"].startswith("numpy PCG64")

    assert cli_main(["correlate", "--runs", str(out), "--shuffles", "100", "--out", str(tmp_path / "corr.csv")]) == 0
    assert len(pd.read_csv(tmp_path / "corr.csv")) == 2

    assert cli_main(["plot", "--runs", str(out)]) == 0
    for name in ("curves.svg", "scatter_cl.svg", "scatter_topsim.svg"):
        assert (out / name).read_text().count("data-mapping-id") >= 256


@pytest.mark.slow
def test_train_is_byte_deterministic(tmp_path):
    for name in ("a", "b"):
        assert cli_main(["train", *QUICK_ARGS, "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "runs.csv").read_bytes() == (tmp_path / "b" / "runs.csv").read_bytes()
    assert (tmp_path / "a" / "curves.csv").read_bytes() == (tmp_path / "b" / "curves.csv").read_bytes()


def test_probe_single_mapping(capsys):
    assert cli_main(["probe", *QUICK_ARGS, "--mapping-id", "27", "--probe-example", "0"]) == 0
    out = capsys.readouterr().out
    assert "compositional_bijection" in out
    assert "alignment:" in out


def test_probe_class_summary(capsys):
    assert cli_main(["probe", "--seeds", "2"]) == 0
    assert "difference" in capsys.readouterr().out


def test_missing_runs_directory_fails(tmp_path):
    assert cli_main(["correlate", "--runs", str(tmp_path / "missing")]) == 1
