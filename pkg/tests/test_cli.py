"""Command-line front end: config handling, output files, exit codes."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from farmbess.cli import main
from farmbess.config import ConfigError, load_config


def _config(tmp_path, text, name="run.yaml") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


SMALL_SYNTH = """
dataset:
  synthetic:
    days: 4
    rng_seed: 3
hyperparams:
  total_episodes: 500
run:
  output_dir: "{out}"
  seeds: [7]
"""


# ---------------------------------------------------------------- config


def test_config_rejects_unknown_key(tmp_path):
    path = _config(tmp_path, "dataset:\n  synthetic: {}\nbogus_section: 1\n")
    with pytest.raises(ConfigError, match="bogus_section"):
        load_config(path)


def test_config_rejects_unknown_nested_key(tmp_path):
    path = _config(tmp_path, "battery:\n  capasity_kwh: 5\ndataset:\n  synthetic: {}\n")
    with pytest.raises(ConfigError, match="capasity_kwh"):
        load_config(path)


def test_config_defaults(tmp_path):
    path = _config(tmp_path, "dataset:\n  synthetic: {}\n")
    config = load_config(path)
    assert config.battery.capacity_kwh == 13.5
    assert config.hyperparams.total_episodes == 1_000_000
    assert config.encoding_kind.value == "hour-soc"
    assert config.seeds == (0,)


def test_config_path_and_synthetic_are_exclusive(tmp_path):
    path = _config(
        tmp_path, "dataset:\n  path: x.csv\n  synthetic:\n    days: 1\n"
    )
    with pytest.raises(ConfigError, match="mutually exclusive"):
        load_config(path)


def test_config_digest_stable(tmp_path):
    path = _config(tmp_path, SMALL_SYNTH.format(out=tmp_path / "o"))
    assert load_config(path).digest() == load_config(path).digest()


def test_config_custom_tariff_hours(tmp_path):
    path = _config(
        tmp_path,
        "dataset:\n  synthetic: {}\n"
        "tariff:\n  off_peak_hours: [0,1,2,3,4,5,6,7,8,9,10,11]\n"
        "  peak_hours: [12,13]\n",
    )
    config = load_config(path)
    assert 11 in config.tariff.off_peak_hours
    assert config.tariff.standard_hours == frozenset(range(14, 24))


# ---------------------------------------------------------------- gen-data


def test_gen_data_writes_expected_rows(tmp_path, capsys):
    out = tmp_path / "year.csv"
    assert main(["gen-data", "--days", "365", "--seed", "7", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 8761
    assert lines[0] == "hour,load_kwh,pv_kwh,wind_kwh,price_per_kwh"
    assert "annual_load_kwh" in capsys.readouterr().out


def test_gen_data_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["gen-data", "--days", "30", "--seed", "9", "--out", str(a)])
    main(["gen-data", "--days", "30", "--seed", "9", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_gen_data_rejects_zero_days(tmp_path, capsys):
    code = main(["gen-data", "--days", "0", "--out", str(tmp_path / "x.csv")])
    assert code != 0
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "\n" not in err.strip()


def test_gen_data_no_wind_flag(tmp_path):
    out = tmp_path / "dry.csv"
    main(["gen-data", "--days", "2", "--seed", "1", "--no-wind", "--out", str(out)])
    assert out.read_text().splitlines()[0] == "hour,load_kwh,pv_kwh,price_per_kwh"


# ---------------------------------------------------------------- train


def test_train_writes_three_files(tmp_path, capsys):
    out = tmp_path / "out"
    config = _config(tmp_path, SMALL_SYNTH.format(out=out))
    assert main(["train", "--config", str(config)]) == 0
    assert (out / "qtable_seed7.qt").exists()
    assert (out / "training_log_seed7.csv").exists()
    manifest = json.loads((out / "manifest_seed7.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["total_episodes"] == 500
    assert manifest["state_space_size"] == 264
    assert manifest["config_sha256"]


def test_train_two_seeds_two_tables(tmp_path):
    out = tmp_path / "out"
    text = SMALL_SYNTH.format(out=out).replace("seeds: [7]", "seeds: [7, 8]")
    config = _config(tmp_path, text)
    assert main(["train", "--config", str(config)]) == 0
    assert (out / "qtable_seed7.qt").exists()
    assert (out / "qtable_seed8.qt").exists()


def test_train_reproducible_qtable_file(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    config = _config(tmp_path, SMALL_SYNTH.format(out=tmp_path / "unused"))
    assert main(["train", "--config", str(config), "--out", str(out_a)]) == 0
    assert main(["train", "--config", str(config), "--out", str(out_b)]) == 0
    assert (out_a / "qtable_seed7.qt").read_bytes() == (out_b / "qtable_seed7.qt").read_bytes()


def test_train_wind_encoding_on_windless_data(tmp_path, capsys):
    csv = tmp_path / "dry.csv"
    main(["gen-data", "--days", "2", "--seed", "1", "--no-wind", "--out", str(csv)])
    config = _config(
        tmp_path,
        f"dataset:\n  path: {csv}\n"
        "encoding:\n  kind: hour-soc-load-pv-wind\n"
        "hyperparams:\n  total_episodes: 10\n"
        f"run:\n  output_dir: {tmp_path / 'o'}\n",
    )
    code = main(["train", "--config", str(config)])
    assert code != 0
    assert "wind_kwh" in capsys.readouterr().err


def test_train_episodes_override_flag(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, SMALL_SYNTH.format(out=out))
    assert main(["train", "--config", str(config), "--episodes", "50"]) == 0
    manifest = json.loads((out / "manifest_seed7.json").read_text())
    assert manifest["total_episodes"] == 50


def test_output_dir_env_override(tmp_path, monkeypatch):
    env_out = tmp_path / "env_out"
    monkeypatch.setenv("FARMBESS_OUTPUT_DIR", str(env_out))
    config = _config(tmp_path, SMALL_SYNTH.format(out=tmp_path / "ignored"))
    assert main(["train", "--config", str(config)]) == 0
    assert (env_out / "qtable_seed7.qt").exists()


# ---------------------------------------------------------------- evaluate


def test_evaluate_no_battery_zero_activity(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, SMALL_SYNTH.format(out=out))
    assert main(["evaluate", "--config", str(config), "baseline:no-battery"]) == 0
    rows = (out / "eval_baseline-no-battery.csv").read_text().splitlines()[1:]
    soc_values = {row.split(",")[4] for row in rows}
    assert len(soc_values) == 1  # battery never moves


def test_evaluate_tou_grid_charges_only_off_peak(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, SMALL_SYNTH.format(out=out))
    assert main(["evaluate", "--config", str(config), "baseline:tou"]) == 0
    report = json.loads((out / "eval_baseline-tou.json").read_text())
    assert report["label"] == "baseline:tou"

    series = load_config(config).load_series()
    rows = (out / "eval_baseline-tou.csv").read_text().splitlines()[1:]
    off_peak = load_config(config).tariff.off_peak_hours
    for row, record in zip(rows, series):
        grid_import = float(row.split(",")[2])
        deficit = max(0.0, record.load_kwh - record.renewables_kwh)
        if grid_import > deficit + 1e-9:
            assert record.hour_of_day in off_peak


def test_evaluate_trained_qtable(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, SMALL_SYNTH.format(out=out))
    assert main(["train", "--config", str(config)]) == 0
    table = out / "qtable_seed7.qt"
    assert main(["evaluate", "--config", str(config), f"qtable:{table}"]) == 0
    assert (out / "eval_qtable-qtable_seed7.csv").exists()
    assert (out / "eval_qtable-qtable_seed7.json").exists()


def test_evaluate_missing_qtable(tmp_path, capsys):
    config = _config(tmp_path, SMALL_SYNTH.format(out=tmp_path / "o"))
    code = main(["evaluate", "--config", str(config), "qtable:absent.qt"])
    assert code != 0
    assert "not found" in capsys.readouterr().err


def test_evaluate_encoding_mismatch(tmp_path, capsys):
    out = tmp_path / "out"
    config = _config(tmp_path, SMALL_SYNTH.format(out=out))
    assert main(["train", "--config", str(config)]) == 0
    other = _config(
        tmp_path,
        SMALL_SYNTH.format(out=out) + "encoding:\n  kind: hour-soc-load-pv\n",
        name="other.yaml",
    )
    code = main(["evaluate", "--config", str(other), f"qtable:{out / 'qtable_seed7.qt'}"])
    assert code != 0
    assert "does not match" in capsys.readouterr().err


def test_evaluate_unknown_baseline(tmp_path, capsys):
    config = _config(tmp_path, SMALL_SYNTH.format(out=tmp_path / "o"))
    assert main(["evaluate", "--config", str(config), "baseline:mppt"]) != 0
    assert "unknown baseline" in capsys.readouterr().err


# ---------------------------------------------------------------- compare


def test_compare_two_baselines_and_qtable(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, SMALL_SYNTH.format(out=out))
    assert main(["train", "--config", str(config)]) == 0
    table = out / "qtable_seed7.qt"
    code = main([
        "compare", "--config", str(config),
        "baseline:no-battery", "baseline:tou", f"qtable:{table}",
    ])
    assert code == 0
    rows = json.loads((out / "comparison.json").read_text())
    assert len(rows) == 2
    assert {r["base"] for r in rows} == {"baseline:no-battery"}
    text = (out / "comparison.txt").read_text()
    assert "candidate" in text and "import_reduction" in text


def test_compare_with_itself_is_zero(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, SMALL_SYNTH.format(out=out))
    code = main([
        "compare", "--config", str(config),
        "--base", "baseline:msc", "baseline:msc",
    ])
    assert code == 0
    rows = json.loads((out / "comparison.json").read_text())
    assert rows[0]["import_reduction_pct"] == 0.0
    assert rows[0]["cost_reduction_pct"] == 0.0


def test_compare_needs_two_refs(tmp_path, capsys):
    config = _config(tmp_path, SMALL_SYNTH.format(out=tmp_path / "o"))
    assert main(["compare", "--config", str(config), "baseline:tou"]) != 0
    assert "two controller references" in capsys.readouterr().err


def test_compare_ablation_three_rows(tmp_path):
    out = tmp_path / "out"
    config = _config(
        tmp_path,
        "dataset:\n  synthetic:\n    days: 3\n    rng_seed: 2\n"
        "hyperparams:\n  total_episodes: 200\n"
        f"run:\n  output_dir: {out}\n  seeds: [4]\n",
    )
    assert main(["compare", "--config", str(config), "--ablation"]) == 0
    rows = json.loads((out / "comparison.json").read_text())
    assert len(rows) == 3
    kinds = [r["candidate"] for r in rows]
    assert kinds == [
        "qlearning:hour-soc",
        "qlearning:hour-soc-load-pv",
        "qlearning:hour-soc-load-pv-wind",
    ]
