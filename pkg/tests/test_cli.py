import csv

import pytest
import yaml

from riskwarn.cli import main, table_text
from riskwarn.config import ConfigError, load_config, run_config
from riskwarn.core import load_scenario

SMALL = {
    "suite": {"per_kind": 1, "duration_range": [8, 9]},
    "noise": {"sigmas": [0.0, 0.2], "ps": [0.0, 0.05], "repeats": 2, "methods": ["ttc", "distance"]},
    "ga": {"population_size": 6, "generations": 2},
    "correlate": {"n_samples": 12},
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return str(path)


def read(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_generate_writes_reloadable_suite(tmp_path, config):
    out = tmp_path / "gen"
    assert main(["generate", "--config", config, "--out", str(out)]) == 0
    files = sorted(out.glob("*.jsonl"))
    assert len(files) == 6
    assert all(len(load_scenario(f)) > 0 for f in files)
    first = [f.read_bytes() for f in files]
    assert main(["generate", "--config", config, "--out", str(out)]) == 0
    assert [f.read_bytes() for f in files] == first


def test_generate_noise_variants(tmp_path, config):
    extra = tmp_path / "noise.yaml"
    extra.write_text(yaml.safe_dump({"generate": {"sigmas": [0.1, 0.2, 0.3], "p": 0.0}}))
    out = tmp_path / "gen"
    assert main(["generate", "--config", config, "--config", str(extra), "--out", str(out)]) == 0
    assert len(list(out.glob("*.jsonl"))) == 6 * 4
    assert len(read(out / "suite_index.csv")) == 24


def test_full_default_suite_has_24_files(tmp_path):
    out = tmp_path / "gen"
    assert main(["generate", "--out", str(out)]) == 0
    assert len(list(out.glob("*.jsonl"))) == 24


def test_evaluate_from_files_matches_generated_suite(tmp_path, config):
    gen = tmp_path / "gen"
    main(["generate", "--config", config, "--out", str(gen)])
    assert main(["evaluate", "--config", config, "--method", "ttc", "--out", str(tmp_path / "a")]) == 0
    assert main(["evaluate", "--config", config, "--method", "ttc", "--scenarios", str(gen),
                 "--out", str(tmp_path / "b")]) == 0
    a = read(tmp_path / "a" / "evaluate_ttc_plain.csv")
    b = read(tmp_path / "b" / "evaluate_ttc_plain.csv")
    assert a[-1] == b[-1] and a[-1]["scenario"] == "pooled"
    assert len(a) == 7


def test_evaluate_to_stdout(capsys, config):
    assert main(["evaluate", "--config", config, "--method", "distance", "--variant", "hyst"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# evaluate_distance_hysteresis.csv\nscenario,tp,fp,fn,iou\n")


def test_sweep_zero_noise_matches_evaluate(tmp_path, config):
    assert main(["sweep-noise", "--config", config, "--out", str(tmp_path / "sw"), "--no-plots"]) == 0
    rows = read(tmp_path / "sw" / "sweep_noise.csv")
    assert len(rows) == 2 * 2 * 2 * 2 * 2
    assert not (tmp_path / "sw" / "sweep_noise.png").exists()
    main(["evaluate", "--config", config, "--method", "ttc", "--variant", "hyst", "--out", str(tmp_path / "ev")])
    pooled = read(tmp_path / "ev" / "evaluate_ttc_hysteresis.csv")[-1]
    clean = [r for r in rows if (r["method"], r["variant"], r["sigma"], r["p"]) == ("ttc", "hysteresis", "0.0", "0.0")]
    assert len(clean) == 2
    for r in clean:
        assert (r["tp"], r["fp"], r["fn"], r["iou"]) == (pooled["tp"], pooled["fp"], pooled["fn"], pooled["iou"])
    summary = read(tmp_path / "sw" / "sweep_noise_summary.csv")
    assert all(float(s["iou_std"]) == 0.0 for s in summary if s["sigma"] == "0.0" and s["p"] == "0.0")


def test_sweep_is_byte_identical_across_workers(tmp_path, config):
    for w in ("1", "2"):
        assert main(["sweep-noise", "--config", config, "--workers", w, "--repeats", "1",
                     "--out", str(tmp_path / w), "--no-plots"]) == 0
    assert (tmp_path / "1" / "sweep_noise.csv").read_bytes() == (tmp_path / "2" / "sweep_noise.csv").read_bytes()


def test_tune_writes_reusable_overrides(tmp_path, config):
    out = tmp_path / "tu"
    assert main(["tune", "--config", config, "--method", "distance", "--out", str(out)]) == 0
    params = read(out / "tune_distance_plain_params.csv")
    assert [p["parameter"] for p in params] == ["distance_threshold", "iou"]
    assert len(read(out / "tune_distance_plain_history.csv")) == 3
    assert (out / "tune_distance_plain_history.png").exists()
    tuned = out / "tune_distance_plain.yaml"
    cfg = load_config([config, str(tuned)])
    assert run_config(cfg, "distance").distance.distance_threshold == pytest.approx(float(params[0]["value"]))
    main(["evaluate", "--config", config, "--config", str(tuned), "--method", "distance", "--out", str(out)])
    assert read(out / "evaluate_distance_plain.csv")[-1]["iou"] == params[1]["value"]


def test_tune_hysteresis_grid(tmp_path, config):
    grid = tmp_path / "grid.yaml"
    grid.write_text(yaml.safe_dump({"tune": {"hysteresis_grid": True, "n_on": [1, 2], "n_off": [1, 3],
                                             "noise": {"sigma": 0.2, "p": 0.05, "copies": 1}}}))
    out = tmp_path / "tu"
    assert main(["tune", "--config", config, "--config", str(grid), "--method", "ttc", "--variant", "hyst",
                 "--out", str(out)]) == 0
    assert len(read(out / "tune_ttc_hysteresis_grid.csv")) == 6
    over = yaml.safe_load((out / "tune_ttc_hysteresis.yaml").read_text())["overrides"]["ttc/hysteresis"]
    assert 1 <= over["n_on"] <= 2 and 1 <= over["n_off"] <= 3


def test_correlate_outputs_square_matrix(tmp_path, config):
    assert main(["correlate", "--config", config, "--out", str(tmp_path)]) == 0
    rows = read(tmp_path / "correlation.csv")
    assert [r[""] for r in rows] == ["risk_threshold", "horizon_s_max", "interval_ds", "escape_rate", "IoU"]
    assert all(float(r[r[""]]) == 1.0 for r in rows)
    assert len(read(tmp_path / "correlation_samples.csv")) == 12
    assert (tmp_path / "correlation.png").exists()


@pytest.mark.parametrize("argv", [
    ["evaluate", "--config", "/nonexistent.yaml"],
    ["evaluate", "--scenarios", "/nonexistent"],
    ["generate", "--out", "/proc/forbidden/x"],
])
def test_errors_exit_nonzero_with_diagnostic(capsys, argv):
    assert main(argv) != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error:")


def test_invalid_config_values(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("risk: {risk_threshold: 2.0}\n")
    with pytest.raises(ConfigError, match="risk_threshold"):
        run_config(load_config([bad]))
    bad.write_text("riks: {}\n")
    with pytest.raises(ConfigError, match="riks"):
        load_config([bad])
    bad.write_text("ttc: {time_limit: 3}\n")
    with pytest.raises(ConfigError, match="time_limit"):
        run_config(load_config([bad]))
    assert main(["evaluate", "--config", str(bad)]) == 1


def test_flags_override_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 5\nmethod: ttc\n")
    cfg = load_config([path], {"seed": 9, "method": None})
    assert cfg["seed"] == 9 and cfg["method"] == "ttc"


def test_table_text_round_trips_floats():
    text = table_text(["a", "b"], [[0.1 + 0.2, "x"]])
    assert text == "a,b\n0.30000000000000004,x\n"
