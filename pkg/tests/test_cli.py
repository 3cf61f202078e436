import csv
import json
import re
from pathlib import Path

import numpy as np
import pytest

from vqnegf.cli import (EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_STRICT, ConfigError, config_violations, fmt, main,
                        parse_config, validate_config)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small(experiment, **vqls):
    raw = {
        "experiment": experiment,
        "seed": 3,
        "device": {"n_sites": 8, "potential": {"kind": "logistic_barrier", "height": 0.1, "x1": 3.0, "x2": 7.0,
                                               "width": 0.5}},
        "vqls": {"restarts": 2, "max_iterations": 25, "layers": [1], **vqls},
    }
    if experiment in ("solve_parallel", "oracle_sweep"):
        raw["energy_grid"] = {"start": 0.03, "stop": 0.21, "count": 2}
    else:
        raw["energy"] = 0.1
    return raw


def write(tmp_path, raw, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(raw))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- validation -----------------------------------------------------------------------------


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_are_valid(path):
    assert validate_config(path) == []
    cfg = parse_config(json.loads(path.read_text()))
    assert cfg.experiment == path.stem


def test_missing_device_and_bad_sites():
    raw = small("solve_single")
    del raw["device"]
    assert "device: required" in config_violations(raw)
    raw = small("solve_single")
    raw["device"]["n_sites"] = 24
    assert "device.n_sites: power of two required" in config_violations(raw)


def test_grid_count_power_of_two_for_block_system():
    raw = small("solve_parallel")
    raw["energy_grid"]["count"] = 3
    assert "energy_grid.count: power of two required" in config_violations(raw)
    raw["experiment"] = "oracle_sweep"
    assert config_violations(raw) == []


def test_block_size_limit():
    raw = small("solve_parallel")
    raw["device"]["n_sites"] = 1024
    raw["energy_grid"]["count"] = 1024
    assert any("amplitudes" in v for v in config_violations(raw))


def test_energy_cost_rejected_for_transport_matrix():
    assert any("energy cost" in v for v in config_violations(small("solve_single", cost="energy")))
    raw = small("compare_costs", costs=["hybrid", "energy"])
    assert any("energy cost" in v for v in config_violations(raw))


def test_violations_are_collected_not_first_only():
    raw = small("solve_single", alpha=2.0, ansatz="ladder", bogus=1)
    raw["device"]["eta_eV"] = -1.0
    bad = config_violations(raw)
    assert "vqls.alpha: number in [0, 1] required" in bad
    assert any(v.startswith("vqls.ansatz") for v in bad)
    assert "vqls.bogus: unknown key" in bad
    assert "device.eta_eV: positive number required" in bad


def test_experiment_mismatch_and_parse_error():
    assert any("requested" in v for v in config_violations(small("solve_single"), "sweep_alpha"))
    with pytest.raises(ConfigError):
        parse_config({"experiment": "solve_single"})


# --- exit codes ----------------------------------------------------------------------------------


def test_validate_command(tmp_path, capsys):
    assert main(["validate", "--config", write(tmp_path, small("solve_single"))]) == EXIT_OK
    assert "config OK" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    bad = small("solve_single")
    bad["device"]["n_sites"] = 12
    assert main(["solve_single", "--config", write(tmp_path, bad)]) == EXIT_CONFIG
    assert "device.n_sites: power of two required" in capsys.readouterr().err
    assert main(["solve_single", "--config", str(tmp_path / "missing.json")]) == EXIT_IO
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["solve_single", "--config", str(tmp_path / "broken.json")]) == EXIT_CONFIG
    cfg = write(tmp_path, small("solve_single"))
    assert main(["solve_single", "--config", cfg, "--threads", "0"]) == EXIT_CONFIG
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["solve_single", "--config", cfg, "--out", str(blocker / "sub")]) == EXIT_IO


def test_strict_gate(tmp_path, capsys):
    # two iterations cannot reach the local-cost gate
    raw = small("solve_single", max_iterations=2, restarts=1)
    cfg = write(tmp_path, raw)
    assert main(["solve_single", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert "gate:" in capsys.readouterr().err
    assert main(["solve_single", "--config", cfg, "--out", str(tmp_path / "b"), "--strict"]) == EXIT_STRICT


# --- outputs -------------------------------------------------------------------------------------


def test_fmt_round_trips_doubles():
    for x in (0.1, 1 / 3, np.pi * 1e-300, -2.5e17, 5e-324):
        assert float(fmt(x)) == x
    assert fmt(True) == "1" and fmt(np.int64(4)) == "4" and fmt("a") == "a"


def test_solve_single_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["solve_single", "--config", write(tmp_path, small("solve_single")), "--out", str(out)]) == 0
    runs = read_csv(out / "runs.csv")
    assert [r["seed"] for r in runs] == ["3", "4"]
    sol = read_csv(out / "solution.csv")
    assert len(sol) == 8
    stats = read_csv(out / "mse_stats.csv")[0]
    best = min(float(r["mse"]) for r in runs)
    assert float(stats["min"]) == best
    x = np.array([complex(float(r["re"]), float(r["im"])) for r in sol])
    ref = np.array([complex(float(r["oracle_re"]), float(r["oracle_im"])) for r in sol])
    assert np.mean(np.abs(x - ref) ** 2) == pytest.approx(best, rel=1e-12)
    text = (out / "runs.csv").read_text()
    assert "\r" not in text
    floats = re.findall(r"-?\d\.\d+e[-+]\d+|-?\d+\.\d{10,}", text)
    assert floats and all(float(f) == float(f"{float(f):.17g}") for f in floats)


def test_cost_history_matches_runs(tmp_path):
    out = tmp_path / "run"
    main(["solve_single", "--config", write(tmp_path, small("solve_single")), "--out", str(out)])
    hist = read_csv(out / "cost_history.csv")
    runs = read_csv(out / "runs.csv")
    for r in runs:
        rows = [h for h in hist if h["run"] == r["run"]]
        assert len(rows) == int(r["iterations"]) + 1
        assert float(rows[-1]["cost"]) == float(r["final_cost"])
        costs = [float(h["cost"]) for h in rows]
        assert all(b <= a for a, b in zip(costs, costs[1:]))


def test_compare_costs_and_sweep_alpha_shapes(tmp_path):
    cc = small("compare_costs", layers=[1, 2], restarts=1, max_iterations=5)
    main(["compare_costs", "--config", write(tmp_path, cc, "cc.json"), "--out", str(tmp_path / "cc")])
    rows = read_csv(tmp_path / "cc" / "mse_stats.csv")
    assert [(r["cost_kind"], r["layers"]) for r in rows] == [
        (c, L) for c in ("global", "local", "normalized_residual", "hybrid") for L in ("1", "2")]
    assert all(r["alpha"] == "" for r in rows if r["cost_kind"] != "hybrid")

    sa = small("sweep_alpha", alphas=[0.0, 0.5, 1.0], restarts=1, max_iterations=5)
    main(["sweep_alpha", "--config", write(tmp_path, sa, "sa.json"), "--out", str(tmp_path / "sa")])
    rows = read_csv(tmp_path / "sa" / "mse_stats.csv")
    assert [float(r["alpha"]) for r in rows] == [0.0, 0.5, 1.0]
    assert {r["cost_kind"] for r in rows} == {"hybrid"}


def test_compare_ansatz_cells(tmp_path):
    raw = small("compare_ansatz", restarts=1, max_iterations=3)
    main(["compare_ansatz", "--config", write(tmp_path, raw), "--out", str(tmp_path / "o")])
    rows = read_csv(tmp_path / "o" / "mse_stats.csv")
    assert len({r["ansatz"] for r in rows}) == 4


def test_oracle_sweep_flat_device_is_transparent(tmp_path):
    raw = small("oracle_sweep")
    raw["device"] = {"n_sites": 16, "potential": {"kind": "flat"}, "eta_eV": 1e-12}
    raw["energy_grid"] = {"start": 0.01, "stop": 0.1, "count": 5}
    raw["transport"] = {"mu1": 0.05, "mu2": 0.05}
    del raw["vqls"]
    out = tmp_path / "sweep"
    assert main(["oracle_sweep", "--config", write(tmp_path, raw), "--out", str(out)]) == 0
    rows = read_csv(out / "transport.csv")
    assert len(rows) == 5
    for r in rows:
        assert float(r["T_oracle"]) == pytest.approx(1.0, abs=1e-8)
        assert float(r["J_oracle"]) == 0.0
        assert r["T_vqls"] == ""
    assert len(read_csv(out / "ldos.csv")) == 5 * 16


def test_solve_parallel_writes_both_transport_columns(tmp_path):
    out = tmp_path / "par"
    main(["solve_parallel", "--config", write(tmp_path, small("solve_parallel", max_iterations=5)), "--out", str(out)])
    rows = read_csv(out / "transport.csv")
    assert len(rows) == 2 and all(r["T_vqls"] != "" for r in rows)
    assert len(read_csv(out / "solution.csv")) == 2 * 2 * 8


def test_seed_override_and_determinism(tmp_path):
    cfg = write(tmp_path, small("compare_costs", layers=[1], restarts=2, max_iterations=10))
    for name in ("a", "b"):
        main(["compare_costs", "--config", cfg, "--out", str(tmp_path / name)])
    main(["compare_costs", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "9"])
    for f in ("runs.csv", "cost_history.csv", "mse_stats.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a" / "runs.csv").read_bytes() != (tmp_path / "c" / "runs.csv").read_bytes()
    assert read_csv(tmp_path / "c" / "runs.csv")[0]["seed"] == "9"
