import json

import numpy as np
import pandas as pd
import pytest

from superextremal.cli import _error_trend, main

SMALL = {
    "resolution": 6,
    "truncation": 60,
    "realizations": 4,
    "prelimit_n": 20,
    "n_list": [100, 1000],
    "convergence_draws": 5000,
    "diagnostic_draws": 2000,
    "mc_size": 5000,
    "test_samples": 200,
    "fdd_realizations": 200,
    "stability_copies": [2],
    "similarity_scales": [2.0],
    "ranks": [2],
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL))
    return str(path)


def test_simulate_writes_monotone_realizations(tmp_path, config_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", config_path, "--out", str(out)]) == 0
    for name in ("grid.csv", "superextremal.csv", "truncation.csv", "atoms_0000.jsonl", "partial_maxima.csv"):
        assert (out / name).exists()
    assert json.loads((out / "resolved_config.json").read_text())["realizations"] == 4

    limit = pd.read_csv(out / "superextremal.csv")
    assert set(limit["realization"]) == {0, 1, 2, 3}
    for _, group in limit.sort_values("u").groupby(["realization", "site"]):
        assert np.all(np.diff(group["value"].to_numpy()) >= 0)

    prelimit = pd.read_csv(out / "partial_maxima.csv")
    assert (prelimit["value"] > 0).all()
    assert len(pd.read_csv(out / "truncation.csv")) == 4


def test_simulate_is_byte_deterministic(tmp_path, config_path):
    first, second, other = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["simulate", "--config", config_path, "--out", str(first)]) == 0
    assert main(["simulate", "--config", config_path, "--out", str(second)]) == 0
    assert main(["simulate", "--config", config_path, "--out", str(other), "--seed", "99"]) == 0
    for name in ("superextremal.csv", "partial_maxima.csv", "atoms_0000.jsonl", "truncation.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert (first / "superextremal.csv").read_bytes() != (other / "superextremal.csv").read_bytes()


def test_convergence_table(tmp_path, config_path):
    out = tmp_path / "conv"
    assert main(["convergence", "--config", config_path, "--out", str(out)]) == 0
    table = pd.read_csv(out / "convergence.csv")
    assert len(table) == 2 * 3
    assert {"n", "z", "n_p_hat", "n_p_stderr", "nu_hat", "nu_stderr", "gaussian_tail"} <= set(table.columns)
    at_one = table[table["z"] == 1.0]
    # single site t0: ν̂ = 1/z exactly
    assert np.allclose(at_one["nu_hat"], 1.0)
    assert table["gaussian_tail"].notna().all()
    assert table["trend_ok"].dtype == bool
    assert table.loc[table["n"] == 100, "trend_ok"].all()
    diagnostics = pd.read_csv(out / "gauss_diagnostics.csv")
    assert {"scaling_ratio", "correlation"} <= set(diagnostics["quantity"])


def test_fdd_command(tmp_path, config_path):
    query = tmp_path / "query.json"
    query.write_text(json.dumps({"times": [0.5, 1.0], "sites": [0, 2, 5], "thresholds": [[1.5, 2, 2.5], [1, 1.5, 2]]}))
    out = tmp_path / "fdd"
    assert main(["fdd", str(query), "--config", config_path, "--out", str(out)]) == 0
    payload = json.loads((out / "fdd.json").read_text())
    assert 0.0 <= payload["theoretical"]["probability"] <= 1.0
    assert 0.0 <= payload["empirical"]["probability"] <= 1.0
    assert len(payload["theoretical"]["nu"]) == 2
    assert payload["empirical"]["realizations"] == 200


def test_test_command_writes_reports(tmp_path, config_path):
    out = tmp_path / "tests"
    code = main(["test", "--config", config_path, "--out", str(out)])
    assert code in (0, 1)
    lines = (out / "reports.jsonl").read_text().strip().splitlines()
    records = [json.loads(line) for line in lines]
    assert records
    assert all({"statistic", "threshold", "pass", "gating"} <= set(r) for r in records)
    failed = [r for r in records if r["gating"] and not r["pass"]]
    assert (code == 1) == bool(failed)


def test_error_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"not_a_key": 1}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert main(["fdd", str(tmp_path / "missing.json"), "--out", str(tmp_path / "y")]) == 2
    small_cap = tmp_path / "cap.json"
    small_cap.write_text(json.dumps({"dimension": 2, "resolution": 30}))
    assert main(["simulate", "--config", str(small_cap), "--out", str(tmp_path / "z")]) == 2


@pytest.mark.parametrize("sites", [[0, 20], [-1, 2]])
def test_fdd_rejects_sites_off_the_grid(tmp_path, config_path, sites):
    query = tmp_path / "query.json"
    query.write_text(json.dumps({"times": [1.0], "sites": sites, "thresholds": [[1.0, 1.0]]}))
    out = tmp_path / "fdd"
    assert main(["fdd", str(query), "--config", config_path, "--out", str(out)]) == 2
    assert not (out / "fdd.json").exists()


def test_error_trend_allows_one_stderr():
    table = pd.DataFrame(
        {
            "n": [100, 100, 1000, 1000, 10000, 10000],
            "z": [1.0, 2.0, 1.0, 2.0, 1.0, 2.0],
            "abs_error": [0.30, 0.10, 0.32, 0.05, 0.10, 0.20],
            "n_p_stderr": [0.05, 0.05, 0.05, 0.05, 0.05, 0.05],
        }
    )
    assert _error_trend(table).tolist() == [True, True, True, True, True, False]
