import csv
import json

import numpy as np
import pytest

from cfemf.cli.config import ConfigError, load_config
from cfemf.cli.main import main
from cfemf.ml import read_dataset
from cfemf.scenario import dbm_to_watt


def _run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_config_defaults_and_preset():
    cfg = load_config(preset="small")
    assert (cfg.system.num_ues, cfg.system.num_aps, cfg.system.antennas_per_ap,
            cfg.system.cluster_size) == (4, 8, 2, 3)
    assert cfg.trials == 50 and cfg.samples == 2000
    assert load_config().system.num_ues == 8
    assert cfg.train_config().batch_size == 256
    cfg.direction = "ul"
    assert cfg.train_config().batch_size == 64


def test_config_file_and_aliases(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("[system]\nap_power_dbm = 20\nsar_limits = 8:0.08, 2:0.5\n"
                    "[solver]\nupsilon = 2\n[experiment]\ntrials = 3\n"
                    "policies = upc, u-dnn(2)\n[train]\nbatch_size = 16\nmodel = unfolded\n")
    cfg = load_config(path, overrides={"trials": 5})
    assert cfg.system.ap_power_budget == pytest.approx(float(dbm_to_watt(20)))
    assert cfg.system.sar_limits == ((8.0, 0.08), (2.0, 0.5))
    assert cfg.solver.upsilon == 2.0 and cfg.trials == 5
    assert cfg.policies == ("upc", "u-dnn(2)") and cfg.model == "unfolded"
    assert cfg.train_config().batch_size == 16


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    "[system]\nwarp = 9\n",
    "[experiment]\npolicies = magic\n",
    "[experiment]\ndirection = sideways\n",
    "[system]\ncluster_size = 99\n",
    "[solver]\nbarrier_mu = 0.5\n",
    "[experiment]\ntrials = many\n",
])
def test_config_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[system]\nwarp = 1\n")
    assert _run(tmp_path, "simulate", "--config", str(bad)) == 2
    assert _run(tmp_path, "simulate", "--config", str(tmp_path / "missing.cfg")) == 2
    assert _run(tmp_path, "simulate", "--preset", "small", "--policy", "e2e-dnn",
                "--trials", "1") == 2
    assert _run(tmp_path, "train", "--preset", "small",
                "--dataset", str(tmp_path / "none.cfd")) == 2
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--seed", "-1"])
    assert info.value.code == 2
    capsys.readouterr()


def test_simulate_outputs_and_reproducibility(tmp_path):
    args = ["simulate", "--preset", "small", "--trials", "3", "--seed", "11",
            "--policy", "upc,fpc-fair,opc-maximin,opc-lse"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("upc", "fpc-fair", "opc-maximin", "opc-lse"):
        a = (tmp_path / "a" / f"{name}.csv").read_bytes()
        assert a == (tmp_path / "b" / f"{name}.csv").read_bytes()
        rows = _rows(tmp_path / "a" / f"{name}.csv")
        assert len(rows) == 3 * 4
        assert list(rows[0]) == ["trial", "ue", "rate_bps", "ipd_wm2", "sar_wkg"]
        assert all(float(r["ipd_wm2"]) <= 10.0 for r in rows)
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    stats = summary["policies"]["opc-maximin"]
    assert stats["failures"] == 0 and set(stats["min_rate_percentiles_bps"]) == {
        "p5", "p10", "p50", "p90", "p95"}
    assert sum(stats["violations"].values()) == 0


def test_simulate_uplink(tmp_path):
    assert _run(tmp_path, "simulate", "--preset", "small", "--trials", "2", "--direction",
                "ul", "--policy", "upc,fpc-fair,opc-maximin") == 0
    rows = _rows(tmp_path / "upc.csv")
    assert all(float(r["sar_wkg"]) <= 0.08 * (1 + 1e-12) for r in rows)
    assert all(r["ipd_wm2"] == "nan" for r in rows)
    assert _run(tmp_path, "simulate", "--preset", "small", "--trials", "1", "--direction",
                "ul", "--policy", "opc-lse") == 2


def test_dataset_train_and_dnn_policies(tmp_path):
    assert _run(tmp_path, "dataset", "--preset", "small", "--samples", "12", "--unfold",
                "--seed", "3") == 0
    ds = read_dataset(tmp_path / "dataset_dl.cfd")
    assert ds.X.shape == (12, 12) and ds.Y.shape == (12, 12)
    assert ds.meta["direction"] == "dl" and len(ds.meta["solver_hash"]) == 64
    trace = read_dataset(tmp_path / "dataset_dl_lse_trace.cfd")
    assert trace.X.shape[1] == 2 and trace.Y.shape[1] == 12
    assert set(trace.X[:, 0].astype(int)) <= set(range(12))

    cfg = tmp_path / "fast.cfg"
    cfg.write_text("[train]\nmax_epochs = 2\n")
    data = str(tmp_path / "dataset_dl.cfd")
    assert _run(tmp_path, "train", "--preset", "small", "--config", str(cfg),
                "--dataset", data) == 0
    assert _run(tmp_path, "train", "--preset", "small", "--config", str(cfg),
                "--dataset", data, "--kind", "unfolded") == 0
    curves = _rows(tmp_path / "curves_unfolded_dl.csv")
    assert {r["stage"] for r in curves} == {"1", "2", "3"} and len(curves) == 6
    report = json.loads((tmp_path / "train_unfolded_dl.json").read_text())
    assert len(report["test_mae_per_stage"]) == 3

    # a DL dataset cannot train the UL network
    assert _run(tmp_path, "train", "--preset", "small", "--config", str(cfg),
                "--dataset", data, "--direction", "ul") == 2

    out = tmp_path / "sim"
    assert main(["simulate", "--preset", "small", "--trials", "2", "--out", str(out),
                 "--policy", "e2e-dnn", "--model", str(tmp_path / "model_e2e_dl.json")]) == 0
    assert main(["simulate", "--preset", "small", "--trials", "2", "--out", str(out),
                 "--policy", "u-dnn(2)",
                 "--model", str(tmp_path / "model_unfolded_dl.json")]) == 0
    assert len(_rows(out / "u-dnn-2.csv")) == 8
    summary = json.loads((out / "summary.json").read_text())
    assert sum(summary["policies"]["u-dnn(2)"]["violations"].values()) == 0


def test_dataset_byte_reproducible(tmp_path):
    for sub in ("a", "b"):
        assert main(["dataset", "--preset", "small", "--samples", "3", "--direction", "ul",
                     "--seed", "5", "--out", str(tmp_path / sub)]) == 0
    assert (tmp_path / "a" / "dataset_ul.cfd").read_bytes() == \
        (tmp_path / "b" / "dataset_ul.cfd").read_bytes()


def test_bench(tmp_path):
    assert _run(tmp_path, "bench", "--preset", "small", "--trials", "2",
                "--policy", "upc,opc-maximin,opc-lse,e2e-dnn") == 0
    rows = _rows(tmp_path / "bench.csv")
    assert [r["policy"] for r in rows] == ["upc", "opc-maximin", "opc-lse", "e2e-dnn"]
    summary = json.loads((tmp_path / "bench_summary.json").read_text())
    assert "maximin_over_lse" in summary["ordering"]
    assert np.isfinite(summary["ordering"]["maximin_over_lse"])


def test_bench_zero_trials(tmp_path):
    assert _run(tmp_path, "bench", "--preset", "small", "--trials", "0") == 0
    assert (tmp_path / "bench.csv").read_text() == "policy,trials,mean_s,std_s\n"
