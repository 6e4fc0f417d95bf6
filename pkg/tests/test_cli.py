import csv
import json

import numpy as np
import pytest

from rhlearn.cli import main
from rhlearn.dataset import load_dense_matrix
from rhlearn.experiment import ConfigError, ExperimentConfig, labels_path
from rhlearn.learning import clustering_accuracy, nmi

BLOBS = {"kind": "blobs", "k": 3, "n_per": 50, "d": 10, "separation": 20, "spread": 0.5, "seed": 1}
SMALL_BLOBS = {"kind": "blobs", "k": 3, "n_per": 8, "d": 6, "separation": 15, "spread": 0.3, "seed": 1}
SUBSPACES = {"kind": "subspaces", "k": 3, "sub_dim": 2, "d": 30, "n_per": 30,
             "noise_sigma": 0.01, "seed": 11}


@pytest.fixture
def run_cli(tmp_path):
    def run(command, config, *extra):
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(config))
        return main([command, "--config", str(cfg_path), *extra])
    return run


def read_report(path):
    return json.loads(path.read_text())


def read_labels(path):
    with labels_path(path).open() as fh:
        return list(csv.DictReader(fh))


def test_cluster_l2h_report(run_cli, tmp_path):
    out = tmp_path / "rep.json"
    rc = run_cli("cluster", {"generator": BLOBS, "method": "l2h", "beta": 0.1, "t": 5,
                             "output": str(out)})
    assert rc == 0
    rep = read_report(out)
    assert set(rep) == {"config", "metrics", "timings_ms", "flags", "version"}
    assert rep["metrics"]["accuracy"] == 1.0 and rep["metrics"]["nmi"] == 1.0
    assert rep["metrics"]["pipeline"] == "L2HSC"
    rows = read_labels(out)
    pred = [int(r["predicted"]) for r in rows]
    truth = [int(r["truth"]) for r in rows]
    assert clustering_accuracy(pred, truth) == rep["metrics"]["accuracy"]
    assert nmi(pred, truth) == rep["metrics"]["nmi"]


def test_cluster_knn_baseline(run_cli, tmp_path):
    out = tmp_path / "rep.json"
    assert run_cli("cluster", {"generator": BLOBS, "method": "knn", "output": str(out)}) == 0
    rep = read_report(out)
    assert rep["metrics"]["pipeline"] == "kNN-HSC"
    assert 0 <= rep["metrics"]["accuracy"] <= 1


def test_preset_names(run_cli, tmp_path):
    out = tmp_path / "rep.json"
    assert run_cli("transduce", {"generator": SMALL_BLOBS, "preset": "l1ht", "beta": 0.03,
                                 "output": str(out)}) == 0
    assert read_report(out)["metrics"]["pipeline"] == "L1HT"
    assert run_cli("cluster", {"generator": SMALL_BLOBS, "preset": "l1ht"}) == 2


def test_missing_input_exit_2(run_cli, tmp_path, capsys):
    missing = tmp_path / "absent.csv"
    assert run_cli("cluster", {"input": str(missing)}) == 2
    assert str(missing) in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["cluster", "--config", str(tmp_path / "nope.json")]) == 2


def test_lambda_zero_rejected(run_cli, capsys):
    assert run_cli("transduce", {"generator": SMALL_BLOBS, "lambda": 0}) == 2
    assert "lambda" in capsys.readouterr().err


def test_unknown_key_rejected(run_cli, capsys):
    assert run_cli("cluster", {"generator": SMALL_BLOBS, "bogus": 1}) == 2
    assert "bogus" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [{"beta": -1}, {"t": 1}, {"method": "xyz"},
                                 {"label_fraction": 0}, {"seed": -3}])
def test_config_field_validation(bad):
    with pytest.raises(ConfigError, match=next(iter(bad)).split("_")[0]):
        ExperimentConfig.from_dict({"generator": SMALL_BLOBS, **bad})


def test_input_csv_roundtrip(run_cli, tmp_path):
    data = tmp_path / "ds.csv"
    assert run_cli("synth", {"generator": SMALL_BLOBS, "output": str(data)}) == 0
    ds = load_dense_matrix(data, has_labels=True)
    assert ds.X.shape == (6, 24)
    out = tmp_path / "rep.json"
    assert run_cli("cluster", {"input": str(data), "method": "l2h", "beta": 0.1,
                               "output": str(out)}) == 0
    assert read_report(out)["metrics"]["accuracy"] == 1.0


def test_transduce_single_fold(run_cli, tmp_path):
    out = tmp_path / "rep.json"
    assert run_cli("transduce", {"generator": BLOBS, "method": "l2h", "beta": 0.1,
                                 "lambda": 10, "label_fraction": 0.5, "output": str(out)}) == 0
    rep = read_report(out)
    assert rep["metrics"]["error_rate"] <= 0.05
    assert rep["metrics"]["n_test"] == 75


def test_transduce_two_fold(run_cli, tmp_path):
    out = tmp_path / "rep.json"
    assert run_cli("transduce", {"generator": SMALL_BLOBS, "method": "l2h", "beta": 0.1,
                                 "output": str(out)}, "--two-fold") == 0
    rep = read_report(out)
    assert rep["metrics"]["folds"] == 2 and rep["metrics"]["n_test"] == 24


def test_two_fold_needs_two_per_class(run_cli, tmp_path):
    data = tmp_path / "tiny.csv"
    data.write_text("1,0,0\n0.9,0.1,0\n0,1,1\n")
    assert run_cli("transduce", {"input": str(data), "t": 2}, "--two-fold") == 2


def test_transduce_all_labeled(run_cli, tmp_path):
    out = tmp_path / "rep.json"
    assert run_cli("transduce", {"generator": SMALL_BLOBS, "beta": 0.1, "label_fraction": 1.0,
                                 "output": str(out)}) == 0
    rep = read_report(out)
    assert rep["metrics"]["error_rate"] is None
    assert rep["metrics"]["note"] == "no test vertices"
    assert rep["flags"]["no_test_vertices"]


def test_strict_nonconvergence_exit_1(run_cli, tmp_path):
    assert run_cli("cluster", {"generator": SMALL_BLOBS, "method": "l1h", "beta": 1e-4,
                               "max_iter": 1, "strict": True}) == 1


def test_computation_failure_exit_1(run_cli, tmp_path):
    data = tmp_path / "zero.csv"
    # The all-zero sample has no similarity mass, so normalization fails.
    data.write_text("1,0,0\n0.9,0.1,0\n0,0,1\n0,1,1\n")
    assert run_cli("cluster", {"input": str(data), "t": 2}) == 1


def test_dump_matrices(run_cli, tmp_path):
    dump = tmp_path / "dump"
    assert run_cli("cluster", {"generator": SMALL_BLOBS, "beta": 0.1},
                   "--dump-matrices", str(dump)) == 0
    L = np.loadtxt(dump / "laplacian.csv", delimiter=",")
    assert L.shape == (24, 24)
    np.testing.assert_allclose(L, L.T, atol=1e-12)
    assert {p.name for p in dump.iterdir()} >= {"H.csv", "weights.csv", "similarity.csv"}


def test_literal_eq3_flag(run_cli, tmp_path):
    out = tmp_path / "rep.json"
    assert run_cli("cluster", {"generator": SMALL_BLOBS, "beta": 0.1, "output": str(out)},
                   "--literal-eq3") == 0
    assert read_report(out)["flags"]["literal_eq3"]


def test_noise_sweep_level_zero_matches_clean_run(run_cli, tmp_path):
    sweep_out, clean_out = tmp_path / "sweep.json", tmp_path / "clean.json"
    base = {"generator": SMALL_BLOBS, "beta": 0.1, "seed": 4}
    assert run_cli("noise-sweep", {**base, "noise_levels": [0, 0.1],
                                   "output": str(sweep_out)}) == 0
    table = read_report(sweep_out)["metrics"]["table"]
    assert [(r["level"], r["method"]) for r in table] == [
        (0, "l1h"), (0, "l2h"), (0, "knn"), (0.1, "l1h"), (0.1, "l2h"), (0.1, "knn")]
    for row in table[:3]:
        assert run_cli("cluster", {**base, "method": row["method"],
                                   "output": str(clean_out)}) == 0
        clean = read_report(clean_out)["metrics"]
        assert (row["accuracy"], row["nmi"]) == (clean["accuracy"], clean["nmi"])


def test_noise_sweep_shape_and_jobs(run_cli, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cfg = {"generator": SUBSPACES, "beta": 0.03, "seed": 11,
           "noise_levels": [0.1, 0.2, 0.3, 0.4, 0.5], "noise_low": "min", "noise_high": "max"}
    assert run_cli("noise-sweep", {**cfg, "output": str(a)}) == 0
    assert run_cli("noise-sweep", {**cfg, "output": str(b)}, "--jobs", "4") == 0
    ta, tb = read_report(a)["metrics"]["table"], read_report(b)["metrics"]["table"]
    assert len(ta) == 15
    assert len({r["level"] for r in ta}) == 5 and len({r["method"] for r in ta}) == 3
    assert ta == tb
    assert len(read_labels(a)) == 15 * 90


def test_report_reproducible_from_echoed_config(run_cli, tmp_path):
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    assert run_cli("transduce", {"generator": SMALL_BLOBS, "method": "l1h", "beta": 0.03,
                                 "seed": 5, "output": str(first)}) == 0
    echoed = read_report(first)["config"]
    echoed["output"] = str(second)
    assert run_cli("transduce", echoed) == 0
    r1, r2 = read_report(first), read_report(second)
    for key in ("metrics", "flags", "version"):
        assert r1[key] == r2[key]
    assert labels_path(first).read_text() == labels_path(second).read_text()
