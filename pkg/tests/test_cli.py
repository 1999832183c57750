import json
import time

import numpy as np
import pytest

from matern4d import cli

SMALL_TN = """
experiment = "tn"
seed = 3
[lattice]
M = 6
q = 2
[shell]
K0 = 1
K1 = 2
[mc]
reps = 2
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_tn_reps1_is_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL_TN)
    for d in ("a", "b"):
        assert cli.main(["tn", "--config", cfg, "--reps", "1", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "tn_replicates.csv").read_bytes()
    assert a == (tmp_path / "b" / "tn_replicates.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0] == "model,replicate,T" and len(lines) == 3
    summary = json.loads((tmp_path / "a" / "tn_summary.json").read_text())
    assert summary["models"]["1"]["reps"] == 1
    assert summary["config"]["seed"] == 3 and summary["config"]["lattice"]["M"] == 6
    assert summary["config"]["taper"] == {"R": 2.0, "Q": 400}


def test_threads_do_not_change_results(tmp_path):
    cfg = write(tmp_path, SMALL_TN)
    cli.main(["tn", "--config", cfg, "--threads", "1", "--out", str(tmp_path / "a")])
    cli.main(["tn", "--config", cfg, "--threads", "3", "--out", str(tmp_path / "b")])
    for name in ("tn_replicates.csv", "tn_histogram.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_persisted_config_reruns_identically(tmp_path):
    cli.main(["tn", "--config", write(tmp_path, SMALL_TN), "--out", str(tmp_path / "a")])
    echo = str(tmp_path / "a" / "resolved_config.toml")
    cli.main(["tn", "--config", echo, "--out", str(tmp_path / "b")])
    for name in ("tn_replicates.csv", "resolved_config.toml"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_floats_have_17_significant_digits(tmp_path):
    cli.main(["tn", "--config", write(tmp_path, SMALL_TN), "--out", str(tmp_path)])
    row = (tmp_path / "tn_replicates.csv").read_text().splitlines()[1]
    value = row.split(",")[2]
    assert value == "%.17g" % float(value)
    hist = (tmp_path / "tn_histogram.csv").read_text().splitlines()
    assert hist[0] == "bin_lo,bin_hi,count_model1,count_model2"
    assert sum(int(r.split(",")[2]) for r in hist[1:]) == 2


WHITTLE = """
experiment = "whittle"
[whittle]
n_obs = 4
reps = 2
alpha_min = {lo}
alpha_max = {hi}
alpha_step = 0.5
"""


def test_whittle_single_point_grid(tmp_path):
    cfg = write(tmp_path, WHITTLE.format(lo=2.5, hi=2.5))
    assert cli.main(["whittle", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "whittle_replicates.csv").read_text().splitlines()[1:]
    assert [float(r.split(",")[1]) for r in rows] == [2.5, 2.5]


def test_whittle_two_reps_are_distinct(tmp_path):
    cfg = write(tmp_path, WHITTLE.format(lo=0.5, hi=6.0))
    assert cli.main(["whittle", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "whittle_replicates.csv").read_text().splitlines()
    assert rows[0] == "replicate,alpha_hat,m_hat" and len(rows) == 3
    assert rows[1].split(",")[2] != rows[2].split(",")[2]
    profile = (tmp_path / "whittle_profile.csv").read_text().splitlines()
    assert len(profile) == 1 + 12
    summary = json.loads((tmp_path / "whittle_summary.json").read_text())
    assert set(summary["alpha_hat"]) == {"median", "q25", "q75", "iqr"}


def test_oracle_validation_is_fast_and_reports(tmp_path):
    t0 = time.perf_counter()
    code = cli.main(["validate", "--config", "validate_oracle", "--out", str(tmp_path)])
    assert time.perf_counter() - t0 < 60
    report = json.loads((tmp_path / "validation.json").read_text())
    assert code == (cli.EXIT_OK if report["all_passed"] else cli.EXIT_VALIDATION)
    for name in ("fft_oracles", "hermitian_symmetry", "log_growth", "wick_identity"):
        assert report["suites"][name]["passed"], name
    assert (tmp_path / "validate_log_growth.csv").exists()


def test_corrupted_kernel_fails_hermitian_suite(tmp_path):
    code = cli.main(["validate", "--config", "validate_oracle", "--corrupt-kernel", "--out", str(tmp_path)])
    assert code == cli.EXIT_VALIDATION
    report = json.loads((tmp_path / "validation.json").read_text())
    assert "hermitian_symmetry" in report["failed"]


@pytest.mark.parametrize(
    "text,field",
    [
        ("[lattice]\nM = 0\n", "lattice.M"),
        ("[lattice]\nM = 2.5\n", "lattice.M"),
        ("[taper]\nQ = 3\n", "taper.Q"),
        ("[conv]\nmode = 'wrap'\n", "conv.mode"),
        ("[shell]\nK0 = 5\nK1 = 2\n", "shell"),
        ("[models]\nsigma1 = 1.0\n", "sigma2"),
        ("[lattice]\nbogus = 1\n", "lattice.bogus"),
        ("[nonsense]\nx = 1\n", "nonsense"),
        ("experiment = 'whittle'\n", "experiment"),
        ("seed = -1\n", "seed"),
    ],
)
def test_config_errors_name_the_field(tmp_path, capsys, text, field):
    cfg = write(tmp_path, text)
    assert cli.main(["tn", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert field in capsys.readouterr().err


def test_missing_config_and_bad_toml(tmp_path):
    assert cli.main(["tn", "--config", "no_such_config", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    bad = write(tmp_path, "[lattice\n")
    assert cli.main(["tn", "--config", bad, "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_internal_error_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ArithmeticError("forced")

    monkeypatch.setattr(cli, "run_tn_experiment", boom)
    assert cli.main(["tn", "--out", str(tmp_path)]) == cli.EXIT_INTERNAL


def test_bundled_configs_parse():
    names = cli.bundled_configs()
    assert {"experiment1.toml", "experiment2.toml", "whittle_default.toml"} <= set(names)
    for name in names:
        kind = "tn" if name.startswith("experiment") else name.split("_")[0]
        cfg = cli.load_config(name, kind)
        assert cfg.experiment == kind
    exp2 = cli.load_config("experiment2.cfg", "tn").model_pair()
    assert exp2.model2.alpha == 1.2
    assert exp2.model2.sigma == pytest.approx(1.2**-1.5)


def test_explicit_sigma_mode():
    cfg = cli.parse_config({"models": {"sigma1": 1.0, "sigma2": 2**-1.5, "alpha1": 1.0, "alpha2": 2.0}}, "tn")
    pair = cfg.model_pair()
    assert pair.model1.m == pytest.approx(pair.model2.m)
    assert "m" not in cfg.to_dict()["models"]


def test_json_encoding_of_special_values():
    text = cli._json_encode({"a": [1, 2.5, True, None], "b": float("nan"), "c": np.float64(0.1)})
    back = json.loads(text)
    assert back == {"a": [1, 2.5, True, None], "b": "nan", "c": 0.1}
