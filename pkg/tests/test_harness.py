import json

import pytest

from locsaa import cli, harness
from locsaa.entropy_localization import sample_size_branches


def _cfg_text(**kw):
    base = {"schema_version": 1, "kind": "concentration-suite", "trials": 100, "seed": 5,
            "N_schedule": [20], "options": {"generators": ["pareto-4.5"],
                                            "families": ["self-normalized"], "ts": [1.0]}}
    base.update(kw)
    return json.dumps(base, indent=2)


def _write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return p


# -- config validation ---------------------------------------------------------

def test_trials_zero_rejected_with_line():
    text = _cfg_text(trials=0)
    with pytest.raises(harness.ConfigError) as err:
        harness.parse_config(text, "x.json")
    line = next(i for i, l in enumerate(text.splitlines(), 1) if '"trials"' in l)
    assert err.value.line == line
    assert str(err.value).startswith(f"x.json:{line}:")


@pytest.mark.parametrize("change,fragment", [
    ({"colour": 1}, "unknown key"),
    ({"trials": "many"}, "must be of type int"),
    ({"schema_version": 2}, "schema_version"),
    ({"kind": "bogus"}, "unknown kind"),
    ({"N_schedule": [50, 20]}, "strictly increasing"),
    ({"seed": -1}, "64-bit"),
    ({"workers": 0}, "workers"),
])
def test_config_errors(change, fragment):
    with pytest.raises(harness.ConfigError, match=fragment):
        harness.parse_config(_cfg_text(**change))


def test_coverage_kinds_need_100_trials():
    text = json.dumps({"schema_version": 1, "kind": "fixed-set-coverage", "trials": 99,
                       "instance": "analytic-1d", "N_schedule": [1000], "rho": 0.1})
    with pytest.raises(harness.ConfigError, match="trials >= 100"):
        harness.parse_config(text)


def test_missing_instance_rejected():
    text = json.dumps({"schema_version": 1, "kind": "fixed-set-coverage", "trials": 100,
                       "instance": "no-such-instance", "N_schedule": [1000], "rho": 0.1})
    with pytest.raises(harness.ConfigError, match="not found"):
        harness.parse_config(text)


def test_wrong_instance_shape_rejected():
    text = json.dumps({"schema_version": 1, "kind": "exterior-mr-coverage", "trials": 100,
                       "instance": "analytic-1d", "N_schedule": [1000], "rho": 0.1})
    with pytest.raises(harness.ConfigError, match="stochastic constraints"):
        harness.parse_config(text)


def test_invalid_json_reports_line():
    with pytest.raises(harness.ConfigError) as err:
        harness.parse_config('{\n  "kind": \n}', "bad.json")
    assert err.value.line == 3


@pytest.mark.parametrize("name", ["fixed-set-coverage", "exterior-mr-coverage",
                                  "interior-scq-coverage", "interior-solution-coverage",
                                  "perturbation-soundness", "concentration-suite",
                                  "lasso-persistence"])
def test_shipped_configs_parse(name):
    cfg = harness.load_config(name)
    assert cfg.kind == name
    assert cfg.seed == 20261016


# -- coverage rows -------------------------------------------------------------

def test_coverage_all_true():
    row = harness.coverage([True] * 200, 0.1)
    assert row["coverage"] == 1.0 and row["pass"]


def test_coverage_wilson_example():
    row = harness.coverage([True] * 450 + [False] * 50, 0.1)
    assert row["coverage"] == 0.9
    assert row["wilson_lo"] == pytest.approx(0.871, abs=5e-4)
    assert row["wilson_hi"] == pytest.approx(0.923, abs=5e-4)
    assert row["pass"] and not row["low_power"]


def test_coverage_single_verdict_low_power():
    row = harness.coverage([True], 0.1)
    assert row["low_power"]
    assert row["wilson_hi"] - row["wilson_lo"] > 0.5


def test_coverage_empty_rejected():
    with pytest.raises(ValueError):
        harness.coverage([], 0.1)


# -- CSV -----------------------------------------------------------------------

def test_csv_round_trip(tmp_path):
    rows = [{"a": 1, "b": 0.1 + 0.2, "c": True, "d": None, "e": "x,y"},
            {"a": 2, "b": 1e-300, "c": False, "d": 3.5, "e": ""}]
    harness.write_csv(tmp_path / "t.csv", rows)
    back = harness.read_csv(tmp_path / "t.csv")
    assert back[0]["b"] == 0.1 + 0.2 and back[1]["b"] == 1e-300
    assert back[0]["c"] is True and back[1]["c"] is False
    assert back[0]["d"] is None and back[0]["e"] == "x,y"


# -- runs, determinism, verify -------------------------------------------------

@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    cfg = harness.parse_config(_cfg_text(), tmp / "cfg.json")
    res = harness.run_experiment(cfg, str(tmp / "out"), workers=1)
    return cfg, res, tmp


def test_run_writes_outputs(small_run):
    _, res, tmp = small_run
    out = tmp / "out"
    for name in ("trials.csv", "summary.csv", "manifest.json"):
        assert (out / name).is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 5
    assert "wall_time_s" in manifest and "code_fingerprint" in manifest


def test_rerun_is_byte_identical_across_workers(small_run, tmp_path):
    cfg, _, tmp = small_run
    harness.run_experiment(cfg, str(tmp_path / "again"), workers=2)
    assert (tmp_path / "again" / "trials.csv").read_bytes() == \
        (tmp / "out" / "trials.csv").read_bytes()
    assert (tmp_path / "again" / "summary.csv").read_bytes() == \
        (tmp / "out" / "summary.csv").read_bytes()


def test_verify_detects_tampering(small_run, tmp_path):
    _, _, tmp = small_run
    ok, problems = harness.verify_run(tmp / "out")
    assert ok, problems
    import shutil
    bad = tmp_path / "bad"
    shutil.copytree(tmp / "out", bad)
    s = (bad / "summary.csv").read_text().splitlines()
    s[1] = s[1].replace("True", "False", 1) if "True" in s[1] else s[1] + "0"
    (bad / "summary.csv").write_text("\n".join(s) + "\n")
    ok, problems = harness.verify_run(bad)
    assert not ok and problems
    assert cli.main(["verify", str(bad)]) == harness.EXIT_ACCEPTANCE
    assert cli.main(["verify", str(tmp / "out")]) == harness.EXIT_OK


def test_small_fixed_set_coverage_run(tmp_path):
    text = json.dumps({"schema_version": 1, "kind": "fixed-set-coverage", "trials": 100,
                       "instance": "analytic-1d", "N_schedule": [2000], "rho": 0.1, "seed": 3})
    cfg = harness.parse_config(text)
    res = harness.run_experiment(cfg, str(tmp_path / "cov"), workers=1)
    row = res["summary"][0]
    assert row["trials"] == 100 and row["errors"] == 0
    assert 0 <= row["held"] <= row["trials"]
    assert row["coverage"] == row["held"] / row["trials"]
    ok, problems = harness.verify_run(tmp_path / "cov")
    assert ok, problems


# -- sample-size table ---------------------------------------------------------

def test_sample_size_table_branches():
    rows = harness.sample_size_table([10.0], [1e-10], [0.05, 5.0], "analytic-1d")
    small, large = rows
    assert small["branch_1"] == pytest.approx(14.592328, abs=1e-6)
    assert large["binding"] == "1" and large["N"] == 15


def test_branch_two_scales_with_a1_squared():
    _, _, b = sample_size_branches(4.0, 0.01, 0.1, 1.0, 2.0, 1.5)
    _, _, b2 = sample_size_branches(4.0, 0.01, 0.1, 1.0, 2.0, 3.0)
    assert b2 == pytest.approx(4 * b)


# -- CLI exit codes ------------------------------------------------------------

def test_cli_config_error_exit_code(tmp_path, capsys):
    p = _write(tmp_path, _cfg_text(trials=0))
    assert cli.main(["run", str(p)]) == harness.EXIT_CONFIG
    assert f"{p}:" in capsys.readouterr().err


def test_cli_run_ok(tmp_path):
    p = _write(tmp_path, _cfg_text())
    assert cli.main(["run", str(p), "--output", str(tmp_path / "o")]) == harness.EXIT_OK


def test_cli_bounds(capsys):
    code = cli.main(["bounds", "--family", "panchenko", "--generator", "pareto-4.5",
                     "--replications", "200", "--t", "2"])
    assert code == harness.EXIT_OK
    assert "panchenko/upper" in capsys.readouterr().out
    assert cli.main(["bounds", "--family", "nope", "--generator", "pareto-4.5"]) == \
        harness.EXIT_CONFIG
    assert cli.main(["bounds", "--family", "panchenko", "--generator", "x-1"]) == \
        harness.EXIT_CONFIG


def test_cli_sample_size(capsys):
    assert cli.main(["sample-size", "--q", "10", "--rho", "1e-10", "--eps", "0.05",
                     "--instance", "analytic-1d"]) == harness.EXIT_OK
    assert "14.5923" in capsys.readouterr().out
    assert cli.main(["sample-size", "--q", "10", "--rho", "2", "--eps", "0.05",
                     "--instance", "analytic-1d"]) == harness.EXIT_CONFIG
