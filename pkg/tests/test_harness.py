import json

import numpy as np
import pytest

from fiolab.field import read_fiof
from fiolab.harness import (EXPERIMENTS, ExperimentConfig, HarnessError, _execute, load_config, main,
                            run, write_outputs)

SMALL = {
    "decompose": {"n": 1, "N": 2},
    "apply": {"n": 1, "N": 2, "M": 32, "L": 16.0},
    "norms": {"n": 1, "M": 64, "count": 4},
    "endpoints": {"N": 2},
    "sharpness": {"n": 1},
    "duhamel": {"n": 1, "M": 16, "L": 8.0, "steps": [4, 8, 16]},
}


def write_config(tmp_path, body, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(body))
    return str(p)


# --- configuration ------------------------------------------------------------------

def test_config_rejects_unknown_fields_and_bad_values():
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="apply", grid=3)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="apply", M=48)
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="apply", N=2, exponents=[2.0])
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="apply", N=2, m=-0.5, m_split={"sigma0": [0.0, 0.0, 0.0]})
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="duhamel", steps=[8, 4])
    with pytest.raises(ValueError):
        ExperimentConfig(experiment="apply", seed=2 ** 64)


def test_config_accepts_infinite_exponents():
    cfg = ExperimentConfig(experiment="endpoints", N=2, exponents=["inf", 2.0])
    assert cfg.exponents == ["inf", 2.0]


def test_content_hash_ignores_the_output_directory():
    a = ExperimentConfig(experiment="apply", out="x")
    b = ExperimentConfig(experiment="apply", out="y")
    c = ExperimentConfig(experiment="apply", seed=1)
    assert a.content_hash() == b.content_hash() != c.content_hash()
    assert len(a.content_hash()) == 64


def test_unknown_experiment_is_a_structured_error(tmp_path, capsys):
    assert main(["frobnicate", "--out", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "unknown_experiment" and "apply" in err["hint"]


def test_schema_errors_exit_nonzero(tmp_path, capsys):
    path = write_config(tmp_path, {"M": 33})
    assert main(["apply", "--config", path, "--out", str(tmp_path / "o")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "schema"


def test_unreadable_and_mismatched_configs(tmp_path):
    with pytest.raises(HarnessError) as e:
        load_config(str(tmp_path / "missing.json"), "apply", None)
    assert e.value.kind == "config"
    path = write_config(tmp_path, {"experiment": "norms"})
    with pytest.raises(HarnessError):
        load_config(path, "apply", None)
    with pytest.raises(HarnessError):
        load_config(write_config(tmp_path, [1, 2], "list.json"), "apply", None)


def test_seed_precedence(tmp_path, monkeypatch):
    path = write_config(tmp_path, {"seed": 5})
    monkeypatch.delenv("FIOLAB_SEED", raising=False)
    assert load_config(path, "apply", None).seed == 5
    monkeypatch.setenv("FIOLAB_SEED", "7")
    assert load_config(path, "apply", None).seed == 7
    assert load_config(path, "apply", 9).seed == 9
    monkeypatch.setenv("FIOLAB_SEED", "seven")
    with pytest.raises(HarnessError):
        load_config(path, "apply", None)


def test_run_needs_the_suite_flag(capsys):
    assert main(["run"]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "usage"


# --- runs --------------------------------------------------------------------------

def test_every_experiment_is_covered():
    assert set(SMALL) | {"bench"} == set(EXPERIMENTS)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_small_runs_pass(name):
    report = run(ExperimentConfig(experiment=name, **SMALL[name]))
    assert report.experiment == name
    assert report.checks and report.passed, [c for c in report.checks if not c.passed]


def test_report_is_byte_identical_across_runs(tmp_path):
    path = write_config(tmp_path, dict(SMALL["apply"], seed=3))
    for d in ("a", "b"):
        assert main(["apply", "--config", path, "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    b = (tmp_path / "b" / "report.json").read_bytes()
    assert a == b
    doc = json.loads(a)
    assert doc["config"]["seed"] == 3 and "plan_s" not in json.dumps(doc)
    assert "plan_s" in json.loads((tmp_path / "a" / "timing.json").read_text())


def test_seed_changes_the_inputs(tmp_path):
    a = _execute(ExperimentConfig(experiment="apply", seed=1, **SMALL["apply"]))[1]
    b = _execute(ExperimentConfig(experiment="apply", seed=2, **SMALL["apply"]))[1]
    assert not np.allclose(a.fields["direct.fiof"].values, b.fields["direct.fiof"].values)


def test_outputs_are_written_in_all_formats(tmp_path):
    report, outs = _execute(ExperimentConfig(experiment="apply", **SMALL["apply"]))
    written = {p.name for p in write_outputs(report, outs, tmp_path)}
    assert {"report.json", "timing.json", "fast.fiof", "direct.fiof"} <= written
    f = read_fiof(tmp_path / "fast.fiof")
    assert np.array_equal(f.values, outs.fields["fast.fiof"].values)
    report, outs = _execute(ExperimentConfig(experiment="norms", **SMALL["norms"]))
    write_outputs(report, outs, tmp_path / "n")
    lines = (tmp_path / "n" / "norms.csv").read_text().splitlines()
    assert lines[0].startswith("index,maximal") and len(lines) == 1 + SMALL["norms"]["count"]


def test_bench_writes_csv_and_keeps_timings_out_of_the_report(tmp_path):
    path = write_config(tmp_path, {"n": 1, "N": 2, "M": 16, "repetitions": 1})
    code = main(["bench", "--config", path, "--out", str(tmp_path)])
    report = json.loads((tmp_path / "report.json").read_text())
    acc = [c for c in report["checks"] if "relative error" in c["name"]]
    assert len(acc) == 2 and all(c["passed"] for c in acc)
    assert code == (0 if report["passed"] else 1)
    rows = (tmp_path / "bench.csv").read_text().splitlines()
    assert rows[0] == "path,n,N,M,wall_ms,rel_err"
    assert {r.split(",")[0] for r in rows[1:]} >= {"direct", "fast", "plan"}
    assert "wall_ms" not in json.dumps(report)


def test_bench_refuses_to_exceed_the_budget():
    with pytest.raises(HarnessError) as e:
        run(ExperimentConfig(experiment="bench", n=2, N=2, M=64, budget=10 ** 6))
    assert e.value.kind == "budget"


def test_endpoint_sweep_requires_two_dimensions():
    with pytest.raises(HarnessError):
        run(ExperimentConfig(experiment="endpoints", n=1, sweep=True))


def test_failing_check_gives_exit_code_one(tmp_path):
    path = write_config(tmp_path, dict(SMALL["apply"], tolerance=1e-300))
    assert main(["apply", "--config", path, "--out", str(tmp_path)]) == 1
    assert json.loads((tmp_path / "report.json").read_text())["passed"] is False


def test_acceptance_subset_from_the_command_line(tmp_path, capsys):
    assert main(["run", "--suite", "acceptance", "--only", "5,9", "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [l.split()[0] for l in lines] == ["PASS", "PASS"]
    body = json.loads((tmp_path / "acceptance.json").read_text())
    assert [c["number"] for c in body["criteria"]] == [5, 9] and body["passed"]
