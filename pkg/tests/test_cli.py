import json
import os
import subprocess
import sys

import pytest

from perco import config as C
from perco.cli import main
from perco.lattice import read_config
from perco.report import read_csv

HERE = os.path.dirname(__file__)
CONFIGS = os.path.join(HERE, os.pardir, "configs")

SAMPLE = {"kind": "sample", "seed": 1, "trials": 2,
          "model": {"family": "bernoulli", "d": 2, "p": 0.7},
          "window": {"radius": 6}, "params": {}}
STRETCH = {"kind": "stretch", "seed": 3, "trials": 30,
           "model": {"family": "bernoulli", "d": 2, "p": 0.9},
           "window": {"radius": 16}, "params": {"R": 8}}
RENORM = {"kind": "renorm-validate", "seed": 0, "trials": 1,
          "params": {"d": 3, "l0": 128, "r0": 1, "L0": 146, "theta": 1, "kmax": 30,
                     "profile": {"eps_P": 1.0, "chi_P": 1.0}}}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def with_(doc, **changes):
    out = json.loads(json.dumps(doc))
    for path, v in changes.items():
        cur = out
        keys = path.split("__")
        for k in keys[:-1]:
            cur = cur[k]
        cur[keys[-1]] = v
    return out


def files(d):
    return {f: open(os.path.join(d, f), "rb").read() for f in sorted(os.listdir(d))
            if os.path.isfile(os.path.join(d, f))}


# ---------------------------------------------------------------- validate


@pytest.mark.parametrize("name", sorted(os.listdir(CONFIGS)))
def test_shipped_configs_validate(name, capsys):
    assert main(["validate", os.path.join(CONFIGS, name)]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_validate_descent_hypothesis(tmp_path, capsys):
    bad = with_(RENORM, params__l0=4, params__r0=1)
    assert main(["validate", write(tmp_path, bad)]) == 2
    out = capsys.readouterr().out
    assert "params.l0" in out and "path descent hypothesis" in out


def test_validate_stretch_coverage(tmp_path, capsys):
    bad = with_(STRETCH, window={"radius": 12})
    assert main(["validate", write(tmp_path, bad)]) == 2
    assert "window: must cover B(0, 2R)" in capsys.readouterr().out


def test_validate_reports_field_paths(tmp_path, capsys):
    bad = with_(SAMPLE, model__p=1.5)
    assert main(["validate", write(tmp_path, bad)]) == 2
    assert capsys.readouterr().out.startswith("model.p:")
    missing = with_(SAMPLE)
    del missing["seed"]
    assert main(["validate", write(tmp_path, missing)]) == 2
    assert "seed" in capsys.readouterr().out


def test_validate_no_defaults_for_science():
    doc = with_(SAMPLE)
    del doc["model"]["p"]
    assert [str(d) for d in C.validate(doc)] == ["model.p: required for family bernoulli"]


def test_validate_broken_json(tmp_path, capsys):
    p = tmp_path / "x.json"
    p.write_text("{nope")
    assert main(["validate", str(p)]) == 2
    assert capsys.readouterr().out.startswith("<json>")


# ---------------------------------------------------------------- config helpers


def test_config_round_trip_and_hash(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(C.dumps(STRETCH))
    back = C.load(p)
    assert back == STRETCH
    h = C.config_hash(STRETCH)
    assert C.config_hash(C.resolve(STRETCH, workers=4, output="x")) == h
    assert C.config_hash(with_(STRETCH, seed=4)) != h


# ---------------------------------------------------------------- run


def test_run_sample_writes_report_and_cache(tmp_path, monkeypatch):
    monkeypatch.delenv("PERCO_CACHE", raising=False)
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, SAMPLE), "--out", str(out)]) == 0
    rep = json.loads((out / "run.json").read_text())
    assert rep["config_hash"] == C.config_hash(SAMPLE)
    assert rep["seeds"] and rep["summary"]["mean_density"] > 0
    cached = sorted(os.listdir(out / "cache"))
    assert cached == [f"{rep['config_hash'][:16]}-{t}.prc1" for t in range(2)]
    cfg = read_config(out / "cache" / cached[0])
    assert cfg.seed == rep["seeds"][0]


def test_perco_cache_env(tmp_path, monkeypatch):
    cache = tmp_path / "shared-cache"
    monkeypatch.setenv("PERCO_CACHE", str(cache))
    assert main(["run", write(tmp_path, SAMPLE), "--out", str(tmp_path / "o")]) == 0
    assert len(os.listdir(cache)) == 2
    assert not (tmp_path / "o" / "cache").exists()


def test_csv_layout_and_hash_row(tmp_path):
    out = tmp_path / "out"
    assert main(["run", write(tmp_path, STRETCH), "--out", str(out)]) == 0
    rows = read_csv(out / "observables.csv")
    assert list(rows[0]) == ["trial_id", "seed", "name", "value", "aux"]
    assert rows[0]["name"] == "config_hash" and rows[0]["aux"] == C.config_hash(STRETCH)
    ratios = [r for r in rows if r["name"] == "max_ratio"]
    assert len(ratios) == 30
    svg = (out / "stretch.svg").read_text()
    assert f"config_hash={C.config_hash(STRETCH)}" in svg


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, STRETCH)
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    first = files(out)
    assert main(["run", cfg, "--out", str(out)]) == 0
    assert files(out) == first


def test_workers_do_not_change_outputs(tmp_path):
    cfg = write(tmp_path, STRETCH)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--workers", "1", "--out", str(a)]) == 0
    assert main(["run", cfg, "--workers", "2", "--out", str(b)]) == 0
    fa, fb = files(a), files(b)
    assert fa["observables.csv"] == fb["observables.csv"]
    assert fa["stretch.svg"] == fb["stretch.svg"]


def test_check_pass_and_fail(tmp_path, capsys):
    assert main(["run", write(tmp_path, RENORM), "--check", "--out", str(tmp_path / "a")]) == 0
    assert "check: PASS" in capsys.readouterr().out
    failing = with_(RENORM, params__l0=16, params__kmax=2)
    assert main(["run", write(tmp_path, failing), "--check", "--out", str(tmp_path / "b")]) == 3
    assert "check: FAIL" in capsys.readouterr().out


def test_run_invalid_config_exit_2(tmp_path):
    assert main(["run", write(tmp_path, with_(SAMPLE, model__p=-1))]) == 2
    assert main(["run", write(tmp_path, SAMPLE), "--workers", "0"]) == 2


def test_empty_trials_fail_the_check(tmp_path, capsys):
    doc = with_(STRETCH, model__p=0.0)
    assert main(["run", write(tmp_path, doc), "--check", "--out", str(tmp_path / "o")]) == 3
    assert "check: FAIL" in capsys.readouterr().out
    rows = read_csv(tmp_path / "o" / "observables.csv")
    assert {r["aux"] for r in rows if r["name"] == "max_ratio"} == {"empty"}


def test_runtime_error_exit_1(tmp_path, capsys):
    doc = {"kind": "shape", "seed": 0, "trials": 30,
           "model": {"family": "bernoulli", "d": 2, "p": 0.0},
           "params": {"directions": [[1, 0]], "n_grid": [2, 4]}}
    assert main(["run", write(tmp_path, doc), "--out", str(tmp_path / "o")]) == 1
    assert "usable trials" in capsys.readouterr().err


def test_console_script(tmp_path):
    cfg = write(tmp_path, SAMPLE)
    r = subprocess.run([sys.executable, "-m", "perco.cli", "validate", cfg],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "ok"
