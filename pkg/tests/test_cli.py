import json
import subprocess
import sys
from importlib import resources
from pathlib import Path

import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from nwl.cli import main

REPORTS = {
    "symbol-check": ("symbol_check.json", "symbol_check"),
    "kernel": ("kernel_report.json", "kernel_report"),
    "solve": ("solve.json", "solve"),
    "branch": ("branch.json", "branch"),
    "symmetry": ("symmetry.json", "symmetry"),
    "evolve": ("evolve.json", "evolve"),
    "all": ("all.json", "all"),
}


def schema(name):
    text = resources.files("nwl").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc, name):
    manifest = schema("manifest")
    registry = Registry().with_resource("manifest.schema.json", Resource.from_contents(manifest))
    Draft202012Validator(schema(name), registry=registry).validate(doc)


def run(tmp_path, *argv):
    out = tmp_path / "out"
    code = main([*argv, "--out", str(out)])
    return code, out


@pytest.fixture
def whitham_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"symbol": {"kind": "whitham"}, "n": 64}))
    return path


def test_symbol_check(tmp_path, whitham_config):
    code, out = run(tmp_path, "symbol-check", "--config", str(whitham_config))
    assert code == 0
    doc = json.loads((out / "symbol_check.json").read_text())
    validate(doc, "symbol_check")
    assert doc["manifest"]["command"] == "symbol-check"


def test_symbol_check_fails_for_non_cm(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "bessel", "r": 1.0, "strict": False}))
    code, out = run(tmp_path, "symbol-check", "--config", str(cfg))
    assert code in (1, 3)


def test_kernel(tmp_path, whitham_config):
    code, out = run(tmp_path, "kernel", "--config", str(whitham_config), "--origin")
    assert code == 0
    validate(json.loads((out / "kernel_report.json").read_text()), "kernel_report")
    assert (out / "kernel.csv").read_text().splitlines()[0] == "x,K"


def test_solve_branch_and_downstream(tmp_path, whitham_config):
    code, out = run(tmp_path, "solve", "--config", str(whitham_config), "--theta", "0.4")
    assert code == 0
    solve = json.loads((out / "solve.json").read_text())
    validate(solve, "solve")
    assert (out / "profile.csv").exists() and (out / "profile_coeffs.csv").exists()
    code, out2 = run(tmp_path / "b", "branch", "--config", str(whitham_config), "--theta", "0.4")
    assert code == 0
    validate(json.loads((out2 / "branch.json").read_text()), "branch")
    assert (out2 / "branch.csv").read_text().splitlines()[0] == "step,height,c,residual"
    prof = ["--config", str(whitham_config), "--profile", str(out / "profile.csv"),
            "--manifest", str(out / "solve.json")]
    code, out3 = run(tmp_path / "s", "symmetry", *prof)
    assert code == 0
    validate(json.loads((out3 / "symmetry.json").read_text()), "symmetry")
    code, out4 = run(tmp_path / "e", "evolve", *prof, "--t-end", "1.0", "--stride", "50")
    assert code == 0
    validate(json.loads((out4 / "evolve.json").read_text()), "evolve")
    assert sorted(out4.glob("snapshot_*.csv"))


@pytest.fixture
def fine_config(tmp_path):
    path = tmp_path / "fine.json"
    path.write_text(json.dumps({"symbol": {"kind": "whitham"}, "n": 512}))
    return path


@pytest.mark.parametrize("which", ["touching", "boundary"])
def test_verify(tmp_path, fine_config, which):
    cfg = fine_config
    code, out = run(tmp_path, "verify", which, "--config", str(cfg), "--theta", "0.4")
    assert code == 0
    doc = json.loads((out / f"verify_{which}.json").read_text())
    validate(doc, "verify")


def test_verify_boundary_underresolved(tmp_path, whitham_config):
    # the exclusion radii are whole profile cells, too coarse at n = 64
    code, _ = run(tmp_path, "verify", "boundary", "--config", str(whitham_config), "--theta", "0.4")
    assert code == 2


def test_all(tmp_path, fine_config):
    code, out = run(tmp_path, "all", "--config", str(fine_config), "--theta", "0.4")
    assert code == 0
    doc = json.loads((out / "all.json").read_text())
    validate(doc, "all")
    assert doc["passed"] and set(doc["exit_codes"].values()) == {0}


def test_bad_inputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "kernel", "--config", str(bad))[0] == 3
    unknown = tmp_path / "u.json"
    unknown.write_text(json.dumps({"symbol": {"kind": "nope"}}))
    assert run(tmp_path, "kernel", "--config", str(unknown))[0] == 3
    positive = tmp_path / "p.json"
    positive.write_text(json.dumps({"symbol": {"kind": "fkdv", "r": 0.5}}))
    assert run(tmp_path, "kernel", "--config", str(positive))[0] == 3
    assert run(tmp_path, "kernel", "--n", "7")[0] == 3
    with pytest.raises(SystemExit) as e:
        main(["solve", "--n", "abc"])
    assert e.value.code == 3
    assert run(tmp_path, "symmetry", "--profile", str(tmp_path / "missing.csv"), "--speed", "1")[0] == 3


def test_nwl_out_override(tmp_path, monkeypatch, whitham_config):
    target = tmp_path / "env"
    monkeypatch.setenv("NWL_OUT", str(target))
    code, out = run(tmp_path, "symbol-check", "--config", str(whitham_config))
    assert code == 0
    assert (target / "symbol_check.json").exists() and not out.exists()


def strip_timestamps(doc):
    doc["manifest"].pop("timestamps")
    return doc


def test_determinism(tmp_path, whitham_config):
    docs = []
    for i in range(2):
        code, out = run(tmp_path / str(i), "branch", "--config", str(whitham_config), "--theta", "0.3")
        assert code == 0
        docs.append(strip_timestamps(json.loads((out / "branch.json").read_text())))
        docs.append((out / "branch.csv").read_bytes())
    assert json.dumps(docs[0], sort_keys=True) == json.dumps(docs[2], sort_keys=True)
    assert docs[1] == docs[3]


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nwl.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("nwl")
