import filecmp
import json
import shutil
from pathlib import Path

import pytest
from click.testing import CliRunner

from oscar_kit.cli import load_config, main, validate_config

ROOT = Path(__file__).resolve().parents[1]
DEMO = ROOT / "configs" / "demo.json"
GOLDEN = Path(__file__).parent / "golden" / "demo_report.json"
# wall-clock fields are the only non-deterministic content
TIMING = {"runtime.json"}


def invoke(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def pipeline(out: Path, *extra):
    for cmd in ("generate", "fit", "discover", "evaluate"):
        res = invoke(cmd, "--config", DEMO, "--out", out, *extra)
        assert res.exit_code == 0, res.output
    return out


def flatten(obj, prefix=""):
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            out.update(flatten(v, f"{prefix}/{k}"))
        return out
    return {prefix: obj}


def strip_runtime(path: Path) -> dict:
    report = json.loads(path.read_text())
    report.pop("runtime", None)
    return report


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    return pipeline(tmp_path_factory.mktemp("demo"))


def test_golden_report(demo_run):
    golden = flatten(json.loads(GOLDEN.read_text()))
    got = flatten(strip_runtime(demo_run / "report.json"))
    for key, value in golden.items():
        assert got[key] == pytest.approx(value, abs=1e-6), key


def test_outputs_and_manifest(demo_run):
    for name in ("model.json", "corpus.jsonl", "dataset.jsonl", "truth.json", "estimator.json",
                 "discovery.jsonl", "report.txt", "strata.csv"):
        assert (demo_run / name).is_file()
    n = len((demo_run / "dataset.jsonl").read_text().splitlines())
    assert len(list((demo_run / "graphs").glob("seq_*.dot"))) == n
    manifest = json.loads((demo_run / "manifest.discover.json").read_text())
    assert manifest["seed"] == 7 and len(manifest["config_sha256"]) == 64
    assert "discovery.jsonl" in manifest["outputs"]
    record = json.loads((demo_run / "discovery.jsonl").read_text().splitlines()[0])
    labels = json.loads((demo_run / "labels.json").read_text())
    assert sorted(record) == sorted(labels)


def test_rerun_byte_identical(demo_run, tmp_path):
    first = tmp_path / "first"
    shutil.copytree(demo_run, first)
    pipeline(demo_run)
    files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    for rel in files:
        if rel.name in TIMING:
            continue
        if rel.name == "report.json":
            assert strip_runtime(first / rel) == strip_runtime(demo_run / rel)
        else:
            assert filecmp.cmp(first / rel, demo_run / rel, shallow=False), rel


def test_sampling_beats_none(demo_run, tmp_path):
    none = tmp_path / "none"
    shutil.copytree(demo_run, none)
    for cmd in ("discover", "evaluate"):
        assert invoke(cmd, "--config", DEMO, "--out", none, "--strategy", "none").exit_code == 0
    sampled = json.loads((demo_run / "report.json").read_text())["weighted"]["f1"]
    plain = json.loads((none / "report.json").read_text())["weighted"]["f1"]
    assert sampled > plain


def test_parallelism_flag(demo_run, tmp_path):
    par = tmp_path / "par"
    shutil.copytree(demo_run, par)
    assert invoke("discover", "--config", DEMO, "--out", par, "--parallelism", 2).exit_code == 0
    assert filecmp.cmp(demo_run / "discovery.jsonl", par / "discovery.jsonl", shallow=False)


def test_export_dot(demo_run, tmp_path):
    dup = tmp_path / "dot"
    shutil.copytree(demo_run, dup)
    shutil.rmtree(dup / "graphs")
    assert invoke("export-dot", "--config", DEMO, "--out", dup).exit_code == 0
    assert filecmp.cmp(demo_run / "graphs" / "seq_00000.dot", dup / "graphs" / "seq_00000.dot", shallow=False)


def test_config_errors_enumerated(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"backend": "gpu", "parallelism": 0,
                               "sampling": {"strategy": "bogus", "n_particles": 0}}))
    res = CliRunner().invoke(main, ["discover", "--config", str(cfg)])
    assert res.exit_code == 2
    err = json.loads(res.output.strip().splitlines()[-1])
    assert err["error"] == "ConfigError"
    text = " ".join(err["messages"])
    for needle in ("seed", "backend", "parallelism", "strategy", "n_particles"):
        assert needle in text
    assert len(err["messages"]) >= 5


def test_flag_precedence(tmp_path):
    cfg = load_config(str(DEMO), {"seed": 11, "sampling": {"n_particles": 5}})
    assert cfg["seed"] == 11 and cfg["sampling"]["n_particles"] == 5
    assert cfg["sampling"]["top_k"] == 35 and cfg["threshold"]["z_coeff"] == 2.75
    assert validate_config(cfg, "discover") == [] or all("exist" in m for m in validate_config(cfg, "discover"))


def test_missing_inputs_runtime_error(tmp_path):
    res = CliRunner().invoke(main, ["fit", "--config", str(DEMO), "--out", str(tmp_path / "empty")])
    assert res.exit_code in (2, 3)
    assert "error" in json.loads(res.output.strip().splitlines()[-1])
