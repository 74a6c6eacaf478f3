import json

import pytest
from click.testing import CliRunner

from combwg import __version__
from combwg.cli import cli

TINY = """\
units: a
geometry:
  H: 2.0
  w: 0.372
  h_etched: 1.6
solver:
  cutoffs: [3, 8]
bands:
  n_bands: 3
  k_points: 17
tasks: [{tasks}]
output: out
cache:
  dir: cache
"""


def _write(tmp_path, tasks="bands", extra=""):
    path = tmp_path / "run.yaml"
    path.write_text(TINY.format(tasks=tasks) + extra)
    return path


def _run(*args):
    return CliRunner().invoke(cli, [str(a) for a in args], catch_exceptions=False)


def test_version():
    res = _run("--version")
    assert res.exit_code == 0 and __version__ in res.output


def test_empty_task_list_writes_only_a_manifest(tmp_path):
    res = _run("run", _write(tmp_path, tasks=""))
    assert res.exit_code == 0, res.output
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "ok" and m["tasks"] == [] and m["artifacts"] == []


def test_run_then_rerun_hits_the_cache(tmp_path):
    cfg = _write(tmp_path)
    first = _run("run", cfg)
    assert first.exit_code == 0, first.output
    out = tmp_path / "out"
    csv1 = (out / "bands.csv").read_bytes()
    m1 = json.loads((out / "manifest.json").read_text())
    assert m1["tasks"][0]["cached"] is False

    (out / "bands.csv").unlink()
    second = _run("run", cfg)
    assert "bands: ok (cached)" in second.output
    assert (out / "bands.csv").read_bytes() == csv1
    m2 = json.loads((out / "manifest.json").read_text())
    assert m2["tasks"][0]["cached"] is True
    assert m2["artifacts"] == m1["artifacts"]


def test_outputs_are_reproducible_without_cache(tmp_path):
    cfg = _write(tmp_path)
    _run("run", cfg, "--no-cache", "--output", tmp_path / "a")
    _run("run", cfg, "--no-cache", "--output", tmp_path / "b")
    assert (tmp_path / "a" / "bands.csv").read_bytes() == (tmp_path / "b" / "bands.csv").read_bytes()
    assert not (tmp_path / "cache").exists()


def test_manifest_lists_every_artifact_with_hash(tmp_path):
    _run("run", _write(tmp_path), "--no-cache")
    out = tmp_path / "out"
    m = json.loads((out / "manifest.json").read_text())
    for key in ("tool", "version", "config", "config_hash", "started", "finished", "flags", "status", "tasks", "artifacts"):
        assert key in m
    files = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert {a["path"] for a in m["artifacts"]} == files
    import hashlib

    for a in m["artifacts"]:
        data = (out / a["path"]).read_bytes()
        assert a["sha256"] == hashlib.sha256(data).hexdigest() and a["bytes"] == len(data)
    assert m["flags"] == {"threads": 1, "cache": False, "resolution_scale": 1.0}


def test_resolution_scale_changes_the_cache_key(tmp_path):
    cfg = _write(tmp_path)
    _run("run", cfg)
    res = _run("run", cfg, "--resolution-scale", "1.5")
    assert "(cached)" not in res.output
    m = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert "cutoffs [4, 12]" in (tmp_path / "out" / "bands.csv").read_text()
    assert m["flags"]["resolution_scale"] == 1.5


def test_failed_task_skips_dependents_and_exits_nonzero(tmp_path):
    # an unknown parity label makes the bands task fail
    extra = "bands:\n  n_bands: 3\n  k_points: 17\n  gaps:\n    - bands: [0, 1]\n      k: [0.1, 0.2]\n      parities: [even, odd]\n"
    text = TINY.format(tasks="bands, dispersion").replace("bands:\n  n_bands: 3\n  k_points: 17\n", "") + extra
    path = tmp_path / "run.yaml"
    path.write_text(text)
    res = _run("run", path)
    assert res.exit_code == 1
    m = json.loads((tmp_path / "out" / "manifest.json").read_text())
    status = {t["name"]: t["status"] for t in m["tasks"]}
    assert status == {"bands": "failed", "dispersion": "skipped"}
    assert m["status"] == "failed"


def test_config_errors_exit_2(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text(TINY.format(tasks="dispersion"))
    res = CliRunner().invoke(cli, ["run", str(path)])
    assert res.exit_code == 2
    assert "task 'dispersion' requires task 'bands'" in res.output


def test_validate_reports_defaults_and_warnings(tmp_path):
    path = _write(tmp_path, extra="bandz: {}\n")
    res = CliRunner().invoke(cli, ["validate", str(path)])
    assert res.exit_code == 0
    assert "ok" in res.output and "defaulted fields:" in res.output and "geometry.n" in res.output
    assert "did you mean 'bands'" in res.output


def test_cache_ls_and_clear(tmp_path):
    cfg = _write(tmp_path)
    _run("run", cfg)
    cache = tmp_path / "cache"
    res = _run("cache", "ls", "--cache-dir", cache)
    assert "bands" in res.output and "1 entries" in res.output
    res = _run("cache", "clear", "--cache-dir", cache)
    assert "removed 1 entries" in res.output
    assert "0 entries" in _run("cache", "ls", "--cache-dir", cache).output


def test_threads_give_identical_artifacts(tmp_path):
    extra = "optimize:\n  budget: 0\n"
    path = _write(tmp_path, tasks="bands, optimize", extra=extra)
    _run("run", path, "--no-cache", "--output", tmp_path / "serial")
    res = _run("run", path, "--no-cache", "--threads", "2", "--output", tmp_path / "parallel")
    assert res.exit_code == 0, res.output
    for name in ("bands.csv", "optimize_result.json"):
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "parallel" / name).read_bytes()
