"""Command line entry point: ``combwg run | validate | cache``."""

from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import logging
import subprocess
import sys
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .cache import ResultCache, task_hash
from .config import DEPENDENCIES, ConfigError, RunConfig, load_config
from .pipeline import Recorder, run_task

__all__ = ["main", "run_config", "version_string"]

log = logging.getLogger("combwg")


def version_string() -> str:
    """``<version>`` plus ``+g<commit>`` when the source lives in a git checkout."""
    try:
        rev = subprocess.run(
            ["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
            capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    if rev.returncode != 0 or not rev.stdout.strip():
        return __version__
    return f"{__version__}+g{rev.stdout.strip()}"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


@dataclasses.dataclass
class TaskRecord:
    name: str
    status: str = "pending"
    cached: bool = False
    digest: str = ""
    seconds: float = 0.0
    error: str | None = None
    summary: dict | None = None
    files: list = dataclasses.field(default_factory=list)


def _levels(tasks: list[str]) -> list[list[str]]:
    done: set[str] = set()
    out = []
    remaining = list(tasks)
    while remaining:
        ready = [t for t in remaining if all(d in done for d in DEPENDENCIES[t])]
        out.append(ready)
        done.update(ready)
        remaining = [t for t in remaining if t not in ready]
    return out


def _execute(name: str, cfg: RunConfig, out: Path, cache: ResultCache | None, scale: float, blocked: bool) -> TaskRecord:
    rec = TaskRecord(name)
    key = cfg.task_key(name)
    key["resolution_scale"] = scale
    rec.digest = task_hash(key)
    if blocked:
        rec.status = "skipped"
        rec.error = "a prerequisite task failed"
        return rec
    t0 = time.perf_counter()
    if cache is not None and cache.get(rec.digest) is not None:
        rec.files = cache.restore(rec.digest, out)
        rec.summary = cache.get(rec.digest).get("summary")
        rec.status, rec.cached = "ok", True
        rec.seconds = time.perf_counter() - t0
        log.info("%s: cache hit %s", name, rec.digest[:12])
        return rec
    recorder = Recorder(out)
    try:
        rec.summary = run_task(name, cfg, recorder, scale)
        rec.status = "ok"
    except Exception as exc:  # task failures are reported in the manifest
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}"
        log.debug("%s", traceback.format_exc())
    rec.files = list(recorder.files)
    rec.seconds = time.perf_counter() - t0
    if rec.status == "ok" and cache is not None:
        cache.put(rec.digest, name, rec.files, out, rec.summary)
    log.info("%s: %s in %.1f s", name, rec.status, rec.seconds)
    return rec


def run_config(
    cfg: RunConfig,
    output: Path | None = None,
    threads: int = 1,
    use_cache: bool = True,
    resolution_scale: float = 1.0,
    cache_dir: Path | None = None,
) -> tuple[int, Path]:
    """Run every task of ``cfg``; returns (exit status, manifest path)."""
    out = Path(output) if output is not None else cfg.output
    out.mkdir(parents=True, exist_ok=True)
    cache = ResultCache(cache_dir or cfg.cache_dir) if (use_cache and cfg.cache_enabled) else None
    started = _now()
    records: dict[str, TaskRecord] = {}
    failed: set[str] = set()
    for level in _levels(cfg.ordered_tasks()):
        blocked = {t: any(d in failed for d in DEPENDENCIES[t]) for t in level}
        if threads > 1 and len(level) > 1:
            with ThreadPoolExecutor(min(threads, len(level))) as pool:
                futures = {t: pool.submit(_execute, t, cfg, out, cache, resolution_scale, blocked[t]) for t in level}
                results = {t: f.result() for t, f in futures.items()}
        else:
            results = {t: _execute(t, cfg, out, cache, resolution_scale, blocked[t]) for t in level}
        for t in level:
            records[t] = results[t]
            if results[t].status != "ok":
                failed.add(t)

    artifacts, seen = [], set()
    for t in cfg.ordered_tasks():
        for f in records[t].files:
            rel = Path(f).relative_to(out).as_posix()
            if rel in seen:
                continue
            seen.add(rel)
            artifacts.append({"path": rel, "task": t, "sha256": _sha256(Path(f)), "bytes": Path(f).stat().st_size})
    manifest = {
        "tool": "combwg",
        "version": version_string(),
        "config": str(cfg.source),
        "config_hash": cfg.digest,
        "started": started,
        "finished": _now(),
        "flags": {"threads": threads, "cache": cache is not None, "resolution_scale": resolution_scale},
        "status": "failed" if failed else "ok",
        "tasks": [
            {
                "name": r.name, "status": r.status, "cached": r.cached, "key": r.digest,
                "seconds": round(r.seconds, 3), "error": r.error, "summary": r.summary,
            }
            for r in (records[t] for t in cfg.ordered_tasks())
        ],
        "artifacts": artifacts,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return (1 if failed else 0), path


@click.group()
@click.version_option(__version__, prog_name="combwg")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose: bool):
    """Band structures, traps and emission rates of comb waveguides."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(name)s: %(message)s")


def _load_or_exit(path) -> RunConfig:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for w in cfg.warnings:
        click.echo(f"warning: {w}", err=True)
    return cfg


@cli.command(name="run")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", type=click.Path(file_okay=False), default=None, help="Output directory (overrides the config).")
@click.option("--threads", type=click.IntRange(1), default=1, show_default=True, help="Independent tasks run concurrently.")
@click.option("--no-cache", is_flag=True, help="Neither read nor write the result cache.")
@click.option("--resolution-scale", type=click.FloatRange(0.1, 10.0), default=1.0, show_default=True,
              help="Multiply plane-wave cutoffs and grid densities.")
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None, help="Cache location.")
def run_command(config_path, output, threads, no_cache, resolution_scale, cache_dir):
    """Run the tasks listed in CONFIG_PATH and write a manifest."""
    cfg = _load_or_exit(config_path)
    status, manifest = run_config(
        cfg, Path(output) if output else None, threads, not no_cache, resolution_scale,
        Path(cache_dir) if cache_dir else None,
    )
    data = json.loads(manifest.read_text(encoding="utf-8"))
    for t in data["tasks"]:
        flag = " (cached)" if t["cached"] else ""
        msg = f"{t['name']}: {t['status']}{flag}"
        if t["error"]:
            msg += f" - {t['error']}"
        click.echo(msg)
    click.echo(f"manifest: {manifest}")
    sys.exit(status)


@cli.command(name="validate")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def validate_command(config_path):
    """Check CONFIG_PATH without running it."""
    cfg = _load_or_exit(config_path)
    click.echo("ok")
    if cfg.defaulted:
        click.echo("defaulted fields:")
        for f in cfg.defaulted:
            click.echo(f"  {f}")


@cli.group(name="cache")
def cache_group():
    """Inspect or empty the result cache."""


@cache_group.command(name="ls")
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None)
def cache_ls(cache_dir):
    cache = ResultCache(cache_dir)
    entries = cache.entries()
    for digest, meta in entries:
        if meta is None:
            click.echo(f"{digest[:16]}  <damaged>")
        else:
            click.echo(f"{digest[:16]}  {meta.get('task', '?'):<10} {len(meta.get('files', []))} files  v{meta.get('version')}")
    click.echo(f"{len(entries)} entries in {cache.root}")


@cache_group.command(name="clear")
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None)
def cache_clear(cache_dir):
    cache = ResultCache(cache_dir)
    n = cache.clear()
    click.echo(f"removed {n} entries from {cache.root}")


def main(argv=None):
    cli.main(args=argv, prog_name="combwg")


if __name__ == "__main__":
    main()
