import json

from combwg import __version__
from combwg.cache import ResultCache, default_cache_dir, task_hash


def _files(tmp_path):
    out = tmp_path / "out"
    (out / "sub").mkdir(parents=True)
    a = out / "a.csv"
    a.write_text("x\n1\n")
    b = out / "sub" / "b.bin"
    b.write_bytes(bytes(range(256)))
    return out, [a, b]


def test_hash_is_order_independent_and_sensitive():
    assert task_hash({"a": 1, "b": [1, 2]}) == task_hash({"b": [1, 2], "a": 1})
    assert task_hash({"a": 1}) != task_hash({"a": 1.5})


def test_put_restore_round_trip(tmp_path):
    out, files = _files(tmp_path)
    cache = ResultCache(tmp_path / "cache")
    digest = task_hash({"t": 1})
    assert cache.get(digest) is None
    cache.put(digest, "bands", files, out, {"n": 3})
    meta = cache.get(digest)
    assert meta["task"] == "bands" and meta["summary"] == {"n": 3}
    dest = tmp_path / "restored"
    restored = cache.restore(digest, dest)
    assert sorted(p.relative_to(dest).as_posix() for p in restored) == ["a.csv", "sub/b.bin"]
    for src in files:
        assert (dest / src.relative_to(out)).read_bytes() == src.read_bytes()


def test_version_mismatch_is_a_miss(tmp_path):
    out, files = _files(tmp_path)
    cache = ResultCache(tmp_path / "cache")
    cache.put("d1", "bands", files, out)
    entry = tmp_path / "cache" / "d1" / "entry.json"
    meta = json.loads(entry.read_text())
    meta["version"] = __version__ + ".old"
    entry.write_text(json.dumps(meta))
    assert cache.get("d1") is None


def test_damaged_entry_is_a_miss(tmp_path):
    out, files = _files(tmp_path)
    cache = ResultCache(tmp_path / "cache")
    cache.put("d1", "bands", files, out)
    (tmp_path / "cache" / "d1" / "a.csv").unlink()
    assert cache.get("d1") is None
    (tmp_path / "cache" / "d1" / "entry.json").write_text("{broken")
    assert cache.get("d1") is None
    assert cache.entries() == [("d1", None)]


def test_entries_and_clear(tmp_path):
    out, files = _files(tmp_path)
    cache = ResultCache(tmp_path / "cache")
    assert cache.entries() == [] and cache.clear() == 0
    cache.put("d1", "bands", files, out)
    cache.put("d2", "trap", files[:1], out)
    cache.put("d2", "trap", files, out)  # overwrite in place
    names = [d for d, _ in cache.entries()]
    assert names == ["d1", "d2"]
    assert len(cache.get("d2")["files"]) == 2
    assert not [p for p in (tmp_path / "cache").iterdir() if p.name.startswith(".tmp-")]
    assert cache.clear() == 2
    assert cache.entries() == []


def test_default_location_follows_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("COMBWG_CACHE_DIR", str(tmp_path / "x"))
    assert default_cache_dir() == tmp_path / "x"
    monkeypatch.delenv("COMBWG_CACHE_DIR")
    monkeypatch.setenv("XDG_CACHE_HOME", str(tmp_path / "xdg"))
    assert default_cache_dir() == tmp_path / "xdg" / "combwg"
