import json
import logging

import pytest

from lib.persistence import Correction, FieldCache, TableRow, load_table
from lib.tower import compute_field_summary


def test_cache_needs_existing_directory(tmp_path):
    with pytest.raises(FileNotFoundError):
        FieldCache(tmp_path / "missing" / "cache.jsonl")


def test_empty_cache(tmp_path):
    cache = FieldCache(tmp_path / "cache.jsonl")
    assert len(cache) == 0
    assert cache.get(1045) is None
    assert cache.misses == 1


def test_lookup_computes_once_and_persists(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = FieldCache(path)
    first = cache.lookup(165)
    assert first == compute_field_summary(165)
    assert cache.misses == 1
    assert cache.lookup(165) == first
    assert cache.hits == 1
    assert len(path.read_text().splitlines()) == 1

    reloaded = FieldCache(path)
    assert 165 in reloaded
    assert reloaded.get(165) == first


def test_add_ignores_duplicates(tmp_path):
    path = tmp_path / "cache.jsonl"
    cache = FieldCache(path)
    summary = compute_field_summary(1045)
    cache.add(summary)
    cache.add(summary)
    assert len(path.read_text().splitlines()) == 1


def test_corrupt_lines_are_skipped(tmp_path, caplog):
    path = tmp_path / "cache.jsonl"
    good = json.dumps(compute_field_summary(15).to_dict())
    path.write_text(good + "\n{not json\n\n" + json.dumps({"d": 7}) + "\n")
    with caplog.at_level(logging.WARNING, logger="lib.persistence"):
        cache = FieldCache(path)
    assert len(cache) == 1
    assert 15 in cache
    assert sum("skipping corrupt cache line" in r.message for r in caplog.records) == 2


@pytest.mark.parametrize("name", ["nonprincipal", "principal"])
def test_load_table(name):
    rows = load_table(name)
    assert len(rows) == 10
    assert all(isinstance(r, TableRow) for r in rows)
    assert all(r.principal in (r.p1, r.q1, r.q2) for r in rows)


def test_table_contents():
    assert load_table("nonprincipal")[0] == TableRow(5, 11, 19, 11, 4, 4)
    assert load_table("principal")[-1] == TableRow(53, 11, 43, 53, 16, 32)


def test_load_table_unknown():
    with pytest.raises(ValueError):
        load_table("4")


def test_table_erratum():
    rows = {(r.p1, r.q1, r.q2): r for r in load_table("nonprincipal")}
    row = rows[13, 107, 131]
    assert row.erratum is not None
    assert "182221" in row.erratum.note
    assert (row.principal, row.A0, row.A1) == (131, 4, 4)
    assert row.expected == (107, 8, 8)
    assert rows[13, 131, 107].expected == (107, 8, 8)
    assert sum(r.erratum is not None for r in rows.values()) == 1


def test_table_row_from_dict_with_erratum():
    data = {"p1": 5, "q1": 11, "q2": 19, "principal": 19, "A0": 4, "A1": 4,
            "erratum": {"note": "swapped", "principal": 11, "A0": 4, "A1": 4}}
    row = TableRow.from_dict(data)
    assert row.erratum == Correction(11, 4, 4, "swapped")
    assert row.expected == (11, 4, 4)
