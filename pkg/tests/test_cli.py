import json

import pytest

from iwasawa2 import CSV_COLUMNS, ScanConfig, main, scan_triples
from lib.quadfield import Pattern


def _json_lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_classgroup_text(capsys):
    assert main(["classgroup", "--d", "1045"]) == 0
    out = capsys.readouterr().out
    assert "wide 2-class group: Z/4, order 4" in out
    assert "principal: {11}" in out


def test_classgroup_narrow_json(capsys):
    assert main(["classgroup", "--d", "1045", "--narrow", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["invariant_factors"] == [2, 4]
    assert data["narrow"] is True
    assert [p["prime"] for p in data["primes"]] == [5, 11, 19]


def test_unit(capsys):
    assert main(["unit", "--d", "165", "--json"]) == 0
    assert json.loads(capsys.readouterr().out) == {"d": 165, "t": 13, "u": 1, "norm": 1, "c": 15}
    assert main(["unit", "--d", "2", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["c"] is None


def test_redei(capsys):
    assert main(["redei", "--disc", "8360", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data["S1"]) == 8
    assert data["S2"] == [[1, 8360]]
    assert data["four_rank"] == 0


def test_normeq(capsys):
    assert main(["normeq", "--d", "7205", "--n", "5"]) == 0
    assert "a = 85, b = 1" in capsys.readouterr().out
    assert main(["normeq", "--d", "1045", "--n", "-1", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["solution"] is None


def test_tower_json(capsys):
    assert main(["tower", "5", "11", "19", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["A1"] == 4
    assert data["principal"] == [11]


def test_tower_text(capsys):
    assert main(["tower", "5", "3", "11"]) == 0
    out = capsys.readouterr().out
    assert "theorem: order-two-stable" in out
    assert "K1 = Q(sqrt(165), sqrt(2))" in out
    assert "VIOLATION" not in out


@pytest.mark.parametrize(
    "argv, code",
    [
        (["tower", "5", "13", "19"], 3),
        (["tower", "5", "5", "3"], 2),
        (["classgroup", "--d", "4"], 2),
        (["normeq", "--d", "5", "--n", "0"], 2),
        (["scan", "--bound", "2"], 2),
        (["scan", "--jobs", "0"], 2),
        (["scan", "--symbol", "p2/q1=1"], 2),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code
    assert capsys.readouterr().out == ""


@pytest.mark.parametrize("argv", [["tables", "--which", "5"], ["scan", "--family", "cond3"], ["scan", "--symbol", "q1/p1"]])
def test_usage_errors_exit_through_argparse(argv):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2


def test_tables(capsys):
    assert main(["tables", "--which", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("p1,q1,q2,Principal")
    assert out[-1] == "10/10 rows match"
    erratum_rows = [line for line in out if line.startswith("13,107,131,")]
    assert len(erratum_rows) == 1
    assert erratum_rows[0].endswith(",107,8,8,erratum")
    assert out[-2].startswith("known erratum (13, 107, 131)")


def test_scan_triples_order_and_patterns():
    triples = scan_triples(ScanConfig(prime_bound=20))
    assert triples == sorted(triples)
    assert {T.pattern for T in triples} == {Pattern.COND1, Pattern.COND2}
    for T in triples:
        if T.pattern is Pattern.COND1:
            assert T.q1 < T.q2
    assert scan_triples(ScanConfig(family="cond2", prime_bound=20)) == [
        T for T in triples if T.pattern is Pattern.COND2
    ]


def test_scan_config_validation():
    with pytest.raises(ValueError):
        ScanConfig(family="cond3")
    with pytest.raises(ValueError):
        ScanConfig(output="xml")
    with pytest.raises(ValueError):
        ScanConfig(symbol_filter=(("q1/p1", 0),))


def test_scan_empty_at_bound_three(capsys):
    assert main(["scan", "--bound", "3", "--json"]) == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "0 triples" in captured.err


def test_scan_symbol_filter(capsys):
    assert main(["scan", "--family", "cond1", "--bound", "20", "--symbol", "q1q2/p1=-1", "--json"]) == 0
    reports = _json_lines(capsys.readouterr().out)
    assert reports
    for r in reports:
        assert r["symbols"]["q1q2/p1"] == -1
        assert r["theorem"] == "order-two-stable"
        assert r["Xinf"] == "Z/2"


def test_scan_csv(capsys):
    assert main(["scan", "--bound", "20", "--csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 1 + len(scan_triples(ScanConfig(prime_bound=20)))


def test_scan_is_deterministic_across_jobs(capsys):
    assert main(["scan", "--bound", "20", "--json", "--jobs", "1"]) == 0
    serial = capsys.readouterr().out
    assert main(["scan", "--bound", "20", "--json", "--jobs", "2"]) == 0
    assert capsys.readouterr().out == serial


def test_scan_cache_warm_and_cold(tmp_path, capsys):
    cache = tmp_path / "fields.jsonl"
    argv = ["scan", "--bound", "20", "--json", "--cache", str(cache)]
    assert main(argv) == 0
    cold = capsys.readouterr().out
    assert cache.exists()
    n_cached = len(cache.read_text().splitlines())
    assert main(argv) == 0
    assert capsys.readouterr().out == cold
    assert len(cache.read_text().splitlines()) == n_cached


def test_scan_out_file(tmp_path, capsys):
    out = tmp_path / "reports.jsonl"
    assert main(["scan", "--bound", "20", "--json", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert len(_json_lines(out.read_text())) == len(scan_triples(ScanConfig(prime_bound=20)))


def test_cache_from_environment(tmp_path, monkeypatch, capsys):
    cache = tmp_path / "env.jsonl"
    monkeypatch.setenv("IWASAWA2_CACHE", str(cache))
    assert main(["tower", "5", "7", "3", "--json"]) == 0
    capsys.readouterr()
    ds = {json.loads(line)["d"] for line in cache.read_text().splitlines()}
    assert ds == {105, 210}


def test_missing_cache_directory(tmp_path):
    assert main(["tower", "5", "7", "3", "--cache", str(tmp_path / "nope" / "c.jsonl")]) == 2
