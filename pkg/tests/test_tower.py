import pytest
from sympy import primerange

from lib.arith import SquareClass
from lib.common import HypothesisError, NoSquareRootDatum
from lib.persistence import load_table
from lib.quadfield import Pattern, make_field, make_triple
from lib.tower import (
    FieldSummary,
    FundamentalSystem,
    IwasawaInvariants,
    Xinf,
    applicable_check,
    build_tower_report,
    c_invariant,
    check_573_nonresidue,
    check_573_residue,
    check_norm_obstruction,
    check_p1_principality,
    check_product_nonresidue,
    compute_field_summary,
    field_summary,
    fukuda_stabilize,
    hasse_unit_index,
    kuroda_a1,
    sqrt_unit_in_k1,
)

REPORT_KEYS = {
    "p1", "q1", "q2", "pattern", "symbols", "A0", "A0_factors", "AF", "AF_factors",
    "Q", "A1", "principal", "stable", "lambda", "mu", "nu", "Xinf", "theorem", "violations",
}


def test_c_invariant():
    c = c_invariant(make_field(165))
    assert c.square_class == SquareClass(15)
    assert c.unit_id == "e1"


def test_c_invariant_needs_norm_one():
    with pytest.raises(NoSquareRootDatum):
        c_invariant(make_field(2))


def test_sqrt_unit_in_k1():
    assert not sqrt_unit_in_k1(15, 165)
    assert sqrt_unit_in_k1(330, 165)
    assert sqrt_unit_in_k1(8, 165)
    assert sqrt_unit_in_k1(SquareClass(165), 165)
    assert sqrt_unit_in_k1(c_invariant(make_field(3)), 5) is False


def test_field_summary_roundtrip_through_dict():
    summary = compute_field_summary(1045)
    assert summary.factors == [4]
    assert summary.narrow_factors == [2, 4]
    assert summary.principal == {5: False, 11: True, 19: False}
    assert summary.principal_by_norm == summary.principal
    assert set(summary.norm_solvable) == {5, -5, 11, -11, 19, -19}
    assert not summary.norm_solvable[5] and not summary.norm_solvable[-5]
    assert summary.norm_solvable[11] or summary.norm_solvable[-11]
    assert FieldSummary.from_dict(summary.to_dict()) == summary


@pytest.mark.parametrize(
    "triple, Q, system",
    [
        ((5, 11, 19), 1, FundamentalSystem.PLAIN),
        ((5, 11, 131), 2, FundamentalSystem.SQRT_PRODUCT),
        ((5, 7, 3), 1, FundamentalSystem.PLAIN),
    ],
)
def test_hasse_unit_index(triple, Q, system):
    index = hasse_unit_index(make_triple(*triple))
    assert (index.Q, index.system) == (Q, system)
    assert index.Q == 1 + sum(index.memberships)


def test_hasse_unit_index_rejects_unpatterned_triple():
    with pytest.raises(HypothesisError):
        hasse_unit_index(make_triple(5, 13, 19))


@pytest.mark.parametrize("triple, expected", [((5, 11, 19), 4), ((5, 11, 131), 8), ((13, 43, 179), 16)])
def test_kuroda_a1(triple, expected):
    assert kuroda_a1(make_triple(*triple)) == expected


def test_fukuda_stabilize():
    assert fukuda_stabilize(4, 4) == IwasawaInvariants(0, 0, 2)
    assert fukuda_stabilize(1, 1) == IwasawaInvariants(0, 0, 0)
    assert fukuda_stabilize(4, 8) is None
    with pytest.raises(ValueError):
        fukuda_stabilize(3, 3)


def test_check_product_nonresidue():
    T = make_triple(5, 3, 11)
    v = check_product_nonresidue(T)
    assert v.holds and v.xinf is Xinf.CYCLIC_TWO
    with pytest.raises(HypothesisError):
        check_product_nonresidue(make_triple(5, 11, 19))


@pytest.mark.parametrize("triple", [(5, 11, 19), (5, 11, 131), (5, 19, 59)])
def test_check_p1_principality(triple):
    v = check_p1_principality(make_triple(*triple))
    assert v.holds, v.notes


def test_check_norm_obstruction():
    v = check_norm_obstruction(make_triple(5, 11, 19))
    assert v.applicable and v.holds
    assert v.xinf is Xinf.CYCLIC_AT_LEAST_FOUR
    assert not check_norm_obstruction(make_triple(5, 11, 131)).applicable


def test_check_573_nonresidue():
    v = check_573_nonresidue(make_triple(5, 7, 3))
    assert v.holds, v.notes
    with pytest.raises(HypothesisError):
        check_573_nonresidue(make_triple(5, 31, 3))


@pytest.mark.parametrize("triple, name", [((5, 31, 3), "573-q2-nonresidue"), ((5, 31, 11), "573-q1-principality")])
def test_check_573_residue(triple, name):
    v = check_573_residue(make_triple(*triple))
    assert v.name == name
    assert v.holds, v.notes


@pytest.mark.parametrize(
    "triple, check",
    [
        ((5, 3, 11), check_product_nonresidue),
        ((5, 11, 19), check_p1_principality),
        ((5, 7, 3), check_573_nonresidue),
        ((5, 31, 11), check_573_residue),
        ((5, 3, 43), None),
        ((5, 13, 19), None),
    ],
)
def test_applicable_check(triple, check):
    assert applicable_check(make_triple(*triple)) is check


def test_report_keys_and_values():
    report = build_tower_report(make_triple(5, 11, 19))
    data = report.to_dict()
    assert set(data) == REPORT_KEYS
    assert data["pattern"] == "cond1"
    assert data["symbols"] == {"q1/p1": 1, "q2/p1": 1, "q1q2/p1": 1, "p1/q2": 1}
    assert (data["A0"], data["AF"], data["Q"], data["A1"]) == (4, 4, 1, 4)
    assert data["A0_factors"] == [4]
    assert data["principal"] == [11]
    assert data["stable"] is True
    assert (data["lambda"], data["mu"], data["nu"]) == (0, 0, 2)
    assert data["theorem"] == "p1-principality+norm-obstruction"
    assert data["Xinf"] == "Z/2^m, m>=2"
    assert data["violations"] == []


def test_report_unstable_cond1_is_unknown():
    data = build_tower_report(make_triple(5, 11, 131)).to_dict()
    assert data["stable"] is False
    assert data["A1"] == 8
    assert data["principal"] == [5]
    assert data["theorem"] == "p1-principality"
    assert (data["lambda"], data["mu"], data["nu"]) == ("unknown", "unknown", "unknown")
    assert data["Xinf"] == Xinf.UNKNOWN.value


def test_report_order_two():
    report = build_tower_report(make_triple(5, 3, 11))
    assert report.A0_order == report.A1_order == 2
    assert report.A0_cyclic
    assert report.xinf is Xinf.CYCLIC_TWO
    assert report.theorem_tag == "order-two-stable"
    assert (report.lam, report.mu, report.nu) == (0, 0, 1)


def test_report_unclassified():
    report = build_tower_report(make_triple(5, 3, 43))
    assert report.theorem_tag == "unclassified"
    assert report.violations == []


def test_report_rejects_unpatterned_triple():
    with pytest.raises(HypothesisError):
        build_tower_report(make_triple(5, 13, 19))


def test_report_uses_lookup():
    calls = []

    def lookup(d):
        calls.append(d)
        return field_summary(d)

    build_tower_report(make_triple(5, 7, 3), lookup)
    assert set(calls) == {105, 210}


def _table_cases():
    return [(name, row) for name in ("nonprincipal", "principal") for row in load_table(name)]


@pytest.mark.parametrize("name, row", _table_cases(), ids=lambda x: str(x) if isinstance(x, str) else f"{x.p1}-{x.q1}-{x.q2}")
def test_table_rows(name, row):
    report = build_tower_report(make_triple(row.p1, row.q1, row.q2))
    principal, A0, A1 = row.expected
    assert report.A0_order == A0
    assert report.A1_order == A1
    assert report.principal_primes == [principal]
    assert report.stable is (name == "nonprincipal")
    assert report.violations == []


def _sweep(p1_values, q_bound):
    qs = [q for q in range(3, q_bound) if all(q % k for k in range(2, q))]
    for p1 in p1_values:
        for q1 in qs:
            for q2 in qs:
                if q2 % 8 != 3:
                    continue
                if (q1 % 8 == 3 and q1 < q2) or q1 % 8 == 7:
                    yield make_triple(p1, q1, q2)


def test_small_sweep_has_no_violations():
    for T in _sweep((5, 13), 48):
        report = build_tower_report(T)
        assert report.violations == [], (str(T), report.violations)
        assert 4 * report.A1_order == report.Q_K1 * report.A0_order * report.AF_order


@pytest.mark.slow
def test_sweep_below_150_has_no_violations():
    for T in _sweep((5, 13, 29, 37, 53, 61), 150):
        assert build_tower_report(T).violations == [], str(T)


def test_table_erratum_row_is_the_same_field_as_its_neighbour():
    rows = {(r.p1, r.q1, r.q2): r for r in load_table("nonprincipal")}
    listed, swapped = rows[13, 107, 131], rows[13, 131, 107]
    assert make_triple(13, 107, 131).d == make_triple(13, 131, 107).d == 182221
    assert (listed.A0, listed.A1, listed.principal) != (swapped.A0, swapped.A1, swapped.principal)
    report = build_tower_report(make_triple(13, 107, 131))
    assert (report.A0_order, report.A1_order, report.principal_primes) == (8, 8, [107])
    assert listed.expected == (107, 8, 8)


def _residue_case_triples(p1_values, bound):
    primes = list(primerange(3, bound))
    for p1 in p1_values:
        for q1 in primes:
            for q2 in primes:
                if q1 % 8 == 7 and q2 % 8 == 3:
                    T = make_triple(p1, q1, q2)
                    if T.symbols.q1_p1 == T.symbols.q2_p1 == 1:
                        yield T


def test_check_573_residue_prime_classes():
    q1_principal = 0
    for T in _residue_case_triples((5, 13), 110):
        v = check_573_residue(T)
        assert v.name == "573-q1-principality"
        assert v.holds, (str(T), v.notes)
        K = field_summary(T.d)
        assert not (K.principal[T.p1] and K.principal[T.q2])
        if K.principal[T.q1]:
            q1_principal += 1
            assert v.xinf is Xinf.CYCLIC_AT_LEAST_EIGHT
            assert hasse_unit_index(T).system is FundamentalSystem.SQRT_PRODUCT
            assert hasse_unit_index(T).memberships == (False, False, True)
    assert q1_principal > 0


def test_norm_checks_read_the_summaries(monkeypatch):
    T = make_triple(5, 11, 19)
    summaries = {d: field_summary(d) for d in (T.d, 2 * T.d)}

    def fail(*args):
        raise AssertionError("norm equation solved outside the field summary")

    monkeypatch.setattr("lib.tower.norm_equation", fail)
    assert check_norm_obstruction(T, summaries.__getitem__).holds
    assert build_tower_report(T, summaries.__getitem__).violations == []


def _pattern_triples(pattern, bound):
    primes = list(primerange(3, bound))
    q1_residue = 3 if pattern is Pattern.COND1 else 7
    for p1 in primes:
        if p1 % 8 != 5:
            continue
        for q1 in primes:
            for q2 in primes:
                if q1 % 8 != q1_residue or q2 % 8 != 3:
                    continue
                if pattern is Pattern.COND1 and q2 <= q1:
                    continue
                yield make_triple(p1, q1, q2)


@pytest.mark.slow
def test_product_nonresidue_below_200():
    count = 0
    for T in _pattern_triples(Pattern.COND1, 200):
        if T.symbols.q1q2_p1 != -1:
            continue
        report = build_tower_report(T)
        assert report.A0_order == report.A1_order == 2, str(T)
        assert report.xinf is Xinf.CYCLIC_TWO, str(T)
        assert report.violations == [], (str(T), report.violations)
        count += 1
    assert count > 0


@pytest.mark.slow
def test_573_nonresidue_below_200():
    count = 0
    for T in _pattern_triples(Pattern.COND2, 200):
        if T.symbols.q1_p1 != -1:
            continue
        report = build_tower_report(T)
        assert (report.A0_order, report.A1_order, report.Q_K1) == (2, 2, 1), str(T)
        assert report.xinf is Xinf.CYCLIC_TWO, str(T)
        assert report.violations == [], (str(T), report.violations)
        count += 1
    assert count > 0
