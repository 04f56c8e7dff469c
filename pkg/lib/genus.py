"""Genus theory of real quadratic fields: prime discriminants, genus fields,
2-rank, Redei decompositions and the 2-class group criteria for the
triple families."""

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import prod

from .arith import (
    SquareClass,
    factorize,
    gf2_rank,
    is_fundamental_discriminant,
    kronecker,
    square_class_span,
    squarefree_part,
    valuation,
)
from .common import HypothesisError
from .forms import wide_class_group
from .quadfield import Pattern, PrimeTriple, QuadField


@dataclass(frozen=True, order=True)
class PrimeDiscriminant:
    value: int

    def __post_init__(self):
        v = self.value
        ok = v in (-4, 8, -8) or (
            len(factorize(v)[1]) == 1
            and factorize(v)[1][0][1] == 1
            and v % 4 == 1
        )
        if not ok:
            raise ValueError(f"{v} is not a prime discriminant")

    @property
    def prime(self) -> int:
        return 2 if self.value % 2 == 0 else abs(self.value)


@dataclass(frozen=True, order=True)
class Decomposition:
    D1: int
    D2: int

    def to_tuple(self) -> tuple[int, int]:
        return self.D1, self.D2


def _require_fundamental(D: int):
    if not is_fundamental_discriminant(D):
        raise ValueError(f"{D} is not a fundamental discriminant")


def prime_discriminant_factorization(D: int) -> list[PrimeDiscriminant]:
    """Prime discriminants with product D, the 2-part first."""
    _require_fundamental(D)
    odd = []
    for p, _ in factorize(D)[1]:
        if p != 2:
            odd.append(p if p % 4 == 1 else -p)
    two_part = D // prod(odd)
    result = [PrimeDiscriminant(two_part)] if two_part != 1 else []
    return result + [PrimeDiscriminant(p) for p in odd]


def narrow_genus_field(K: QuadField) -> list[SquareClass]:
    """Square classes c with K_G+ = Q(sqrt(c) for all c)."""
    classes = [SquareClass(K.d)]
    for p in prime_discriminant_factorization(K.disc):
        classes.append(squarefree_part(p.value))
    return classes


def _independent(classes: list[SquareClass]) -> list[SquareClass]:
    basis: list[SquareClass] = []
    for c in classes:
        if c not in square_class_span(basis):
            basis.append(c)
    return basis


def genus_field(K: QuadField) -> list[SquareClass]:
    """Independent generators of the genus field, the maximal real subfield
    of the narrow genus field."""
    gens = [squarefree_part(p.value) for p in prime_discriminant_factorization(K.disc)]
    positive = [c for c in gens if c.repr > 0]
    negative = [c for c in gens if c.repr < 0]
    if negative:
        positive += [negative[0] * c for c in negative[1:]]
    return _independent(positive + [SquareClass(K.d)])


def hilbert_symbol_minus_one(d: int, p: int) -> int:
    """Hilbert symbol (-1, d)_p for d != 0 and a prime p."""
    if d == 0:
        raise ValueError("(-1, 0)_p is undefined")
    if p == 2:
        odd = d >> valuation(d, 2)
        return -1 if odd % 4 == 3 else 1
    return kronecker(-1, p) ** (valuation(d, p) % 2)


def minus_one_is_norm(K: QuadField) -> bool:
    """-1 is a norm from K, decided place by place."""
    places = set(K.ramified) | {2}
    return all(hilbert_symbol_minus_one(K.d, p) == 1 for p in places)


def genus_rank(K: QuadField) -> int:
    t = len(prime_discriminant_factorization(K.disc))
    return t - 1 - (0 if minus_one_is_norm(K) else 1)


def fixed_class_count(t: int, subfield_order: int, unit_index: int) -> int:
    """#A(K)^G = #A(k) * 2^(t-1) / [E(k) : E(k) cap N(K*)] for K/k quadratic
    with t ramified primes."""
    if t < 0:
        raise ValueError(f"ramified count must be >= 0, got {t}")
    if unit_index not in (1, 2):
        raise ValueError(f"unit index must be 1 or 2, got {unit_index}")
    if subfield_order < 1 or subfield_order & (subfield_order - 1):
        raise ValueError(f"{subfield_order} is not a power of 2")
    value = Fraction(subfield_order) * Fraction(2) ** (t - 1) / unit_index
    if value.denominator != 1:
        raise ValueError(f"fixed class count {value} is not an integer")
    return int(value)


def redei_s1(D: int) -> list[Decomposition]:
    """All D = D1*D2 into discriminants up to order, (1, D) included."""
    primes = [p.value for p in prime_discriminant_factorization(D)]
    found = set()
    for size in range(len(primes) + 1):
        for subset in combinations(primes, size):
            D1 = prod(subset)
            D2 = D // D1
            if abs(D1) > abs(D2):
                D1, D2 = D2, D1
            found.add(Decomposition(D1, D2))
    return sorted(found, key=lambda x: (abs(x.D1), x.D1))


def _chi_trivial_on(D1: int, D2: int) -> bool:
    return all(kronecker(D1, p) == 1 for p, _ in factorize(D2)[1])


def redei_s2(D: int) -> list[Decomposition]:
    """Decompositions in S1 where each factor's character is 1 at every
    prime of the other factor."""
    return [
        x
        for x in redei_s1(D)
        if _chi_trivial_on(x.D1, x.D2) and _chi_trivial_on(x.D2, x.D1)
    ]


def redei_matrix(D: int) -> list[list[int]]:
    primes = prime_discriminant_factorization(D)
    rows = []
    for i, pi in enumerate(primes):
        row = [
            1 if j != i and kronecker(pj.value, pi.prime) == -1 else 0
            for j, pj in enumerate(primes)
        ]
        row[i] = sum(row) % 2
        rows.append(row)
    return rows


def four_rank(D: int) -> int:
    """4-rank of the narrow class group, from the Redei matrix."""
    t = len(prime_discriminant_factorization(D))
    return t - 1 - gf2_rank(redei_matrix(D))


def order_two_criterion(T: PrimeTriple) -> bool:
    """#A(Q(sqrt(p1 q1 q2))) == 2 exactly when some (q_i/p1) is -1."""
    if T.p1 % 4 != 1 or T.q1 % 4 != 3 or T.q2 % 4 != 3:
        raise HypothesisError(f"{T}: needs p1 = 1, q1 = q2 = 3 mod 4")
    return T.symbols.q1_p1 == -1 or T.symbols.q2_p1 == -1


def klein_four_criterion(T: PrimeTriple) -> bool:
    """A(Q(sqrt(2 p1 q1 q2))) is (Z/2)^2 exactly when (q1 q2/p1) = -1 or
    both (q_i/p1) = 1."""
    if T.pattern is not Pattern.COND1:
        raise HypothesisError(f"{T} is not of pattern cond1")
    s = T.symbols
    return s.q1q2_p1 == -1 or (s.q1_p1 == 1 and s.q2_p1 == 1)


def klein_four_check_573(T: PrimeTriple) -> bool:
    """Enumerate the 2-class group of Q(sqrt(2 p1 q1 q2)) and compare to (Z/2)^2."""
    if T.pattern is not Pattern.COND2:
        raise HypothesisError(f"{T} is not of pattern cond2")
    return wide_class_group(T.field_F).invariant_factors == [2, 2]


def layer_bound(pattern: Pattern, A0: int, AF: int) -> int:
    """Upper bound for #A_1 from #A_0 and #A(F).

    #A_1 is at most the fixed count of A_0 under the ramified step K_1/K_0
    times the fixed count of A(F) under the unramified step K_1/F."""
    match pattern:
        case Pattern.COND1:
            # 2 is inert in K, one prime ramifies in K_1/K_0
            ramified = 1
        case Pattern.COND2:
            # 2 splits in K, both primes above it ramify
            ramified = 2
        case _:
            raise HypothesisError(f"no layer bound for pattern {pattern}")
    # unit index 1 gives the largest admissible count
    return fixed_class_count(ramified, A0, 1) * fixed_class_count(0, AF, 1)
