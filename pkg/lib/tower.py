"""First layer of the cyclotomic Z2-extension of K = Q(sqrt(p1 q1 q2)).

K_1 = Q(sqrt(d), sqrt(2)) is real biquadratic with quadratic subfields K,
F = Q(sqrt(2d)) and Q(sqrt(2)). Its 2-class number comes from the class
number formula #A(K_1) = Q(K_1) * #A(K) * #A(F) * #A(Q(sqrt 2)) / 4, with
the unit index Q(K_1) decided by square classes of traces of units."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cache
from typing import Callable

from .arith import SquareClass, squarefree_part
from .common import HypothesisError, NoSquareRootDatum, VerificationError, log2_exact
from .forms import narrow_class_group, wide_class_group
from .genus import (
    genus_rank,
    klein_four_criterion,
    layer_bound,
    order_two_criterion,
)
from .quadfield import (
    FundUnit,
    Pattern,
    PrimeTriple,
    QuadField,
    fundamental_unit,
    make_field,
    norm_equation,
)

logger = logging.getLogger(__name__)

UNKNOWN = "unknown"


class Xinf(Enum):
    CYCLIC_TWO = "Z/2"
    CYCLIC_AT_LEAST_FOUR = "Z/2^m, m>=2"
    CYCLIC_AT_LEAST_EIGHT = "Z/2^m, m>=3"
    UNKNOWN = "unknown beyond layer 1"


class FundamentalSystem(Enum):
    PLAIN = "{e1, e2, e3}"
    SQRT_E1 = "{sqrt(e1), e2, e3}"
    SQRT_E2 = "{e1, sqrt(e2), e3}"
    SQRT_E1_E2 = "{sqrt(e1), sqrt(e2), e3}"
    SQRT_PRODUCT = "{sqrt(e1 e2), e2, e3}"


@dataclass(frozen=True)
class CInvariant:
    """Square class c with K(sqrt(eps)) = K(sqrt(c)), from
    (1 + eps)^2 = (tr(eps) + 2) * eps."""

    unit_id: str
    square_class: SquareClass


def c_invariant_of_unit(unit: FundUnit, unit_id: str = "e1") -> CInvariant:
    if unit.norm != 1:
        raise NoSquareRootDatum(f"unit {unit} has norm -1, no real square-root datum")
    c = squarefree_part(unit.t + 2)
    # (t + 2)(t - 2) = d u^2
    if c * squarefree_part(unit.t - 2) != squarefree_part(unit.d):
        raise VerificationError(f"trace square classes of {unit} do not multiply to {unit.d}")
    return CInvariant(unit_id, c)


def c_invariant(K: QuadField, unit_id: str = "e1") -> CInvariant:
    return c_invariant_of_unit(fundamental_unit(K), unit_id)


def sqrt_unit_in_k1(c: CInvariant | SquareClass | int, d: int) -> bool:
    """sqrt(c) lies in Q(sqrt(d), sqrt(2))."""
    match c:
        case CInvariant():
            c = c.square_class
        case int():
            c = squarefree_part(c)
    return c in {SquareClass(1), SquareClass(2), squarefree_part(d), squarefree_part(2 * d)}


@dataclass
class FieldSummary:
    """Everything the tower needs about one quadratic field. Plain data, so
    it can be cached on disk and sent back from worker processes."""

    d: int
    disc: int
    factors: list[int]
    narrow_factors: list[int]
    unit: tuple[int, int, int]
    genus_rank: int
    prime_class: dict[int, list[int]]
    principal: dict[int, bool]
    # keyed by +ell and -ell for each ramified ell
    norm_solvable: dict[int, bool]

    @property
    def order(self) -> int:
        n = 1
        for f in self.factors:
            n *= f
        return n

    @property
    def principal_by_norm(self) -> dict[int, bool]:
        return {ell: self.norm_solvable[ell] or self.norm_solvable[-ell] for ell in self.principal}

    @property
    def fund_unit(self) -> FundUnit:
        t, u, norm = self.unit
        return FundUnit(self.d, t, u, norm)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "disc": self.disc,
            "factors": self.factors,
            "narrow_factors": self.narrow_factors,
            "unit": list(self.unit),
            "genus_rank": self.genus_rank,
            "prime_class": {str(k): v for k, v in self.prime_class.items()},
            "principal": {str(k): v for k, v in self.principal.items()},
            "norm_solvable": {str(k): v for k, v in self.norm_solvable.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FieldSummary":
        return cls(
            d=data["d"],
            disc=data["disc"],
            factors=list(data["factors"]),
            narrow_factors=list(data["narrow_factors"]),
            unit=tuple(data["unit"]),
            genus_rank=data["genus_rank"],
            prime_class={int(k): v for k, v in data["prime_class"].items()},
            principal={int(k): v for k, v in data["principal"].items()},
            norm_solvable={int(k): v for k, v in data["norm_solvable"].items()},
        )


def compute_field_summary(d: int) -> FieldSummary:
    K = make_field(d)
    G = wide_class_group(K)
    unit = fundamental_unit(K)
    norm_solvable = {
        N: norm_equation(K, N) is not None for ell in K.ramified for N in (ell, -ell)
    }
    logger.debug("%s: 2-class group %s", K.name, G.describe())
    return FieldSummary(
        d=d,
        disc=K.disc,
        factors=G.invariant_factors,
        narrow_factors=narrow_class_group(K.disc).invariant_factors,
        unit=(unit.t, unit.u, unit.norm),
        genus_rank=genus_rank(K),
        prime_class={ell: G.prime_class[ell].to_list() for ell in K.ramified},
        principal={ell: G.is_identity(G.prime_class[ell]) for ell in K.ramified},
        norm_solvable=norm_solvable,
    )


@cache
def field_summary(d: int) -> FieldSummary:
    return compute_field_summary(d)


SummaryLookup = Callable[[int], FieldSummary]


@dataclass(frozen=True)
class UnitIndex:
    Q: int
    system: FundamentalSystem
    c1: CInvariant
    c2: CInvariant
    memberships: tuple[bool, bool, bool]


def hasse_unit_index(T: PrimeTriple, lookup: SummaryLookup = field_summary) -> UnitIndex:
    """Q(K_1) from the square roots of e1, e2 and e1*e2 lying in K_1.

    e3 = 1 + sqrt(2) has norm -1, so neither it nor a product with it can
    be a square in the real field K_1."""
    if T.pattern is None:
        raise HypothesisError(f"{T} matches neither congruence pattern")
    K, F = lookup(T.d), lookup(2 * T.d)
    for s in (K, F):
        if s.unit[2] != 1:
            raise VerificationError(f"fundamental unit of Q(sqrt({s.d})) has norm -1")
    c1 = c_invariant_of_unit(K.fund_unit, "e1")
    c2 = c_invariant_of_unit(F.fund_unit, "e2")
    m1 = sqrt_unit_in_k1(c1, T.d)
    m2 = sqrt_unit_in_k1(c2, T.d)
    m12 = sqrt_unit_in_k1(c1.square_class * c2.square_class, T.d)

    match (m1, m2, m12):
        case (False, False, False):
            system = FundamentalSystem.PLAIN
        case (True, False, False):
            system = FundamentalSystem.SQRT_E1
        case (False, True, False):
            system = FundamentalSystem.SQRT_E2
        case (False, False, True):
            system = FundamentalSystem.SQRT_PRODUCT
        case (True, True, True):
            system = FundamentalSystem.SQRT_E1_E2
        case _:
            raise VerificationError(f"{T}: square roots {m1, m2, m12} do not form a subgroup")
    Q = 1 + m1 + m2 + m12
    return UnitIndex(Q, system, c1, c2, (m1, m2, m12))


def kuroda_a1(T: PrimeTriple, lookup: SummaryLookup = field_summary) -> int:
    """#A(K_1) = Q(K_1) * #A(K) * #A(F) / 4."""
    Q = hasse_unit_index(T, lookup).Q
    n = Q * lookup(T.d).order * lookup(2 * T.d).order
    if n % 4:
        raise VerificationError(f"{T}: class number formula gives {n}/4")
    return n // 4


@dataclass(frozen=True)
class IwasawaInvariants:
    lam: int
    mu: int
    nu: int


def fukuda_stabilize(A0: int, A1: int) -> IwasawaInvariants | None:
    """Invariants when #A_1 = #A_0, None when layer 1 does not decide them.

    Every prime above 2 is totally ramified in K_inf / K for both patterns,
    so stability may start at layer 0."""
    if A1 == A0:
        return IwasawaInvariants(0, 0, log2_exact(A0))
    return None


@dataclass
class Verdict:
    name: str
    holds: bool
    applicable: bool = True
    xinf: Xinf = Xinf.UNKNOWN
    notes: list[str] = field(default_factory=list)


@dataclass
class _Layer:
    triple: PrimeTriple
    K: FieldSummary
    F: FieldSummary
    unit_index: UnitIndex
    A1: int

    @property
    def A0(self) -> int:
        return self.K.order

    @property
    def AF(self) -> int:
        return self.F.order

    def principal(self, ell: int) -> bool:
        return self.K.principal[ell]


def _layer(T: PrimeTriple, lookup: SummaryLookup) -> _Layer:
    unit_index = hasse_unit_index(T, lookup)
    K, F = lookup(T.d), lookup(2 * T.d)
    return _Layer(T, K, F, unit_index, unit_index.Q * K.order * F.order // 4)


def check_product_nonresidue(T: PrimeTriple, lookup: SummaryLookup = field_summary) -> Verdict:
    """cond1 with (q1 q2/p1) = -1: #A_0 = #A_1 = 2 and X_inf = Z/2."""
    if T.pattern is not Pattern.COND1 or T.symbols.q1q2_p1 != -1:
        raise HypothesisError(f"{T}: needs pattern cond1 and (q1 q2/p1) = -1")
    layer = _layer(T, lookup)
    v = Verdict("order-two-stable", layer.A0 == layer.A1 == 2, xinf=Xinf.CYCLIC_TWO)
    if not v.holds:
        v.notes.append(f"#A0 = {layer.A0}, #A1 = {layer.A1}, expected 2 and 2")
    return v


def check_p1_principality(T: PrimeTriple, lookup: SummaryLookup = field_summary) -> Verdict:
    """cond1 with (q1/p1) = (q2/p1) = 1: the prime above p1 is principal
    exactly when #A_1 != #A_0."""
    s = T.symbols
    if T.pattern is not Pattern.COND1 or s.q1_p1 != 1 or s.q2_p1 != 1:
        raise HypothesisError(f"{T}: needs pattern cond1 and (q1/p1) = (q2/p1) = 1")
    layer = _layer(T, lookup)
    v = Verdict("p1-principality", True)
    p1_principal = layer.principal(T.p1)

    if p1_principal != (layer.A1 != layer.A0):
        v.holds = False
        v.notes.append(f"p1 principal = {p1_principal} but #A0 = {layer.A0}, #A1 = {layer.A1}")
    if layer.principal(T.q1) and layer.principal(T.q2):
        v.holds = False
        v.notes.append("q1 and q2 are both principal")
    same_class = layer.K.prime_class[T.q1] == layer.K.prime_class[T.q2]
    if p1_principal != same_class:
        v.holds = False
        v.notes.append(f"p1 principal = {p1_principal} but [q1] == [q2] is {same_class}")
    if not p1_principal and any(layer.unit_index.memberships):
        v.holds = False
        v.notes.append(f"square roots {layer.unit_index.memberships} in K_1 with p1 non-principal")
    return v


def check_norm_obstruction(T: PrimeTriple, lookup: SummaryLookup = field_summary) -> Verdict:
    """No a, b with a^2 - d b^2 = 4 p1 forces #A_1 = #A_0 >= 4 and
    X_inf cyclic of order at least 4."""
    s = T.symbols
    if T.pattern is not Pattern.COND1 or s.q1_p1 != 1 or s.q2_p1 != 1:
        raise HypothesisError(f"{T}: needs pattern cond1 and (q1/p1) = (q2/p1) = 1")
    layer = _layer(T, lookup)
    v = Verdict("norm-obstruction", True)
    if layer.K.norm_solvable[-T.p1]:
        v.holds = False
        v.notes.append(f"a^2 - {T.d} b^2 = -4*{T.p1} is solvable")
    if layer.K.norm_solvable[T.p1]:
        v.applicable = False
        return v
    v.xinf = Xinf.CYCLIC_AT_LEAST_FOUR
    if not (layer.A1 == layer.A0 >= 4):
        v.holds = False
        v.notes.append(f"no solution for 4*{T.p1} but #A0 = {layer.A0}, #A1 = {layer.A1}")
    return v


def check_573_nonresidue(T: PrimeTriple, lookup: SummaryLookup = field_summary) -> Verdict:
    """cond2 with (q1/p1) = -1: #A_0 = #A_1 = 2, Q(K_1) = 1, #A(F) = 4."""
    if T.pattern is not Pattern.COND2 or T.symbols.q1_p1 != -1:
        raise HypothesisError(f"{T}: needs pattern cond2 and (q1/p1) = -1")
    layer = _layer(T, lookup)
    got = (layer.A0, layer.unit_index.Q, layer.AF, layer.A1)
    v = Verdict("573-order-two-stable", got == (2, 1, 4, 2), xinf=Xinf.CYCLIC_TWO)
    if not v.holds:
        v.notes.append(f"(#A0, Q, #A(F), #A1) = {got}, expected (2, 1, 4, 2)")
    return v


def check_573_residue(T: PrimeTriple, lookup: SummaryLookup = field_summary) -> Verdict:
    """cond2 with (q1/p1) = 1.

    (q2/p1) = -1: Q(K_1) = 2 and #A_1 = 2 #A_0.
    (q2/p1) = 1: #A_1 = #A_0 exactly when the prime above q1 is not
    principal, and #A_1 = 2 #A_0 >= 8 otherwise. The primes above p1 and
    q2 are never both principal, and q1 is principal exactly when they
    share a class, in which case only sqrt(e1 e2) lies in K_1."""
    if T.pattern is not Pattern.COND2 or T.symbols.q1_p1 != 1:
        raise HypothesisError(f"{T}: needs pattern cond2 and (q1/p1) = 1")
    layer = _layer(T, lookup)
    if T.symbols.q2_p1 == -1:
        v = Verdict("573-q2-nonresidue", True, xinf=Xinf.CYCLIC_AT_LEAST_FOUR)
        if layer.unit_index.Q != 2 or layer.A1 != 2 * layer.A0:
            v.holds = False
            v.notes.append(f"Q = {layer.unit_index.Q}, #A0 = {layer.A0}, #A1 = {layer.A1}")
        return v

    v = Verdict("573-q1-principality", True)
    q1_principal = layer.principal(T.q1)
    if layer.principal(T.p1) and layer.principal(T.q2):
        v.holds = False
        v.notes.append("p1 and q2 are both principal")
    same_class = layer.K.prime_class[T.p1] == layer.K.prime_class[T.q2]
    if q1_principal != same_class:
        v.holds = False
        v.notes.append(f"q1 principal = {q1_principal} but [p1] == [q2] is {same_class}")
    if q1_principal:
        v.xinf = Xinf.CYCLIC_AT_LEAST_EIGHT
        if not (layer.A1 == 2 * layer.A0 >= 8):
            v.holds = False
            v.notes.append(f"q1 principal but #A0 = {layer.A0}, #A1 = {layer.A1}")
        if layer.unit_index.system is not FundamentalSystem.SQRT_PRODUCT:
            v.holds = False
            v.notes.append(f"q1 principal but fundamental system {layer.unit_index.system.value}")
    elif layer.A1 != layer.A0:
        v.holds = False
        v.notes.append(f"q1 not principal but #A0 = {layer.A0}, #A1 = {layer.A1}")
    return v


def applicable_check(T: PrimeTriple) -> Callable[[PrimeTriple, SummaryLookup], Verdict] | None:
    s = T.symbols
    match T.pattern:
        case Pattern.COND1 if s.q1q2_p1 == -1:
            return check_product_nonresidue
        case Pattern.COND1 if s.q1_p1 == 1 and s.q2_p1 == 1:
            return check_p1_principality
        case Pattern.COND2 if s.q1_p1 == -1:
            return check_573_nonresidue
        case Pattern.COND2:
            return check_573_residue
    return None


@dataclass
class TowerReport:
    triple: PrimeTriple
    A0_order: int
    A0_factors: list[int]
    AF_order: int
    AF_factors: list[int]
    Q_K1: int
    A1_order: int
    fundamental_system: FundamentalSystem
    principal_primes: list[int]
    stable: bool
    lam: int | None
    mu: int | None
    nu: int | None
    xinf: Xinf
    theorem_tag: str
    violations: list[str] = field(default_factory=list)

    @property
    def A0_cyclic(self) -> bool:
        return len(self.A0_factors) <= 1

    def to_dict(self) -> dict:
        T = self.triple

        def known(x):
            return UNKNOWN if x is None else x

        return {
            "p1": T.p1,
            "q1": T.q1,
            "q2": T.q2,
            "pattern": T.pattern.value,
            "symbols": T.symbols.to_dict(),
            "A0": self.A0_order,
            "A0_factors": self.A0_factors,
            "AF": self.AF_order,
            "AF_factors": self.AF_factors,
            "Q": self.Q_K1,
            "A1": self.A1_order,
            "principal": self.principal_primes,
            "stable": self.stable,
            "lambda": known(self.lam),
            "mu": known(self.mu),
            "nu": known(self.nu),
            "Xinf": self.xinf.value,
            "theorem": self.theorem_tag,
            "violations": self.violations,
        }


def _cross_checks(T: PrimeTriple, layer: _Layer) -> list[str]:
    violations = []
    if 4 * layer.A1 != layer.unit_index.Q * layer.A0 * layer.AF:
        violations.append("class number formula is not integral")
    bound = layer_bound(T.pattern, layer.A0, layer.AF)
    if layer.A1 > bound:
        violations.append(f"#A1 = {layer.A1} exceeds the bound {bound}")
    if order_two_criterion(T) != (layer.A0 == 2):
        violations.append(f"Legendre criterion disagrees with #A0 = {layer.A0}")
    if T.pattern is Pattern.COND1:
        expected = klein_four_criterion(T)
    else:
        expected = True
    if expected != (layer.F.factors == [2, 2]):
        violations.append(f"A(F) = {layer.F.factors}, Klein four criterion says {expected}")
    for s in (layer.K, layer.F):
        if s.genus_rank != len(s.factors):
            violations.append(f"Q(sqrt({s.d})): genus rank {s.genus_rank}, class group {s.factors}")
        for ell, by_forms in s.principal.items():
            if by_forms != s.principal_by_norm[ell]:
                violations.append(f"Q(sqrt({s.d})): principality of {ell} disagrees between forms and norms")
    if T.symbols.q1_p1 == 1 or T.symbols.q2_p1 == 1:
        if layer.K.norm_solvable[-T.p1]:
            violations.append(f"norm -{T.p1} represented despite the local obstruction")
    return violations


def _xinf_when_stable(factors: list[int]) -> Xinf:
    # the norm maps A_n -> A_0 are isomorphisms once orders stabilize
    if factors == [2]:
        return Xinf.CYCLIC_TWO
    if len(factors) == 1:
        return Xinf.CYCLIC_AT_LEAST_FOUR
    return Xinf.UNKNOWN


def build_tower_report(T: PrimeTriple, lookup: SummaryLookup = field_summary) -> TowerReport:
    if T.pattern is None:
        raise HypothesisError(f"{T} matches neither congruence pattern")
    layer = _layer(T, lookup)
    violations = _cross_checks(T, layer)

    check = applicable_check(T)
    tag = "unclassified"
    xinf = Xinf.UNKNOWN
    if check is not None:
        verdict = check(T, lookup)
        tag = verdict.name
        xinf = verdict.xinf
        if not verdict.holds:
            violations += [f"{verdict.name}: {note}" for note in verdict.notes]
        if check is check_p1_principality:
            obstruction = check_norm_obstruction(T, lookup)
            if obstruction.applicable:
                tag = f"{tag}+{obstruction.name}"
                xinf = obstruction.xinf
            if not obstruction.holds:
                violations += [f"{obstruction.name}: {note}" for note in obstruction.notes]

    invariants = fukuda_stabilize(layer.A0, layer.A1)
    stable = invariants is not None
    if stable:
        lam, mu, nu = invariants.lam, invariants.mu, invariants.nu
        if xinf is Xinf.UNKNOWN:
            xinf = _xinf_when_stable(layer.K.factors)
    elif T.pattern is Pattern.COND2:
        lam, mu, nu = 0, 0, None
    else:
        lam, mu, nu = None, None, None

    if violations:
        logger.warning("%s: %d violations", T, len(violations))
    return TowerReport(
        triple=T,
        A0_order=layer.A0,
        A0_factors=layer.K.factors,
        AF_order=layer.AF,
        AF_factors=layer.F.factors,
        Q_K1=layer.unit_index.Q,
        A1_order=layer.A1,
        fundamental_system=layer.unit_index.system,
        principal_primes=[ell for ell in (T.p1, T.q1, T.q2) if layer.principal(ell)],
        stable=stable,
        lam=lam,
        mu=mu,
        nu=nu,
        xinf=xinf,
        theorem_tag=tag,
        violations=violations,
    )
