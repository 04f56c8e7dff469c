"""Real quadratic fields Q(sqrt(d)): discriminants, fundamental units, norm
equations and the prime triples the tower checks run on."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cache
from math import isqrt

from .arith import is_prime, is_squarefree, legendre, prime_divisors
from .common import VerificationError
from .forms import (
    IndefiniteForm,
    Matrix,
    cycle_with_matrices,
    mat_inverse,
    mat_mul,
    reduce_with_matrix,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadField:
    d: int
    disc: int
    ramified: tuple[int, ...]

    @property
    def name(self) -> str:
        return f"Q(sqrt({self.d}))"


def make_field(d: int) -> QuadField:
    if d <= 1:
        raise ValueError(f"radicand must be > 1, got {d}")
    if not is_squarefree(d):
        raise ValueError(f"radicand {d} is not squarefree")
    disc = d if d % 4 == 1 else 4 * d
    return QuadField(d=d, disc=disc, ramified=tuple(prime_divisors(disc)))


# elements (x + y*sqrt(d)) / 2, stored as the pair (x, y)
HalfPair = tuple[int, int]


def half_mul(d: int, p: HalfPair, q: HalfPair) -> HalfPair:
    x = p[0] * q[0] + d * p[1] * q[1]
    y = p[0] * q[1] + p[1] * q[0]
    if x % 2 or y % 2:
        raise ValueError(f"product of {p} and {q} is not integral in Q(sqrt({d}))")
    return x // 2, y // 2


def half_conj(p: HalfPair) -> HalfPair:
    return p[0], -p[1]


def half_pow(d: int, p: HalfPair, n: int) -> HalfPair:
    """p**n; a negative n powers the conjugate, the inverse of a norm one unit."""
    if n < 0:
        return half_pow(d, half_conj(p), -n)
    result = (2, 0)
    for _ in range(n):
        result = half_mul(d, result, p)
    return result


@dataclass(frozen=True)
class FundUnit:
    """eps = (t + u*sqrt(d)) / 2, the least unit > 1 of the maximal order."""

    d: int
    t: int
    u: int
    norm: int

    def __post_init__(self):
        if self.t * self.t - self.d * self.u * self.u != 4 * self.norm:
            raise VerificationError(f"{self} does not have norm {self.norm}")

    @property
    def pair(self) -> HalfPair:
        return self.t, self.u

    def totally_positive(self) -> "FundUnit":
        """eps if its norm is 1, otherwise eps^2."""
        if self.norm == 1:
            return self
        t, u = half_mul(self.d, self.pair, self.pair)
        return FundUnit(self.d, t, u, 1)

    def __str__(self) -> str:
        return f"({self.t} + {self.u}*sqrt({self.d}))/2"


@cache
def _continued_fraction_unit(D: int) -> tuple[int, int, int]:
    """(T, U, period) with (T + U*sqrt(D))/2 the fundamental unit of
    discriminant D, from the expansion of (r + sqrt(D))/2."""
    s = isqrt(D)
    P, Q = D % 2, 2
    a = (P + s) // Q
    h_prev, h = 1, a
    k_prev, k = 0, 1
    P = a * Q - P
    Q = (D - P * P) // Q
    start = (P, Q)
    period = 0
    while True:
        period += 1
        a = (P + s) // Q
        P = a * Q - P
        Q = (D - P * P) // Q
        if (P, Q) == start:
            break
        h_prev, h = h, a * h + h_prev
        k_prev, k = k, a * k + k_prev
    # eps = h - k * conj(omega), omega = (r + sqrt(D)) / 2
    return 2 * h - k * (D % 2), k, period


def fundamental_unit(K: QuadField) -> FundUnit:
    T, U, period = _continued_fraction_unit(K.disc)
    if K.disc == K.d:
        t, u = T, U
    else:
        t, u = T, 2 * U
    logger.debug("%s: period %d, unit %d, %d", K.name, period, t, u)
    return FundUnit(K.d, t, u, -1 if period % 2 else 1)


def unit_norm_is_minus_one(K: QuadField) -> bool:
    return fundamental_unit(K).norm == -1


def brute_force_unit(d: int, limit: int = 10**6) -> FundUnit | None:
    """Least solution of t^2 - d*u^2 = +-4 with u >= 1, by search over u."""
    for u in range(1, limit + 1):
        for norm in (-1, 1):
            t2 = d * u * u + 4 * norm
            if t2 > 0:
                t = isqrt(t2)
                if t * t == t2:
                    return FundUnit(d, t, u, norm)
    return None


@cache
def _principal_cycle(D: int) -> tuple[Matrix, dict[IndefiniteForm, Matrix]]:
    base, m = reduce_with_matrix(IndefiniteForm.principal(D))
    return m, {g: c for g, c in cycle_with_matrices(base)}


def _primitive_representations(D: int, m: int) -> list[tuple[int, int]]:
    """One coprime (x, y) with principal(x, y) == m for each B mod 2|m|
    whose form (m, B, C) is principal."""
    to_base, members = _principal_cycle(D)
    reps = []
    for B in range(2 * abs(m)):
        if (B * B - D) % (4 * abs(m)):
            continue
        h = IndefiniteForm(m, B, (B * B - D) // (4 * m))
        if not h.is_primitive():
            continue
        red, A = reduce_with_matrix(h)
        if red not in members:
            continue
        M = mat_mul(mat_mul(to_base, members[red]), mat_inverse(A))
        reps.append((M[0], M[2]))
    return reps


def _shorten(d: int, sol: HalfPair, eta: HalfPair) -> HalfPair:
    """Move sol along its orbit under eta to the least |b|."""
    for step in (eta, half_conj(eta)):
        while True:
            nxt = half_mul(d, sol, step)
            if abs(nxt[1]) >= abs(sol[1]):
                break
            sol = nxt
    return abs(sol[0]), abs(sol[1])


def norm_equation(K: QuadField, N: int) -> tuple[int, int] | None:
    """(a, b) with a^2 - d*b^2 == 4*N, or None when no integer of norm N exists.

    Decided exactly by testing which forms (m, B, C) representing N / k^2
    are equivalent to the principal form; among all solutions the one with
    the least |b| is returned."""
    if N == 0:
        raise ValueError("norm_equation needs N != 0")
    D, d = K.disc, K.d
    r = D % 2
    g = 1 if D == d else 2
    eta = fundamental_unit(K).totally_positive().pair
    best = None
    for k in range(1, isqrt(abs(N)) + 1):
        if N % (k * k):
            continue
        for rep in _primitive_representations(D, N // (k * k)):
            x, y = k * rep[0], k * rep[1]
            a, b = 2 * x + r * y, g * y
            if a * a - d * b * b != 4 * N:
                raise VerificationError(f"{K.name}: ({a}, {b}) does not have norm {N}")
            sol = _shorten(d, (a, b), eta)
            if best is None or sol[1] < best[1]:
                best = sol
    return best


def brute_force_norm_equation(d: int, N: int, limit: int = 10**6) -> tuple[int, int] | None:
    """Least b >= 0 with d*b^2 + 4N a square, searched up to limit."""
    for b in range(limit + 1):
        a2 = d * b * b + 4 * N
        if a2 >= 0:
            a = isqrt(a2)
            if a * a == a2 and (a - b * d) % 2 == 0:
                return a, b
    return None


class Pattern(Enum):
    # p1 = 5, q1 = 3, q2 = 3 mod 8
    COND1 = "cond1"
    # p1 = 5, q1 = 7, q2 = 3 mod 8
    COND2 = "cond2"


@dataclass(frozen=True)
class LegendreSymbols:
    q1_p1: int
    q2_p1: int
    q1q2_p1: int
    p1_q2: int

    def to_dict(self) -> dict[str, int]:
        return {
            "q1/p1": self.q1_p1,
            "q2/p1": self.q2_p1,
            "q1q2/p1": self.q1q2_p1,
            "p1/q2": self.p1_q2,
        }


@dataclass(frozen=True, order=True)
class PrimeTriple:
    p1: int
    q1: int
    q2: int
    pattern: Pattern | None = field(compare=False)
    symbols: LegendreSymbols = field(compare=False)

    @property
    def d(self) -> int:
        return self.p1 * self.q1 * self.q2

    @property
    def field_K(self) -> QuadField:
        return make_field(self.d)

    @property
    def field_F(self) -> QuadField:
        return make_field(2 * self.d)

    def __str__(self) -> str:
        return f"({self.p1}, {self.q1}, {self.q2})"


def make_triple(p1: int, q1: int, q2: int) -> PrimeTriple:
    """Triple with its Legendre symbols, pattern None when neither
    congruence pattern holds."""
    for p in (p1, q1, q2):
        if p < 3 or not is_prime(p):
            raise ValueError(f"{p} is not an odd prime")
    if len({p1, q1, q2}) != 3:
        raise ValueError(f"primes ({p1}, {q1}, {q2}) are not distinct")

    match (p1 % 8, q1 % 8, q2 % 8):
        case (5, 3, 3):
            pattern = Pattern.COND1
        case (5, 7, 3):
            pattern = Pattern.COND2
        case _:
            pattern = None
    symbols = LegendreSymbols(
        q1_p1=legendre(q1, p1),
        q2_p1=legendre(q2, p1),
        q1q2_p1=legendre(q1 * q2, p1),
        p1_q2=legendre(p1, q2),
    )
    return PrimeTriple(p1, q1, q2, pattern, symbols)


def classify_triple(p1: int, q1: int, q2: int) -> PrimeTriple | None:
    triple = make_triple(p1, q1, q2)
    return triple if triple.pattern is not None else None


def layer_description(d: int, n: int) -> str:
    """Symbolic generator list of the n-th layer of the cyclotomic Z2-extension
    of Q(sqrt(d)): a_1 = sqrt(2), a_n = sqrt(2 + a_(n-1))."""
    if n < 0:
        raise ValueError("layer index must be >= 0")
    if n == 0:
        return f"Q(sqrt({d}))"
    a = "sqrt(2)"
    for _ in range(n - 1):
        a = f"sqrt(2 + {a})"
    return f"Q(sqrt({d}), {a})"
