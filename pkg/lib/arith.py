"""Integer kernel: primality, factorization, quadratic symbols, square classes
and rank over the two-element field."""

from dataclasses import dataclass
from math import isqrt

from sympy import factorint, isprime, jacobi_symbol


def is_prime(n: int) -> bool:
    if n < 1:
        raise ValueError(f"is_prime expects a positive integer, got {n}")
    # sympy's isprime is deterministic below 2**64 and BPSW above
    return bool(isprime(n))


def factorize(n: int) -> tuple[int, list[tuple[int, int]]]:
    """Return (sign, [(prime, exponent), ...]) sorted by prime."""
    if n == 0:
        raise ValueError("cannot factorize 0")
    sign = -1 if n < 0 else 1
    factors = sorted(factorint(abs(n)).items())
    return sign, [(int(p), int(e)) for p, e in factors]


def prime_divisors(n: int) -> list[int]:
    return [p for p, _ in factorize(n)[1]]


def valuation(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def is_squarefree(n: int) -> bool:
    if n == 0:
        return False
    return all(e == 1 for _, e in factorize(n)[1])


def is_square(n: int) -> bool:
    return n >= 0 and isqrt(n) ** 2 == n


def _kronecker_two(a: int) -> int:
    # (a/2) for odd a
    return 1 if a % 8 in (1, 7) else -1


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a/n) for arbitrary integers a, n."""
    if n == 0:
        return 1 if a in (1, -1) else 0
    result = 1
    if n < 0:
        n = -n
        if a < 0:
            result = -result
    v = valuation(n, 2)
    n >>= v
    if v:
        if a % 2 == 0:
            return 0
        if v % 2 == 1:
            result *= _kronecker_two(a)
    if n == 1:
        return result
    return result * int(jacobi_symbol(a % n, n))


def legendre(a: int, p: int) -> int:
    if p == 2 or not is_prime(p):
        raise ValueError(f"legendre needs an odd prime modulus, got {p}")
    return kronecker(a, p)


@dataclass(frozen=True, order=True)
class SquareClass:
    """A class of Q*/Q*^2, held by its squarefree representative.

    The sign is part of the class: -11 and 11 are different."""

    repr: int

    def __post_init__(self):
        if self.repr == 0 or not is_squarefree(self.repr):
            raise ValueError(f"{self.repr} is not a squarefree nonzero integer")

    def __mul__(self, other: "SquareClass") -> "SquareClass":
        return squarefree_part(self.repr * other.repr)

    def __str__(self) -> str:
        return str(self.repr)


def squarefree_part(n: int) -> SquareClass:
    if n == 0:
        raise ValueError("0 has no square class")
    sign, factors = factorize(n)
    m = sign
    for p, e in factors:
        if e % 2:
            m *= p
    return SquareClass(m)


def gf2_rank(matrix: list[list[int]]) -> int:
    """Rank of a bit matrix over GF(2), rows packed as integers."""
    rows = []
    for row in matrix:
        packed = 0
        for bit in row:
            packed = (packed << 1) | (bit & 1)
        rows.append(packed)

    rank = 0
    while rows:
        pivot = rows.pop()
        if pivot == 0:
            continue
        rank += 1
        top = pivot.bit_length() - 1
        rows = [r ^ pivot if (r >> top) & 1 else r for r in rows]
    return rank


def square_class_span(classes: list[SquareClass]) -> set[SquareClass]:
    """The subgroup of Q*/Q*^2 generated by the given classes."""
    span = {SquareClass(1)}
    for c in classes:
        span |= {s * c for s in span}
    return span


def is_fundamental_discriminant(D: int) -> bool:
    if D in (0, 1):
        return False
    if D % 4 == 1:
        return is_squarefree(D)
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (2, 3) and is_squarefree(m)
    return False
