"""Class groups of real quadratic fields through indefinite binary quadratic
forms: reduction, rho cycles, composition and 2-Sylow structure."""

import logging
from dataclasses import dataclass, field
from functools import cache, cached_property
from math import gcd, isqrt
from typing import TYPE_CHECKING, Callable

from sympy import divisors
from sympy.core.intfunc import igcdex

from .arith import is_fundamental_discriminant, is_square, prime_divisors
from .common import VerificationError
from .rho_graph import SuccessorGraph

if TYPE_CHECKING:
    from .quadfield import QuadField

logger = logging.getLogger(__name__)

# 2x2 integer matrix (m11, m12, m21, m22)
Matrix = tuple[int, int, int, int]
IDENTITY: Matrix = (1, 0, 0, 1)


def mat_mul(m: Matrix, n: Matrix) -> Matrix:
    return (
        m[0] * n[0] + m[1] * n[2],
        m[0] * n[1] + m[1] * n[3],
        m[2] * n[0] + m[3] * n[2],
        m[2] * n[1] + m[3] * n[3],
    )


def mat_inverse(m: Matrix) -> Matrix:
    """Inverse of a determinant one matrix."""
    if m[0] * m[3] - m[1] * m[2] != 1:
        raise ValueError(f"{m} is not in SL2(Z)")
    return (m[3], -m[1], -m[2], m[0])


@dataclass(frozen=True, order=True)
class IndefiniteForm:
    """The form a*x^2 + b*x*y + c*y^2 with positive non-square discriminant."""

    a: int
    b: int
    c: int

    def __post_init__(self):
        D = self.discriminant
        if D <= 0:
            raise ValueError(f"{self} has non-positive discriminant {D}")
        if is_square(D):
            raise ValueError(f"{self} has square discriminant {D}")

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    @classmethod
    def principal(cls, D: int) -> "IndefiniteForm":
        r = D % 2
        return cls(1, r, (r * r - D) // 4)

    @classmethod
    def minus_one(cls, D: int) -> "IndefiniteForm":
        """A form of discriminant D representing -1."""
        r = D % 2
        return cls(-1, r, (D - r * r) // 4)

    def is_primitive(self) -> bool:
        return gcd(self.a, self.b, self.c) == 1

    def is_reduced(self) -> bool:
        s = isqrt(self.discriminant)
        two_a = 2 * abs(self.a)
        return 0 < self.b <= s and two_a - self.b <= s < two_a + self.b

    def evaluate(self, x: int, y: int) -> int:
        return self.a * x * x + self.b * x * y + self.c * y * y

    def transform(self, m: Matrix) -> "IndefiniteForm":
        """The form (x, y) -> self(m11*x + m12*y, m21*x + m22*y)."""
        m11, m12, m21, m22 = m
        b = (
            2 * self.a * m11 * m12
            + self.b * (m11 * m22 + m12 * m21)
            + 2 * self.c * m21 * m22
        )
        return IndefiniteForm(self.evaluate(m11, m21), b, self.evaluate(m12, m22))

    def inverse(self) -> "IndefiniteForm":
        return IndefiniteForm(self.a, -self.b, self.c)

    def rho(self) -> tuple["IndefiniteForm", Matrix]:
        """One reduction step (a, b, c) -> (c, r, (r^2 - D) / 4c), with the
        proper equivalence realizing it."""
        D = self.discriminant
        s = isqrt(D)
        c = self.c
        if c == 0:
            raise ValueError(f"{self} represents 0, discriminant is a square")
        two_c = 2 * abs(c)
        if abs(c) <= s:
            r = s - (s + self.b) % two_c
        else:
            r = (-self.b) % two_c
            if r > abs(c):
                r -= two_c
        t = (r + self.b) // (2 * c)
        return IndefiniteForm(c, r, (r * r - D) // (4 * c)), (0, -1, 1, t)

    def __str__(self) -> str:
        return f"({self.a}, {self.b}, {self.c})"

    def to_list(self) -> list[int]:
        return [self.a, self.b, self.c]


def reduce_with_matrix(f: IndefiniteForm) -> tuple[IndefiniteForm, Matrix]:
    """Reduced g and M in SL2(Z) with f.transform(M) == g."""
    m = IDENTITY
    steps = 0
    while not f.is_reduced():
        f, step = f.rho()
        m = mat_mul(m, step)
        steps += 1
    if steps > 64:
        logger.debug("reduction of discriminant %d took %d steps", f.discriminant, steps)
    return f, m


def reduce(f: IndefiniteForm) -> IndefiniteForm:
    return reduce_with_matrix(f)[0]


def cycle_with_matrices(f: IndefiniteForm) -> list[tuple[IndefiniteForm, Matrix]]:
    """The rho period through the reduced form f, each member g paired with
    M such that f.transform(M) == g."""
    if not f.is_reduced():
        raise ValueError(f"{f} is not reduced")
    members = [(f, IDENTITY)]
    g, m = f.rho()
    while g != f:
        members.append((g, m))
        g, step = g.rho()
        m = mat_mul(m, step)
    return members


def cycle(f: IndefiniteForm) -> list[IndefiniteForm]:
    return [g for g, _ in cycle_with_matrices(f)]


def compose(f: IndefiniteForm, g: IndefiniteForm) -> IndefiniteForm:
    """Gauss composition of two primitive forms, returned reduced."""
    D = f.discriminant
    if g.discriminant != D:
        raise ValueError(f"cannot compose {f} and {g}: discriminants {D} and {g.discriminant}")
    if not (f.is_primitive() and g.is_primitive()):
        raise ValueError(f"cannot compose non-primitive forms {f}, {g}")

    s = (f.b + g.b) // 2
    x1, y1, g1 = igcdex(f.a, g.a)
    x2, z, e = igcdex(g1, s)
    y = int(y1 * x2)
    z = int(z)
    e = int(e)

    a3 = f.a * g.a // (e * e)
    b3 = g.b + 2 * (g.a // e) * (y * ((f.b - g.b) // 2) - z * g.c)
    b3 %= 2 * abs(a3)
    c3 = (b3 * b3 - D) // (4 * a3)
    return reduce(IndefiniteForm(a3, b3, c3))


def reduced_forms(D: int) -> list[IndefiniteForm]:
    """All primitive reduced forms of discriminant D, sorted."""
    s = isqrt(D)
    found = []
    for b in range(D % 2 or 2, s + 1, 2):
        n = (D - b * b) // 4
        for a in divisors(n):
            if s - b < 2 * a <= s + b:
                for sign in (1, -1):
                    f = IndefiniteForm(sign * a, b, -sign * (n // a))
                    if f.is_primitive():
                        found.append(f)
    return sorted(found)


def invariant_factors(
    elements: list[IndefiniteForm],
    multiply: Callable[[IndefiniteForm, IndefiniteForm], IndefiniteForm],
    identity: IndefiniteForm,
) -> list[int]:
    """Cyclic factor orders of a finite abelian 2-group, ascending.

    Read off from the sizes of the kernels of x -> x^(2^j)."""
    order = len(elements)
    if order & (order - 1):
        raise VerificationError(f"2-group of order {order}")
    kernel_ranks = [0]
    powers = {x: x for x in elements}
    while kernel_ranks[-1] < order.bit_length() - 1:
        powers = {x: multiply(p, p) for x, p in powers.items()}
        count = sum(1 for p in powers.values() if p == identity)
        kernel_ranks.append(count.bit_length() - 1)
    # number of cyclic factors of order at least 2^j
    at_least = [kernel_ranks[j] - kernel_ranks[j - 1] for j in range(1, len(kernel_ranks))]
    at_least.append(0)
    factors = []
    for j in range(1, len(at_least)):
        factors += [2**j] * (at_least[j - 1] - at_least[j])
    return sorted(factors)


@dataclass
class FormClassGroup:
    """The full narrow class group of a fundamental discriminant."""

    disc: int
    forms: list[IndefiniteForm]
    class_of: dict[IndefiniteForm, IndefiniteForm]
    classes: list[IndefiniteForm]

    @property
    def order(self) -> int:
        return len(self.classes)

    @cached_property
    def identity(self) -> IndefiniteForm:
        return self.class_of[reduce(IndefiniteForm.principal(self.disc))]

    def key(self, f: IndefiniteForm) -> IndefiniteForm:
        """Canonical class representative of any primitive form of this
        discriminant."""
        if f.discriminant != self.disc:
            raise ValueError(f"{f} is not of discriminant {self.disc}")
        return self.class_of[reduce(f)]

    def multiply(self, x: IndefiniteForm, y: IndefiniteForm) -> IndefiniteForm:
        return self.class_of[compose(x, y)]

    def inverse(self, x: IndefiniteForm) -> IndefiniteForm:
        return self.key(x.inverse())

    def power(self, x: IndefiniteForm, n: int) -> IndefiniteForm:
        result = self.identity
        while n:
            if n & 1:
                result = self.multiply(result, x)
            x = self.multiply(x, x)
            n >>= 1
        return result

    def sylow2(self) -> list[IndefiniteForm]:
        """The 2-Sylow subgroup as the image of x -> x^m, m the odd part of
        the class number."""
        m = self.order
        while m % 2 == 0:
            m //= 2
        return sorted({self.power(x, m) for x in self.classes})

    @classmethod
    def from_discriminant(cls, D: int) -> "FormClassGroup":
        forms = reduced_forms(D)
        graph = SuccessorGraph.from_successor(forms, lambda f: f.rho()[0])
        class_of = {}
        classes = []
        for orbit in graph.cycles():
            classes.append(orbit[0])
            for f in orbit:
                class_of[f] = orbit[0]
        logger.debug(
            "discriminant %d: %d reduced forms in %d cycles", D, len(forms), len(classes)
        )
        return cls(disc=D, forms=forms, class_of=class_of, classes=classes)


@cache
def form_class_group(D: int) -> FormClassGroup:
    if D <= 0 or not is_fundamental_discriminant(D):
        raise ValueError(f"{D} is not a positive fundamental discriminant")
    return FormClassGroup.from_discriminant(D)


def ramified_prime_form(D: int, ell: int) -> IndefiniteForm:
    """The ambiguous form (ell, b, c) attached to the prime above ell."""
    if D % ell:
        raise ValueError(f"{ell} does not divide the discriminant {D}")
    for b in range(D % 2, 2 * ell, 2):
        if (b * b - D) % (4 * ell) == 0:
            return IndefiniteForm(ell, b, (b * b - D) // (4 * ell))
    raise ValueError(f"{ell} is not ramified in discriminant {D}")


@dataclass
class ClassGroup2:
    """2-Sylow subgroup of the narrow or wide class group.

    Wide classes are cosets of the narrow ones modulo the class of the
    (-1)-form, each held by its least narrow representative."""

    disc: int
    narrow: bool
    invariant_factors: list[int]
    elements: list[IndefiniteForm]
    prime_class: dict[int, IndefiniteForm]
    group: FormClassGroup = field(repr=False, compare=False)
    minus_one_class: IndefiniteForm = field(repr=False, compare=False)

    @property
    def order(self) -> int:
        n = 1
        for f in self.invariant_factors:
            n *= f
        return n

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)

    def is_cyclic(self) -> bool:
        return self.rank <= 1

    def is_elementary(self) -> bool:
        return all(f == 2 for f in self.invariant_factors)

    @cached_property
    def identity(self) -> IndefiniteForm:
        return self.canonical(self.group.identity)

    def canonical(self, x: IndefiniteForm) -> IndefiniteForm:
        x = self.group.key(x)
        if self.narrow:
            return x
        return min(x, self.group.multiply(x, self.minus_one_class))

    def multiply(self, x: IndefiniteForm, y: IndefiniteForm) -> IndefiniteForm:
        return self.canonical(self.group.multiply(x, y))

    def is_identity(self, x: IndefiniteForm) -> bool:
        return self.canonical(x) == self.identity

    def element_order(self, x: IndefiniteForm) -> int:
        n, y = 1, self.canonical(x)
        while not self.is_identity(y):
            y = self.multiply(y, x)
            n += 1
        return n

    def describe(self) -> str:
        if self.order == 1:
            return "trivial"
        return " x ".join(f"Z/{f}" for f in self.invariant_factors)


def _class_group2(D: int, narrow: bool) -> ClassGroup2:
    group = form_class_group(D)
    k = group.key(IndefiniteForm.minus_one(D))
    sylow = group.sylow2()
    if narrow:
        elements = sylow
        multiply = group.multiply
    else:
        elements = sorted({min(x, group.multiply(x, k)) for x in sylow})

        def multiply(x, y):
            z = group.multiply(x, y)
            return min(z, group.multiply(z, k))

    identity = group.identity if narrow else min(group.identity, k)
    factors = invariant_factors(elements, multiply, identity)

    result = ClassGroup2(
        disc=D,
        narrow=narrow,
        invariant_factors=factors,
        elements=elements,
        prime_class={},
        group=group,
        minus_one_class=k,
    )
    for ell in prime_divisors(D):
        result.prime_class[ell] = result.canonical(ramified_prime_form(D, ell))
    return result


@cache
def narrow_class_group(disc: int) -> ClassGroup2:
    return _class_group2(disc, narrow=True)


def wide_class_group(K: "QuadField") -> ClassGroup2:
    return _wide_class_group(K.disc)


@cache
def _wide_class_group(disc: int) -> ClassGroup2:
    return _class_group2(disc, narrow=False)


def ramified_prime_class(K: "QuadField", ell: int) -> IndefiniteForm:
    if ell not in K.ramified:
        raise ValueError(f"{ell} is not ramified in Q(sqrt({K.d}))")
    return wide_class_group(K).prime_class[ell]


def is_principal(K: "QuadField", ell: int) -> bool:
    G = wide_class_group(K)
    return G.is_identity(ramified_prime_class(K, ell))
