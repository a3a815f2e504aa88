"""Exact arithmetic in Z/p^N with valuation and precision tracking.

Every value is immutable.  The prime p is always odd and the precision
exponent N is a hard cap fixed per computation context: operations reduce
into [0, p^N) and never silently extend precision.  Integers are Python
ints throughout, so nothing here assumes p^N fits a machine word.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class NotPIntegral(ValueError):
    """Raised when a rational with negative p-valuation is forced into Z/p^N.

    Carries the offending (negative) valuation in ``valuation``.
    """

    def __init__(self, x, p, valuation):
        self.x = x
        self.p = p
        self.valuation = valuation
        super().__init__(f"{x} has p-valuation {valuation} < 0 at p={p}")


def is_odd_prime(p: int) -> bool:
    if p < 3 or p % 2 == 0:
        return False
    d = 3
    while d * d <= p:
        if p % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True)
class AtLeast:
    """Tagged valuation lower bound "at least ``bound``".

    Returned for residues that are exactly zero mod p^N, where the true
    valuation is unknowable.  Deliberately never equal to an int, so a
    valuation assertion cannot silently pass on an exhausted residue.
    """

    bound: int

    def __repr__(self):
        return f">= {self.bound}"


def val_at_least(v, k: int) -> bool:
    """True if a valuation (int or AtLeast) is certainly >= k."""
    if isinstance(v, AtLeast):
        return v.bound >= k
    return v >= k


def val_min(v, w):
    """Minimum of two valuations, propagating AtLeast soundly."""
    a = v.bound if isinstance(v, AtLeast) else v
    b = w.bound if isinstance(w, AtLeast) else w
    m = min(a, b)
    if isinstance(v, AtLeast) and isinstance(w, AtLeast):
        return AtLeast(m)
    if isinstance(v, AtLeast):
        return w if w <= v.bound else AtLeast(m)
    if isinstance(w, AtLeast):
        return v if v <= w.bound else AtLeast(m)
    return m


def int_valuation(n: int, p: int) -> int:
    """v_p of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of 0 is undefined; use AtLeast at a precision cap")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class PadicScalar:
    """Element of Z/p^N: residue in [0, p^N) with tracked valuation."""

    residue: int
    p: int
    N: int

    def __post_init__(self):
        if not is_odd_prime(self.p):
            raise ValueError(f"p={self.p} is not an odd prime")
        if self.N < 1:
            raise ValueError("precision exponent must be positive")
        object.__setattr__(self, "residue", self.residue % self.p**self.N)

    @property
    def modulus(self) -> int:
        return self.p**self.N

    def _like(self, r: int) -> "PadicScalar":
        return PadicScalar(r % self.modulus, self.p, self.N)

    def _check(self, other):
        if not isinstance(other, PadicScalar):
            other = PadicScalar(other, self.p, self.N)
        if (other.p, other.N) != (self.p, self.N):
            raise ValueError("mixed (p, N) arithmetic")
        return other

    def __add__(self, other):
        other = self._check(other)
        return self._like(self.residue + other.residue)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.residue)

    def __sub__(self, other):
        other = self._check(other)
        return self._like(self.residue - other.residue)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._check(other)
        return self._like(self.residue * other.residue)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.unit_inverse() ** (-k)
        return self._like(pow(self.residue, k, self.modulus))

    def is_zero(self) -> bool:
        return self.residue == 0

    def valuation(self):
        """max k <= N with p^k | residue; AtLeast(N) for an exact zero residue."""
        if self.residue == 0:
            return AtLeast(self.N)
        return int_valuation(self.residue, self.p)

    def is_unit(self) -> bool:
        return self.residue % self.p != 0

    def unit_inverse(self) -> "PadicScalar":
        if not self.is_unit():
            raise ZeroDivisionError(f"{self.residue} is not a unit mod {self.p}^{self.N}")
        return self._like(pow(self.residue, -1, self.modulus))

    def __repr__(self):
        return f"{self.residue} (mod {self.p}^{self.N})"


def embed_rational(x, p: int, N: int) -> int:
    """Residue of a p-integral rational in Z/p^N.

    Raises NotPIntegral (carrying the negative valuation) if p divides the
    reduced denominator.
    """
    x = Fraction(x)
    if x.denominator % p == 0:
        raise NotPIntegral(x, p, -int_valuation(x.denominator, p))
    m = p**N
    return x.numerator * pow(x.denominator, -1, m) % m


def embed_scalar(x, p: int, N: int) -> PadicScalar:
    return PadicScalar(embed_rational(x, p, N), p, N)


def rational_valuation(x, p: int):
    """v_p of a rational; ValueError on exact 0 (no precision cap here)."""
    x = Fraction(x)
    if x == 0:
        raise ValueError("valuation of exact rational 0 is undefined")
    if x.numerator % p == 0:
        return int_valuation(x.numerator, p)
    if x.denominator % p == 0:
        return -int_valuation(x.denominator, p)
    return 0


def binom_rat(m, n: int) -> Fraction:
    """Generalized binomial coefficient m(m-1)...(m-n+1)/n! for rational m."""
    if n < 0:
        raise ValueError("lower index must be a natural number")
    m = Fraction(m)
    out = Fraction(1)
    for i in range(n):
        out *= (m - i)
    for i in range(2, n + 1):
        out /= i
    return out


def harmonic(n: int) -> Fraction:
    """H_n = sum_{i=1..n} 1/i, with H_0 = 0."""
    if n < 0:
        raise ValueError("harmonic index must be a natural number")
    out = Fraction(0)
    for i in range(1, n + 1):
        out += Fraction(1, i)
    return out


def frac_part(x) -> Fraction:
    """Fractional part <x> in [0, 1)."""
    x = Fraction(x)
    return x - (x.numerator // x.denominator)


def binom_padic_table(omega: int, n_max: int, p: int, N: int) -> list[int]:
    """[C(omega, n) mod p^N for n = 0..n_max] for a p-adic integer omega.

    omega is given as an integer lift of the intended Z_p-value mod
    p^{N + v_p(n_max!)}; the recurrence runs at that lifted precision and
    divides out exact powers of p, which is valid because each C(omega, n)
    is a p-adic integer.
    """
    extra = 0
    q = p
    while q <= n_max:
        extra += n_max // q
        q *= p
    big = p ** (N + extra)
    small = p**N
    out = [1 % small]
    num = 1  # running product (omega)(omega-1)...(omega-n+1) mod big
    fact_val = 0  # v_p(n!)
    fact_unit_inv = 1  # inverse of n!/p^{v_p(n!)} mod big
    fact_unit = 1
    for n in range(1, n_max + 1):
        num = num * ((omega - (n - 1)) % big) % big
        k = n
        while k % p == 0:
            fact_val += 1
            k //= p
        fact_unit = fact_unit * k % big
        if num % p**fact_val != 0:
            raise ArithmeticError("binomial of a p-adic integer must be p-integral")
        fact_unit_inv = pow(fact_unit, -1, big)
        out.append((num // p**fact_val) * fact_unit_inv % big % small)
    return out
