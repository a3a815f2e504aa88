"""Unramified ring towers O_F mod p^N with Hensel-lifted Frobenius.

O_F is realized as (Z/p^N)[t]/(g) where g is the first monic degree-f
polynomial, in a fixed deterministic order, that is irreducible mod p; its
coefficients are lifted verbatim.  Elements are immutable int tuples.
"""

from __future__ import annotations

import numpy as np

from .padic import AtLeast, is_odd_prime


def poly_mulmod(a, b, mod_tail, m: int):
    """Product of coefficient tuples modulo a monic polynomial, mod m.

    mod_tail holds the low coefficients (g0..g_{d-1}) of the monic modulus.
    """
    d = len(mod_tail)
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % m
    for k in range(len(out) - 1, d - 1, -1):
        c = out[k]
        if c:
            out[k] = 0
            for j in range(d):
                out[k - d + j] = (out[k - d + j] - c * mod_tail[j]) % m
    out = out[:d] + [0] * max(0, d - len(out))
    return tuple(x % m for x in out)


def _poly_deg(u, p):
    for i in range(len(u) - 1, -1, -1):
        if u[i] % p:
            return i
    return -1


def _poly_divmod_p(u, v, p):
    u = [x % p for x in u]
    dv = _poly_deg(v, p)
    inv = pow(v[dv] % p, -1, p)
    q = [0] * max(1, len(u) - dv)
    for i in range(len(u) - 1, dv - 1, -1):
        c = u[i] % p
        if c:
            s = c * inv % p
            q[i - dv] = s
            for j in range(dv + 1):
                u[i - dv + j] = (u[i - dv + j] - s * v[j]) % p
    return q, u[:dv] if dv > 0 else [0]


def poly_inverse_mod_p(a, g, p):
    """Inverse of a in the field F_p[t]/(g), via extended Euclid."""
    r0, r1 = list(g), [x % p for x in a]
    s0, s1 = [0], [1]
    while _poly_deg(r1, p) > 0:
        q, r = _poly_divmod_p(r0, r1, p)
        qs1 = [0] * (len(q) + len(s1) - 1)
        for i, qi in enumerate(q):
            if qi:
                for j, sj in enumerate(s1):
                    qs1[i + j] = (qs1[i + j] + qi * sj) % p
        n = max(len(s0), len(qs1))
        s2 = [((s0[i] if i < len(s0) else 0) - (qs1[i] if i < len(qs1) else 0)) % p for i in range(n)]
        r0, r1, s0, s1 = r1, r, s1, s2
    c = r1[_poly_deg(r1, p)] if _poly_deg(r1, p) >= 0 else 0
    if c == 0:
        raise ZeroDivisionError("element is not invertible mod p")
    cinv = pow(c, -1, p)
    return [x * cinv % p for x in s1]


def _prime_factors(n: int):
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


class UnramContext:
    """O_F mod p^N, with Frobenius sigma and Teichmueller lifts.

    sigma(t) is the Hensel lift of t^p along g, so sigma is a ring
    automorphism with sigma^f = id and sigma == (p-th power) mod p.
    """

    def __init__(self, p: int, f: int, N: int):
        if not is_odd_prime(p):
            raise ValueError(f"p={p} is not an odd prime")
        if f < 1 or N < 1:
            raise ValueError("need f >= 1 and N >= 1")
        self.p, self.f, self.N = p, f, N
        self.modulus = p**N
        self.q = p**f
        self.g_tail = self._find_irreducible_tail()
        self.sigma_poly = self._hensel_frobenius()
        self._sigma_mats = self._frobenius_matrices()
        self._teich_cache = {}
        self._gen_cache = {}

    def _find_irreducible_tail(self):
        p, f = self.p, self.f
        if f == 1:
            return (0,)
        for code in range(p**f):
            tail, c = [], code
            for _ in range(f):
                tail.append(c % p)
                c //= p
            if self._is_irreducible_tail(tail):
                return tuple(tail)
        raise RuntimeError("exhaustive search found no irreducible polynomial")

    def _is_irreducible_tail(self, tail):
        p, f = self.p, self.f

        def frob_iter(poly, k):
            out = poly
            for _ in range(k):
                acc = (1,) + (0,) * (f - 1)
                base, e = out, p
                while e:
                    if e & 1:
                        acc = poly_mulmod(acc, base, tail, p)
                    base = poly_mulmod(base, base, tail, p)
                    e >>= 1
                out = acc
            return out

        t = (0, 1) + (0,) * (f - 2)
        if frob_iter(t, f) != t:
            return False
        for d in range(1, f):
            if f % d == 0 and frob_iter(t, d) == t:
                return False
        return True

    def _hensel_frobenius(self):
        if self.f == 1:
            return (0,)
        m = self.modulus
        # start from t^p mod (g, p), refine by Newton on g
        x = (0, 1) + (0,) * (self.f - 2)
        acc = self.one()
        base, e = x, self.p
        while e:
            if e & 1:
                acc = poly_mulmod(acc, base, self.g_tail, self.p)
            base = poly_mulmod(base, base, self.g_tail, self.p)
            e >>= 1
        x = acc
        for _ in range(self.N.bit_length() + 2):
            gx = self._eval_g(x)
            if self.is_zero(gx):
                break
            gpx = self._eval_g_prime(x)
            x = self.sub(x, self.mul(gx, self.inverse(gpx)))
        if not self.is_zero(self._eval_g(x)):
            raise ArithmeticError("Frobenius lift did not converge")
        return x

    def _eval_g(self, x):
        out = self.one()
        for k in range(self.f - 1, -1, -1):
            out = self.add(self.mul(out, x), self.from_int(self.g_tail[k]))
        return out

    def _eval_g_prime(self, x):
        out = self.from_int(self.f)
        for k in range(self.f - 1, 0, -1):
            out = self.add(self.mul(out, x), self.from_int(k * self.g_tail[k]))
        return out

    def _frobenius_matrices(self):
        f, m = self.f, self.modulus
        eye = np.array([[1 if i == j else 0 for j in range(f)] for i in range(f)], dtype=object)
        mats = [eye]
        if f == 1:
            return mats
        cols, cur = [], self.one()
        for _ in range(f):
            cols.append(list(cur))
            cur = self.mul(cur, self.sigma_poly)
        M = np.array(cols, dtype=object).T % m
        for _ in range(1, f):
            mats.append(M @ mats[-1] % m)
        return mats

    # -- element operations; elements are int tuples of length f -------

    def zero(self):
        return (0,) * self.f

    def one(self):
        return (1,) + (0,) * (self.f - 1)

    def from_int(self, c: int):
        return (c % self.modulus,) + (0,) * (self.f - 1)

    def from_coeffs(self, cs):
        cs = list(cs)[: self.f]
        cs += [0] * (self.f - len(cs))
        return tuple(c % self.modulus for c in cs)

    def add(self, a, b):
        m = self.modulus
        return tuple((x + y) % m for x, y in zip(a, b))

    def sub(self, a, b):
        m = self.modulus
        return tuple((x - y) % m for x, y in zip(a, b))

    def neg(self, a):
        m = self.modulus
        return tuple(-x % m for x in a)

    def mul(self, a, b):
        return poly_mulmod(a, b, self.g_tail, self.modulus)

    def scalar_mul(self, c: int, a):
        m = self.modulus
        return tuple(c * x % m for x in a)

    def pow(self, a, k: int):
        if k < 0:
            return self.pow(self.inverse(a), -k)
        out, base = self.one(), a
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def is_zero(self, a):
        return all(x == 0 for x in a)

    def is_unit(self, a):
        return any(x % self.p for x in a)

    def val_p(self, a):
        if self.is_zero(a):
            return AtLeast(self.N)
        v = self.N
        for x in a:
            if x:
                w = 0
                while x % self.p == 0:
                    x //= self.p
                    w += 1
                v = min(v, w)
        return v

    def inverse(self, a):
        if not self.is_unit(a):
            raise ZeroDivisionError("not a unit in O_F")
        g_full = list(self.g_tail) + [1]
        z = self.from_coeffs(poly_inverse_mod_p(list(a), g_full, self.p))
        for _ in range(self.N.bit_length() + 1):
            az = self.mul(a, z)
            z = self.sub(self.add(z, z), self.mul(az, z))
        if self.mul(a, z) != self.one():
            raise ArithmeticError("unit inversion failed")
        return z

    def exact_div_p(self, a, k: int = 1):
        pk = self.p**k
        if any(x % pk for x in a):
            raise ArithmeticError("residue not divisible by p^k")
        return tuple(x // pk for x in a)

    def frobenius(self, a, k: int = 1):
        k %= self.f
        if k == 0:
            return tuple(a)
        vec = (self._sigma_mats[k] @ np.array(a, dtype=object)) % self.modulus
        return tuple(int(x) for x in vec)

    def sigma_matrix(self, k: int = 1):
        return self._sigma_mats[k % self.f]

    def trace_to_zp(self, a) -> int:
        out = self.zero()
        for k in range(self.f):
            out = self.add(out, self.frobenius(a, k))
        if any(out[1:]):
            raise ArithmeticError("trace left Z/p^N")
        return out[0]

    def norm_to_zp(self, a) -> int:
        out = self.one()
        for k in range(self.f):
            out = self.mul(out, self.frobenius(a, k))
        if any(out[1:]):
            raise ArithmeticError("norm left Z/p^N")
        return out[0]

    def teichmuller(self, a):
        """The unique (q-1)-th root of unity congruent to a mod p (0 for 0)."""
        key = tuple(x % self.p for x in a)
        if key in self._teich_cache:
            return self._teich_cache[key]
        if all(x == 0 for x in key):
            return self.zero()
        x = self.from_coeffs(key)
        for _ in range(self.N + 1):
            x = self.pow(x, self.q)
        if self.pow(x, self.q - 1) != self.one():
            raise ArithmeticError("Teichmueller iteration did not stabilize")
        self._teich_cache[key] = x
        return x

    def teichmuller_generator(self, order: int):
        """A fixed Teichmueller element of exact multiplicative order `order`."""
        if (self.q - 1) % order != 0:
            raise ValueError(f"order {order} does not divide q-1 = {self.q - 1}")
        if order in self._gen_cache:
            return self._gen_cache[order]
        p, f = self.p, self.f
        for code in range(1, self.q):
            coeffs, c = [], code
            for _ in range(f):
                coeffs.append(c % p)
                c //= p
            t = self.teichmuller(tuple(coeffs))
            if self.is_zero(t):
                continue
            if self._mult_order(t) == self.q - 1:
                g = self.pow(t, (self.q - 1) // order)
                self._gen_cache[order] = g
                return g
        raise RuntimeError("no generator of the residue field found")

    def _mult_order(self, t):
        n = self.q - 1
        order = n
        for d in _prime_factors(n):
            while order % d == 0 and self.pow(t, order // d) == self.one():
                order //= d
        return order

    def zp_scalar(self, a):
        """Extract c when a = c*1; error if a has nonconstant coordinates."""
        if any(a[1:]):
            raise ArithmeticError("element is not a Z/p^N scalar")
        return a[0]

    def random_element(self, rng):
        return tuple(rng.randrange(self.modulus) for _ in range(self.f))

    def random_unit(self, rng):
        while True:
            a = self.random_element(rng)
            if self.is_unit(a):
                return a

    def reduce(self, a, N2: int):
        m = self.p**N2
        return tuple(x % m for x in a)

    def __repr__(self):
        return f"UnramContext(p={self.p}, f={self.f}, N={self.N})"
