"""Ramified quotient rings O_F[x]/(h) mod p^N with exact uniformizer valuations.

h is monic with plain integer coefficients.  In the Eisenstein case
(h(0) = p, all other non-leading coefficients divisible by p) the class x
is a uniformizer and

    v(sum_j a_j x^j) = min_j (d * v_p(a_j) + j),

exact whenever the minimum lies below the tracked precision: the candidate
values are pairwise distinct mod d, so the ultrametric minimum is unique.

Elements carry a global varpi-precision `prec` (true value minus stored
representative has valuation >= prec).  Freshly constructed elements have
prec = d*N; exact division by x costs one unit of prec, exact division by p
costs d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .padic import AtLeast
from .towers import UnramContext, poly_inverse_mod_p

_INT64_MAX = 2**63 - 1


def cyclotomic_shifted_tail(p: int, n: int):
    """Integer coefficients (low first, without leading 1) of Phi_{p^n}(1+z)."""
    if n == 1:
        # ((1+z)^p - 1)/z = sum_k C(p, k+1) z^k
        return [math.comb(p, k + 1) for k in range(p - 1)]
    if n == 2:
        # Phi_{p^2}(1+z) = Phi_p((1+z)^p) = sum_k C(p,k+1) ((1+z)^p - 1)^k
        base = [math.comb(p, j + 1) for j in range(p)]  # ((1+z)^p-1)/z coeffs * z

        def polymul(u, v):
            out = [0] * (len(u) + len(v) - 1)
            for i, ui in enumerate(u):
                if ui:
                    for j, vj in enumerate(v):
                        out[i + j] += ui * vj
            return out

        w = [0] + base[:-1] + [1]  # (1+z)^p - 1, degree p
        acc = [1]
        out = [0] * (p * (p - 1) + 1)
        for k in range(p):
            c = math.comb(p, k + 1)
            for i, ai in enumerate(acc):
                out[i] += c * ai
            acc = polymul(acc, w)
        assert out[p * (p - 1)] == 1
        return out[: p * (p - 1)]
    raise NotImplementedError("only tower levels 1 and 2 are supported")


def spread_exponents(tail, e: int):
    """Substitute z = x^e into a low-first coefficient list."""
    out = [0] * (len(tail) * e)
    for k, c in enumerate(tail):
        out[k * e] = c
    return out


class EisRing:
    """O_F[x]/(h) mod p^N; h monic with integer coefficients."""

    def __init__(self, base: UnramContext, h_tail, label: str = ""):
        self.base = base
        self.p, self.f, self.N = base.p, base.f, base.N
        self.h_tail = [int(c) for c in h_tail]
        self.d = len(self.h_tail)
        self.modulus = base.modulus
        self.label = label
        self.eisenstein = (
            self.h_tail[0] % self.p == 0
            and self.h_tail[0] % self.p**2 != 0
            and all(c % self.p == 0 for c in self.h_tail)
        )
        conv_terms = max(self.d, 2 * self.f - 1)
        self.dtype = np.int64 if (self.modulus - 1) ** 2 * conv_terms * self.f < _INT64_MAX else object
        self._xred = self._reduction_rows()
        self._tred = self._t_reduction_rows()
        self._p_unit_cache = None
        self.full_prec = self.d * self.N

    def _reduction_rows(self):
        # x^(d+i) = sum_j R[i, j] x^j for i = 0..d-2
        d, m = self.d, self.modulus
        R = np.zeros((max(d - 1, 1), d), dtype=self.dtype)
        row = np.array([-c % m for c in self.h_tail], dtype=self.dtype)
        if d > 1:
            R[0] = row
        for i in range(1, d - 1):
            top = R[i - 1, d - 1]
            shifted = np.zeros(d, dtype=self.dtype)
            shifted[1:] = R[i - 1, : d - 1]
            R[i] = (shifted + top * np.array([-c % m for c in self.h_tail], dtype=self.dtype)) % m
        return R % m

    def _t_reduction_rows(self):
        f, m = self.f, self.modulus
        if f == 1:
            return np.zeros((1, 1), dtype=self.dtype)
        S = np.zeros((f - 1, f), dtype=self.dtype)
        g = np.array([-c % m for c in self.base.g_tail], dtype=self.dtype)
        S[0] = g
        for i in range(1, f - 1):
            top = S[i - 1, f - 1]
            shifted = np.zeros(f, dtype=self.dtype)
            shifted[1:] = S[i - 1, : f - 1]
            S[i] = (shifted + top * g) % m
        return S % m

    # -- elements -------------------------------------------------------

    def zero(self):
        return RamElem(self, np.zeros((self.d, self.f), dtype=self.dtype), self.full_prec)

    def one(self):
        a = np.zeros((self.d, self.f), dtype=self.dtype)
        a[0, 0] = 1
        return RamElem(self, a, self.full_prec)

    def x(self, k: int = 1):
        """x^k as an element (0 <= k < d fast path; reduces otherwise)."""
        if 0 <= k < self.d:
            a = np.zeros((self.d, self.f), dtype=self.dtype)
            a[k, 0] = 1
            return RamElem(self, a, self.full_prec)
        return self.one().mul_xpow(k)

    def from_int(self, c: int):
        a = np.zeros((self.d, self.f), dtype=self.dtype)
        a[0, 0] = c % self.modulus
        return RamElem(self, a, self.full_prec)

    def from_unram(self, u):
        a = np.zeros((self.d, self.f), dtype=self.dtype)
        u = list(u)
        if len(u) > self.f:
            raise ValueError("coefficient tuple longer than f")
        for i, c in enumerate(u):
            a[0, i] = c % self.modulus
        return RamElem(self, a, self.full_prec)

    def from_rows(self, rows, prec=None):
        a = np.zeros((self.d, self.f), dtype=self.dtype)
        for j, u in enumerate(rows):
            a[j, :] = np.array(u, dtype=self.dtype) % self.modulus
        return RamElem(self, a, self.full_prec if prec is None else prec)

    def _mul_arrays(self, A, B):
        d, f, m = self.d, self.f, self.modulus
        C = np.zeros((2 * d - 1, 2 * f - 1), dtype=self.dtype)
        for i in range(f):
            for j in range(f):
                C[:, i + j] += np.convolve(A[:, i], B[:, j])
        C %= m
        if d > 1:
            low = (C[:d] + np.tensordot(self._xred, C[d:], axes=(0, 0))) % m
        else:
            low = C[:1]
        if f > 1:
            low2 = (low[:, :f] + np.tensordot(low[:, f:], self._tred, axes=(1, 0))) % m
        else:
            low2 = low[:, :1] % m
        return low2

    def horner(self, coeff_elems, point):
        """Evaluate sum coeff[k] * point^k (low first) by Horner."""
        out = self.zero()
        for c in reversed(coeff_elems):
            out = out * point + c
        return out

    def galois_sub(self, z, image_of_x):
        """Ring map fixing O_F coefficientwise, sending x to image_of_x."""
        rows = [self.from_unram(tuple(int(v) for v in z.arr[j])) for j in range(self.d)]
        out = self.horner(rows, image_of_x)
        return RamElem(self, out.arr, min(out.prec, z.prec))

    def p_as_unit_times_xpow(self):
        """(U, k) with p = U * x^k, U a unit; Eisenstein rings only."""
        if self._p_unit_cache is None:
            if not self.eisenstein:
                raise ValueError("p/x^k decomposition needs an Eisenstein presentation")
            k = self.d  # v(p) = d since h is Eisenstein of degree d
            U = self.from_int(self.p).div_xpow(k)
            assert (U.mul_xpow(k) - self.from_int(self.p)).val_at_least(U.prec)
            self._p_unit_cache = (U, k)
        return self._p_unit_cache

    def teich_root_of_unity(self, order):
        return self.from_unram(self.base.teichmuller_generator(order))

    def frobenius(self, z, k: int = 1):
        k %= self.f
        if k == 0:
            return z
        M = self.base.sigma_matrix(k)
        arr = (z.arr @ np.array(M, dtype=self.dtype).T) % self.modulus
        return RamElem(self, arr, z.prec)

    def trace_to_unram(self, z):
        """Matrix trace of multiplication by z on the O_F-basis 1..x^{d-1}."""
        out = self.base.zero()
        cur = z
        for i in range(self.d):
            out = self.base.add(out, tuple(int(v) for v in cur.arr[i]))
            if i < self.d - 1:
                cur = cur.mul_xpow(1)
        return out

    def random_element(self, rng):
        a = np.array(
            [[rng.randrange(self.modulus) for _ in range(self.f)] for _ in range(self.d)],
            dtype=self.dtype,
        )
        return RamElem(self, a, self.full_prec)

    def __repr__(self):
        return f"EisRing({self.label or 'deg ' + str(self.d)}, p={self.p}, f={self.f}, N={self.N})"


@dataclass(frozen=True)
class RamElem:
    """Element of an EisRing: (d, f) coefficient array plus varpi-precision."""

    ring: EisRing
    arr: np.ndarray
    prec: int

    def __post_init__(self):
        self.arr.setflags(write=False)

    def _like(self, arr, prec):
        return RamElem(self.ring, arr % self.ring.modulus, prec)

    def __add__(self, other):
        other = self._coerce(other)
        return self._like(self.arr + other.arr, min(self.prec, other.prec))

    def __sub__(self, other):
        other = self._coerce(other)
        return self._like(self.arr - other.arr, min(self.prec, other.prec))

    def __neg__(self):
        return self._like(-self.arr, self.prec)

    def __mul__(self, other):
        other = self._coerce(other)
        arr = self.ring._mul_arrays(self.arr, other.arr)
        return RamElem(self.ring, arr, min(self.prec, other.prec))

    def _coerce(self, other):
        if isinstance(other, RamElem):
            if other.ring is not self.ring:
                raise ValueError("mixed-ring arithmetic")
            return other
        if isinstance(other, int):
            return self.ring.from_int(other)
        raise TypeError(f"cannot coerce {type(other)}")

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out, base = self.ring.one(), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scalar_mul(self, c: int):
        return self._like(self.arr * (c % self.ring.modulus), self.prec)

    def mul_xpow(self, k: int):
        """Multiply by x^k (k >= 0) without a full product."""
        out = self
        R = self.ring
        for _ in range(k):
            arr = np.zeros_like(out.arr)
            if R.d > 1:
                arr[1:] = out.arr[: R.d - 1]
                top = out.arr[R.d - 1]
                arr = (arr + R._xred[0][:, None] * top[None, :]) % R.modulus
            else:
                arr = out.arr * (-R.h_tail[0] % R.modulus) % R.modulus
            out = RamElem(R, arr, out.prec)
        return out

    def is_zero(self):
        return not self.arr.any()

    def val(self):
        """varpi-valuation via the min-formula; AtLeast(prec) when exhausted."""
        R = self.ring
        if not R.eisenstein:
            raise ValueError("valuation needs an Eisenstein presentation")
        best = None
        for j in range(R.d):
            u = tuple(int(v) for v in self.arr[j])
            vj = R.base.val_p(u)
            if isinstance(vj, AtLeast):
                continue
            cand = R.d * vj + j
            if best is None or cand < best:
                best = cand
        if best is None or best >= self.prec:
            return AtLeast(self.prec)
        return best

    def val_at_least(self, k: int) -> bool:
        v = self.val()
        if isinstance(v, AtLeast):
            return v.bound >= k
        return v >= k

    def div_xpow(self, k: int):
        """Exact division by x^k; costs k units of varpi-precision."""
        R = self.ring
        if not R.eisenstein:
            raise ValueError("division by x needs an Eisenstein presentation")
        u0 = R.h_tail[0] // R.p  # integer unit: h(0) = u0 * p
        u0_inv = pow(u0, -1, R.modulus)
        out = self
        for _ in range(k):
            b0 = tuple(int(v) for v in out.arr[0])
            if any(c % R.p for c in b0):
                raise ArithmeticError("element is not divisible by the uniformizer")
            ctop = tuple(-(c // R.p) * u0_inv % R.modulus for c in b0)
            arr = np.zeros_like(out.arr)
            arr[: R.d - 1] = out.arr[1:]
            ct = np.array(ctop, dtype=R.dtype)
            for i in range(1, R.d):
                arr[i - 1] = (arr[i - 1] + (R.h_tail[i] % R.modulus) * ct) % R.modulus
            arr[R.d - 1] = ct
            out = RamElem(R, arr, out.prec - 1)
        return out

    def div_p(self, k: int = 1):
        """Exact division by p^k; costs k*d units of varpi-precision."""
        R = self.ring
        pk = R.p**k
        if (self.arr % pk).any():
            raise ArithmeticError("element is not divisible by p^k")
        return RamElem(R, self.arr // pk, self.prec - k * R.d)

    def residue_scalar(self):
        """Image in the residue field as an O_F residue tuple (constant term mod p)."""
        return tuple(int(v) % self.ring.p for v in self.arr[0])

    def is_unit(self):
        return any(self.residue_scalar())

    def inverse(self):
        R = self.ring
        if not self.is_unit():
            raise ZeroDivisionError("not a unit")
        res = self.residue_scalar()
        g_full = list(R.base.g_tail) + [1]
        inv0 = poly_inverse_mod_p(list(res), g_full, R.p)
        z = R.from_unram(tuple(inv0))
        steps = max(1, (R.d * R.N).bit_length() + 1)
        for _ in range(steps):
            z = z + z - self * z * z
        check = self * z - R.one()
        if not check.val_at_least(min(self.prec, R.full_prec)):
            raise ArithmeticError("unit inversion failed")
        return RamElem(R, z.arr, self.prec)

    def eth_root_one_unit(self, e: int):
        """The unique e-th root congruent to 1 mod x, for a 1-unit (p does not divide e)."""
        R = self.ring
        if e % R.p == 0:
            raise ValueError("e must be prime to p")
        if self.residue_scalar() != (1,) + (0,) * (R.f - 1):
            raise ValueError("eth_root_one_unit needs residue 1")
        u = R.one()
        steps = max(1, (R.d * R.N).bit_length() + 2)
        for _ in range(steps):
            ue = u ** (e - 1)
            f_val = ue * u - self
            if f_val.val_at_least(min(self.prec, R.full_prec)):
                break
            u = u - f_val * (ue.scalar_mul(e)).inverse()
        if not (u**e - self).val_at_least(min(self.prec, R.full_prec)):
            raise ArithmeticError("e-th root iteration did not converge")
        return RamElem(R, u.arr, self.prec)

    def frob(self, k: int = 1):
        return self.ring.frobenius(self, k)

    def reduce_mod(self, pk: int):
        return self._like(self.arr % pk, self.prec)

    def __repr__(self):
        v = self.val() if self.ring.eisenstein else "?"
        return f"RamElem(val={v}, prec={self.prec}, {self.ring.label})"


# -- standard ring constructions ---------------------------------------


def make_ram(base: UnramContext, e: int, level: int = 1) -> EisRing:
    """O_F[x]/(Phi_{p^level}(1 + x^e)): the level-n ramified layer K_n.

    x is a uniformizer; 1 + x^e is a primitive p^level-th root of unity;
    v(p) = e * p^(level-1) * (p-1).
    """
    if e % base.p == 0:
        raise ValueError("e must be prime to p")
    tail = spread_exponents(cyclotomic_shifted_tail(base.p, level), e)
    ring = EisRing(base, tail, label=f"K_{level}(e={e})")
    assert ring.eisenstein
    return ring


def make_kummer(base: UnramContext, d: int, p0_unit: int = -1) -> EisRing:
    """O_F[w]/(w^d - p0) with p0 = p0_unit * p (default -p)."""
    tail = [(-p0_unit * base.p)] + [0] * (d - 1)
    ring = EisRing(base, tail, label=f"Kummer(d={d}, p0={p0_unit}*p)")
    if not ring.eisenstein:
        raise ValueError("Kummer modulus is not Eisenstein")
    return ring


def make_cyclotomic_plain(base: UnramContext) -> EisRing:
    """O_F[z]/(Phi_p(z)): zeta_p as a ring class; not an Eisenstein presentation."""
    tail = [1] * (base.p - 1)
    return EisRing(base, tail, label="O_F[zeta_p]")


def kummer_varpi(kring: EisRing, e: int) -> RamElem:
    """Root z of Phi_p(1 + z^e) in the Kummer ring w^{e(p-1)} = -p with z = w mod w^2.

    Solves the scaled equation P(v) = v^{p-1} - sum_{k<p-1} (C(p,k+1)/p) w^{ek} v^k
    at the residue-1 root (unit derivative there), then takes z = w * v^{1/e}.
    The residue-1 branch realizes zeta_p - 1 = (-p)^{1/(p-1)} * (1-unit).
    """
    p = kring.p
    if kring.d != e * (p - 1):
        raise ValueError("Kummer degree must be e(p-1)")
    w = kring.x()
    coeffs = []
    for k in range(p - 1):
        c = math.comb(p, k + 1) // p
        coeffs.append(kring.x(e * k).scalar_mul(-c) if k > 0 else kring.from_int(-c))
    coeffs.append(kring.one())  # leading v^{p-1}

    def P(v):
        return kring.horner(coeffs, v)

    def Pprime(v):
        dcoeffs = [coeffs[k].scalar_mul(k) for k in range(1, p)]
        return kring.horner(dcoeffs, v)

    v = kring.one()
    for _ in range((kring.full_prec).bit_length() + 2):
        fv = P(v)
        if fv.val_at_least(kring.full_prec):
            break
        v = v - fv * Pprime(v).inverse()
    if not P(v).val_at_least(kring.full_prec):
        raise ArithmeticError("Hensel iteration for varpi did not converge within precision")
    z = w * v.eth_root_one_unit(e)
    return z


def zeta_p_in_kummer(kring: EisRing, e: int) -> RamElem:
    """1 + z^e for the compatible z; a primitive p-th root of unity."""
    z = kummer_varpi(kring, e)
    return kring.one() + z**e
