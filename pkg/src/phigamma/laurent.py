"""Windowed Laurent series over O_F mod p^N and the operator suite on them.

A series sum a_i pi_K^i is stored on an explicit exponent window [lo, hi].
Coefficients outside the window are semantically unknown, not zero, unless
the corresponding exactness flag says the series is known to vanish there.
Every operator computes its exact output window and attaches an
OperatorReport; silent truncation is forbidden.

Storage model: numerator arrays mod p^wp with a p-power denominator
exponent den (value = arr / p^den, known mod p^(wp - den)).  Integral
series ("A" mode) have den = 0 and wp = N.  The denominator regime
("P" mode, where n*a_n stays integral) raises wp so that values are still
known mod p^N.  Mixing modes in arithmetic is a type error except for
multiplication by an integral series.

phi acts by sigma on coefficients and pi_K -> pi_K^p * (1 + p*y)^(1/e),
y = sum_j beta_{1,j} pi^{-j}, on the 1-unit branch of the root; psi is its
additive left inverse, computed by triangular back-substitution against
the half trace p^{-1} Tr.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .padic import binom_padic_table, embed_rational
from .towers import UnramContext

_INT64_MAX = 2**63 - 1


def b_coeff(p: int, m, n: int) -> int:
    """b_{m,n} = p^{-1} sum_{zeta in mu_p} zeta^m (1 - zeta^{-1})^n, an integer.

    Only m mod p matters; equals the alternating binomial sum
    sum_{j == m mod p} (-1)^j C(n, j).
    """
    if isinstance(m, Fraction):
        if m.denominator % p == 0:
            raise ValueError("m must be p-integral")
        m = m.numerator * pow(m.denominator, -1, p)
    mbar = m % p
    out = 0
    for j in range(mbar, n + 1, p):
        out += (-1) ** j * math.comb(n, j)
    return out


def b_coeff_closed(p: int, m, n: int) -> int:
    """Closed form for n < 2p: (-1)^mbar (C(n, mbar) - [n >= p] C(n, mbar+p))."""
    if not 0 <= n < 2 * p:
        raise ValueError("closed form only covers n < 2p")
    if isinstance(m, Fraction):
        m = m.numerator * pow(m.denominator, -1, p)
    mbar = m % p
    out = math.comb(n, mbar)
    if n >= p:
        out -= math.comb(n, mbar + p)
    return (-1) ** mbar * out


def beta_table(p: int, n_max: int):
    """beta[n][j]: integer coefficients of (sum_j C(p,j)/p x^j)^n."""
    row1 = [0] + [math.comb(p, j) // p for j in range(1, p)]
    tabs = [[1]]
    cur = [1]
    for _ in range(n_max):
        new = [0] * (len(cur) + p - 1)
        for i, c in enumerate(cur):
            if c:
                for j in range(1, p):
                    new[i + j] += c * row1[j]
        cur = new
        tabs.append(list(cur))
    return tabs


@dataclass(frozen=True)
class OperatorReport:
    op: str
    window_in: tuple
    window_out: tuple
    precision: int
    note: str = ""


class SeriesContext:
    """Ambient data: O_F, ramification index e with e(p-1) | q-1, precision N.

    The default window satisfies lo <= -e*p - 1 and hi >= 2e(p-1)N so every
    coefficient congruence of the psi-fixed system at precision N is
    representable.  Operators allocate their own output windows; the context
    window is the requested working window for constructions and checks.
    """

    def __init__(self, p: int, f: int, e: int, N: int, window=None, den_budget=None):
        if e % p == 0:
            raise ValueError("p divides e")
        if (p**f - 1) % (e * (p - 1)) != 0:
            raise ValueError(f"e(p-1) = {e * (p - 1)} does not divide q-1 = {p**f - 1}")
        self.p, self.f, self.e, self.N = p, f, e, N
        if window is None:
            window = (-e * p - 1, 2 * e * (p - 1) * N)
        self.window = tuple(window)
        if den_budget is None:
            den_budget = max(2, int(math.log(max(self.window[1], p) + 1, p)) + 2)
        self.den_budget = den_budget
        self.unram = UnramContext(p, f, N + den_budget + 2)
        self._b_rows = {}
        self._beta = None
        self._ht_tables = {}
        self._phi_tables = {}
        self._power_tables = {}
        self._scalar_roots = {}

    def modulus(self, wp: int) -> int:
        return self.p**wp

    def dtype(self, wp: int, conv_len: int = 1):
        if (self.modulus(wp) - 1) ** 2 * max(conv_len, 1) * (2 * self.f - 1) < _INT64_MAX:
            return np.int64
        return object

    def g_tail_mod(self, wp: int):
        return [c % self.modulus(wp) for c in self.unram.g_tail]

    def b_row(self, n: int):
        if n not in self._b_rows:
            self._b_rows[n] = [b_coeff(self.p, m, n) for m in range(self.p)]
        return self._b_rows[n]

    def beta(self, n: int, j: int) -> int:
        need = self.N + self.den_budget
        if self._beta is None or len(self._beta) <= need:
            self._beta = beta_table(self.p, need + 1)
        row = self._beta[n]
        return row[j] if 0 <= j < len(row) else 0

    def ht_n_max(self, wp: int) -> int:
        # p^wp | b_{m,n} once n > wp(p-1)
        return wp * (self.p - 1)

    def ht_table(self, lo: int, hi: int, wp: int):
        """T[M - lo, n] = C(M/e + n, n) * b_{M/e + n, n} mod p^wp."""
        key = (lo, hi, wp)
        if key in self._ht_tables:
            return self._ht_tables[key]
        p, e = self.p, self.e
        n_max = self.ht_n_max(wp)
        mod = self.modulus(wp)
        einv = pow(e, -1, p)
        T = np.zeros((hi - lo + 1, n_max + 1), dtype=object)
        for Midx, M in enumerate(range(lo, hi + 1)):
            c = Fraction(1)
            base = Fraction(M, e)
            for n in range(n_max + 1):
                if n > 0:
                    c = c * (base + n) / n
                b = self.b_row(n)[(M * einv + n) % p] % mod
                if b:
                    T[Midx, n] = embed_rational(c, p, wp) * b % mod
        if self.dtype(wp) is np.int64:
            T = T.astype(np.int64)
        self._ht_tables[key] = T
        return T

    def phi_rows(self, lo: int, hi: int, wp: int):
        """[(offset -e*j, coefficient vector over m)] for phi(pi_K^m) expansions."""
        key = (lo, hi, wp)
        if key in self._phi_tables:
            return self._phi_tables[key]
        p, e = self.p, self.e
        mod = self.modulus(wp)
        rows = [(0, np.full(hi - lo + 1, 1, dtype=object))]
        cvec = [Fraction(1)] * (hi - lo + 1)
        for n in range(1, wp):
            pn = p**n
            for i, m in enumerate(range(lo, hi + 1)):
                cvec[i] = cvec[i] * (Fraction(m, e) - (n - 1)) / n
            cints = np.array([embed_rational(c, p, wp) for c in cvec], dtype=object)
            for j in range(n, n * (p - 1) + 1):
                bj = self.beta(n, j) * pn % mod
                if bj:
                    rows.append((-e * j, cints * bj % mod))
        if self.dtype(wp) is np.int64:
            rows = [(off, v.astype(np.int64)) for off, v in rows]
        self._phi_tables[key] = rows
        return rows

    def scalar_eth_root(self, c: int, wp: int) -> int:
        """The 1-unit e-th root of a 1-unit scalar mod p^wp."""
        key = (c % self.modulus(wp), wp)
        if key in self._scalar_roots:
            return self._scalar_roots[key]
        p, e, mod = self.p, self.e, self.modulus(wp)
        if c % p != 1:
            raise ValueError("scalar e-th root needs a 1-unit")
        x = 1
        for _ in range(wp.bit_length() + 2):
            fx = (pow(x, e, mod) - c) % mod
            x = (x - fx * pow(e * pow(x, e - 1, mod), -1, mod)) % mod
        if pow(x, e, mod) != c % mod:
            raise ArithmeticError("scalar root iteration failed")
        self._scalar_roots[key] = x
        return x

    # -- constructors ---------------------------------------------------

    def zero(self, window=None, wp=None):
        lo, hi = window if window is not None else self.window
        wp = wp or self.N
        return LaurentSeries(self, lo, np.zeros((hi - lo + 1, self.f), dtype=self.dtype(wp)), wp)

    def from_terms(self, terms, window=None, wp=None, den=0, mode="A"):
        """Series from {exponent: int-or-coordinate-tuple}; exact outside its window."""
        wp = wp or (self.N + den)
        if not terms and window is None:
            window = (0, 0)
        lo = min(terms) if terms else window[0]
        hi = max(terms) if terms else window[1]
        if window is not None:
            lo, hi = min(lo, window[0]), max(hi, window[1])
        arr = np.zeros((hi - lo + 1, self.f), dtype=self.dtype(wp))
        m = self.modulus(wp)
        for i, c in terms.items():
            if isinstance(c, int):
                arr[i - lo, 0] = c % m
            else:
                for k, v in enumerate(c):
                    arr[i - lo, k] = v % m
        return LaurentSeries(self, lo, arr, wp, den, mode)

    def one(self, wp=None):
        return self.from_terms({0: 1}, wp=wp)

    def one_plus_pi(self, wp=None):
        return self.from_terms({0: 1, self.e: 1}, wp=wp)

    def random_series(self, rng, window=None, wp=None):
        lo, hi = window if window is not None else self.window
        wp = wp or self.N
        m = self.modulus(wp)
        arr = np.array(
            [[rng.randrange(m) for _ in range(self.f)] for _ in range(hi - lo + 1)],
            dtype=self.dtype(wp),
        )
        return LaurentSeries(self, lo, arr, wp)

    def __repr__(self):
        return f"SeriesContext(p={self.p}, f={self.f}, e={self.e}, N={self.N})"


class LaurentSeries:
    """Immutable windowed Laurent series; see the module docstring."""

    __slots__ = ("ctx", "lo", "arr", "wp", "den", "mode", "exact_below", "exact_above", "report")

    def __init__(self, ctx, lo, arr, wp, den=0, mode="A",
                 exact_below=True, exact_above=True, report=None):
        if den > 0 and mode == "A":
            mode = "P"
        self.ctx, self.lo, self.arr, self.wp, self.den, self.mode = ctx, lo, arr, wp, den, mode
        arr.setflags(write=False)
        self.exact_below, self.exact_above = exact_below, exact_above
        self.report = report

    @property
    def hi(self):
        return self.lo + len(self.arr) - 1

    @property
    def window(self):
        return (self.lo, self.hi)

    @property
    def value_prec(self):
        return self.wp - self.den

    def coeff(self, i):
        """Numerator coordinates at exponent i (KeyError outside trusted range)."""
        if self.lo <= i <= self.hi:
            return tuple(int(v) for v in self.arr[i - self.lo])
        if (i < self.lo and self.exact_below) or (i > self.hi and self.exact_above):
            return (0,) * self.ctx.f
        raise KeyError(f"exponent {i} outside trusted window {self.window}")

    def _with(self, **kw):
        args = dict(ctx=self.ctx, lo=self.lo, arr=self.arr, wp=self.wp, den=self.den,
                    mode=self.mode, exact_below=self.exact_below,
                    exact_above=self.exact_above, report=self.report)
        args.update(kw)
        return LaurentSeries(**args)

    def _known_lo(self):
        return -(1 << 40) if self.exact_below else self.lo

    def _known_hi(self):
        return 1 << 40 if self.exact_above else self.hi

    def _grab(self, lo, hi, wp):
        """Numerators on [lo, hi], zero-padded on exact sides, mod p^wp."""
        width = hi - lo + 1
        out = np.zeros((width, self.ctx.f), dtype=self.ctx.dtype(wp, width))
        s_lo, s_hi = max(lo, self.lo), min(hi, self.hi)
        if s_lo <= s_hi:
            seg = self.arr[s_lo - self.lo : s_hi - self.lo + 1]
            out[s_lo - lo : s_hi - lo + 1] = np.asarray(seg, dtype=out.dtype) % self.ctx.modulus(wp)
        return out

    # -- ring operations --------------------------------------------------

    def _binop(self, other, sign):
        if not isinstance(other, LaurentSeries) or other.ctx is not self.ctx:
            raise TypeError("can only combine series over the same context")
        if self.mode != other.mode and "P" in (self.mode, other.mode):
            raise TypeError(f"mode mismatch: {self.mode} vs {other.mode}")
        den = max(self.den, other.den)
        vp = min(self.value_prec, other.value_prec)
        wp = vp + den
        lo = max(self._known_lo(), other._known_lo(), min(self.lo, other.lo))
        hi = min(self._known_hi(), other._known_hi(), max(self.hi, other.hi))
        if lo > hi:
            raise ValueError("empty overlap of trusted windows")
        mod = self.ctx.modulus(wp)
        a = self._grab(lo, hi, wp) * self.ctx.p ** (den - self.den) % mod
        b = other._grab(lo, hi, wp) * self.ctx.p ** (den - other.den) % mod
        return LaurentSeries(
            self.ctx, lo, (a + sign * b) % mod, wp, den, self.mode if self.mode == other.mode else "P",
            exact_below=self.exact_below and other.exact_below,
            exact_above=self.exact_above and other.exact_above,
        )

    def __add__(self, other):
        return self._binop(other, 1)

    def __sub__(self, other):
        return self._binop(other, -1)

    def __neg__(self):
        return self._with(arr=(-self.arr) % self.ctx.modulus(self.wp))

    def scalar_mul(self, c):
        """Multiply by an O_F scalar (int or coordinate tuple)."""
        mod = self.ctx.modulus(self.wp)
        if isinstance(c, int):
            return self._with(arr=self.arr * (c % mod) % mod)
        f = self.ctx.f
        A = self.arr
        full = np.zeros((len(A), 2 * f - 1), dtype=A.dtype)
        for i in range(f):
            ci = int(c[i]) % mod
            if ci:
                full[:, i : i + f] += A * ci
                full %= mod
        gt = self.ctx.g_tail_mod(self.wp)
        for k in range(2 * f - 2, f - 1, -1):
            col = full[:, k].copy()
            if col.any():
                full[:, k] = 0
                for j in range(f):
                    full[:, k - f + j] = (full[:, k - f + j] - col * gt[j]) % mod
        return self._with(arr=full[:, :f] % mod)

    def shift(self, k):
        return self._with(lo=self.lo + k)

    def sigma(self, k: int = 1):
        """Coefficientwise Frobenius; fixes pi_K."""
        if k % self.ctx.f == 0:
            return self
        M = np.array(self.ctx.unram.sigma_matrix(k), dtype=object) % self.ctx.modulus(self.wp)
        arr = (self.arr.astype(object) @ M.T) % self.ctx.modulus(self.wp)
        if self.ctx.dtype(self.wp) is np.int64:
            arr = arr.astype(np.int64)
        return self._with(arr=arr)

    def mul(self, other):
        """Series product; both factors must have exact lower tails."""
        if other.ctx is not self.ctx:
            raise TypeError("mixed contexts")
        if self.mode == "P" and other.mode == "P":
            raise TypeError("product of two denominator-mode series is not supported")
        if not (self.exact_below and other.exact_below):
            raise ValueError("product needs exact lower tails")
        vp = min(self.value_prec, other.value_prec)
        den = self.den + other.den
        wp = vp + den
        mod = self.ctx.modulus(wp)
        f = self.ctx.f
        width = len(self.arr) + len(other.arr) - 1
        dt = self.ctx.dtype(wp, width)
        A = np.asarray(self.arr, dtype=dt) % mod
        B = np.asarray(other.arr, dtype=dt) % mod
        C = np.zeros((width, 2 * f - 1), dtype=dt)
        for i in range(f):
            for j in range(f):
                C[:, i + j] += np.convolve(A[:, i], B[:, j]) % mod
        C %= mod
        gt = self.ctx.g_tail_mod(wp)
        for k in range(2 * f - 2, f - 1, -1):
            col = C[:, k].copy()
            if col.any():
                C[:, k] = 0
                for j in range(f):
                    C[:, k - f + j] = (C[:, k - f + j] - col * gt[j]) % mod
        arr = C[:, :f]
        lo = self.lo + other.lo
        hi_exact = self.hi + other.hi
        hi = hi_exact
        if not self.exact_above:
            hi = min(hi, self.hi + other.lo)
        if not other.exact_above:
            hi = min(hi, other.hi + self.lo)
        arr = arr[: hi - lo + 1] % mod
        return LaurentSeries(
            self.ctx, lo, arr, wp, den, "P" if "P" in (self.mode, other.mode) else "A",
            exact_below=True,
            exact_above=self.exact_above and other.exact_above and hi == hi_exact,
        )

    def power(self, k: int):
        if k < 0:
            return self.invert_unit().power(-k)
        out = self.ctx.one(wp=self.wp)
        base = self
        while k:
            if k & 1:
                out = out.mul(base)
            k >>= 1
            if k:
                base = base.mul(base)
        return out

    def invert_unit(self, width=None):
        """Inverse of c*pi_K^v*(1 + tail); exact lower tail required."""
        if not self.exact_below:
            raise ValueError("inversion needs an exact lower tail")
        v = self.leading_exponent()
        if v is None:
            raise ZeroDivisionError("inverting (numerically) zero series")
        c0 = self.coeff(v)
        u = self.ctx.unram
        if not u.is_unit(c0):
            raise ZeroDivisionError("leading coefficient is not a unit")
        if width is None:
            width = self.hi - v
        mod = self.ctx.modulus(self.wp)
        c0inv = tuple(x % mod for x in u.inverse(u.from_coeffs(c0)))
        norm = self.shift(-v).scalar_mul(c0inv)
        one = self.ctx.one(wp=self.wp)
        w = one - norm.truncate_above(width)
        out = self.ctx.from_terms({0: 1}, window=(0, width), wp=self.wp)
        term = one
        for _ in range(width + 1):
            term = term.mul(w).truncate_above(width)
            if not term.arr.any():
                break
            out = out + term.pad_to(0, width)
        out = out.scalar_mul(c0inv).shift(-v)
        return out._with(exact_above=False, den=self.den, mode=self.mode)

    def truncate_above(self, hi_new):
        if hi_new >= self.hi:
            return self
        return self._with(arr=self.arr[: hi_new - self.lo + 1], exact_above=False)

    def pad_to(self, lo_new, hi_new):
        lo2, hi2 = min(lo_new, self.lo), max(hi_new, self.hi)
        if (lo2, hi2) == self.window:
            return self
        if lo2 < self.lo and not self.exact_below:
            raise ValueError("cannot pad an inexact lower tail")
        if hi2 > self.hi and not self.exact_above:
            raise ValueError("cannot pad an inexact upper tail")
        return self._with(lo=lo2, arr=self._grab(lo2, hi2, self.wp))

    def restrict(self, lo_new, hi_new):
        lo2, hi2 = max(lo_new, self.lo), min(hi_new, self.hi)
        return self._with(
            lo=lo2, arr=self.arr[lo2 - self.lo : hi2 - self.lo + 1],
            exact_below=self.exact_below and lo2 == self.lo,
            exact_above=self.exact_above and hi2 == self.hi,
        )

    # -- precision plumbing ----------------------------------------------

    def lift_wp(self, wp_new):
        """Reinterpret stored numerators as exact at a higher working precision.

        Valid for exactly-constructed series (polynomials, operator outputs of
        such); the caller asserts exactness of the stored representative.
        """
        if wp_new < self.wp:
            return self.reduce_wp(wp_new)
        dt = self.ctx.dtype(wp_new, len(self.arr))
        return self._with(arr=np.asarray(self.arr, dtype=dt), wp=wp_new)

    def reduce_wp(self, wp_new):
        if wp_new >= self.wp:
            return self
        if wp_new - self.den < 0:
            raise ValueError("cannot reduce below the denominator exponent")
        return self._with(arr=self.arr % self.ctx.modulus(wp_new), wp=wp_new)

    def with_den(self, den_new):
        """Raise the denominator exponent, rescaling numerators (value fixed)."""
        if den_new < self.den:
            raise ValueError("use normalize_den to lower the denominator")
        k = den_new - self.den
        wp = self.wp + k
        dt = self.ctx.dtype(wp, len(self.arr))
        arr = np.asarray(self.arr, dtype=dt) * self.ctx.p**k % self.ctx.modulus(wp)
        return self._with(arr=arr, wp=wp, den=den_new, mode="P")

    def normalize_den(self):
        if self.den == 0:
            return self
        d, arr, wp = self.den, self.arr, self.wp
        while d > 0 and not (arr % self.ctx.p).any():
            arr = arr // self.ctx.p
            d -= 1
            wp -= 1
        return self._with(arr=arr, den=d, wp=wp, mode="P" if d else self.mode)

    def to_mode_a(self):
        s = self.normalize_den()
        if s.den != 0:
            raise ValueError("series has a genuine p-denominator")
        return s._with(mode="A")

    def to_mode_p(self):
        return self._with(mode="P")

    # -- inspection --------------------------------------------------------

    def leading_exponent(self, nu=None):
        """l_nu: least in-window exponent with p^nu not dividing the numerator."""
        pk = self.ctx.p ** (self.wp if nu is None else nu)
        nz = (self.arr % pk).any(axis=1)
        idx = np.flatnonzero(nz)
        if len(idx) == 0:
            return None
        return self.lo + int(idx[0])

    def coeff_valuation(self, i):
        c = self.coeff(i)
        return self.ctx.unram.val_p(self.ctx.unram.from_coeffs(c))

    def eq_on(self, other, lo, hi, nu=None):
        """Exact congruence of values mod p^nu on [lo, hi]."""
        diff = self - other
        if diff.lo > lo or diff.hi < hi:
            raise ValueError(
                f"trusted windows {self.window}/{other.window} do not cover [{lo},{hi}]"
            )
        nu = self.ctx.N if nu is None else nu
        pk = self.ctx.p ** (nu + diff.den)
        seg = diff.arr[lo - diff.lo : hi - diff.lo + 1]
        return not (seg % pk).any()

    def is_zero_mod(self, nu, lo=None, hi=None):
        lo = self.lo if lo is None else max(lo, self.lo)
        hi = self.hi if hi is None else min(hi, self.hi)
        seg = self.arr[lo - self.lo : hi - self.lo + 1]
        return not (seg % self.ctx.p ** (nu + self.den)).any()

    def to_json_dict(self):
        coeffs = []
        for i in range(self.lo, self.hi + 1):
            c = self.coeff(i)
            if any(c):
                coeffs.append([i, list(c)])
        return {
            "p": self.ctx.p, "f": self.ctx.f, "e": self.ctx.e, "N": self.ctx.N,
            "window": [self.lo, self.hi], "den": self.den, "mode": self.mode,
            "coeffs": coeffs,
        }

    def __repr__(self):
        return (f"LaurentSeries(window={self.window}, wp={self.wp}, den={self.den}, "
                f"mode={self.mode}, leading={self.leading_exponent()})")


def series_from_json_dict(d, ctx=None):
    if ctx is None:
        ctx = SeriesContext(d["p"], d["f"], d["e"], d["N"])
    terms = {int(i): tuple(c) for i, c in d["coeffs"]}
    return ctx.from_terms(terms, window=tuple(d["window"]), den=d.get("den", 0),
                          mode=d.get("mode", "A"))


# -- operators -------------------------------------------------------------


def phi(a: LaurentSeries) -> LaurentSeries:
    """Frobenius: sigma on coefficients, pi_K -> pi_K^p (1 + p y)^(1/e)."""
    ctx = a.ctx
    p, wp = ctx.p, a.wp
    mod = ctx.modulus(wp)
    rows = ctx.phi_rows(a.lo, a.hi, wp)
    spread = -min(off for off, _ in rows)  # e * wp-truncated tail of the root series
    lo_out = p * a.lo - spread
    hi_out = p * a.hi
    width = hi_out - lo_out + 1
    dt = ctx.dtype(wp, width)
    out = np.zeros((width, ctx.f), dtype=dt)
    sa = np.asarray(a.sigma().arr, dtype=dt)
    idx = np.arange(a.lo, a.hi + 1) * p - lo_out
    for off, vec in rows:
        out[idx + off] = (out[idx + off] + sa * np.asarray(vec, dtype=dt)[:, None]) % mod
    out %= mod
    # unknown coefficients beyond an inexact tail pollute part of the output
    lo_t, hi_t = lo_out, hi_out
    if not a.exact_above:
        hi_t = min(hi_t, p * (a.hi + 1) - spread - 1)
    if not a.exact_below:
        lo_t = max(lo_t, p * (a.lo - 1) + 1)
    if lo_t > hi_t:
        raise ValueError(f"window {a.window} leaves no trusted output for phi")
    out = out[lo_t - lo_out : hi_t - lo_out + 1]
    res = LaurentSeries(ctx, lo_t, out, wp, a.den, a.mode,
                        exact_below=a.exact_below, exact_above=a.exact_above)
    res.report = OperatorReport("phi", a.window, res.window, wp)
    return res


def half_trace(a: LaurentSeries) -> LaurentSeries:
    """p^{-1} Tr over the index-p subring: out_M = sum_n a_{M+en} C(M/e+n,n) b_{M/e+n,n}."""
    ctx = a.ctx
    e, wp = ctx.e, a.wp
    mod = ctx.modulus(wp)
    n_max = ctx.ht_n_max(wp)
    lo_out = a.lo - e * n_max if a.exact_below else a.lo
    hi_out = a.hi if a.exact_above else a.hi - e * n_max
    if hi_out < lo_out:
        raise ValueError(f"window {a.window} too small for half_trace at precision {wp}")
    T = ctx.ht_table(lo_out, hi_out, wp)
    width = hi_out - lo_out + 1
    dt = ctx.dtype(wp, width)
    src = a._grab(lo_out, hi_out + e * n_max, wp)
    src = np.asarray(src, dtype=dt)
    out = np.zeros((width, ctx.f), dtype=dt)
    for n in range(n_max + 1):
        col = np.asarray(T[:, n], dtype=dt)
        if col.any():
            out = (out + src[n * e : n * e + width] * col[:, None]) % mod
    res = LaurentSeries(ctx, lo_out, out, wp, a.den, a.mode,
                        exact_below=a.exact_below, exact_above=a.exact_above)
    res.report = OperatorReport("half_trace", a.window, res.window, wp)
    return res


def solve_phi_preimage(h: LaurentSeries, op_name="phi_preimage") -> LaurentSeries:
    """b with phi(b) = h, by back-substitution from the highest exponent.

    The leading term of phi(pi_K^m) is pi_K^{pm}; corrections sit at pm - ej
    and carry p^n.  A nonzero trusted residual after the sweep means h is
    not in the image of phi within precision.
    """
    ctx = h.ctx
    p, e, wp = ctx.p, ctx.e, h.wp
    mod = ctx.modulus(wp)
    m_top, m_bot = math.floor(h.hi / p), math.ceil(h.lo / p)
    if m_top < m_bot:
        raise ValueError(f"window {h.window} too small to invert phi")
    rows = ctx.phi_rows(m_bot, m_top, wp)
    res = h._grab(h.lo, h.hi, wp).astype(object)
    barr = np.zeros((m_top - m_bot + 1, ctx.f), dtype=object)
    sig_inv = np.array(ctx.unram.sigma_matrix(ctx.f - 1), dtype=object) % mod
    for m in range(m_top, m_bot - 1, -1):
        val = res[p * m - h.lo] % mod
        if not val.any():
            continue
        barr[m - m_bot] = (sig_inv @ val) % mod
        for off, vec in rows:
            pos = p * m + off - h.lo
            if 0 <= pos < len(res):
                res[pos] = (res[pos] - val * int(vec[m - m_bot])) % mod
    m_trust = m_top if h.exact_above else m_top - math.ceil(wp * e * (p - 1) / p)
    check_lo, check_hi = max(h.lo, p * m_bot), min(h.hi, p * m_trust)
    if check_hi >= check_lo:
        seg = res[check_lo - h.lo : check_hi - h.lo + 1] % mod
        if seg.any():
            bad = int(np.flatnonzero(seg.any(axis=1))[0]) + check_lo
            raise ArithmeticError(
                f"nonzero residual at exponent {bad}: input is not in phi's image within precision"
            )
    if m_trust < m_bot:
        raise ValueError(f"window {h.window} leaves no trusted output exponents")
    barr = barr[: m_trust - m_bot + 1] % mod
    dt = ctx.dtype(wp)
    if dt is np.int64:
        barr = barr.astype(np.int64)
    out = LaurentSeries(ctx, m_bot, barr, wp, h.den, h.mode,
                        exact_below=h.exact_below, exact_above=h.exact_above)
    out.report = OperatorReport(op_name, h.window, out.window, wp)
    return out


def psi(a: LaurentSeries) -> LaurentSeries:
    """Additive left inverse of phi: solve phi(b) = half_trace(a)."""
    h = half_trace(a)
    out = solve_phi_preimage(h, op_name="psi")
    out.report = OperatorReport("psi", a.window, out.window, a.wp)
    return out


def nabla(a: LaurentSeries) -> LaurentSeries:
    """Derivation with nabla(pi) = 1 + pi: pi_K^j -> (j/e)(pi_K^{j-e} + pi_K^j)."""
    ctx = a.ctx
    wp, e = a.wp, ctx.e
    mod = ctx.modulus(wp)
    einv = pow(e, -1, mod)
    width = len(a.arr) + e
    dt = ctx.dtype(wp, 2)
    jvec = np.arange(a.lo, a.hi + 1, dtype=object) * einv
    scaled = (a.arr.astype(object) * jvec[:, None]) % mod
    out = np.zeros((width, ctx.f), dtype=object)
    out[:-e] += scaled
    out[e:] += scaled
    out %= mod
    if dt is np.int64:
        out = out.astype(np.int64)
    # position M reads a_M and a_{M+e}: cut where a tail is unknown
    lo_t = a.lo - e if a.exact_below else a.lo
    hi_t = a.hi if a.exact_above else a.hi - e
    if lo_t > hi_t:
        raise ValueError(f"window {a.window} leaves no trusted output for nabla")
    out = out[lo_t - (a.lo - e) : hi_t - (a.lo - e) + 1]
    res = LaurentSeries(ctx, lo_t, out, wp, a.den, a.mode,
                        exact_below=a.exact_below, exact_above=a.exact_above)
    res.report = OperatorReport("nabla", a.window, res.window, wp)
    return res


# -- substitution actions (Gamma and the tame layer) -----------------------


def _binom_lift_extra(n_max: int, p: int) -> int:
    # v_p(n_max!): precision margin so C(omega, n) comes out exact mod p^wp
    extra, q = 0, p
    while q <= n_max:
        extra += n_max // q
        q *= p
    return extra


def _unit_eth_root(ctx, u, c0, wp, span):
    """(u)^(1/e) for a unit series with 1-unit scalar part c0, 1-unit branch."""
    mod = ctx.modulus(wp)
    root0 = ctx.scalar_eth_root(c0 % mod, wp)
    c0inv = pow(c0 % mod, -1, mod)
    w = u.scalar_mul(c0inv) - ctx.one(wp=wp)
    wlow = w.leading_exponent()
    if wlow is None:
        return ctx.from_terms({0: root0}, window=(0, span), wp=wp)._with(exact_above=False)
    if wlow <= 0:
        raise ValueError("series part must vanish at order 0")
    kmax = span // wlow + wp + 2
    einv_lift = pow(ctx.e, -1, ctx.p ** (wp + _binom_lift_extra(kmax, ctx.p) + 1))
    coeffs = binom_padic_table(einv_lift, kmax, ctx.p, wp)
    out = ctx.from_terms({0: 1}, window=(0, span), wp=wp)
    term = ctx.one(wp=wp)
    for k in range(1, kmax + 1):
        term = term.mul(w).truncate_above(span)
        if not term.arr.any():
            break
        out = out + term.scalar_mul(coeffs[k]).pad_to(0, span)
    return out.scalar_mul(root0)._with(exact_above=False)


def _build_power_table(ctx, U, lo, hi, span, key):
    """Slices of U^m (degree <= span) for m in [lo, hi]; cached per key."""
    have = ctx._power_tables.get(key)
    if have is not None and have[0] <= lo and have[0] + have[1].shape[0] - 1 >= hi and have[2] >= span:
        return have
    if have is not None:
        # merge ranges so alternating callers do not thrash the cache
        lo = min(lo, have[0])
        hi = max(hi, have[0] + have[1].shape[0] - 1)
        span = max(span, have[2])
    n = hi - lo + 1
    table = np.zeros((n, span + 1, ctx.f), dtype=U.arr.dtype)
    Ut = U.truncate_above(span)
    cur = ctx.one(wp=U.wp)
    for m in range(0, hi + 1):
        if m >= lo:
            table[m - lo] = cur._grab(0, span, U.wp)
        cur = cur.mul(Ut).truncate_above(span)
    if lo < 0:
        Uinv = U.invert_unit(width=span)
        cur = ctx.one(wp=U.wp)
        for m in range(-1, lo - 1, -1):
            cur = cur.mul(Uinv).truncate_above(span)
            if m <= hi:
                table[m - lo] = cur._grab(0, span, U.wp)
    entry = (lo, table, span)
    ctx._power_tables[key] = entry
    return entry


def _apply_power_table(a, entry, label):
    """sum_m a_m pi_K^m U^m using cached power slices."""
    ctx = a.ctx
    wp = a.wp
    mod = ctx.modulus(wp)
    lo_t, table, span = entry
    width = len(a.arr)
    f = ctx.f
    gt = ctx.g_tail_mod(wp)
    dt = ctx.dtype(wp, span + 1)
    out = np.zeros((width, f), dtype=dt)
    A = a.arr
    for midx in range(width):
        am = A[midx]
        if not am.any():
            continue
        take = width - midx
        us = np.asarray(table[a.lo + midx - lo_t][:take], dtype=dt) % mod
        full = np.zeros((take, 2 * f - 1), dtype=dt)
        for i in range(f):
            ci = int(am[i]) % mod
            if ci:
                full[:, i : i + f] += us * ci
                full %= mod
        for k in range(2 * f - 2, f - 1, -1):
            col = full[:, k]
            if col.any():
                for j in range(f):
                    full[:, k - f + j] = (full[:, k - f + j] - col * gt[j]) % mod
        out[midx:] = (out[midx:] + full[:, :f]) % mod
    # substitution actions produce infinite upper tails
    res = LaurentSeries(ctx, a.lo, out, wp, a.den, a.mode,
                        exact_below=a.exact_below, exact_above=False)
    res.report = OperatorReport(label, a.window, res.window, wp)
    return res


def gamma_act(a: LaurentSeries, c_lift: int) -> LaurentSeries:
    """Action of a cyclotomic-character value c: gamma(1+pi) = (1+pi)^c,
    gamma(pi_K) = pi_K U with U^e = ((1+pi)^c - 1)/pi on the 1-unit branch.

    c_lift must be a 1-unit, lifted to precision wp + slack for exact
    binomial coefficients.
    """
    ctx = a.ctx
    wp = a.wp
    if c_lift % ctx.p != 1:
        raise ValueError("gamma parameter must be a 1-unit")
    if (c_lift - 1) % ctx.modulus(wp) == 0:
        return a._with(report=OperatorReport("gamma", a.window, a.window, wp, "identity"))
    span = a.hi - a.lo
    key = ("gamma", c_lift % ctx.modulus(wp), wp)
    U = _cached_u(ctx, key, span, lambda s: _gamma_u_series(ctx, c_lift, wp, s))
    entry = _build_power_table(ctx, U, a.lo, a.hi, span, key)
    return _apply_power_table(a, entry, "gamma")


def _cached_u(ctx, key, span, builder):
    cache = getattr(ctx, "_u_cache", None)
    if cache is None:
        cache = ctx._u_cache = {}
    have = cache.get(key)
    if have is not None and have[0] >= span:
        return have[1]
    # build with the merged power-table span so the two caches stay aligned
    tab = ctx._power_tables.get(key)
    if tab is not None:
        span = max(span, tab[2])
    U = builder(span)
    cache[key] = (span, U)
    return U


def _gamma_u_series(ctx, c_lift, wp, span):
    # c_lift must be exact (an integer like 1 + p) or lifted well beyond
    # wp + v_p(kmax!); gamma_act's public entry uses exact integer lifts.
    p, e = ctx.p, ctx.e
    kmax = span // e + 2
    binoms = binom_padic_table(c_lift, kmax, p, wp)
    terms = {e * (k - 1): binoms[k] for k in range(1, kmax + 1)}
    u = ctx.from_terms(terms, window=(0, span), wp=wp)._with(exact_above=False)
    return _unit_eth_root(ctx, u, binoms[1], wp, span)


def delta_act(a: LaurentSeries, j: int = 1) -> LaurentSeries:
    """Action of the j-th power of the fixed tame generator delta0.

    delta0 moves pi by (1+pi) -> (1+pi)^omega with omega = eta0(delta0)^{pe}
    (a mu_{p-1} Teichmueller scalar) and pi_K by eta0(delta0)^p * (unit)^{1/e};
    O_F coefficients are fixed.
    """
    d = a.ctx.e * (a.ctx.p - 1)
    out = a
    for _ in range(j % d):
        out = _delta0_act(out)
    out.report = OperatorReport("delta", a.window, out.window, a.wp, f"power={j % d}")
    return out


def _delta0_act(a: LaurentSeries) -> LaurentSeries:
    ctx = a.ctx
    wp = a.wp
    span = a.hi - a.lo
    key = ("delta0", wp)
    U = _cached_u(ctx, key, span, lambda s: _delta0_u_series(ctx, wp, s))
    entry = _build_power_table(ctx, U, a.lo, a.hi, span, key)
    return _apply_power_table(a, entry, "delta0")


def _teich_scalar_lift(p, a_mod_p, bigN):
    """mu_{p-1} scalar lifted to precision bigN (Hensel on x^{p-1} = 1)."""
    m = p**bigN
    x = a_mod_p % p
    if x == 0:
        raise ValueError("zero has no Teichmueller lift in the units")
    for _ in range(bigN.bit_length() + 2):
        fx = (pow(x, p - 1, m) - 1) % m
        x = (x - fx * pow((p - 1) * pow(x, p - 2, m), -1, m)) % m
    assert pow(x, p - 1, m) == 1
    return x


def _delta0_u_series(ctx, wp, span):
    p, e = ctx.p, ctx.e
    d = e * (p - 1)
    mod = ctx.modulus(wp)
    zeta = ctx.unram.teichmuller_generator(d)
    lam = ctx.unram.reduce(ctx.unram.pow(zeta, p), wp)  # eta0(delta0)^p
    omega = ctx.unram.zp_scalar(ctx.unram.pow(zeta, p * e))  # mu_{p-1} scalar
    kmax = span // e + 2
    big = _teich_scalar_lift(p, omega % p, wp + _binom_lift_extra(kmax, p) + 1)
    binoms = binom_padic_table(big, kmax, p, wp)
    terms = {e * (k - 1): binoms[k] for k in range(1, kmax + 1)}
    u = ctx.from_terms(terms, window=(0, span), wp=wp)._with(exact_above=False)
    root = _unit_eth_root(ctx, u.scalar_mul(pow(big % mod, -1, mod)), 1, wp, span)
    return root.scalar_mul(lam)


def eta0_value(ctx, j: int = 1):
    """eta0(delta0^j) as an O_F Teichmueller value."""
    zeta = ctx.unram.teichmuller_generator(ctx.e * (ctx.p - 1))
    return ctx.unram.pow(zeta, j)


def idem_eta(a: LaurentSeries, n: int) -> LaurentSeries:
    """Projection onto the eta0^n isotypic component of the tame action."""
    return idem_orbit(a, [n], label=f"idem_eta(n={n})")


def idem_orbit(a: LaurentSeries, ns, label=None) -> LaurentSeries:
    """Sum of eta-idempotents over a set of residues mod e(p-1) (one delta sweep)."""
    ctx = a.ctx
    d = ctx.e * (ctx.p - 1)
    wp = a.wp
    mod = ctx.modulus(wp)
    gen = ctx.unram.teichmuller_generator(d)
    acc, cur = None, a
    for j in range(d):
        w = ctx.unram.zero()
        for n in ns:
            w = ctx.unram.add(w, ctx.unram.pow(gen, (-j * n) % d))
        piece = cur.scalar_mul(ctx.unram.reduce(w, wp))
        acc = piece if acc is None else acc + piece
        if j < d - 1:
            cur = _delta0_act(cur)
    out = acc.scalar_mul(pow(d, -1, mod))
    out.report = OperatorReport(label or f"idem_orbit({sorted(set(int(n) % d for n in ns))})",
                                a.window, out.window, wp)
    return out


# -- logarithms, exponentials, norm ----------------------------------------


def _vp_int(k: int, p: int) -> int:
    v = 0
    while k % p == 0:
        v += 1
        k //= p
    return v


def nabla_log(u: LaurentSeries) -> LaurentSeries:
    """nabla(u)/u for a unit series (exact lower tail required)."""
    out = nabla(u).mul(u.invert_unit())
    out.report = OperatorReport("nabla_log", u.window, out.window, u.wp)
    return out


def log_series(u: LaurentSeries, den=None) -> LaurentSeries:
    """log of a unit power series with constant term = 1 mod p.

    Output is denominator-mode with n*a_n integral; the computation runs at
    working precision N + den on the stored representative.
    """
    ctx = u.ctx
    if u.lo < 0 or not u.exact_below:
        raise ValueError("log needs a power series with exact lower tail")
    c0 = u.coeff(0)
    if (c0[0] - 1) % ctx.p or any(x % ctx.p for x in c0[1:]):
        raise ValueError("log needs constant term congruent to 1 mod p")
    den = ctx.den_budget if den is None else den
    wp = ctx.N + den
    mod = ctx.modulus(wp)
    hi = u.hi
    s = u.lift_wp(wp) - ctx.one(wp=wp)
    out = ctx.zero(window=(0, hi), wp=wp)._with(den=den, mode="P")
    term = ctx.one(wp=wp)
    sign = 1
    for k in range(1, hi + 2 * wp + 2):
        term = term.mul(s).truncate_above(hi)
        if not term.arr.any():
            break
        v = _vp_int(k, ctx.p)
        if v > den:
            raise ArithmeticError("denominator budget exceeded in log")
        kunit = k // ctx.p**v
        c = sign * ctx.p ** (den - v) * pow(kunit, -1, mod) % mod
        piece = term.scalar_mul(c).pad_to(0, hi)._with(den=den, mode="P")
        out = out + piece
        sign = -sign
    out = out.normalize_den()
    out.report = OperatorReport("log", u.window, out.window, wp)
    return out


def exp_series(x: LaurentSeries) -> LaurentSeries:
    """exp of a series in p*O_F[[pi_K]]; integral output mod p^N."""
    ctx = x.ctx
    xa = x.normalize_den() if x.mode == "P" else x
    if xa.den != 0:
        raise ValueError("exp input must be integral")
    if xa.lo < 0 or not xa.exact_below:
        raise ValueError("exp needs a power series input")
    if xa.lo <= 0 <= xa.hi and any(v % ctx.p for v in xa.coeff(0)):
        raise ValueError("exp needs constant term divisible by p")
    hi = xa.hi
    big = ctx.N + ctx.den_budget
    mod_big = ctx.modulus(big)
    xb = xa.lift_wp(big)
    out = ctx.from_terms({0: 1}, window=(0, hi), wp=ctx.N)
    term = ctx.one(wp=big)
    kv, ku = 0, 1
    for k in range(1, hi + 2 * big + 2):
        term = term.mul(xb).truncate_above(hi)
        kk = k
        while kk % ctx.p == 0:
            kv += 1
            kk //= ctx.p
        ku = ku * kk % mod_big
        if not term.arr.any():
            break
        if kv > ctx.den_budget:
            raise ArithmeticError("exp denominator exceeded the budget")
        ta = term.arr.astype(object) % mod_big
        if (ta % ctx.p**kv).any():
            raise ArithmeticError("exp term is not integral")
        contrib = (ta // ctx.p**kv) * pow(ku, -1, mod_big) % ctx.modulus(ctx.N)
        dt = ctx.dtype(ctx.N)
        piece = LaurentSeries(ctx, term.lo, contrib.astype(np.int64) if dt is np.int64 else contrib,
                              ctx.N, 0, "A", exact_above=False)
        out = out + piece.pad_to(0, hi)
    out.report = OperatorReport("exp", x.window, out.window, ctx.N)
    return out


def norm_operator(a: LaurentSeries) -> LaurentSeries:
    """Multiplicative norm (e = 1 only): phi^{-1} prod_{zeta in mu_p} a((1+pi)zeta - 1).

    Supports a = pi^j * w with w a unit power series; the pi^j part
    contributes pi^j exactly since prod_zeta ((1+pi)zeta - 1) = phi(pi).
    """
    ctx = a.ctx
    if ctx.e != 1:
        raise NotImplementedError("the norm operator is only provided for e = 1")
    from .eisenstein import make_cyclotomic_plain

    j = a.leading_exponent()
    w = a.shift(-j)
    if not w.exact_below or w.lo != 0:
        raise ValueError("norm needs pi^j * (unit power series)")
    p, wp = ctx.p, a.wp
    mod = ctx.modulus(wp)
    cyc = make_cyclotomic_plain(ctx.unram)
    hi = w.hi
    # exact polynomial input: keep the full conjugate product (degree p*hi)
    cap = p * hi if w.exact_above else hi
    tmax = wp * (p - 1) + p
    comb_rows = [[1] * (tmax + 1)]
    for k in range(1, cap + 1):
        prev = comb_rows[-1]
        row = [1] * (tmax + 1)
        for t in range(1, tmax + 1):
            row[t] = (row[t - 1] + prev[t]) % mod
        comb_rows.append(row)
    prod = None
    for i in range(p):
        zc = cyc.x(i) if i else cyc.one()
        zm1 = zc - cyc.one()
        zpow = [cyc.one()]
        for _ in range(tmax):
            zpow.append(zpow[-1] * zm1)
        conj = []
        zk = cyc.one()
        for k in range(min(cap, hi) + 1):
            acc = cyc.zero()
            for t in range(tmax + 1):
                if k + t > hi:
                    break
                ck = ctx.unram.reduce(w.coeff(k + t), wp)
                if any(ck):
                    acc = acc + zpow[t].scalar_mul(comb_rows[k][t]) * cyc.from_unram(ck)
            conj.append(acc * zk)
            zk = zk * zc
        prod = [cyc.one()] if prod is None else prod
        prod = _cyc_series_mul(cyc, prod, conj, cap)
    terms = {}
    for k, c in enumerate(prod):
        carr = np.asarray(c.arr) % mod
        if carr[1:].any():
            raise ArithmeticError("norm product did not descend to O_F")
        terms[k] = tuple(int(v) for v in carr[0])
    hseries = ctx.from_terms(terms, window=(0, cap), wp=wp)
    if not w.exact_above:
        hseries = hseries._with(exact_above=False)
    out = solve_phi_preimage(hseries, op_name="norm").shift(j)
    out.report = OperatorReport("norm", a.window, out.window, wp)
    return out


def _cyc_series_mul(cyc, A, B, hi):
    out = [cyc.zero() for _ in range(hi + 1)]
    for i, ai in enumerate(A):
        if ai.is_zero():
            continue
        for jj, bj in enumerate(B):
            if i + jj > hi:
                break
            if not bj.is_zero():
                out[i + jj] = out[i + jj] + ai * bj
    return out
