"""Tame Galois-module computations: periods, resolvents, eigenspaces of the
inverse different, and the per-character unit statement at valuation level.

The tame field is K = F(w), w^e = p0 with p0 = (unit in mu_{p-1}) * p, p
prime to e*f.  The group G = Sigma x| Delta acts by delta(w) = eta0(delta) w
(eta0 an order-e Teichmueller character), sigma = Frobenius on O_F fixing w;
conjugation satisfies sigma delta sigma^{-1} = delta^p automatically.

Fractional-ideal elements are carried as pairs z/w^s with exact cross-
multiplied comparisons; fractional valuations are exact rationals with
denominator dividing e (never floated).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .padic import frac_part
from .towers import UnramContext
from .eisenstein import EisRing, RamElem, make_kummer
from .gauss import GaussContext, character_exponent, gauss_sum, m_eta_valuation, sigma_orbit


@dataclass(frozen=True)
class Shifted:
    """z / w^shift for z in the Kummer ring."""

    z: RamElem
    shift: int

    def __mul__(self, other):
        if isinstance(other, Shifted):
            return Shifted(self.z * other.z, self.shift + other.shift)
        return Shifted(self.z * other, self.shift)

    def __add__(self, other):
        s = max(self.shift, other.shift)
        return Shifted(
            self.z.mul_xpow(s - self.shift) + other.z.mul_xpow(s - other.shift), s
        )

    def __sub__(self, other):
        s = max(self.shift, other.shift)
        return Shifted(
            self.z.mul_xpow(s - self.shift) - other.z.mul_xpow(s - other.shift), s
        )

    def scalar_mul(self, c):
        if isinstance(c, tuple):
            return Shifted(self.z * self.z.ring.from_unram(c), self.shift)
        return Shifted(self.z.scalar_mul(c), self.shift)

    def val_w(self):
        v = self.z.val()
        if isinstance(v, int):
            return v - self.shift
        return v  # AtLeast: exhausted

    def val_p(self, e: int):
        v = self.val_w()
        if not isinstance(v, int):
            return v
        return Fraction(v, e)

    def eq(self, other, w_prec=None):
        d = self - other
        bound = w_prec if w_prec is not None else d.z.prec
        return d.z.val_at_least(min(bound, d.z.prec))


class TameField:
    """F(w)/Q_p with w^e = p0_unit * p; carries the G-action and resolvents."""

    def __init__(self, p: int, f: int, e: int, N: int, p0_unit: int = -1):
        if e % p == 0 or f % p == 0:
            raise ValueError("p must not divide e*f (tame hypothesis)")
        self.p, self.f, self.e, self.N = p, f, e, N
        self.unram = UnramContext(p, f, N)
        q = p**f
        if (q - 1) % e:
            raise ValueError(f"e = {e} does not divide q - 1 = {q - 1}")
        self.ring = make_kummer(self.unram, e, p0_unit)
        self.zeta_e = self.unram.teichmuller_generator(e) if e > 1 else self.unram.one()
        if f > 1:
            if (q - 1) % f:
                raise ValueError(f"f = {f} does not divide q - 1; Sigma-characters leave O_F")
            self.zeta_f = self.unram.teichmuller_generator(f)
        else:
            self.zeta_f = self.unram.one()

    # -- the G-action -----------------------------------------------------

    def delta(self, z: RamElem, j: int = 1) -> RamElem:
        """delta^j: w -> zeta_e^j w, coefficients fixed."""
        u = self.unram
        rows = []
        for k in range(self.ring.d):
            c = tuple(int(v) for v in z.arr[k])
            rows.append(u.mul(u.pow(self.zeta_e, (j * k) % self.e or 0), u.from_coeffs(c))
                        if j * k % self.e else u.from_coeffs(c))
        return self.ring.from_rows(rows, prec=z.prec)

    def delta_shifted(self, s: Shifted, j: int = 1) -> Shifted:
        zj = self.delta(s.z, j)
        u = self.unram
        tw = u.pow(self.zeta_e, (-j * s.shift) % self.e) if (j * s.shift) % self.e else None
        out = Shifted(zj, s.shift)
        if tw is not None:
            out = out.scalar_mul(tw)
        return out

    def sigma(self, z: RamElem, k: int = 1) -> RamElem:
        return self.ring.frobenius(z, k)

    def sigma_shifted(self, s: Shifted, k: int = 1) -> Shifted:
        return Shifted(self.sigma(s.z, k), s.shift)

    def check_semidirect(self, z: RamElem) -> bool:
        """sigma delta sigma^{-1} = delta^p on a sample element."""
        lhs = self.sigma(self.delta(self.sigma(z, self.f - 1)))
        rhs = self.delta(z, self.p)
        return (lhs - rhs).is_zero()

    # -- the Sigma-fixed Delta-basis of the inverse different -------------

    def x_element(self) -> Shifted:
        """x = sum_{j=0}^{e-1} w^{-j}; Sigma-fixed, eigenprojections w^{-j}."""
        acc = self.ring.zero()
        for i in range(self.e):
            acc = acc + self.ring.x(self.e - 1 - i)
        return Shifted(acc, self.e - 1)

    def eigenprojection(self, s: Shifted, j: int) -> Shifted:
        """(1/e) sum_delta eta0^{j}(delta) delta(s): the eta0^{-j}-component."""
        u = self.unram
        acc = None
        for t in range(self.e):
            term = self.delta_shifted(s, t).scalar_mul(u.pow(self.zeta_e, (j * t) % self.e))
            acc = term if acc is None else acc + term
        return acc.scalar_mul(pow(self.e, -1, self.ring.modulus))

    def normal_basis_candidates(self, count: int = 3):
        """Deterministic O_F elements whose Frobenius orbit is a Z_p-basis."""
        u = self.unram
        out = []
        code = 1
        while len(out) < count and code < self.p ** (2 * self.f):
            coeffs = []
            c = code
            for _ in range(self.f):
                coeffs.append(c % self.p)
                c //= self.p
            xi = u.from_coeffs(coeffs)
            if self.is_normal_basis(xi):
                out.append(xi)
            code += 1
        if len(out) < count:
            raise RuntimeError("not enough normal basis elements found")
        return out

    def is_normal_basis(self, xi) -> bool:
        u = self.unram
        rows = [list(u.frobenius(xi, k)) for k in range(self.f)]
        return _unit_det_mod_p(rows, self.p)

    # -- resolvent factors -------------------------------------------------

    def delta_sum(self, s: Shifted, m_exp: int) -> Shifted:
        """sum_delta delta(s) * (eta_0^{m_exp})(delta)^{-1} = e * (projection)."""
        u = self.unram
        acc = None
        for j in range(self.e):
            term = self.delta_shifted(s, j).scalar_mul(u.pow(self.zeta_e, (-m_exp * j) % self.e))
            acc = term if acc is None else acc + term
        return acc

    def x_eta(self, m: int) -> Shifted:
        """prod_{t < f_eta} sum_delta delta(x) eta^{p^t}(delta)^{-1} for eta = eta0^m."""
        x = self.x_element()
        orb = sigma_orbit(m, self.e, self.p)
        out = None
        for t in range(len(orb)):
            factor = self.delta_sum(x, (m * self.p**t) % self.e)
            out = factor if out is None else out * factor
        return out

    def x_eta_valuation_expected(self, m: int) -> Fraction:
        orb = sigma_orbit(m, self.e, self.p)
        out = Fraction(0)
        for t in range(len(orb)):
            out -= frac_part(Fraction(-(m * self.p**t), self.e))
        return out

    def xi_kappa_factor(self, xi, a: int):
        """sum_s sigma^s(xi) kappa_a(sigma)^{-s} in O_F, kappa_a(sigma) = zeta_f^a."""
        u = self.unram
        acc = u.zero()
        for s in range(self.f):
            term = u.mul(u.frobenius(xi, s), u.pow(self.zeta_f, (-a * s) % self.f))
            acc = u.add(acc, term)
        return acc

    def xi_eta_prime(self, xi, f_eta: int, c: int):
        """prod over the f_eta characters kappa of Sigma restricting to eta'_c."""
        u = self.unram
        step = self.f // f_eta
        acc = u.one()
        for t in range(f_eta):
            acc = u.mul(acc, self.xi_kappa_factor(xi, (c + t * step) % self.f))
        return acc

    def per_block_det(self, xi, m: int, c: int) -> Shifted:
        """Determinant of the induced-character resolvent block matrix.

        Entry (s, t): sum over g = delta_j sigma^{f_eta u} of
        (sigma^{-t} g sigma^{s})(b) * (eta' eta)(g)^{-1}, with b = xi * x.
        """
        u = self.unram
        orb = sigma_orbit(m, self.e, self.p)
        f_eta = len(orb)
        n_up = self.f // f_eta
        b = self.x_element().scalar_mul(xi)
        entries = {}
        for s in range(f_eta):
            for t in range(f_eta):
                acc = None
                for j in range(self.e):
                    for uu in range(n_up):
                        g_b = self.sigma_shifted(
                            self.delta_shifted(self.sigma_shifted(b, (f_eta * uu + s) % self.f), j),
                            (-t) % self.f,
                        )
                        chi_inv = u.mul(
                            u.pow(self.zeta_e, (-m * j) % self.e),
                            u.pow(self.zeta_f, (-c * f_eta * uu) % self.f),
                        )
                        term = g_b.scalar_mul(chi_inv)
                        acc = term if acc is None else acc + term
                entries[(s, t)] = acc
        if f_eta == 1:
            return entries[(0, 0)]
        if f_eta == 2:
            return entries[(0, 0)] * entries[(1, 1)] - entries[(0, 1)] * entries[(1, 0)]
        raise NotImplementedError("block determinants implemented for f_eta <= 2")

    # -- the unit statement at valuation level -----------------------------

    def froehlich_rows(self, xi):
        """Per-character valuation data for the product of the twisted local
        constant with the resolvent: v_p(tau) + v_p(x_eta) must vanish and
        v_p(xi_{eta'}) must vanish, for every character.
        """
        rows = []
        seen = set()
        u = self.unram
        for m in range(self.e):
            orb = sigma_orbit(m, self.e, self.p)
            if orb[0] in seen:
                continue
            seen.update(orb)
            f_eta = len(orb)
            xe = self.x_eta(m)
            v_xeta = xe.val_p(self.e)
            if not isinstance(v_xeta, Fraction):
                v_xeta = Fraction(v_xeta) if isinstance(v_xeta, int) else None
            if m == 0:
                v_tau = Fraction(0)
            else:
                gctx = GaussContext(self.p, f_eta, self.N)
                i = character_exponent(self.e, (-m) % self.e, gctx.q)
                v_tau = gauss_sum(gctx, i).valuation
            for c in range(self.f // f_eta):
                xi_val = self.xi_eta_prime(xi, f_eta, c)
                rows.append({
                    "orbit": orb,
                    "eta_prime": c,
                    "f_eta": f_eta,
                    "v_x_eta": v_xeta,
                    "v_x_eta_expected": self.x_eta_valuation_expected(m),
                    "v_tau": v_tau,
                    "xi_unit": u.is_unit(xi_val),
                    "sum_zero": (m == 0 and v_xeta == 0) or (v_tau + v_xeta == 0),
                })
        return rows

    def inverse_different_basis_check(self, xi) -> dict:
        """b = xi*x generates the inverse different over Z_p[G]: every
        Delta-eigenprojection of x is a unit multiple of w^{-j} and xi is a
        normal basis element."""
        x = self.x_element()
        proj_ok = True
        for j in range(self.e):
            pj = self.eigenprojection(x, j)
            want = Shifted(self.ring.x((self.e - j) % self.e if j else 0), self.e if j else 0)
            # compare against w^{-j}: w^{e-j}/w^e for j > 0, 1 for j = 0
            if j == 0:
                want = Shifted(self.ring.one(), 0)
            diff_ok = pj.eq(want, w_prec=self.ring.full_prec - self.e)
            proj_ok = proj_ok and diff_ok
        return {"projections": proj_ok, "normal_basis": self.is_normal_basis(xi),
                "sigma_fixed": (self.sigma(x.z) - x.z).is_zero()}


def _unit_det_mod_p(rows, p):
    n = len(rows)
    M = [[x % p for x in row] for row in rows]
    det = 1
    for col in range(n):
        piv = None
        for r in range(col, n):
            if M[r][col] % p:
                piv = r
                break
        if piv is None:
            return False
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det = det * M[col][col] % p
        inv = pow(M[col][col], -1, p)
        for r in range(col + 1, n):
            s = M[r][col] * inv % p
            if s:
                M[r] = [(a - s * b) % p for a, b in zip(M[r], M[col])]
    return det % p != 0


# -- the augmentation-ideal generator ---------------------------------------


class GroupRingGamma:
    """(Z/p^N)[Sigma][gamma] / ((gamma-1)^M), Sigma cyclic of order f.

    Elements are (M, f) integer arrays: entry [k, s] is the coefficient of
    (gamma-1)^k sigma^s.
    """

    def __init__(self, p: int, f: int, N: int, M: int):
        self.p, self.f, self.N, self.M = p, f, N, M
        self.mod = p**N

    def zero(self):
        return np.zeros((self.M, self.f), dtype=object)

    def one(self):
        z = self.zero()
        z[0, 0] = 1
        return z

    def sigma(self, k: int = 1):
        z = self.zero()
        z[0, k % self.f] = 1
        return z

    def gamma_minus_1(self):
        z = self.zero()
        if self.M > 1:
            z[1, 0] = 1
        return z

    def e1(self):
        z = self.zero()
        finv = pow(self.f, -1, self.mod)
        for s in range(self.f):
            z[0, s] = finv
        return z

    def mul(self, a, b):
        out = self.zero()
        for k1 in range(self.M):
            if not a[k1].any():
                continue
            for k2 in range(self.M - k1):
                if not b[k2].any():
                    continue
                for s1 in range(self.f):
                    if a[k1, s1]:
                        for s2 in range(self.f):
                            if b[k2, s2]:
                                out[k1 + k2, (s1 + s2) % self.f] += a[k1, s1] * b[k2, s2]
        return out % self.mod

    def add(self, a, b):
        return (a + b) % self.mod

    def sub(self, a, b):
        return (a - b) % self.mod

    def eq(self, a, b):
        return not ((a - b) % self.mod).any()


def principal_generator_check(p: int, f: int, N: int, M: int) -> dict:
    """Verify both factorizations exhibiting (1-e1) + (gamma-1)e1 as a
    generator of the ideal (sigma-1, gamma-1), by ring multiplication in the
    truncated quotient."""
    if f % p == 0:
        raise ValueError("p must not divide f")
    R = GroupRingGamma(p, f, N, M)
    e1 = R.e1()
    one = R.one()
    sig = R.sigma()
    g1 = R.gamma_minus_1()
    gen = R.add(R.sub(one, e1), R.mul(g1, e1))
    sig_minus_1 = R.sub(sig, one)
    lhs1 = R.mul(R.mul(sig_minus_1, R.sub(one, e1)), gen)
    ok1 = R.eq(lhs1, sig_minus_1)
    lhs2 = R.mul(R.add(R.mul(g1, R.sub(one, e1)), e1), gen)
    ok2 = R.eq(lhs2, g1)
    idem = R.eq(R.mul(e1, e1), e1)
    return {"sigma_factorization": ok1, "gamma_factorization": ok2,
            "idempotent": idem, "ok": ok1 and ok2 and idem}
