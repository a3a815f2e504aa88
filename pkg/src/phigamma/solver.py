"""The psi-fixed-point coefficient system on windowed Laurent series.

An integral series a = sum a_i pi_K^i satisfies psi(a) = a exactly when,
for every integer index M,

    sum_n a_{M+en} C(M/e+n, n) b_{M/e+n, n}
        = sum_{n <= j <= n(p-1), p | M+ej} sigma(a)_{(M+ej)/p} C((M+ej)/pe, n) beta_{n,j} p^n,

and it suffices to check indices M in pZ.  Mod p the system collapses to

    sum_{n=0}^{p-1} a_{kp+ne} (-1)^n = sigma(a)_k.

The equation with index k contains the coefficient a_{kp+e(p-1)} with unit
weight, and that position occurs in no equation of smaller index; the
system is therefore triangular and solvable by a forward sweep adjusting
those pivot coefficients, with prescribed constraints checked where they
collide with a pivot.  Every windowed solution extends to a full solution
by the same pivot argument, so window-verified witnesses are genuine
truncations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .padic import binom_rat, embed_rational
from .laurent import (
    LaurentSeries,
    SeriesContext,
    b_coeff,
    b_coeff_closed,
    beta_table,
    half_trace,
    idem_orbit,
    nabla_log,
    phi,
)


class Infeasible(ValueError):
    """No psi-fixed element with the requested leading data exists."""


def feasible_leading(ctx: SeriesContext, n: int, c) -> tuple[bool, str]:
    """Closed-form feasibility of leading exponent n with coefficient c.

    Allowed: n = -e with c in the prime field, or n > -e with n not
    congruent to -e mod p (any c in the residue field).
    """
    e, p = ctx.e, ctx.p
    if n < -e:
        return False, f"leading exponent {n} below -e = {-e}"
    if n == -e:
        cc = c if isinstance(c, tuple) else (c,)
        if any(x % p for x in cc[1:]):
            return False, "leading coefficient at -e must lie in the prime field"
        return True, ""
    if (n + e) % p == 0:
        return False, f"leading exponent {n} is congruent to -e mod p"
    return True, ""


@dataclass
class ResidualReport:
    nu: int
    k_range: tuple
    ok: bool
    ok_all_indices: bool
    first_bad: int | None = None


@dataclass
class PsiWitness:
    """A windowed series with verified psi-fixed residuals.

    nu is the verified precision: all coefficient-system residuals vanish
    mod p^nu over the checkable index range recorded in report.
    """

    series: LaurentSeries
    nu: int
    report: ResidualReport
    meta: dict = field(default_factory=dict)

    @property
    def l(self):
        return self.series.leading_exponent(1)

    def l_nu(self, nu):
        return self.series.leading_exponent(nu)


def default_window(ctx: SeriesContext, nu: int, top_exponent=None):
    e, p = ctx.e, ctx.p
    if top_exponent is None:
        top_exponent = 2 * e * (p - 1)
    return (-3 * e * p, nu * 2 * e * (p - 1) + top_exponent + e * (p - 1))


class PsiFixedSystem:
    """Coefficient system evaluator and triangular solver on a fixed window."""

    def __init__(self, ctx: SeriesContext, window=None):
        self.ctx = ctx
        self.window = window or default_window(ctx, ctx.N)
        self._coef_cache = {}

    # -- single-coefficient residual -----------------------------------

    def _lhs_coef(self, M: int, n: int, wp: int) -> int:
        key = ("L", M, n, wp)
        v = self._coef_cache.get(key)
        if v is None:
            ctx = self.ctx
            c = binom_rat(Fraction(M, ctx.e) + n, n)
            b = b_coeff(ctx.p, (M * pow(ctx.e, -1, ctx.p) + n) % ctx.p, n)
            v = embed_rational(c, ctx.p, wp) * b % ctx.modulus(wp)
            self._coef_cache[key] = v
        return v

    def _rhs_terms(self, M: int, wp: int):
        """[(source position, weight)] for the phi side at index M."""
        key = ("R", M, wp)
        v = self._coef_cache.get(key)
        if v is None:
            ctx = self.ctx
            p, e = ctx.p, ctx.e
            mod = ctx.modulus(wp)
            out = []
            for n in range(wp):
                pn = p**n
                j0 = (-M * pow(e, -1, p)) % p
                j = j0 if j0 >= n else j0 + ((n - j0 + p - 1) // p) * p
                while j <= n * (p - 1):
                    if n == 0 and j != 0:
                        break
                    src = (M + j * e) // p
                    w = embed_rational(binom_rat(Fraction(M + j * e, p * e), n), p, wp)
                    w = w * (ctx.beta(n, j) % mod) * pn % mod
                    if w:
                        out.append((src, w))
                    if n == 0:
                        break
                    j += p
            v = out
            self._coef_cache[key] = v
        return v

    def residual_at(self, coeffs: dict, M: int, nu: int) -> tuple:
        """Residual coefficient (O_F tuple mod p^nu) of the system at index M."""
        ctx = self.ctx
        u = ctx.unram
        mod = ctx.p**nu
        n_max = ctx.ht_n_max(nu)
        acc = u.zero()
        for n in range(n_max + 1):
            a = coeffs.get(M + ctx.e * n)
            if a is None:
                continue
            w = self._lhs_coef(M, n, nu)
            if w:
                acc = u.add(acc, u.scalar_mul(w, a))
        for src, w in self._rhs_terms(M, nu):
            a = coeffs.get(src)
            if a is not None:
                acc = u.sub(acc, u.scalar_mul(w, u.frobenius(a)))
        return tuple(x % mod for x in acc)

    # -- triangular sweep ------------------------------------------------

    def k_range(self, nu: int):
        lo, hi = self.window
        p, e = self.ctx.p, self.ctx.e
        k_lo = lo  # deep equations only constrain via the sigma-side position
        k_hi = math.floor((hi - e * nu * (p - 1)) / p)
        return k_lo, k_hi

    def solve(self, nu: int, preset: dict, rhs: dict | None = None) -> dict:
        """Forward sweep over equation indices k (ascending).

        For k > -e the fresh variable of equation k is a_{kp+e(p-1)} (it
        occurs in no earlier equation); for k <= -e it is the sigma-side
        coefficient a_k itself (positions below -e never occur on the
        low side of earlier equations).  preset maps positions to required
        O_F values; rhs maps equation indices to target residuals.
        Infeasible is raised when an equation's fresh variable is preset
        and the equation cannot hold.
        """
        ctx = self.ctx
        u = ctx.unram
        p, e = ctx.p, ctx.e
        mod = p**nu
        coeffs = {i: (v if isinstance(v, tuple) else u.from_int(v)) for i, v in preset.items()}
        coeffs = {i: tuple(x % mod for x in v) for i, v in coeffs.items()}
        preset_pos = set(coeffs)
        k_lo, k_hi = self.k_range(nu)
        lo_w, hi_w = self.window
        for k in range(k_lo, k_hi + 1):
            target = rhs.get(k, u.zero()) if rhs else u.zero()
            r = u.sub(self.residual_at(coeffs, k * p, nu), tuple(x % mod for x in target))
            r = tuple(x % mod for x in r)
            if not any(r):
                continue
            sigma_side = k <= -e
            pivot = k if sigma_side else k * p + e * (p - 1)
            if pivot in preset_pos or not lo_w <= pivot <= hi_w:
                raise Infeasible(
                    f"equation at index {k} is inconsistent with the prescribed coefficient at {pivot}"
                )
            if sigma_side:
                # residual depends on a_k through -sigma(a_k) (+ p-divisible terms)
                step = u.frobenius(r, ctx.f - 1)
            else:
                w = self._lhs_coef(k * p, p - 1, nu)
                if w % p == 0:
                    raise ArithmeticError("pivot weight is not a unit")
                step = u.scalar_mul(pow(w, -1, mod), u.neg(r))
            x = u.add(coeffs.get(pivot, u.zero()), step)
            for _ in range(nu + 1):
                coeffs[pivot] = tuple(v % mod for v in x)
                r2 = u.sub(self.residual_at(coeffs, k * p, nu), tuple(t % mod for t in target))
                if not any(t % mod for t in r2):
                    break
                if sigma_side:
                    x = u.add(x, u.frobenius(r2, ctx.f - 1))
                else:
                    x = u.sub(x, u.scalar_mul(pow(w, -1, mod), r2))
            else:
                raise ArithmeticError("pivot adjustment did not converge")
        return coeffs

    def to_series(self, coeffs: dict, wp=None) -> LaurentSeries:
        lo, hi = self.window
        terms = {i: v for i, v in coeffs.items() if lo <= i <= hi and any(v)}
        return self.ctx.from_terms(terms, window=self.window, wp=wp or self.ctx.N)._with(
            exact_above=False
        )


# -- membership checking ----------------------------------------------------


def residual_series(a: LaurentSeries):
    """half_trace(a) - phi(a); identically zero mod p^nu iff a is psi-fixed mod p^nu."""
    return half_trace(a) - phi(a)


def check_psi_fixed(a: LaurentSeries, nu: int) -> ResidualReport:
    """Verify the coefficient system mod p^nu over all checkable indices.

    Reports both the full index check and the index-in-pZ reduction; the
    two agree for solutions (the general index follows from the pZ ones).
    """
    ctx = a.ctx
    if nu > a.value_prec:
        raise ValueError(f"series precision {a.value_prec} below requested nu={nu}")
    r = residual_series(a)
    lo, hi = r.lo, r.hi
    p = ctx.p
    ok_all = r.is_zero_mod(nu)
    k_lo, k_hi = math.ceil(lo / p), math.floor(hi / p)
    ok_pz = True
    first_bad = None
    for k in range(k_lo, k_hi + 1):
        if any(v % p**nu for v in r.coeff(k * p)):
            ok_pz = False
            first_bad = k * p
            break
    if ok_pz and not ok_all:
        seg = np.flatnonzero((r.arr % p**nu).any(axis=1))
        first_bad = int(seg[0]) + r.lo if len(seg) else None
    return ResidualReport(nu=nu, k_range=(k_lo, k_hi), ok=ok_pz and ok_all,
                          ok_all_indices=ok_all, first_bad=first_bad)


# -- witness construction ----------------------------------------------------


class PsiSolver:
    """Constructive witnesses mod p^nu with prescribed leading data."""

    def __init__(self, ctx: SeriesContext, window=None):
        self.ctx = ctx
        self.window = window or default_window(ctx, ctx.N)
        self.system = PsiFixedSystem(ctx, self.window)

    def _leading_preset(self, n: int, c):
        ctx = self.ctx
        ok, why = feasible_leading(ctx, n, c)
        if not ok:
            raise Infeasible(why)
        cc = c if isinstance(c, tuple) else ctx.unram.from_int(c)
        preset = {i: ctx.unram.zero() for i in range(self.window[0], n)}
        preset[n] = cc
        return preset

    def solve_mod_p(self, n: int, c, verify=True) -> PsiWitness:
        """Witness with l(a) = n and leading coefficient c, residuals 0 mod p."""
        coeffs = self.system.solve(1, self._leading_preset(n, c))
        s = self.system.to_series(coeffs)
        w = PsiWitness(series=s, nu=1, report=None, meta={"l": n})
        if verify:
            w.report = check_psi_fixed(s, 1)
            if not w.report.ok:
                raise ArithmeticError("triangular mod-p solution failed independent verification")
            if s.leading_exponent(1) != n:
                raise ArithmeticError("constructed witness has the wrong leading exponent")
        return w

    def nabla_log_witness(self, n: int, c) -> PsiWitness:
        """Constructive mod-p witness nabla_log(1 + c' pi_K^{n+e}) (p does not divide n+e)."""
        ctx = self.ctx
        e, p = ctx.e, ctx.p
        m = n + e
        if m <= 0 or m % p == 0:
            raise Infeasible(f"no logarithmic-derivative witness at leading exponent {n}")
        mod = ctx.modulus(ctx.N)
        cc = c if isinstance(c, tuple) else ctx.unram.from_int(c)
        chat = ctx.unram.scalar_mul(e * pow(m, -1, mod), cc)
        u = ctx.from_terms({0: 1, m: ctx.unram.reduce(chat, ctx.N)},
                           window=(0, self.window[1] + e))
        s = nabla_log(u).restrict(*self.window)
        rep = check_psi_fixed(s, 1)
        if not rep.ok:
            raise ArithmeticError("logarithmic-derivative witness failed the mod-p check")
        return PsiWitness(series=s, nu=1, report=rep, meta={"l": n, "path": "nabla_log"})

    # -- lifting ----------------------------------------------------------

    def lift(self, w: PsiWitness, nu_target: int, orbit=None) -> PsiWitness:
        """Raise verified precision one level at a time: a += p^nu * b where b
        solves the mod-p system against -residual/p^nu.  Linearity of the
        system makes each step exact; an isotypic orbit, when given, keeps
        corrections in the same component."""
        ctx = self.ctx
        if nu_target > ctx.N:
            raise ValueError("cannot verify beyond the ring precision N")
        a = w.series
        nu = w.nu
        while nu < nu_target:
            r = residual_series(a)
            rhs = {}
            k_lo, k_hi = self.system.k_range(nu + 1)
            for k in range(k_lo, k_hi + 1):
                if r.lo <= k * ctx.p <= r.hi:
                    v = r.coeff(k * ctx.p)
                    if any(x % ctx.p ** (nu + 1) for x in v):
                        if any(x % ctx.p**nu for x in v):
                            raise ArithmeticError("residual is not divisible by the verified level")
                        rhs[k] = tuple((x // ctx.p**nu) % ctx.p for x in v)
            if rhs:
                bco = self.system.solve(1, {}, rhs={k: ctx.unram.neg(v) for k, v in rhs.items()})
                b = self.system.to_series(bco)
                if orbit is not None:
                    b = idem_orbit(b, orbit)
                a = a + b.scalar_mul(ctx.p**nu)
            nu += 1
            rep = check_psi_fixed(a, nu)
            if not rep.ok:
                raise ArithmeticError(f"lift to level {nu} failed verification")
        rep = check_psi_fixed(a, nu_target)
        return PsiWitness(series=a, nu=nu_target, report=rep, meta=dict(w.meta))

    def raise_l2(self, w: PsiWitness, target: int, orbit=None) -> PsiWitness:
        """Adjust a mod-p^2 witness by p * (mod-p witnesses) until l_2 >= target.

        Mirrors the deep-lift preparation: each step cancels the current l_2
        coefficient; it terminates because target is not an attainable
        leading exponent.
        """
        ctx = self.ctx
        assert w.nu >= 2
        a = w.series
        guard = 0
        while True:
            l2 = a.leading_exponent(2)
            l1 = a.leading_exponent(1)
            if l2 is None or l2 >= min(target, l1):
                break
            if l2 >= target:
                break
            cval = a.coeff(l2)
            chigh = tuple((x // ctx.p) % ctx.p for x in cval)
            bw = self.solve_mod_p(l2, ctx.unram.neg(ctx.unram.from_coeffs(chigh)), verify=False)
            b = bw.series
            if orbit is not None:
                b = idem_orbit(b, orbit)
                if b.leading_exponent(1) != l2:
                    raise ArithmeticError("isotypic projection destroyed the correction's leading term")
            a = a + b.scalar_mul(ctx.p)
            guard += 1
            if guard > 4 * ctx.e * (ctx.p - 1):
                raise ArithmeticError("l_2 adjustment did not terminate")
        rep = check_psi_fixed(a, w.nu)
        if not rep.ok:
            raise ArithmeticError("l_2 adjustment broke the verified residuals")
        out = PsiWitness(series=a, nu=w.nu, report=rep, meta=dict(w.meta))
        out.meta["l2"] = a.leading_exponent(2)
        return out

    def gap_witness(self, mu_p: int, c=1) -> PsiWitness:
        """Mod-p^2 witness with a_i = 0 for i < mu_p + e(p-1), i != mu_p.

        The prescribed gap forces the coefficient at mu_p + e(p-1) to be
        -c + O(p); used for the leading-term law of nabla on p-divisible
        leading exponents."""
        ctx = self.ctx
        e, p = ctx.e, ctx.p
        if mu_p % p or mu_p <= 0:
            raise ValueError("gap construction needs a positive leading exponent divisible by p")
        cc = c if isinstance(c, tuple) else ctx.unram.from_int(c)
        preset = {i: ctx.unram.zero() for i in range(self.window[0], mu_p + e * (p - 1))
                  if i != mu_p}
        preset[mu_p] = cc
        coeffs = self.system.solve(2, preset)
        s = self.system.to_series(coeffs)
        rep = check_psi_fixed(s, 2)
        if not rep.ok:
            raise ArithmeticError("gap construction failed verification")
        return PsiWitness(series=s, nu=2, report=rep,
                          meta={"l": mu_p, "gap": True})

    # -- high-level constructions -----------------------------------------

    def tame_basis(self, orbit, xi, nu=None, r=1):
        """Witnesses alpha_i with leading coefficient xi and the prescribed
        leading exponents n_i - e (or n_i - e + e(p-1) when p | n_i), lying
        in the shifted isotypic component [n_1 - e], verified mod p^nu.

        For r = 2, members with p | n_i - e are built by the gap construction
        so the derivation's leading-term law applies.
        """
        ctx = self.ctx
        e, p = ctx.e, ctx.p
        d = e * (p - 1)
        nu = nu or ctx.N
        ns = sorted(set(n % d for n in orbit))
        if any(n % e == 0 for n in ns):
            raise Infeasible("orbit meets the subfield-trivial characters; not handled here")
        full = set()
        for n in ns:
            m = n % d
            while m not in full:
                full.add(m)
                m = m * p % d
        ns = sorted(full)
        comp = sorted((n - e) % d for n in ns)
        out = []
        for n in sorted(ns):
            if n % p == 0:
                target_l = n - e + d
                w = self.solve_mod_p(target_l, xi)
                w = PsiWitness(series=idem_orbit(w.series, comp), nu=1, report=None,
                               meta={"l": target_l, "n": n, "branch": "deep"})
                w.report = check_psi_fixed(w.series, 1)
                if not w.report.ok or w.series.leading_exponent(1) != target_l:
                    raise ArithmeticError("projection broke the deep-branch witness")
                w = self.lift(w, 2, orbit=comp)
                w = self.raise_l2(w, n - e, orbit=comp)
                w = self.lift(w, nu, orbit=comp)
            elif r == 2 and (n - e) % p == 0:
                target_l = n - e
                w = self.gap_witness(n - e, xi)
                s = idem_orbit(w.series, comp)
                w = PsiWitness(series=s, nu=2, report=check_psi_fixed(s, 2),
                               meta={"l": target_l, "n": n, "branch": "gap", "gap": True})
                if not w.report.ok or s.leading_exponent(1) != target_l:
                    raise ArithmeticError("projection broke the gap-branch witness")
                w = self.lift(w, nu, orbit=comp)
            else:
                target_l = n - e
                w = self.solve_mod_p(target_l, xi)
                s = idem_orbit(w.series, comp)
                w = PsiWitness(series=s, nu=1, report=check_psi_fixed(s, 1),
                               meta={"l": target_l, "n": n, "branch": "plain"})
                if not w.report.ok or s.leading_exponent(1) != target_l:
                    raise ArithmeticError("projection broke the witness")
                w = self.lift(w, nu, orbit=comp)
            if w.series.leading_exponent(1) != target_l:
                raise ArithmeticError("lifting moved the leading exponent")
            out.append(w)
        lead_set = [w.series.leading_exponent(1) for w in out]
        if len(set(lead_set)) != len(lead_set):
            raise ArithmeticError("leading exponents collide; tie-break required but unexpected")
        return out


# -- leading-term bounds ------------------------------------------------------


def l_nu_bound(ctx: SeriesContext, nu: int) -> Fraction:
    """Lower bound -((nu(p-1)+1)/p) e for l_nu of any psi-fixed element."""
    return -Fraction((nu * (ctx.p - 1) + 1) * ctx.e, ctx.p)


def bounds_report(w: PsiWitness) -> dict:
    """Check the leading-exponent estimates on a verified witness.

    Part a: l_nu >= -((nu(p-1)+1)/p) e for nu up to the verified level.
    Part b: l < -e + e(p-1)  =>  l_2 > l - e(p-1); else l_2 >= -e.
    Part c: under l_2 >= l - e(p-1): analogous estimate one level deeper.
    """
    s = w.series
    ctx = s.ctx
    e, p = ctx.e, ctx.p
    d = e * (p - 1)
    out = {"nu": w.nu, "l": {}, "parts": {}}
    ok = True
    for nu in range(1, w.nu + 1):
        l = s.leading_exponent(nu)
        out["l"][nu] = l
        if l is not None and l < l_nu_bound(ctx, nu):
            ok = False
            out["parts"][f"a_nu{nu}"] = False
        else:
            out["parts"][f"a_nu{nu}"] = True
    l1 = out["l"].get(1)
    if w.nu >= 2 and l1 is not None:
        l2 = out["l"].get(2)
        l2v = l2 if l2 is not None else 10**9
        if l1 < -e + d:
            out["parts"]["b"] = l2v > l1 - d
            out["parts"]["b_branch"] = "l below -e+e(p-1)"
        else:
            out["parts"]["b"] = l2v >= -e
            out["parts"]["b_branch"] = "l at least -e+e(p-1)"
        ok = ok and out["parts"]["b"]
    if w.nu >= 3 and l1 is not None:
        l2 = out["l"].get(2)
        l3 = out["l"].get(3)
        l2v = l2 if l2 is not None else 10**9
        l3v = l3 if l3 is not None else 10**9
        if l2v >= l1 - d:
            if l1 < -e + 2 * d:
                out["parts"]["c"] = l3v > l1 - 2 * d
                out["parts"]["c_branch"] = "l below -e+2e(p-1)"
            else:
                out["parts"]["c"] = l3v >= -e
                out["parts"]["c_branch"] = "l at least -e+2e(p-1)"
            ok = ok and out["parts"]["c"]
        else:
            out["parts"]["c"] = None
            out["parts"]["c_branch"] = "hypothesis on l_2 not met"
    out["ok"] = ok
    return out
