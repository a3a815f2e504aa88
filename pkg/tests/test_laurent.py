import math
import random

import pytest

from phigamma.eisenstein import make_cyclotomic_plain
from phigamma.laurent import (
    LaurentSeries,
    SeriesContext,
    b_coeff,
    b_coeff_closed,
    beta_table,
    delta_act,
    eta0_value,
    exp_series,
    gamma_act,
    half_trace,
    idem_eta,
    idem_orbit,
    log_series,
    nabla,
    nabla_log,
    norm_operator,
    phi,
    psi,
    series_from_json_dict,
)


CTX_B = SeriesContext(5, 2, 2, 4)  # p=5, f=2, e=2, N=4
CTX_A = SeriesContext(5, 2, 1, 4)  # unramified-side context, e=1


def test_b_coeff_paths_agree():
    for p in (5, 13):
        for n in range(0, 3 * (p - 1) + 1):
            for m in range(p):
                assert b_coeff(p, m, n) == _b_bruteforce_cyclotomic(p, m, n)
                if n < 2 * p:
                    assert b_coeff(p, m, n) == b_coeff_closed(p, m, n)


def _b_bruteforce_cyclotomic(p, m, n):
    # oracle: exact arithmetic in Z[x]/(x^p - 1), then divide the mu_p-sum by p
    def mul(a, b):
        out = [0] * p
        for i, ai in enumerate(a):
            if ai:
                for j, bj in enumerate(b):
                    out[(i + j) % p] += ai * bj
        return out

    total = [0] * p
    for i in range(p):
        zeta_m = [0] * p
        zeta_m[(i * m) % p] = 1
        one_minus = [0] * p
        one_minus[0] = 1
        one_minus[(-i) % p] -= 1
        term = zeta_m
        for _ in range(n):
            term = mul(term, one_minus)
        total = [a + b for a, b in zip(total, term)]
    # sum over mu_p of x^k is p*[k=0] - (1 + x + ... + x^{p-1}) contributions:
    # in Z[x]/(x^p-1) the result is c0 + c*(x + ... + x^{p-1}); the mu_p-sum
    # inside Z[zeta_p] equals (c0 - c); divide by p.
    c = total[1]
    assert all(t == c for t in total[1:])
    val = total[0] - c
    assert val % p == 0
    return val // p


def test_b_divisibility():
    for p in (5, 13):
        for n in range(1, 3 * (p - 1) + 1):
            bound = (n + p - 2) // (p - 1) - 1
            for m in range(p):
                assert b_coeff(p, m, n) % p**bound == 0


def test_beta_integrality():
    for p in (5, 13):
        tab = beta_table(p, 4)
        assert tab[1][1] == 1 and len(tab[1]) == p
        for n in (2, 3):
            assert all(isinstance(v, int) for v in tab[n])


def test_phi_one_plus_pi():
    ctx = CTX_B
    a = ctx.one_plus_pi()
    fa = phi(a)
    expect = a.power(ctx.p)
    lo = max(fa.lo, expect.lo)
    hi = min(fa.hi, expect.hi)
    assert fa.eq_on(expect, lo, hi)


def test_phi_pi_k_multiplicativity():
    ctx = CTX_B
    pik = ctx.from_terms({1: 1})
    lhs = phi(pik).power(ctx.e)
    rhs = phi(ctx.from_terms({ctx.e: 1}))
    assert lhs.eq_on(rhs, max(lhs.lo, rhs.lo), min(lhs.hi, rhs.hi))
    # phi(pi) = (1+pi)^p - 1
    expect = ctx.one_plus_pi().power(ctx.p) - ctx.one()
    assert rhs.eq_on(expect, max(rhs.lo, expect.lo), min(rhs.hi, expect.hi))


def test_phi_congruent_pth_power_mod_p():
    ctx = CTX_B
    pik = ctx.from_terms({1: 1})
    diff = phi(pik) - ctx.from_terms({ctx.p: 1})
    assert diff.is_zero_mod(1)


def test_half_trace_constant():
    ctx = CTX_B
    h = half_trace(ctx.one())
    one = ctx.one()
    assert h.eq_on(one, h.lo, h.hi)


def test_half_trace_kills_small_powers():
    # oracle: sum_{zeta in mu_p} zeta^j = 0 for 0 < j < p, so the half trace
    # of (1+pi)^j vanishes; verified independently in O_F[zeta_p]
    ctx = CTX_B
    p = ctx.p
    cyc = make_cyclotomic_plain(ctx.unram)
    for j in range(1, p):
        s = cyc.zero()
        for i in range(p):
            s = s + (cyc.x(i) if i else cyc.one()) ** j
        assert s.is_zero()
        a = ctx.one_plus_pi().power(j)
        h = half_trace(a)
        assert h.is_zero_mod(ctx.N)


def test_psi_basics():
    ctx = CTX_B
    assert psi(ctx.one()).eq_on(ctx.one(), 0, 0)
    for j in (1, 2, 4):
        a = ctx.one_plus_pi().power(j)
        assert psi(a).is_zero_mod(ctx.N)


def test_psi_phi_roundtrip_exact_series():
    ctx = CTX_B
    rng = random.Random(7)
    for _ in range(5):
        a = ctx.random_series(rng, window=(-11, 40))
        b = psi(phi(a))
        assert b.eq_on(a, -11, 40)


def test_psi_phi_roundtrip_windowed():
    # truncation-honest round trip: inexact tails, compare on the trusted part
    ctx = CTX_B
    rng = random.Random(8)
    a = ctx.random_series(rng, window=(-11, 40))._with(exact_below=False, exact_above=False)
    b = psi(phi(a))
    lo = max(b.lo, a.lo)
    hi = min(b.hi, a.hi)
    assert hi - lo > 20
    assert b.eq_on(a, lo, hi)


def test_nabla():
    ctx = CTX_B
    e = ctx.e
    pi = ctx.from_terms({e: 1})
    d = nabla(pi)
    assert d.eq_on(ctx.one_plus_pi(), d.lo, d.hi)
    assert nabla(ctx.one()).is_zero_mod(ctx.N)
    rng = random.Random(9)
    a = ctx.random_series(rng, window=(0, 25))
    b = ctx.random_series(rng, window=(0, 25))
    lhs = nabla(a.mul(b))
    rhs = nabla(a).mul(b) + a.mul(nabla(b))
    assert lhs.eq_on(rhs, max(lhs.lo, rhs.lo), min(lhs.hi, rhs.hi) - 1)


def test_gamma_basic():
    ctx = CTX_B
    p, e = ctx.p, ctx.e
    pi = ctx.from_terms({e: 1}, window=(0, 3 * e * p))
    g = gamma_act(pi, 1 + p)
    # gamma_1(pi) = pi + pi^p + pi^{p+1} mod p
    expect = ctx.from_terms({e: 1, e * p: 1, e * (p + 1): 1}, window=(0, 3 * e * p))
    assert (g - expect).is_zero_mod(1, g.lo, min(g.hi, expect.hi))
    a = ctx.random_series(random.Random(10), window=(-5, 30))
    assert gamma_act(a, 1).eq_on(a, -5, 30)


def test_gamma_commutes_with_phi():
    ctx = CTX_B
    rng = random.Random(11)
    c = 1 + ctx.p
    for _ in range(3):
        a = ctx.random_series(rng, window=(-4, 16))
        lhs = gamma_act(phi(a), c)
        rhs = phi(gamma_act(a, c))
        lo, hi = max(lhs.lo, rhs.lo), min(lhs.hi, rhs.hi)
        assert lhs.eq_on(rhs, lo, hi)


def test_commutation_laws():
    # nabla gamma = c gamma nabla ; nabla phi = p phi nabla ; p nabla psi = psi nabla
    ctx = CTX_B
    rng = random.Random(12)
    c = 1 + ctx.p
    for _ in range(5):
        a = ctx.random_series(rng, window=(-8, 30))
        l1 = nabla(gamma_act(a, c))
        r1 = gamma_act(nabla(a), c).scalar_mul(c)
        assert l1.eq_on(r1, max(l1.lo, r1.lo), min(l1.hi, r1.hi))
        l2 = nabla(phi(a))
        r2 = phi(nabla(a)).scalar_mul(ctx.p)
        assert l2.eq_on(r2, max(l2.lo, r2.lo), min(l2.hi, r2.hi))
        l3 = nabla(psi(a)).scalar_mul(ctx.p)
        r3 = psi(nabla(a))
        assert l3.eq_on(r3, max(l3.lo, r3.lo), min(l3.hi, r3.hi))


def test_delta_order_and_leading_term():
    ctx = CTX_B
    d = ctx.e * (ctx.p - 1)
    rng = random.Random(13)
    a = ctx.random_series(rng, window=(-3, 20))
    full = delta_act(a, d)
    assert full.eq_on(a, -3, 20)
    # delta(a) = eta0(delta)^{p l} a_l pi^l mod (p, pi^{l+1})
    lead = a.leading_exponent(1)
    da = delta_act(a, 1)
    lam = eta0_value(ctx, 1)
    u = ctx.unram
    expected_lead = u.mul(u.pow(lam, ctx.p * lead), u.from_coeffs(a.coeff(lead)))
    got = da.coeff(lead)
    assert all((x - y) % ctx.p == 0 for x, y in zip(got, expected_lead))
    for i in range(a.lo, lead):
        assert all(v % ctx.p == 0 for v in da.coeff(i))


def test_delta_pi_e_consistency():
    # delta0(pi_K)^e must equal delta0(pi) = (1+pi)^omega - 1
    ctx = CTX_B
    span = 30
    pik = ctx.from_terms({1: 1}, window=(0, span))
    dpik = delta_act(pik, 1)
    dpi = delta_act(ctx.from_terms({ctx.e: 1}, window=(0, span)), 1)
    lhs = dpik.truncate_above(span).power(ctx.e)
    lo, hi = max(lhs.lo, dpi.lo), min(lhs.hi, dpi.hi, span - 1)
    assert lhs.eq_on(dpi, lo, hi)


def test_idempotents():
    ctx = CTX_B
    d = ctx.e * (ctx.p - 1)
    rng = random.Random(14)
    a = ctx.random_series(rng, window=(-3, 12))
    e2 = idem_eta(idem_eta(a, 3), 3)
    assert e2.eq_on(idem_eta(a, 3), -3, 12)
    total = idem_orbit(a, list(range(d)))
    assert total.eq_on(a, -3, 12)
    # nabla shifts the isotypic index by -e
    ns = [1, 5]
    l = nabla(idem_orbit(a, ns))
    r = idem_orbit(nabla(a), [n - ctx.e for n in ns])
    assert l.eq_on(r, max(l.lo, r.lo), min(l.hi, r.hi))


def test_delta_commutes_with_phi_and_gamma():
    ctx = CTX_B
    rng = random.Random(15)
    a = ctx.random_series(rng, window=(-4, 12))
    l = delta_act(phi(a), 1)
    r = phi(delta_act(a, 1))
    assert l.eq_on(r, max(l.lo, r.lo), min(l.hi, r.hi))
    c = 1 + ctx.p
    l2 = delta_act(gamma_act(a, c), 1)
    r2 = gamma_act(delta_act(a, 1), c)
    assert l2.eq_on(r2, max(l2.lo, r2.lo), min(l2.hi, r2.hi))


def test_nabla_log_formulas():
    ctx = CTX_B
    e = ctx.e
    # nabla_log(pi^j) = j pi_K^{-e} + j
    for j in (1, 2, 3):
        u = ctx.from_terms({e * j: 1}, window=(0, 30))
        nl = nabla_log(u)
        expect = ctx.from_terms({-e: j, 0: j}, window=(-e, 25))
        assert nl.eq_on(expect, -e, min(nl.hi, 25))
    # nabla_log(1 + c pi_K^n) = (cn/e) pi_K^{n-e} + ...
    n, c = 3, 7
    u = ctx.from_terms({0: 1, n: c}, window=(0, 40))
    nl = nabla_log(u)
    mod = ctx.modulus(ctx.N)
    lead = c * n * pow(e, -1, mod) % mod
    assert nl.coeff(n - e)[0] % mod == lead
    assert all(v % mod == 0 for v in nl.coeff(n - e)[1:])
    for i in range(nl.lo, n - e):
        assert all(v % mod == 0 for v in nl.coeff(i))
    # additivity on products
    rng = random.Random(16)
    u1 = ctx.from_terms({0: 1, 2: rng.randrange(625), 5: rng.randrange(625)}, window=(0, 40))
    u2 = ctx.from_terms({0: 1, 1: rng.randrange(625)}, window=(0, 40))
    lhs = nabla_log(u1.mul(u2))
    rhs = nabla_log(u1) + nabla_log(u2)
    lo, hi = max(lhs.lo, rhs.lo), min(lhs.hi, rhs.hi) - 5
    assert lhs.eq_on(rhs, lo, hi)


def test_log_exp_roundtrip():
    ctx = CTX_A
    rng = random.Random(17)
    x = ctx.from_terms(
        {0: 5 * rng.randrange(125), 1: 5 * rng.randrange(125), 3: 5 * rng.randrange(125)},
        window=(0, 25),
    )
    u = exp_series(x)
    back = log_series(u)
    backa = back.to_mode_a()
    assert backa.eq_on(x, 0, 20)
    u2 = exp_series(backa)
    assert u2.eq_on(u, 0, 20)


def test_norm_operator():
    ctx = CTX_A
    one_pi = ctx.from_terms({0: 1, 1: 1}, window=(0, 20))
    n1 = norm_operator(ctx.one())
    assert n1.eq_on(ctx.one(), 0, 0)
    n2 = norm_operator(one_pi)
    assert n2.eq_on(one_pi, 0, min(n2.hi, 18))
    # log N(x) = p psi log(x)
    rng = random.Random(18)
    x = ctx.from_terms({0: 1, 1: 5 * rng.randrange(125), 2: rng.randrange(5) * 5},
                       window=(0, 80))
    lhs = log_series(norm_operator(x)).to_mode_a()
    rhs = psi(log_series(x).to_mode_a()).scalar_mul(ctx.p)
    lo, hi = max(lhs.lo, rhs.lo), min(lhs.hi, rhs.hi)
    assert hi - lo > 3
    assert lhs.eq_on(rhs, lo, hi)


def test_json_roundtrip():
    ctx = CTX_B
    rng = random.Random(19)
    a = ctx.random_series(rng, window=(-4, 9))
    d = a.to_json_dict()
    b = series_from_json_dict(d, ctx)
    assert b.eq_on(a, -4, 9)
