import random

import pytest

from phigamma.padic import AtLeast
from phigamma.towers import UnramContext


def test_qp_context():
    ctx = UnramContext(5, 1, 4)
    assert ctx.g_tail == (0,)
    assert ctx.frobenius(ctx.from_int(7)) == ctx.from_int(7)


def test_f2_frobenius_order_and_teichmuller():
    ctx = UnramContext(5, 2, 4)
    rng = random.Random(1)
    for _ in range(20):
        a = ctx.random_element(rng)
        assert ctx.frobenius(ctx.frobenius(a)) == a
    t = ctx.teichmuller_generator(24)
    assert ctx.pow(t, 24) == ctx.one()
    assert ctx.pow(t, 12) != ctx.one()


def test_trace_norm_13():
    ctx = UnramContext(13, 2, 3)
    assert ctx.trace_to_zp(ctx.one()) == 2
    assert ctx.norm_to_zp(ctx.from_int(13)) == 13**2


def test_frobenius_is_ring_hom_and_pth_power_mod_p():
    ctx = UnramContext(5, 2, 4)
    rng = random.Random(2)
    for _ in range(20):
        a, b = ctx.random_element(rng), ctx.random_element(rng)
        assert ctx.frobenius(ctx.mul(a, b)) == ctx.mul(ctx.frobenius(a), ctx.frobenius(b))
        assert ctx.frobenius(ctx.add(a, b)) == ctx.add(ctx.frobenius(a), ctx.frobenius(b))
        diff = ctx.sub(ctx.frobenius(a), ctx.pow(a, 5))
        assert all(x % 5 == 0 for x in diff)


def hensel_teichmuller_oracle(c, p, N):
    # independent oracle: Newton on x^(p-1) - 1 from x = c
    m = p**N
    x = c % m
    for _ in range(N + 2):
        fx = (pow(x, p - 1, m) - 1) % m
        fpx = (p - 1) * pow(x, p - 2, m) % m
        x = (x - fx * pow(fpx, -1, m)) % m
    assert pow(x, p - 1, m) == 1
    return x


def test_teichmuller_of_2_matches_hensel_oracle():
    ctx = UnramContext(5, 1, 4)
    t = ctx.teichmuller((2,))
    expect = hensel_teichmuller_oracle(2, 5, 4)
    assert t[0] == expect
    assert t[0] % 5 == 2
    assert pow(t[0], 4, 5**4) == 1


def test_teichmuller_multiplicative():
    ctx = UnramContext(5, 2, 4)
    rng = random.Random(3)
    for _ in range(10):
        a = tuple(rng.randrange(5) for _ in range(2))
        b = tuple(rng.randrange(5) for _ in range(2))
        ab = tuple(x % 5 for x in ctx.mul(ctx.from_coeffs(a), ctx.from_coeffs(b)))
        lhs = ctx.mul(ctx.teichmuller(a), ctx.teichmuller(b))
        assert lhs == ctx.teichmuller(ab)


def test_val_p_and_inverse():
    ctx = UnramContext(5, 2, 4)
    assert ctx.val_p(ctx.from_int(50)) == 2
    assert ctx.val_p(ctx.zero()) == AtLeast(4)
    rng = random.Random(4)
    for _ in range(10):
        u = ctx.random_unit(rng)
        assert ctx.mul(u, ctx.inverse(u)) == ctx.one()


def test_valuation_multiplicativity():
    ctx = UnramContext(5, 1, 4)
    rng = random.Random(5)
    for _ in range(100):
        a = ctx.from_int(rng.randrange(1, 5**4))
        b = ctx.from_int(rng.randrange(1, 5**4))
        va, vb = ctx.val_p(a), ctx.val_p(b)
        if isinstance(va, AtLeast) or isinstance(vb, AtLeast):
            continue
        vab = ctx.val_p(ctx.mul(a, b))
        if va + vb >= 4:
            assert vab == AtLeast(4)
        else:
            assert vab == va + vb
