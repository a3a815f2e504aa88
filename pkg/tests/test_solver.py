import random
from fractions import Fraction

import pytest

from phigamma.laurent import SeriesContext, idem_orbit, nabla, nabla_log, phi, psi
from phigamma.solver import (
    Infeasible,
    PsiSolver,
    bounds_report,
    check_psi_fixed,
    default_window,
    feasible_leading,
    l_nu_bound,
    residual_series,
)

CTX_B = SeriesContext(5, 2, 2, 4, window=default_window(SeriesContext(5, 2, 2, 4), 4))


def make_ctx_b():
    ctx = SeriesContext(5, 2, 2, 4)
    return SeriesContext(5, 2, 2, 4, window=default_window(ctx, 4))


def test_constant_is_fixed():
    ctx = make_ctx_b()
    one = ctx.from_terms({0: 1}, window=ctx.window)._with(exact_above=False)
    rep = check_psi_fixed(one, ctx.N)
    assert rep.ok and rep.ok_all_indices


def test_generic_series_is_not_fixed():
    ctx = make_ctx_b()
    a = ctx.from_terms({1: 1}, window=ctx.window)._with(exact_above=False)
    rep = check_psi_fixed(a, 1)
    assert not rep.ok


def test_nabla_log_passes_mod_p():
    ctx = make_ctx_b()
    rng = random.Random(0)
    for _ in range(10):
        terms = {0: 1}
        for _ in range(3):
            terms[rng.randrange(1, 15)] = tuple(rng.randrange(625) for _ in range(2))
        u = ctx.from_terms(terms, window=(0, ctx.window[1] + 40))
        a = nabla_log(u).restrict(*ctx.window)
        rep = check_psi_fixed(a, 1)
        assert rep.ok, f"failed for {terms}"


def test_solve_mod_p_matches_constructive_path():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    for n, c in [(1, 1), (4, 7), (5, 2), (-2, 3), (11, 1)]:
        w1 = sol.solve_mod_p(n, c)
        assert w1.series.leading_exponent(1) == n
        assert w1.report.ok
        if (n + ctx.e) % ctx.p != 0 and n > -ctx.e:
            w2 = sol.nabla_log_witness(n, c)
            assert w2.series.leading_exponent(1) == n
            c1 = w1.series.coeff(n)
            c2 = w2.series.coeff(n)
            assert all((x - y) % ctx.p == 0 for x, y in zip(c1, c2))


def test_infeasible_targets_rejected():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    e, p = ctx.e, ctx.p
    # below -e
    with pytest.raises(Infeasible):
        sol.solve_mod_p(-e - 1, 1)
    # congruent to -e mod p, above -e
    for n in (-e + p, -e + 2 * p):
        with pytest.raises(Infeasible):
            sol.solve_mod_p(n, 1)
    # at -e only prime-field leading coefficients
    w = sol.solve_mod_p(-e, 3)
    assert w.report.ok and w.series.leading_exponent(1) == -e
    with pytest.raises(Infeasible):
        sol.solve_mod_p(-e, (1, 1))


def test_feasibility_scan_matches_closed_form():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    e, p = ctx.e, ctx.p
    for n in range(-e - 2, 3 * e * (p - 1) + 1):
        expect, _ = feasible_leading(ctx, n, 1)
        try:
            sol.solve_mod_p(n, 1)
            got = True
        except Infeasible:
            got = False
        assert got == expect, f"n={n}"


def test_lift_and_verify():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    w = sol.solve_mod_p(4, 2)
    w4 = sol.lift(w, 4)
    assert w4.nu == 4 and w4.report.ok
    assert w4.series.leading_exponent(1) == 4
    # independent re-check through the operator pipeline
    r = residual_series(w4.series)
    assert r.is_zero_mod(4)


def test_lift_of_constant_is_constant():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    one = ctx.from_terms({0: 1}, window=ctx.window)._with(exact_above=False)
    from phigamma.solver import PsiWitness
    w = PsiWitness(series=one, nu=1, report=check_psi_fixed(one, 1))
    w4 = sol.lift(w, 4)
    assert w4.series.eq_on(one, *ctx.window)


def test_psi_operator_agrees_on_witness():
    # the solver's linear algebra and the operator pipeline are distinct paths
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    w = sol.lift(sol.solve_mod_p(1, 1), 3)
    a = w.series
    pa = psi(a)
    lo, hi = max(a.lo, pa.lo), min(a.hi, pa.hi)
    assert pa.eq_on(a, lo, hi, nu=3)


def test_bounds_report_on_witnesses():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    rng = random.Random(1)
    for _ in range(10):
        n = rng.randrange(-ctx.e, 3 * ctx.e * (ctx.p - 1))
        if not feasible_leading(ctx, n, 1)[0]:
            continue
        c = tuple(rng.randrange(1, 625) for _ in range(2))
        if n == -ctx.e:
            c = 1
        w = sol.lift(sol.solve_mod_p(n, c), 3)
        rep = bounds_report(w)
        assert rep["ok"], rep


def test_gap_witness_shape():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    mu_p = ctx.p  # mu = 1
    w = sol.gap_witness(mu_p, 1)
    s = w.series
    assert s.leading_exponent(1) == mu_p
    assert s.leading_exponent(2) == mu_p
    d = ctx.e * (ctx.p - 1)
    for i in range(s.lo, mu_p + d):
        if i == mu_p:
            continue
        assert all(v % 25 == 0 for v in s.coeff(i)), i
    # prescribed top-of-gap coefficient is -1 mod p
    top = s.coeff(mu_p + d)
    assert (top[0] + 1) % ctx.p == 0


def test_raise_l2():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    e, p = ctx.e, ctx.p
    d = e * (p - 1)
    mu = 1
    L = mu * p - e + d  # deep leading exponent
    w = sol.lift(sol.solve_mod_p(L, 1), 2)
    w = sol.raise_l2(w, mu * p - e)
    l2 = w.series.leading_exponent(2)
    assert l2 is None or l2 >= mu * p - e
    # the mod-p^2 identity: a_{l-e(p-1)} = a_l * p * mu / e
    a = w.series
    lead = a.coeff(L)
    deep = a.coeff(mu * p - e)
    u = ctx.unram
    expect = u.scalar_mul(p * mu * pow(e, -1, 25) % 25, u.from_coeffs(lead))
    assert all((x - y) % 25 == 0 for x, y in zip(deep, expect))


def test_tame_basis_cfgb():
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    xi = (1, 1)  # a normal basis element of O_F for p=5, f=2 (checked below)
    u = ctx.unram
    import numpy as np
    M = np.array([list(u.from_coeffs(xi)), list(u.frobenius(u.from_coeffs(xi)))], dtype=object)
    det = (M[0][0] * M[1][1] - M[0][1] * M[1][0]) % 5
    assert det != 0
    basis = sol.tame_basis([1], xi, nu=3)
    # orbit of 1 under *5 mod 8 is {1, 5}
    assert len(basis) == 2
    ls = sorted(w.series.leading_exponent(1) for w in basis)
    assert ls == [-1, 11]
    for w in basis:
        assert w.report.ok and w.nu == 3
        lead = w.series.coeff(w.series.leading_exponent(1))
        assert all((x - y) % 5 == 0 for x, y in zip(lead, xi))


def test_gamma_filtration_law():
    # l((gamma_1 - 1) a) = (j + e(p-1)) p^kappa for l(a) = j p^kappa, p not dividing j
    from phigamma.laurent import gamma_act
    ctx = make_ctx_b()
    sol = PsiSolver(ctx)
    for n in (1, 4, 7):
        w = sol.solve_mod_p(n, 1)
        a = w.series
        ga = gamma_act(a, 1 + ctx.p) - a
        l = ga.leading_exponent(1)
        assert l == n + ctx.e * (ctx.p - 1), (n, l)
