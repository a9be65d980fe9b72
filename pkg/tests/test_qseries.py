from fractions import Fraction

import pytest
from sympy import Integer, Poly, symbols
from sympy import Rational as SymRational

from qseries import (
    DirichletCharacterSpec,
    EtaQuotientSpec,
    LaurentQSeries,
    SeriesError,
    TruncationError,
    delta_series,
    density_curve,
    eisenstein,
    eta_quotient,
    faber_jm,
    good_example_series,
    hecke_tp,
    is_fundamental_discriminant,
    j_invariant,
    kronecker_symbol,
    lehmer_rhs,
    padic_a_invariant,
    padic_valuation_stats,
    ramanujan_tau,
    series_arith,
    sigma_power,
    twist,
    u_operator,
    u_v_operators,
    v_operator,
)


def test_delta_coefficients(delta):
    assert [delta[n] for n in range(1, 9)] == [1, -24, 252, -1472, 4830, -6048, -16744, 84480]


def test_eta_spec_delta_matches_delta_series():
    assert eta_quotient(EtaQuotientSpec.parse("1:24"), 30) == delta_series(30)


def test_eisenstein_coefficients():
    e4, e6 = eisenstein(4, 3), eisenstein(6, 3)
    assert [e4[n] for n in range(3)] == [1, 240, 2160]
    assert [e6[n] for n in range(3)] == [1, -504, -16632]


def test_j_invariant():
    j = j_invariant(5)
    assert j.min_exp == -1
    assert j.trunc_order == 4
    assert [j[n] for n in range(-1, 3)] == [1, 744, 196884, 21493760]


def test_g_series(g_series):
    assert g_series.to_dict().items() >= {1: 1, 4: -8, 7: 20, 13: -70, 16: 64, 19: 56}.items()
    assert g_series[10] == 0


def test_good_example_coefficients(m_series):
    expected = {-1: 1, 2: 2, 5: -49, 8: 48, 11: 771}
    assert {n: m_series[n] for n in expected} == expected
    assert all(m_series[n] == 0 for n in range(1, 201, 3))


def test_good_example_matches_generic_eta_route():
    terms = 60
    ratio = eta_quotient(EtaQuotientSpec.parse("1:3,9:-3"), terms) + 3
    generic = ratio * ratio * eta_quotient(((3, 8),), terms)
    assert generic == good_example_series(terms)


@pytest.mark.parametrize("m, q1", [(1, 196884), (2, 42987520), (3, 2592899910)])
def test_faber_polynomials(m, q1):
    jm = faber_jm(m, m + 3)
    assert jm[-m] == 1
    assert all(jm[n] == 0 for n in range(-m + 1, 1))
    assert jm[1] == q1


def test_faber_zero_is_constant_one():
    assert faber_jm(0, 1) == LaurentQSeries.constant(1, 1)


@pytest.mark.parametrize("m, terms", [(1, 1), (2, 1), (2, 2), (3, 3), (5, 4), (4, 5)])
def test_faber_with_few_terms_is_a_truncation(m, terms):
    short = faber_jm(m, terms)
    assert short.trunc_order == terms - m
    assert short == faber_jm(m, m + 3).truncate(terms - m)


def faber_from_generating_function(m, terms):
    """J_m(x) read off as the q^m coefficient of E4^2 E6 / (Delta (j - x))."""
    weight = eisenstein(4, terms) ** 2 * eisenstein(6, terms) * delta_series(terms).inverse()
    j_inv = j_invariant(terms).inverse()
    x = symbols("x")
    poly = Integer(0)
    term = weight * j_inv
    for r in range(m + 1):
        c = term[m]
        poly += SymRational(c.numerator, c.denominator) * x ** r
        term = term * j_inv
    return Poly(poly, x)


@pytest.mark.parametrize("m", range(6))
def test_faber_matches_generating_function(m):
    terms = m + 4
    poly = faber_from_generating_function(m, terms)
    assert poly.degree() == m
    coeffs = poly.all_coeffs()
    assert coeffs[0] == 1
    j = j_invariant(terms)
    value = LaurentQSeries.constant(1, terms)
    for c in coeffs[1:]:
        value = value * j + Fraction(int(c.p), int(c.q))
    assert value == faber_jm(m, terms)


def test_eta_spec_errors():
    with pytest.raises(SeriesError):
        EtaQuotientSpec.parse("1:2:3")
    with pytest.raises(SeriesError):
        EtaQuotientSpec.parse("1:3,1:5")
    with pytest.raises(SeriesError):
        eta_quotient(EtaQuotientSpec.parse("1:1"), 5)
    assert EtaQuotientSpec.parse("1:3,9:-3").leading_exponent == -1
    assert EtaQuotientSpec.parse("3:8").weight == 4


def test_truncation_error_beyond_known_order():
    f = delta_series(5)
    with pytest.raises(TruncationError):
        f[6]
    assert f[-3] == 0


def test_inverse_and_product():
    f = LaurentQSeries.from_dict({0: 1, 1: -1}, 10)
    inv = f.inverse()
    assert all(inv[n] == 1 for n in range(10))
    assert f * inv == LaurentQSeries.constant(1, 10)


def random_series(rng):
    min_exp = int(rng.integers(-3, 3))
    coeffs = [int(c) for c in rng.integers(-5, 6, size=int(rng.integers(4, 10)))]
    coeffs[0] = int(rng.choice([-3, -2, -1, 1, 2, 3]))
    return LaurentQSeries(min_exp, tuple(coeffs), min_exp + len(coeffs))


def test_ring_laws_on_random_series(rng):
    for _ in range(30):
        a, b, c = random_series(rng), random_series(rng), random_series(rng)
        assert (a * b) * c == a * (b * c)
        assert a * b == b * a
        assert a * (b + c) == a * b + a * c
        assert a * a.inverse() == LaurentQSeries.constant(1, a.trunc_order - a.min_exp)
        assert a.inverse().inverse() == a
        assert (a * b).inverse() == b.inverse() * a.inverse()


def test_inverse_of_shifted_series_tracks_truncation():
    delta = delta_series(10)
    inv = delta.inverse()
    assert inv.min_exp == -1
    assert inv.trunc_order == delta.trunc_order - 2
    assert inv[-1] == 1 and inv[0] == 24


def test_series_arith_dispatch():
    a = LaurentQSeries.from_dict({0: 1, 1: 2}, 4)
    b = LaurentQSeries.from_dict({1: 1}, 4)
    assert series_arith(a, b, "add") == LaurentQSeries.from_dict({0: 1, 1: 3}, 4)
    assert series_arith(a, op="pow", e=0) == LaurentQSeries.constant(1, 4)
    assert series_arith(a, op="pow", e=2)[2] == 4
    with pytest.raises(ValueError):
        series_arith(a, b, "frobnicate")


def test_zero_padding_is_ignored_by_equality():
    padded = LaurentQSeries(-2, (0, 0, 1, 5), 2)
    assert padded == LaurentQSeries.from_dict({0: 1, 1: 5}, 2)
    assert padded.normalized().min_exp == 0


def test_sigma_and_tau():
    assert sigma_power(3, 2) == 9
    assert sigma_power(9, 1) == 1
    assert ramanujan_tau(2) == -24
    assert ramanujan_tau(3) == 252


def test_kronecker_symbol():
    assert [kronecker_symbol(-3, n) for n in range(1, 8)] == [1, -1, 0, 1, -1, 0, 1]
    assert kronecker_symbol(-4, 3) == -1
    assert kronecker_symbol(5, 2) == -1


@pytest.mark.parametrize("D, expected", [(-3, True), (-4, True), (12, True), (5, True), (-12, False), (8, True), (9, False)])
def test_fundamental_discriminants(D, expected):
    assert is_fundamental_discriminant(D) is expected


def test_hecke_annihilates_g_at_inert_prime(g_series):
    image = hecke_tp(g_series, 2, 4, DirichletCharacterSpec.trivial(9))
    assert image.is_zero()
    assert image.trunc_order == 111


def test_hecke_on_constant():
    one = LaurentQSeries.constant(1, 6)
    assert hecke_tp(one, 3, 1, DirichletCharacterSpec.trivial())[0] == 2
    assert hecke_tp(one, 3, 0, DirichletCharacterSpec.trivial())[0] == Fraction(4, 3)


@pytest.mark.parametrize("p, tau", [(2, -24), (3, 252), (5, 4830)])
def test_hecke_on_delta_is_eigen(delta, p, tau):
    image = hecke_tp(delta, p, 12, DirichletCharacterSpec.trivial())
    assert image.trunc_order > 2
    assert all(image[n] == tau * delta[n] for n in range(1, image.trunc_order))
    assert ramanujan_tau(p) == tau


def test_hecke_rejects_composite():
    with pytest.raises(ValueError):
        hecke_tp(delta_series(10), 4, 12, DirichletCharacterSpec.trivial())


def test_u_and_v_operators(delta):
    u = u_operator(delta, 2)
    assert [u[n] for n in range(1, 5)] == [-24, -1472, -6048, 84480]
    assert u.trunc_order == 21
    v = v_operator(delta, 3)
    assert v[3] == 1 and v[6] == -24 and v[4] == 0
    assert v.trunc_order == 3 * delta.trunc_order
    assert u_v_operators(v, 3, "U") == delta
    with pytest.raises(ValueError):
        u_v_operators(delta, 3, "W")


def test_twist_kills_ramified_coefficients(delta):
    twisted = twist(delta, DirichletCharacterSpec.kronecker(-3))
    assert twisted[3] == 0 and twisted[6] == 0
    assert twisted[2] == 24 and twisted[4] == -1472


def test_lehmer_rhs_principal_part():
    rhs = lehmer_rhs(2, 4)
    assert rhs.min_exp == -2
    assert rhs.trunc_order == 5
    assert rhs[-2] == 1
    assert rhs[-1] == 24


def test_padic_statistics():
    f_star = -u_operator(good_example_series(3 * 100 + 2), 3)
    assert padic_valuation_stats(f_star, 3, 1, 100) == 0
    zero = LaurentQSeries.constant(0, 50)
    assert [row[2] for row in density_curve(zero, 3, [1, 2], [10, 40])] == [0, 0, 0, 0]
    # tau(n) is odd exactly at odd squares
    assert padic_valuation_stats(delta_series(20), 2, 1, 10) == Fraction(1, 5)
    with pytest.raises(TruncationError):
        padic_valuation_stats(zero, 3, 1, 50)


@pytest.mark.parametrize("principal, p, expected", [
    ({-1: 1}, 3, 1),
    ({-3: 1}, 3, 2),
    ({-9: 1, -1: 2}, 3, 3),
    ({}, 3, 0),
])
def test_padic_a_invariant(principal, p, expected):
    assert padic_a_invariant(principal, p) == expected


def test_m_series_vanishes_at_powers_of_three():
    m = good_example_series(3 ** 8 + 2)
    assert all(m[3 ** j] == 0 for j in range(1, 9))
