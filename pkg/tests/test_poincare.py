import logging
from fractions import Fraction

import mpmath
import pytest

from numerics import PrecisionConfig, ball, recognize_rational
from poincare import (
    CuspConstantData,
    HarmonicExpansion,
    PoincareParams,
    TruncationCapError,
    TruncationPolicy,
    assemble_Q,
    bol_operator,
    coefficient,
    coefficient_table,
    cusp_poincare_coeff,
    eval_expansion,
    maass_poincare_holo_coeff,
    maass_poincare_nonholo_coeff,
    nonholo_marker,
    ramanujan_power_sum,
    regularized_pairing_rhs,
    resolve_cutoff,
    tail_bound,
    weakly_holo_poincare_coeff,
    xi_constant,
    xi_operator,
    _coefficient_tail,
)

GOOD = PoincareParams(1, 4, 9)
DELTA = PoincareParams(1, 12, 1)


@pytest.mark.parametrize("m, k, N", [(0, 4, 9), (1, 3, 9), (1, 0, 1), (1, 4, 0)])
def test_params_validation(m, k, N):
    with pytest.raises(ValueError):
        PoincareParams(m, k, N)


def test_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(c_max=0)
    with pytest.raises(ValueError):
        TruncationPolicy(target_tail=0)
    doubled = TruncationPolicy(c_max=90).doubled()
    assert doubled.c_max == 180
    assert doubled.prec.working_bits == 256


def test_tail_bound_decreases_with_cutoff():
    bounds = [float(tail_bound(GOOD, 2, C)) for C in (90, 180, 360, 720)]
    assert bounds == sorted(bounds, reverse=True)
    assert tail_bound(GOOD, 2, 90).certified
    assert not tail_bound(PoincareParams(1, 2, 11), 1, 110).certified


def test_resolve_cutoff_meets_target():
    policy = TruncationPolicy(target_tail=1e-3)
    C = resolve_cutoff("weak", GOOD, 2, policy)
    assert C % GOOD.N == 0
    tail, _ = _coefficient_tail("weak", GOOD, 2, C)
    assert float(tail.upper()) < 1e-3
    if C > GOOD.N:
        previous, _ = _coefficient_tail("weak", GOOD, 2, C - GOOD.N)
        assert float(previous.upper()) >= 1e-3
    assert resolve_cutoff("weak", GOOD, 2, TruncationPolicy(c_max=99)) == 99


def test_resolve_cutoff_cap():
    with pytest.raises(TruncationCapError):
        resolve_cutoff("weak", GOOD, 2, TruncationPolicy(target_tail=1e-300))


def test_constant_term_vanishes_at_level_nine():
    b0 = maass_poincare_holo_coeff(GOOD, 0, TruncationPolicy())
    assert b0.is_zero()
    assert ramanujan_power_sum(GOOD, 900) == 0


def test_delta_constant_term():
    b0 = maass_poincare_holo_coeff(DELTA, 0, TruncationPolicy(target_tail=1e-12))
    assert b0.contains(Fraction(-65520, 691))
    assert abs(float(b0) + 94.8191) < 1e-4


@pytest.mark.parametrize("n, expected", [(1, -1842.89472), (2, -23274.07545), (3, -225028.75877)])
def test_delta_maass_coefficients(n, expected):
    value = maass_poincare_holo_coeff(DELTA, n, TruncationPolicy(target_tail=1e-6))
    assert abs(float(value) - expected) < 1e-3


def test_weakly_holomorphic_good_example(reference_policy):
    value = weakly_holo_poincare_coeff(GOOD, 2, reference_policy)
    assert value.contains(2)
    assert float(value.radius) < 1e-3


def test_holomorphic_part_recognizes_rational(reference_policy):
    value = maass_poincare_holo_coeff(GOOD, 2, reference_policy)
    assert recognize_rational(value, 8) == Fraction(-1, 4)


def test_vanishing_kloosterman_coefficients(reference_policy):
    # m(z) has no q^4 term
    value = weakly_holo_poincare_coeff(GOOD, 4, reference_policy)
    assert value.contains(0)


def test_threads_do_not_change_result():
    serial = cusp_poincare_coeff(GOOD, 1, TruncationPolicy(c_max=180))
    threaded = cusp_poincare_coeff(GOOD, 1, TruncationPolicy(c_max=180, threads=4))
    assert serial.mid == threaded.mid and serial.rad == threaded.rad


def test_index_domains():
    policy = TruncationPolicy(c_max=9)
    with pytest.raises(ValueError):
        cusp_poincare_coeff(GOOD, 0, policy)
    with pytest.raises(ValueError):
        maass_poincare_holo_coeff(GOOD, -1, policy)
    with pytest.raises(ValueError):
        maass_poincare_nonholo_coeff(GOOD, 0, policy)
    with pytest.raises(ValueError):
        coefficient("eisenstein", GOOD, 1, policy)


def test_weight_two_is_labelled_uncertified(caplog):
    with caplog.at_level(logging.WARNING, logger="poincare"):
        cusp_poincare_coeff(PoincareParams(1, 2, 11), 1, TruncationPolicy(c_max=22))
    assert "uncertified" in caplog.text


def test_coefficient_table_keys():
    table = coefficient_table("maass-nonholo", GOOD, range(-1, -4, -1), TruncationPolicy(c_max=90))
    assert list(table) == [-1, -2, -3]


def test_assemble_q_carries_marker():
    policy = TruncationPolicy(c_max=90)
    f = assemble_Q(GOOD, 3, policy)
    assert f.weight == -2
    assert f.principal == {-1: 1}
    assert sorted(f.holo) == [0, 1, 2, 3]
    assert sorted(f.nonholo, reverse=True) == [-1, -2, -3]
    assert f.nonholo_marker == {-1: nonholo_marker(GOOD)} == {-1: Fraction(-1, 2)}
    raw = maass_poincare_nonholo_coeff(GOOD, -1, policy)
    assert (f.nonholo[-1] - raw).contains(Fraction(-1, 2))


def test_bol_operator_scales_by_n_power():
    f = HarmonicExpansion(-2, {-1: Fraction(1)}, {2: Fraction(-1, 4)}, {}, 2)
    image = bol_operator(f, 4)
    assert image[-1].contains(-1)
    assert image[2].contains(-2)
    with pytest.raises(ValueError):
        bol_operator(f, 6)


def test_xi_operator_keys_and_constant():
    f = assemble_Q(GOOD, 2, TruncationPolicy(c_max=90))
    xi = xi_operator(f, 4)
    assert sorted(xi) == [1, 2]
    assert float(xi_constant(GOOD)) > 0


def test_eval_expansion_rejects_lower_half_plane():
    f = HarmonicExpansion(-2, {-1: Fraction(1)}, {}, {}, 0)
    with pytest.raises(ValueError):
        eval_expansion(f, 4, 0, 0)


def test_eval_expansion_of_principal_part():
    f = HarmonicExpansion(-2, {-1: Fraction(1)}, {}, {}, 0, {})
    real, imag = eval_expansion(f, 4, 0, 1, PrecisionConfig())
    # q^-1 at z = i is e^(2 pi)
    assert abs(float(real) - 535.4916555247646) < 1e-6
    assert imag.contains(0)


def test_regularized_pairing_rhs():
    data = CuspConstantData(((1, 1, Fraction(1, 2)), (9, Fraction(1, 3), 3)), index=12)
    assert regularized_pairing_rhs(data, 4).contains(Fraction(19, 24))
    with pytest.raises(ValueError):
        CuspConstantData(((0, 1, 1),))


@pytest.mark.parametrize("n", range(1, 21, 3))
def test_coefficients_vanish_at_one_mod_three(n):
    policy = TruncationPolicy(c_max=90)
    assert weakly_holo_poincare_coeff(GOOD, n, policy).contains(0)
    assert maass_poincare_holo_coeff(GOOD, n, policy).contains(0)


@pytest.mark.parametrize("n, expected", [(2, 2), (5, -49), (11, 771)])
def test_doubling_cutoff_keeps_the_value(n, expected):
    coarse = weakly_holo_poincare_coeff(GOOD, n, TruncationPolicy(c_max=450))
    fine = weakly_holo_poincare_coeff(GOOD, n, TruncationPolicy(c_max=900))
    assert coarse.overlaps(fine)
    assert coarse.contains(expected) and fine.contains(expected)
    assert float(fine.radius) < float(coarse.radius)


def test_regularized_pairing_rhs_two_cusps():
    data = CuspConstantData(((2, 1, Fraction(1, 2)), (3, 2, Fraction(1, 4))), index=6)
    assert regularized_pairing_rhs(data, 4).contains(Fraction(5, 12))
    assert regularized_pairing_rhs(data, 3).contains(Fraction(-5, 12))


def test_regularized_pairing_rhs_is_linear():
    first = ((1, 1, Fraction(1, 2)), (9, Fraction(1, 3), 3))
    second = ((1, 1, Fraction(-5, 7)), (9, Fraction(1, 3), Fraction(1, 4)))
    combined = tuple((w, g, 2 * a + 3 * b) for (w, g, a), (_, _, b) in zip(first, second))
    whole = regularized_pairing_rhs(CuspConstantData(combined, index=12), 4)
    parts = (regularized_pairing_rhs(CuspConstantData(first, index=12), 4) * 2
             + regularized_pairing_rhs(CuspConstantData(second, index=12), 4) * 3)
    assert whole.overlaps(parts)
    exact = sum(w * g * c for w, g, c in combined) / 12
    assert whole.contains(exact) and parts.contains(exact)


def test_eval_expansion_of_nonholomorphic_term():
    f = HarmonicExpansion(-2, {}, {}, {-1: ball(1)}, 1)
    real, imag = eval_expansion(f, 4, 0, 1, PrecisionConfig())
    with mpmath.workdps(40):
        # Gamma(3, 4 pi) e^(2 pi)
        expected = float(mpmath.gammainc(3, 4 * mpmath.pi) * mpmath.exp(2 * mpmath.pi))
    assert abs(float(real) - expected) < 1e-12 * expected
    assert real.contains(expected)
    assert imag.contains(0)
