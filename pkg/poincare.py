"""Fourier coefficients of Poincare series and Maass-Poincare series on Gamma_0(N).

P(m,k,N)   cusp form            a(m,k,N;n)   J-Bessel sum over K(m,n,c)
P(-m,k,N)  weakly holomorphic   a(-m,k,N;n)  I-Bessel sum over K(-m,n,c)
Q(-m,k,N)  harmonic weak Maass  b(-m,k,N;n)  I-Bessel (n > 0), Ramanujan sums (n = 0),
                                             J-Bessel (n < 0)

Every coefficient is a BallReal whose radius contains the c-sum tail beyond the
resolved cutoff C.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Optional, Tuple, Union

from mpmath import libmp
from sympy import divisor_sigma, factorint
from tqdm import tqdm

from kloosterman import KloostermanKey, kloosterman, ramanujan_sum
from numerics import (
    BallReal,
    PrecisionConfig,
    ball,
    bessel_i,
    bessel_i_majorant,
    bessel_j,
    incomplete_gamma_int,
)

logger = logging.getLogger(__name__)

KINDS = ("cusp", "weak", "maass-holo", "maass-nonholo")
MAX_CUTOFF = 10 ** 6
DEFAULT_TARGET_TAIL = 1e-3
BOUND_BITS = 64

Coefficient = Union[Fraction, BallReal]


class TruncationCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class PoincareParams:
    m: int
    k: int
    N: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.k < 2 or self.k % 2:
            raise ValueError(f"k must be an even integer >= 2, got {self.k}")
        if self.N < 1:
            raise ValueError(f"level N must be >= 1, got {self.N}")

    @property
    def weight(self) -> int:
        return 2 - self.k

    @property
    def certified(self) -> bool:
        return self.k >= 4


@dataclass(frozen=True)
class TruncationPolicy:
    """Cutoff for the c-sum: a fixed ``c_max`` or, when None, the smallest C whose
    tail bound on the coefficient is below ``target_tail``."""

    c_max: Optional[int] = None
    target_tail: float = DEFAULT_TARGET_TAIL
    prec: PrecisionConfig = field(default_factory=PrecisionConfig)
    threads: int = 1
    show_progress: bool = False

    def __post_init__(self):
        if self.c_max is not None and self.c_max < 1:
            raise ValueError(f"c_max must be positive, got {self.c_max}")
        if not self.target_tail > 0:
            raise ValueError(f"target_tail must be positive, got {self.target_tail}")
        if self.threads < 1:
            raise ValueError(f"threads must be positive, got {self.threads}")

    @property
    def auto(self) -> bool:
        return self.c_max is None

    def doubled(self) -> "TruncationPolicy":
        c_max = None if self.c_max is None else 2 * self.c_max
        target = self.target_tail / 2 if self.c_max is None else self.target_tail
        return TruncationPolicy(c_max, target, self.prec.doubled(), self.threads, self.show_progress)

    def describe(self) -> Dict[str, object]:
        return {
            "c_max": "auto" if self.auto else self.c_max,
            "target_tail": self.target_tail,
            "working_bits": self.prec.working_bits,
            "target_abs_error": self.prec.target_abs_error,
        }


@dataclass(frozen=True)
class TailBound:
    value: BallReal
    certified: bool = True

    def __float__(self):
        return float(self.value.upper())


@dataclass
class HarmonicExpansion:
    """f = sum_{n >= -m} c+(n) q^n + sum_{n < 0} c-(n) Gamma(k-1, 4 pi |n| y) q^n."""

    weight: int
    principal: Dict[int, Coefficient]
    holo: Dict[int, BallReal]
    nonholo: Dict[int, BallReal]
    n_max: int
    nonholo_marker: Dict[int, Fraction] = field(default_factory=dict)


@dataclass(frozen=True)
class CuspConstantData:
    entries: Tuple[Tuple[int, Coefficient, Coefficient], ...]
    index: int = 1

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"index must be >= 1, got {self.index}")
        for width, _, _ in self.entries:
            if width < 1:
                raise ValueError(f"cusp widths must be >= 1, got {width}")


def _sign(k: int) -> int:
    return -1 if (k // 2) % 2 else 1


def _half_power(ratio: Fraction, k: int, bits: int) -> BallReal:
    """ratio^((k-1)/2) as an exact rational power times one square root."""
    whole = BallReal.from_rational(ratio ** ((k - 2) // 2), bits)
    return whole * BallReal.from_rational(ratio, bits).sqrt()


def _prefactor(kind: str, p: PoincareParams, n: int, bits: int) -> BallReal:
    two_pi = BallReal.pi(bits) * 2
    sign = _sign(p.k)
    if kind in ("cusp", "weak"):
        return two_pi * _half_power(Fraction(n, p.m), p.k, bits) * sign
    if kind == "maass-holo" and n == 0:
        rational = Fraction(-sign * p.m ** (p.k - 1), math.factorial(p.k - 1))
        return two_pi.pow_int(p.k) * rational
    if kind == "maass-holo":
        return -two_pi * _half_power(Fraction(p.m, n), p.k, bits) * sign
    if kind == "maass-nonholo":
        rational = Fraction(-sign, math.factorial(p.k - 2))
        return two_pi * _half_power(Fraction(p.m, -n), p.k, bits) * rational
    raise ValueError(f"unknown coefficient kind {kind!r}")


def _constant_term_vanishes(p: PoincareParams) -> bool:
    # every c = 0 mod N has c/d non-squarefree for all d | m
    return any(e - _valuation(p.m, ell) >= 2 for ell, e in factorint(p.N).items())


def _valuation(x: int, ell: int) -> int:
    v = 0
    while x % ell == 0:
        x //= ell
        v += 1
    return v


def _as_bound(value: BallReal) -> BallReal:
    return BallReal(value._upper_raw(), libmp.fzero, value.prec)


def _first_modulus_after(C: int, N: int) -> int:
    return N * (C // N + 1)


def tail_bound(p: PoincareParams, n: int, C: int) -> TailBound:
    """Upper bound for |sum_{c > C, N | c} K(.,n,c)/c * Bessel_{k-1}(4 pi sqrt|mn| / c)|.

    For n = 0 it bounds sum_{c > C, N | c} |K(-m,0,c)| / c^k instead.
    """
    if C < 0:
        raise ValueError(f"cutoff must be nonnegative, got {C}")
    bits = BOUND_BITS
    c0 = BallReal.from_int(_first_modulus_after(C, p.N), bits)
    k = p.k

    if n == 0:
        if _constant_term_vanishes(p):
            return TailBound(BallReal.zero(bits))
        # |K(-m,0,c)| <= sigma_1(m); integral comparison for sum c^-k
        head = c0.pow_int(-k)
        rest = c0.pow_int(1 - k) / ((k - 1) * p.N)
        value = (head + rest) * int(divisor_sigma(p.m, 1))
        return TailBound(_as_bound(value))

    A = BallReal.pi(bits) * 2 * BallReal.from_int(abs(p.m * n), bits).sqrt()
    growth = (A / c0).pow_int(2).exp()
    if k == 2:
        # heuristic: |K(m,n,c)| ~ c^(1/2) d(c), no absolutely convergent majorant
        value = A * growth * (c0.pow_int(-1) + 2 / (c0.sqrt() * p.N))
        return TailBound(_as_bound(value), certified=False)

    nu = k - 1
    head = c0.pow_int(-nu)
    rest = c0.pow_int(1 - nu) / ((nu - 1) * p.N)
    value = A.pow_int(nu) / math.factorial(nu) * growth * (head + rest)
    return TailBound(_as_bound(value))


def _coefficient_tail(kind: str, p: PoincareParams, n: int, C: int) -> Tuple[BallReal, bool]:
    bound = tail_bound(p, n, C)
    scale = _prefactor(kind, p, n, BOUND_BITS).abs_upper()
    return bound.value * scale, bound.certified


def resolve_cutoff(kind: str, p: PoincareParams, n: int, t: TruncationPolicy) -> int:
    if not t.auto:
        return t.c_max
    if kind == "maass-holo" and n == 0 and _constant_term_vanishes(p):
        return p.N

    def small_enough(C):
        tail, _ = _coefficient_tail(kind, p, n, C)
        return float(tail.upper()) < t.target_tail

    cap = max(p.N, MAX_CUTOFF // p.N * p.N)
    lo, hi = 0, p.N
    while not small_enough(hi):
        if hi >= cap:
            raise TruncationCapError(
                f"tail of {kind} coefficient n={n} for {p} stays above {t.target_tail} up to C={cap}"
            )
        lo, hi = hi, min(2 * hi, cap)
    # bisection over multiples of N in (lo, hi]
    lo_j, hi_j = lo // p.N, hi // p.N
    while hi_j - lo_j > 1:
        mid_j = (lo_j + hi_j) // 2
        if small_enough(mid_j * p.N):
            hi_j = mid_j
        else:
            lo_j = mid_j
    C = hi_j * p.N
    logger.debug("auto cutoff for %s n=%d of %s: C=%d", kind, n, p, C)
    return C


def _kloosterman_bessel_term(kind: str, p: PoincareParams, n: int, c: int, arg_scale: BallReal,
                             prec: PrecisionConfig) -> BallReal:
    if kind == "cusp":
        key = KloostermanKey(p.m, n, c)
    else:
        key = KloostermanKey(-p.m, n, c)
    K = kloosterman(key, prec)
    x = arg_scale / c
    if K.contains(0):
        # vanishing sum: |J| <= I <= majorant bounds the whole term
        size = BallReal.from_mpf(K.abs_upper()) * bessel_i_majorant(p.k - 1, x) / c
        return BallReal.zero(prec.working_bits).add_error(size.abs_upper())
    bessel = bessel_i(p.k - 1, x, prec) if kind in ("weak", "maass-holo") else bessel_j(p.k - 1, x, prec)
    return K * bessel / c


def kloosterman_bessel_sum(kind: str, p: PoincareParams, n: int, C: int, t: TruncationPolicy) -> BallReal:
    """sum_{c <= C, N | c} K(+-m, n, c)/c * Bessel(4 pi sqrt|mn| / c), ascending in c."""
    bits = t.prec.working_bits
    arg_scale = BallReal.pi(bits) * 4 * BallReal.from_int(abs(p.m * n), bits).sqrt()
    moduli = list(range(p.N, C + 1, p.N))

    def term(c):
        return _kloosterman_bessel_term(kind, p, n, c, arg_scale, t.prec)

    if t.threads > 1 and len(moduli) > 1:
        with ThreadPoolExecutor(max_workers=t.threads) as pool:
            terms = list(pool.map(term, moduli))
    else:
        terms = [term(c) for c in moduli]
    total = BallReal.zero(bits)
    for value in terms:
        total = total + value
    return total


def ramanujan_power_sum(p: PoincareParams, C: int) -> Fraction:
    """sum_{c <= C, N | c} K(-m, 0, c) / c^k exactly."""
    return sum(
        (Fraction(ramanujan_sum(-p.m, c), c ** p.k) for c in range(p.N, C + 1, p.N)),
        Fraction(0),
    )


def _coefficient(kind: str, p: PoincareParams, n: int, t: TruncationPolicy) -> BallReal:
    bits = t.prec.working_bits
    C = resolve_cutoff(kind, p, n, t)
    prefactor = _prefactor(kind, p, n, bits)
    if kind == "maass-holo" and n == 0:
        exact = ramanujan_power_sum(p, C)
        value = prefactor * exact if exact else BallReal.zero(bits)
    else:
        value = prefactor * kloosterman_bessel_sum(kind, p, n, C, t)
    tail, certified = _coefficient_tail(kind, p, n, C)
    if not certified:
        logger.warning("uncertified %s coefficient n=%d for %s (weight 2 tail)", kind, n, p)
    if tail.is_zero():
        return value
    return value.add_error(tail._upper_raw())


def cusp_poincare_coeff(p: PoincareParams, n: int, t: TruncationPolicy) -> BallReal:
    """a(m,k,N;n) of P(m,k,N), without the q^m seed term."""
    if n < 1:
        raise ValueError(f"cusp form coefficients need n >= 1, got {n}")
    return _coefficient("cusp", p, n, t)


def weakly_holo_poincare_coeff(p: PoincareParams, n: int, t: TruncationPolicy) -> BallReal:
    """a(-m,k,N;n) of P(-m,k,N) for n >= 1."""
    if n < 1:
        raise ValueError(f"weakly holomorphic coefficients need n >= 1, got {n}")
    return _coefficient("weak", p, n, t)


def maass_poincare_holo_coeff(p: PoincareParams, n: int, t: TruncationPolicy) -> BallReal:
    """b(-m,k,N;n) of Q+(-m,k,N) for n >= 0."""
    if n < 0:
        raise ValueError(f"holomorphic part coefficients need n >= 0, got {n}")
    return _coefficient("maass-holo", p, n, t)


def maass_poincare_nonholo_coeff(p: PoincareParams, n: int, t: TruncationPolicy) -> BallReal:
    """b(-m,k,N;n) of Q-(-m,k,N) for n < 0, without the -1/(k-2)! marker at -m."""
    if n >= 0:
        raise ValueError(f"non-holomorphic coefficients need n < 0, got {n}")
    return _coefficient("maass-nonholo", p, n, t)


_COEFFICIENTS = {
    "cusp": cusp_poincare_coeff,
    "weak": weakly_holo_poincare_coeff,
    "maass-holo": maass_poincare_holo_coeff,
    "maass-nonholo": maass_poincare_nonholo_coeff,
}


def coefficient(kind: str, p: PoincareParams, n: int, t: TruncationPolicy) -> BallReal:
    if kind not in _COEFFICIENTS:
        raise ValueError(f"unknown coefficient kind {kind!r}, expected one of {KINDS}")
    return _COEFFICIENTS[kind](p, n, t)


def coefficient_table(kind: str, p: PoincareParams, indices: Iterable[int],
                      t: TruncationPolicy) -> Dict[int, BallReal]:
    indices = list(indices)
    table = {}
    for n in tqdm(indices, desc=f"{kind} {p.m},{p.k},{p.N}", disable=not t.show_progress):
        table[n] = coefficient(kind, p, n, t)
    logger.info("computed %d %s coefficients for %s", len(table), kind, p)
    return table


def nonholo_marker(p: PoincareParams) -> Fraction:
    """Coefficient of Gamma(k-1, 4 pi m y) q^-m in Q-(-m,k,N)."""
    return Fraction(-1, math.factorial(p.k - 2))


def assemble_Q(p: PoincareParams, n_max: int, t: TruncationPolicy) -> HarmonicExpansion:
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    bits = t.prec.working_bits
    holo = coefficient_table("maass-holo", p, range(0, n_max + 1), t)
    nonholo = coefficient_table("maass-nonholo", p, range(-1, -n_max - 1, -1), t)
    marker = nonholo_marker(p)
    nonholo[-p.m] = nonholo.get(-p.m, BallReal.zero(bits)) + marker
    return HarmonicExpansion(
        weight=p.weight,
        principal={-p.m: Fraction(1)},
        holo=holo,
        nonholo=dict(sorted(nonholo.items(), reverse=True)),
        n_max=n_max,
        nonholo_marker={-p.m: marker},
    )


def _check_weight(f: HarmonicExpansion, k: int):
    if f.weight != 2 - k:
        raise ValueError(f"expansion has weight {f.weight}, expected 2 - k = {2 - k}")


def bol_operator(f: HarmonicExpansion, k: int) -> Dict[int, BallReal]:
    """D^(k-1) f: c+(n) n^(k-1) q^n; the non-holomorphic part is annihilated."""
    _check_weight(f, k)
    out = {}
    for n, c in sorted({**f.principal, **f.holo}.items()):
        out[n] = ball(c) * n ** (k - 1)
    return out


def xi_operator(f: HarmonicExpansion, k: int, prec: Optional[PrecisionConfig] = None) -> Dict[int, BallReal]:
    """xi_{2-k} f = -(4 pi)^(k-1) sum_{n >= 1} c-(-n) n^(k-1) q^n (real coefficients)."""
    _check_weight(f, k)
    bits = (prec or PrecisionConfig()).working_bits
    scale = (BallReal.pi(bits) * 4).pow_int(k - 1)
    return {-n: -scale * c * (-n) ** (k - 1) for n, c in sorted(f.nonholo.items(), reverse=True)}


def xi_constant(p: PoincareParams, bits: int = 128) -> BallReal:
    """xi(Q(-m,k,N)) = xi_constant * P(m,k,N)."""
    scale = (BallReal.pi(bits) * 4).pow_int(p.k - 1)
    return scale * Fraction(p.m ** (p.k - 1), math.factorial(p.k - 2))


def eval_expansion(f: HarmonicExpansion, k: int, x, y,
                   prec: Optional[PrecisionConfig] = None) -> Tuple[BallReal, BallReal]:
    """Value of f at z = x + iy as (real, imag) balls.

    The radius includes a heuristic allowance of twice the size of the last stored
    holomorphic and non-holomorphic terms for the omitted tail.
    """
    prec = prec or PrecisionConfig()
    bits = prec.working_bits
    x, y = ball(x, bits), ball(y, bits)
    if float(y.lower()) <= 0:
        raise ValueError(f"evaluation point needs y > 0, got {y}")
    two_pi = BallReal.pi(bits) * 2
    real = BallReal.zero(bits)
    imag = BallReal.zero(bits)
    last = {}

    def accumulate(n, weight):
        nonlocal real, imag
        angle = two_pi * x * n
        term_re = weight * angle.cos()
        term_im = weight * angle.sin()
        real = real + term_re
        imag = imag + term_im
        return weight

    for n, c in sorted({**f.principal, **f.holo}.items()):
        last["holo"] = accumulate(n, ball(c, bits) * (-two_pi * y * n).exp())
    for n, c in sorted(f.nonholo.items(), reverse=True):
        gamma = incomplete_gamma_int(k - 1, two_pi * 2 * y * (-n), prec)
        last["nonholo"] = accumulate(n, c * gamma * (-two_pi * y * n).exp())

    allowance = sum((float(w.abs_upper()) for w in last.values()), 0.0) * 2
    if allowance:
        real = real.add_error(allowance)
        imag = imag.add_error(allowance)
    return real, imag


def regularized_pairing_rhs(d: CuspConstantData, k: int, bits: int = 128) -> BallReal:
    """(-1)^k / [Gamma(1):Gamma] * sum_cusps w * c_g(0) * c_f+(0)."""
    total = BallReal.zero(bits)
    for width, cg0, cf0 in d.entries:
        total = total + ball(cg0, bits) * ball(cf0, bits) * width
    sign = -1 if k % 2 else 1
    return total * Fraction(sign, d.index)
