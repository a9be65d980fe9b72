"""Ball arithmetic on top of mpmath's raw mpf kernels.

A ``BallReal`` is a midpoint (a raw ``libmp`` mpf tuple, rounded to nearest at
``prec`` bits) and a radius (a raw mpf rounded upward at ``MAG_BITS`` bits).
Every operation returns a ball that contains the exact result of the same
operation applied to any points of the input balls.
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import mpmath
from mpmath import libmp

logger = logging.getLogger(__name__)

MAG_BITS = 30
DEFAULT_WORKING_BITS = 128
DEFAULT_TARGET_ABS_ERROR = 2.0 ** -64
MAX_SERIES_TERMS = 100000

_NEAR = libmp.round_nearest
_UP = libmp.round_ceiling
_DOWN = libmp.round_floor
_SPECIALS = (libmp.finf, libmp.fninf, libmp.fnan)


class BallDomainError(ValueError):
    pass


class ConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PrecisionConfig:
    working_bits: int = DEFAULT_WORKING_BITS
    target_abs_error: float = DEFAULT_TARGET_ABS_ERROR

    def __post_init__(self):
        if self.working_bits < 53:
            raise ValueError(f"working_bits must be >= 53, got {self.working_bits}")
        if not self.target_abs_error > 0:
            raise ValueError(f"target_abs_error must be positive, got {self.target_abs_error}")

    def doubled(self) -> "PrecisionConfig":
        return PrecisionConfig(2 * self.working_bits, self.target_abs_error)


# radius helpers: all arguments are nonnegative raw mpfs, results round up


def _mag_add(*xs):
    total = libmp.fzero
    for x in xs:
        total = libmp.mpf_add(total, x, MAG_BITS, _UP)
    return total


def _mag_mul(a, b):
    return libmp.mpf_mul(a, b, MAG_BITS, _UP)


def _mag_div(a, b):
    return libmp.mpf_div(a, b, MAG_BITS, _UP)


def _abs_up(x):
    return libmp.mpf_abs(x, MAG_BITS, _UP)


def _abs_down(x):
    return libmp.mpf_abs(x, MAG_BITS, _DOWN)


def _inflate(x):
    # transcendental kernels are faithful, not correctly rounded
    return _mag_add(x, libmp.mpf_shift(x, -20))


def _ulps(mid, prec, k=1):
    """Upper bound for k units in the last place of ``mid`` at ``prec`` bits."""
    if mid == libmp.fzero:
        return libmp.fzero
    return libmp.mpf_shift(_abs_up(mid), k - prec)


def _to_fraction(raw) -> Fraction:
    p, q = libmp.to_rational(raw)
    return Fraction(p, q)


@dataclass(frozen=True)
class BallReal:
    mid: tuple
    rad: tuple = libmp.fzero
    prec: int = DEFAULT_WORKING_BITS

    def __post_init__(self):
        if self.mid in _SPECIALS or self.rad in _SPECIALS:
            raise ValueError("ball midpoint and radius must be finite")
        if libmp.mpf_sign(self.rad) < 0:
            raise ValueError("ball radius must be nonnegative")

    # constructors

    @classmethod
    def zero(cls, prec: int = DEFAULT_WORKING_BITS) -> "BallReal":
        return cls(libmp.fzero, libmp.fzero, prec)

    @classmethod
    def one(cls, prec: int = DEFAULT_WORKING_BITS) -> "BallReal":
        return cls(libmp.fone, libmp.fzero, prec)

    @classmethod
    def from_int(cls, n: int, prec: int = DEFAULT_WORKING_BITS) -> "BallReal":
        mid = libmp.from_int(n, prec, _NEAR)
        exact = libmp.mpf_eq(mid, libmp.from_int(n))
        return cls(mid, libmp.fzero if exact else _ulps(mid, prec), prec)

    @classmethod
    def from_rational(cls, value, prec: int = DEFAULT_WORKING_BITS) -> "BallReal":
        value = Fraction(value)
        mid = libmp.from_rational(value.numerator, value.denominator, prec, _NEAR)
        exact = _to_fraction(mid) == value
        return cls(mid, libmp.fzero if exact else _ulps(mid, prec), prec)

    @classmethod
    def from_float(cls, x: float, prec: int = DEFAULT_WORKING_BITS) -> "BallReal":
        return cls(libmp.from_float(x), libmp.fzero, prec)

    @classmethod
    def from_mpf(cls, x, prec: int = DEFAULT_WORKING_BITS) -> "BallReal":
        raw = x._mpf_ if isinstance(x, mpmath.mpf) else mpmath.mpf(x)._mpf_
        return cls(raw, libmp.fzero, prec)

    @classmethod
    def from_string(cls, text: str, prec: Optional[int] = None) -> "BallReal":
        """Parse ``<midpoint> +- <radius>`` (``±`` is accepted as well)."""
        normalized = text.replace("±", "+-")
        parts = normalized.split("+-")
        if len(parts) != 2:
            raise ValueError(f"malformed ball literal: {text!r}")
        mid_s, rad_s = parts[0].strip(), parts[1].strip()
        if prec is None:
            digits = sum(ch.isdigit() for ch in mid_s.split("e")[0].split("E")[0])
            prec = max(53, int(digits * 3.33) + 8)
        try:
            mid = libmp.from_str(mid_s, prec, _NEAR)
            rad = libmp.from_str(rad_s, MAG_BITS, _UP)
        except (ValueError, TypeError) as err:
            raise ValueError(f"malformed ball literal: {text!r}") from err
        if libmp.mpf_sign(rad) < 0:
            raise ValueError(f"negative radius in ball literal: {text!r}")
        return cls(mid, _mag_add(rad, _ulps(mid, prec)), prec)

    @classmethod
    def pi(cls, prec: int = DEFAULT_WORKING_BITS) -> "BallReal":
        mid = libmp.mpf_pi(prec, _NEAR)
        return cls(mid, _ulps(mid, prec), prec)

    # views

    @property
    def midpoint(self):
        return mpmath.mp.make_mpf(self.mid)

    @property
    def radius(self):
        return mpmath.mp.make_mpf(self.rad)

    def lower(self):
        return mpmath.mp.make_mpf(self._lower_raw())

    def upper(self):
        return mpmath.mp.make_mpf(self._upper_raw())

    def abs_upper(self):
        return mpmath.mp.make_mpf(self._abs_upper_raw())

    def _lower_raw(self):
        return libmp.mpf_sub(self.mid, self.rad, self.prec, _DOWN)

    def _upper_raw(self):
        return libmp.mpf_add(self.mid, self.rad, self.prec, _UP)

    def _abs_upper_raw(self):
        return _mag_add(_abs_up(self.mid), self.rad)

    def as_fractions(self):
        """Exact (midpoint, radius) as Fractions."""
        return _to_fraction(self.mid), _to_fraction(self.rad)

    def is_zero(self) -> bool:
        return self.mid == libmp.fzero and self.rad == libmp.fzero

    def is_exact(self) -> bool:
        return self.rad == libmp.fzero

    def __float__(self):
        return libmp.to_float(self.mid)

    def contains(self, value) -> bool:
        """True if ``value`` (a number or a whole ball) lies inside this ball."""
        mid = _to_fraction(self.mid)
        rad = _to_fraction(self.rad)
        if isinstance(value, BallReal):
            other_mid = _to_fraction(value.mid)
            return abs(other_mid - mid) + _to_fraction(value.rad) <= rad
        return abs(_exact_fraction(value) - mid) <= rad

    def overlaps(self, other: "BallReal") -> bool:
        other = _coerce(other, self.prec)
        gap = abs(_to_fraction(self.mid) - _to_fraction(other.mid))
        return gap <= _to_fraction(self.rad) + _to_fraction(other.rad)

    def add_error(self, err) -> "BallReal":
        if isinstance(err, mpmath.mpf):
            err = err._mpf_
        elif not isinstance(err, tuple):
            err = mpmath.mpf(err)._mpf_
        return BallReal(self.mid, _mag_add(self.rad, _abs_up(err)), self.prec)

    def rounded(self, prec: int) -> "BallReal":
        mid = libmp.mpf_pos(self.mid, prec, _NEAR)
        extra = libmp.fzero if mid == self.mid else _ulps(mid, prec)
        return BallReal(mid, _mag_add(self.rad, extra), prec)

    # arithmetic

    def __neg__(self):
        return BallReal(libmp.mpf_neg(self.mid), self.rad, self.prec)

    def __pos__(self):
        return self

    def __abs__(self):
        return BallReal(libmp.mpf_abs(self.mid), self.rad, self.prec)

    def __add__(self, other):
        other = _coerce(other, self.prec)
        prec = max(self.prec, other.prec)
        mid = libmp.mpf_add(self.mid, other.mid, prec, _NEAR)
        return BallReal(mid, _mag_add(self.rad, other.rad, _ulps(mid, prec)), prec)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_coerce(other, self.prec))

    def __rsub__(self, other):
        return _coerce(other, self.prec) + (-self)

    def __mul__(self, other):
        other = _coerce(other, self.prec)
        prec = max(self.prec, other.prec)
        mid = libmp.mpf_mul(self.mid, other.mid, prec, _NEAR)
        rad = _mag_add(
            _mag_mul(_abs_up(self.mid), other.rad),
            _mag_mul(_abs_up(other.mid), self.rad),
            _mag_mul(self.rad, other.rad),
            _ulps(mid, prec),
        )
        return BallReal(mid, rad, prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other, self.prec)
        prec = max(self.prec, other.prec)
        low = libmp.mpf_sub(_abs_down(other.mid), other.rad, MAG_BITS, _DOWN)
        if libmp.mpf_sign(low) <= 0:
            raise BallDomainError(f"division by a ball containing 0: {other}")
        mid = libmp.mpf_div(self.mid, other.mid, prec, _NEAR)
        num = _mag_add(
            _mag_mul(_abs_up(self.mid), other.rad),
            _mag_mul(_abs_up(other.mid), self.rad),
        )
        den = libmp.mpf_mul(_abs_down(other.mid), low, MAG_BITS, _DOWN)
        return BallReal(mid, _mag_add(_mag_div(num, den), _ulps(mid, prec)), prec)

    def __rtruediv__(self, other):
        return _coerce(other, self.prec) / self

    def __pow__(self, e: int):
        return self.pow_int(e)

    def pow_int(self, e: int) -> "BallReal":
        if not isinstance(e, int):
            raise TypeError(f"pow_int needs an integer exponent, got {e!r}")
        if e < 0:
            return BallReal.one(self.prec) / self.pow_int(-e)
        result = BallReal.one(self.prec)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def sqrt(self) -> "BallReal":
        if libmp.mpf_sign(self._lower_raw()) < 0:
            raise BallDomainError(f"sqrt of a ball crossing 0: {self}")
        if self.mid == libmp.fzero:
            return BallReal.zero(self.prec)
        mid = libmp.mpf_sqrt(self.mid, self.prec, _NEAR)
        root_low = libmp.mpf_sqrt(self.mid, MAG_BITS, _DOWN)
        rad = _mag_add(_mag_div(self.rad, root_low), _ulps(mid, self.prec))
        return BallReal(mid, rad, self.prec)

    def exp(self) -> "BallReal":
        if self.is_zero():
            return BallReal.one(self.prec)
        mid = libmp.mpf_exp(self.mid, self.prec, _NEAR)
        top = _inflate(libmp.mpf_exp(self._upper_raw(), MAG_BITS, _UP))
        # mean value theorem: |e^x - e^m| <= r * e^(m + r)
        rad = _mag_add(_mag_mul(self.rad, top), _ulps(mid, self.prec, 2))
        return BallReal(mid, rad, self.prec)

    def cos(self) -> "BallReal":
        mid = libmp.mpf_cos(self.mid, self.prec, _NEAR)
        return BallReal(mid, self._trig_radius(mid), self.prec)

    def sin(self) -> "BallReal":
        mid = libmp.mpf_sin(self.mid, self.prec, _NEAR)
        return BallReal(mid, self._trig_radius(mid), self.prec)

    def _trig_radius(self, mid):
        # both functions are 1-Lipschitz and bounded by 1
        spread = libmp.ftwo if libmp.mpf_gt(self.rad, libmp.ftwo) else self.rad
        floor = libmp.mpf_shift(libmp.fone, -self.prec)
        return _mag_add(spread, _ulps(mid, self.prec, 2), floor)

    def to_string(self) -> str:
        """Serialize as ``<midpoint> +- <radius>``; parsing gives a containing ball."""
        dps = int(self.prec * 0.30103) + 3
        mid_s = libmp.to_str(self.mid, dps)
        rad = _inflate(_mag_add(self.rad, _ulps(self.mid, self.prec, 2)))
        return f"{mid_s} +- {libmp.to_str(rad, 8)}"

    def __str__(self):
        return f"{libmp.to_str(self.mid, 20)} +- {libmp.to_str(self.rad, 3)}"


Number = Union[int, Fraction, float, BallReal]


def _exact_fraction(value) -> Fraction:
    if isinstance(value, mpmath.mpf):
        return _to_fraction(value._mpf_)
    return Fraction(value)


def _coerce(value, prec: int) -> BallReal:
    if isinstance(value, BallReal):
        return value
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, int):
        return BallReal.from_int(value, prec)
    if isinstance(value, Fraction):
        return BallReal.from_rational(value, prec)
    if isinstance(value, float):
        return BallReal.from_float(value, prec)
    if isinstance(value, mpmath.mpf):
        return BallReal.from_mpf(value, prec)
    if isinstance(value, str):
        return BallReal.from_string(value, prec)
    raise TypeError(f"cannot convert {type(value).__name__} to BallReal")


def ball(value, prec: int = DEFAULT_WORKING_BITS) -> BallReal:
    return _coerce(value, prec)


_UNARY = {
    "neg": BallReal.__neg__,
    "sqrt": BallReal.sqrt,
    "exp": BallReal.exp,
    "cos": BallReal.cos,
    "sin": BallReal.sin,
}
_BINARY = {
    "add": BallReal.__add__,
    "sub": BallReal.__sub__,
    "mul": BallReal.__mul__,
    "div": BallReal.__truediv__,
}


def ball_arith(a: BallReal, b=None, op: str = "add") -> BallReal:
    if op in _UNARY:
        return _UNARY[op](a)
    if op in _BINARY:
        if b is None:
            raise ValueError(f"operation {op} needs a second operand")
        return _BINARY[op](a, b)
    if op == "pow_int":
        return a.pow_int(b)
    raise ValueError(f"unknown ball operation: {op}")


def _require_nonnegative(x: BallReal, name: str):
    if libmp.mpf_sign(x._lower_raw()) < 0:
        raise BallDomainError(f"{name} needs a nonnegative argument, got {x}")


def _bessel_series(nu: int, x, alternating: bool, prec: Optional[PrecisionConfig]) -> BallReal:
    if not isinstance(nu, int) or nu < 1:
        raise ValueError(f"Bessel order must be an integer >= 1, got {nu!r}")
    prec = prec or PrecisionConfig()
    x = _coerce(x, prec.working_bits)
    name = "bessel_j" if alternating else "bessel_i"
    _require_nonnegative(x, name)
    if x.is_zero():
        return BallReal.zero(prec.working_bits)

    # cancellation in the alternating sum costs about x*log2(e) bits
    extra = 10 + (int(libmp.to_float(x._upper_raw()) * 1.45) if alternating else 0)
    wp = prec.working_bits + extra
    x = x.rounded(max(wp, x.prec))

    half = x * Fraction(1, 2)
    h2 = half * half
    h2_upper = _abs_up(h2._upper_raw())
    target = libmp.from_float(prec.target_abs_error)

    term = half.pow_int(nu) / math.factorial(nu)
    total = term
    for j in range(1, MAX_SERIES_TERMS):
        term = term * h2 / (j * (nu + j))
        if alternating:
            term = -term
        total = total + term

        ratio = _mag_div(h2_upper, libmp.from_int((j + 1) * (nu + j + 1)))
        if not libmp.mpf_lt(ratio, libmp.fhalf):
            continue
        size = term._abs_upper_raw()
        if alternating:
            # terms decrease in magnitude from here on
            tail = _mag_mul(size, ratio)
        else:
            rest = libmp.mpf_sub(libmp.fone, ratio, MAG_BITS, _DOWN)
            tail = _mag_div(_mag_mul(size, ratio), rest)
        if libmp.mpf_le(tail, target) or libmp.mpf_le(tail, _ulps(total.mid, wp)):
            logger.debug("%s(%d, %s) converged after %d terms", name, nu, x, j + 1)
            return total.add_error(tail).rounded(prec.working_bits)
    raise ConvergenceError(f"{name}({nu}, {x}) did not converge in {MAX_SERIES_TERMS} terms")


def bessel_i(nu: int, x, prec: Optional[PrecisionConfig] = None) -> BallReal:
    """Modified Bessel function I_nu(x) for integer nu >= 1 and x >= 0."""
    return _bessel_series(nu, x, alternating=False, prec=prec)


def bessel_j(nu: int, x, prec: Optional[PrecisionConfig] = None) -> BallReal:
    """Bessel function J_nu(x) for integer nu >= 1 and x >= 0."""
    return _bessel_series(nu, x, alternating=True, prec=prec)


def bessel_i_majorant(nu: int, x) -> BallReal:
    """Upper bound (x/2)^nu e^(x^2/4) / nu! for I_nu(x), valid for x >= 0."""
    x = _coerce(x, 64)
    half_up = BallReal(libmp.mpf_shift(_abs_up(x._upper_raw()), -1), libmp.fzero, 64)
    value = half_up.pow_int(nu) * (half_up * half_up).exp() / math.factorial(nu)
    return BallReal(value._upper_raw(), libmp.fzero, 64)


def incomplete_gamma_int(a: int, x, prec: Optional[PrecisionConfig] = None) -> BallReal:
    """Upper incomplete Gamma function for integer a >= 1."""
    if not isinstance(a, int) or a < 1:
        raise ValueError(f"incomplete_gamma_int needs an integer a >= 1, got {a!r}")
    prec = prec or PrecisionConfig()
    x = _coerce(x, prec.working_bits)
    _require_nonnegative(x, "incomplete_gamma_int")
    partial = BallReal.zero(prec.working_bits)
    term = BallReal.one(prec.working_bits)
    for j in range(a):
        partial = partial + term
        term = term * x / (j + 1)
    return partial * (-x).exp() * math.factorial(a - 1)


def recognize_rational(x: BallReal, D: int) -> Optional[Fraction]:
    """Return p/D if it is the only fraction with denominator D inside ``x``."""
    if D < 1:
        raise ValueError(f"denominator must be positive, got {D}")
    mid = _to_fraction(x.mid)
    rad = _to_fraction(x.rad)
    if rad * D >= Fraction(1, 2):
        return None
    candidate = Fraction(round(mid * D), D)
    if abs(mid - candidate) > rad:
        return None
    return candidate


def format_over(value: Fraction, D: int) -> str:
    """Display ``value`` with denominator D when possible, e.g. -48/512."""
    if D % value.denominator:
        return str(value)
    return f"{value.numerator * (D // value.denominator)}/{D}"


def format_recognized(value: Fraction, D: int) -> str:
    """``format_over`` followed by the lowest-terms form when they differ: -2/8 = -1/4."""
    over = format_over(value, D)
    return over if over == str(value) else f"{over} = {value}"
