import logging
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import divisor_sigma, factorint, isprime, jacobi_symbol

logger = logging.getLogger(__name__)

Rational = Union[int, Fraction]

B12 = Fraction(-691, 2730)
TWENTY_FOUR_OVER_B12 = 24 / B12


class SeriesError(ValueError):
    pass


class TruncationError(ValueError):
    pass


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


@dataclass(frozen=True, eq=False)
class LaurentQSeries:
    """Exact q-expansion sum_{n >= min_exp} c(n) q^n known for n < trunc_order.

    Coefficients at exponents >= trunc_order are unknown, not zero.
    """

    min_exp: int
    coeffs: Tuple[Fraction, ...]
    trunc_order: int

    def __post_init__(self):
        coeffs = tuple(Fraction(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if self.trunc_order < self.min_exp:
            raise SeriesError(
                f"trunc_order {self.trunc_order} is below min_exp {self.min_exp}"
            )
        if len(coeffs) != self.trunc_order - self.min_exp:
            raise SeriesError(
                f"expected {self.trunc_order - self.min_exp} coefficients, got {len(coeffs)}"
            )

    @classmethod
    def from_dict(
        cls, coeffs: Dict[int, Rational], trunc_order: int, min_exp: Optional[int] = None
    ) -> "LaurentQSeries":
        if min_exp is None:
            support = [n for n in coeffs if n < trunc_order]
            min_exp = min(support) if support else trunc_order
        for n in coeffs:
            if n < min_exp and coeffs[n]:
                raise SeriesError(f"coefficient at q^{n} lies below min_exp {min_exp}")
        values = [coeffs.get(n, 0) for n in range(min_exp, trunc_order)]
        return cls(min_exp, tuple(values), trunc_order)

    @classmethod
    def constant(cls, c: Rational, trunc_order: int) -> "LaurentQSeries":
        if trunc_order <= 0:
            return cls(trunc_order, (), trunc_order)
        return cls(0, (c,) + (0,) * (trunc_order - 1), trunc_order)

    @classmethod
    def monomial(cls, n: int, trunc_order: int, c: Rational = 1) -> "LaurentQSeries":
        return cls.from_dict({n: c}, trunc_order, min_exp=min(n, trunc_order))

    def coefficient(self, n: int) -> Fraction:
        if n >= self.trunc_order:
            raise TruncationError(f"coefficient of q^{n} unknown (trunc_order {self.trunc_order})")
        if n < self.min_exp:
            return Fraction(0)
        return self.coeffs[n - self.min_exp]

    __getitem__ = coefficient

    def items(self) -> Iterator[Tuple[int, Fraction]]:
        for i, c in enumerate(self.coeffs):
            yield self.min_exp + i, c

    def nonzero_items(self) -> Iterator[Tuple[int, Fraction]]:
        return ((n, c) for n, c in self.items() if c)

    def to_dict(self) -> Dict[int, Fraction]:
        return dict(self.nonzero_items())

    def valuation(self) -> Optional[int]:
        for n, c in self.items():
            if c:
                return n
        return None

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def normalized(self) -> "LaurentQSeries":
        v = self.valuation()
        if v is None:
            return LaurentQSeries(self.trunc_order, (), self.trunc_order)
        return LaurentQSeries(v, self.coeffs[v - self.min_exp :], self.trunc_order)

    def truncate(self, trunc_order: int) -> "LaurentQSeries":
        if trunc_order > self.trunc_order:
            raise TruncationError(
                f"cannot extend trunc_order {self.trunc_order} to {trunc_order}"
            )
        if trunc_order <= self.min_exp:
            return LaurentQSeries(trunc_order, (), trunc_order)
        return LaurentQSeries(
            self.min_exp, self.coeffs[: trunc_order - self.min_exp], trunc_order
        )

    def _padded(self, min_exp: int, trunc_order: int) -> List[Fraction]:
        return [self.coefficient(n) for n in range(min_exp, trunc_order)]

    def _as_series(self, other) -> "LaurentQSeries":
        if isinstance(other, LaurentQSeries):
            return other
        return LaurentQSeries.constant(other, self.trunc_order)

    def __eq__(self, other):
        if not isinstance(other, LaurentQSeries):
            return NotImplemented
        if self.trunc_order != other.trunc_order:
            return False
        low = min(self.min_exp, other.min_exp)
        return self._padded(low, self.trunc_order) == other._padded(low, self.trunc_order)

    __hash__ = None

    def __neg__(self):
        return LaurentQSeries(self.min_exp, tuple(-c for c in self.coeffs), self.trunc_order)

    def __add__(self, other):
        other = self._as_series(other)
        low = min(self.min_exp, other.min_exp)
        trunc = min(self.trunc_order, other.trunc_order)
        if trunc < low:
            return LaurentQSeries(trunc, (), trunc)
        values = [a + b for a, b in zip(self._padded(low, trunc), other._padded(low, trunc))]
        return LaurentQSeries(low, tuple(values), trunc)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._as_series(other))

    def __rsub__(self, other):
        return self._as_series(other) - self

    def __mul__(self, other):
        if not isinstance(other, LaurentQSeries):
            c = Fraction(other)
            return LaurentQSeries(self.min_exp, tuple(c * a for a in self.coeffs), self.trunc_order)
        low = self.min_exp + other.min_exp
        trunc = min(self.trunc_order + other.min_exp, other.trunc_order + self.min_exp)
        out = [Fraction(0)] * (trunc - low)
        for i, a in enumerate(self.coeffs):
            if not a or i >= len(out):
                continue
            for j, b in enumerate(other.coeffs[: len(out) - i]):
                if b:
                    out[i + j] += a * b
        return LaurentQSeries(low, tuple(out), trunc)

    __rmul__ = __mul__

    def inverse(self) -> "LaurentQSeries":
        f = self.normalized()
        if not f.coeffs or f.coeffs[0] == 0:
            raise SeriesError("cannot invert a series with zero leading coefficient")
        length = f.trunc_order - f.min_exp
        lead_inv = 1 / f.coeffs[0]
        out = [lead_inv]
        for n in range(1, length):
            acc = sum((f.coeffs[i] * out[n - i] for i in range(1, n + 1) if f.coeffs[i]), Fraction(0))
            out.append(-lead_inv * acc)
        return LaurentQSeries(-f.min_exp, tuple(out), length - f.min_exp)

    def __pow__(self, e: int) -> "LaurentQSeries":
        if e < 0:
            return self.inverse() ** (-e)
        result = LaurentQSeries.constant(1, self.trunc_order - self.min_exp)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def __repr__(self):
        shown = [f"{c}*q^{n}" for n, c in self.nonzero_items()][:6]
        return f"LaurentQSeries({' + '.join(shown) or '0'} + O(q^{self.trunc_order}))"


def series_arith(a: LaurentQSeries, b: Optional[LaurentQSeries] = None, op: str = "add", e: int = 1):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "inv":
        return a.inverse()
    if op == "pow":
        return a ** e
    raise ValueError(f"unknown series operation: {op}")


# eta products via sparse Euler / Jacobi factors on dense integer arrays

SparseSeries = Dict[int, int]


def _pentagonal(limit: int, d: int) -> SparseSeries:
    """prod (1 - q^{dn}) = sum_k (-1)^k q^{d k(3k-1)/2} below q^limit."""
    out = {0: 1}
    k = 1
    while d * k * (3 * k - 1) // 2 < limit:
        sign = -1 if k % 2 else 1
        out[d * k * (3 * k - 1) // 2] = sign
        e = d * k * (3 * k + 1) // 2
        if e < limit:
            out[e] = sign
        k += 1
    return out


def _jacobi_cube(limit: int, d: int) -> SparseSeries:
    """prod (1 - q^{dn})^3 = sum_k (-1)^k (2k+1) q^{d k(k+1)/2} below q^limit."""
    out = {}
    k = 0
    while d * k * (k + 1) // 2 < limit:
        out[d * k * (k + 1) // 2] = (-1) ** k * (2 * k + 1)
        k += 1
    return out


def _mul_sparse(dense: np.ndarray, sparse: SparseSeries) -> np.ndarray:
    size = len(dense)
    out = np.zeros(size, dtype=object)
    for e, c in sparse.items():
        if e < size:
            out[e:] += c * dense[: size - e]
    return out


def _div_sparse(dense: np.ndarray, sparse: SparseSeries) -> np.ndarray:
    if sparse.get(0) != 1:
        raise SeriesError("sparse divisor must have constant term 1")
    steps = sorted((e, c) for e, c in sparse.items() if e > 0)
    out = dense.copy()
    if not steps:
        return out
    size = len(dense)
    block = steps[0][0]
    for start in range(block, size, block):
        stop = min(start + block, size)
        for e, c in steps:
            if e >= stop:
                break
            lo = max(start, e)
            out[lo:stop] -= c * out[lo - e : stop - e]
    return out


def _unit_dense(size: int) -> np.ndarray:
    dense = np.zeros(size, dtype=object)
    if size:
        dense[0] = 1
    return dense


def _to_series(min_exp: int, dense: np.ndarray) -> LaurentQSeries:
    return LaurentQSeries(min_exp, tuple(Fraction(int(c)) for c in dense), min_exp + len(dense))


@dataclass(frozen=True)
class EtaQuotientSpec:
    factors: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        factors = tuple((int(d), int(r)) for d, r in self.factors)
        object.__setattr__(self, "factors", factors)
        divisors = [d for d, _ in factors]
        if any(d <= 0 for d in divisors):
            raise SeriesError(f"eta divisors must be positive: {divisors}")
        if len(set(divisors)) != len(divisors):
            raise SeriesError(f"eta divisors must be distinct: {divisors}")

    @classmethod
    def parse(cls, text: str) -> "EtaQuotientSpec":
        """Parse ``d:r,d:r`` such as ``1:3,9:-3``."""
        factors = []
        for chunk in filter(None, (part.strip() for part in text.split(","))):
            try:
                d, r = chunk.split(":")
                factors.append((int(d), int(r)))
            except ValueError as err:
                raise SeriesError(f"malformed eta factor {chunk!r}, expected d:r") from err
        return cls(tuple(factors))

    @property
    def weight(self) -> Fraction:
        return Fraction(sum(r for _, r in self.factors), 2)

    @property
    def leading_exponent(self) -> int:
        total = sum(d * r for d, r in self.factors)
        if total % 24:
            raise SeriesError(f"eta quotient has non-integral leading exponent {total}/24")
        return total // 24


def eta_quotient(spec: Union[EtaQuotientSpec, Iterable[Tuple[int, int]]], terms: int) -> LaurentQSeries:
    if not isinstance(spec, EtaQuotientSpec):
        spec = EtaQuotientSpec(tuple(spec))
    if terms < 1:
        raise ValueError(f"terms must be positive, got {terms}")
    min_exp = spec.leading_exponent
    dense = _unit_dense(terms)
    for d, r in spec.factors:
        step = _mul_sparse if r > 0 else _div_sparse
        cubes, singles = divmod(abs(r), 3)
        cube = _jacobi_cube(terms, d)
        single = _pentagonal(terms, d)
        for _ in range(cubes):
            dense = step(dense, cube)
        for _ in range(singles):
            dense = step(dense, single)
    return _to_series(min_exp, dense)


def delta_series(terms: int) -> LaurentQSeries:
    return eta_quotient(((1, 24),), terms)


def cm_newform_g(terms: int) -> LaurentQSeries:
    """g(z) = eta(3z)^8, the CM newform spanning S_4(Gamma_0(9))."""
    return eta_quotient(((3, 8),), terms)


def good_example_series(terms: int) -> LaurentQSeries:
    """m(z) = (eta(z)^3/eta(9z)^3 + 3)^2 eta(3z)^8 from q^-1, ``terms`` coefficients."""
    if terms < 1:
        raise ValueError(f"terms must be positive, got {terms}")
    # eta(z)^3/eta(9z)^3 + 3 = (J(q) + 3q J(q^9)) / (q J(q^9)), J the cube product
    shifted = dict(_jacobi_cube(terms, 1))
    for e, c in _jacobi_cube(terms, 9).items():
        shifted[e + 1] = shifted.get(e + 1, 0) + 3 * c
    numerator = {e: c for e, c in shifted.items() if e < terms}
    dense = np.zeros(terms, dtype=object)
    for e, c in numerator.items():
        dense[e] = c
    dense = _mul_sparse(dense, numerator)
    for factor in (_jacobi_cube(terms, 3), _jacobi_cube(terms, 3), _pentagonal(terms, 3), _pentagonal(terms, 3)):
        dense = _mul_sparse(dense, factor)
    cube9 = _jacobi_cube(terms, 9)
    dense = _div_sparse(_div_sparse(dense, cube9), cube9)
    return _to_series(-1, dense)


def sigma_power(k: int, n: int) -> int:
    if n < 1:
        raise ValueError(f"sigma_power needs n >= 1, got {n}")
    if k < 0:
        raise ValueError(f"sigma_power needs k >= 0, got {k}")
    return int(divisor_sigma(n, k))


_EISENSTEIN = {4: (240, 3), 6: (-504, 5)}


def eisenstein(weight: int, terms: int) -> LaurentQSeries:
    if weight not in _EISENSTEIN:
        raise ValueError(f"unsupported Eisenstein weight {weight}, expected 4 or 6")
    if terms < 1:
        raise ValueError(f"terms must be positive, got {terms}")
    scale, power = _EISENSTEIN[weight]
    coeffs = [1] + [scale * sigma_power(power, n) for n in range(1, terms)]
    return LaurentQSeries(0, tuple(coeffs), terms)


def j_invariant(terms: int) -> LaurentQSeries:
    """j = E4^3 / Delta with coefficients from q^-1 through q^(terms-2)."""
    if terms < 1:
        raise ValueError(f"terms must be positive, got {terms}")
    return eisenstein(4, terms) ** 3 * delta_series(terms).inverse()


def faber_jm(m: int, terms: int) -> LaurentQSeries:
    """The unique q^-m + O(q) polynomial in j, known from q^-m for ``terms`` coefficients."""
    if m < 0:
        raise ValueError(f"faber_jm needs m >= 0, got {m}")
    if terms < 1:
        raise ValueError(f"terms must be positive, got {terms}")
    trunc = -m + terms
    if m == 0:
        return LaurentQSeries.constant(1, trunc)
    j1 = j_invariant(terms) - 744
    powers = [LaurentQSeries.constant(1, trunc), j1]
    for _ in range(2, m + 1):
        powers.append(powers[-1] * j1)
    result = powers[m].truncate(trunc)
    for e in range(-m + 1, min(1, trunc)):
        c = result[e]
        if c:
            result = result - c * powers[-e]
    return result.truncate(trunc)


def lehmer_ab(p: int, tau_p: Rational, terms: int) -> Tuple[LaurentQSeries, LaurentQSeries]:
    if not isprime(p):
        raise ValueError(f"lehmer_ab needs a prime, got {p}")
    if terms < p + 1:
        raise ValueError(f"lehmer_ab needs terms >= p + 1 = {p + 1}, got {terms}")
    trunc = -p + terms
    jm = {i: faber_jm(i, terms - p + i) for i in range(p + 1)}
    a_p = LaurentQSeries.constant(TWENTY_FOUR_OVER_B12 * (1 + p ** 11), trunc) + jm[p]
    for m in range(1, p + 1):
        a_p = a_p - 264 * sigma_power(9, m) * jm[p - m]
    b_p = -Fraction(tau_p) * (LaurentQSeries.constant(-264 + TWENTY_FOUR_OVER_B12, trunc) + jm[1])
    return a_p, b_p


def ramanujan_tau(n: int) -> int:
    if n < 1:
        raise ValueError(f"tau needs n >= 1, got {n}")
    return int(delta_series(n)[n])


def lehmer_rhs(p: int, n_hi: int) -> LaurentQSeries:
    """(A_p + B_p) / (E4 E6) from q^-p up to and including q^n_hi."""
    terms = n_hi + 1 + p
    a_p, b_p = lehmer_ab(p, ramanujan_tau(p), terms)
    e4e6 = eisenstein(4, terms) * eisenstein(6, terms)
    return ((a_p + b_p) * e4e6.inverse()).truncate(n_hi + 1)


def kronecker_symbol(D: int, n: int) -> int:
    if n == 0:
        return 1 if abs(D) == 1 else 0
    result = 1
    if n < 0:
        n = -n
        if D < 0:
            result = -result
    twos = 0
    while n % 2 == 0:
        n //= 2
        twos += 1
    if twos:
        if D % 2 == 0:
            return 0
        if twos % 2 and D % 8 in (3, 5):
            result = -result
    if n == 1:
        return result
    return result * int(jacobi_symbol(D % n, n))


def is_fundamental_discriminant(D: int) -> bool:
    if D in (1, -1):
        return True
    if D == 0:
        return False

    def squarefree(x):
        return all(e == 1 for e in factorint(abs(x)).values())

    if D % 4 == 1:
        return squarefree(D)
    if D % 4 == 0:
        m = D // 4
        return m % 4 in (2, 3) and squarefree(m)
    return False


@dataclass(frozen=True)
class DirichletCharacterSpec:
    kind: str = "trivial"
    modulus: int = 1
    discriminant: int = 1

    def __post_init__(self):
        if self.kind == "trivial":
            if self.modulus < 1:
                raise ValueError(f"character modulus must be positive, got {self.modulus}")
        elif self.kind == "kronecker":
            if not is_fundamental_discriminant(self.discriminant):
                raise ValueError(f"{self.discriminant} is not a fundamental discriminant")
        else:
            raise ValueError(f"unknown character kind {self.kind!r}")

    @classmethod
    def trivial(cls, modulus: int = 1) -> "DirichletCharacterSpec":
        return cls("trivial", modulus=modulus)

    @classmethod
    def kronecker(cls, D: int) -> "DirichletCharacterSpec":
        return cls("kronecker", discriminant=D)

    def __call__(self, n: int) -> int:
        if self.kind == "trivial":
            return 1 if gcd(n, self.modulus) == 1 else 0
        return kronecker_symbol(self.discriminant, n)


def hecke_tp(f: LaurentQSeries, p: int, k: int, chi: DirichletCharacterSpec) -> LaurentQSeries:
    """c'(n) = c(pn) + chi(p) p^(k-1) c(n/p)."""
    if not isprime(p):
        raise ValueError(f"hecke_tp needs a prime, got {p}")
    trunc = _ceil_div(f.trunc_order, p)
    low = min(_ceil_div(f.min_exp, p), p * f.min_exp, trunc)
    if trunc <= low and f.trunc_order > f.min_exp:
        raise TruncationError(f"series known below q^{f.trunc_order} is too short for T({p})")
    weight_factor = chi(p) * Fraction(p) ** (k - 1)
    coeffs = []
    for n in range(low, trunc):
        c = f[p * n]
        if n % p == 0:
            c += weight_factor * f[n // p]
        coeffs.append(c)
    return LaurentQSeries(low, tuple(coeffs), trunc)


def u_operator(f: LaurentQSeries, p: int) -> LaurentQSeries:
    if p < 1:
        raise ValueError(f"U needs a positive index, got {p}")
    low = _ceil_div(f.min_exp, p)
    trunc = _ceil_div(f.trunc_order, p)
    return LaurentQSeries(low, tuple(f[p * n] for n in range(low, trunc)), trunc)


def v_operator(f: LaurentQSeries, p: int) -> LaurentQSeries:
    if p < 1:
        raise ValueError(f"V needs a positive index, got {p}")
    return LaurentQSeries.from_dict(
        {p * n: c for n, c in f.nonzero_items()}, p * f.trunc_order, min_exp=p * f.min_exp
    )


def u_v_operators(f: LaurentQSeries, p: int, which: str) -> LaurentQSeries:
    if which == "U":
        return u_operator(f, p)
    if which == "V":
        return v_operator(f, p)
    raise ValueError(f"unknown operator {which!r}, expected U or V")


def twist(f: LaurentQSeries, chi: DirichletCharacterSpec) -> LaurentQSeries:
    return LaurentQSeries(f.min_exp, tuple(chi(n) * c for n, c in f.items()), f.trunc_order)


def padic_valuation_stats(f: LaurentQSeries, p: int, b: int, X: int, denominator: int = 1) -> Fraction:
    """Share of 1 <= n <= X whose coefficient (times ``denominator``) is not 0 mod p^b."""
    if X < 1 or b < 1:
        raise ValueError(f"X and b must be positive, got X={X}, b={b}")
    if f.trunc_order <= X:
        raise TruncationError(f"need coefficients through q^{X}, series known below q^{f.trunc_order}")
    modulus = p ** b
    count = 0
    for n in range(1, X + 1):
        c = f[n] * denominator
        if c.denominator != 1:
            raise SeriesError(f"coefficient of q^{n} is not integral after scaling: {c}")
        if c.numerator % modulus:
            count += 1
    return Fraction(count, X)


def density_curve(
    f: LaurentQSeries, p: int, bs: Sequence[int], Xs: Sequence[int], denominator: int = 1
) -> List[Tuple[int, int, Fraction]]:
    return [(X, b, padic_valuation_stats(f, p, b, X, denominator)) for b in bs for X in Xs]


def padic_a_invariant(principal: Dict[int, Rational], p: int) -> int:
    """Smallest d >= 0 with c(p^d n) = 0 for every n < 0."""
    support = [n for n, c in principal.items() if n < 0 and c]
    d = 0
    while any(n % p ** d == 0 for n in support):
        d += 1
    return d
