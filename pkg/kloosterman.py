import logging
import threading
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from math import gcd
from typing import Dict, Iterator, Optional, Tuple

import sympy
from mpmath import libmp
from sympy import divisors, factorint

from numerics import BallReal, PrecisionConfig, _mag_add, _ulps

logger = logging.getLogger(__name__)

DEFAULT_CACHE_BOUND = 5000

_NEAR = libmp.round_nearest


@dataclass(frozen=True)
class KloostermanKey:
    m: int
    n: int
    c: int

    def __post_init__(self):
        if self.c < 1:
            raise ValueError(f"Kloosterman modulus must be positive, got {self.c}")

    def reduced(self) -> "KloostermanKey":
        return KloostermanKey(self.m % self.c, self.n % self.c, self.c)


def mod_inverse(v: int, c: int) -> int:
    if c < 1:
        raise ValueError(f"modulus must be positive, got {c}")
    if gcd(v, c) != 1:
        raise ValueError(f"{v} is not invertible modulo {c}")
    if c == 1:
        return 0
    return int(sympy.mod_inverse(v, c)) % c


@lru_cache(maxsize=4096)
def _units(c: int) -> Tuple[Tuple[int, int], ...]:
    return tuple((v, mod_inverse(v, c)) for v in range(c) if gcd(v, c) == 1)


@lru_cache(maxsize=512)
def _cos_table(c: int, prec: int) -> Tuple[tuple, ...]:
    """Midpoints of cos(2 pi r / c) for 0 <= r <= c // 2."""
    wp = prec + 10
    return tuple(
        libmp.mpf_cos_pi(libmp.from_rational(2 * r, c, wp, _NEAR), prec, _NEAR)
        for r in range(c // 2 + 1)
    )


def _residue_counts(m: int, n: int, c: int) -> Counter:
    counts = Counter()
    for v, v_bar in _units(c):
        r = (m * v_bar + n * v) % c
        counts[min(r, c - r)] += 1
    return counts


def _kloosterman_ball(key: KloostermanKey, prec: int) -> BallReal:
    counts = _residue_counts(key.m, key.n, key.c)
    table = _cos_table(key.c, prec)
    wp = prec + 20
    total = libmp.fzero
    for r, count in sorted(counts.items()):
        total = libmp.mpf_add(total, libmp.mpf_mul_int(table[r], count, wp, _NEAR), wp, _NEAR)
    mid = libmp.mpf_pos(total, prec, _NEAR)
    # cosines are within 5 ulp each; partial sums stay below `terms` in magnitude
    terms = sum(counts.values())
    per_term = libmp.mpf_shift(libmp.from_int(terms * 5), -prec)
    summation = libmp.mpf_shift(libmp.from_int(2 * (len(counts) + 1) * terms), -wp)
    rad = _mag_add(per_term, summation, _ulps(mid, prec))
    return BallReal(mid, rad, prec)


class KloostermanCache:
    """Memo of K(m, n, c) keyed by (m mod c, n mod c, c, precision)."""

    def __init__(self, bound: int = DEFAULT_CACHE_BOUND):
        self.bound = bound
        self._values: Dict[Tuple[int, int, int, int], BallReal] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, key: KloostermanKey, prec: int) -> Optional[BallReal]:
        reduced = key.reduced()
        with self._lock:
            value = self._values.get((reduced.m, reduced.n, reduced.c, prec))
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
            return value

    def put(self, key: KloostermanKey, prec: int, value: BallReal):
        if key.c > self.bound:
            return
        reduced = key.reduced()
        with self._lock:
            self._values.setdefault((reduced.m, reduced.n, reduced.c, prec), value)

    def clear(self):
        with self._lock:
            self._values.clear()
            self.hits = self.misses = 0

    def items(self) -> Iterator[Tuple[KloostermanKey, BallReal]]:
        with self._lock:
            snapshot = sorted(self._values.items())
        for (m, n, c, _), value in snapshot:
            yield KloostermanKey(m, n, c), value

    def __len__(self):
        with self._lock:
            return len(self._values)


default_cache = KloostermanCache()


def kloosterman(
    key: KloostermanKey,
    prec: Optional[PrecisionConfig] = None,
    cache: Optional[KloostermanCache] = default_cache,
) -> BallReal:
    """K(m, n, c) = sum over units v mod c of cos(2 pi (m v' + n v) / c), v v' = 1 mod c."""
    bits = (prec or PrecisionConfig()).working_bits
    if cache is not None:
        value = cache.get(key, bits)
        if value is not None:
            return value
    value = _kloosterman_ball(key.reduced(), bits)
    if cache is not None:
        cache.put(key, bits, value)
    return value


def kloosterman_exact_terms(key: KloostermanKey) -> Counter:
    """Residue histogram: K = sum count[r] cos(2 pi r / c)."""
    return _residue_counts(key.m, key.n, key.c)


def mobius(n: int) -> int:
    factors = factorint(n)
    if any(e > 1 for e in factors.values()):
        return 0
    return -1 if len(factors) % 2 else 1


def ramanujan_sum(m: int, c: int) -> int:
    if c < 1:
        raise ValueError(f"Ramanujan sum modulus must be positive, got {c}")
    g = gcd(m, c)
    return sum(d * mobius(c // d) for d in divisors(g))
