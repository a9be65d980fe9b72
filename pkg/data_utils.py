import csv
import dataclasses
import json
import logging
import os
import re
import tempfile
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

from kloosterman import KloostermanCache, KloostermanKey
from numerics import BallReal
from poincare import KINDS, PoincareParams, TruncationPolicy
from qseries import LaurentQSeries

try:
    import fcntl
except ImportError:  # not on POSIX
    fcntl = None

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

_SERIES_HEADER = re.compile(r"^qseries min_exp=(-?\d+) trunc=(-?\d+)$")
_POINCARE_HEADER = re.compile(r"^poincare m=(\d+) k=(\d+) N=(\d+) kind=([a-z-]+)$")
_POLICY_LINE = re.compile(r"^policy c_max=(\w+) working_bits=(\d+) target_tail=(\S+)$")


class CacheFormatError(ValueError):
    def __init__(self, line_no: int, message: str, path: Optional[PathLike] = None):
        self.line_no = line_no
        self.message = message
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line_no}: {message}")


def _lines(text: str) -> List[Tuple[int, str]]:
    return [(i, line.strip()) for i, line in enumerate(text.splitlines(), start=1) if line.strip()]


# q-series


def series_to_text(series: LaurentQSeries) -> str:
    lines = [f"qseries min_exp={series.min_exp} trunc={series.trunc_order}"]
    lines.extend(f"{n} {c}" for n, c in series.nonzero_items())
    return "\n".join(lines) + "\n"


def series_from_text(text: str) -> LaurentQSeries:
    lines = _lines(text)
    if not lines:
        raise CacheFormatError(1, "empty series file")
    line_no, header = lines[0]
    match = _SERIES_HEADER.match(header)
    if line_no != 1 or not match:
        raise CacheFormatError(line_no, f"expected 'qseries min_exp=<v> trunc=<t>', got {header!r}")
    min_exp, trunc = int(match.group(1)), int(match.group(2))
    if trunc < min_exp:
        raise CacheFormatError(1, f"trunc {trunc} is below min_exp {min_exp}")
    coeffs: Dict[int, Fraction] = {}
    for line_no, line in lines[1:]:
        parts = line.split()
        try:
            n, value = int(parts[0]), Fraction(parts[1])
            if len(parts) != 2:
                raise ValueError
        except (ValueError, IndexError, ZeroDivisionError):
            raise CacheFormatError(line_no, f"expected '<n> <numerator/denominator>', got {line!r}")
        if not min_exp <= n < trunc:
            raise CacheFormatError(line_no, f"exponent {n} outside [{min_exp}, {trunc})")
        if n in coeffs:
            raise CacheFormatError(line_no, f"duplicate exponent {n}")
        coeffs[n] = value
    return LaurentQSeries.from_dict(coeffs, trunc, min_exp=min_exp)


def write_series(path: PathLike, series: LaurentQSeries):
    _atomic_write(Path(path), series_to_text(series))


def read_series(path: PathLike) -> LaurentQSeries:
    try:
        return series_from_text(Path(path).read_text())
    except CacheFormatError as err:
        raise CacheFormatError(err.line_no, err.message, path) from None


# coefficient cache


@dataclass
class CoefficientCache:
    params: PoincareParams
    kind: str
    c_max: Optional[int]
    working_bits: int
    target_tail: float
    values: Dict[int, BallReal] = field(default_factory=dict)

    @classmethod
    def from_policy(cls, params: PoincareParams, kind: str, policy: TruncationPolicy,
                    values: Dict[int, BallReal]) -> "CoefficientCache":
        return cls(params, kind, policy.c_max, policy.prec.working_bits, policy.target_tail, dict(values))


def coefficient_cache_to_text(cache: CoefficientCache) -> str:
    p = cache.params
    c_max = "auto" if cache.c_max is None else cache.c_max
    lines = [
        f"poincare m={p.m} k={p.k} N={p.N} kind={cache.kind}",
        f"policy c_max={c_max} working_bits={cache.working_bits} target_tail={cache.target_tail!r}",
    ]
    lines.extend(f"{n} {value.to_string()}" for n, value in sorted(cache.values.items()))
    return "\n".join(lines) + "\n"


def coefficient_cache_from_text(text: str, path: Optional[PathLike] = None) -> CoefficientCache:
    lines = _lines(text)
    if not lines or lines[0][0] != 1:
        raise CacheFormatError(1, "missing 'poincare' header", path)
    match = _POINCARE_HEADER.match(lines[0][1])
    if not match or match.group(4) not in KINDS:
        raise CacheFormatError(1, f"malformed header {lines[0][1]!r}", path)
    try:
        params = PoincareParams(int(match.group(1)), int(match.group(2)), int(match.group(3)))
    except ValueError as err:
        raise CacheFormatError(1, str(err), path) from None
    if len(lines) < 2:
        raise CacheFormatError(2, "missing 'policy' line", path)
    line_no, line = lines[1]
    policy = _POLICY_LINE.match(line)
    if not policy:
        raise CacheFormatError(line_no, f"malformed policy line {line!r}", path)
    c_max = None if policy.group(1) == "auto" else int(policy.group(1))
    cache = CoefficientCache(params, match.group(4), c_max, int(policy.group(2)), float(policy.group(3)))
    for line_no, line in lines[2:]:
        n_text, _, ball_text = line.partition(" ")
        try:
            n = int(n_text)
            cache.values[n] = BallReal.from_string(ball_text, cache.working_bits)
        except ValueError:
            raise CacheFormatError(line_no, f"expected '<n> <midpoint> +- <radius>', got {line!r}", path)
    return cache


def cache_path(cache_dir: PathLike, kind: str, params: PoincareParams) -> Path:
    return Path(cache_dir) / f"{kind}_m{params.m}_k{params.k}_N{params.N}.txt"


def read_coefficient_cache(path: PathLike) -> CoefficientCache:
    return coefficient_cache_from_text(Path(path).read_text(), path)


_locks: Dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def _thread_lock(path: Path) -> threading.Lock:
    key = str(path.resolve())
    with _locks_guard:
        return _locks.setdefault(key, threading.Lock())


def lock_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(f".{path.name}.lock")


@contextmanager
def _file_lock(path: Path):
    """Exclusive lock on ``path`` across threads and, where flock exists, across processes."""
    with _thread_lock(path):
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(lock_path(path), "w") as handle:
            if fcntl is not None:
                fcntl.flock(handle, fcntl.LOCK_EX)
            try:
                yield
            finally:
                if fcntl is not None:
                    fcntl.flock(handle, fcntl.LOCK_UN)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def merge_coefficient_cache(path: PathLike, new: CoefficientCache) -> CoefficientCache:
    """Append ``new`` to the cache file at ``path``; lower-precision data never replaces better data."""
    path = Path(path)
    with _file_lock(path):
        if path.exists():
            old = read_coefficient_cache(path)
            if (old.params, old.kind) != (new.params, new.kind):
                raise CacheFormatError(1, f"cache holds {old.kind} {old.params}, not {new.kind} {new.params}", path)
            if new.working_bits < old.working_bits:
                logger.warning(
                    "refusing to overwrite %s: %d-bit data is better than %d-bit",
                    path, old.working_bits, new.working_bits,
                )
                return old
            merged = dataclasses.replace(new, values={**old.values, **new.values})
        else:
            merged = new
        _atomic_write(path, coefficient_cache_to_text(merged))
        logger.info("wrote %d coefficients to %s", len(merged.values), path)
        return merged


# Kloosterman cache dump


def kloosterman_dump_text(cache: KloostermanCache) -> str:
    return "".join(f"K {key.m} {key.n} {key.c} {value.to_string()}\n" for key, value in cache.items())


def parse_kloosterman_dump(text: str) -> Dict[KloostermanKey, BallReal]:
    out = {}
    for line_no, line in _lines(text):
        parts = line.split(" ", 4)
        try:
            if parts[0] != "K" or len(parts) != 5:
                raise ValueError
            key = KloostermanKey(int(parts[1]), int(parts[2]), int(parts[3]))
            out[key] = BallReal.from_string(parts[4])
        except (ValueError, IndexError):
            raise CacheFormatError(line_no, f"expected 'K m n c <ball>', got {line!r}")
    return out


# CSV and config dumps


def write_density_csv(path: PathLike, rows: Iterable[Tuple[int, int, Fraction]]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["X", "b", "density"])
        for X, b, density in rows:
            writer.writerow([X, b, f"{float(density):.6f}"])


def dump_config(path: PathLike, config) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dataclasses.asdict(config) if dataclasses.is_dataclass(config) else dict(config)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False, default=str)
    return path


def format_ball_row(n: int, value: BallReal, recognized: Optional[str] = None) -> str:
    row = f"{n:>4}  {value.midpoint} ± {float(value.radius):.3e}"
    if recognized is not None:
        row += f" = {recognized}"
    return row
