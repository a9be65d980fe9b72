import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from data_utils import (
    CacheFormatError,
    CoefficientCache,
    cache_path,
    dump_config,
    format_ball_row,
    kloosterman_dump_text,
    merge_coefficient_cache,
    parse_kloosterman_dump,
    read_coefficient_cache,
    series_from_text,
    series_to_text,
    write_density_csv,
    write_series,
)
from evaluation import (
    GOOD_EXAMPLE,
    cusp_reference,
    verify_bol_xi,
    verify_cm_vanishing,
    verify_good_example,
    verify_hecke_recursion,
    verify_lehmer_identity,
    verify_modularity,
    verify_padic,
)
from kloosterman import KloostermanCache, KloostermanKey, kloosterman
from numerics import DEFAULT_TARGET_ABS_ERROR, DEFAULT_WORKING_BITS, PrecisionConfig, format_recognized, recognize_rational
from poincare import DEFAULT_TARGET_TAIL, PoincareParams, TruncationPolicy, coefficient_table
from qseries import (
    DirichletCharacterSpec,
    EtaQuotientSpec,
    cm_newform_g,
    delta_series,
    eisenstein,
    eta_quotient,
    faber_jm,
    good_example_series,
    j_invariant,
)

logger = logging.getLogger(__name__)

CACHE_DIR_ENV = "MAASS_CACHE_DIR"
DEFAULT_CACHE_DIR = "./cache"
RUN_CONFIG_NAME = "run_config.json"
EXIT_ERROR = 2

_SERIES = {
    "g": cm_newform_g,
    "e4": lambda terms: eisenstein(4, terms),
    "delta": delta_series,
    "m": good_example_series,
}
_SERIES_LEVEL = {"g": 9, "e4": 1, "delta": 1, "m": 9}


@dataclass
class CliConfig:
    precision_bits: int = DEFAULT_WORKING_BITS
    target_abs_error: float = DEFAULT_TARGET_ABS_ERROR
    c_max: Optional[int] = None
    target_tail: float = DEFAULT_TARGET_TAIL
    cache_dir: str = DEFAULT_CACHE_DIR
    threads: int = 1
    show_progress: bool = False

    def __post_init__(self):
        if self.precision_bits < 53:
            raise ValueError(f"--precision-bits must be >= 53, got {self.precision_bits}")

    @classmethod
    def from_args(cls, args) -> "CliConfig":
        threads = (os.cpu_count() or 1) if args.threads == "auto" else int(args.threads)
        return cls(
            precision_bits=args.precision_bits,
            target_abs_error=args.target_abs_error,
            c_max=args.c_max,
            target_tail=args.target_tail,
            cache_dir=args.cache_dir or os.environ.get(CACHE_DIR_ENV, DEFAULT_CACHE_DIR),
            threads=threads,
            show_progress=not args.quiet and sys.stderr.isatty(),
        )

    def precision(self) -> PrecisionConfig:
        return PrecisionConfig(self.precision_bits, self.target_abs_error)

    def policy(self, params: Optional[PoincareParams] = None) -> TruncationPolicy:
        if self.c_max is not None and params is not None and self.c_max < params.N:
            raise ValueError(f"--c-max must be >= level N = {params.N}, got {self.c_max}")
        return TruncationPolicy(self.c_max, self.target_tail, self.precision(), self.threads, self.show_progress)


def _c_max(text: str) -> Optional[int]:
    if text == "auto":
        return None
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"c_max must be positive or 'auto', got {text}")
    return value


def _threads(text: str) -> str:
    if text != "auto" and not text.isdigit():
        raise argparse.ArgumentTypeError(f"threads must be a positive integer or 'auto', got {text}")
    return text


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision-bits", type=int, default=DEFAULT_WORKING_BITS)
    common.add_argument("--target-abs-error", type=float, default=DEFAULT_TARGET_ABS_ERROR)
    common.add_argument("--c-max", type=_c_max, default=None, help="integer cutoff or 'auto'")
    common.add_argument("--target-tail", type=float, default=DEFAULT_TARGET_TAIL)
    common.add_argument("--cache-dir", type=str, default=None, help=f"defaults to ${CACHE_DIR_ENV} or {DEFAULT_CACHE_DIR}")
    common.add_argument("--threads", type=_threads, default="1")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true")
    verbosity.add_argument("--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="maass", description="Harmonic Maass form coefficients and checks")
    commands = parser.add_subparsers(dest="command", required=True)

    qexp = commands.add_parser("qexp", help="exact q-expansions")
    series = qexp.add_subparsers(dest="series", required=True)
    for name, arg in (("eta", "spec"), ("eisenstein", "weight"), ("jm", "m")):
        sub = series.add_parser(name, parents=[common])
        sub.add_argument(arg, type=str if name == "eta" else int)
    for name in ("j", "delta", "m-series", "g-series"):
        series.add_parser(name, parents=[common])
    for sub in series.choices.values():
        sub.add_argument("--terms", type=int, required=True)
        sub.add_argument("--out", type=str, default=None)
        sub.set_defaults(handler=cmd_qexp)

    poincare = commands.add_parser("poincare", parents=[common], help="Poincare series coefficients")
    poincare.add_argument("--sign", choices=["+", "-"], default="+")
    poincare.add_argument("--m", type=int, default=1)
    poincare.add_argument("--k", type=int, default=4)
    poincare.add_argument("--level", type=int, default=1)
    poincare.add_argument("--n-max", type=int, required=True)
    poincare.add_argument("--maass", action="store_true", help="harmonic Maass-Poincare series Q(-m,k,N)")
    poincare.add_argument("--nonholo", action="store_true", help="also print the non-holomorphic part")
    poincare.add_argument("--rationalize", action="store_true")
    poincare.set_defaults(handler=cmd_poincare)

    verify = commands.add_parser("verify", help="verification reports")
    checks = verify.add_subparsers(dest="check", required=True)
    good = checks.add_parser("good-example", parents=[common])
    good.add_argument("--n-max", type=int, default=11)
    good.set_defaults(c_max=9 * 150)
    bol = checks.add_parser("bol-xi", parents=[common])
    bol.add_argument("--m", type=int, default=GOOD_EXAMPLE.m)
    bol.add_argument("--k", type=int, default=GOOD_EXAMPLE.k)
    bol.add_argument("--level", type=int, default=GOOD_EXAMPLE.N)
    bol.add_argument("--n-lo", type=int, default=1)
    bol.add_argument("--n-hi", type=int, default=11)
    lehmer = checks.add_parser("lehmer", parents=[common])
    lehmer.add_argument("--p", type=int, default=2)
    lehmer.add_argument("--n-lo", type=int, default=None, help="defaults to -p")
    lehmer.add_argument("--n-hi", type=int, default=4)
    lehmer.add_argument("--rel-tol", type=float, default=1e-6)
    lehmer.set_defaults(precision_bits=256)
    cm = checks.add_parser("cm", parents=[common])
    cm.add_argument("--D", type=int, default=-3)
    cm.add_argument("--series", choices=sorted(_SERIES), default="g")
    cm.add_argument("--X", type=int, default=200)
    hecke = checks.add_parser("hecke", parents=[common])
    hecke.add_argument("--series", choices=sorted(_SERIES), default="g")
    hecke.add_argument("--p", type=int, default=2)
    hecke.add_argument("--k", type=int, default=4)
    hecke.add_argument("--m-max", type=int, default=6)
    padic = checks.add_parser("padic", parents=[common])
    padic.add_argument("--terms", type=int, default=3 ** 9)
    modularity = checks.add_parser("modularity", parents=[common])
    modularity.add_argument("--n-max", type=int, default=40)
    modularity.add_argument("--tol", type=float, default=1e-4)
    modularity.set_defaults(c_max=360)
    for sub in checks.choices.values():
        sub.add_argument("--report", type=str, default=None)
        sub.add_argument("--csv", type=str, default=None)
        sub.set_defaults(handler=cmd_verify)

    cache = commands.add_parser("cache", help="inspect cache files")
    actions = cache.add_subparsers(dest="action", required=True)
    for name in ("show", "check"):
        sub = actions.add_parser(name, parents=[common])
        sub.add_argument("path", type=str)
    dump = actions.add_parser("dump-kloosterman", parents=[common])
    dump.add_argument("path", type=str)
    dump.add_argument("--sign", choices=["+", "-"], default="-")
    dump.add_argument("--m", type=int, default=1)
    dump.add_argument("--level", type=int, default=1)
    dump.add_argument("--n-max", type=int, default=10)
    for sub in actions.choices.values():
        sub.set_defaults(handler=cmd_cache)
    return parser


def setup_logging(args):
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        datefmt="%m/%d/%Y %H:%M:%S",
        level=level,
        force=True,
    )


def _start_run(args) -> CliConfig:
    config = CliConfig.from_args(args)
    command = {key: value for key, value in vars(args).items() if key != "handler"}
    dump_config(Path(config.cache_dir) / RUN_CONFIG_NAME, {"config": vars(config), "command": command})
    return config


def cmd_qexp(args) -> int:
    _start_run(args)
    terms = args.terms
    if args.series == "eta":
        series = eta_quotient(EtaQuotientSpec.parse(args.spec), terms)
    elif args.series == "eisenstein":
        series = eisenstein(args.weight, terms)
    elif args.series == "j":
        series = j_invariant(terms)
    elif args.series == "jm":
        series = faber_jm(args.m, terms)
    elif args.series == "delta":
        series = delta_series(terms)
    elif args.series == "m-series":
        series = good_example_series(terms)
    else:
        series = cm_newform_g(terms)
    if args.out:
        write_series(args.out, series)
        logger.info("wrote %s to %s", args.series, args.out)
    print(series_to_text(series), end="")
    return 0


def _denominator(kind: str, params: PoincareParams, n: int) -> int:
    if kind == "maass-holo" and n > 0:
        return n ** (params.k - 1)
    return 1


def cmd_poincare(args) -> int:
    config = _start_run(args)
    params = PoincareParams(args.m, args.k, args.level)
    policy = config.policy(params)
    if not params.certified:
        print("uncertified: weight 2 tails are heuristic, radii are not rigorous")

    if args.maass:
        runs = [("maass-holo", range(0, args.n_max + 1))]
        if args.nonholo:
            runs.append(("maass-nonholo", range(-1, -args.n_max - 1, -1)))
    else:
        runs = [("cusp" if args.sign == "+" else "weak", range(1, args.n_max + 1))]

    for kind, indices in runs:
        table = coefficient_table(kind, params, indices, policy)
        print(f"# {kind} m={params.m} k={params.k} N={params.N}")
        for n, value in table.items():
            shown = None
            if args.rationalize and kind != "maass-nonholo":
                D = _denominator(kind, params, n)
                found = recognize_rational(value, D)
                if found is not None:
                    shown = format_recognized(found, D)
            print(format_ball_row(n, value, shown))
        merge_coefficient_cache(
            cache_path(config.cache_dir, kind, params),
            CoefficientCache.from_policy(params, kind, policy, table),
        )
    return 0


def _run_check(args, config: CliConfig):
    if args.check == "good-example":
        return verify_good_example(args.n_max, config.policy(GOOD_EXAMPLE))
    if args.check == "bol-xi":
        params = PoincareParams(args.m, args.k, args.level)
        n_range = range(args.n_lo, args.n_hi + 1)
        reference = cusp_reference(params, args.n_hi + 2)
        return verify_bol_xi(params, n_range, config.policy(params), reference)
    if args.check == "lehmer":
        n_lo = -args.p if args.n_lo is None else args.n_lo
        return verify_lehmer_identity(args.p, n_lo, args.n_hi, config.policy(), args.rel_tol)
    if args.check == "cm":
        return verify_cm_vanishing(_SERIES[args.series](args.X + 2), args.D, args.X)
    if args.check == "hecke":
        series = _SERIES[args.series](args.p ** args.m_max + 2)
        chi = DirichletCharacterSpec.trivial(_SERIES_LEVEL[args.series])
        return verify_hecke_recursion(series, args.p, args.k, chi, args.m_max)
    if args.check == "padic":
        return verify_padic(args.terms)
    params = GOOD_EXAMPLE
    return verify_modularity(params, config.policy(params), n_max=args.n_max, tol=args.tol)


def cmd_verify(args) -> int:
    config = _start_run(args)
    report = _run_check(args, config)
    print(report.to_text())
    print("\n".join(report.to_lines()))
    if args.report:
        path = Path(args.report)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.to_text() + "\n" + "\n".join(report.to_lines()) + "\n")
    if args.csv and "density" in report.artifacts:
        write_density_csv(args.csv, report.artifacts["density"])
    summary = report.compute()
    if summary["uncertified"] and summary["passed"]:
        logger.warning("%s: %d checks are uncertified", report.name, summary["uncertified"])
    return report.exit_code()


def _load_cache_file(path: Path):
    text = path.read_text()
    first = text.lstrip().split(" ", 1)[0]
    if first == "qseries":
        return series_from_text(text)
    if first == "K":
        return parse_kloosterman_dump(text)
    return read_coefficient_cache(path)


def _entry_count(loaded) -> int:
    if isinstance(loaded, CoefficientCache):
        return len(loaded.values)
    if isinstance(loaded, dict):
        return len(loaded)
    return len(loaded.to_dict())


def cmd_cache(args) -> int:
    path = Path(args.path)
    if args.action == "dump-kloosterman":
        config = CliConfig.from_args(args)
        if config.c_max is None:
            raise ValueError("dump-kloosterman needs an explicit --c-max")
        cache = KloostermanCache(bound=config.c_max)
        m = args.m if args.sign == "+" else -args.m
        for n in range(1, args.n_max + 1):
            for c in range(args.level, config.c_max + 1, args.level):
                kloosterman(KloostermanKey(m, n, c), config.precision(), cache)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(kloosterman_dump_text(cache))
        logger.info("dumped %d Kloosterman sums to %s", len(cache), path)
        return 0
    try:
        loaded = _load_cache_file(path)
    except CacheFormatError as err:
        print(f"{path}:{err.line_no}: {err.message}")
        return 1
    if args.action == "check":
        print(f"{path}: ok ({_entry_count(loaded)} entries)")
        return 0
    if isinstance(loaded, CoefficientCache):
        p = loaded.params
        print(f"# {loaded.kind} m={p.m} k={p.k} N={p.N} c_max={loaded.c_max or 'auto'} bits={loaded.working_bits}")
        for n, value in sorted(loaded.values.items()):
            print(format_ball_row(n, value))
    elif isinstance(loaded, dict):
        for key, value in loaded.items():
            print(f"K({key.m},{key.n},{key.c}) = {value}")
    else:
        print(series_to_text(loaded), end="")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args)
    try:
        return args.handler(args)
    except (ValueError, ArithmeticError, RuntimeError, OSError) as err:
        logger.debug("command failed", exc_info=True)
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
