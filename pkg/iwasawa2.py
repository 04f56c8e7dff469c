import argparse
import csv
import io
import json
import logging
import os
import sys
from collections import Counter
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path

from sympy import primerange

from lib.common import HypothesisError, NoSquareRootDatum, VerificationError
from lib.forms import narrow_class_group, wide_class_group
from lib.genus import four_rank, redei_matrix, redei_s1, redei_s2
from lib.persistence import FieldCache, load_table
from lib.quadfield import Pattern, fundamental_unit, layer_description, make_field, make_triple, norm_equation
from lib.tower import (
    FieldSummary,
    SummaryLookup,
    TowerReport,
    build_tower_report,
    c_invariant,
    compute_field_summary,
    field_summary,
)

logger = logging.getLogger("iwasawa2")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_HYPOTHESIS = 3
EXIT_VERIFICATION = 4

CACHE_ENV = "IWASAWA2_CACHE"

SYMBOL_NAMES = ("q1/p1", "q2/p1", "q1q2/p1", "p1/q2")

CSV_COLUMNS = [
    "p1", "q1", "q2", "pattern", "A0", "AF", "Q", "A1", "principal",
    "stable", "lambda", "mu", "nu", "Xinf", "theorem", "violations",
]

TABLE_NAMES = {"2": "nonprincipal", "3": "principal", "nonprincipal": "nonprincipal", "principal": "principal"}


@dataclass(frozen=True)
class ScanConfig:
    family: str = "all"
    prime_bound: int = 50
    symbol_filter: tuple[tuple[str, int], ...] = ()
    output: str = "table"
    cache_path: Path | None = None
    parallelism: int = 1

    def __post_init__(self):
        if self.family not in ("cond1", "cond2", "all"):
            raise ValueError(f"family must be cond1, cond2 or all, got {self.family}")
        if self.prime_bound < 3:
            raise ValueError(f"bound must be >= 3, got {self.prime_bound}")
        if self.parallelism < 1:
            raise ValueError(f"jobs must be >= 1, got {self.parallelism}")
        if self.output not in ("json", "csv", "table"):
            raise ValueError(f"unknown output format {self.output}")
        for name, value in self.symbol_filter:
            if name not in SYMBOL_NAMES or value not in (1, -1):
                raise ValueError(f"bad symbol filter {name}={value}")

    @property
    def patterns(self) -> list[Pattern]:
        match self.family:
            case "cond1":
                return [Pattern.COND1]
            case "cond2":
                return [Pattern.COND2]
            case _:
                return [Pattern.COND1, Pattern.COND2]


def parse_symbol(text: str) -> tuple[str, int]:
    name, _, value = text.partition("=")
    try:
        return name.strip(), int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected name=+1 or name=-1, got {text!r}")


def open_cache(path: str | None) -> FieldCache | None:
    path = path or os.environ.get(CACHE_ENV)
    if not path:
        return None
    return FieldCache(path)


def make_lookup(cache: FieldCache | None) -> SummaryLookup:
    return field_summary if cache is None else cache.lookup


### subcommands
def cmd_classgroup(args: argparse.Namespace) -> int:
    K = make_field(args.d)
    G = narrow_class_group(K.disc) if args.narrow else wide_class_group(K)
    rows = []
    for ell, cls in G.prime_class.items():
        rows.append(
            {
                "prime": ell,
                "form": cls.to_list(),
                "order": G.element_order(cls),
                "principal": G.is_identity(cls),
            }
        )
    principal = [r["prime"] for r in rows if r["principal"]]
    if args.json:
        print(
            json.dumps(
                {
                    "d": K.d,
                    "disc": K.disc,
                    "narrow": G.narrow,
                    "order": G.order,
                    "invariant_factors": G.invariant_factors,
                    "cyclic": G.is_cyclic(),
                    "primes": rows,
                    "principal": principal,
                }
            )
        )
        return EXIT_OK
    kind = "narrow" if G.narrow else "wide"
    print(f"{K.name}, discriminant {K.disc}")
    print(f"{kind} 2-class group: {G.describe()}, order {G.order}")
    print(f"cyclic: {G.is_cyclic()}")
    for r in rows:
        state = "principal" if r["principal"] else f"order {r['order']}"
        print(f"  {r['prime']:>6}  {tuple(r['form'])}  {state}")
    print(f"principal: {{{', '.join(str(p) for p in principal)}}}")
    return EXIT_OK


def cmd_unit(args: argparse.Namespace) -> int:
    K = make_field(args.d)
    eps = fundamental_unit(K)
    try:
        c = c_invariant(K).square_class.repr
    except NoSquareRootDatum:
        c = None
    if args.json:
        print(json.dumps({"d": K.d, "t": eps.t, "u": eps.u, "norm": eps.norm, "c": c}))
        return EXIT_OK
    print(f"{K.name}: eps = {eps}, norm {eps.norm}")
    if c is not None:
        print(f"K(sqrt(eps)) = K(sqrt({c}))")
    return EXIT_OK


def cmd_redei(args: argparse.Namespace) -> int:
    D = args.disc
    s1, s2 = redei_s1(D), redei_s2(D)
    if args.json:
        print(
            json.dumps(
                {
                    "disc": D,
                    "S1": [x.to_tuple() for x in s1],
                    "S2": [x.to_tuple() for x in s2],
                    "four_rank": four_rank(D),
                    "redei_matrix": redei_matrix(D),
                }
            )
        )
        return EXIT_OK
    print(f"discriminant {D}")
    print(f"S1 ({len(s1)}): " + " ".join(str(x.to_tuple()) for x in s1))
    print(f"S2 ({len(s2)}): " + " ".join(str(x.to_tuple()) for x in s2))
    print(f"4-rank from the Redei matrix: {four_rank(D)}")
    return EXIT_OK


def cmd_normeq(args: argparse.Namespace) -> int:
    K = make_field(args.d)
    solution = norm_equation(K, args.n)
    if args.json:
        print(json.dumps({"d": K.d, "N": args.n, "solution": list(solution) if solution else None}))
    elif solution is None:
        print(f"a^2 - {K.d} b^2 = {4 * args.n}: no solution")
    else:
        a, b = solution
        print(f"a^2 - {K.d} b^2 = {4 * args.n}: a = {a}, b = {b}")
    return EXIT_OK


def format_report(report: TowerReport) -> str:
    r = report.to_dict()
    lines = [
        f"({r['p1']}, {r['q1']}, {r['q2']})  pattern {r['pattern']}  d = {report.triple.d}",
        f"  K0 = {layer_description(report.triple.d, 0)}, K1 = {layer_description(report.triple.d, 1)}",
        "  symbols: " + ", ".join(f"({k}) = {v}" for k, v in r["symbols"].items()),
        f"  #A0 = {r['A0']} {r['A0_factors']}  #A(F) = {r['AF']} {r['AF_factors']}",
        f"  Q(K1) = {r['Q']} ({report.fundamental_system.value})  #A1 = {r['A1']}",
        f"  principal: {r['principal']}  stable: {r['stable']}",
        f"  lambda = {r['lambda']}, mu = {r['mu']}, nu = {r['nu']}, X_inf: {r['Xinf']}",
        f"  theorem: {r['theorem']}",
    ]
    for v in r["violations"]:
        lines.append(f"  VIOLATION: {v}")
    return "\n".join(lines)


def csv_row(report: TowerReport) -> list:
    r = report.to_dict()
    r["principal"] = ",".join(str(p) for p in r["principal"])
    r["violations"] = "; ".join(r["violations"])
    return [r[c] for c in CSV_COLUMNS]


def cmd_tower(args: argparse.Namespace) -> int:
    T = make_triple(args.p1, args.q1, args.q2)
    if T.pattern is None:
        raise HypothesisError(f"{T} matches neither congruence pattern")
    cache = open_cache(args.cache)
    report = build_tower_report(T, make_lookup(cache))
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        print(format_report(report))
    return EXIT_VERIFICATION if report.violations else EXIT_OK


def cmd_tables(args: argparse.Namespace) -> int:
    rows = load_table(TABLE_NAMES[args.which])
    cache = open_cache(args.cache)
    lookup = make_lookup(cache)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(
        ["p1", "q1", "q2", "Principal", "#A0", "#A1", "computed Principal", "computed #A0", "computed #A1", "match"]
    )
    matches = 0
    errata = []
    for row in rows:
        report = build_tower_report(make_triple(row.p1, row.q1, row.q2), lookup)
        principal, A0, A1 = row.expected
        ok = (
            report.A0_order == A0
            and report.A1_order == A1
            and report.principal_primes == [principal]
            and not report.violations
        )
        matches += ok
        if not ok:
            verdict = "NO"
        elif row.erratum is not None:
            verdict = "erratum"
            errata.append(f"known erratum ({row.p1}, {row.q1}, {row.q2}): {row.erratum.note}")
        else:
            verdict = "yes"
        computed_principal = ",".join(str(p) for p in report.principal_primes)
        writer.writerow(
            [row.p1, row.q1, row.q2, row.principal, row.A0, row.A1,
             computed_principal, report.A0_order, report.A1_order, verdict]
        )
    for line in errata:
        print(line)
    print(f"{matches}/{len(rows)} rows match")
    return EXIT_OK if matches == len(rows) else EXIT_VERIFICATION


def scan_triples(config: ScanConfig):
    """Qualifying triples in increasing (p1, q1, q2) order."""
    primes = list(primerange(3, config.prime_bound + 1))
    triples = []
    for pattern in config.patterns:
        q1_residue = 3 if pattern is Pattern.COND1 else 7
        for p1 in primes:
            if p1 % 8 != 5:
                continue
            for q1 in primes:
                if q1 % 8 != q1_residue:
                    continue
                for q2 in primes:
                    # q1 and q2 play symmetric roles in cond1
                    if q2 % 8 != 3 or (pattern is Pattern.COND1 and q2 <= q1):
                        continue
                    T = make_triple(p1, q1, q2)
                    symbols = T.symbols.to_dict()
                    if all(symbols[name] == value for name, value in config.symbol_filter):
                        triples.append(T)
    return sorted(triples)


def _prefetch(fields: list[int], cache: FieldCache | None, jobs: int) -> dict[int, FieldSummary]:
    summaries = {}
    missing = []
    for d in fields:
        cached = cache.get(d) if cache is not None else None
        if cached is None:
            missing.append(d)
        else:
            summaries[d] = cached
    logger.info("%d fields cached, %d to compute", len(summaries), len(missing))
    if jobs > 1 and len(missing) > 1:
        with Pool(jobs) as pool:
            computed = pool.imap(compute_field_summary, missing, chunksize=1)
            for summary in computed:
                summaries[summary.d] = summary
                if cache is not None:
                    cache.add(summary)
    else:
        for d in missing:
            summary = compute_field_summary(d)
            summaries[summary.d] = summary
            if cache is not None:
                cache.add(summary)
    return summaries


def run_scan(config: ScanConfig, out: io.TextIOBase) -> int:
    triples = scan_triples(config)
    cache = FieldCache(config.cache_path) if config.cache_path else None
    fields = sorted({d for T in triples for d in (T.d, 2 * T.d)})
    summaries = _prefetch(fields, cache, config.parallelism)

    writer = csv.writer(out, lineterminator="\n") if config.output == "csv" else None
    if writer is not None:
        writer.writerow(CSV_COLUMNS)
    tags: Counter[str] = Counter()
    flagged = 0
    for T in triples:
        try:
            report = build_tower_report(T, summaries.__getitem__)
        except VerificationError as e:
            out.flush()
            logger.error("%s: %s", T, e)
            return EXIT_VERIFICATION
        tags[report.theorem_tag] += 1
        flagged += bool(report.violations)
        match config.output:
            case "json":
                out.write(json.dumps(report.to_dict()) + "\n")
            case "csv":
                writer.writerow(csv_row(report))
            case _:
                out.write(format_report(report) + "\n")
        out.flush()

    summary = [f"{len(triples)} triples, {flagged} with violations"]
    summary += [f"  {tag}: {n}" for tag, n in sorted(tags.items())]
    summary_out = out if config.output == "table" else sys.stderr
    print("\n".join(summary), file=summary_out)
    return EXIT_VERIFICATION if flagged else EXIT_OK


def cmd_scan(args: argparse.Namespace) -> int:
    output = "json" if args.json else "csv" if args.csv else "table"
    cache_path = args.cache or os.environ.get(CACHE_ENV)
    config = ScanConfig(
        family=args.family,
        prime_bound=args.bound,
        symbol_filter=tuple(args.symbol),
        output=output,
        cache_path=Path(cache_path) if cache_path else None,
        parallelism=args.jobs,
    )
    if args.out is None:
        return run_scan(config, sys.stdout)
    with open(args.out, "w") as out:
        return run_scan(config, out)


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="iwasawa2",
        description="2-class groups, units and first-layer Iwasawa data of Q(sqrt(p1 q1 q2)).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classgroup", help="2-class group of Q(sqrt(d))")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--narrow", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_classgroup)

    p = sub.add_parser("unit", help="fundamental unit of Q(sqrt(d))")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_unit)

    p = sub.add_parser("redei", help="Redei decompositions of a fundamental discriminant")
    p.add_argument("--disc", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_redei)

    p = sub.add_parser("normeq", help="solve a^2 - d b^2 = 4N")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_normeq)

    p = sub.add_parser("tower", help="first-layer report for a prime triple")
    p.add_argument("p1", type=int)
    p.add_argument("q1", type=int)
    p.add_argument("q2", type=int)
    p.add_argument("--json", action="store_true")
    p.add_argument("--cache", type=str, default=None, help=f"field cache, defaults to ${CACHE_ENV}")
    p.set_defaults(func=cmd_tower)

    p = sub.add_parser("tables", help="recompute the bundled tables")
    p.add_argument("--which", choices=sorted(TABLE_NAMES), required=True)
    p.add_argument("--cache", type=str, default=None)
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("scan", help="reports for every qualifying triple below a bound")
    p.add_argument("--family", choices=["cond1", "cond2", "all"], default="all")
    p.add_argument("--bound", type=int, default=50)
    p.add_argument(
        "--symbol",
        type=parse_symbol,
        action="append",
        default=[],
        help="keep triples with this symbol value, e.g. q1q2/p1=-1",
    )
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--cache", type=str, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=str, default=None, help="write reports here instead of stdout")
    p.set_defaults(func=cmd_scan)

    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except HypothesisError as e:
        logger.error("%s", e)
        return EXIT_HYPOTHESIS
    except VerificationError as e:
        logger.error("%s", e)
        return EXIT_VERIFICATION
    except (ValueError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
