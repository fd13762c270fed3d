"""Command line front end.

Exit codes::

    0   success
    1   unexpected error
    2   usage error or conflicting flags
    3   malformed wordlist or metadata
    4   selection matched no languages
    5   similarity / overlap error
    6   configuration error (e.g. no proto language)
    7   invalid parameter
    8   degenerate fit
    9   time-distance error (divergence, calibration)
    10  ranking / comparison error
    11  file system error

On failure one JSON object is printed to stderr, e.g.
``{"error": "ParseError", "exit_code": 3, "line": 7, "message": "..."}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from glottokit import chrono, simgen
from glottokit._io import atomic_csv, atomic_text, format_float
from glottokit.errors import GlottoError
from glottokit.metric import SimilarityScorer, overlap_matrix, write_overlap_csv
from glottokit.ranking import (
    common_count_curve,
    compare_families,
    random_baseline_band,
    rank_items,
    write_curve_csv,
    write_ranking_csv,
)
from glottokit.report import lambda_for, run_report
from glottokit.stability import (
    KIND_ACTUAL,
    KIND_ESTIMATED,
    actual_stability,
    estimated_stability,
    fit_lambda,
    rates_from_stability,
    write_scatter_csv,
    write_table_csv,
)
from glottokit.wordlist import has_tag, is_modern, load_database, serialize_database, subset

THREADS_ENV = "GLOTTOKIT_THREADS"

SUBCOMMANDS = (
    "validate", "overlap", "stability", "rates", "fit-lambda",
    "chrono", "ranking", "compare", "simulate", "report",
)

EXIT_USAGE = 2
EXIT_IO = 11

log = logging.getLogger("glottokit")


class UsageError(GlottoError):
    exit_code = EXIT_USAGE


class ConflictError(UsageError):
    pass


@dataclass
class Command:
    subcommand: str
    inputs: dict[str, Path] = field(default_factory=dict)
    output: Path | None = None
    params: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _anchor(text: str) -> tuple[str, str, float]:
    try:
        pair, t = text.rsplit("=", 1)
        a, b = pair.split(":", 1)
        return a, b, float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"anchor must look like LANG1:LANG2=T, got {text!r}") from None


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="glottokit",
        description="Lexicostatistics from Swadesh-style wordlists.",
        epilog=__doc__.split("\n", 2)[2],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)

    def db_flags(p, required=True):
        p.add_argument("--db", type=Path, required=required, help="tsv-long-v1 wordlist")
        p.add_argument("--meta", type=Path, help="metadata sidecar (default: DB with suffix .meta)")
        p.add_argument("--scorer", choices=["nld", "binary-cognacy"], default="nld")
        p.add_argument("--threads", type=int, default=_default_threads(),
                       help=f"worker threads (default ${THREADS_ENV} or 1)")

    def out_flag(p, required=True, help="output CSV"):
        p.add_argument("--out", type=Path, required=required, help=help)

    def time_flags(p):
        p.add_argument("--T", type=float, default=chrono.VULGAR_LATIN_T,
                       help="ancestor-to-present time in millennia for actual rates (default 1.5)")
        p.add_argument("--Ts", type=float, default=chrono.VULGAR_LATIN_T,
                       help="nominal time constant for estimated rates (default 1.5)")
        p.add_argument("--proto", help="label of the ancestor when several are marked proto")

    def scale_flags(p):
        p.add_argument("--lambda", dest="lambda_", type=float, help="fixed lambda")
        p.add_argument("--anchor", type=_anchor, help="calibrate lambda from LANG1:LANG2=T millennia")
        p.add_argument("--tolerance", type=float, default=chrono.DEFAULT_TOLERANCE)

    def band_flags(p):
        p.add_argument("--trials", type=int, default=10000, help="random ranking pairs for the baseline band")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("validate", help="parse and check a wordlist")
    db_flags(p)
    out_flag(p, required=False, help="write the summary here instead of stdout")

    p = sub.add_parser("overlap", help="pairwise language overlaps")
    db_flags(p)
    out_flag(p, help="overlap CSV; support counts go to OUT with suffix .support.csv")

    p = sub.add_parser("stability", help="per-item stabilities")
    db_flags(p)
    out_flag(p)
    p.add_argument("--kind", choices=[KIND_ACTUAL, KIND_ESTIMATED], required=True)
    p.add_argument("--proto")

    p = sub.add_parser("rates", help="per-item replacement rates")
    db_flags(p)
    out_flag(p)
    p.add_argument("--kind", choices=[KIND_ACTUAL, KIND_ESTIMATED], required=True)
    time_flags(p)

    p = sub.add_parser("fit-lambda", help="regress actual on estimated rates")
    db_flags(p)
    out_flag(p)
    time_flags(p)
    p.add_argument("--scatter", type=Path, help="also write paired r,s columns here")

    p = sub.add_parser("chrono", help="pairwise time distances")
    db_flags(p)
    out_flag(p)
    p.add_argument("--method", choices=list(chrono.METHODS), required=True)
    p.add_argument("--rates", dest="rate_kind", choices=[KIND_ACTUAL, KIND_ESTIMATED], default=KIND_ESTIMATED)
    time_flags(p)
    scale_flags(p)

    p = sub.add_parser("ranking", help="stability ranking, optionally the actual-vs-estimated curve")
    db_flags(p)
    out_flag(p, help="ranked list CSV")
    p.add_argument("--kind", choices=[KIND_ACTUAL, KIND_ESTIMATED], default=KIND_ESTIMATED)
    p.add_argument("--proto")
    p.add_argument("--curve", type=Path, help="write c(m) of actual vs estimated rankings here")
    band_flags(p)

    p = sub.add_parser("compare", help="c(m) between two families or two tagged sub-families")
    db_flags(p)
    out_flag(p)
    p.add_argument("--db-b", type=Path, help="second family")
    p.add_argument("--meta-b", type=Path)
    p.add_argument("--split-tag", help="compare languages carrying TAG against the other moderns")
    band_flags(p)

    p = sub.add_parser("simulate", help="simulate a family with known rates and times")
    out_flag(p, help="wordlist TSV; .meta and .truth_*.csv are written next to it")
    p.add_argument("--leaves", type=int, default=60)
    p.add_argument("--items", type=int, default=110)
    p.add_argument("--depth", type=float, default=1.5, help="root-to-leaf time in millennia")
    p.add_argument("--clades", type=int, default=1, help="number of sub-families (1 = star tree)")
    p.add_argument("--clade-depth", type=float, default=0.0, help="root-to-clade time in millennia")
    p.add_argument("--Z", type=float, default=7.0, help="Gamma shape of the rate draw")
    p.add_argument("--P", type=float, default=0.076, help="Gamma scale of the rate draw")
    p.add_argument("--alphabet", type=int, default=26)
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--mutation", type=float, default=0.0, help="per-character substitution rate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family-name", default="simulated")
    p.add_argument("--no-proto", action="store_true", help="do not emit the root as a proto language")
    p.add_argument("--threads", type=int, default=_default_threads(), help="accepted for uniformity")

    p = sub.add_parser("report", help="full pipeline with one CSV per figure")
    db_flags(p)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--method", choices=list(chrono.METHODS), default=chrono.METHOD_GENERALIZED)
    time_flags(p)
    scale_flags(p)
    p.add_argument("--db-b", type=Path, help="second family for the cross-family curve")
    p.add_argument("--meta-b", type=Path)
    p.add_argument("--split-tag", help="cross-family curve between TAG languages and the other moderns")
    p.add_argument("--truth", type=Path, help="truth prefix from `simulate` (default: auto-detect next to DB)")
    p.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")
    band_flags(p)
    return parser


def parse_args(argv: list[str]) -> Command:
    ns = build_parser().parse_args(argv)
    if ns.subcommand is None:
        raise UsageError("missing subcommand; choose from " + ", ".join(SUBCOMMANDS))
    params = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "db", "meta", "db_b", "meta_b", "out", "out_dir", "truth")}
    inputs = {k: getattr(ns, k) for k in ("db", "meta", "db_b", "meta_b", "truth") if getattr(ns, k, None) is not None}
    output = getattr(ns, "out", None) or getattr(ns, "out_dir", None)

    if params.get("lambda_") is not None and params.get("anchor") is not None:
        raise ConflictError("--lambda and --anchor are mutually exclusive")
    if getattr(ns, "db_b", None) is not None and getattr(ns, "split_tag", None) is not None:
        raise ConflictError("--db-b and --split-tag are mutually exclusive")
    if ns.subcommand == "compare" and ns.db_b is None and ns.split_tag is None:
        raise UsageError("compare needs --db-b or --split-tag")
    if "threads" in params and params["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    if output is not None:
        resolved = Path(output).resolve()
        for name, path in inputs.items():
            if Path(path).resolve() == resolved:
                raise UsageError(f"output path equals input --{name.replace('_', '-')}")
    return Command(ns.subcommand, inputs, output, params)


# --------------------------------------------------------------------------
# execution

def _load(cmd: Command, which: str = "db"):
    meta = cmd.inputs.get("meta" if which == "db" else "meta_b")
    return load_database(cmd.inputs[which], meta)


def _rates(db, kind, p):
    if kind == KIND_ACTUAL:
        return rates_from_stability(actual_stability(db, _scorer(p), proto=p.get("proto")), p["T"])
    return rates_from_stability(estimated_stability(db, _scorer(p)), p["Ts"])


def _scorer(p) -> SimilarityScorer:
    return SimilarityScorer(p.get("scorer", "nld"))


def _run_validate(cmd: Command) -> None:
    db = _load(cmd)
    synonyms = sum(1 for forms in db.slots.values() if len(forms) > 1)
    lines = [
        f"family={db.family_name}",
        f"languages={db.N}",
        f"items={db.M}",
        f"slots={len(db.slots)}",
        f"missing={db.N * db.M - len(db.slots)}",
        f"slots_with_synonyms={synonyms}",
        f"proto={','.join(db.languages[k].label for k in db.proto_indices()) or '-'}",
    ]
    if cmd.output is not None:
        with atomic_text(cmd.output) as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))


def _run_overlap(cmd):
    p = cmd.params
    write_overlap_csv(overlap_matrix(_load(cmd), _scorer(p), threads=p["threads"]), cmd.output)


def _run_stability(cmd):
    p = cmd.params
    db = _load(cmd)
    if p["kind"] == KIND_ACTUAL:
        table = actual_stability(db, _scorer(p), proto=p.get("proto"))
    else:
        table = estimated_stability(db, _scorer(p))
    write_table_csv(table, cmd.output)


def _run_rates(cmd):
    write_table_csv(_rates(_load(cmd), cmd.params["kind"], cmd.params), cmd.output)


def _run_fit_lambda(cmd):
    p = cmd.params
    db = _load(cmd)
    r = _rates(db, KIND_ACTUAL, p)
    s = _rates(db, KIND_ESTIMATED, p)
    fit = fit_lambda(r, s)
    with atomic_csv(cmd.output, "lambda fit of actual on estimated rates; columns: lambda,method,residual,n_items,dropped,T,Ts") as w:
        w.writerow(["lambda", "method", "residual", "n_items", "dropped", "T", "Ts"])
        w.writerow([format_float(fit.lambda_), fit.method, format_float(fit.residual),
                    fit.n_items, fit.dropped, format_float(p["T"]), format_float(p["Ts"])])
    if p.get("scatter"):
        write_scatter_csv(r, s, p["scatter"], "r", "s")


def _run_chrono(cmd):
    p = cmd.params
    db = _load(cmd)
    rates = _rates(db, p["rate_kind"], p).defined()
    lam, _ = lambda_for(db, rates, lambda_=p["lambda_"], anchor=p["anchor"],
                        scorer=_scorer(p), tolerance=p["tolerance"])
    times = chrono.time_matrix(db, rates, lam, _scorer(p), p["method"], p["tolerance"], threads=p["threads"])
    chrono.write_time_csv(times, cmd.output)
    for (a, b), flag in sorted(times.flags.items()):
        log.warning("time %s-%s undefined: %s", a, b, flag)


def _run_ranking(cmd):
    p = cmd.params
    db = _load(cmd)
    if p["kind"] == KIND_ACTUAL:
        table = actual_stability(db, _scorer(p), proto=p.get("proto"))
    else:
        table = estimated_stability(db, _scorer(p))
    if table.undefined:
        log.warning("dropping %d items with undefined stability", len(table.undefined))
    ranked = rank_items(table.defined())
    write_ranking_csv(ranked, dict(zip(table.item_ids, table.glosses)), cmd.output)
    if p.get("curve"):
        R = actual_stability(db, _scorer(p), proto=p.get("proto"))
        S = estimated_stability(db, _scorer(p))
        both = [i for i in R.defined().item_ids if i in set(S.defined().item_ids)]
        curve = common_count_curve(rank_items(R.restrict(both)), rank_items(S.restrict(both)))
        curve = curve.with_band(random_baseline_band(curve.M, p["trials"], p["seed"], p["threads"]))
        write_curve_csv(curve, p["curve"])


def _families(cmd, db):
    """The two families for a ranking comparison, with a label, or ``None``."""
    p = cmd.params
    if "db_b" in cmd.inputs:
        other = _load(cmd, "db_b")
        return db, other, f"{db.family_name} vs {other.family_name}"
    if p.get("split_tag"):
        tag = p["split_tag"]
        inside = subset(db, has_tag(tag))
        outside = subset(db, lambda lang: is_modern(lang) and tag not in lang.tags)
        return inside, outside, f"{tag} vs other"
    return None


def _run_compare(cmd):
    p = cmd.params
    a, b, _ = _families(cmd, _load(cmd))
    curve = compare_families(a, b, _scorer(p))
    curve = curve.with_band(random_baseline_band(curve.M, p["trials"], p["seed"], p["threads"]))
    write_curve_csv(curve, cmd.output)


def _run_simulate(cmd):
    p = cmd.params
    config = simgen.SimConfig(
        M=p["items"], gamma_shape=p["Z"], gamma_scale=p["P"], alphabet_size=p["alphabet"],
        min_length=p["min_len"], max_length=p["max_len"], mutation_rate=p["mutation"],
        seed=p["seed"], family_name=p["family_name"],
    )
    if p["clades"] <= 1:
        tree = simgen.star_tree(p["leaves"], p["depth"])
    else:
        if p["leaves"] % p["clades"]:
            raise UsageError("--leaves must be a multiple of --clades")
        tree = simgen.clade_tree(p["clades"], p["leaves"] // p["clades"], p["depth"], p["clade_depth"])
    rates = simgen.draw_rates(config)
    db = simgen.simulate_family(simgen.random_proto(config), tree, rates, config, emit_proto=not p["no_proto"])
    tsv, meta = serialize_database(db)
    out = Path(cmd.output)
    with atomic_text(out) as fh:
        fh.write(tsv)
    with atomic_text(out.with_suffix(".meta")) as fh:
        fh.write(meta)
    simgen.write_truth(out.with_suffix(""), config.item_ids, rates, tree)


def _run_report(cmd):
    p = cmd.params
    db = _load(cmd)
    prefix = cmd.inputs.get("truth")
    if prefix is None:
        candidate = Path(cmd.inputs["db"]).with_suffix("")
        if Path(simgen.truth_paths(candidate)[0]).exists():
            prefix = candidate
    run_report(
        db, cmd.output, T=p["T"], Ts=p["Ts"], method=p["method"], lambda_=p["lambda_"],
        anchor=p["anchor"], proto=p.get("proto"), scorer=_scorer(p), tolerance=p["tolerance"],
        families=_families(cmd, db), truth=simgen.read_truth(prefix) if prefix is not None else None,
        trials=p["trials"], seed=p["seed"], threads=p["threads"], figures=p["figures"],
    )


RUNNERS = {
    "validate": _run_validate,
    "overlap": _run_overlap,
    "stability": _run_stability,
    "rates": _run_rates,
    "fit-lambda": _run_fit_lambda,
    "chrono": _run_chrono,
    "ranking": _run_ranking,
    "compare": _run_compare,
    "simulate": _run_simulate,
    "report": _run_report,
}


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    line = getattr(exc, "line", None)
    if line is not None:
        payload["line"] = line
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
    return code


def execute(cmd: Command) -> int:
    try:
        RUNNERS[cmd.subcommand](cmd)
    except GlottoError as exc:
        return _fail(exc, exc.exit_code)
    except (OSError, KeyError) as exc:
        return _fail(exc, EXIT_IO if isinstance(exc, OSError) else 1)
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cmd = parse_args(sys.argv[1:] if argv is None else argv)
    except GlottoError as exc:
        return _fail(exc, exc.exit_code)
    return execute(cmd)


if __name__ == "__main__":
    sys.exit(main())
