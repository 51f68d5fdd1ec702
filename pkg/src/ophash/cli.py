"""``ophash`` command line: gen, sketch, compare, dedup, bench.

Exit status is 0 on success, 2 on usage errors and 1 on data errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys
from pathlib import Path
from typing import Sequence

from .core import (
    EMPTY,
    FeatureSet,
    FilterParams,
    FlatBinLayout,
    IncompatibleSketches,
    InvalidArgument,
    MinHashSketch,
    Sketch,
    UndefinedEstimate,
)
from .corpus import Corpus, CorpusFormatError, detect, gen_corpus, read_queries
from .goph import GroupedSketchView, goph_compare
from .hoph import hoph_compare, hoph_estimate, hoph_layout
from .methods import METHODS, Method, SketchConfig
from .minhash import derive_seeds, minhash_estimate
from .oph import DEFAULT_MODE, EmptyBinMode, oph_similarity

log = logging.getLogger("ophash")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _ratio(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B, got {text!r}") from None
    if a < 1 or b < 1:
        raise argparse.ArgumentTypeError("ratio terms must be positive")
    return a, b


def _jaccard(text: str) -> float | tuple[float, float]:
    try:
        if ":" in text:
            lo, hi = (float(x) for x in text.split(":"))
            if not 0 <= lo <= hi <= 1:
                raise ValueError
            return lo, hi
        v = float(text)
        if not 0 <= v <= 1:
            raise ValueError
        return v
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected J or LO:HI within [0, 1], got {text!r}") from None


def _add_sketch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=_positive_int, help="flat bins (oph) or permutations (minhash); default groups*kprime")
    p.add_argument("--kprime", type=_positive_int, default=100, help="bins per group (default 100)")
    p.add_argument("--groups", type=_positive_int, default=10, help="groups for goph (default 10)")
    p.add_argument("--ratio", type=_ratio, default=(1, 1), help="hoph split ratio A:B (default 1:1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--identity-perm", action="store_true", help="use the identity permutation (debugging)")


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, default=0.7)
    p.add_argument("--epsilon", type=float, default=1e-4)
    p.add_argument(
        "--mode",
        choices=[m.value for m in EmptyBinMode],
        default=DEFAULT_MODE.value,
        help="which empty bins leave the denominator",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ophash", description="One permutation hashing for near-duplicate detection.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a synthetic corpus with planted similar pairs")
    g.add_argument("--docs", type=_positive_int, required=True)
    g.add_argument("--size", type=_positive_int, default=8192)
    g.add_argument("--pairs", type=int, default=0)
    g.add_argument("--jaccard", type=_jaccard, default=(0.0, 1.0), help="J or LO:HI (default 0:1)")
    g.add_argument("--vocab", type=_positive_int, default=1 << 16)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("sketch", help="sketch every document of a feature-set file")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--method", choices=METHODS, default="oph")
    _add_sketch_flags(s)
    s.add_argument("--out", required=True)

    c = sub.add_parser("compare", help="compare two documents")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--sketches", help="sketch file written by 'sketch'")
    src.add_argument("--in", dest="infile", help="feature-set file; sketched on the fly")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--method", choices=METHODS)
    _add_sketch_flags(c)
    _add_filter_flags(c)

    d = sub.add_parser("dedup", help="near-duplicate detection for a query list")
    d.add_argument("--in", dest="infile", required=True)
    d.add_argument("--queries", help="file of query doc ids; default: the first --n-queries documents")
    d.add_argument("--n-queries", type=_positive_int, default=100)
    d.add_argument("--method", choices=METHODS, default="goph")
    _add_sketch_flags(d)
    _add_filter_flags(d)
    d.add_argument("--workers", type=_positive_int, default=os.cpu_count() or 1)
    d.add_argument("--report", required=True)
    d.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from the report")

    b = sub.add_parser("bench", help="precision/recall/latency table, one row per method")
    b.add_argument("--in", dest="infile", required=True)
    b.add_argument("--queries")
    b.add_argument("--n-queries", type=_positive_int, default=100)
    b.add_argument("--methods", default=",".join(METHODS))
    _add_sketch_flags(b)
    _add_filter_flags(b)
    b.add_argument("--repeat", type=_positive_int, default=3)
    b.add_argument("--workers", type=_positive_int, default=1)
    return parser


def _config(args) -> SketchConfig:
    return SketchConfig(
        k=args.k,
        k_prime=args.kprime,
        n_groups=args.groups,
        ratio=args.ratio,
        seed=args.seed,
        identity_perm=args.identity_perm,
        mode=EmptyBinMode(getattr(args, "mode", DEFAULT_MODE.value)),
    )


def _params(args) -> FilterParams:
    try:
        return FilterParams(args.threshold, args.epsilon, args.kprime, args.groups)
    except InvalidArgument as exc:
        raise UsageError(str(exc)) from None


def _queries(args, corpus: Corpus) -> list[str]:
    if args.queries:
        return read_queries(args.queries)
    return corpus.ids[: args.n_queries]


# Sketch files: '#key=value' headers, then 'doc_id<TAB>v1 v2 ...' with '-' for an empty bin.


def _write_sketches(path: str, method: str, corpus: Corpus, config: SketchConfig) -> None:
    engine = Method(method, corpus.vocab_size, FilterParams(k_prime=config.k_prime, n_groups=config.n_groups), config)
    header = {
        "method": method,
        "vocab_size": corpus.vocab_size,
        "seed": "identity" if config.identity_perm else config.seed,
        "k": config.flat_bins if method == "minhash" else engine.layout.total_bins,
        "kprime": config.k_prime,
        "groups": config.n_groups,
        "ratio": f"{config.ratio[0]}:{config.ratio[1]}",
    }
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in header.items():
            fh.write(f"#{key}={value}\n")
        for doc_id, fs in corpus.documents:
            if method == "minhash" and not len(fs):
                log.warning("skipping empty document %s", doc_id)
                continue
            sk = engine.sketch(fs)
            values = sk.fingerprints if method == "minhash" else (sk.sketch if method == "goph" else sk).values
            fh.write(doc_id + "\t" + " ".join("-" if v == EMPTY else str(v) for v in values) + "\n")


def _read_sketches(path: str) -> tuple[dict[str, str], dict[str, tuple[int, ...]]]:
    header: dict[str, str] = {}
    rows: dict[str, tuple[int, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n\r")
            if not line.strip():
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                header[key.strip()] = value.strip()
                continue
            doc_id, tab, rest = line.partition("\t")
            if not tab:
                raise CorpusFormatError(path, lineno, "expected 'doc_id<TAB>values'")
            try:
                rows[doc_id] = tuple(EMPTY if t == "-" else int(t) for t in rest.split())
            except ValueError:
                raise CorpusFormatError(path, lineno, "sketch values must be integers or '-'") from None
    for key in ("method", "vocab_size", "seed"):
        if key not in header:
            raise CorpusFormatError(path, 1, f"missing '#{key}=' header")
    return header, rows


def _sketches_from_file(args):
    header, rows = _read_sketches(args.sketches)
    method = header["method"]
    if args.method and args.method != method:
        raise InvalidArgument(f"sketch file holds {method} sketches, not {args.method}")
    for doc in (args.a, args.b):
        if doc not in rows:
            raise InvalidArgument(f"document {doc!r} not in {args.sketches}")
    try:
        V = int(header["vocab_size"])
        k = int(header.get("k", 0))
        kp = int(header.get("kprime", 100))
        groups = int(header.get("groups", 10))
        a, b = (int(x) for x in header.get("ratio", "1:1").split(":"))
        seed = None if header["seed"] == "identity" else int(header["seed"])
    except ValueError as exc:
        raise CorpusFormatError(args.sketches, 1, f"bad header value: {exc}") from None
    if method == "minhash":
        seeds = derive_seeds(seed, k)
        return method, MinHashSketch(rows[args.a], seeds), MinHashSketch(rows[args.b], seeds), kp, groups
    if method == "hoph":
        layout = hoph_layout(V, a, b, kp)
    else:
        layout = FlatBinLayout(V, k)
    return method, Sketch(layout, rows[args.a], seed), Sketch(layout, rows[args.b], seed), kp, groups


def _print_trace(trace, out) -> None:
    out.write("group\tmatched\tcumulative\trequired\ttail\taction\n")
    for st in trace:
        req = "" if st.required is None else f"{st.required:.4f}"
        tail = "" if st.tail is None else f"{st.tail:.6g}"
        out.write(f"{st.group}\t{st.matched}\t{st.cumulative}\t{req}\t{tail}\t{st.action}\n")


def cmd_gen(args, out) -> int:
    if args.pairs < 0:
        raise UsageError("--pairs must be non-negative")
    if 2 * args.pairs > args.docs:
        raise UsageError(f"--pairs {args.pairs} needs at least {2 * args.pairs} documents")
    if args.size > args.vocab:
        raise UsageError("--size exceeds --vocab")
    corpus = gen_corpus(args.docs, args.size, args.pairs, args.jaccard, args.vocab, args.seed)
    corpus.write(args.out)
    return 0


def cmd_sketch(args, out) -> int:
    corpus = Corpus.read(args.infile)
    _write_sketches(args.out, args.method, corpus, _config(args))
    return 0


def cmd_compare(args, out) -> int:
    params = _params(args)
    mode = EmptyBinMode(args.mode)
    if args.sketches:
        method, sa, sb, kp, groups = _sketches_from_file(args)
        params = FilterParams(params.threshold, params.epsilon, kp, groups)
    else:
        method = args.method or "oph"
        corpus = Corpus.read(args.infile)
        docs = corpus.as_dict()
        for doc in (args.a, args.b):
            if doc not in docs:
                raise InvalidArgument(f"document {doc!r} not in {args.infile}")
        engine = Method(method, corpus.vocab_size, params, _config(args))
        sa, sb = engine.sketch(docs[args.a]), engine.sketch(docs[args.b])
        params = engine.params

    if method == "minhash":
        est = minhash_estimate(sa, sb)
        out.write(f"estimate\t{est:.6g}\nverdict\t{'similar' if est >= params.threshold else 'not_similar'}\n")
    elif method == "oph":
        est = oph_similarity(sa, sb, mode)
        out.write(f"estimate\t{est:.6g}\nverdict\t{'similar' if est >= params.threshold else 'not_similar'}\n")
    else:
        if method == "goph":
            sa = sa if isinstance(sa, GroupedSketchView) else GroupedSketchView(sa, params.n_groups, params.k_prime)
            sb = sb if isinstance(sb, GroupedSketchView) else GroupedSketchView(sb, params.n_groups, params.k_prime)
            verdict, trace = goph_compare(sa, sb, params, mode)
        else:
            verdict, trace = hoph_compare(sa, sb, params, mode)
            if verdict.estimate is None:
                try:
                    out.write(f"full_estimate\t{hoph_estimate(sa, sb, mode):.6g}\n")
                except UndefinedEstimate:
                    pass
        if verdict.estimate is not None:
            out.write(f"estimate\t{verdict.estimate:.6g}\n")
        out.write(f"verdict\t{verdict.decision.value}\n")
        out.write(f"groups_compared\t{verdict.groups_compared}/{verdict.total_groups}\n")
        _print_trace(trace, out)
    return 0


def cmd_dedup(args, out) -> int:
    params = _params(args)
    corpus = Corpus.read(args.infile)
    report = detect(corpus, _queries(args, corpus), args.method, params, _config(args), args.workers)
    Path(args.report).write_text(report.to_text(include_timing=not args.no_timing), encoding="utf-8")
    out.write(
        f"retrieved {len(report.retrieved)} pairs; precision {report.precision:.4f}, recall {report.recall:.4f}\n"
    )
    return 0


def cmd_bench(args, out) -> int:
    params = _params(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise UsageError(f"--methods must list some of {', '.join(METHODS)}")
    corpus = Corpus.read(args.infile)
    queries = _queries(args, corpus)
    config = _config(args)
    out.write("method\tprecision\trecall\tretrieved\tground_truth\tmean_groups\tmean_bins\tseconds\n")
    for m in methods:
        times = []
        for _ in range(args.repeat):
            report = detect(corpus, queries, m, params, config, args.workers)
            times.append(report.seconds)
        groups = "" if report.mean_groups_compared is None else f"{report.mean_groups_compared:.3f}"
        out.write(
            f"{m}\t{report.precision:.4f}\t{report.recall:.4f}\t{len(report.retrieved)}\t"
            f"{len(report.ground_truth)}\t{groups}\t{report.mean_bins_compared:.1f}\t{statistics.median(times):.4f}\n"
        )
    return 0


COMMANDS = {"gen": cmd_gen, "sketch": cmd_sketch, "compare": cmd_compare, "dedup": cmd_dedup, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"ophash {args.command}: {exc}", file=sys.stderr)
        return 2
    except (InvalidArgument, IncompatibleSketches, UndefinedEstimate, OSError) as exc:
        print(f"ophash {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
