"""Command-line front end: ``morphdiv <command> [options]``.

Every option can also come from a ``key=value`` file given with ``--config``
(keys are the long flag names without dashes, ``-`` or ``_`` both accepted);
flags on the command line win. Report TSVs start with a ``# config_hash=``
line followed by a column header; JSON reports carry a ``config_hash`` field.
The hash covers the command, its analytic settings and the SHA-256 of every
input file, but not the output directory, worker count or chunk size, which
never change results.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from typing import Sequence

from . import __version__, plotting
from .alignment import AlignmentError, DEFAULT_CONTENT_DEPRELS, load_deprel_set
from .patterns import ARC, WORD, write_occurrences, occurrences_by_sentence
from .pipeline import DataError, ExtractOptions, run_extraction, validate_corpus
from .quality import (CorrelationRow, GroupQualityReport, build_all_groups, filter_by_score,
                      frequency_correlates, ingest_external_scores, score_groups)
from .stats import (BinnedSeries, ComparisonRecord, ConditionalPatternDistribution, O2O,
                    bin_wd_by_frequency, breakdown, compare_corpora, convergence_rate, kde,
                    pattern_diversity, quadratic_fit, summary_block)
from .synthcorpus import (DecoderBias, GeneratorSpec, convergence_sweep_spec, generate_files,
                          simulate_decoder, zipf_spec)
from .treebank_io import ConlluError

log = logging.getLogger("morphdiv")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# settings that name input files; their contents (not paths) go into the config hash
PATH_KEYS = ("src", "tgt", "align", "src_b", "tgt_b", "align_b", "dist_a", "dist_b", "content_deprels",
             "scores", "filter_scores", "mt", "ref", "spec", "reports")
# settings that cannot change any report byte
UNHASHED = ("out", "workers", "chunk_size", "config", "figures", "verbose", "handler")

PATTERN_COLUMNS = ("pattern", "freq", "o2o_freq", "diversity", "convergence_rate",
                   "o2o_conv", "o2o_div", "null", "others")
CATEGORY_COLUMNS = ("corpus", "o2o", "src2null", "other", "null2tgt")
BIN_COLUMNS = ("log10_lo", "log10_hi", "n", "mean_wd", "ci95_half_width")
GROUP_COLUMNS = ("metric", "source_pattern", "target_pattern", "n_control", "n_experiment",
                 "control_score", "experiment_score", "delta")
REJECTED_COLUMNS = ("source_pattern", "target_pattern", "n_control", "n_experiment", "reason")
KDE_COLUMNS = ("metric", "x", "density")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _positive_int(text) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _positive_float(text) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def read_config(path) -> dict[str, str]:
    """Parse a key=value file; blank lines and '#' comments are ignored."""
    cfg = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            cfg[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return cfg


# --- parser ----------------------------------------------------------------

def _add_corpus(p, suffix="", help_side=""):
    p.add_argument(f"--src{suffix}", help=f"source CoNLL-U{help_side}")
    p.add_argument(f"--tgt{suffix}", help=f"target CoNLL-U{help_side}")
    p.add_argument(f"--align{suffix}", help=f"Pharaoh alignments{help_side}")


def _add_extract_opts(p):
    p.add_argument("--patterns", choices=("word", "arc", "both"), default="both")
    p.add_argument("--content-deprels", metavar="FILE", help="content-relation label list (default: bundled set)")
    p.add_argument("--strict", type=_bool, nargs="?", const=True, default=True,
                   help="fail on malformed trees (default true; false repairs extra roots)")
    p.add_argument("--keep-subtypes", type=_bool, nargs="?", const=True, default=False,
                   help="keep deprel subtypes such as nsubj:pass")
    p.add_argument("--all-children", type=_bool, nargs="?", const=True, default=False,
                   help="word patterns list all children, not just content ones")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--chunk-size", type=_positive_int, default=5000)


def _add_common(p):
    p.add_argument("--config", metavar="FILE", help="key=value settings file")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    p.add_argument("--figures", type=_bool, nargs="?", const=True, default=True,
                   help="render SVG figures next to the reports")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="morphdiv", description="Morphosyntactic divergence analysis of parallel treebanks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check trees and alignments")
    _add_common(p)
    _add_corpus(p)
    p.add_argument("--keep-subtypes", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--check-upos", type=_bool, nargs="?", const=True, default=False)
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("extract", help="write pattern occurrence TSVs")
    _add_common(p)
    _add_corpus(p)
    _add_extract_opts(p)
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("stats", help="diversity, convergence and alignment summaries")
    _add_common(p)
    _add_corpus(p)
    _add_extract_opts(p)
    p.add_argument("--entropy-base", type=_positive_float, default=2.0)
    p.add_argument("--min-pattern-freq", type=_positive_int, default=1000,
                   help="patterns below this o2o frequency are left out of figures")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("compare", help="per-pattern differences between corpus A and corpus B")
    _add_common(p)
    _add_corpus(p, help_side=" (corpus A)")
    _add_corpus(p, "-b", help_side=" (corpus B; --src-b defaults to --src)")
    p.add_argument("--dist-a", metavar="FILE", help="counts TSV for A instead of a corpus")
    p.add_argument("--dist-b", metavar="FILE", help="counts TSV for B instead of a corpus")
    _add_extract_opts(p)
    p.add_argument("--entropy-base", type=_positive_float, default=2.0)
    p.add_argument("--min-pattern-freq", type=_positive_int, default=1000)
    p.add_argument("--bin-width", type=_positive_float, default=0.5, help="log10 frequency bin width")
    p.add_argument("--bin-frequency", choices=("ht", "pooled"), default="ht",
                   help="bin by A's frequency or A and B pooled")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("quality", help="divergence groups vs MT quality")
    _add_common(p)
    _add_corpus(p)
    _add_extract_opts(p)
    p.set_defaults(patterns="word")
    p.add_argument("--mt", metavar="FILE", help="MT output, one segment per line in sentence order")
    p.add_argument("--ref", metavar="FILE", help="references, one segment per line in sentence order")
    p.add_argument("--scores", metavar="FILE", help="external per-sentence scores (sentence_id<TAB>score)")
    p.add_argument("--metric-name", default="external", help="label for --scores in the reports")
    p.add_argument("--dist-a", metavar="FILE", help="training counts TSV (default: the corpus itself)")
    p.add_argument("--min-group-size", type=_positive_int, default=100)
    p.add_argument("--keep-fraction", type=float, default=1.0,
                   help="keep this share of sentences by --filter-scores before grouping")
    p.add_argument("--filter-scores", metavar="FILE", help="per-sentence scores used by --keep-fraction")
    p.add_argument("--keep", choices=("lowest", "highest"), default="lowest")
    p.add_argument("--smooth", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--tokenize", choices=("none", "13a"), default="none")
    p.set_defaults(handler=cmd_quality)

    p = sub.add_parser("plot", help="re-render figures from report TSVs")
    _add_common(p)
    p.add_argument("reports", nargs="+", metavar="REPORT")
    p.set_defaults(handler=cmd_plot)

    p = sub.add_parser("synth", help="generate a synthetic parallel treebank")
    _add_common(p)
    p.add_argument("--spec", metavar="FILE", help="GeneratorSpec JSON")
    p.add_argument("--preset", choices=("sweep", "zipf"), default="zipf")
    p.add_argument("--n-sentences", type=_positive_int, help="default: from --spec, else 1000")
    p.add_argument("--n-patterns", type=_positive_int, default=60)
    p.add_argument("--seed", type=int, help="default: from --spec, else 0")
    p.add_argument("--prefix", default="synth")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("simulate", help="simulate a decoder over a counts TSV")
    _add_common(p)
    p.add_argument("--dist-a", metavar="FILE", required=False, help="HT counts TSV")
    p.add_argument("--decoder", choices=("faithful_sample", "argmax", "temperature", "top_p"), default="argmax")
    p.add_argument("--temperature", type=_positive_float, default=1.0)
    p.add_argument("--top-p", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="simulated", help="output file stem")
    p.set_defaults(handler=cmd_simulate)
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            cfg = read_config(args.config)
        except OSError as e:
            parser.error(f"cannot read config: {e}")
        except UsageError as e:
            parser.error(str(e))
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(cfg) - known - {"config"})
        if unknown:
            parser.error(f"unknown config key(s): {', '.join(unknown)}")
        # config values become defaults, so explicit flags still win; argparse applies `type` to them
        subparser.set_defaults(**{k: v for k, v in cfg.items() if k != "config"})
        args = parser.parse_args(argv)
    return args


# --- helpers -----------------------------------------------------------------

def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(args: argparse.Namespace) -> str:
    settings = {}
    for key, value in sorted(vars(args).items()):
        if key in UNHASHED:
            continue
        if key in PATH_KEYS and value is not None:
            paths = value if isinstance(value, list) else [value]
            value = [file_digest(p) for p in paths]
        settings[key] = value
    blob = json.dumps(settings, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return "NA" if math.isnan(v) else format(v, ".10g")
    return str(v)


def write_tsv(path, columns, rows, chash):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# config_hash={chash}\n")
        f.write("\t".join(columns) + "\n")
        for row in rows:
            f.write("\t".join(fmt(v) for v in row) + "\n")
    return path


def write_json(path, payload, chash):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump({"config_hash": chash, **payload}, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    return path


def read_tsv(path) -> tuple[list[str], list[list[str]]]:
    """Column names and rows of a report TSV ('#' lines skipped)."""
    header, rows = None, []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if header is None:
                header = cols
            else:
                rows.append(cols)
    if header is None:
        raise DataError(f"{path}: no header row")
    return header, rows


def _num(text):
    return None if text == "NA" else float(text)


def _types(args) -> tuple[str, ...]:
    return (WORD, ARC) if args.patterns == "both" else (args.patterns,)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _check_inputs(args):
    for key in PATH_KEYS:
        value = getattr(args, key, None)
        for path in (value if isinstance(value, list) else [value] if value else []):
            if not os.path.isfile(path):
                raise UsageError(f"--{key.replace('_', '-')}: no such file: {path}")
    if getattr(args, "entropy_base", 2.0) == 1:
        raise UsageError("--entropy-base cannot be 1")
    kf = getattr(args, "keep_fraction", None)
    if kf is not None and not 0 < kf <= 1:
        raise UsageError("--keep-fraction must be in (0, 1]")


def _options(args) -> ExtractOptions:
    deprels = load_deprel_set(args.content_deprels) if args.content_deprels else DEFAULT_CONTENT_DEPRELS
    return ExtractOptions(deprels, not args.keep_subtypes, args.strict, args.all_children, _types(args))


def _out(args, name) -> str:
    return os.path.join(args.out, name)


def _extract(args, src, tgt, align, **kw):
    return run_extraction(src, tgt, align, _options(args), workers=args.workers,
                          chunk_size=args.chunk_size, **kw)


def _load_dist(path, ptype) -> ConditionalPatternDistribution:
    with open(path, encoding="utf-8") as f:
        try:
            return ConditionalPatternDistribution.from_tsv(f, ptype)
        except ValueError as e:
            raise DataError(f"{path}: {e}") from None


def write_counts(path, dist: ConditionalPatternDistribution, chash):
    rows = ((p, k, v) for p in dist.patterns() for k, v in sorted(dist.counts[p].items()))
    return write_tsv(path, ("source_pattern", "outcome", "count"), rows, chash)


def _category_rows(tallies):
    for name, tally in tallies:
        try:
            pct = tally.category_percentages()
        except ValueError:
            pct = dict.fromkeys(CATEGORY_COLUMNS[1:])
        yield (name, *(pct[c] for c in CATEGORY_COLUMNS[1:]))


# --- figures -------------------------------------------------------------------

def render_report(path, outdir, min_freq: int = 1) -> list[str]:
    """Render the figures belonging to one report TSV; the kind is detected from its header."""
    header, rows = read_tsv(path)
    stem = os.path.splitext(os.path.basename(path))[0]
    out = []

    def target(suffix):
        p = os.path.join(outdir, f"{stem}.{suffix}.svg")
        out.append(p)
        return p

    cols = tuple(header)
    if cols == PATTERN_COLUMNS:
        ix = {c: i for i, c in enumerate(cols)}
        pts = [(float(r[ix["convergence_rate"]]), float(r[ix["diversity"]])) for r in rows
               if r[ix["diversity"]] != "NA" and int(r[ix["o2o_freq"]]) >= min_freq]
        plotting.scatter(target("quadrant"), [p[0] for p in pts], [p[1] for p in pts],
                         xlabel="convergence rate", ylabel="diversity", title=stem)
        top = sorted(rows, key=lambda r: (-int(r[ix["freq"]]), r[0]))[:20]
        plotting.stacked_bar(target("breakdown"), [r[0] for r in top],
                             {c: [float(r[ix[c]]) for r in top] for c in ("o2o_conv", "o2o_div", "null", "others")},
                             ylabel="% of occurrences", title=stem, horizontal=True)
    elif cols == ComparisonRecord.COLUMNS:
        ix = {c: i for i, c in enumerate(cols)}
        sel = [r for r in rows if int(r[ix["freq"]]) >= min_freq]
        plotting.stacked_histogram(target("diversity"), {
            "increase": [v for v in (_num(r[ix["diversity_rel_diff"]]) for r in sel) if v is not None and v > 0],
            "decrease": [v for v in (_num(r[ix["diversity_rel_diff"]]) for r in sel) if v is not None and v <= 0]},
            xlabel="relative diversity difference", title=stem)
        conv = [(_num(r[ix["convergence_a"]]), _num(r[ix["convergence_abs_diff"]])) for r in sel]
        conv = [(a, d) for a, d in conv if d is not None]
        plotting.stacked_histogram(target("convergence"), {
            "increase": [d for _, d in conv if d > 0], "decrease": [d for _, d in conv if d <= 0]},
            xlabel="convergence rate difference", title=stem)
        fit = None
        try:
            fit = quadratic_fit([a for a, _ in conv], [d for _, d in conv])
        except Exception:  # too few distinct points for a curve
            pass
        plotting.scatter(target("delta_vs_rate"), [a for a, _ in conv], [d for _, d in conv],
                         xlabel="convergence rate (A)", ylabel="convergence difference (B - A)",
                         title=stem, fit=fit)
    elif cols == BIN_COLUMNS:
        series = [(float(r[0]), float(r[1]), int(r[2]), _num(r[3]), _num(r[4])) for r in rows]
        plotting.binned_line(target("wd"), {stem: series}, title=stem)
    elif cols == CATEGORY_COLUMNS:
        plotting.stacked_bar(target("categories"), [r[0] for r in rows],
                             {c: [_num(r[i]) or 0.0 for r in rows] for i, c in enumerate(cols[1:4], 1)},
                             ylabel="% of source content words", title=stem)
    elif cols == KDE_COLUMNS:
        curves, points = {}, {}
        for metric, x, d in rows:
            if d == "point_mass":
                points[metric] = float(x)
            else:
                xs, ys = curves.setdefault(metric, ([], []))
                xs.append(float(x))
                ys.append(float(d))
        plotting.density_curves(target("density"), curves, xlabel="score delta (experiment - control)",
                                title=stem, point_masses=points)
    else:
        raise DataError(f"{path}: unrecognised report columns {header}")
    return out


def _render(args, paths, min_freq=1):
    if args.figures:
        for p in paths:
            render_report(p, args.out, min_freq)


# --- commands --------------------------------------------------------------------

def cmd_validate(args, chash):
    _require(args, "src")
    if (args.tgt is None) != (args.align is None):
        raise UsageError("--tgt and --align go together")
    problems = validate_corpus(args.src, args.tgt, args.align, not args.keep_subtypes, args.check_upos)
    for p in problems:
        print(p)
    print(f"{len(problems)} violation(s)")
    write_tsv(_out(args, "validation.tsv"), ("problem",), ((p,) for p in problems), chash)
    return EXIT_DATA if problems else EXIT_OK


def cmd_extract(args, chash):
    _require(args, "src", "tgt", "align")
    streams = {}
    try:
        for t in _types(args):
            streams[t] = open(_out(args, f"occurrences.{t}.tsv"), "w", encoding="utf-8", newline="\n")
            streams[t].write(f"# config_hash={chash}\n")
            write_occurrences((), streams[t])
        result = _extract(args, args.src, args.tgt, args.align, occurrence_streams=streams, keep_ids=False)
    finally:
        for s in streams.values():
            s.close()
    for t in _types(args):
        write_counts(_out(args, f"counts.{t}.tsv"), result.dists[t], chash)
    print(f"{result.tally.sentences} sentence pair(s)")
    return EXIT_OK


def _pattern_rows(dist: ConditionalPatternDistribution, base):
    o2o = dist.restrict(O2O)
    for p in dist.patterns():
        n_o2o = o2o.total(p)
        b = breakdown(dist, p)
        div = pattern_diversity(o2o, p, base) if n_o2o else None
        conv = convergence_rate(o2o, p) if n_o2o else None
        yield (p, dist.total(p), n_o2o, div, conv, b["o2o_conv"], b["o2o_div"], b["null"], b["others"])


def _alignment_block(tally):
    try:
        cats = tally.category_percentages()
    except ValueError:
        cats = None
    return {"categories": cats, "content_words": tally.content_stats(), "sentences": tally.sentences}


def cmd_stats(args, chash):
    _require(args, "src", "tgt", "align")
    result = _extract(args, args.src, args.tgt, args.align, keep_ids=False)
    summary = {"patterns": {}, "alignment": _alignment_block(result.tally), "entropy_base": args.entropy_base}
    reports = []
    for t in _types(args):
        dist = result.dists[t]
        summary["patterns"][t] = summary_block(dist, args.entropy_base)
        write_counts(_out(args, f"counts.{t}.tsv"), dist, chash)
        reports.append(write_tsv(_out(args, f"patterns.{t}.tsv"), PATTERN_COLUMNS,
                                 _pattern_rows(dist, args.entropy_base), chash))
    reports.append(write_tsv(_out(args, "categories.tsv"), CATEGORY_COLUMNS,
                             _category_rows([("corpus", result.tally)]), chash))
    write_json(_out(args, "summary.json"), summary, chash)
    _render(args, reports, args.min_pattern_freq)
    return EXIT_OK


def _mean(values):
    values = [v for v in values if v is not None]
    return math.fsum(values) / len(values) if values else None


def cmd_compare(args, chash):
    corpus_mode = args.dist_a is None
    tallies = []
    if corpus_mode:
        if args.dist_b is not None:
            raise UsageError("--dist-a and --dist-b go together")
        _require(args, "src", "tgt", "align", "tgt_b", "align_b")
        res_a = _extract(args, args.src, args.tgt, args.align, keep_ids=False)
        res_b = _extract(args, args.src_b or args.src, args.tgt_b, args.align_b, keep_ids=False)
        dists = {t: (res_a.dists[t], res_b.dists[t]) for t in _types(args)}
        tallies = [("A", res_a.tally), ("B", res_b.tally)]
    else:
        _require(args, "dist_b")
        if args.patterns == "both":
            raise UsageError("--patterns must be word or arc with counts files")
        t = args.patterns
        dists = {t: (_load_dist(args.dist_a, t), _load_dist(args.dist_b, t))}
    summary = {"patterns": {}, "entropy_base": args.entropy_base, "min_pattern_freq": args.min_pattern_freq}
    reports = []
    for t, (da, db) in dists.items():
        records = compare_corpora(da, db, args.min_pattern_freq, args.entropy_base)
        reports.append(write_tsv(_out(args, f"compare.{t}.tsv"), ComparisonRecord.COLUMNS,
                                 ((getattr(r, c) for c in ComparisonRecord.COLUMNS) for r in records), chash))
        bins: BinnedSeries = bin_wd_by_frequency(da, db, width=args.bin_width, frequency=args.bin_frequency,
                                                 min_freq=1)
        reports.append(write_tsv(_out(args, f"wd_bins.{t}.tsv"), BIN_COLUMNS, bins.rows(), chash))
        paired = [(r.convergence_a, r.convergence_abs_diff) for r in records if r.convergence_abs_diff is not None]
        try:
            fit = quadratic_fit([a for a, _ in paired], [d for _, d in paired])
            fit_block = {"a": fit.a, "b": fit.b, "c": fit.c, "vertex": fit.vertex}
        except Exception:
            fit_block = None
        block_a = summary_block(da, args.entropy_base)
        block_b = summary_block(db, args.entropy_base)
        summary["patterns"][t] = {
            "a": block_a, "b": block_b,
            "compared_patterns": len(paired),
            "missing_in_b": sum(1 for r in records if r.convergence_b is None),
            "mean_diversity_rel_diff": _mean(r.diversity_rel_diff for r in records),
            "mean_convergence_abs_diff": _mean(r.convergence_abs_diff for r in records),
            "mean_wd": _mean(r.wd for r in records),
            "wd_bins_skipped": bins.skipped,
            "convergence_fit": fit_block,
        }
    if tallies:
        reports.append(write_tsv(_out(args, "categories.tsv"), CATEGORY_COLUMNS, _category_rows(tallies), chash))
        summary["alignment"] = {name: _alignment_block(tally) for name, tally in tallies}
    write_json(_out(args, "compare.json"), summary, chash)
    _render(args, reports)
    return EXIT_OK


def _read_segments(path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\r\n") for line in f]


def cmd_quality(args, chash):
    _require(args, "src", "tgt", "align")
    if args.mt is None and args.ref is None and args.scores is None:
        raise UsageError("give --mt and --ref, or --scores")
    if (args.mt is None) != (args.ref is None):
        raise UsageError("--mt and --ref go together")
    if args.keep_fraction < 1 and args.filter_scores is None:
        raise UsageError("--keep-fraction below 1 needs --filter-scores")
    if args.patterns == "both":
        raise UsageError("--patterns must be word or arc for group construction")
    ptype = args.patterns
    result = _extract(args, args.src, args.tgt, args.align, keep_occurrences=True)
    ids = result.sentence_ids
    if len(set(ids)) != len(ids):
        raise DataError("sentence ids are not unique")
    index = occurrences_by_sentence(result.occurrences[ptype])
    kept = ids
    if args.filter_scores is not None and args.keep_fraction < 1:
        with open(args.filter_scores, encoding="utf-8") as f:
            fscores = ingest_external_scores(f)
        try:
            kept = filter_by_score(ids, fscores, args.keep_fraction, args.keep)
        except KeyError as e:
            raise DataError(f"--filter-scores: {e.args[0]}") from None
    index = {sid: index.get(sid, []) for sid in kept}
    specs, rejected = build_all_groups(index, args.min_group_size)
    training = _load_dist(args.dist_a, ptype) if args.dist_a else result.dists[ptype]

    reports: list[GroupQualityReport] = []
    if args.mt is not None:
        mt, ref = _read_segments(args.mt), _read_segments(args.ref)
        for name, seg in (("--mt", mt), ("--ref", ref)):
            if len(seg) != len(ids):
                raise DataError(f"{name}: {len(seg)} line(s) for {len(ids)} sentence(s)")
        mt_map, ref_map = dict(zip(ids, mt)), dict(zip(ids, ref))
        tok = None if args.tokenize == "none" else args.tokenize
        for spec in specs:
            reports.append(score_groups(spec, mt_map, ref_map, "bleu", smooth=args.smooth, tokenize=tok))
    if args.scores is not None:
        with open(args.scores, encoding="utf-8") as f:
            scores = ingest_external_scores(f)
        for spec in specs:
            try:
                reports.append(score_groups(spec, metric=args.metric_name, scores=scores))
            except KeyError as e:
                raise DataError(f"--scores: {e.args[0]}") from None

    group_rows = [(r.metric, r.spec.source_pattern, r.spec.target_pattern, *r.sizes,
                   r.control_score, r.experiment_score, r.delta) for r in reports]
    rej_rows = [(g.p, g.q, g.n_control, g.n_experiment, f"group below {args.min_group_size}") for g in rejected]
    try:
        correlations = frequency_correlates(reports, training)
    except KeyError as e:
        raise DataError(f"training distribution: {e.args[0]}") from None
    kde_rows = []
    for metric in sorted({r.metric for r in reports}):
        deltas = [r.delta for r in reports if r.metric == metric]
        if len(deltas) < 2:
            continue
        curve = kde(deltas)
        if curve.point_mass is not None:
            kde_rows.append((metric, curve.point_mass, "point_mass"))
        kde_rows.extend((metric, float(x), float(d)) for x, d in zip(curve.x, curve.density))

    paths = [write_tsv(_out(args, "groups.tsv"), GROUP_COLUMNS, group_rows, chash),
             write_tsv(_out(args, "rejected.tsv"), REJECTED_COLUMNS, rej_rows, chash),
             write_tsv(_out(args, "correlations.tsv"), CorrelationRow.COLUMNS,
                       ((getattr(c, k) for k in CorrelationRow.COLUMNS) for c in correlations), chash),
             write_tsv(_out(args, "kde.tsv"), KDE_COLUMNS, kde_rows, chash)]
    by_metric = {}
    for r in reports:
        by_metric.setdefault(r.metric, []).append(r.delta)
    write_json(_out(args, "quality.json"), {
        "sentences": len(ids), "sentences_kept": len(kept), "groups": len(specs), "rejected": len(rejected),
        "metrics": {m: {"groups": len(d), "mean_delta": _mean(d),
                        "negative_share": sum(1 for v in d if v < 0) / len(d)} for m, d in by_metric.items()},
    }, chash)
    _render(args, paths[3:])
    return EXIT_OK


def cmd_plot(args, chash):
    for path in args.reports:
        for fig in render_report(path, args.out):
            print(fig)
    return EXIT_OK


def cmd_synth(args, chash):
    if args.spec:
        with open(args.spec, encoding="utf-8") as f:
            try:
                spec = GeneratorSpec.from_json(f.read())
            except (ValueError, TypeError, KeyError) as e:
                raise DataError(f"{args.spec}: {e}") from None
        if args.n_sentences is not None:
            spec.n_sentences = args.n_sentences
        if args.seed is not None:
            spec.seed = args.seed
    else:
        make = convergence_sweep_spec if args.preset == "sweep" else zipf_spec
        spec = make(args.n_patterns, seed=args.seed or 0, n_sentences=args.n_sentences or 1000)
    for p in generate_files(spec, args.out, args.prefix):
        print(p)
    with open(_out(args, f"{args.prefix}.spec.json"), "w", encoding="utf-8") as f:
        f.write(spec.to_json() + "\n")
    return EXIT_OK


def cmd_simulate(args, chash):
    _require(args, "dist_a")
    ht = _load_dist(args.dist_a, None)
    try:
        bias = DecoderBias(args.decoder, args.temperature, args.top_p, args.seed)
        out = simulate_decoder(ht, bias)
    except ValueError as e:
        raise DataError(str(e)) from None
    path = write_counts(_out(args, f"{args.name}.counts.tsv"), out, chash)
    print(path)
    return EXIT_OK


# --- entry point -------------------------------------------------------------------

def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = args.handler
    try:
        _check_inputs(args)
        os.makedirs(args.out, exist_ok=True)
        return handler(args, config_hash(args))
    except UsageError as e:
        print(f"morphdiv: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ConlluError, AlignmentError, ValueError, KeyError, OSError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"morphdiv: data error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
