"""Corpus-level extraction over paired source/target/alignment files.

Files are paired strictly by sentence ordinal. Work is split into chunks of
consecutive sentences; each chunk yields mergeable counts plus (optionally)
its occurrence rows, and chunks are merged back in ordinal order, so results
do not depend on chunk size or worker count.
"""

from __future__ import annotations

import itertools
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Iterator

from .alignment import (AlignedSentencePair, AlignmentError, AlignmentTally, DEFAULT_CONTENT_DEPRELS,
                        categorize_alignments, content_words, parse_pharaoh)
from .patterns import (ARC, WORD, PatternOccurrence, extract_arc_patterns, extract_word_patterns,
                       format_occurrence)
from .stats import ConditionalPatternDistribution
from .treebank_io import ConlluError, iter_blocks, parse_block, validate_tree

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Input files are inconsistent with each other or malformed."""


@dataclass(frozen=True)
class ExtractOptions:
    content_deprels: frozenset = DEFAULT_CONTENT_DEPRELS
    strip_subtypes: bool = True
    strict: bool = True
    all_children: bool = False
    pattern_types: tuple = (WORD, ARC)


@dataclass
class CorpusResult:
    dists: dict[str, ConditionalPatternDistribution]
    tally: AlignmentTally = field(default_factory=AlignmentTally)
    sentence_ids: list[str] | None = None
    occurrences: dict[str, list[PatternOccurrence]] | None = None

    def merge(self, other: "CorpusResult") -> "CorpusResult":
        for t, d in other.dists.items():
            self.dists.setdefault(t, ConditionalPatternDistribution(t)).merge(d)
        self.tally.merge(other.tally)
        if other.sentence_ids is not None:
            self.sentence_ids = (self.sentence_ids or []) + other.sentence_ids
        if other.occurrences is not None:
            if self.occurrences is None:
                self.occurrences = {}
            for t, occs in other.occurrences.items():
                self.occurrences.setdefault(t, []).extend(occs)
        return self


def _open_lines(path) -> Iterator[str]:
    with open(path, encoding="utf-8") as f:
        yield from f


def iter_raw(src_path, tgt_path, align_path) -> Iterator[tuple[int, list[str], list[str], str]]:
    """Yield (ordinal, src block, tgt block, alignment line) in lockstep."""
    src = iter_blocks(_open_lines(src_path))
    tgt = iter_blocks(_open_lines(tgt_path))
    aln = (line.rstrip("\r\n") for line in _open_lines(align_path))
    end = object()
    for k, (s, t, a) in enumerate(itertools.zip_longest(src, tgt, aln, fillvalue=end)):
        if s is end or t is end or a is end:
            missing = [name for name, v in (("source", s), ("target", t), ("alignment", a)) if v is end]
            raise DataError(f"sentence/line count mismatch at sentence {k + 1} "
                            f"(alignment line {k + 1}): {', '.join(missing)} ended early")
        yield k, s, t, a


def build_pair(ordinal: int, src_block, tgt_block, align_line, opts: ExtractOptions) -> AlignedSentencePair:
    try:
        source = parse_block(src_block, ordinal, opts.strip_subtypes, opts.strict)
        target = parse_block(tgt_block, ordinal, opts.strip_subtypes, opts.strict)
    except ConlluError as e:
        raise DataError(f"sentence {ordinal + 1}: {e}") from None
    try:
        links = parse_pharaoh(align_line, len(source), len(target))
    except AlignmentError as e:
        raise DataError(f"alignment line {ordinal + 1}: {e}") from None
    return AlignedSentencePair(source, target, links, content_words(source, opts.content_deprels),
                               content_words(target, opts.content_deprels), ordinal)


def process_chunk(chunk, opts: ExtractOptions, keep_rows: bool = False,
                  keep_occurrences: bool = False) -> tuple[CorpusResult, dict[str, str]]:
    """Extract and count one chunk of raw sentence records."""
    dists = {t: ConditionalPatternDistribution(t) for t in opts.pattern_types}
    result = CorpusResult(dists, AlignmentTally(), [], {t: [] for t in opts.pattern_types} if keep_occurrences else None)
    rows = {t: [] for t in opts.pattern_types}
    for ordinal, s, t, a in chunk:
        pair = build_pair(ordinal, s, t, a, opts)
        cats = categorize_alignments(pair)
        result.tally.add(pair, cats)
        result.sentence_ids.append(pair.sentence_id)
        for ptype in opts.pattern_types:
            if ptype == WORD:
                occs = extract_word_patterns(pair, cats, opts.content_deprels, opts.all_children)
            else:
                occs = extract_arc_patterns(pair, cats)
            add = dists[ptype].add
            for occ in occs:
                add(occ.source, occ.outcome_key)
            if keep_rows:
                rows[ptype].extend(format_occurrence(o) for o in occs)
            if keep_occurrences:
                result.occurrences[ptype].extend(occs)
    return result, {k: "".join(v) for k, v in rows.items()}


def run_extraction(src_path, tgt_path, align_path, opts: ExtractOptions = ExtractOptions(),
                   workers: int = 1, chunk_size: int = 5000,
                   occurrence_streams: dict[str, IO[str]] | None = None,
                   keep_occurrences: bool = False, keep_ids: bool = True) -> CorpusResult:
    """Run extraction over a whole corpus.

    ``occurrence_streams`` maps pattern types to open text streams that
    receive occurrence rows in ordinal order (no header is written here).
    """
    total = CorpusResult({t: ConditionalPatternDistribution(t) for t in opts.pattern_types},
                         AlignmentTally(), [] if keep_ids else None, None)
    keep_rows = bool(occurrence_streams)
    chunks = _chunked(iter_raw(src_path, tgt_path, align_path), chunk_size)

    def consume(res, rows):
        if not keep_ids:
            res.sentence_ids = None
        total.merge(res)
        if occurrence_streams:
            for t, stream in occurrence_streams.items():
                stream.write(rows.get(t, ""))

    if workers <= 1:
        for chunk in chunks:
            consume(*process_chunk(chunk, opts, keep_rows, keep_occurrences))
        return total
    with ProcessPoolExecutor(workers) as pool:
        pending: deque = deque()
        for chunk in chunks:
            pending.append(pool.submit(process_chunk, chunk, opts, keep_rows, keep_occurrences))
            # bounded window keeps memory independent of corpus size
            if len(pending) >= 2 * workers:
                consume(*pending.popleft().result())
        while pending:
            consume(*pending.popleft().result())
    return total


def _chunked(it, n):
    while True:
        chunk = list(itertools.islice(it, n))
        if not chunk:
            return
        yield chunk


def validate_corpus(src_path, tgt_path=None, align_path=None, strip_subtypes: bool = True,
                    check_upos: bool = False) -> list[str]:
    """Collect tree violations and alignment range problems across a corpus.

    Count mismatches between files raise DataError.
    """
    problems = []
    if tgt_path is None:
        for k, block in enumerate(iter_blocks(_open_lines(src_path))):
            problems.extend(_tree_problems("source", k, block, strip_subtypes, check_upos))
        return problems
    if align_path is None:
        raise ValueError("alignment path required with a target corpus")
    for k, s, t, a in iter_raw(src_path, tgt_path, align_path):
        sp = _tree_problems("source", k, s, strip_subtypes, check_upos)
        tp = _tree_problems("target", k, t, strip_subtypes, check_upos)
        problems.extend(sp + tp)
        n_src = sum(1 for line in s if line[0] != "#" and line.split("\t", 1)[0].isdigit())
        n_tgt = sum(1 for line in t if line[0] != "#" and line.split("\t", 1)[0].isdigit())
        try:
            parse_pharaoh(a, n_src, n_tgt)
        except AlignmentError as e:
            problems.append(f"alignment line {k + 1}: {e}")
    return problems


def _tree_problems(side, k, block, strip_subtypes, check_upos) -> list[str]:
    try:
        tree = parse_block(block, k, strip_subtypes, check=False)
    except ConlluError as e:
        return [f"{side} sentence {k + 1}: {e}"]
    return [f"{side} sentence {k + 1} ({tree.sentence_id}): {p}" for p in validate_tree(tree, check_upos)]
