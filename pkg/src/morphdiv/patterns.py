"""Word-based and arc-based translation patterns.

Patterns are written in tilde notation: ``root~VERB~nsubj+xcomp`` for a word
(parent relation, POS, sorted content children) and ``VERB~nsubj~NOUN`` for an
arc (head POS, relation, tail POS). A target path longer than one arc joins its
labels with ``|``, read from the word aligned to the source head towards the
word aligned to the source tail.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Iterator, NamedTuple, Sequence

from .alignment import (AlignedSentencePair, AlignmentCategory, DEFAULT_CONTENT_DEPRELS,
                        Categorization, categorize_alignments)
from .treebank_io import DepTree, strip_deprel_subtype

WORD = "word"
ARC = "arc"
LEAF = "leaf"
NULL_KEY = "<null>"
OTHER_KEY = "<other>"

OCCURRENCE_COLUMNS = ("sentence_id", "pattern_type", "source_pattern", "outcome", "target_pattern")


class Outcome(str, Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"
    NULL = "null"
    OTHER = "other"


class WordPattern(NamedTuple):
    parent_deprel: str
    upos: str
    child_deprels: tuple[str, ...]

    def __str__(self):
        return f"{self.parent_deprel}~{self.upos}~{'+'.join(self.child_deprels) or LEAF}"


class ArcPattern(NamedTuple):
    head_upos: str
    deprel: str
    tail_upos: str

    def __str__(self):
        return f"{self.head_upos}~{self.deprel}~{self.tail_upos}"


class TargetPathPattern(NamedTuple):
    head_upos: str
    path: tuple[str, ...]
    tail_upos: str

    def __str__(self):
        return f"{self.head_upos}~{'|'.join(self.path)}~{self.tail_upos}"

    def reversed(self) -> "TargetPathPattern":
        return TargetPathPattern(self.tail_upos, self.path[::-1], self.head_upos)


@dataclass(slots=True)
class PatternOccurrence:
    sentence_id: str
    pattern_type: str
    source: str
    outcome: Outcome
    target: str | None = None
    # source token index (word) or (head, tail) indices (arc)
    position: tuple[int, ...] = ()

    @property
    def outcome_key(self) -> str:
        if self.outcome is Outcome.NULL:
            return NULL_KEY
        if self.outcome is Outcome.OTHER:
            return OTHER_KEY
        return self.target


def parse_pattern(text: str, pattern_type: str):
    """Inverse of ``str()`` on the pattern types."""
    a, b, c = text.split("~")
    if pattern_type == WORD:
        return WordPattern(a, b, () if c == LEAF else tuple(c.split("+")))
    if "|" in b:
        return TargetPathPattern(a, tuple(b.split("|")), c)
    return ArcPattern(a, b, c)


def is_convergent(source, target) -> bool:
    """Same structure on both sides.

    Word patterns must be equal triples. An arc pattern converges only with a
    single-arc target path carrying the same relation and the same POS pair.
    """
    if isinstance(source, WordPattern):
        if not isinstance(target, WordPattern):
            raise TypeError("word pattern compared with a non-word pattern")
        return source == target
    if isinstance(source, ArcPattern):
        if isinstance(target, ArcPattern):
            return source == target
        if isinstance(target, TargetPathPattern):
            return (len(target.path) == 1 and target.path[0] == source.deprel
                    and target.head_upos == source.head_upos and target.tail_upos == source.tail_upos)
    raise TypeError(f"cannot compare {type(source).__name__} with {type(target).__name__}")


def word_pattern(tree: DepTree, index: int, content_deprels=DEFAULT_CONTENT_DEPRELS,
                 all_children: bool = False) -> WordPattern:
    toks = tree.tokens
    tok = toks[index - 1]
    kids = [toks[c - 1].deprel for c in tree.children[index]]
    if not all_children:
        kids = [d for d in kids if strip_deprel_subtype(d) in content_deprels]
    kids.sort()
    return WordPattern(tok.deprel, tok.upos, tuple(kids))


def tree_path(tree: DepTree, a: int, b: int) -> tuple[str, ...]:
    """Relation labels on the undirected tree path from token a to token b.

    Each edge carries the relation of its dependent; direction is dropped.
    """
    toks = tree.tokens
    up_a = [a]
    while toks[up_a[-1] - 1].head:
        up_a.append(toks[up_a[-1] - 1].head)
    seen = {node: k for k, node in enumerate(up_a)}
    up_b = [b]
    while up_b[-1] not in seen:
        up_b.append(toks[up_b[-1] - 1].head)
    lca = up_b[-1]
    left = [toks[n - 1].deprel for n in up_a[:seen[lca]]]
    right = [toks[n - 1].deprel for n in up_b[:-1]]
    right.reverse()
    return tuple(left + right)


def extract_word_patterns(pair: AlignedSentencePair, cats: Categorization | None = None,
                          content_deprels=DEFAULT_CONTENT_DEPRELS,
                          all_children: bool = False) -> list[PatternOccurrence]:
    """One occurrence per source content word, in token order."""
    if cats is None:
        cats = categorize_alignments(pair)
    sid = pair.source.sentence_id
    out = []
    for s in sorted(pair.src_content):
        src = str(word_pattern(pair.source, s, content_deprels, all_children))
        cat = cats.src[s]
        if cat is AlignmentCategory.O2O:
            tgt = str(word_pattern(pair.target, cats.o2o[s], content_deprels, all_children))
            outcome = Outcome.CONVERGENT if tgt == src else Outcome.DIVERGENT
            out.append(PatternOccurrence(sid, WORD, src, outcome, tgt, (s,)))
        elif cat is AlignmentCategory.SRC2NULL:
            out.append(PatternOccurrence(sid, WORD, src, Outcome.NULL, None, (s,)))
        else:
            out.append(PatternOccurrence(sid, WORD, src, Outcome.OTHER, None, (s,)))
    return out


def extract_arc_patterns(pair: AlignedSentencePair,
                         cats: Categorization | None = None) -> list[PatternOccurrence]:
    """One occurrence per source arc joining two content words, ordered by dependent index."""
    if cats is None:
        cats = categorize_alignments(pair)
    sid = pair.source.sentence_id
    stoks = pair.source.tokens
    ttoks = pair.target.tokens
    content = pair.src_content
    o2o = cats.o2o
    null = AlignmentCategory.SRC2NULL
    out = []
    for d in sorted(content):
        h = stoks[d - 1].head
        if h == 0 or h not in content:
            continue
        src_arc = ArcPattern(stoks[h - 1].upos, stoks[d - 1].deprel, stoks[d - 1].upos)
        src = str(src_arc)
        if h in o2o and d in o2o:
            th, td = o2o[h], o2o[d]
            path = tree_path(pair.target, th, td)
            tgt_path = TargetPathPattern(ttoks[th - 1].upos, path, ttoks[td - 1].upos)
            tgt = str(tgt_path)
            outcome = Outcome.CONVERGENT if is_convergent(src_arc, tgt_path) else Outcome.DIVERGENT
            out.append(PatternOccurrence(sid, ARC, src, outcome, tgt, (h, d)))
        elif cats.src[h] is null or cats.src[d] is null:
            out.append(PatternOccurrence(sid, ARC, src, Outcome.NULL, None, (h, d)))
        else:
            out.append(PatternOccurrence(sid, ARC, src, Outcome.OTHER, None, (h, d)))
    return out


def bucket_long_path(key: str, max_len: int | None) -> str:
    """Collapse target paths longer than ``max_len`` arcs into ``HEAD~<long>~TAIL``."""
    if max_len is None or key.count("|") < max_len:
        return key
    head, _, rest = key.partition("~")
    tail = rest.rsplit("~", 1)[1]
    return f"{head}~<long>~{tail}"


def per_pattern_outcome_breakdown(occurrences: Iterable[PatternOccurrence],
                                  pattern: str) -> dict[str, float]:
    """Share (in percent) of o2o:conv, o2o:div, null and others for one source pattern."""
    counts = dict.fromkeys(Outcome, 0)
    for occ in occurrences:
        if occ.source == pattern:
            counts[occ.outcome] += 1
    total = sum(counts.values())
    if total == 0:
        raise KeyError(f"pattern {pattern!r} never observed")
    return {
        "o2o_conv": 100.0 * counts[Outcome.CONVERGENT] / total,
        "o2o_div": 100.0 * counts[Outcome.DIVERGENT] / total,
        "null": 100.0 * counts[Outcome.NULL] / total,
        "others": 100.0 * counts[Outcome.OTHER] / total,
    }


def format_occurrence(occ: PatternOccurrence) -> str:
    return f"{occ.sentence_id}\t{occ.pattern_type}\t{occ.source}\t{occ.outcome.value}\t{occ.target or ''}\n"


def write_occurrences(occurrences: Iterable[PatternOccurrence], stream: IO[str], header: bool = True):
    if header:
        stream.write("\t".join(OCCURRENCE_COLUMNS) + "\n")
    for occ in occurrences:
        stream.write(format_occurrence(occ))


def read_occurrences(stream: IO[str]) -> Iterator[PatternOccurrence]:
    """Read an occurrence dump; '#' lines and the column header are skipped."""
    for line in stream:
        if line.startswith("#") or not line.strip():
            continue
        cols = line.rstrip("\n").split("\t")
        if tuple(cols) == OCCURRENCE_COLUMNS:
            continue
        if len(cols) != 5:
            raise ValueError(f"occurrence row needs 5 columns: {line!r}")
        sid, ptype, src, outcome, tgt = cols
        yield PatternOccurrence(sid, ptype, src, Outcome(outcome), tgt or None)


def occurrences_by_sentence(occurrences: Sequence[PatternOccurrence]) -> dict[str, list[PatternOccurrence]]:
    index: dict[str, list[PatternOccurrence]] = {}
    for occ in occurrences:
        index.setdefault(occ.sentence_id, []).append(occ)
    return index
