"""Word alignments, content-word filtering and alignment categories."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable

from .treebank_io import DepTree, strip_deprel_subtype


class AlignmentError(ValueError):
    pass


class AlignmentCategory(str, Enum):
    O2O = "o2o"
    SRC2NULL = "src2null"
    NULL2TGT = "null2tgt"
    OTHER = "other"


def parse_pharaoh(line: str, src_len: int, tgt_len: int) -> set[tuple[int, int]]:
    """Parse a line of 0-based ``i-j`` pairs into a set of 1-based (src, tgt) links."""
    links = set()
    for item in line.split():
        i, sep, j = item.partition("-")
        if not sep or not i.isdigit() or not j.isdigit():
            raise AlignmentError(f"malformed alignment pair {item!r}")
        s, t = int(i), int(j)
        if s >= src_len or t >= tgt_len:
            raise AlignmentError(
                f"alignment pair {item!r} out of range for lengths ({src_len}, {tgt_len})")
        links.add((s + 1, t + 1))
    return links


def format_pharaoh(links: Iterable[tuple[int, int]]) -> str:
    return " ".join(f"{s - 1}-{t - 1}" for s, t in sorted(links))


def load_deprel_set(path=None) -> frozenset[str]:
    """Read a newline-separated label file ('#' comments allowed); default: the bundled set."""
    if path is None:
        text = resources.files("morphdiv").joinpath("data/content_deprels.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    labels = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            labels.add(line)
    return frozenset(labels)


DEFAULT_CONTENT_DEPRELS = load_deprel_set()


def content_words(tree: DepTree, content_deprels) -> set[int]:
    return {t.index for t in tree.tokens if strip_deprel_subtype(t.deprel) in content_deprels}


@dataclass(slots=True)
class AlignedSentencePair:
    source: DepTree
    target: DepTree
    links: set[tuple[int, int]]
    src_content: set[int]
    tgt_content: set[int]
    ordinal: int = 0

    @classmethod
    def build(cls, source: DepTree, target: DepTree, links, content_deprels=DEFAULT_CONTENT_DEPRELS,
              ordinal: int = 0) -> "AlignedSentencePair":
        return cls(source, target, set(links), content_words(source, content_deprels),
                   content_words(target, content_deprels), ordinal)

    @property
    def sentence_id(self) -> str:
        return self.source.sentence_id

    def content_links(self) -> set[tuple[int, int]]:
        """Links whose endpoints are both content words."""
        sc, tc = self.src_content, self.tgt_content
        return {(s, t) for s, t in self.links if s in sc and t in tc}


@dataclass(slots=True)
class Categorization:
    src: dict[int, AlignmentCategory]
    tgt: dict[int, AlignmentCategory]
    # src index -> tgt index for one-to-one content links
    o2o: dict[int, int]


def categorize_alignments(pair: AlignedSentencePair) -> Categorization:
    """Assign one category to every source and target content word.

    Links touching a non-content word are ignored. A word is O2O when it has
    exactly one link and the word on the other end also has exactly one.
    """
    out_links: dict[int, list[int]] = {}
    in_links: dict[int, list[int]] = {}
    for s, t in pair.content_links():
        out_links.setdefault(s, []).append(t)
        in_links.setdefault(t, []).append(s)
    src = {}
    o2o = {}
    for s in pair.src_content:
        ts = out_links.get(s)
        if not ts:
            src[s] = AlignmentCategory.SRC2NULL
        elif len(ts) == 1 and len(in_links[ts[0]]) == 1:
            src[s] = AlignmentCategory.O2O
            o2o[s] = ts[0]
        else:
            src[s] = AlignmentCategory.OTHER
    tgt = {}
    for t in pair.tgt_content:
        ss = in_links.get(t)
        if not ss:
            tgt[t] = AlignmentCategory.NULL2TGT
        elif len(ss) == 1 and len(out_links[ss[0]]) == 1:
            tgt[t] = AlignmentCategory.O2O
        else:
            tgt[t] = AlignmentCategory.OTHER
    return Categorization(src, tgt, o2o)


@dataclass
class AlignmentTally:
    """Mergeable corpus counts of alignment categories and content words."""

    o2o: int = 0
    src2null: int = 0
    other: int = 0
    null2tgt: int = 0
    src_tokens: int = 0
    tgt_tokens: int = 0
    src_content: int = 0
    tgt_content: int = 0
    links: int = 0
    content_links: int = 0
    sentences: int = 0

    def add(self, pair: AlignedSentencePair, cats: Categorization | None = None):
        if cats is None:
            cats = categorize_alignments(pair)
        for c in cats.src.values():
            if c is AlignmentCategory.O2O:
                self.o2o += 1
            elif c is AlignmentCategory.SRC2NULL:
                self.src2null += 1
            else:
                self.other += 1
        for c in cats.tgt.values():
            if c is AlignmentCategory.NULL2TGT:
                self.null2tgt += 1
        self.src_tokens += len(pair.source)
        self.tgt_tokens += len(pair.target)
        self.src_content += len(pair.src_content)
        self.tgt_content += len(pair.tgt_content)
        self.links += len(pair.links)
        self.content_links += len(pair.content_links())
        self.sentences += 1
        return self

    def merge(self, other: "AlignmentTally") -> "AlignmentTally":
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))
        return self

    def category_percentages(self) -> dict[str, float]:
        total = self.o2o + self.src2null + self.other
        if total == 0:
            raise ValueError("no source content words")
        return {"o2o": 100.0 * self.o2o / total,
                "src2null": 100.0 * self.src2null / total,
                "other": 100.0 * self.other / total,
                "null2tgt": 100.0 * self.null2tgt / total}

    def content_stats(self) -> dict:
        def pct(a, b):
            return 100.0 * a / b if b else None
        return {
            "source_content_words": self.src_content,
            "source_tokens": self.src_tokens,
            "source_content_pct": pct(self.src_content, self.src_tokens),
            "target_content_words": self.tgt_content,
            "target_tokens": self.tgt_tokens,
            "target_content_pct": pct(self.tgt_content, self.tgt_tokens),
            "surviving_alignments": self.content_links,
            "alignments": self.links,
            "surviving_alignments_pct": pct(self.content_links, self.links),
        }


def category_distribution(corpus: Iterable[AlignedSentencePair]) -> dict[str, float]:
    """Percentages of o2o/src2null/other/null2tgt relative to source content words."""
    tally = AlignmentTally()
    for pair in corpus:
        tally.add(pair)
    return tally.category_percentages()


def content_word_stats(corpus: Iterable[AlignedSentencePair]) -> dict:
    tally = AlignmentTally()
    for pair in corpus:
        tally.add(pair)
    return tally.content_stats()
