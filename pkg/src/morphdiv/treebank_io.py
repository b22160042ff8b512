"""Reading, validating and writing CoNLL-U dependency trees.

Only the ID, FORM, UPOS, HEAD and DEPREL columns are interpreted. The other
columns are kept verbatim so that a tree can be written back unchanged.
Multiword-token ranges ("3-4") and empty nodes ("5.1") are skipped.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

log = logging.getLogger(__name__)

UPOS_TAGS = frozenset({
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
})


class ConlluError(ValueError):
    """Malformed CoNLL-U input."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(slots=True)
class Token:
    index: int
    form: str
    upos: str
    head: int
    deprel: str
    # LEMMA, XPOS, FEATS, DEPS, MISC, passed through untouched
    extra: tuple = ("_", "_", "_", "_", "_")


@dataclass(slots=True)
class DepTree:
    tokens: list[Token]
    sentence_id: str
    comments: list[str] = field(default_factory=list)
    root_index: int = 0
    # children[i] lists the dependents of token i; children[0] holds the root(s)
    children: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.children:
            self.rebuild()

    def rebuild(self):
        """Recompute children adjacency and root_index from the head fields."""
        n = len(self.tokens)
        children: list[list[int]] = [[] for _ in range(n + 1)]
        for tok in self.tokens:
            if 0 <= tok.head <= n:
                children[tok.head].append(tok.index)
        self.children = children
        self.root_index = children[0][0] if children[0] else 0

    def __len__(self):
        return len(self.tokens)

    def __getitem__(self, index: int) -> Token:
        """1-based token access."""
        if index < 1:
            raise IndexError(index)
        return self.tokens[index - 1]

    def walk(self) -> list[int]:
        """Token indices in depth-first pre-order from the root."""
        order = []
        stack = [self.root_index] if self.root_index else []
        while stack:
            i = stack.pop()
            order.append(i)
            stack.extend(reversed(self.children[i]))
        return order


def strip_deprel_subtype(deprel: str) -> str:
    """Drop a language-specific subtype: ``"aux:pass"`` -> ``"aux"``."""
    i = deprel.find(":")
    return deprel if i < 0 else deprel[:i]


def validate_tree(tree: DepTree, check_upos: bool = False) -> list[str]:
    """Return a list of invariant violations; empty when the tree is well formed.

    Each message is prefixed with the offending token index.
    """
    problems = []
    n = len(tree.tokens)
    roots = []
    for pos, tok in enumerate(tree.tokens, 1):
        if tok.index != pos:
            problems.append(f"token {pos}: index {tok.index} out of sequence")
        if tok.head == tok.index:
            problems.append(f"token {tok.index}: self-loop")
        elif tok.head < 0 or tok.head > n:
            problems.append(f"token {tok.index}: head out of range ({tok.head})")
        if tok.head == 0:
            roots.append(tok.index)
        if check_upos and tok.upos not in UPOS_TAGS:
            problems.append(f"token {tok.index}: unknown UPOS {tok.upos!r}")
    if n and not roots:
        problems.append("token 0: no root")
    elif len(roots) > 1:
        problems.append(f"token {roots[1]}: multiple roots")
    if problems:
        return problems
    cyc = _find_cycle([t.head for t in tree.tokens])
    if cyc:
        problems.append(f"token {cyc}: cycle")
    expect = [[] for _ in range(n + 1)]
    for tok in tree.tokens:
        expect[tok.head].append(tok.index)
    if [sorted(c) for c in tree.children] != expect:
        problems.append("token 0: children adjacency inconsistent with heads")
    return problems


def _find_cycle(heads: list[int]) -> int:
    """Return a token index that sits on a head cycle, or 0. ``heads`` is 0-based list of 1-based heads."""
    n = len(heads)
    state = [0] * (n + 1)  # 0 unseen, 1 on current path, 2 known to reach root
    state[0] = 2
    for start in range(1, n + 1):
        path = []
        i = start
        while state[i] == 0:
            state[i] = 1
            path.append(i)
            h = heads[i - 1]
            if h < 0 or h > n:
                break
            i = h
        else:
            if state[i] == 1:
                return i
        for j in path:
            state[j] = 2
    return 0


def iter_blocks(lines: Iterable[str]) -> Iterator[list[str]]:
    """Group raw lines into sentence blocks (comments included, blank lines dropped)."""
    block: list[str] = []
    for line in lines:
        line = line.rstrip("\r\n")
        if not line.strip():
            if block:
                yield block
                block = []
        else:
            block.append(line)
    if block:
        yield block


def parse_block(block: list[str], ordinal: int, strip_subtypes: bool = True,
                strict: bool = True, check: bool = True, lineno: int | None = None) -> DepTree:
    """Build one DepTree from the lines of a sentence block.

    With ``check=False`` the tree is built as-is so that :func:`validate_tree`
    can report its problems; otherwise structural errors raise ConlluError.
    """
    comments = []
    tokens = []
    sent_id = None
    for k, line in enumerate(block):
        ln = None if lineno is None else lineno + k
        if line[0] == "#":
            comments.append(line)
            if sent_id is None:
                body = line[1:].strip()
                if body.startswith("sent_id"):
                    key, _, value = body.partition("=")
                    if key.strip() == "sent_id":
                        sent_id = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 columns, got {len(cols)}", ln)
        tid = cols[0]
        if not tid.isdigit():
            if "-" in tid or "." in tid:
                continue
            raise ConlluError(f"bad token id {tid!r}", ln)
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluError(f"non-integer head {cols[6]!r}", ln) from None
        deprel = cols[7]
        if strip_subtypes:
            i = deprel.find(":")
            if i >= 0:
                deprel = deprel[:i]
        tokens.append(Token(int(tid), cols[1], cols[3], head, deprel,
                            (cols[2], cols[4], cols[5], cols[8], cols[9])))
    tree = DepTree(tokens, str(ordinal) if sent_id is None else sent_id, comments)
    if check:
        _check_structure(tree, strict, lineno)
    return tree


def _check_structure(tree: DepTree, strict: bool, lineno: int | None):
    n = len(tree.tokens)
    if not n:
        return
    roots = []
    for pos, tok in enumerate(tree.tokens, 1):
        if tok.index != pos:
            raise ConlluError(f"sentence {tree.sentence_id}: token id {tok.index} out of sequence", lineno)
        if tok.head == tok.index:
            raise ConlluError(f"sentence {tree.sentence_id}: token {tok.index} is its own head (cycle)", lineno)
        if tok.head < 0 or tok.head > n:
            raise ConlluError(f"sentence {tree.sentence_id}: token {tok.index} head {tok.head} out of range", lineno)
        if tok.head == 0:
            roots.append(tok.index)
    if not roots:
        raise ConlluError(f"sentence {tree.sentence_id}: no root", lineno)
    if len(roots) > 1:
        if strict:
            raise ConlluError(f"sentence {tree.sentence_id}: multiple roots {roots}", lineno)
        log.warning("sentence %s: reattaching extra roots %s to token %d",
                    tree.sentence_id, roots[1:], roots[0])
        for i in roots[1:]:
            tree.tokens[i - 1].head = roots[0]
        tree.rebuild()
    cyc = _find_cycle([t.head for t in tree.tokens])
    if cyc:
        raise ConlluError(f"sentence {tree.sentence_id}: cycle through token {cyc}", lineno)


def parse_conllu(stream: IO[str] | IO[bytes] | str | Iterable[str], strip_subtypes: bool = True,
                 strict: bool = True, check: bool = True) -> Iterator[DepTree]:
    """Yield one DepTree per sentence block, in stream order.

    ``stream`` may be a text or binary file object, an iterable of lines, or a
    whole document as a string.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    elif isinstance(stream, (bytes, bytearray)):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, (io.BufferedIOBase, io.RawIOBase)) or getattr(stream, "mode", "").endswith("b"):
        stream = io.TextIOWrapper(stream, encoding="utf-8")
    ordinal = 0
    block: list[str] = []
    start = 1
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\r\n")
        if line.strip():
            if not block:
                start = lineno
            block.append(line)
        elif block:
            yield parse_block(block, ordinal, strip_subtypes, strict, check, start)
            ordinal += 1
            block = []
    if block:
        yield parse_block(block, ordinal, strip_subtypes, strict, check, start)


def format_tree(tree: DepTree) -> str:
    """Serialize a tree as a CoNLL-U block, terminated by a blank line."""
    out = list(tree.comments)
    for t in tree.tokens:
        lemma, xpos, feats, deps, misc = t.extra
        out.append(f"{t.index}\t{t.form}\t{lemma}\t{t.upos}\t{xpos}\t{feats}\t{t.head}\t{t.deprel}\t{deps}\t{misc}")
    return "\n".join(out) + "\n\n"


def write_conllu(trees: Iterable[DepTree], stream: IO[str]):
    for tree in trees:
        stream.write(format_tree(tree))
