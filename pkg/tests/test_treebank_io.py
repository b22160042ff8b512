import io

import conllu
import pytest
from hypothesis import given, settings, strategies as st

from conftest import conllu_text, golden_path, make_tree
from morphdiv.treebank_io import (ConlluError, format_tree, parse_conllu, strip_deprel_subtype,
                                  validate_tree, write_conllu)


def test_golden_matches_conllu_package():
    for name in ("src.conllu", "tgt.conllu"):
        with open(golden_path(name), encoding="utf-8") as f:
            text = f.read()
        ours = list(parse_conllu(text, strip_subtypes=False))
        ref = conllu.parse(text)
        assert len(ours) == len(ref) == 20
        for k, (tree, sent) in enumerate(zip(ours, ref)):
            words = [t for t in sent if isinstance(t["id"], int)]
            assert [(t.index, t.form, t.upos, t.head, t.deprel) for t in tree.tokens] == \
                   [(w["id"], w["form"], w["upos"], w["head"], w["deprel"]) for w in words]
            assert tree.sentence_id == sent.metadata.get("sent_id", str(k))


def test_golden_token_counts():
    src = list(parse_conllu(open(golden_path("src.conllu"), encoding="utf-8")))
    tgt = list(parse_conllu(open(golden_path("tgt.conllu"), encoding="utf-8")))
    assert sum(map(len, src)) == 108
    assert sum(map(len, tgt)) == 139
    assert src[-1].sentence_id == "19"
    assert [t.sentence_id for t in src[:3]] == ["g01", "g02", "g03"]


def test_subtypes_stripped_by_default():
    text = conllu_text([("a", "NOUN", 2, "nsubj:pass"), ("b", "VERB", 0, "root")])
    assert next(parse_conllu(text)).tokens[0].deprel == "nsubj"
    assert next(parse_conllu(text, strip_subtypes=False)).tokens[0].deprel == "nsubj:pass"
    assert strip_deprel_subtype("obl:tmod") == "obl"
    assert strip_deprel_subtype("obj") == "obj"


def test_multiword_and_empty_nodes_skipped():
    text = ("1-2\tau\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tà\t_\tADP\t_\t_\t3\tcase\t_\t_\n"
            "2\tle\t_\tDET\t_\t_\t3\tdet\t_\t_\n"
            "3\tmarché\t_\tNOUN\t_\t_\t0\troot\t_\t_\n"
            "3.1\tx\t_\tVERB\t_\t_\t_\t_\t3:conj\t_\n\n")
    tree = next(parse_conllu(text))
    assert len(tree) == 3
    assert tree.children[3] == [1, 2]


def test_cycle_is_error_with_line_number():
    text = conllu_text([("x", "NOUN", 2, "nsubj"), ("y", "VERB", 1, "obj"), ("z", "VERB", 0, "root")], "a")
    with pytest.raises(ConlluError) as e:
        list(parse_conllu(text))
    assert "cycle" in str(e.value)
    assert e.value.lineno == 1


@pytest.mark.parametrize("rows, message", [
    ([("x", "NOUN", 1, "nsubj"), ("y", "VERB", 0, "root")], "self-loop"),
    ([("x", "NOUN", 5, "nsubj"), ("y", "VERB", 0, "root")], "out of range"),
    ([("x", "NOUN", 0, "root"), ("y", "VERB", 0, "root")], "multiple roots"),
    ([("x", "NOUN", 2, "nsubj"), ("y", "VERB", 1, "root")], "no root"),
    ([("x", "NOUN", 3, "nsubj"), ("y", "VERB", 0, "root"), ("z", "VERB", 1, "obj")], "cycle"),
])
def test_validate_tree_reports_violations(rows, message):
    problems = validate_tree(make_tree(rows))
    assert len(problems) == 1 and message in problems[0]


def test_validate_tree_clean_and_upos():
    tree = make_tree([("x", "NOUN", 2, "nsubj"), ("y", "VERBISH", 0, "root")])
    assert validate_tree(tree) == []
    assert "unknown UPOS" in validate_tree(tree, check_upos=True)[0]


def test_lenient_mode_reattaches_extra_roots(caplog):
    text = conllu_text([("x", "NOUN", 0, "root"), ("y", "VERB", 0, "root")])
    with pytest.raises(ConlluError):
        list(parse_conllu(text))
    tree = next(parse_conllu(text, strict=False))
    assert [t.head for t in tree.tokens] == [0, 1]
    assert validate_tree(tree) == []
    assert "reattaching" in caplog.text


@pytest.mark.parametrize("line", ["1\tx\t_\tNOUN\t_\t_\t0\troot\t_", "1\tx\t_\tNOUN\t_\t_\tzero\troot\t_\t_",
                                  "a\tx\t_\tNOUN\t_\t_\t0\troot\t_\t_"])
def test_malformed_rows(line):
    with pytest.raises(ConlluError):
        list(parse_conllu(line + "\n\n"))


def test_input_kinds_agree(tmp_path):
    text = open(golden_path("src.conllu"), encoding="utf-8").read()
    p = tmp_path / "x.conllu"
    p.write_text(text, encoding="utf-8")
    a = [format_tree(t) for t in parse_conllu(text)]
    b = [format_tree(t) for t in parse_conllu(text.encode("utf-8"))]
    with open(p, "rb") as f:
        c = [format_tree(t) for t in parse_conllu(f)]
    d = [format_tree(t) for t in parse_conllu(text.splitlines(True))]
    assert a == b == c == d


def test_walk_preorder():
    tree = make_tree([("a", "DET", 2, "det"), ("b", "NOUN", 3, "nsubj"), ("c", "VERB", 0, "root"),
                      ("d", "NOUN", 3, "obj")])
    assert tree.walk() == [3, 2, 1, 4]
    assert tree[3].form == "c"


@st.composite
def random_trees(draw):
    n = draw(st.integers(1, 12))
    root = draw(st.integers(1, n))
    order = draw(st.permutations(list(range(1, n + 1))))
    # attach each node to a node placed earlier in a random order rooted at `root`
    order = [root] + [i for i in order if i != root]
    heads = {root: 0}
    for k, i in enumerate(order[1:], 1):
        heads[i] = order[draw(st.integers(0, k - 1))]
    labels = st.sampled_from(["nsubj", "obj", "amod", "det", "case", "obl:tmod", "advmod"])
    upos = st.sampled_from(["NOUN", "VERB", "ADJ", "DET", "ADP"])
    rows = [(f"w{i}", draw(upos), heads[i], "root" if heads[i] == 0 else draw(labels)) for i in range(1, n + 1)]
    return rows


@settings(max_examples=200, deadline=None)
@given(st.lists(random_trees(), min_size=1, max_size=4))
def test_roundtrip(sentences):
    text = "".join(conllu_text(rows, f"s{k}") for k, rows in enumerate(sentences))
    trees = list(parse_conllu(text, strip_subtypes=False))
    buf = io.StringIO()
    write_conllu(trees, buf)
    assert buf.getvalue() == text
    for tree in trees:
        assert validate_tree(tree) == []
        assert sorted(tree.walk()) == list(range(1, len(tree) + 1))
