import os

import pytest

from morphdiv.treebank_io import DepTree, Token

HERE = os.path.dirname(__file__)
GOLDEN = os.path.join(HERE, "data", "golden")


def golden_path(name):
    return os.path.join(GOLDEN, name)


@pytest.fixture
def golden():
    return golden_path("src.conllu"), golden_path("tgt.conllu"), golden_path("align.txt")


def make_tree(rows, sid="s"):
    """rows: (form, upos, head, deprel) per token, 1-based heads."""
    toks = [Token(i, f, u, h, d) for i, (f, u, h, d) in enumerate(rows, 1)]
    return DepTree(toks, sid)


def conllu_text(rows, sid=None):
    lines = [f"# sent_id = {sid}"] if sid else []
    for i, (f, u, h, d) in enumerate(rows, 1):
        lines.append(f"{i}\t{f}\t_\t{u}\t_\t_\t{h}\t{d}\t_\t_")
    return "\n".join(lines) + "\n\n"


def golden_pairs():
    from morphdiv.pipeline import ExtractOptions, build_pair, iter_raw
    opts = ExtractOptions()
    return [build_pair(k, s, t, a, opts) for k, s, t, a in
            iter_raw(golden_path("src.conllu"), golden_path("tgt.conllu"), golden_path("align.txt"))]


def quality_inputs(directory, spec):
    """Synthetic corpus plus MT/reference segments and per-sentence scores.

    References are the target forms; the MT drops the last content token of
    every third sentence. Scores are seeded uniforms keyed by sentence id.
    """
    import random

    from morphdiv.synthcorpus import generate_files
    from morphdiv.treebank_io import parse_conllu

    src, tgt, align = generate_files(spec, directory)
    refs, mts, scores = [], [], []
    rng = random.Random(spec.seed)
    with open(tgt, encoding="utf-8") as f:
        trees = list(parse_conllu(f))
    for k, tree in enumerate(trees):
        forms = [t.form for t in tree.tokens]
        refs.append(" ".join(forms))
        mts.append(" ".join(forms[:-3] + forms[-2:] if k % 3 == 0 and len(forms) > 3 else forms))
        scores.append(f"{tree.sentence_id}\t{rng.random():.6f}")
    paths = {"src": src, "tgt": tgt, "align": align}
    for name, lines in (("mt", mts), ("ref", refs), ("scores", scores)):
        paths[name] = os.path.join(directory, f"{name}.txt")
        with open(paths[name], "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    return paths
