"""Synthetic parallel treebanks and pattern-level decoder simulation.

Every generated source sentence is a VERB root with a few leaf dependents and
a final punctuation mark. Each dependent instantiates a source pattern drawn
from the generator inventory and is realised on the target side according to the
pattern's outcome distribution:

* ``o2o``: one aligned target word with the given relation and POS, optionally
  attached ``via`` an inserted intermediate word (a longer target path);
* ``null``: the word is dropped;
* ``other``: the word is aligned to two target words.

Random draws come from per-block generators seeded from ``(seed, block)``, so
any range of sentences can be produced independently and the output does not
depend on how generation is sharded.
"""

from __future__ import annotations

import bisect
import io
import json
import os
import random
from dataclasses import asdict, dataclass, field
from typing import IO

import numpy as np

from .patterns import LEAF, NULL_KEY, OTHER_KEY
from .stats import ConditionalPatternDistribution

BLOCK = 1000


@dataclass
class OutcomeSpec:
    kind: str = "o2o"
    deprel: str | None = None
    upos: str | None = None
    via: tuple[str, str] | None = None
    prob: float = 1.0

    def key(self) -> str:
        """Target word-pattern key, or a null/other marker."""
        if self.kind == "null":
            return NULL_KEY
        if self.kind == "other":
            return OTHER_KEY
        return f"{self.deprel}~{self.upos}~{LEAF}"


@dataclass
class PatternSpec:
    deprel: str
    upos: str
    weight: float = 1.0
    outcomes: list[OutcomeSpec] = field(default_factory=list)

    def key(self) -> str:
        return f"{self.deprel}~{self.upos}~{LEAF}"


@dataclass
class GeneratorSpec:
    patterns: list[PatternSpec]
    n_sentences: int = 1000
    min_deps: int = 1
    max_deps: int = 3
    seed: int = 0
    # probability that a dependent carries a non-content function-word child
    function_words: float = 0.0

    def __post_init__(self):
        self.patterns = [p if isinstance(p, PatternSpec) else _pattern_from_dict(p) for p in self.patterns]
        self.normalize()

    def normalize(self):
        """Rescale weights and outcome probabilities to sum to one; raise if impossible."""
        if not self.patterns:
            raise ValueError("spec has no patterns")
        wsum = sum(p.weight for p in self.patterns)
        if any(p.weight < 0 for p in self.patterns) or wsum <= 0:
            raise ValueError("pattern weights cannot be normalized")
        # already-normalized specs are left untouched so JSON round trips are exact
        rescale = abs(wsum - 1) > 1e-12
        for p in self.patterns:
            if rescale:
                p.weight /= wsum
            psum = sum(o.prob for o in p.outcomes)
            if not p.outcomes or any(o.prob < 0 for o in p.outcomes) or psum <= 0:
                raise ValueError(f"outcomes of {p.key()} cannot be normalized")
            for o in p.outcomes:
                if abs(psum - 1) > 1e-12:
                    o.prob /= psum
                if o.kind not in ("o2o", "null", "other"):
                    raise ValueError(f"unknown outcome kind {o.kind!r}")
                if o.kind == "o2o" and not (o.deprel and o.upos):
                    raise ValueError("o2o outcome needs deprel and upos")
        if not 1 <= self.min_deps <= self.max_deps:
            raise ValueError("need 1 <= min_deps <= max_deps")

    @classmethod
    def from_json(cls, text: str) -> "GeneratorSpec":
        return cls(**json.loads(text))

    def to_json(self) -> str:
        d = asdict(self)
        for p in d["patterns"]:
            for o in p["outcomes"]:
                if o["via"] is not None:
                    o["via"] = list(o["via"])
        return json.dumps(d, indent=2, sort_keys=True)


def _pattern_from_dict(d: dict) -> PatternSpec:
    outs = []
    for o in d.get("outcomes", []):
        o = dict(o)
        if o.get("via") is not None:
            o["via"] = tuple(o["via"])
        outs.append(OutcomeSpec(**o))
    return PatternSpec(d["deprel"], d["upos"], d.get("weight", 1.0), outs)


def _block_rng(seed: int, block: int) -> random.Random:
    state = np.random.SeedSequence([seed, block]).generate_state(2)
    return random.Random(int(state[0]) << 32 | int(state[1]))


def _row(i, form, upos, head, deprel):
    return f"{i}\t{form}\t{form}\t{upos}\t_\t_\t{head}\t{deprel}\t_\t_"


def _layout(items) -> list[str]:
    """Rows for items (form, upos, head_ref, deprel); head_ref is None for the root."""
    return [_row(i, form, upos, 0 if head is None else head + 1, deprel)
            for i, (form, upos, head, deprel) in enumerate(items, 1)]


def _sentence(spec: GeneratorSpec, ordinal: int, rng: random.Random, pat_cum, out_cums) -> tuple[str, str, str]:
    k = rng.randint(spec.min_deps, spec.max_deps)
    chosen = []
    for _ in range(k):
        pi = bisect.bisect_right(pat_cum, rng.random() * pat_cum[-1])
        pi = min(pi, len(spec.patterns) - 1)
        cum = out_cums[pi]
        oi = min(bisect.bisect_right(cum, rng.random() * cum[-1]), len(cum) - 1)
        chosen.append((spec.patterns[pi], spec.patterns[pi].outcomes[oi], rng.random() < spec.function_words))
    # item lists hold (form, upos, head item index or None, deprel); root goes after the dependents
    src_items, tgt_items, links = [], [], []
    src_root = sum(2 if fw else 1 for _, _, fw in chosen)
    src_pos = []
    for j, (p, _, fw) in enumerate(chosen, 1):
        if fw:
            src_items.append((f"f{j}", "ADP", len(src_items) + 1, "case"))
        src_pos.append(len(src_items))
        src_items.append((f"w{j}", p.upos, src_root, p.deprel))
    src_items.append(("v", "VERB", None, "root"))
    src_items.append((".", "PUNCT", src_root, "punct"))

    for j, (p, o, fw) in enumerate(chosen):
        if o.kind == "null":
            continue
        reps = 2 if o.kind == "other" else 1
        deprel, upos = (p.deprel, p.upos) if o.kind == "other" else (o.deprel, o.upos)
        head = "root"
        if o.via is not None:
            head = len(tgt_items)
            tgt_items.append((f"x{j}", o.via[1], "root", o.via[0]))
        for _ in range(reps):
            if fw:
                tgt_items.append((f"g{j}", "ADP", len(tgt_items) + 1, "case"))
                links.append((src_pos[j] - 1, len(tgt_items) - 1))
            links.append((src_pos[j], len(tgt_items)))
            tgt_items.append((f"t{j}", upos, head, deprel))
    tgt_root = len(tgt_items)
    tgt_items = [(f, u, tgt_root if h == "root" else h, d) for f, u, h, d in tgt_items]
    tgt_items.append(("v", "VERB", None, "root"))
    tgt_items.append((".", "PUNCT", tgt_root, "punct"))
    links.append((src_root, tgt_root))
    links.append((src_root + 1, tgt_root + 1))
    sid = f"# sent_id = s{ordinal}\n"
    align = " ".join(f"{s}-{t}" for s, t in sorted(links))
    return (sid + "\n".join(_layout(src_items)) + "\n\n",
            sid + "\n".join(_layout(tgt_items)) + "\n\n", align + "\n")


def gen_parallel_corpus(spec: GeneratorSpec, src: IO[str], tgt: IO[str], align: IO[str],
                        start: int = 0, stop: int | None = None):
    """Write sentences ``[start, stop)`` of the corpus described by ``spec``."""
    stop = spec.n_sentences if stop is None else min(stop, spec.n_sentences)
    pat_cum = list(np.cumsum([p.weight for p in spec.patterns]))
    out_cums = [list(np.cumsum([o.prob for o in p.outcomes])) for p in spec.patterns]
    block = start // BLOCK
    i = block * BLOCK
    while i < stop:
        rng = _block_rng(spec.seed, block)
        end = min((block + 1) * BLOCK, stop)
        sbuf, tbuf, abuf = [], [], []
        for ordinal in range(block * BLOCK, end):
            s, t, a = _sentence(spec, ordinal, rng, pat_cum, out_cums)
            if ordinal >= start:
                sbuf.append(s)
                tbuf.append(t)
                abuf.append(a)
        src.write("".join(sbuf))
        tgt.write("".join(tbuf))
        align.write("".join(abuf))
        block += 1
        i = block * BLOCK


def generate_text(spec: GeneratorSpec) -> tuple[str, str, str]:
    s, t, a = io.StringIO(), io.StringIO(), io.StringIO()
    gen_parallel_corpus(spec, s, t, a)
    return s.getvalue(), t.getvalue(), a.getvalue()


def generate_files(spec: GeneratorSpec, directory, prefix: str = "synth") -> tuple[str, str, str]:
    os.makedirs(directory, exist_ok=True)
    paths = tuple(os.path.join(directory, f"{prefix}.{ext}") for ext in ("src.conllu", "tgt.conllu", "align"))
    with open(paths[0], "w", encoding="utf-8") as s, open(paths[1], "w", encoding="utf-8") as t, \
            open(paths[2], "w", encoding="utf-8") as a:
        gen_parallel_corpus(spec, s, t, a)
    return paths


def sample_distribution(spec: GeneratorSpec, n: int, seed: int = 0) -> ConditionalPatternDistribution:
    """Draw ``n`` word-pattern occurrences straight from the GeneratorSpec, without building trees."""
    rng = np.random.default_rng(seed)
    dist = ConditionalPatternDistribution("word")
    counts = rng.multinomial(n, [p.weight for p in spec.patterns])
    for p, n_p in zip(spec.patterns, counts):
        if not n_p:
            continue
        for o, c in zip(p.outcomes, rng.multinomial(n_p, [o.prob for o in p.outcomes])):
            if c:
                dist.add(p.key(), o.key(), int(c))
    return dist


@dataclass(frozen=True)
class DecoderBias:
    mode: str = "faithful_sample"  # faithful_sample | argmax | temperature | top_p
    temperature: float = 1.0
    top_p: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("faithful_sample", "argmax", "temperature", "top_p"):
            raise ValueError(f"unknown decoder mode {self.mode!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")


def reshape(probs: np.ndarray, bias: DecoderBias) -> np.ndarray:
    """Outcome probabilities the simulated decoder samples from (keys pre-sorted)."""
    if bias.mode == "argmax":
        out = np.zeros_like(probs)
        out[int(np.argmax(probs))] = 1.0
        return out
    if bias.mode == "temperature":
        logp = np.log(np.where(probs > 0, probs, 1.0)) / bias.temperature
        w = np.where(probs > 0, np.exp(logp - logp[probs > 0].max()), 0.0)
        return w / w.sum()
    if bias.mode == "top_p":
        order = sorted(range(len(probs)), key=lambda i: -probs[i])  # stable on ties
        keep = []
        mass = 0.0
        for i in order:
            keep.append(i)
            mass += probs[i]
            if mass >= bias.top_p - 1e-12:
                break
        out = np.zeros_like(probs)
        out[keep] = probs[keep]
        return out / out.sum()
    return probs


def simulate_decoder(ht_dist: ConditionalPatternDistribution, bias: DecoderBias) -> ConditionalPatternDistribution:
    """Re-translate every occurrence in ``ht_dist`` by sampling the biased conditional.

    The result has the same per-pattern totals as the input; argmax sends
    every occurrence to the modal outcome (lowest key on ties).
    """
    if not ht_dist.total():
        raise ValueError("empty distribution")
    rng = np.random.default_rng(bias.seed)
    out = ConditionalPatternDistribution(ht_dist.pattern_type)
    for p in ht_dist.patterns():
        items = sorted((k, v) for k, v in ht_dist.counts[p].items() if v > 0)
        if not items:
            continue
        keys = [k for k, _ in items]
        counts = np.array([v for _, v in items], dtype=float)
        n = int(counts.sum())
        probs = reshape(counts / counts.sum(), bias)
        if bias.mode == "argmax":
            draws = (probs * n).astype(int)
        else:
            draws = rng.multinomial(n, probs)
        for k, c in zip(keys, draws):
            if c:
                out.add(p, k, int(c))
    return out


_LABELS = ["nsubj", "obj", "iobj", "obl", "nmod", "amod", "advmod", "acl", "advcl", "ccomp",
           "xcomp", "conj", "compound", "appos", "nummod", "flat", "parataxis"]
_TAGS = ["NOUN", "VERB", "ADJ", "ADV", "PROPN", "PRON", "NUM"]
_ALTERNATES = [("obl", "NOUN"), ("advmod", "ADV"), ("nmod", "PRON"), ("conj", "VERB")]


def _inventory(n: int) -> list[tuple[str, str]]:
    pairs = [(d, u) for u in _TAGS for d in _LABELS]
    if n > len(pairs):
        raise ValueError(f"at most {len(pairs)} distinct leaf patterns")
    return pairs[:n]


def _divergent_targets(deprel: str, upos: str, m: int, rng: random.Random) -> list[tuple[str, str]]:
    pool = [(d, u) for u in _TAGS for d in _LABELS if (d, u) != (deprel, upos)]
    return rng.sample(pool, m)


def convergence_sweep_spec(n_patterns: int = 60, lo: float = 0.05, hi: float = 0.95,
                           max_alternatives: int = 5, seed: int = 0, n_sentences: int = 1000,
                           null_prob: float = 0.0) -> GeneratorSpec:
    """Patterns whose convergent probability sweeps ``[lo, hi]`` evenly.

    The divergent remainder is split evenly over 1..max_alternatives targets,
    so low-convergence patterns often have a divergent mode.
    """
    rng = random.Random(seed)
    patterns = []
    for i, (d, u) in enumerate(_inventory(n_patterns)):
        r = lo + (hi - lo) * i / max(n_patterns - 1, 1)
        m = rng.randint(1, max_alternatives)
        outs = [OutcomeSpec("o2o", d, u, None, r)]
        for td, tu in _divergent_targets(d, u, m, rng):
            outs.append(OutcomeSpec("o2o", td, tu, None, (1 - r) / m))
        if null_prob:
            outs.append(OutcomeSpec("null", prob=null_prob))
        patterns.append(PatternSpec(d, u, 1.0, outs))
    return GeneratorSpec(patterns, n_sentences=n_sentences, seed=seed)


def zipf_spec(n_patterns: int = 100, exponent: float = 1.0, max_alternatives: int = 4,
              seed: int = 0, n_sentences: int = 1000, via_prob: float = 0.1,
              null_prob: float = 0.05, other_prob: float = 0.05) -> GeneratorSpec:
    """Zipf-weighted inventory with random outcome distributions, including null/other and long paths."""
    rng = random.Random(seed)
    patterns = []
    for rank, (d, u) in enumerate(_inventory(n_patterns), 1):
        m = rng.randint(1, max_alternatives)
        r = rng.uniform(0.1, 0.9)
        outs = [OutcomeSpec("o2o", d, u, None, r * (1 - via_prob))]
        if via_prob:
            outs.append(OutcomeSpec("o2o", d, u, ("nmod", "NOUN"), r * via_prob))
        for td, tu in _divergent_targets(d, u, m, rng):
            outs.append(OutcomeSpec("o2o", td, tu, None, (1 - r) / m))
        if null_prob:
            outs.append(OutcomeSpec("null", prob=null_prob))
        if other_prob:
            outs.append(OutcomeSpec("other", prob=other_prob))
        patterns.append(PatternSpec(d, u, rank ** -exponent, outs))
    return GeneratorSpec(patterns, n_sentences=n_sentences, seed=seed)


def shared_outcome_spec(n_patterns: int = 119, exponent: float = 1.5, probs=(0.5, 0.3, 0.2),
                        seed: int = 0, n_sentences: int = 1000) -> GeneratorSpec:
    """Zipf-weighted patterns that all share one outcome distribution.

    ``probs[0]`` is the convergent probability; the rest go to distinct
    divergent targets. With identical conditionals, any frequency trend in a
    comparison comes from what is planted on top (see drift_distribution).
    """
    if len(probs) - 1 > len(_ALTERNATES) - 1:
        raise ValueError(f"at most {len(_ALTERNATES) - 1} divergent outcomes")
    patterns = []
    for rank, (d, u) in enumerate(_inventory(n_patterns), 1):
        pool = [(td, tu) for td, tu in _ALTERNATES if (td, tu) != (d, u)]
        outs = [OutcomeSpec("o2o", d, u, None, probs[0])]
        outs += [OutcomeSpec("o2o", td, tu, None, pr) for (td, tu), pr in zip(pool, probs[1:])]
        patterns.append(PatternSpec(d, u, rank ** -exponent, outs))
    return GeneratorSpec(patterns, n_sentences=n_sentences, seed=seed)


def drift_distribution(ht_dist: ConditionalPatternDistribution, strength, seed: int = 0) -> ConditionalPatternDistribution:
    """Resample each pattern from a conditional pushed towards its convergent outcome.

    ``strength(n)`` maps the pattern's frequency to a mixing weight in [0, 1]:
    the resampled conditional is ``(1 - s) * P(.|p) + s * delta(convergent)``.
    """
    rng = np.random.default_rng(seed)
    out = ConditionalPatternDistribution(ht_dist.pattern_type)
    for p in ht_dist.patterns():
        items = sorted(ht_dist.counts[p].items())
        keys = [k for k, _ in items]
        counts = np.array([v for _, v in items], dtype=float)
        n = int(counts.sum())
        probs = counts / n
        s = float(strength(n))
        target = np.array([1.0 if k == p else 0.0 for k in keys])
        if not target.any():
            keys.append(p)
            probs = np.append(probs, 0.0)
            target = np.append(np.zeros(len(items)), 1.0)
        mixed = (1 - s) * probs + s * target
        for k, c in zip(keys, rng.multinomial(n, mixed / mixed.sum())):
            if c:
                out.add(p, k, int(c))
    return out
