"""Divergence vs. translation quality.

For a divergence p -> q, the control group holds sentences where every
occurrence of p is translated convergently, and the experiment group holds
sentences where exactly one occurrence of p becomes q and all others stay
convergent. MT quality is scored per group and the deltas are correlated
with how often the divergence occurs in training data.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

from .patterns import Outcome, PatternOccurrence
from .stats import ConditionalPatternDistribution, kendall_tau, pearson

log = logging.getLogger(__name__)

PREDICTORS = ("abs_freq", "rel_freq", "log_abs", "log_rel")


class GroupRejected(Exception):
    def __init__(self, p, q, n_control, n_experiment, min_size):
        self.p, self.q = p, q
        self.n_control, self.n_experiment = n_control, n_experiment
        super().__init__(f"{p} -> {q}: control {n_control}, experiment {n_experiment} (< {min_size})")


@dataclass
class DivergenceGroupSpec:
    source_pattern: str
    target_pattern: str
    control_ids: list[str]
    experiment_ids: list[str]

    def __post_init__(self):
        if self.source_pattern == self.target_pattern:
            raise ValueError("a divergence needs p != q")
        if set(self.control_ids) & set(self.experiment_ids):
            raise ValueError("control and experiment groups overlap")


@dataclass
class GroupQualityReport:
    spec: DivergenceGroupSpec
    metric: str
    control_score: float
    experiment_score: float

    @property
    def delta(self) -> float:
        return self.experiment_score - self.control_score

    @property
    def sizes(self) -> tuple[int, int]:
        return len(self.spec.control_ids), len(self.spec.experiment_ids)


def classify_sentence(occurrences: Iterable[PatternOccurrence], p: str) -> tuple[str, str | None] | None:
    """Group membership of one sentence with respect to source pattern ``p``.

    Returns ``("control", None)``, ``("experiment", q)`` or None.
    """
    n_conv = 0
    divergent = []
    for occ in occurrences:
        if occ.source != p:
            continue
        if occ.outcome is Outcome.CONVERGENT:
            n_conv += 1
        elif occ.outcome is Outcome.DIVERGENT:
            divergent.append(occ.target)
        else:
            return None
    if not divergent:
        return ("control", None) if n_conv else None
    if len(divergent) == 1:
        return "experiment", divergent[0]
    return None


def build_groups(index: Mapping[str, Sequence[PatternOccurrence]], p: str, q: str,
                 min_size: int = 100) -> DivergenceGroupSpec:
    """Control/experiment groups for divergence p -> q; raises GroupRejected if either is too small."""
    control, experiment = [], []
    for sid, occs in index.items():
        cls = classify_sentence(occs, p)
        if cls is None:
            continue
        if cls[0] == "control":
            control.append(sid)
        elif cls[1] == q:
            experiment.append(sid)
    if len(control) < min_size or len(experiment) < min_size:
        raise GroupRejected(p, q, len(control), len(experiment), min_size)
    return DivergenceGroupSpec(p, q, control, experiment)


def build_all_groups(index: Mapping[str, Sequence[PatternOccurrence]], min_size: int = 100
                     ) -> tuple[list[DivergenceGroupSpec], list[GroupRejected]]:
    """Groups for every observed divergence, in one pass over the sentences."""
    control: dict[str, list[str]] = {}
    experiment: dict[tuple[str, str], list[str]] = {}
    for sid, occs in index.items():
        for p in sorted({o.source for o in occs}):
            cls = classify_sentence(occs, p)
            if cls is None:
                continue
            if cls[0] == "control":
                control.setdefault(p, []).append(sid)
            else:
                experiment.setdefault((p, cls[1]), []).append(sid)
    specs, rejected = [], []
    for (p, q), exp_ids in sorted(experiment.items()):
        ctl = control.get(p, [])
        if len(ctl) < min_size or len(exp_ids) < min_size:
            rejected.append(GroupRejected(p, q, len(ctl), len(exp_ids), min_size))
        else:
            specs.append(DivergenceGroupSpec(p, q, list(ctl), exp_ids))
    return specs, rejected


# --- BLEU -----------------------------------------------------------------

_13A_RULES = [
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    (re.compile(r"([0-9])(-)"), r"\1 \2 "),
]


def tokenize_13a(line: str) -> list[str]:
    """The mteval-v13a tokenization used by standard corpus BLEU tools."""
    line = line.replace("<skipped>", "").replace("-\n", "").replace("\n", " ")
    if "&" in line:
        line = (line.replace("&quot;", '"').replace("&amp;", "&")
                .replace("&lt;", "<").replace("&gt;", ">"))
    line = f" {line} "
    for pattern, repl in _13A_RULES:
        line = pattern.sub(repl, line)
    return line.split()


def _tokens(seg, tokenize: str | None) -> list[str]:
    if not isinstance(seg, str):
        return list(seg)
    if tokenize == "13a":
        return tokenize_13a(seg)
    return seg.split()


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: Sequence, references: Sequence, max_order: int = 4,
                smooth: bool = False, tokenize: str | None = None) -> float:
    """Corpus BLEU in [0, 100] with one reference per segment.

    Segments are strings (split on whitespace, or with ``tokenize="13a"``) or
    token lists. Without smoothing any zero n-gram precision gives 0; with
    ``smooth=True`` the k-th zero precision is replaced by 1 / (2^k * total).
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypothesis/reference count mismatch")
    if not hypotheses:
        raise ValueError("empty corpus")
    matches = [0] * max_order
    totals = [0] * max_order
    hyp_len = ref_len = 0
    for h, r in zip(hypotheses, references):
        ht, rt = _tokens(h, tokenize), _tokens(r, tokenize)
        hyp_len += len(ht)
        ref_len += len(rt)
        for n in range(1, max_order + 1):
            hc, rc = _ngrams(ht, n), _ngrams(rt, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += max(len(ht) - n + 1, 0)
    if hyp_len == 0:
        raise ValueError("zero-length hypothesis set")
    log_p = 0.0
    k = 1
    for m, t in zip(matches, totals):
        if m == 0:
            if not smooth or t == 0:
                return 0.0
            log_p += math.log(1.0 / (2 ** k * t))
            k += 1
        else:
            log_p += math.log(m / t)
    bp = math.exp(min(0.0, 1.0 - ref_len / hyp_len))
    return 100.0 * bp * math.exp(log_p / max_order)


def score_groups(spec: DivergenceGroupSpec, mt_outputs: Mapping[str, str] | None = None,
                 references: Mapping[str, str] | None = None, metric: str = "bleu",
                 scores: Mapping[str, float] | None = None, **bleu_opts) -> GroupQualityReport:
    """Score both groups: corpus BLEU, or the mean of per-sentence external scores."""
    def score(ids):
        if metric == "bleu":
            missing = [i for i in ids if i not in mt_outputs or i not in references]
            if missing:
                raise KeyError(f"no MT output/reference for sentence {missing[0]!r}")
            return corpus_bleu([mt_outputs[i] for i in ids], [references[i] for i in ids], **bleu_opts)
        missing = [i for i in ids if i not in scores]
        if missing:
            raise KeyError(f"no external score for sentence {missing[0]!r}")
        return math.fsum(scores[i] for i in ids) / len(ids)

    return GroupQualityReport(spec, metric, score(spec.control_ids), score(spec.experiment_ids))


def ingest_external_scores(stream: IO[str]) -> dict[str, float]:
    """Read ``sentence_id<TAB>score`` rows; '#' lines and a header row are skipped."""
    scores: dict[str, float] = {}
    first = True
    for lineno, line in enumerate(stream, 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.rstrip("\r\n").split("\t")
        if first and cols[-1] == "score":
            first = False
            continue
        first = False
        if len(cols) != 2:
            raise ValueError(f"line {lineno}: expected 2 columns")
        try:
            value = float(cols[1])
        except ValueError:
            raise ValueError(f"line {lineno}: bad score {cols[1]!r}") from None
        if cols[0] in scores:
            raise ValueError(f"line {lineno}: duplicate sentence id {cols[0]!r}")
        scores[cols[0]] = value
    return scores


@dataclass
class CorrelationRow:
    metric: str
    predictor: str
    n: int
    pearson_r: float | None
    pearson_p: float | None
    kendall_tau: float | None
    kendall_p: float | None

    COLUMNS = ("metric", "predictor", "n", "pearson_r", "pearson_p", "kendall_tau", "kendall_p")


def divergence_frequencies(training: ConditionalPatternDistribution, p: str, q: str) -> dict[str, float | None]:
    """Predictor values for divergence p -> q from training counts."""
    counts = training.counts.get(p)
    if not counts or not counts.get(q):
        raise KeyError(f"divergence {p} -> {q} absent from training distribution")
    div = counts[q]
    conv = counts.get(p, 0)
    rel = div / conv if conv else None
    return {"abs_freq": float(div), "rel_freq": rel, "log_abs": math.log(div),
            "log_rel": math.log(rel) if rel else None}


def frequency_correlates(reports: Sequence[GroupQualityReport],
                         training: ConditionalPatternDistribution) -> list[CorrelationRow]:
    """Pearson and Kendall tau of each frequency predictor against the score deltas, per metric."""
    rows = []
    for metric in sorted({r.metric for r in reports}):
        sub = [r for r in reports if r.metric == metric]
        preds = [divergence_frequencies(training, r.spec.source_pattern, r.spec.target_pattern) for r in sub]
        for name in PREDICTORS:
            xs, ys = [], []
            for r, pr in zip(sub, preds):
                if pr[name] is None:
                    log.warning("%s -> %s: no convergent training examples, skipped for %s",
                                r.spec.source_pattern, r.spec.target_pattern, name)
                    continue
                xs.append(pr[name])
                ys.append(r.delta)
            try:
                pr_r, pr_p = pearson(xs, ys)
            except ValueError:
                pr_r = pr_p = None
            try:
                kt, kp = kendall_tau(xs, ys)
            except ValueError:
                kt = kp = None
            rows.append(CorrelationRow(metric, name, len(xs), pr_r, pr_p, kt, kp))
    return rows


def filter_by_score(items: Sequence, scores: Mapping[str, float] | Sequence[float], keep_fraction: float,
                    keep: str = "lowest") -> list:
    """Keep the best ``floor(keep_fraction * n)`` items by score.

    ``items`` are sentence ids (or objects with ``sentence_id``); ``scores`` is
    a mapping from id to score or a parallel sequence. Ties at the cut favour
    the earlier item. The survivors are returned in their original order.
    """
    if not 0 < keep_fraction <= 1:
        raise ValueError("keep_fraction must be in (0, 1]")
    if keep not in ("lowest", "highest"):
        raise ValueError("keep must be 'lowest' or 'highest'")
    ids = [getattr(it, "sentence_id", it) for it in items]
    if isinstance(scores, Mapping):
        missing = [i for i in ids if i not in scores]
        if missing:
            raise KeyError(f"no score for {missing[0]!r}")
        vals = [scores[i] for i in ids]
    else:
        if len(scores) != len(ids):
            raise ValueError("score count mismatch")
        vals = list(scores)
    sign = 1 if keep == "lowest" else -1
    order = sorted(range(len(ids)), key=lambda k: (sign * vals[k], k))
    kept = sorted(order[:math.floor(keep_fraction * len(ids) + 1e-9)])
    return [items[k] for k in kept]
