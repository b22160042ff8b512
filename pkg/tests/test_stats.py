import io
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize, stats as sps

from conftest import golden_pairs
from morphdiv.patterns import NULL_KEY, OTHER_KEY, extract_arc_patterns, extract_word_patterns
from morphdiv.stats import (ALL, ConditionalPatternDistribution, aggregate_diversity, bin_wd_by_frequency,
                            breakdown, build_distribution, compare_corpora, convergence_rate,
                            half_decade_edges, kde, kendall_tau, pattern_diversity, pattern_wasserstein,
                            pearson, quadratic_fit, summary_block, wasserstein_unit)


def golden_dist(kind, scope=ALL):
    extract = extract_word_patterns if kind == "word" else extract_arc_patterns
    return build_distribution([o for p in golden_pairs() for o in extract(p)], scope=scope)


def H(*ps):
    return -sum(p * math.log2(p) for p in ps)


# --- golden values -------------------------------------------------------------

def test_golden_convergence_rates():
    word, arc = golden_dist("word"), golden_dist("arc")
    assert convergence_rate(word) == 40 / 58
    assert convergence_rate(word, denominator=ALL) == 40 / 68
    assert convergence_rate(arc) == 31 / 39
    assert convergence_rate(arc, denominator=ALL) == 31 / 47
    assert convergence_rate(word, "root~VERB~nsubj+xcomp") == 2 / 5
    assert convergence_rate(arc, "VERB~nsubj~PRON") == 10 / 11


def test_golden_diversity():
    word, arc = golden_dist("word"), golden_dist("arc")
    expect_word = (4 * H(3 / 4, 1 / 4) + 5 * H(2 / 5, 1 / 5, 1 / 5, 1 / 5) + 2 + 6 + 2 + 9 * math.log2(3)) / 58
    expect_arc = (6 * H(5 / 6, 1 / 6) + 5 * H(3 / 5, 1 / 5, 1 / 5) + 11 * H(10 / 11, 1 / 11) + 3 * math.log2(3)) / 39
    assert aggregate_diversity(word) == pytest.approx(expect_word, abs=1e-12)
    assert aggregate_diversity(arc) == pytest.approx(expect_arc, abs=1e-12)
    assert pattern_diversity(word, "xcomp~VERB~leaf") == 1.5
    assert pattern_diversity(word, "obl~NOUN~leaf") == math.log2(3)


def test_golden_counts_and_summary():
    word = golden_dist("word")
    assert word.total() == 68 and len(word) == 30
    assert word.counts["nsubj~PRON~leaf"] == {"nsubj~PRON~leaf": 12}
    assert word.counts["amod~ADJ~leaf"] == {"amod~ADJ~leaf": 2, NULL_KEY: 1}
    block = summary_block(word)
    assert block["o2o_occurrences"] == 58 and block["target_patterns"] == 30
    assert summary_block(golden_dist("arc"))["target_patterns"] == 17


def test_breakdown_sums_to_100():
    word = golden_dist("word")
    for p in word.patterns():
        assert math.fsum(breakdown(word, p).values()) == pytest.approx(100.0, abs=1e-9)
    assert breakdown(word, "root~VERB~nsubj") == pytest.approx(
        {"o2o_conv": 25.0, "o2o_div": 50.0, "null": 0.0, "others": 25.0})


def test_scope_restriction():
    occs = [o for p in golden_pairs() for o in extract_word_patterns(p)]
    o2o = build_distribution(occs)
    assert o2o.total() == 58
    assert o2o == golden_dist("word").restrict()
    with pytest.raises(ValueError):
        build_distribution(occs + [o for p in golden_pairs() for o in extract_arc_patterns(p)])


def test_tsv_roundtrip():
    word = golden_dist("word")
    buf = io.StringIO()
    word.to_tsv(buf)
    assert ConditionalPatternDistribution.from_tsv(io.StringIO(buf.getvalue())) == word


# --- entropy -------------------------------------------------------------------

def _random_dist(rng, n_patterns=6, n_targets=5):
    d = ConditionalPatternDistribution("word")
    for p in range(rng.randint(1, n_patterns)):
        for q in range(rng.randint(1, n_targets)):
            c = rng.randint(0, 20)
            if c:
                d.add(f"p{p}", f"q{q}", c)
        if not d.total(f"p{p}"):
            d.add(f"p{p}", "q0", 1)
    return d


def _joint_entropy_oracle(d, base):
    joint = np.array([v for p in d.patterns() for v in d.counts[p].values()], dtype=float)
    marg = np.array([d.total(p) for p in d.patterns()], dtype=float)
    hj = -np.sum(joint / joint.sum() * np.log(joint / joint.sum()))
    hp = -np.sum(marg / marg.sum() * np.log(marg / marg.sum()))
    return (hj - hp) / math.log(base)


def test_aggregate_diversity_is_conditional_entropy():
    rng = random.Random(7)
    for _ in range(300):
        d = _random_dist(rng)
        assert aggregate_diversity(d) == pytest.approx(_joint_entropy_oracle(d, 2), abs=1e-9)


@pytest.mark.parametrize("k", range(1, 40))
def test_uniform_entropy_exact(k):
    d = ConditionalPatternDistribution()
    for q in range(k):
        d.add("p", f"q{q}", 3)
    assert pattern_diversity(d, "p") == math.log2(k)


def test_entropy_base_is_a_scale():
    rng = random.Random(3)
    for _ in range(50):
        d = _random_dist(rng)
        h2 = aggregate_diversity(d, 2)
        assert aggregate_diversity(d, math.e) == pytest.approx(h2 * math.log(2), abs=1e-12)
        assert aggregate_diversity(d, 10) == pytest.approx(h2 * math.log10(2), abs=1e-12)


def test_markers_do_not_enter_diversity():
    d = ConditionalPatternDistribution()
    d.add("p", "p", 4)
    d.add("p", NULL_KEY, 9)
    d.add("p", OTHER_KEY, 9)
    assert aggregate_diversity(d) == 0.0
    assert convergence_rate(d) == 1.0
    assert convergence_rate(d, denominator=ALL) == 4 / 22


def test_merge_is_a_homomorphism():
    occs = [o for p in golden_pairs() for o in extract_word_patterns(p)]
    for cut in (0, 10, 33, 68):
        a = build_distribution(occs[:cut], scope=ALL)
        b = build_distribution(occs[cut:], scope=ALL)
        merged = ConditionalPatternDistribution("word").merge(a).merge(b)
        assert merged == build_distribution(occs, scope=ALL)


# --- transport ---------------------------------------------------------------------

def _lp_transport(a, b):
    keys = sorted(set(a) | set(b))
    pa = np.array([a.get(k, 0) for k in keys], float)
    pb = np.array([b.get(k, 0) for k in keys], float)
    pa, pb = pa / pa.sum(), pb / pb.sum()
    n = len(keys)
    cost = (1 - np.eye(n)).ravel()
    a_eq = np.vstack([np.kron(np.eye(n), np.ones(n)), np.kron(np.ones(n), np.eye(n))])
    res = optimize.linprog(cost, A_eq=a_eq, b_eq=np.concatenate([pa, pb]), bounds=(0, None), method="highs")
    return res.fun


def test_wasserstein_matches_linear_program():
    rng = random.Random(11)
    for _ in range(200):
        a = {f"k{i}": rng.randint(0, 9) for i in range(rng.randint(1, 6))}
        b = {f"k{i}": rng.randint(0, 9) for i in range(rng.randint(1, 6))}
        a["k0"] = a.get("k0", 0) + 1
        b["k0"] = b.get("k0", 0) + 1
        assert wasserstein_unit(a, b) == pytest.approx(_lp_transport(a, b), abs=1e-9)


weights = st.dictionaries(st.sampled_from("abcdef"), st.integers(1, 50), min_size=1)


@settings(max_examples=200, deadline=None)
@given(weights, weights, weights)
def test_wasserstein_is_a_metric(a, b, c):
    assert wasserstein_unit(a, a) == 0.0
    assert wasserstein_unit(a, b) == pytest.approx(wasserstein_unit(b, a), abs=1e-15)
    assert 0.0 <= wasserstein_unit(a, b) <= 1.0
    assert wasserstein_unit(a, c) <= wasserstein_unit(a, b) + wasserstein_unit(b, c) + 1e-12
    # scale invariance: counts and probabilities give the same answer
    assert wasserstein_unit({k: 3 * v for k, v in a.items()}, b) == pytest.approx(wasserstein_unit(a, b), abs=1e-12)


def test_wasserstein_edge_cases():
    assert wasserstein_unit({"x": 1}, {"y": 5}) == 1.0
    with pytest.raises(ValueError):
        wasserstein_unit({}, {"y": 1})
    d = ConditionalPatternDistribution()
    d.add("p", NULL_KEY, 3)
    with pytest.raises(KeyError):
        pattern_wasserstein(d, d, "p")


# --- binning and comparison ------------------------------------------------------

def test_half_decade_edges():
    assert half_decade_edges(1) == [0.0, 0.5]
    assert half_decade_edges(10) == [0.0, 0.5, 1.0, 1.5]
    assert half_decade_edges(31) == [0.0, 0.5, 1.0, 1.5]
    assert half_decade_edges(32) == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert half_decade_edges(1000, 1.0) == [0.0, 1.0, 2.0, 3.0, 4.0]


def test_binned_wd_hand_example():
    ht, mt = ConditionalPatternDistribution(), ConditionalPatternDistribution()
    # p1 freq 1 (bin 0), p2 and p3 freq 10 (bin 2), p4 only in HT
    ht.add("p1", "p1", 1)
    mt.add("p1", "x", 1)
    for p, wd_conv in (("p2", 10), ("p3", 5)):
        ht.add(p, p, 10)
        mt.add(p, p, wd_conv)
        if wd_conv < 10:
            mt.add(p, "y", 10 - wd_conv)
    ht.add("p4", "p4", 2)
    series = bin_wd_by_frequency(ht, mt)
    assert series.edges == [0.0, 0.5, 1.0, 1.5]
    rows = list(series.rows())
    assert [r[2] for r in rows] == [1, 0, 2]
    assert rows[0][3] == 1.0 and rows[0][4] == 0.0
    assert rows[1][3] is None and rows[1][4] is None
    assert rows[2][3] == pytest.approx(0.25)
    assert rows[2][4] == pytest.approx(1.96 * np.std([0.0, 0.5], ddof=1) / math.sqrt(2))
    assert series.skipped == 1


def test_compare_self_is_zero_and_min_freq_filters():
    word = golden_dist("word")
    recs = compare_corpora(word, word, min_freq=1)
    assert len(recs) == sum(1 for p in word.patterns() if word.restrict().total(p))
    for r in recs:
        assert r.convergence_abs_diff == 0 and r.wd == 0
        assert r.diversity_rel_diff in (0.0, None)
    assert [r.pattern for r in compare_corpora(word, word, min_freq=5)] == ["nsubj~PRON~leaf", "root~VERB~nsubj+xcomp"]
    with pytest.raises(ValueError):
        compare_corpora(word, word, min_freq=0)


# --- correlation and fitting ---------------------------------------------------------

FIXTURES = [
    ([1, 2, 3, 4, 5], [2, 4, 5, 4, 5]),
    ([1, 2, 3, 4, 5, 6, 7, 8], [8, 7, 6, 5, 4, 3, 2, 1.5]),
    ([1, 1, 2, 2, 3, 3, 4], [1, 2, 1, 3, 3, 2, 4]),
    ([0.1, 0.4, 0.35, 0.8, 0.9, 0.2], [1, 1, 1, 2, 2, 2]),
]


@pytest.mark.parametrize("x, y", FIXTURES)
def test_pearson_and_kendall_match_scipy(x, y):
    r, p = pearson(x, y)
    ref = sps.pearsonr(x, y)
    assert r == pytest.approx(ref.statistic, abs=1e-12)
    assert p == pytest.approx(ref.pvalue, abs=1e-12)
    tau, tp = kendall_tau(x, y)
    kref = sps.kendalltau(x, y, method="asymptotic")
    assert tau == pytest.approx(kref.statistic, abs=1e-12)
    assert tp == pytest.approx(kref.pvalue, abs=1e-12)


def _tau_b_pairs(x, y):
    conc = disc = tx = ty = 0
    n = len(x)
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = x[i] - x[j], y[i] - y[j]
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif dx * dy > 0:
                conc += 1
            else:
                disc += 1
    return (conc - disc) / math.sqrt((conc + disc + tx) * (conc + disc + ty))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=3, max_size=20))
def test_kendall_tau_b_by_pair_enumeration(pts):
    x, y = [a for a, _ in pts], [b for _, b in pts]
    if len(set(x)) < 2 or len(set(y)) < 2:
        with pytest.raises(ValueError):
            kendall_tau(x, y)
        return
    assert kendall_tau(x, y)[0] == pytest.approx(_tau_b_pairs(x, y), abs=1e-12)


def test_correlation_errors():
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2])
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        kendall_tau([1, 2, 3], [1, 2])
    assert pearson([1, 2, 3], [2, 4, 6]) == (1.0, 0.0)


def test_quadratic_fit_matches_polyfit():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, 50)
    y = -2 * x ** 2 + 2 * x + 0.1 + rng.normal(0, 0.05, 50)
    fit = quadratic_fit(x, y)
    assert tuple(fit) == pytest.approx(tuple(np.polyfit(x, y, 2)), abs=1e-9)
    assert fit.vertex == pytest.approx(-fit.b / (2 * fit.a))
    exact = quadratic_fit([0, 1, 2, 3], [1, 2, 5, 10])
    assert tuple(exact) == pytest.approx((1, 0, 1), abs=1e-12)
    with pytest.raises(np.linalg.LinAlgError):
        quadratic_fit([1, 1, 2, 2], [0, 1, 2, 3])


def test_kde_matches_scipy_and_integrates_to_one():
    rng = np.random.default_rng(1)
    v = rng.normal(0, 1, 200)
    curve = kde(v)
    h = 1.06 * np.std(v, ddof=1) * len(v) ** -0.2
    assert curve.bandwidth == pytest.approx(h)
    ref = sps.gaussian_kde(v, bw_method=h / np.std(v, ddof=1))(curve.x)
    assert np.allclose(curve.density, ref, atol=1e-12)
    assert curve.integral() == pytest.approx(1.0, abs=1e-3)
    point = kde([0.5, 0.5, 0.5])
    assert point.point_mass == 0.5 and len(point.x) == 0
    with pytest.raises(ValueError):
        kde([1.0])
