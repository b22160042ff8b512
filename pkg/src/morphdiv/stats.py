"""Distribution metrics over aligned pattern outcomes.

A :class:`ConditionalPatternDistribution` stores, per source pattern, counts
of outcome keys: the target pattern for one-to-one occurrences, or the
``<null>`` / ``<other>`` markers. An outcome is convergent exactly when its key
equals the source pattern key.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np
from scipy import special

from .patterns import NULL_KEY, OTHER_KEY, PatternOccurrence, bucket_long_path

MARKERS = (NULL_KEY, OTHER_KEY)
_trapezoid = getattr(np, "trapezoid", None) or np.trapz
O2O = "o2o"
ALL = "all"


class ConditionalPatternDistribution:
    def __init__(self, pattern_type: str | None = None):
        self.pattern_type = pattern_type
        self.counts: dict[str, Counter] = {}

    def add(self, source: str, outcome: str, n: int = 1):
        c = self.counts.get(source)
        if c is None:
            c = self.counts[source] = Counter()
        c[outcome] += n

    def merge(self, other: "ConditionalPatternDistribution") -> "ConditionalPatternDistribution":
        if self.pattern_type is None:
            self.pattern_type = other.pattern_type
        elif other.pattern_type not in (None, self.pattern_type):
            raise ValueError("cannot merge distributions of different pattern types")
        for p, c in other.counts.items():
            mine = self.counts.get(p)
            if mine is None:
                self.counts[p] = Counter(c)
            else:
                mine.update(c)
        return self

    def __contains__(self, p):
        return p in self.counts and self.total(p) > 0

    def __len__(self):
        return len(self.counts)

    def patterns(self) -> list[str]:
        return sorted(self.counts)

    def total(self, p: str | None = None) -> int:
        if p is None:
            return sum(sum(c.values()) for c in self.counts.values())
        return sum(self.counts[p].values()) if p in self.counts else 0

    def conditional(self, p: str) -> dict[str, float]:
        c = self.counts.get(p)
        n = sum(c.values()) if c else 0
        if not n:
            raise KeyError(f"unknown pattern {p!r}")
        return {k: v / n for k, v in sorted(c.items())}

    def restrict(self, scope: str = O2O) -> "ConditionalPatternDistribution":
        """Copy keeping only one-to-one outcomes (``"o2o"``) or everything (``"all"``)."""
        out = ConditionalPatternDistribution(self.pattern_type)
        for p, c in self.counts.items():
            kept = Counter({k: v for k, v in c.items() if scope == ALL or k not in MARKERS})
            if kept:
                out.counts[p] = kept
        return out

    def __eq__(self, other):
        if not isinstance(other, ConditionalPatternDistribution):
            return NotImplemented
        strip = lambda d: {p: +c for p, c in d.counts.items() if +c}
        return strip(self) == strip(other)

    def to_tsv(self, stream: IO[str]):
        stream.write("source_pattern\toutcome\tcount\n")
        for p in self.patterns():
            for k, v in sorted(self.counts[p].items()):
                stream.write(f"{p}\t{k}\t{v}\n")

    @classmethod
    def from_tsv(cls, stream: IO[str], pattern_type: str | None = None):
        dist = cls(pattern_type)
        for line in stream:
            if line.startswith("#") or line.startswith("source_pattern\t") or not line.strip():
                continue
            p, k, v = line.rstrip("\n").split("\t")
            dist.add(p, k, int(v))
        return dist


def build_distribution(occurrences: Iterable[PatternOccurrence], scope: str = O2O,
                       max_path_len: int | None = None) -> ConditionalPatternDistribution:
    """Count outcomes per source pattern.

    ``scope="o2o"`` keeps only one-to-one outcomes; ``"all"`` also counts
    null and other. ``max_path_len`` buckets long arc target paths.
    """
    dist = ConditionalPatternDistribution()
    for occ in occurrences:
        if dist.pattern_type is None:
            dist.pattern_type = occ.pattern_type
        elif occ.pattern_type != dist.pattern_type:
            raise ValueError("occurrences of mixed pattern types")
        key = occ.outcome_key
        if key in MARKERS:
            if scope != ALL:
                continue
        elif max_path_len is not None:
            key = bucket_long_path(key, max_path_len)
        dist.add(occ.source, key)
    return dist


def _log(x: float, base: float) -> float:
    return math.log2(x) if base == 2 else math.log(x) / math.log(base)


def _entropy(counts: Iterable[int], log_base: float) -> float:
    vals = sorted(c for c in counts if c > 0)
    if vals[0] == vals[-1]:
        # k equal outcomes: exactly log k, without summation error
        return _log(len(vals), log_base)
    n = sum(vals)
    return -math.fsum(c / n * _log(c / n, log_base) for c in vals)


def _o2o_counts(dist: ConditionalPatternDistribution, p: str) -> list[int]:
    return [v for k, v in dist.counts.get(p, {}).items() if k not in MARKERS]


def pattern_diversity(dist: ConditionalPatternDistribution, p: str, log_base: float = 2) -> float:
    """Entropy of the target patterns aligned to source pattern ``p``."""
    counts = _o2o_counts(dist, p)
    if not sum(counts):
        raise KeyError(f"unknown pattern {p!r}")
    return _entropy(counts, log_base)


def aggregate_diversity(dist: ConditionalPatternDistribution, log_base: float = 2) -> float:
    """Conditional entropy H(Q|P): per-pattern entropies weighted by pattern frequency."""
    weighted = []
    grand = 0
    for p in dist.patterns():
        counts = _o2o_counts(dist, p)
        n = sum(counts)
        if n:
            weighted.append((n, _entropy(counts, log_base)))
            grand += n
    if not grand:
        raise ValueError("empty distribution")
    return math.fsum(n * h for n, h in weighted) / grand


def _conv_counts(dist: ConditionalPatternDistribution, p: str, denominator: str) -> tuple[int, int]:
    c = dist.counts.get(p, {})
    conv = c.get(p, 0)
    if denominator == ALL:
        return conv, sum(c.values())
    return conv, sum(v for k, v in c.items() if k not in MARKERS)


def convergence_rate(dist, pattern: str | None = None, denominator: str = O2O) -> float:
    """Share of convergent outcomes, corpus-wide or for one source pattern.

    ``dist`` may also be an iterable of occurrences. The default denominator
    counts one-to-one outcomes only; ``denominator="all"`` adds null and other.
    """
    if not isinstance(dist, ConditionalPatternDistribution):
        dist = build_distribution(dist, scope=ALL)
    keys = [pattern] if pattern is not None else dist.patterns()
    conv = total = 0
    for p in keys:
        a, b = _conv_counts(dist, p, denominator)
        conv += a
        total += b
    if not total:
        raise ValueError("empty denominator")
    return conv / total


def wasserstein_unit(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    """Optimal transport cost between two discrete distributions under a 0/1 cost.

    Equal to the total variation distance. Inputs may be unnormalized counts;
    keys missing on one side have zero mass there.
    """
    sa = math.fsum(a.values())
    sb = math.fsum(b.values())
    if sa <= 0 or sb <= 0:
        raise ValueError("both distributions need positive mass")
    keys = sorted(set(a) | set(b))
    return 0.5 * math.fsum(abs(a.get(k, 0) / sa - b.get(k, 0) / sb) for k in keys)


def pattern_wasserstein(dist_a: ConditionalPatternDistribution, dist_b: ConditionalPatternDistribution,
                        p: str) -> float:
    ca = {k: v for k, v in dist_a.counts.get(p, {}).items() if k not in MARKERS}
    cb = {k: v for k, v in dist_b.counts.get(p, {}).items() if k not in MARKERS}
    if not ca and not cb:
        raise KeyError(f"pattern {p!r} absent from both distributions")
    return wasserstein_unit(ca, cb)


@dataclass
class BinnedSeries:
    edges: list[float]  # log10 frequency edges, len = bins + 1
    means: list[float | None]
    counts: list[int]
    half_widths: list[float | None]
    skipped: int = 0  # patterns with no one-to-one outcome in the second corpus

    def rows(self):
        for i, n in enumerate(self.counts):
            yield self.edges[i], self.edges[i + 1], n, self.means[i], self.half_widths[i]


def half_decade_edges(max_freq: int, width: float = 0.5) -> list[float]:
    """Edges 0, w, 2w, ... on log10 frequency, enough to hold ``max_freq``."""
    n = int(math.floor(math.log10(max(max_freq, 1)) / width + 1e-9)) + 1
    return [round(i * width, 10) for i in range(n + 1)]


def bin_wd_by_frequency(dist_ht: ConditionalPatternDistribution, dist_mt: ConditionalPatternDistribution,
                        edges: Sequence[float] | None = None, width: float = 0.5,
                        frequency: str = "ht", min_freq: int = 1) -> BinnedSeries:
    """Mean WD per log10-frequency bin with a normal-approximation 95% CI.

    Frequency comes from the first corpus (``"ht"``) or both pooled
    (``"pooled"``). Bins are ``[lo, hi)``; the top edge is inclusive.
    """
    pts = []
    skipped = 0
    for p in dist_ht.patterns():
        n_ht = sum(_o2o_counts(dist_ht, p))
        if n_ht < min_freq or not n_ht:
            continue
        if not sum(_o2o_counts(dist_mt, p)):
            skipped += 1
            continue
        f = n_ht + (sum(_o2o_counts(dist_mt, p)) if frequency == "pooled" else 0)
        pts.append((f, pattern_wasserstein(dist_ht, dist_mt, p)))
    if edges is None:
        edges = half_decade_edges(max((f for f, _ in pts), default=1), width)
    edges = list(edges)
    groups: list[list[float]] = [[] for _ in range(len(edges) - 1)]
    for f, wd in pts:
        x = math.log10(f)
        for i in range(len(groups)):
            last = i == len(groups) - 1
            if edges[i] <= x < edges[i + 1] or (last and x == edges[-1]):
                groups[i].append(wd)
                break
    means, half = [], []
    for g in groups:
        if not g:
            means.append(None)
            half.append(None)
            continue
        means.append(math.fsum(g) / len(g))
        half.append(1.96 * float(np.std(g, ddof=1)) / math.sqrt(len(g)) if len(g) > 1 else 0.0)
    return BinnedSeries(edges, means, [len(g) for g in groups], half, skipped)


@dataclass
class ComparisonRecord:
    pattern: str
    freq: int
    diversity_a: float
    diversity_b: float | None
    diversity_rel_diff: float | None  # None when A's diversity is 0
    convergence_a: float
    convergence_b: float | None
    convergence_abs_diff: float | None
    wd: float | None

    COLUMNS = ("pattern", "freq", "diversity_a", "diversity_b", "diversity_rel_diff",
               "convergence_a", "convergence_b", "convergence_abs_diff", "wd")


def compare_corpora(dist_a: ConditionalPatternDistribution, dist_b: ConditionalPatternDistribution,
                    min_freq: int = 1000, log_base: float = 2) -> list[ComparisonRecord]:
    """Per-pattern diversity and convergence differences (B relative to A)."""
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    records = []
    for p in dist_a.patterns():
        n = sum(_o2o_counts(dist_a, p))
        if n < min_freq:
            continue
        div_a = pattern_diversity(dist_a, p, log_base)
        conv_a = convergence_rate(dist_a, p)
        if sum(_o2o_counts(dist_b, p)):
            div_b = pattern_diversity(dist_b, p, log_base)
            conv_b = convergence_rate(dist_b, p)
            rel = (div_b - div_a) / div_a if div_a > 0 else None
            records.append(ComparisonRecord(p, n, div_a, div_b, rel, conv_a, conv_b, conv_b - conv_a,
                                            pattern_wasserstein(dist_a, dist_b, p)))
        else:
            records.append(ComparisonRecord(p, n, div_a, None, None, conv_a, None, None, None))
    return records


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample correlation and two-sided p-value from the t distribution with n-2 dof."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return r, float(2 * special.stdtr(n - 2, -abs(t)))


def _tie_sums(v: np.ndarray) -> tuple[float, float, float]:
    _, t = np.unique(v, return_counts=True)
    t = t[t > 1].astype(float)
    return float(np.sum(t * (t - 1) / 2)), float(np.sum(t * (t - 1) * (t - 2))), float(np.sum(t * (t - 1) * (2 * t + 5)))


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Kendall tau-b and a two-sided normal-approximation p-value.

    The variance of the concordance score includes the standard tie
    correction; without ties z = 3 tau sqrt(n(n-1)) / sqrt(2(2n+5)).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 points")
    s = 0
    for i in range(n - 1):
        s += int(np.sum(np.sign(x[i + 1:] - x[i]) * np.sign(y[i + 1:] - y[i])))
    n0 = n * (n - 1) / 2
    xt, x0, x1 = _tie_sums(x)
    yt, y0, y1 = _tie_sums(y)
    if xt == n0 or yt == n0:
        raise ValueError("all values tied")
    tau = s / math.sqrt((n0 - xt) * (n0 - yt))
    m = n * (n - 1.0)
    var = (m * (2 * n + 5) - x1 - y1) / 18 + 2 * xt * yt / m + x0 * y0 / (9 * m * (n - 2))
    z = s / math.sqrt(var)
    return tau, math.erfc(abs(z) / math.sqrt(2))


@dataclass
class QuadraticFit:
    a: float
    b: float
    c: float

    @property
    def vertex(self) -> float | None:
        return -self.b / (2 * self.a) if self.a else None

    def __call__(self, x):
        return self.a * np.asarray(x) ** 2 + self.b * np.asarray(x) + self.c

    def __iter__(self):
        return iter((self.a, self.b, self.c))


def quadratic_fit(x: Sequence[float], y: Sequence[float]) -> QuadraticFit:
    """Least-squares ``y ~ a x^2 + b x + c`` via the normal equations."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("length mismatch")
    if len(np.unique(x)) < 3:
        raise np.linalg.LinAlgError("need at least 3 distinct x values")
    # centring keeps the normal equations well conditioned
    mu = x.mean()
    u = x - mu
    design = np.column_stack([u * u, u, np.ones_like(u)])
    a, b2, c2 = np.linalg.solve(design.T @ design, design.T @ y)
    # expand a(x-mu)^2 + b2(x-mu) + c2 back to powers of x
    return QuadraticFit(float(a), float(b2 - 2 * a * mu), float(a * mu * mu - b2 * mu + c2))


@dataclass
class DensityCurve:
    x: np.ndarray
    density: np.ndarray
    bandwidth: float
    point_mass: float | None = None

    def integral(self) -> float:
        return float(_trapezoid(self.density, self.x)) if len(self.x) > 1 else 0.0


def kde(values: Sequence[float], bandwidth: float | None = None, points: int = 256) -> DensityCurve:
    """Gaussian kernel density on an even grid spanning the data range +/- 3 bandwidths.

    The default bandwidth is Silverman's rule, 1.06 * sd * n^(-1/5). All-equal
    input returns an empty curve with ``point_mass`` set to that value.
    """
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise ValueError("need at least 2 values")
    if np.all(v == v[0]):
        return DensityCurve(np.array([]), np.array([]), 0.0, float(v[0]))
    h = bandwidth if bandwidth is not None else 1.06 * float(np.std(v, ddof=1)) * len(v) ** -0.2
    grid = np.linspace(v.min() - 3 * h, v.max() + 3 * h, points)
    z = (grid[:, None] - v[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (len(v) * h * math.sqrt(2 * math.pi))
    return DensityCurve(grid, dens, h)


def summary_block(dist_all: ConditionalPatternDistribution, log_base: float = 2) -> dict:
    """Aggregate scores for one pattern type (diversity and convergence)."""
    o2o = dist_all.restrict(O2O)
    targets = {k for c in o2o.counts.values() for k in c}
    block = {
        "occurrences": dist_all.total(),
        "o2o_occurrences": o2o.total(),
        "source_patterns": len(dist_all.counts),
        "target_patterns": len(targets),
        "diversity": aggregate_diversity(o2o, log_base) if o2o.total() else None,
        "convergence_rate": convergence_rate(o2o) if o2o.total() else None,
        "convergence_rate_all": convergence_rate(dist_all, denominator=ALL) if dist_all.total() else None,
    }
    return block


def breakdown(dist_all: ConditionalPatternDistribution, p: str) -> dict[str, float]:
    """Four-way outcome percentages for one source pattern from an all-scope distribution."""
    c = dist_all.counts.get(p)
    n = sum(c.values()) if c else 0
    if not n:
        raise KeyError(f"pattern {p!r} never observed")
    conv = c.get(p, 0)
    null = c.get(NULL_KEY, 0)
    other = c.get(OTHER_KEY, 0)
    return {"o2o_conv": 100.0 * conv / n, "o2o_div": 100.0 * (n - conv - null - other) / n,
            "null": 100.0 * null / n, "others": 100.0 * other / n}
