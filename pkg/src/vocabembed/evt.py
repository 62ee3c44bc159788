"""Extreme-value class weights.

Each source class gets two Weibull fits in the semantic space:

* a margin fit on distances from its prototype to foreign points (other
  classes' embedded instances and other prototypes), and
* a coverage fit on distances from its prototype to its own embedded
  instances that lie no farther than the nearest foreign instance.

The class weight is the sum of the two significance-level radii, normalized
so the weights average to one.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSampleError

KAPPA_LO, KAPPA_HI = 1e-3, 1e3
OPEN_SAMPLE_CAP = 10_000


@dataclass(frozen=True)
class WeibullFit:
    shape: float
    scale: float
    n: int = 1
    method: str = "one-shot"

    def __post_init__(self):
        if not (self.shape > 0):
            raise ValueError(f"Weibull shape must be positive, got {self.shape}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"Weibull scale must be positive and finite, got {self.scale}")

    @property
    def one_shot(self):
        return math.isinf(self.shape)


def _validate_samples(samples):
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot fit a Weibull distribution to an empty sample")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("Weibull samples must be positive and finite")
    return x


def _truncated_score(y):
    """Shape equation of a Weibull left-truncated at the sample minimum.

    n * sum(y^k log y - m^k log m) / sum(y^k - m^k) - n / k - sum(log y),
    evaluated on samples rescaled so max(y) == 1 (the equation is scale free).
    """
    n = y.size
    ly = np.log(y)
    m, lm = y.min(), math.log(y.min())
    total = ly.sum()

    def f(k):
        yk = y ** k
        mk = m ** k
        num = np.sum(yk * ly) - n * mk * lm
        den = np.sum(yk) - n * mk
        return n * num / den - n / k - total

    return f


def _full_score(y):
    """Textbook two-parameter Weibull shape equation (monotone in k)."""
    ly = np.log(y)
    mean_ly = ly.mean()

    def f(k):
        yk = y ** k
        return np.sum(yk * ly) / np.sum(yk) - 1.0 / k - mean_ly

    return f


def _bracket(f, lo=KAPPA_LO, hi=KAPPA_HI, points=121):
    grid = np.geomspace(lo, hi, points)
    prev_k, prev_v = grid[0], f(grid[0])
    for k in grid[1:]:
        v = f(k)
        if prev_v == 0.0:
            return prev_k, prev_k
        if np.sign(v) != np.sign(prev_v):
            return prev_k, k
        prev_k, prev_v = k, v
    return None


def _bisect(f, lo, hi):
    flo = f(lo)
    if flo == 0.0 or lo == hi:
        return lo
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return math.sqrt(lo * hi)


def fit_weibull_min(samples):
    """Maximum-likelihood Weibull fit of extreme values.

    A single sample gives the one-shot fit (shape = inf, scale = sample).
    Otherwise the shape solves the truncated-likelihood score equation by
    bracketed bisection and the scale follows in closed form. Samples too
    small for that equation to have a root fall back to the untruncated
    two-parameter likelihood.

    Raises
    ------
    DegenerateSampleError
        More than one sample and all of them equal.
    """
    x = _validate_samples(samples)
    n = x.size
    if n == 1:
        return WeibullFit(math.inf, float(x[0]), 1, "one-shot")
    if np.all(x == x[0]):
        raise DegenerateSampleError(float(x[0]))
    top = x.max()
    y = x / top
    f = _truncated_score(y)
    br = _bracket(f)
    if br is not None:
        k = _bisect(f, *br)
        m = y.min()
        scale = top * (np.sum(y ** k - m ** k) / n) ** (1.0 / k)
        return WeibullFit(float(k), float(scale), n, "truncated-mle")
    f = _full_score(y)
    br = _bracket(f)
    if br is None:
        raise DegenerateSampleError(float(np.median(x)))
    k = _bisect(f, *br)
    scale = top * np.mean(y ** k) ** (1.0 / k)
    return WeibullFit(float(k), float(scale), n, "full-mle")


def fit_or_one_shot(samples):
    """fit_weibull_min, falling back to the one-shot rule on a constant sample."""
    try:
        return fit_weibull_min(samples)
    except DegenerateSampleError as exc:
        return WeibullFit(math.inf, exc.value, len(samples), "degenerate")


def _check_dist(dist):
    if dist < 0:
        raise ValueError(f"distance must be nonnegative, got {dist}")


def margin_probability(fit, dist):
    """Probability that a point at ``dist`` lies inside the class margin."""
    _check_dist(dist)
    if fit.one_shot:
        if dist < fit.scale:
            return 1.0
        return math.exp(-1.0) if dist == fit.scale else 0.0
    return math.exp(-((dist / fit.scale) ** fit.shape))


def coverage_probability(fit, dist):
    _check_dist(dist)
    if fit.one_shot:
        if dist < fit.scale:
            return 0.0
        return 1.0 - math.exp(-1.0) if dist == fit.scale else 1.0
    return -math.expm1(-((dist / fit.scale) ** fit.shape))


def _check_sig(significance):
    if not 0.0 < significance < 1.0:
        raise ValueError(f"significance must lie in (0, 1), got {significance}")


def margin_radius(fit, significance=0.05):
    """Distance at which margin_probability drops to ``significance``."""
    _check_sig(significance)
    if fit.one_shot:
        return fit.scale
    return fit.scale * math.log(1.0 / significance) ** (1.0 / fit.shape)


def coverage_radius(fit, significance=0.05):
    """Distance at which coverage_probability reaches ``significance``."""
    _check_sig(significance)
    if fit.one_shot:
        return fit.scale
    return fit.scale * (-math.log1p(-significance)) ** (1.0 / fit.shape)


def _class_geometry(class_id, W, data):
    P = data.features @ np.asarray(W, dtype=np.float64)
    own = data.labels == class_id
    return P[own], P[~own]


def _norms_to(points, center):
    diff = points - center
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def margin_prototype_ids(vocab, class_id, open_sample=0, seed=0):
    """Prototype rows entering the margin set: source and target classes except
    ``class_id``, plus an optional seeded sample of distractor rows."""
    ids = np.union1d(vocab.source_ids, vocab.target_ids)
    ids = ids[ids != class_id]
    if open_sample:
        rest = np.setdiff1d(np.arange(len(vocab)), np.union1d(ids, [class_id]))
        take = min(int(open_sample), OPEN_SAMPLE_CAP, rest.size)
        if take:
            rng = np.random.default_rng(seed)
            ids = np.union1d(ids, rng.choice(rest, size=take, replace=False))
    return ids


def collect_margin_samples(class_id, W, data, vocab, open_sample=0, seed=0):
    """Distances from the class prototype to foreign embedded instances and
    to other prototypes; exact zeros are dropped."""
    u = vocab.vectors[class_id]
    _, foreign = _class_geometry(class_id, W, data)
    protos = vocab.vectors[margin_prototype_ids(vocab, class_id, open_sample, seed)]
    d = np.concatenate([_norms_to(foreign, u), _norms_to(protos, u)])
    d = d[d > 0]
    if d.size == 0:
        raise ValueError(f"class {vocab.labels[class_id]!r} has no foreign points")
    return d


def collect_coverage_samples(class_id, W, data, vocab):
    """Within-class distances no larger than the nearest foreign instance."""
    u = vocab.vectors[class_id]
    own, foreign = _class_geometry(class_id, W, data)
    if own.shape[0] == 0:
        raise ValueError(f"class {vocab.labels[class_id]!r} has no training instances")
    c = _norms_to(own, u)
    bound = _norms_to(foreign, u).min() if foreign.shape[0] else math.inf
    c = c[(c <= bound) & (c > 0)]
    return c


@dataclass
class ClassWeights:
    """Per-source-class tube weights, aligned with ``vocab.source_ids``."""

    weights: np.ndarray
    margin_radius: np.ndarray
    coverage_radius: np.ndarray
    margin_fits: list = field(default_factory=list)
    coverage_fits: list = field(default_factory=list)
    fallbacks: list = field(default_factory=list)

    @classmethod
    def uniform(cls, n):
        return cls(np.ones(n), np.zeros(n), np.zeros(n))

    def to_dict(self):
        return {
            "weights": [float(v) for v in self.weights],
            "margin_radius": [float(v) for v in self.margin_radius],
            "coverage_radius": [float(v) for v in self.coverage_radius],
            "margin_fits": [[f.shape, f.scale, f.n, f.method] for f in self.margin_fits],
            "coverage_fits": [[f.shape, f.scale, f.n, f.method] for f in self.coverage_fits],
            "fallbacks": [list(fb) for fb in self.fallbacks],
        }

    @classmethod
    def from_dict(cls, d):
        def fits(rows):
            return [WeibullFit(float(s), float(sc), int(n), str(m)) for s, sc, n, m in rows]

        return cls(np.asarray(d["weights"], dtype=np.float64),
                   np.asarray(d["margin_radius"], dtype=np.float64),
                   np.asarray(d["coverage_radius"], dtype=np.float64),
                   fits(d.get("margin_fits", [])), fits(d.get("coverage_fits", [])),
                   [tuple(fb) for fb in d.get("fallbacks", [])])


def normalize_weights(raw):
    raw = np.asarray(raw, dtype=np.float64)
    return raw / raw.mean()


def compute_all_weights(W, data, vocab, significance=0.05, open_sample=0, seed=0):
    """Fit margin and coverage distributions for every source class.

    A class with a single training instance uses the one-shot rule on its
    nearest foreign distance for the margin fit. A class whose coverage set
    is empty uses the one-shot rule on its nearest foreign instance distance.
    """
    d_bar, c_bar, m_fits, c_fits, fallbacks = [], [], [], [], []
    for cid in vocab.source_ids:
        cid = int(cid)
        label = vocab.labels[cid]
        n_own = int(np.sum(data.labels == cid))
        if n_own == 0:
            raise ValueError(f"source class {label!r} has no training instances")
        margin = collect_margin_samples(cid, W, data, vocab, open_sample, seed)
        if n_own == 1:
            mfit = WeibullFit(math.inf, float(margin.min()), 1, "one-shot")
        else:
            mfit = fit_or_one_shot(margin)
        cover = collect_coverage_samples(cid, W, data, vocab)
        if cover.size:
            cfit = fit_or_one_shot(cover)
        else:
            _, foreign = _class_geometry(cid, W, data)
            nearest = _norms_to(foreign, vocab.vectors[cid]).min() if foreign.shape[0] else margin.min()
            cfit = WeibullFit(math.inf, float(nearest), 1, "empty-coverage")
            fallbacks.append((label, "empty coverage set"))
        for kind, fit in (("margin", mfit), ("coverage", cfit)):
            if fit.method == "degenerate":
                fallbacks.append((label, f"{kind}: constant sample"))
        m_fits.append(mfit)
        c_fits.append(cfit)
        d_bar.append(margin_radius(mfit, significance))
        c_bar.append(coverage_radius(cfit, significance))
    d_bar = np.asarray(d_bar)
    c_bar = np.asarray(c_bar)
    return ClassWeights(normalize_weights(d_bar + c_bar), d_bar, c_bar, m_fits, c_fits, fallbacks)
