"""Recognition metrics and the evaluation report.

All rates are fractions in [0, 1]; the report also renders them as
percentages with two decimals.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .recognition import SETTINGS, candidate_set, rank

SPLIT_SETTINGS = ("gzsl", "openset")


def _ids(predictions):
    if isinstance(predictions, np.ndarray):
        return np.atleast_2d(predictions)
    return [np.asarray(getattr(p, "ids", p)) for p in predictions]


def _truth_sets(truth, vocab):
    if vocab is None:
        return [{int(t)} for t in truth]
    return [{vocab.index(s) for s in vocab.synset(vocab.labels[int(t)]) if s in vocab}
            for t in truth]


def topk_accuracy(predictions, truth, vocab=None, k=1):
    """Fraction of instances whose true synset meets the top-k predictions.

    ``predictions`` is a list of Prediction (or an (N, K) id array); ``truth``
    holds vocabulary rows. ``vocab`` supplies synsets; without it every
    synset is the true label alone.
    """
    ranked = _ids(predictions)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if len(ranked) != truth.size:
        raise ValueError(f"{len(ranked)} predictions but {truth.size} labels")
    if k < 1:
        raise ValueError("k must be >= 1")
    if truth.size == 0:
        return 0.0
    hits = 0
    for row, ok in zip(ranked, _truth_sets(truth, vocab)):
        if k > len(row):
            raise ValueError(f"k={k} exceeds ranked depth {len(row)}")
        hits += any(int(i) in ok for i in row[:k])
    return hits / truth.size


def harmonic_mean(acc_u, acc_s):
    """2 * acc_u * acc_s / (acc_u + acc_s); zero when either input is zero.

    Inputs are rates in [0, 1], or percentages when both exceed 1 (the
    result is then a percentage too).
    """
    a, b = float(acc_u), float(acc_s)
    if a < 0 or b < 0 or not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"accuracies must be nonnegative, got {a}, {b}")
    limit = 100.0 if (a > 1 and b > 1) or (min(a, b) == 0 and max(a, b) > 1) else 1.0
    if a > limit or b > limit:
        raise ValueError(f"accuracies out of range: {a}, {b}")
    if a == 0 or b == 0:
        return 0.0
    return 2.0 * a * b / (a + b)


def false_positive_rate(top1, truth, seen_ids):
    """Share of unseen-class instances whose top-1 prediction is a seen class.

    Returns ``(rate, n_e, n_un)``.
    """
    top1 = np.asarray([int(getattr(p, "top1", p)) for p in top1], dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if top1.size != truth.size:
        raise ValueError(f"{top1.size} predictions but {truth.size} labels")
    seen = np.asarray(seen_ids, dtype=np.int64)
    unseen = ~np.isin(truth, seen)
    n_un = int(unseen.sum())
    if n_un == 0:
        raise ValueError("no unseen-class instances")
    n_e = int(np.sum(np.isin(top1[unseen], seen)))
    return n_e / n_un, n_e, n_un


def openness(num_source, vocab_size):
    """1 - sqrt(2 |W_s| / |W|)."""
    if num_source < 0 or vocab_size <= 0:
        raise ValueError("counts must be positive")
    if vocab_size < 2 * num_source:
        raise ValueError(f"vocabulary of {vocab_size} is smaller than twice the {num_source} "
                         "source classes")
    return 1.0 - math.sqrt(2.0 * num_source / vocab_size)


@dataclass(frozen=True)
class SplitScores:
    """Best seen and best unseen candidate of every instance.

    ``delta`` is the calibration value at which the instance's prediction
    switches from its best seen to its best unseen candidate.
    """

    delta: np.ndarray
    seen_correct: np.ndarray
    unseen_correct: np.ndarray
    is_unseen: np.ndarray
    seen_id: np.ndarray
    unseen_id: np.ndarray


def split_scores(W, test, vocab, seen_ids, unseen_ids, threads=1):
    """Nearest seen and nearest unseen candidate of every test instance."""
    seen_ids = np.asarray(seen_ids, dtype=np.int64)
    unseen_ids = np.asarray(unseen_ids, dtype=np.int64)
    ds, s_id = rank(W, test.features, vocab, seen_ids, 1, threads=threads)
    du, u_id = rank(W, test.features, vocab, unseen_ids, 1, threads=threads)
    truth = _truth_sets(test.labels, vocab)
    s_ok = np.array([int(i) in t for i, t in zip(s_id[:, 0], truth)], dtype=bool)
    u_ok = np.array([int(i) in t for i, t in zip(u_id[:, 0], truth)], dtype=bool)
    return SplitScores(du[:, 0] - ds[:, 0], s_ok, u_ok, ~np.isin(test.labels, seen_ids),
                       s_id[:, 0], u_id[:, 0])


def accuracies_at(scores, gamma):
    """(Acc_U, Acc_S) when unseen scores are raised by ``gamma``.

    An exact tie between the best seen and best unseen candidate goes to
    the lower vocabulary index.
    """
    pick_unseen = (gamma > scores.delta) | (
        (gamma == scores.delta) & (scores.unseen_id < scores.seen_id))
    u = scores.is_unseen
    s = ~u
    acc_u = float(np.mean(scores.unseen_correct[u] & pick_unseen[u])) if u.any() else 0.0
    acc_s = float(np.mean(scores.seen_correct[s] & ~pick_unseen[s])) if s.any() else 0.0
    return acc_u, acc_s


def seen_unseen_curve(scores):
    """Exact (Acc_U, Acc_S) staircase over all calibration values.

    One point for gamma -> -inf, then one point on each open interval to the
    right of a distinct critical value.
    """
    u = scores.is_unseen
    s = ~u
    n_u, n_s = int(u.sum()), int(s.sum())
    if n_u == 0 or n_s == 0:
        raise ValueError("AUSUC needs both seen- and unseen-class test instances")
    crit = np.unique(scores.delta)
    seen_d = np.sort(scores.delta[s & scores.seen_correct])
    unseen_d = np.sort(scores.delta[u & scores.unseen_correct])
    # seen instance correct iff gamma < delta; unseen iff gamma > delta
    seen_ok = seen_d.size - np.searchsorted(seen_d, crit, side="right")
    unseen_ok = np.searchsorted(unseen_d, crit, side="right")
    acc_u = np.concatenate([[0.0], unseen_ok / n_u])
    acc_s = np.concatenate([[seen_d.size / n_s], seen_ok / n_s])
    return acc_u, acc_s


def curve_area(acc_u, acc_s):
    acc_u = np.asarray(acc_u, dtype=np.float64)
    acc_s = np.asarray(acc_s, dtype=np.float64)
    return float(np.sum(np.diff(acc_u) * (acc_s[1:] + acc_s[:-1]) / 2.0))


def ausuc(W, test, vocab, seen_ids=None, unseen_ids=None, threads=1):
    """Area under the seen-unseen accuracy curve under calibrated stacking.

    Defaults: seen = source classes, unseen = target classes.
    """
    seen_ids = vocab.source_ids if seen_ids is None else seen_ids
    unseen_ids = vocab.target_ids if unseen_ids is None else unseen_ids
    scores = split_scores(W, test, vocab, seen_ids, unseen_ids, threads)
    return curve_area(*seen_unseen_curve(scores))


@dataclass
class EvalReport:
    setting: str
    top_k_accuracy: dict = field(default_factory=dict)
    acc_u_to_t: float = None
    acc_s_to_t: float = None
    harmonic_mean: float = None
    ausuc: float = None
    fpr: float = None
    openness: float = None
    counts: dict = field(default_factory=dict)

    def as_items(self):
        """Flat (key, value) pairs in report order."""
        items = [("setting", self.setting)]
        items += [(k, v) for k, v in self.counts.items()]
        for k, v in sorted(self.top_k_accuracy.items()):
            items.append((f"top{k}", v))
        for name in ("acc_u_to_t", "acc_s_to_t", "harmonic_mean", "ausuc", "fpr", "openness"):
            items.append((name, getattr(self, name)))
        return items


def _evaluate_setting(W, test, vocab, setting, topk, threads):
    cands = candidate_set(vocab, setting)
    if cands.ids.size == 0:
        raise ValueError(f"setting {setting!r} has no candidate labels")
    if setting == "supervised":
        rows = np.flatnonzero(np.isin(test.labels, vocab.source_ids))
    elif setting == "zsl":
        rows = np.flatnonzero(np.isin(test.labels, vocab.target_ids))
    else:
        rows = np.arange(len(test))
    if rows.size == 0:
        raise ValueError(f"no test instances for setting {setting!r}")
    sub = test.subset(rows)
    depth = min(max(topk), cands.ids.size)
    dist, idx = rank(W, sub.features, vocab, cands, depth, threads=threads)
    report = EvalReport(setting)
    report.counts = {"n_instances": int(rows.size), "n_candidates": int(cands.ids.size)}
    for k in topk:
        report.top_k_accuracy[int(k)] = topk_accuracy(idx, sub.labels, vocab, min(k, depth))
    if setting in SPLIT_SETTINGS:
        seen = vocab.source_ids
        unseen_c = np.setdiff1d(cands.ids, seen)
        is_unseen = ~np.isin(sub.labels, seen)
        report.counts["n_seen"] = int((~is_unseen).sum())
        report.counts["n_unseen"] = int(is_unseen.sum())
        if (~is_unseen).any():
            report.acc_s_to_t = topk_accuracy(idx[~is_unseen], sub.labels[~is_unseen], vocab, 1)
        if is_unseen.any():
            report.acc_u_to_t = topk_accuracy(idx[is_unseen], sub.labels[is_unseen], vocab, 1)
            report.fpr, n_e, n_un = false_positive_rate(idx[:, 0], sub.labels, seen)
            report.counts["n_e"], report.counts["n_un"] = n_e, n_un
        if report.acc_s_to_t is not None and report.acc_u_to_t is not None:
            report.harmonic_mean = harmonic_mean(report.acc_u_to_t, report.acc_s_to_t)
            if unseen_c.size:
                scores = split_scores(W, sub, vocab, seen, unseen_c, threads)
                report.ausuc = curve_area(*seen_unseen_curve(scores))
        try:
            report.openness = openness(seen.size, cands.ids.size)
        except ValueError:
            report.openness = None
    return report, rows, dist, idx


def evaluate(W, test, vocab, settings=SETTINGS, topk=(1, 5), threads=1, return_predictions=False):
    """Evaluate ``W`` under each requested setting.

    Returns a dict ``setting -> EvalReport``; with ``return_predictions`` also
    a dict ``setting -> (rows, dist, idx)`` of the raw rankings.
    """
    reports, preds = {}, {}
    for setting in settings:
        if setting not in SETTINGS:
            raise ValueError(f"unknown setting {setting!r}")
        rep, rows, dist, idx = _evaluate_setting(W, test, vocab, setting, tuple(topk), threads)
        reports[setting] = rep
        preds[setting] = (rows, dist, idx)
    return (reports, preds) if return_predictions else reports


def _fmt(v):
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _pct(v):
    return f"{100.0 * v:.2f}"


RATE_KEYS = ("acc_u_to_t", "acc_s_to_t", "harmonic_mean", "fpr")


def render_report(reports, config=None, aggregate=None):
    """Key-value text with one ``[section]`` per setting.

    Rates are written at full precision and again as ``<key>_pct`` with two
    decimals.
    """
    lines = ["# vocabembed evaluation report"]
    if config:
        lines.append("[config]")
        lines += [f"{k} = {_fmt(v)}" for k, v in config.items()]
    for setting, rep in reports.items():
        lines.append(f"[{setting}]")
        for key, v in rep.as_items():
            lines.append(f"{key} = {_fmt(v)}")
            if v is not None and (key.startswith("top") or key in RATE_KEYS):
                lines.append(f"{key}_pct = {_pct(v)}")
    if aggregate:
        lines.append("[aggregate]")
        lines += [f"{k} = {_fmt(v)}" for k, v in aggregate.items()]
    return "\n".join(lines) + "\n"


def parse_report(text):
    """Parse a rendered report into ``{section: {key: str}}``."""
    out, section = {}, None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = out.setdefault(line[1:-1], {})
            continue
        key, _, value = line.partition("=")
        if section is None:
            raise ValueError(f"key outside a section: {raw!r}")
        section[key.strip()] = value.strip()
    return out


def aggregate_reports(runs):
    """Mean and standard deviation of numeric metrics across runs of the same settings."""
    acc = {}
    for reports in runs:
        for setting, rep in reports.items():
            for key, v in rep.as_items():
                if isinstance(v, float):
                    acc.setdefault(f"{setting}.{key}", []).append(v)
    out = {"n_runs": len(runs)}
    for key, vals in acc.items():
        if len(vals) == len(runs):
            out[f"{key}.mean"] = float(np.mean(vals))
            out[f"{key}.std"] = float(np.std(vals))
    return out
