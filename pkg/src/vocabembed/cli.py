"""Command-line interface: train, eval, predict, gen-synth, fit-evt.

Every option can also come from a ``--config`` file of ``key = value``
lines (``#`` starts a comment); keys are option names with underscores.
A flag on the command line beats the config file, which beats the default.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import evt, io, synth
from .core import LabeledFeatures
from .errors import ConfigError, DataFormatError, VocabEmbedError
from .evaluation import aggregate_reports, evaluate, render_report
from .loss import LossConfig
from .recognition import SETTINGS, Prediction, batch_classify, candidate_set, format_predictions
from .solver import METHODS, SolverConfig, train

log = logging.getLogger("vocabembed")

LOSS_KEYS = ("alpha", "lambda_reg", "epsilon", "margin_c", "a_v", "b_s", "normalize_triplets")
SOLVER_KEYS = ("method", "max_iters", "lbfgs_memory", "grad_tol", "sgd_lr", "sgd_lr_halve_every",
               "batch_size", "hybrid_switch_frac", "weight_rounds")
SYNTH_KEYS = ("n_source_classes", "n_target_classes", "n_distractor_vocab", "d", "p",
              "instances_per_class", "test_instances_per_class", "noise_sigma", "map_condition")


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _settings(text):
    out = tuple(v.strip() for v in str(text).split(",") if v.strip())
    bad = [s for s in out if s not in SETTINGS]
    if bad or not out:
        raise ValueError(f"settings must be a comma list drawn from {', '.join(SETTINGS)}")
    return out


class _Options:
    """Collects option metadata so config-file values go through the same types."""

    def __init__(self, parser):
        self.parser = parser
        self.defaults = {}
        self.types = {}
        self.flags = {}

    def add(self, *flags, default=None, type=str, help="", **kw):
        dest = flags[0].lstrip("-").replace("-", "_")
        self.defaults[dest] = default
        self.types[dest] = type
        self.flags[dest] = flags[0]
        if default is not None:
            help = f"{help} (default: {default})" if help else f"(default: {default})"
        if type is bool:
            self.parser.add_argument(*flags, dest=dest, type=_bool, nargs="?", const=True,
                                     default=argparse.SUPPRESS, metavar="BOOL", help=help, **kw)
        else:
            self.parser.add_argument(*flags, dest=dest, type=type, default=argparse.SUPPRESS,
                                     help=help, **kw)


def _common(opts):
    opts.add("--config", help="key = value file with option defaults")
    opts.add("--seed", type=int, default=0, help="random seed")
    opts.add("--threads", type=int, default=os.cpu_count() or 1,
             help="worker threads for scans and BLAS")
    opts.add("--out", help="output path")


def _vocab_opts(opts):
    opts.add("--vocab", help="word-vector file")
    opts.add("--vocab-format", default="text", choices=("text", "binary"))
    opts.add("--no-header", type=bool, default=False, help="text vectors without a count line")
    opts.add("--source-labels", help="file of source class labels")
    opts.add("--target-labels", help="file of target class labels")
    opts.add("--synsets", help="tab-separated synonym file")
    opts.add("--freq", help="token frequency table used to prune the vocabulary")
    opts.add("--min-count", type=int, default=300, help="pruning lower bound")
    opts.add("--max-count", type=int, default=10_000_000, help="pruning upper bound")


def _train_opts(opts):
    _vocab_opts(opts)
    opts.add("--features", help="training features (binary or CSV)")
    opts.add("--labels", help="training labels, one per line")
    opts.add("--trace", help="trace log path (default: <out>.trace)")
    d = LossConfig()
    opts.add("--alpha", type=float, default=d.alpha, help="data-term weight")
    opts.add("--lambda-reg", type=float, default=d.lambda_reg, help="Frobenius penalty")
    opts.add("--epsilon", type=float, default=d.epsilon, help="insensitive tube width")
    opts.add("--margin-c", type=float, default=d.margin_c, help="triplet margin")
    opts.add("--a-v", type=int, default=d.a_v, help="open-vocabulary neighbors per class")
    opts.add("--b-s", type=int, default=d.b_s, help="source neighbors per class")
    opts.add("--normalize-triplets", type=bool, default=d.normalize_triplets,
             help="divide each triplet sum by its neighbor count")
    s = SolverConfig()
    opts.add("--method", default=s.method, choices=METHODS)
    opts.add("--max-iters", type=int, default=s.max_iters)
    opts.add("--lbfgs-memory", type=int, default=s.lbfgs_memory)
    opts.add("--grad-tol", type=float, default=s.grad_tol, help="relative gradient tolerance")
    opts.add("--sgd-lr", type=float, default=s.sgd_lr)
    opts.add("--sgd-lr-halve-every", type=int, default=s.sgd_lr_halve_every)
    opts.add("--batch-size", type=int, default=s.batch_size)
    opts.add("--hybrid-switch-frac", type=float, default=s.hybrid_switch_frac)
    opts.add("--weight-rounds", type=int, default=s.weight_rounds)
    opts.add("--significance", type=float, default=0.05, help="EVT significance level")
    opts.add("--open-sample", type=int, default=0,
             help="extra open-vocabulary prototypes in the margin samples (capped)")


def _eval_opts(opts):
    _vocab_opts(opts)
    opts.add("--model", action="append", help="model file; repeat to aggregate several")
    opts.add("--features", help="test features")
    opts.add("--labels", help="test labels")
    opts.add("--settings", type=_settings, default=",".join(SETTINGS))
    opts.add("--topk", type=_int_list, default="1,5", help="comma list of k")
    opts.add("--open-vocab", default="all", choices=("all", "known"),
             help="'known' restricts the open set to source and target labels")
    opts.add("--dump-predictions", help="directory for per-setting prediction dumps")


def _predict_opts(opts):
    _vocab_opts(opts)
    opts.add("--model", help="model file")
    opts.add("--features", help="features to classify")
    opts.add("--setting", default="openset", choices=SETTINGS)
    opts.add("--k", type=int, default=5, help="ranked labels per instance")


def _synth_opts(opts):
    d = synth.SynthSpec()
    for key in SYNTH_KEYS:
        default = getattr(d, key)
        kind = float if isinstance(default, float) else int
        opts.add("--" + key.replace("_", "-"), type=kind, default=default)


def _fit_evt_opts(opts):
    opts.add("--samples", help="file with one positive number per line")
    opts.add("--significance", type=float, default=0.05)


COMMANDS = {
    "train": ("fit an embedding and write a model file", _train_opts),
    "eval": ("evaluate model(s) and write a report", _eval_opts),
    "predict": ("rank labels for each feature row", _predict_opts),
    "gen-synth": ("write a seeded synthetic benchmark", _synth_opts),
    "fit-evt": ("fit a Weibull distribution to extreme values", _fit_evt_opts),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="vocabembed", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    registry = {}
    for name, (help_, add) in COMMANDS.items():
        p = sub.add_parser(name, help=help_, description=help_)
        opts = _Options(p)
        _common(opts)
        add(opts)
        registry[name] = opts
    return parser, registry


def read_config(path):
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"--config: cannot read {path}: {e.strerror}") from None
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def resolve(ns, opts, registry):
    """Merge defaults, config file and flags into one dict."""
    flags = {k: v for k, v in vars(ns).items() if k in opts.defaults}
    merged = dict(opts.defaults)
    cfg_path = flags.get("config")
    if cfg_path:
        known_anywhere = set().union(*(o.defaults for o in registry.values()))
        for key, text in read_config(cfg_path).items():
            if key not in known_anywhere or key == "config":
                raise ConfigError(f"{cfg_path}: unknown key {key!r}")
            if key not in opts.defaults:
                continue
            kind = opts.types[key]
            try:
                merged[key] = (_bool if kind is bool else kind)(text)
            except ValueError as e:
                raise ConfigError(f"{cfg_path}: bad value for {key!r}: {e}") from None
    merged.update(flags)
    # string defaults of typed options go through their parser once
    for key in ("settings", "topk"):
        if key in merged and isinstance(merged[key], str):
            merged[key] = opts.types[key](merged[key])
    if merged.get("threads") is not None and merged["threads"] < 1:
        raise ConfigError("--threads must be >= 1")
    return merged


def _need(cfg, opts, *keys):
    for key in keys:
        if not cfg.get(key):
            raise ConfigError(f"missing required option {opts.flags[key]}")


def load_vocab(cfg):
    src = io.read_label_file(cfg["source_labels"]) if cfg.get("source_labels") else None
    tgt = io.read_label_file(cfg["target_labels"]) if cfg.get("target_labels") else None
    vocab = io.load_word_vectors(cfg["vocab"], cfg["vocab_format"], no_header=cfg["no_header"],
                                 source_labels=src, target_labels=tgt)
    if cfg.get("synsets"):
        vocab = vocab._derive(vocab.labels, vocab.vectors, vocab.source_ids, vocab.target_ids,
                              synsets=io.read_synsets(cfg["synsets"]))
    if cfg.get("freq"):
        vocab = io.prune_vocabulary(vocab, io.read_frequency_table(cfg["freq"]),
                                    cfg["min_count"], cfg["max_count"])
    log.info("vocabulary: %r", vocab)
    return vocab


def cmd_train(cfg, opts):
    _need(cfg, opts, "vocab", "source_labels", "features", "labels", "out")
    vocab = load_vocab(cfg)
    data = io.load_features(cfg["features"], cfg["labels"], vocab, allowed="source")
    try:
        loss_cfg = LossConfig(**{k: cfg[k] for k in LOSS_KEYS})
        solver_cfg = SolverConfig(seed=cfg["seed"], **{k: cfg[k] for k in SOLVER_KEYS})
    except TypeError as e:
        raise ConfigError(str(e)) from None
    if not 0 < cfg["significance"] < 1:
        raise ConfigError("--significance must lie in (0, 1)")
    W, weights, trace = train(data, vocab, loss_cfg, solver_cfg,
                              significance=cfg["significance"], open_sample=cfg["open_sample"],
                              threads=cfg["threads"])
    extra = {"solver": solver_cfg.to_dict(), "significance": cfg["significance"],
             "open_sample": cfg["open_sample"]}
    io.save_model(cfg["out"], io.ModelFile(W, weights, loss_cfg, io.vocab_fingerprint(vocab),
                                           extra=extra))
    trace_path = cfg.get("trace") or cfg["out"] + ".trace"
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write(trace.to_log())
        fh.writelines(f"warning: {w}\n" for w in trace.warnings)
    for w in trace.warnings:
        log.warning(w)
    last = trace.records[-1]
    print(f"trained W {W.shape[0]}x{W.shape[1]} in {len(trace.records)} records; "
          f"final objective {last['obj']:.12g}")
    return 0


def _open_vocab(vocab, mode):
    if mode == "all":
        return vocab
    keep = np.union1d(vocab.source_ids, vocab.target_ids)
    return vocab.subset(keep)


def _dump(path, rows, dist, idx, vocab):
    preds = [Prediction(i, d) for i, d in zip(idx, dist)]
    Path(path).write_text(format_predictions(preds, vocab, indices=rows), encoding="utf-8")


def cmd_eval(cfg, opts):
    _need(cfg, opts, "vocab", "source_labels", "model", "features", "labels")
    full = load_vocab(cfg)
    paths = [cfg["model"]] if isinstance(cfg["model"], str) else cfg["model"]
    models = [io.load_model(path, full) for path in paths]
    vocab = _open_vocab(full, cfg["open_vocab"])
    test = io.load_features(cfg["features"], cfg["labels"], full, allowed="any")
    if vocab is not full:
        # relabel rows into the restricted vocabulary
        ids = [vocab.index(full.labels[i]) if full.labels[i] in vocab else -1 for i in test.labels]
        if min(ids, default=0) < 0:
            raise DataFormatError("--open-vocab known: test labels outside source and target")
        test = LabeledFeatures(test.features, np.array(ids, dtype=np.int64))
    runs = []
    for n, model in enumerate(models):
        reports, preds = evaluate(model.W, test, vocab, cfg["settings"], cfg["topk"],
                                  threads=cfg["threads"], return_predictions=True)
        runs.append(reports)
        if cfg.get("dump_predictions"):
            out_dir = Path(cfg["dump_predictions"])
            out_dir.mkdir(parents=True, exist_ok=True)
            prefix = f"model{n}_" if len(models) > 1 else ""
            for setting, (rows, dist, idx) in preds.items():
                _dump(out_dir / f"{prefix}{setting}.txt", rows, dist, idx, vocab)
    echo = {k: (",".join(map(str, v)) if isinstance(v, (list, tuple)) else v)
            for k, v in sorted(cfg.items()) if k != "config"}
    if len(runs) == 1:
        text = render_report(runs[0], config=echo)
    else:
        merged = {f"model{n}.{s}": rep for n, reports in enumerate(runs) for s, rep in reports.items()}
        text = render_report(merged, config=echo, aggregate=aggregate_reports(runs))
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_predict(cfg, opts):
    _need(cfg, opts, "vocab", "model", "features")
    vocab = load_vocab(cfg)
    model = io.load_model(cfg["model"], vocab)
    X = io.read_features(cfg["features"])
    if cfg["k"] < 1:
        raise ConfigError("--k must be >= 1")
    preds = batch_classify(model.W, X, vocab, candidate_set(vocab, cfg["setting"]), cfg["k"],
                           threads=cfg["threads"])
    text = format_predictions(preds, vocab)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen_synth(cfg, opts):
    _need(cfg, opts, "out")
    spec = synth.SynthSpec(seed=cfg["seed"], **{k: cfg[k] for k in SYNTH_KEYS})
    try:
        bench = synth.generate_benchmark(spec)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    vocab = bench.vocab
    io.write_word_vectors(out / "vocab.txt", vocab, "text")
    io.write_label_file(out / "source_labels.txt", [vocab.labels[i] for i in vocab.source_ids])
    io.write_label_file(out / "target_labels.txt", [vocab.labels[i] for i in vocab.target_ids])
    for split, data in (("train", bench.train), ("test", bench.test)):
        io.write_features(out / f"{split}_features.bin", data.features)
        io.write_label_file(out / f"{split}_labels.txt", [vocab.labels[i] for i in data.labels])
    print(f"wrote {len(bench.train)} train / {len(bench.test)} test instances, "
          f"{len(vocab)} vocabulary rows to {out}")
    return 0


def cmd_fit_evt(cfg, opts):
    _need(cfg, opts, "samples")
    values = []
    with open(cfg["samples"], encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    values.append(float(line))
                except ValueError:
                    raise DataFormatError(f"{cfg['samples']}:{lineno}: not a number") from None
    try:
        fit = evt.fit_weibull_min(values)
    except evt.DegenerateSampleError as e:
        raise DataFormatError(f"{cfg['samples']}: degenerate sample ({e})") from None
    except ValueError as e:
        raise DataFormatError(f"{cfg['samples']}: {e}") from None
    s = cfg["significance"]
    lines = [f"n = {fit.n}", f"method = {fit.method}", f"kappa = {fit.shape!r}",
             f"lambda = {fit.scale!r}", f"significance = {s!r}",
             f"margin_radius = {evt.margin_radius(fit, s)!r}",
             f"coverage_radius = {evt.coverage_radius(fit, s)!r}"]
    text = "\n".join(lines) + "\n"
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


HANDLERS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "gen-synth": cmd_gen_synth, "fit-evt": cmd_fit_evt}


def main(argv=None):
    parser, registry = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        opts = registry[ns.command]
        cfg = resolve(ns, opts, registry)
        with threadpool_limits(limits=cfg["threads"]):
            return HANDLERS[ns.command](cfg, opts)
    except VocabEmbedError as e:
        print(f"vocabembed {ns.command}: error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"vocabembed {ns.command}: error: {e}", file=sys.stderr)
        return DataFormatError.exit_code
    except (ValueError, KeyError, IndexError) as e:
        print(f"vocabembed {ns.command}: error: {e}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
