import numpy as np
import pytest

from vocabembed.core import LabeledFeatures, SemanticVocabulary, build_neighbor_sets
from vocabembed.loss import LossConfig
from vocabembed.synth import SynthSpec, generate_benchmark


def random_problem(seed, n=12, p=6, d=4, n_src=4, n_open=4, a_v=2, b_s=2, **cfg):
    """Small random (W, data, vocab, neighbors, weights, cfg) draw."""
    rng = np.random.default_rng(seed)
    labels = [f"c{i}" for i in range(n_src + n_open)]
    vocab = SemanticVocabulary(labels, rng.standard_normal((n_src + n_open, d)),
                               source_ids=range(n_src), target_ids=range(n_src, n_src + 1))
    ys = np.concatenate([np.arange(n_src), rng.integers(0, n_src, max(n - n_src, 0))])[:n]
    data = LabeledFeatures(rng.standard_normal((n, p)), ys)
    neighbors = build_neighbor_sets(vocab, a_v, b_s)
    weights = rng.uniform(0.5, 1.5, n_src)
    W = 0.5 * rng.standard_normal((p, d))
    base = dict(alpha=0.6, lambda_reg=0.01, epsilon=0.1, margin_c=1.0, a_v=a_v, b_s=b_s)
    base.update(cfg)
    return W, data, vocab, neighbors, weights, LossConfig(**base)


@pytest.fixture
def problem():
    return random_problem


@pytest.fixture(scope="session")
def small_bench():
    return generate_benchmark(SynthSpec(seed=3, n_source_classes=5, n_target_classes=2,
                                        n_distractor_vocab=12, d=6, p=10,
                                        instances_per_class=8, noise_sigma=0.05))


@pytest.fixture(scope="session")
def synth_files(tmp_path_factory, small_bench):
    """The small benchmark written to disk in the CLI file formats."""
    from vocabembed import io

    out = tmp_path_factory.mktemp("synth")
    vocab = small_bench.vocab
    io.write_word_vectors(out / "vocab.txt", vocab, "text")
    io.write_label_file(out / "source_labels.txt", [vocab.labels[i] for i in vocab.source_ids])
    io.write_label_file(out / "target_labels.txt", [vocab.labels[i] for i in vocab.target_ids])
    for split, data in (("train", small_bench.train), ("test", small_bench.test)):
        io.write_features(out / f"{split}_features.bin", data.features)
        io.write_label_file(out / f"{split}_labels.txt", [vocab.labels[i] for i in data.labels])
    return out


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._acceptance = {}


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None and (report.when == "call" or report.failed):
        number, title = mark.args
        results = item.config._acceptance
        # a failure in any phase sticks
        if results.get(number, (None, True))[1]:
            results[number] = (title, report.passed)
    return report


def pytest_terminal_summary(terminalreporter, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")
