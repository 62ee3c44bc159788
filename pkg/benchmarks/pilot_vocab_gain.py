"""Pilot run for the vocabulary-gain acceptance check.

Trains the full model and the data-term-only ablation (alpha = 1) on ten
seeded synthetic benchmarks and writes per-seed ZSL top-1 accuracies plus
the pass thresholds to the package fixture. Run once; the acceptance suite
asserts against the committed file.

    python3 benchmarks/pilot_vocab_gain.py
"""

import json
import sys
from pathlib import Path

from vocabembed.evaluation import evaluate
from vocabembed.loss import LossConfig
from vocabembed.solver import SolverConfig, train
from vocabembed.synth import SynthSpec, generate_benchmark

FIXTURE = Path(__file__).resolve().parents[1] / "src/vocabembed/fixtures/acceptance7_pilot.json"
BENCHMARK = dict(n_source_classes=10, n_target_classes=3, n_distractor_vocab=100, d=20, p=50,
            instances_per_class=30, noise_sigma=0.05)
SEEDS = range(10)


def zsl_top1(seed, alpha):
    bench = generate_benchmark(SynthSpec(seed=seed, **BENCHMARK))
    W, _, _ = train(bench.train, bench.vocab, LossConfig(alpha=alpha), SolverConfig(seed=seed))
    return evaluate(W, bench.test, bench.vocab, ["zsl"])["zsl"].top_k_accuracy[1]


def run():
    full = [zsl_top1(s, LossConfig().alpha) for s in SEEDS]
    ablation = [zsl_top1(s, 1.0) for s in SEEDS]
    return {
        "benchmark": BENCHMARK,
        "seeds": list(SEEDS),
        "loss": LossConfig().to_dict(),
        "solver": SolverConfig().to_dict(),
        "full_top1": full,
        "ablation_top1": ablation,
        "min_wins": 8,
        "max_loss_points": 2.0,
    }


if __name__ == "__main__":
    result = run()
    FIXTURE.write_text(json.dumps(result, indent=2) + "\n")
    for s, a, b in zip(result["seeds"], result["full_top1"], result["ablation_top1"]):
        print(f"seed {s}: full {100 * a:6.2f}  ablation {100 * b:6.2f}  diff {100 * (a - b):+6.2f}")
    sys.exit(0)
