"""Minimizers for the embedding objective and the outer training loop."""

import logging
import time
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import build_neighbor_sets
from .errors import ConfigError, NumericalError
from .evt import ClassWeights, compute_all_weights
from .loss import Objective

log = logging.getLogger(__name__)

ARMIJO_C1 = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 30
DIVERGENCE_FACTOR = 1e6
METHODS = ("lbfgs", "sgd", "hybrid")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "lbfgs"
    max_iters: int = 100
    lbfgs_memory: int = 10
    grad_tol: float = 1e-6
    # step size on the objective divided by the number of instances
    sgd_lr: float = 0.01
    sgd_lr_halve_every: int = 10
    batch_size: int = 32
    hybrid_switch_frac: float = 0.3
    weight_rounds: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("max_iters", "lbfgs_memory", "sgd_lr_halve_every", "batch_size",
                     "weight_rounds"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if not self.grad_tol > 0:
            raise ConfigError("grad_tol must be positive")
        if not self.sgd_lr > 0:
            raise ConfigError("sgd_lr must be positive")
        if not 0.0 <= self.hybrid_switch_frac <= 1.0:
            raise ConfigError("hybrid_switch_frac must lie in [0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainTrace:
    """Per-iteration records plus per-round weight snapshots."""

    records: list = field(default_factory=list)
    weight_snapshots: list = field(default_factory=list)
    round_start_values: list = field(default_factory=list)
    round_end_values: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def record(self, phase, value, gnorm, round_=0):
        if not np.isfinite(value):
            raise NumericalError(f"non-finite objective in {phase} phase")
        self.records.append({"iter": len(self.records), "phase": phase, "round": round_,
                             "obj": float(value), "gnorm": float(gnorm),
                             "t": time.perf_counter() - self._t0})

    def values(self, phase=None):
        return [r["obj"] for r in self.records if phase is None or r["phase"] == phase]

    def to_log(self):
        return "".join(f"iter={r['iter']} obj={r['obj']:.12g} gnorm={r['gnorm']:.6g} "
                       f"t={r['t']:.4f}\n" for r in self.records)


def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / np.dot(y, s)
        a = rho * np.dot(s, q)
        alphas.append((rho, a))
        q -= a * y
    s, y = S[-1], Y[-1]
    q *= np.dot(s, y) / np.dot(y, y)
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return -q


def lbfgs_minimize(f, W0, cfg, trace=None, max_iters=None, round_=0):
    """Limited-memory BFGS with backtracking Armijo line search.

    ``f(W)`` returns ``(value, grad)``. Stops when the gradient norm falls
    below ``cfg.grad_tol`` times its initial value, after ``max_iters``
    iterations, or when the line search cannot decrease the objective (the
    best iterate is returned and a warning is added to the trace).
    """
    trace = trace if trace is not None else TrainTrace()
    max_iters = cfg.max_iters if max_iters is None else max_iters
    shape = np.shape(W0)
    x = np.array(W0, dtype=np.float64).ravel()
    fx, g = f(x.reshape(shape))
    g = np.asarray(g, dtype=np.float64).ravel()
    gnorm0 = np.linalg.norm(g)
    trace.record("lbfgs", fx, gnorm0, round_)
    S, Y = deque(maxlen=cfg.lbfgs_memory), deque(maxlen=cfg.lbfgs_memory)
    for _ in range(max_iters):
        gnorm = np.linalg.norm(g)
        if gnorm == 0.0 or gnorm < cfg.grad_tol * gnorm0:
            break
        if S:
            d = _two_loop(g, S, Y)
            slope = np.dot(g, d)
            if not slope < 0:
                S.clear()
                Y.clear()
        if not S:
            d = -g / gnorm
            slope = np.dot(g, d)
        t = 1.0
        for _ in range(MAX_BACKTRACKS + 1):
            x_new = x + t * d
            f_new, g_new = f(x_new.reshape(shape))
            if np.isfinite(f_new) and f_new <= fx + ARMIJO_C1 * t * slope:
                break
            t *= BACKTRACK
        else:
            trace.warnings.append("line search failed; returning best iterate")
            log.warning("line search failed after %d backtracks", MAX_BACKTRACKS)
            break
        g_new = np.asarray(g_new, dtype=np.float64).ravel()
        s, y = x_new - x, g_new - g
        if np.dot(s, y) > 1e-12 * np.dot(y, y):
            S.append(s)
            Y.append(y)
        x, fx, g = x_new, f_new, g_new
        trace.record("lbfgs", fx, np.linalg.norm(g), round_)
    return x.reshape(shape), trace


def sgd_minimize(f_batch, W0, cfg, n_instances=None, trace=None, epochs=None, round_=0):
    """Mini-batch SGD with a halving learning rate and a doubling batch size.

    ``f_batch(W, rows)`` returns the full-scale objective estimate on
    ``rows`` (``rows=None`` means all instances). One epoch is one pass over
    a seeded permutation; the batch size doubles after every epoch up to the
    full set.
    """
    trace = trace if trace is not None else TrainTrace()
    n = n_instances if n_instances is not None else f_batch.n_instances
    epochs = cfg.max_iters if epochs is None else epochs
    rng = np.random.default_rng(cfg.seed)
    W = np.array(W0, dtype=np.float64)
    f0, g0 = f_batch(W)
    trace.record("sgd", f0, np.linalg.norm(g0), round_)
    limit = DIVERGENCE_FACTOR * max(abs(f0), np.finfo(float).tiny)
    batch = min(cfg.batch_size, n)
    for epoch in range(epochs):
        lr = cfg.sgd_lr * 0.5 ** (epoch // cfg.sgd_lr_halve_every)
        perm = rng.permutation(n)
        for start in range(0, n, batch):
            _, g = f_batch(W, np.sort(perm[start:start + batch]))
            W = W - (lr / n) * g
        fv, gv = f_batch(W)
        if not np.isfinite(fv) or fv > limit:
            raise NumericalError(f"SGD diverged at epoch {epoch}: objective {fv:.3g}")
        trace.record("sgd", fv, np.linalg.norm(gv), round_)
        batch = min(2 * batch, n)
    return W, trace


def hybrid_minimize(f, f_batch, W0, cfg, trace=None, round_=0):
    """SGD for a fraction of the iteration budget, then L-BFGS from its iterate."""
    trace = trace if trace is not None else TrainTrace()
    n_sgd = int(round(cfg.hybrid_switch_frac * cfg.max_iters))
    if n_sgd == 0:
        return lbfgs_minimize(f, W0, cfg, trace, round_=round_)
    W, trace = sgd_minimize(f_batch, W0, cfg, trace=trace, epochs=n_sgd, round_=round_)
    if n_sgd >= cfg.max_iters:
        return W, trace
    return lbfgs_minimize(f, W, cfg, trace, max_iters=cfg.max_iters - n_sgd, round_=round_)


def minimize(obj, W0, cfg, trace=None, round_=0):
    if cfg.method == "lbfgs":
        return lbfgs_minimize(obj, W0, cfg, trace, round_=round_)
    if cfg.method == "sgd":
        return sgd_minimize(obj, W0, cfg, trace=trace, round_=round_)
    return hybrid_minimize(obj, obj, W0, cfg, trace, round_=round_)


def train(data, vocab, loss_cfg, solver_cfg, *, significance=0.05, open_sample=0,
          neighbors=None, threads=1):
    """Alternate W minimization with class-weight refits.

    W starts at zero and the weights at one. Each round minimizes the
    objective under the current weights and then refits the weights on the
    new embedding.

    Returns
    -------
    W : (p, d) ndarray
    weights : ClassWeights
        The weights fitted after the last round.
    trace : TrainTrace
    """
    data.check_source(vocab)
    if neighbors is None:
        neighbors = build_neighbor_sets(vocab, loss_cfg.a_v, loss_cfg.b_s, threads=threads)
    trace = TrainTrace()
    W = np.zeros((data.p, vocab.dim))
    weights = ClassWeights.uniform(vocab.source_ids.size)
    for r in range(solver_cfg.weight_rounds):
        obj = Objective(data, vocab, neighbors, weights, loss_cfg)
        trace.round_start_values.append(obj(W).value)
        W, trace = minimize(obj, W, solver_cfg, trace, round_=r)
        trace.round_end_values.append(obj(W).value)
        weights = compute_all_weights(W, data, vocab, significance, open_sample, solver_cfg.seed)
        trace.weight_snapshots.append(weights)
        for label, why in weights.fallbacks:
            trace.warnings.append(f"round {r}: class {label}: {why}")
    return W, weights, trace
