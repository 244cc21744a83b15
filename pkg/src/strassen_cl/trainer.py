"""Online training runs: item sampling, the training loop, run classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernel
from .cl_update import CURVATURE_FLOOR, DELTA_FLOOR, UpdateMode
from .network import TrainingItem, init_weights
from .tensor_core import MAX_N, WeightSet, build_matmul_tensor, decomposition_error
from .errors import DimensionError, SizeError

_KERNEL_MODE = {UpdateMode.CG1: _kernel.MODE_CG1, UpdateMode.DIAG: _kernel.MODE_DIAG}


class Outcome(enum.Enum):
    CONVERGED = "Converged"
    NON_CONVERGED = "NonConverged"


class Classification(enum.Enum):
    CONVERGED = "Converged"
    BORDER_SUSPECT = "BorderSuspect"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class RunConfig:
    n: int
    r: int
    seed: int
    max_items: int
    eps_target: float = 1e-14
    eval_every: int = 1000
    init_scale: float = 1.0
    mode: UpdateMode = UpdateMode.CG1

    def __post_init__(self):
        if not 1 <= self.n <= MAX_N:
            raise SizeError(f"n must be in [1, {MAX_N}], got {self.n}")
        if self.r < 1:
            raise ValueError(f"rank must be >= 1, got {self.r}")
        # max_items == 0 means evaluate the initial weights only
        if self.max_items < 0:
            raise ValueError(f"max_items must be >= 0, got {self.max_items}")
        if not self.eps_target > 0:
            raise ValueError(f"eps_target must be > 0, got {self.eps_target}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be > 0, got {self.init_scale}")


class TraceSample(NamedTuple):
    items_seen: int
    epsilon: float
    max_weight: float
    skipped_count: int


@dataclass
class RunTrace:
    config: RunConfig
    samples: list[TraceSample] = field(default_factory=list)
    final_epsilon: float = math.nan
    items_used: int = 0
    outcome: Outcome = Outcome.NON_CONVERGED
    classification: Classification = Classification.INDETERMINATE
    weight_growth_factor: float = 1.0

    @property
    def skipped_count(self) -> int:
        return self.samples[-1].skipped_count if self.samples else 0

    def epsilon_at(self, items: int) -> float:
        """epsilon of the last sample taken at or before ``items``."""
        eps = self.samples[0].epsilon
        for s in self.samples:
            if s.items_seen > items:
                break
            eps = s.epsilon
        return eps


def sample_item(n: int, rng: np.random.Generator) -> TrainingItem:
    """Draw A and B uniformly on [-1, 1]^(n x n), scale each to unit norm."""
    A = _draw_nonzero(n, rng)
    B = _draw_nonzero(n, rng)
    return TrainingItem.from_matrices(A, B)


def _draw_nonzero(n, rng):
    while True:
        M = rng.uniform(-1.0, 1.0, size=(n, n))
        if np.any(M):
            return M


def sample_batch(n: int, k: int, rng: np.random.Generator):
    """``k`` items as row-stacked arrays ``(a, b, c)`` of shape (k, n^2).

    Consumes the generator exactly as ``k`` calls to :func:`sample_item`
    would (barring an all-zero draw, which is redrawn at the end).
    """
    raw = rng.uniform(-1.0, 1.0, size=(k, 2, n, n))
    norms = np.sqrt(np.sum(raw * raw, axis=(2, 3)))
    for t, s in zip(*np.nonzero(norms == 0.0)):
        raw[t, s] = _draw_nonzero(n, rng)
        norms[t, s] = np.linalg.norm(raw[t, s])
    A = raw[:, 0] / norms[:, 0, None, None]
    B = raw[:, 1] / norms[:, 1, None, None]
    C = A @ B
    m = n * n
    return (
        np.ascontiguousarray(A.reshape(k, m)),
        np.ascontiguousarray(B.reshape(k, m)),
        np.ascontiguousarray(C.reshape(k, m)),
    )


def max_weight_magnitude(w: WeightSet) -> float:
    return float(max(np.max(np.abs(M), initial=0.0) for M in (w.W_a, w.W_b, w.W_c)))


def run_training(cfg: RunConfig, initial_weights: WeightSet | None = None):
    """Train from random weights until epsilon < eps_target or the item budget is spent.

    One generator seeded with ``cfg.seed`` draws the weights first, then the
    items.  Supplying ``initial_weights`` skips the weight draw.  epsilon is
    evaluated at item 0, every ``eval_every`` items and at the budget end.
    Returns ``(weights, trace)``.
    """
    rng = np.random.default_rng(cfg.seed)
    if initial_weights is None:
        w = init_weights(cfg.n, cfg.r, cfg.init_scale, rng)
    else:
        if (initial_weights.n, initial_weights.r) != (cfg.n, cfg.r):
            raise DimensionError(
                f"initial weights have (n, r) = ({initial_weights.n}, {initial_weights.r}),"
                f" config has ({cfg.n}, {cfg.r})"
            )
        w = initial_weights.copy()
    tensor = build_matmul_tensor(cfg.n)
    mode = _KERNEL_MODE[cfg.mode]
    trace = RunTrace(cfg)
    start_weight = max_weight_magnitude(w)

    seen = 0
    skips = 0
    eps = decomposition_error(w, tensor)
    trace.samples.append(TraceSample(0, eps, start_weight, 0))
    while eps >= cfg.eps_target and seen < cfg.max_items:
        k = min(cfg.eval_every, cfg.max_items - seen)
        a, b, c = sample_batch(cfg.n, k, rng)
        skips += _kernel.train_batch(
            w.W_a, w.W_b, w.W_c, a, b, c, mode, DELTA_FLOOR, CURVATURE_FLOOR
        )
        seen += k
        eps = decomposition_error(w, tensor)
        trace.samples.append(TraceSample(seen, eps, max_weight_magnitude(w), skips))

    trace.final_epsilon = eps
    trace.items_used = seen
    trace.outcome = Outcome.CONVERGED if eps < cfg.eps_target else Outcome.NON_CONVERGED
    final_weight = trace.samples[-1].max_weight
    if start_weight > 0:
        trace.weight_growth_factor = final_weight / start_weight
    else:
        trace.weight_growth_factor = math.inf if final_weight > 0 else 1.0
    trace.classification = classify_run(trace)
    return w, trace


def classify_run(trace: RunTrace, growth_threshold: float = 20.0) -> Classification:
    """Heuristic label for a finished run.

    Non-converged runs whose weights grew by ``growth_threshold`` or more
    while epsilon still fell at least tenfold look like border
    approximations: better fits bought with diverging weights.
    """
    if trace.outcome is Outcome.CONVERGED:
        return Classification.CONVERGED
    first = trace.samples[0].epsilon
    improved = first >= 10.0 * trace.final_epsilon
    if trace.weight_growth_factor >= growth_threshold and improved:
        return Classification.BORDER_SUSPECT
    return Classification.INDETERMINATE
