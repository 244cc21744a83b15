"""Conservative learning: the minimal weight change that fits the current item.

Two rules live here.  :func:`linear_cl_update` is the exact rule for a
single linear layer.  :func:`conservative_update` is the first-order rule
for the multiplier network:

1. forward pass with the current weights;
2. gamma from the output discrepancy (one CG step on G gamma = delta);
3. Delta_c = gamma c*^T;
4. alpha = b* o (W_c^T gamma), beta = a* o (W_c^T gamma);
5. Delta_a = alpha a^T, Delta_b = beta b^T.

This is the readable reference path.  Training loops use the compiled
kernel in :mod:`strassen_cl._kernel`, which performs the same arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NormalizationError
from .network import ForwardState, TrainingItem, forward
from .tensor_core import WeightSet

# numerical floors, not tuning knobs
DELTA_FLOOR = 1e-28
CURVATURE_FLOOR = 1e-28


class UpdateMode(enum.Enum):
    CG1 = "cg1"
    DIAG = "diag"


@dataclass(frozen=True)
class UpdateIntermediates:
    delta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    skipped: bool


def linear_cl_update(W, x, y) -> np.ndarray:
    """W' = W + (y - W x) x^T for a unit vector x.

    W' is the matrix closest to W in Frobenius norm with W' x = y.
    """
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if abs(x @ x - 1.0) > 1e-12:
        raise NormalizationError(f"x must have unit norm, got x.x = {x @ x!r}")
    return W + np.outer(y - W @ x, x)


def apply_G(w: WeightSet, fs: ForwardState, v) -> np.ndarray:
    """G v with G = |c*|^2 I + W_c diag(a*^2 + b*^2) W_c^T, never forming G."""
    v = np.asarray(v, dtype=np.float64)
    s = fs.a_star_tilde**2 + fs.b_star_tilde**2
    return (fs.c_star_tilde @ fs.c_star_tilde) * v + w.W_c @ (s * (w.W_c.T @ v))


def compute_gamma(w: WeightSet, fs: ForwardState, c, mode: UpdateMode = UpdateMode.CG1):
    """Return ``(gamma, skipped)``.

    CG1 takes a single conjugate-gradient step from gamma = 0, which gives
    gamma = (d.d / d.G d) d.  DIAG keeps only the identity part of G.
    Degenerate denominators give gamma = 0 and ``skipped=True``.
    """
    delta = np.asarray(c, dtype=np.float64) - fs.c_tilde
    dd = delta @ delta
    zero = np.zeros_like(delta)
    if dd <= DELTA_FLOOR:
        return zero, True
    if mode is UpdateMode.CG1:
        dGd = delta @ apply_G(w, fs, delta)
        if dGd <= CURVATURE_FLOOR * dd:
            return zero, True
        return (dd / dGd) * delta, False
    if mode is UpdateMode.DIAG:
        cc = fs.c_star_tilde @ fs.c_star_tilde
        if cc <= CURVATURE_FLOOR:
            return zero, True
        return delta / cc, False
    raise ValueError(f"unknown mode {mode!r}")


def backprop_alpha_beta(w: WeightSet, fs: ForwardState, gamma):
    g = w.W_c.T @ np.asarray(gamma, dtype=np.float64)
    return fs.b_star_tilde * g, fs.a_star_tilde * g


def conservative_update(w: WeightSet, item: TrainingItem, mode: UpdateMode = UpdateMode.CG1):
    """One conservative-learning step.  Returns ``(new_weights, intermediates)``."""
    item.validate()
    fs = forward(w, item.a, item.b)
    delta = item.c - fs.c_tilde
    gamma, skipped = compute_gamma(w, fs, item.c, mode)
    if skipped:
        r = w.r
        return w, UpdateIntermediates(delta, gamma, np.zeros(r), np.zeros(r), True)
    alpha, beta = backprop_alpha_beta(w, fs, gamma)
    new = WeightSet(
        w.n,
        w.r,
        w.W_a + np.outer(alpha, item.a),
        w.W_b + np.outer(beta, item.b),
        w.W_c + np.outer(gamma, fs.c_star_tilde),
    )
    return new, UpdateIntermediates(delta, gamma, alpha, beta, False)
