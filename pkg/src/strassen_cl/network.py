"""The three-layer multiplier network: pooling, multipliers, pooling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .tensor_core import WeightSet, roll, unroll

ITEM_TOL = 1e-12


@dataclass(frozen=True)
class ForwardState:
    a_star_tilde: np.ndarray
    b_star_tilde: np.ndarray
    c_star_tilde: np.ndarray
    c_tilde: np.ndarray


@dataclass(frozen=True)
class TrainingItem:
    """Unit-norm unrolled inputs a, b and their unrolled product c."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @classmethod
    def from_matrices(cls, A, B) -> "TrainingItem":
        A = np.asarray(A, dtype=np.float64)
        B = np.asarray(B, dtype=np.float64)
        A = A / np.linalg.norm(A)
        B = B / np.linalg.norm(B)
        return cls(unroll(A), unroll(B), unroll(A @ B))

    def validate(self) -> None:
        if not self.a.shape == self.b.shape == self.c.shape:
            raise InputError("a, b, c must have equal lengths")
        if abs(self.a @ self.a - 1.0) > ITEM_TOL or abs(self.b @ self.b - 1.0) > ITEM_TOL:
            raise InputError("a and b must have unit norm")
        if np.max(np.abs(self.c - unroll(roll(self.a) @ roll(self.b)))) > ITEM_TOL:
            raise InputError("c is not the product of a and b")


def init_weights(n: int, r: int, scale: float, rng: np.random.Generator) -> WeightSet:
    """Independent uniform entries on [-scale, scale]; drawn in order W_a, W_b, W_c."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if not scale > 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    m = n * n
    W_a = rng.uniform(-scale, scale, size=(r, m))
    W_b = rng.uniform(-scale, scale, size=(r, m))
    W_c = rng.uniform(-scale, scale, size=(m, r))
    return WeightSet(n, r, W_a, W_b, W_c)


def forward(w: WeightSet, a, b) -> ForwardState:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m = w.n * w.n
    if a.shape != (m,) or b.shape != (m,):
        raise DimensionError(f"inputs must have length {m}, got {a.shape} and {b.shape}")
    a_star = w.W_a @ a
    b_star = w.W_b @ b
    c_star = a_star * b_star
    return ForwardState(a_star, b_star, c_star, w.W_c @ c_star)


def strassen_fixture() -> WeightSet:
    """Strassen's 1969 rank-7 scheme for 2 x 2 matrices.

    Multipliers, with row-major a = (a11, a12, a21, a22):
        m1 = (a11 + a22)(b11 + b22)    m5 = (a11 + a12) b22
        m2 = (a21 + a22) b11           m6 = (a21 - a11)(b11 + b12)
        m3 = a11 (b12 - b22)           m7 = (a12 - a22)(b21 + b22)
        m4 = a22 (b21 - b11)
    Outputs:
        c11 = m1 + m4 - m5 + m7        c21 = m2 + m4
        c12 = m3 + m5                  c22 = m1 - m2 + m3 + m6
    """
    W_a = [
        [1, 0, 0, 1],
        [0, 0, 1, 1],
        [1, 0, 0, 0],
        [0, 0, 0, 1],
        [1, 1, 0, 0],
        [-1, 0, 1, 0],
        [0, 1, 0, -1],
    ]
    W_b = [
        [1, 0, 0, 1],
        [1, 0, 0, 0],
        [0, 1, 0, -1],
        [-1, 0, 1, 0],
        [0, 0, 0, 1],
        [1, 1, 0, 0],
        [0, 0, 1, 1],
    ]
    W_c = [
        [1, 0, 0, 1, -1, 0, 1],
        [0, 0, 1, 0, 1, 0, 0],
        [0, 1, 0, 1, 0, 0, 0],
        [1, -1, 1, 0, 0, 1, 0],
    ]
    return WeightSet.from_arrays(W_a, W_b, W_c)
