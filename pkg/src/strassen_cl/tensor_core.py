"""The matrix multiplication tensor and decompositions of it.

Matrices are unrolled row-major: entry (p, q) of an n x n matrix sits at
flat position ``p * n + q`` (0-based).  A decomposition of M_n with ``r``
multipliers is a :class:`WeightSet` holding ``W_a`` (r x n^2),
``W_b`` (r x n^2) and ``W_c`` (n^2 x r), so that

    M_n[i, k, l] ~= sum_j W_c[i, j] * W_a[j, k] * W_b[j, l].
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConditioningError, DimensionError, SizeError, WeightFileError

MAX_N = 6
COND_LIMIT = 1e8


def unroll(mat: np.ndarray) -> np.ndarray:
    """Flatten an n x n matrix row-major."""
    return np.ascontiguousarray(mat, dtype=np.float64).reshape(-1)


def roll(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`unroll`."""
    vec = np.asarray(vec, dtype=np.float64)
    n = int(round(np.sqrt(vec.size)))
    if n * n != vec.size:
        raise DimensionError(f"length {vec.size} is not a perfect square")
    return vec.reshape(n, n)


def _check_n(n):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise SizeError(f"n must be an integer, got {n!r}")
    if not 1 <= n <= MAX_N:
        raise SizeError(f"n must be in [1, {MAX_N}], got {n}")
    return int(n)


@dataclass(frozen=True)
class MatMulTensor:
    n: int
    entries: np.ndarray

    @property
    def shape(self):
        return self.entries.shape


@dataclass(frozen=True, eq=False)
class WeightSet:
    """Weights of the multiplier network, i.e. a rank-r decomposition."""

    n: int
    r: int
    W_a: np.ndarray
    W_b: np.ndarray
    W_c: np.ndarray

    def __post_init__(self):
        m = self.n * self.n
        for name, arr, shape in (
            ("W_a", self.W_a, (self.r, m)),
            ("W_b", self.W_b, (self.r, m)),
            ("W_c", self.W_c, (m, self.r)),
        ):
            if arr.shape != shape:
                raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise DimensionError(f"{name} has non-finite entries")

    @classmethod
    def from_arrays(cls, W_a, W_b, W_c) -> "WeightSet":
        W_a = np.array(W_a, dtype=np.float64, ndmin=2)
        W_b = np.array(W_b, dtype=np.float64, ndmin=2)
        W_c = np.array(W_c, dtype=np.float64, ndmin=2)
        r, m = W_a.shape
        n = int(round(np.sqrt(m)))
        if n * n != m:
            raise DimensionError(f"W_a has {m} columns, not a perfect square")
        return cls(n, r, W_a, W_b, W_c)

    @classmethod
    def zeros(cls, n: int, r: int) -> "WeightSet":
        m = n * n
        return cls(n, r, np.zeros((r, m)), np.zeros((r, m)), np.zeros((m, r)))

    def copy(self) -> "WeightSet":
        return WeightSet(self.n, self.r, self.W_a.copy(), self.W_b.copy(), self.W_c.copy())

    def equals(self, other: "WeightSet") -> bool:
        """Exact (bitwise value) equality."""
        return (
            self.n == other.n
            and self.r == other.r
            and np.array_equal(self.W_a, other.W_a)
            and np.array_equal(self.W_b, other.W_b)
            and np.array_equal(self.W_c, other.W_c)
        )


def build_matmul_tensor(n: int) -> MatMulTensor:
    """Return M_n, the 0/1 tensor with c = sum_{k,l} M[:, k, l] a[k] b[l]."""
    n = _check_n(n)
    m = n * n
    T = np.zeros((m, m, m))
    p, s, q = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    T[(p * n + q).ravel(), (p * n + s).ravel(), (s * n + q).ravel()] = 1.0
    return MatMulTensor(n, T)


def standard_weights(n: int) -> WeightSet:
    """The schoolbook rank-n^3 decomposition, one multiplier per (p, m, q)."""
    n = _check_n(n)
    m = n * n
    r = n**3
    W_a = np.zeros((r, m))
    W_b = np.zeros((r, m))
    W_c = np.zeros((m, r))
    j = 0
    for p in range(n):
        for s in range(n):
            for q in range(n):
                W_a[j, p * n + s] = 1.0
                W_b[j, s * n + q] = 1.0
                W_c[p * n + q, j] = 1.0
                j += 1
    return WeightSet(n, r, W_a, W_b, W_c)


def reconstruct_tensor(w: WeightSet) -> np.ndarray:
    """T[i, k, l] = sum_j W_c[i, j] W_a[j, k] W_b[j, l]."""
    return np.einsum("ij,jk,jl->ikl", w.W_c, w.W_a, w.W_b)


def decomposition_error(w: WeightSet, t: MatMulTensor) -> float:
    """Root-mean-square entrywise error between ``t`` and the decomposition."""
    if w.n != t.n:
        raise DimensionError(f"weights are for n={w.n}, tensor for n={t.n}")
    m = w.n * w.n
    # mode-1 unfolding: W_c @ khatri_rao(W_a, W_b)^T
    kr = (w.W_a[:, :, None] * w.W_b[:, None, :]).reshape(w.r, m * m)
    resid = t.entries.reshape(m, m * m) - w.W_c @ kr
    return float(np.sqrt(np.sum(resid * resid) / m**3))


def _kron_map(left, right):
    """Matrix of vec -> unroll(left @ roll(vec) @ right) under row-major unrolling."""
    return np.kron(left, right.T)


def _checked_inverse(mat, name):
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {mat.shape}")
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(f"{name} has condition number {cond:.3g} > {COND_LIMIT:g}")
    return mat, np.linalg.inv(mat)


def transform_decomposition(w: WeightSet, U, V, X) -> WeightSet:
    """Move a decomposition along the symmetry A -> U A V^-1, B -> V B X^-1, C -> U C X^-1.

    Exact decompositions stay exact.  Transforms compose as
    ``T(U2, V2, X2) o T(U1, V1, X1) = T(U2 U1, V2 V1, X2 X1)``.
    """
    U, U_inv = _checked_inverse(U, "U")
    V, V_inv = _checked_inverse(V, "V")
    X, X_inv = _checked_inverse(X, "X")
    if not U.shape == V.shape == X.shape == (w.n, w.n):
        raise DimensionError(f"transform matrices must be {w.n}x{w.n}")
    S_A = _kron_map(U_inv, V)
    S_B = _kron_map(V_inv, X)
    S_C = _kron_map(U, X_inv)
    return WeightSet(w.n, w.r, w.W_a @ S_A, w.W_b @ S_B, S_C @ w.W_c)


# -- weight file I/O ---------------------------------------------------------
#
# JSON document:
#   {"n": <int>, "r": <int>,
#    "W_a": [[...], ...],   r rows of n^2 numbers
#    "W_b": [[...], ...],   r rows of n^2 numbers
#    "W_c": [[...], ...]}   n^2 rows of r numbers
# Numbers are written with 17 significant digits, so values round-trip exactly.


def _fmt(x):
    return format(float(x), ".17g")


def _fmt_matrix(mat):
    rows = ["[" + ", ".join(_fmt(x) for x in row) + "]" for row in mat]
    return "[\n    " + ",\n    ".join(rows) + "\n  ]" if rows else "[]"


def dumps_weights(w: WeightSet) -> str:
    parts = [f'  "n": {w.n}', f'  "r": {w.r}']
    for name in ("W_a", "W_b", "W_c"):
        parts.append(f'  "{name}": {_fmt_matrix(getattr(w, name))}')
    return "{\n" + ",\n".join(parts) + "\n}\n"


def save_weights(w: WeightSet, path) -> None:
    Path(path).write_text(dumps_weights(w))


def loads_weights(text: str) -> WeightSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WeightFileError(exc.msg + f" (column {exc.colno})", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise WeightFileError("top level must be an object")
    for key in ("n", "r", "W_a", "W_b", "W_c"):
        if key not in doc:
            raise WeightFileError("missing", field=key)
    n, r = doc["n"], doc["r"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise WeightFileError("must be an integer", field="n")
    if not isinstance(r, int) or isinstance(r, bool) or r < 0:
        raise WeightFileError("must be a nonnegative integer", field="r")
    try:
        _check_n(n)
    except SizeError as exc:
        raise WeightFileError(str(exc), field="n") from None
    m = n * n
    arrays = {}
    for key, shape in (("W_a", (r, m)), ("W_b", (r, m)), ("W_c", (m, r))):
        try:
            arr = np.array(doc[key], dtype=np.float64)
        except (TypeError, ValueError):
            raise WeightFileError("not a numeric nested array", field=key) from None
        if arr.size == 0:
            arr = arr.reshape(shape)
        if arr.shape != shape:
            raise WeightFileError(f"shape {arr.shape}, expected {shape}", field=key)
        if not np.all(np.isfinite(arr)):
            raise WeightFileError("non-finite entries", field=key)
        arrays[key] = arr
    return WeightSet(n, r, arrays["W_a"], arrays["W_b"], arrays["W_c"])


def load_weights(path) -> WeightSet:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise WeightFileError(f"cannot read {path}: {exc.strerror}") from None
    return loads_weights(text)
