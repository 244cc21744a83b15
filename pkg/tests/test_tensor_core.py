import itertools

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from strassen_cl import (
    ConditioningError,
    DimensionError,
    SizeError,
    WeightFileError,
    WeightSet,
    build_matmul_tensor,
    decomposition_error,
    reconstruct_tensor,
    standard_weights,
    strassen_fixture,
    transform_decomposition,
)
from strassen_cl.tensor_core import dumps_weights, load_weights, loads_weights, save_weights


def symbolic_matmul_tensor(n):
    """Coefficient of a[k] b[l] in c[i] from a symbolic expansion of C = AB."""
    m = n * n
    a = sympy.symbols(f"a0:{m}")
    b = sympy.symbols(f"b0:{m}")
    A = sympy.Matrix(n, n, a)
    B = sympy.Matrix(n, n, b)
    C = list(A * B)
    T = np.zeros((m, m, m))
    for i, k, l in itertools.product(range(m), repeat=3):
        T[i, k, l] = float(sympy.expand(C[i]).coeff(a[k]).coeff(b[l]))
    return T


def direct_error(w, T):
    m = w.n * w.n
    total = 0.0
    for i, k, l in itertools.product(range(m), repeat=3):
        s = sum(w.W_c[i, j] * w.W_a[j, k] * w.W_b[j, l] for j in range(w.r))
        total += (T[i, k, l] - s) ** 2
    return np.sqrt(total / m**3)


def random_weights(rng, n, r):
    m = n * n
    return WeightSet(n, r, rng.normal(size=(r, m)), rng.normal(size=(r, m)), rng.normal(size=(m, r)))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_matmul_tensor_matches_symbolic_expansion(n):
    np.testing.assert_array_equal(build_matmul_tensor(n).entries, symbolic_matmul_tensor(n))


def test_matmul_tensor_n2_entries():
    T = build_matmul_tensor(2).entries
    assert T[0, 0, 0] == 1.0
    assert T[0, 0, 1] == 0.0


@pytest.mark.parametrize("n", range(1, 7))
def test_matmul_tensor_counts(n):
    T = build_matmul_tensor(n).entries
    assert T.shape == (n * n,) * 3
    assert set(np.unique(T)) <= {0.0, 1.0}
    assert T.sum() == n**3


@pytest.mark.parametrize("n", [0, 7, -1])
def test_matmul_tensor_rejects_size(n):
    with pytest.raises(SizeError):
        build_matmul_tensor(n)


def test_zero_weights_error_n2():
    eps = decomposition_error(WeightSet.zeros(2, 7), build_matmul_tensor(2))
    assert eps == pytest.approx(0.3535533906, abs=1e-10)
    assert eps == pytest.approx(direct_error(WeightSet.zeros(2, 7), build_matmul_tensor(2).entries), abs=1e-16)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_standard_weights_exact(n):
    w = standard_weights(n)
    assert decomposition_error(w, build_matmul_tensor(n)) == 0.0
    np.testing.assert_array_equal(reconstruct_tensor(w), build_matmul_tensor(n).entries)


def test_error_agrees_with_direct_summation():
    rng = np.random.default_rng(3)
    T = build_matmul_tensor(2)
    for r in (1, 5, 7):
        w = random_weights(rng, 2, r)
        assert decomposition_error(w, T) == pytest.approx(direct_error(w, T.entries), rel=1e-13)


def test_error_dimension_mismatch():
    with pytest.raises(DimensionError):
        decomposition_error(WeightSet.zeros(2, 3), build_matmul_tensor(3))


def test_reconstruct_empty_and_zero():
    assert not reconstruct_tensor(WeightSet.zeros(2, 0)).any()
    assert not reconstruct_tensor(WeightSet.zeros(2, 4)).any()


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_error_equals_frobenius_distance(n, r, seed):
    w = random_weights(np.random.default_rng(seed), n, r)
    T = build_matmul_tensor(n)
    eps = decomposition_error(w, T)
    frob2 = np.sum((T.entries - reconstruct_tensor(w)) ** 2)
    assert eps**2 * (n * n) ** 3 == pytest.approx(frob2, rel=1e-14)


def test_exact_decomposition_multiplies_random_pairs():
    rng = np.random.default_rng(11)
    for w in (standard_weights(2), standard_weights(3), strassen_fixture()):
        n = w.n
        for _ in range(100):
            A, B = rng.uniform(-1, 1, (2, n, n))
            a, b = A.ravel(), B.ravel()
            out = w.W_c @ ((w.W_a @ a) * (w.W_b @ b))
            assert np.max(np.abs(out - (A @ B).ravel())) <= 1e-12


def _orthogonal(rng, n):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q


def test_identity_transform_is_exact():
    w = strassen_fixture()
    I = np.eye(2)
    assert transform_decomposition(w, I, I, I).equals(w)


def test_orthogonal_transform_preserves_exactness():
    rng = np.random.default_rng(5)
    T = build_matmul_tensor(2)
    for _ in range(20):
        U, V, X = (_orthogonal(rng, 2) for _ in range(3))
        assert decomposition_error(transform_decomposition(strassen_fixture(), U, V, X), T) <= 1e-12


def test_transform_preserves_exactness_n3():
    rng = np.random.default_rng(6)
    U, V, X = (_orthogonal(rng, 3) for _ in range(3))
    w = transform_decomposition(standard_weights(3), U, V, X)
    assert decomposition_error(w, build_matmul_tensor(3)) <= 1e-12


def test_transform_composition():
    rng = np.random.default_rng(8)
    w = random_weights(rng, 2, 7)
    U1, V1, X1, U2, V2, X2 = (rng.uniform(-1, 1, (2, 2)) + 2 * np.eye(2) for _ in range(6))
    two_step = transform_decomposition(transform_decomposition(w, U1, V1, X1), U2, V2, X2)
    one_step = transform_decomposition(w, U2 @ U1, V2 @ V1, X2 @ X1)
    for name in ("W_a", "W_b", "W_c"):
        np.testing.assert_allclose(getattr(two_step, name), getattr(one_step, name), atol=1e-12)


def test_transform_rejects_singular():
    I = np.eye(2)
    with pytest.raises(ConditioningError):
        transform_decomposition(strassen_fixture(), np.array([[1.0, 1.0], [1.0, 1.0]]), I, I)
    with pytest.raises(ConditioningError):
        transform_decomposition(strassen_fixture(), np.diag([1.0, 1e-9]), I, I)


def test_weight_file_round_trip(tmp_path):
    w = random_weights(np.random.default_rng(0), 3, 23)
    path = tmp_path / "w.json"
    save_weights(w, path)
    assert load_weights(path).equals(w)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=8, max_size=8))
def test_weight_file_round_trip_arbitrary_floats(vals):
    v = np.array(vals)
    w = WeightSet(1, 8, v.reshape(8, 1), v[::-1].reshape(8, 1).copy(), v.reshape(1, 8))
    assert loads_weights(dumps_weights(w)).equals(w)


def test_weight_file_uses_17_digits():
    w = WeightSet(1, 1, np.array([[0.1]]), np.array([[1.0]]), np.array([[1 / 3]]))
    text = dumps_weights(w)
    assert "0.10000000000000001" in text
    assert "0.33333333333333331" in text


@pytest.mark.parametrize(
    "text, field, line",
    [
        ('{"n": 2, "r": 1,\n "W_a": [[1, 2', None, 2),
        ('{"n": 2, "r": 1, "W_a": [[1,2,3,4]], "W_b": [[1,2,3,4]]}', "W_c", None),
        ('{"n": 2, "r": 1, "W_a": [[1,2,3]], "W_b": [[1,2,3,4]], "W_c": [[1],[1],[1],[1]]}', "W_a", None),
        ('{"n": 9, "r": 1, "W_a": [], "W_b": [], "W_c": []}', "n", None),
        ('{"n": 1, "r": 1, "W_a": [["x"]], "W_b": [[1]], "W_c": [[1]]}', "W_a", None),
    ],
)
def test_weight_file_diagnostics(text, field, line):
    with pytest.raises(WeightFileError) as info:
        loads_weights(text)
    assert info.value.field == field
    if line is not None:
        assert info.value.line == line
