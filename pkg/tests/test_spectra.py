import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ht_sentinel.errors import InvalidInputError, NumericFailureError
from ht_sentinel.spectra import Spectrum, WeightMatrix, ecdf_at, esd


def test_identity():
    s = esd(WeightMatrix(np.eye(3)))
    assert np.array_equal(s.eigenvalues, [1.0, 1.0, 1.0])


def test_diagonal_squares():
    s = esd(WeightMatrix(np.diag([1.0, 2.0, 3.0])))
    np.testing.assert_allclose(s.eigenvalues, [1.0, 4.0, 9.0], rtol=1e-14)


def test_wide_matrix_is_transposed():
    s = esd(WeightMatrix([[1.0, 0, 0], [0, 2.0, 0]]))
    assert len(s) == 2
    assert (s.source_rows, s.source_cols) == (3, 2)
    np.testing.assert_allclose(s.eigenvalues, [1.0, 4.0], rtol=1e-14)


def test_rank_deficient_clamped_to_zero():
    w = np.outer(np.arange(1.0, 6.0), np.arange(1.0, 5.0))
    s = esd(WeightMatrix(w))
    assert np.count_nonzero(s.eigenvalues) == 1
    assert s.eigenvalues[0] == 0.0


def test_from_flat():
    w = WeightMatrix.from_flat(2, 3, [1, 2, 3, 4, 5, 6])
    assert w.shape == (2, 3)
    assert w.values[1, 0] == 4.0
    with pytest.raises(InvalidInputError):
        WeightMatrix.from_flat(2, 3, [1, 2, 3])


@pytest.mark.parametrize("bad", [[[np.nan, 1.0]], [[np.inf]], np.zeros((0, 3)), np.zeros(4)])
def test_invalid_matrix(bad):
    with pytest.raises(InvalidInputError):
        WeightMatrix(bad)


def test_matrix_is_read_only():
    w = WeightMatrix(np.ones((2, 2)))
    with pytest.raises(ValueError):
        w.values[0, 0] = 3.0


def test_svd_failure_maps_to_numeric_error(monkeypatch):
    def boom(*a, **k):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(np.linalg, "svd", boom)
    with pytest.raises(NumericFailureError):
        esd(WeightMatrix(np.eye(2)))


def test_spectrum_validation():
    with pytest.raises(InvalidInputError):
        Spectrum.from_values([1.0, -2.0])
    with pytest.raises(InvalidInputError):
        Spectrum.from_values([])
    assert np.array_equal(Spectrum.from_values([4, 1, 9]).eigenvalues, [1, 4, 9])


@pytest.mark.parametrize("x, expected", [(2, 2 / 3), (0.5, 0.0), (10, 1.0), (1, 1 / 3), (4, 1.0)])
def test_ecdf_examples(x, expected):
    assert ecdf_at([1.0, 2.0, 4.0], x) == pytest.approx(expected, abs=1e-15)


def test_ecdf_empty():
    with pytest.raises(InvalidInputError):
        ecdf_at([], 1.0)


shapes = st.tuples(st.integers(1, 12), st.integers(1, 12))
matrices = shapes.flatmap(lambda s: arrays(np.float64, s, elements=st.floats(-100, 100)))


@given(matrices)
def test_orientation_invariance(w):
    a = esd(WeightMatrix(w)).eigenvalues
    b = esd(WeightMatrix(w.T)).eigenvalues
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9 * max(1.0, a.max()))


@given(matrices)
def test_trace_identity(w):
    s = esd(WeightMatrix(w))
    fro = float(np.sum(w * w))
    assert s.eigenvalues.sum() == pytest.approx(fro, rel=1e-9, abs=1e-300)


@given(matrices, st.floats(0.01, 100))
def test_scale_law(w, c):
    a = esd(WeightMatrix(w)).eigenvalues
    b = esd(WeightMatrix(c * w)).eigenvalues
    np.testing.assert_allclose(b, c * c * a, rtol=1e-9, atol=1e-9 * max(1.0, b.max()))


@pytest.mark.parametrize("n, m", [(512, 512), (512, 64), (33, 200)])
def test_trace_identity_large(n, m):
    w = np.random.default_rng(n + m).standard_normal((n, m))
    s = esd(WeightMatrix(w))
    assert len(s) == min(n, m)
    assert s.eigenvalues.sum() == pytest.approx(np.sum(w * w), rel=1e-9)


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50), st.floats(-1, 2e6), st.floats(-1, 2e6))
def test_ecdf_monotone(values, x1, x2):
    v = sorted(values)
    lo, hi = min(x1, x2), max(x1, x2)
    assert ecdf_at(v, lo) <= ecdf_at(v, hi)
    assert ecdf_at(v, v[-1]) == 1.0
    if v[0] > 0:
        assert ecdf_at(v, np.nextafter(v[0], -np.inf)) == 0.0
