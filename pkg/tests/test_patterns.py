import numpy as np
import pytest

from strucnet import DimensionError, SparsityPattern, stack_patterns


def test_bounds_are_validated():
    with pytest.raises(DimensionError):
        SparsityPattern.from_coords(2, 2, [(2, 0)])
    with pytest.raises(DimensionError):
        SparsityPattern.from_coords(2, 2, [(0, -1)])


def test_set_semantics_collapse_duplicates():
    p = SparsityPattern.from_coords(3, 3, [(0, 1), (0, 1), (2, 2)])
    assert p.nnz == 2


def test_identity_and_dense_roundtrip():
    p = SparsityPattern.identity(3)
    assert p.nnz == 3
    m = p.to_dense()
    assert m.dtype == bool
    assert np.array_equal(m, np.eye(3, dtype=bool))
    assert SparsityPattern.from_matrix(np.eye(3)) == p


def test_from_matrix_thresholds():
    m = np.array([[0.0, 1e-12], [2.0, 0.0]])
    assert SparsityPattern.from_matrix(m).nnz == 2
    assert SparsityPattern.from_matrix(m, tol=1e-9).nnz == 1


def test_stack_requires_matching_columns():
    a = SparsityPattern.from_coords(2, 3, [(0, 0)])
    b = SparsityPattern.from_coords(1, 3, [(0, 2)])
    stacked = stack_patterns(a, b)
    assert stacked.shape == (3, 3)
    assert (2, 2) in stacked
    with pytest.raises(DimensionError):
        stack_patterns(a, SparsityPattern.from_coords(1, 2, []))


def test_row_and_col_support():
    p = SparsityPattern.from_coords(2, 3, [(0, 0), (0, 2), (1, 2)])
    assert p.row_support(0) == {0, 2}
    assert p.col_support(2) == {0, 1}
