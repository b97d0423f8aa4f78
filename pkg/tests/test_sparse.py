import numpy as np
import pytest

from bandcodec import sparse


def test_hand_built_csr():
    s = sparse.sparsify(np.array([[[0, 5, 0], [7, 0, 0]]], dtype=np.float32), tau=1.0)
    assert s.row_ptr.tolist() == [0, 1, 2]
    assert s.col_idx.tolist() == [1, 0]
    assert s.values.tolist() == [5.0, 7.0]
    assert np.array_equal(sparse.densify_array(s), [[[0, 5, 0], [7, 0, 0]]])


def test_all_zero_field_stores_nothing():
    for kw in ({"tau": 0.0}, {"quantile": 0.5}, {}):
        s = sparse.sparsify(np.zeros((2, 3, 4), np.float32), **kw)
        assert s.nnz == 0
        assert np.all(sparse.densify_array(s) == 0)


def test_quantile_keeps_top_value_with_stable_ties():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(1, 10, 100)).astype(np.float32)
    s = sparse.sparsify(v, quantile=0.999)
    assert s.nnz == 1
    # sort-based oracle
    top = int(np.argmax(np.abs(v.ravel())))
    assert sparse.densify_array(s).ravel()[top] == v.ravel()[top]
    ties = np.zeros((1, 2, 5), np.float32)
    ties[0, 0, 3] = ties[0, 1, 1] = -2.0
    s = sparse.sparsify(ties, quantile=0.9)  # keeps exactly 1 of 10
    assert np.flatnonzero(sparse.densify_array(s)).tolist() == [3]


def test_zero_threshold_is_lossless():
    v = np.random.default_rng(1).normal(size=(3, 4, 5)).astype(np.float32)
    assert sparse.densify_array(sparse.sparsify(v, tau=0.0)).tobytes() == v.tobytes()


def test_kept_fraction_and_size_accounting():
    v = np.random.default_rng(2).normal(size=(2, 5, 10)).astype(np.float32)
    s = sparse.sparsify(v, quantile=0.9)
    assert s.kept_fraction == s.nnz / 100
    assert len(sparse.to_bytes(s)) == s.nbytes
    assert s.nbytes == sparse.HEADER.size + 8 * s.row_ptr.size + 4 * (s.col_idx.size + s.values.size)


def test_wire_layout():
    s = sparse.sparsify(np.array([[[0, 5, 0], [7, 0, 0]]], dtype=np.float32), tau=1.0)
    b = sparse.to_bytes(s)
    assert b[:16] == (2).to_bytes(4, "little") + (3).to_bytes(4, "little") + (2).to_bytes(8, "little")
    assert np.frombuffer(b, "<u8", 3, 16).tolist() == [0, 1, 2]


@pytest.mark.parametrize(
    "row_ptr, col_idx, match",
    [
        ([0, 2, 1], [0, 1], "decreases"),
        ([0, 1, 2], [5, 0], "outside"),
        ([0, 2, 2], [1, 1], "strictly increasing"),
        ([1, 1, 2], [0, 1], "row_ptr\\[0\\]"),
        ([0, 1, 3], [0, 1], "nnz"),
    ],
)
def test_malformed_rejected_with_diagnostic(row_ptr, col_idx, match):
    s = sparse.SparseHighBand(
        (1, 2, 3), np.array(row_ptr, np.uint64), np.array(col_idx, np.uint32), np.ones(len(col_idx), np.float32)
    )
    with pytest.raises(sparse.MalformedSparseError, match=match):
        sparse.densify_array(s)


def test_empty_structure():
    s = sparse.empty((2, 2, 2))
    assert np.all(sparse.densify_array(s) == 0)
    back, used = sparse.from_bytes(sparse.to_bytes(s), (2, 2, 2))
    assert back == s and used == len(sparse.to_bytes(s))


def test_from_bytes_rejects_wrong_shape_and_short_data():
    b = sparse.to_bytes(sparse.sparsify(np.ones((1, 2, 3), np.float32), tau=0.5))
    with pytest.raises(sparse.MalformedSparseError):
        sparse.from_bytes(b, (1, 3, 2))
    with pytest.raises(sparse.MalformedSparseError):
        sparse.from_bytes(b[:-1], (1, 2, 3))
