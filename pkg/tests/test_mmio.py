import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ngmres.mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from ngmres.problems import build_convection_diffusion


def _write(tmp_path, text, name="m.mtx"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_identity_coordinate_file(tmp_path):
    path = _write(tmp_path, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 1.0\n")
    A = read_matrix_market(path)
    assert sp.issparse(A)
    np.testing.assert_array_equal(A.toarray(), np.eye(2))


def test_symmetric_storage_is_expanded(tmp_path):
    text = "%%MatrixMarket matrix coordinate real symmetric\n% lower triangle\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n"
    A = read_matrix_market(_write(tmp_path, text)).toarray()
    np.testing.assert_array_equal(A, [[2.0, 1.0], [1.0, 2.0]])


def test_skew_symmetric_storage_is_expanded(tmp_path):
    text = "%%MatrixMarket matrix coordinate real skew-symmetric\n3 3 1\n3 1 2.5\n"
    A = read_matrix_market(_write(tmp_path, text)).toarray()
    expected = np.zeros((3, 3))
    expected[2, 0], expected[0, 2] = 2.5, -2.5
    np.testing.assert_array_equal(A, expected)


def test_array_format_is_column_major(tmp_path):
    text = "%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n"
    A = read_matrix_market(_write(tmp_path, text))
    np.testing.assert_array_equal(A, [[1, 3, 5], [2, 4, 6]])


def test_array_symmetric_lower_triangle(tmp_path):
    text = "%%MatrixMarket matrix array real symmetric\n2 2\n2\n1\n3\n"
    A = read_matrix_market(_write(tmp_path, text))
    np.testing.assert_array_equal(A, [[2, 1], [1, 3]])


def test_truncated_file_names_the_line(tmp_path):
    text = "%%MatrixMarket matrix coordinate real general\n3 3 3\n1 1 1.0\n2 2 1.0\n"
    with pytest.raises(MatrixMarketError, match="line 4: expected 3 entries, found 2") as info:
        read_matrix_market(_write(tmp_path, text))
    assert info.value.lineno == 4


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n", "unsupported field type"),
        ("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n", "unsupported field type"),
        ("not a header\n", "line 1"),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", "line 3: index"),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n", "line 3: malformed"),
        ("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1.0\n", "upper-triangle"),
        ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 nan\n", "non-finite"),
        ("", "empty"),
    ],
)
def test_parse_errors(tmp_path, text, fragment):
    with pytest.raises(MatrixMarketError, match=fragment):
        read_matrix_market(_write(tmp_path, text))


def test_round_trip_convection_diffusion(tmp_path):
    A = build_convection_diffusion(4, 3.0, -2.0).A
    path = tmp_path / "cd.mtx"
    write_matrix_market(path, A, comment="convection diffusion")
    B = read_matrix_market(path)
    np.testing.assert_array_equal(B.toarray(), A.toarray())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_round_trip_dense_is_exact(tmp_path_factory, seed, n):
    A = np.random.default_rng(seed).standard_normal((n, n))
    path = tmp_path_factory.mktemp("mm") / "a.mtx"
    write_matrix_market(path, A)
    B = read_matrix_market(path)
    B = B.toarray() if sp.issparse(B) else B
    np.testing.assert_array_equal(B, A)
