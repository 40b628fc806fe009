import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from s2qsp.matmul import MatmulAbort, plain_matmul_oracle, read_matrix, run_matmul, write_matrix
from s2qsp.protocol import BobStrategy

A = [[1, 0], [2, 3]]
B = [[3, 1], [1, 2]]
V = [[0, 1], [2, 0]]


def test_worked_example():
    want = [[3, 2], [3, 0]]
    assert plain_matmul_oracle(A, B, V, 2).tolist() == want
    res = run_matmul(A, B, V, 2, seed=1)
    assert res.U.tolist() == want and res.runs == 4


def test_identity_and_scalar():
    res = run_matmul(np.eye(3, dtype=int), [[1, 2, 3], [0, 1, 2], [3, 3, 0]], np.zeros((3, 3), int), 2)
    assert res.U.tolist() == [[1, 2, 3], [0, 1, 2], [3, 3, 0]]
    one = run_matmul([[3]], [[2]], [[1]], 2)
    assert one.U.tolist() == [[(3 * 2 + 1) % 4]] and one.runs == 1


def test_rectangular_shapes():
    rng = np.random.default_rng(0)
    A_, B_, V_ = rng.integers(0, 4, (2, 3)), rng.integers(0, 4, (3, 1)), rng.integers(0, 4, (2, 1))
    res = run_matmul(A_, B_, V_, 2, seed=3)
    assert res.runs == 2 and np.array_equal(res.U, plain_matmul_oracle(A_, B_, V_, 2))


def test_validation():
    with pytest.raises(ValueError):
        run_matmul([[1, 2]], [[1, 2]], [[0]], 2)
    with pytest.raises(ValueError):
        run_matmul([[4]], [[1]], [[0]], 2)
    with pytest.raises(ValueError):
        run_matmul([[1]], [[1]], [[0, 0]], 2)


def test_fresh_seeds_per_cell():
    res = run_matmul(A, B, V, 2, seed=5, keep_transcripts=True)
    assert len({c["seed"] for c in res.cells}) == 4
    assert all("transcript" in c for c in res.cells)
    again = run_matmul(A, B, V, 2, seed=5)
    assert [c["seed"] for c in again.cells] == [c["seed"] for c in res.cells]


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 2), st.integers(0, 10_000))
def test_matches_oracle(k, n, m, seed):
    rng = np.random.default_rng(seed)
    N = 1 << m
    A_, B_, V_ = rng.integers(0, N, (k, n)), rng.integers(0, N, (n, k)), rng.integers(0, N, (k, k))
    assert np.array_equal(run_matmul(A_, B_, V_, m, seed=seed).U, plain_matmul_oracle(A_, B_, V_, m))


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "a.csv"
    write_matrix(p, A, 2)
    M, m = read_matrix(p)
    assert M.tolist() == A and m == 2
    assert p.read_text().splitlines()[0] == "k,n,m"
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y,z\n1,1,2\n0\n")
    with pytest.raises(ValueError):
        read_matrix(bad)


def test_abort_carries_position(monkeypatch):
    import s2qsp.matmul as mm
    from s2qsp.protocol import ProtocolAbort

    def boom(*a, **kw):
        raise ProtocolAbort("bob_honesty_test", 1)
    monkeypatch.setattr(mm, "run_protocol", boom)
    with pytest.raises(MatmulAbort) as err:
        run_matmul(A, B, V, 2)
    assert (err.value.i, err.value.j) == (0, 0)
