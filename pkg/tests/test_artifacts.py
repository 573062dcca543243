import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scorerec.artifacts import (
    ArtifactError,
    atomic_open,
    atomic_write_text,
    read_adapter_file,
    read_crm_file,
    read_index_file,
    write_adapter_file,
    write_crm_file,
    write_index_file,
)


def test_crm_layout(tmp_path):
    U = np.arange(6, dtype=float).reshape(2, 3)
    V = -np.arange(3, dtype=float).reshape(1, 3)
    write_crm_file(tmp_path / "m", U, V)
    raw = (tmp_path / "m").read_bytes()
    assert raw[:4] == b"CRM1"
    assert int.from_bytes(raw[4:8], "little") == 3
    assert int.from_bytes(raw[8:16], "little") == 2
    assert int.from_bytes(raw[16:24], "little") == 1
    assert len(raw) == 24 + 4 * 9
    u, v = read_crm_file(tmp_path / "m")
    assert np.array_equal(u, U) and np.array_equal(v, V)


def test_adapter_magic_checked(tmp_path):
    write_adapter_file(tmp_path / "a", b"ADP1", np.eye(2), 0.1)
    W, tau = read_adapter_file(tmp_path / "a", b"ADP1")
    assert tau == 0.1 and np.array_equal(W, np.eye(2))
    with pytest.raises(ArtifactError):
        read_adapter_file(tmp_path / "a", b"ADP2")


def test_truncated_file(tmp_path):
    write_adapter_file(tmp_path / "a", b"ADP1", np.eye(3), 0.1)
    data = (tmp_path / "a").read_bytes()
    (tmp_path / "a").write_bytes(data[:-5])
    with pytest.raises(ArtifactError):
        read_adapter_file(tmp_path / "a", b"ADP1")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.text(min_size=1, max_size=8), min_size=0, max_size=6, unique=True), st.integers(1, 5))
def test_index_round_trip(tmp_path_factory, ids, d):
    path = tmp_path_factory.mktemp("idx") / "i"
    rows = np.arange(len(ids) * d, dtype=np.float32).reshape(len(ids), d)
    write_index_file(path, ids, rows)
    back_ids, back = read_index_file(path)
    assert back_ids == ids
    assert np.array_equal(back, rows)


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write_text(tmp_path / "sub" / "f.txt", "hi")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]
    with pytest.raises(RuntimeError):
        with atomic_open(tmp_path / "sub" / "g.txt", "w") as f:
            f.write("partial")
            raise RuntimeError
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]
