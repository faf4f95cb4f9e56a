import numpy as np
import pytest

from canyonpl.persist import MAGIC, ContainerError, read_container, write_container


def test_round_trip(tmp_path, rng):
    arrays = {"w": rng.normal(size=(3, 4)), "b": np.array([1.5]), "s": np.array(2.0)}
    write_container(tmp_path / "m.bin", "thing", {"k": [1, 2]}, arrays)
    kind, desc, back = read_container(tmp_path / "m.bin", expect_kind="thing")
    assert kind == "thing" and desc == {"k": [1, 2]}
    for k, v in arrays.items():
        np.testing.assert_array_equal(back[k], v)
        assert back[k].shape == np.shape(v)


def test_bytes_deterministic(tmp_path):
    arrays = {"a": np.arange(5.0)}
    write_container(tmp_path / "1", "x", {"b": 1, "a": 2}, arrays)
    write_container(tmp_path / "2", "x", {"a": 2, "b": 1}, arrays)
    assert (tmp_path / "1").read_bytes() == (tmp_path / "2").read_bytes()
    assert (tmp_path / "1").read_bytes().startswith(MAGIC)


def test_errors(tmp_path):
    (tmp_path / "bad").write_bytes(b"NOTAMODEL")
    with pytest.raises(ContainerError, match="magic"):
        read_container(tmp_path / "bad")
    write_container(tmp_path / "m", "x", {}, {"a": np.zeros(3)})
    with pytest.raises(ContainerError, match="expected 'y'"):
        read_container(tmp_path / "m", expect_kind="y")
    data = (tmp_path / "m").read_bytes()
    (tmp_path / "t").write_bytes(data[:-8])
    with pytest.raises(ContainerError, match="payload"):
        read_container(tmp_path / "t")
    (tmp_path / "v").write_bytes(data[:8] + b"\x09\x00" + data[10:])
    with pytest.raises(ContainerError, match="version"):
        read_container(tmp_path / "v")
