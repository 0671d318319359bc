import numpy as np
import pytest

from imub.paths import PATH_CSV_VERSION, PathSample
from imub.rng import chunk_sizes, default_workers, map_chunks, stream


def _draw(rng, size):
    return rng.standard_normal(size)


def test_stream_is_reproducible_and_keyed():
    assert stream(3, 1).random() == stream(3, 1).random()
    assert stream(3, 1).random() != stream(3, 2).random()
    assert stream(3).random() != stream(4).random()


def test_chunk_sizes():
    assert chunk_sizes(10, 4) == [4, 4, 2]
    assert chunk_sizes(8, 4) == [4, 4]
    assert chunk_sizes(0, 4) == []


def test_map_chunks_independent_of_workers():
    a = map_chunks(_draw, 1000, seed=11, key=(9,), workers=1, chunk=128)
    b = map_chunks(_draw, 1000, seed=11, key=(9,), workers=3, chunk=128)
    assert a.shape == (1000,)
    assert np.array_equal(a, b)


def test_default_workers_env(monkeypatch):
    monkeypatch.setenv("IMUB_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("IMUB_WORKERS", "junk")
    assert default_workers() == 1


def test_path_csv_single(tmp_path):
    s = PathSample([0.0, 0.5], [[1.0, 0.0], [0.25, 0.5]], {"scheme": "x"})
    assert list(s.in_E) == [True, False]
    f = tmp_path / "p.csv"
    s.write_csv(f)
    raw = f.read_bytes()
    assert b"\r\n" not in raw
    lines = raw.decode().splitlines()
    assert lines == ["t,x1,x2,in_E", "0.0,1.0,0.0,1", "0.5,0.25,0.5,0"]
    assert PATH_CSV_VERSION == 1


def test_path_csv_batched(tmp_path):
    s = PathSample([0.0, 1.0], np.zeros((2, 2, 2)))
    assert s.batched
    f = tmp_path / "p.csv"
    s.write_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0] == "path,t,x1,x2,in_E"
    assert len(lines) == 5
    assert lines[3].startswith("1,0.0,")


def test_path_sample_shape_check_and_lookup():
    with pytest.raises(ValueError):
        PathSample([0.0, 1.0], [[1.0, 0.0]])
    s = PathSample([0.0, 1.0], [[1.0, 0.0], [2.0, 0.0]])
    assert list(s.at(1.0)) == [2.0, 0.0]
