import json

import numpy as np
import pytest

from uppe_green.models.export import SliceWriterThread, read_field, write_csv, write_field, write_summary
from uppe_green.models.propagator import FieldSlice


def test_field_file_and_sidecar(tmp_path, rng):
    data = rng.standard_normal((2, 3, 4, 6)) + 1j * rng.standard_normal((2, 3, 4, 6))
    sidecar = write_field(tmp_path / "g", data, ("spectral", "spectral", "physical", "spectral"),
                          (1.0, 1.0, 0.5, 0.25), c=2.0, extra={"note": "demo"})
    assert sidecar.name == "g.json"
    assert (tmp_path / "g.bin").stat().st_size == data.size * 8

    back, meta = read_field(sidecar)
    assert back.dtype == np.complex64
    assert np.array_equal(back, data.astype(np.complex64))
    assert meta["shape"] == [2, 3, 4, 6]
    assert meta["axes"] == ["x", "y", "z", "t"]
    assert meta["rep"][2] == "physical"
    assert meta["steps"] == [1.0, 1.0, 0.5, 0.25]
    assert meta["c"] == 2.0 and meta["note"] == "demo"
    assert meta["byteorder"] == "little" and meta["order"] == "C"


def test_csv_uses_crlf_and_round_trip_floats(tmp_path):
    path = write_csv(tmp_path / "out.csv", ("name", "value"), [("a", 0.5), ("b", 0.1), ("c", 3)])
    raw = path.read_bytes()
    assert raw.startswith(b"name,value\r\na,0.5\r\n")
    assert b"b,0.10000000000000001\r\n" in raw
    assert raw.endswith(b"c,3\r\n")


def test_summary_is_sorted_and_rejects_nan(tmp_path):
    path = write_summary(tmp_path / "summary.json", {"b": 1, "a": [1.5]})
    text = path.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1.5], "b": 1}
    with pytest.raises(ValueError):
        write_summary(tmp_path / "bad.json", {"x": float("nan")})


def test_slice_writer_thread(tmp_path, small_grid):
    writer = SliceWriterThread(tmp_path / "slices")
    writer.start()
    for index, z in ((0, -1.0), (4, 1.0)):
        slice_data = np.full((small_grid.n_x, small_grid.n_y, small_grid.n_t), 1.0 + 0j)
        writer.submit(index, FieldSlice(z, slice_data, small_grid))
    written = writer.close()
    assert [p.rsplit("/", 1)[-1] for p in written] == ["slice_00000.json", "slice_00004.json"]
    data, meta = read_field(written[1])
    assert data.shape == (8, 8, 16)
    assert meta["axes"] == ["x", "y", "t"]
    assert meta["z"] == 1.0
    assert not writer.is_alive()


def test_slice_writer_reports_write_failure(tmp_path, small_grid):
    blocker = tmp_path / "not_a_dir"
    blocker.write_text("")
    writer = SliceWriterThread(blocker / "slices")
    writer.start()
    slice_data = np.zeros((small_grid.n_x, small_grid.n_y, small_grid.n_t), dtype=np.complex128)
    writer.submit(0, FieldSlice(0.0, slice_data, small_grid))
    writer.join(timeout=10)
    assert not writer.is_alive()
    assert writer.errors
    with pytest.raises(OSError):
        writer.submit(1, FieldSlice(1.0, slice_data, small_grid))
    with pytest.raises(OSError):
        writer.close()


def test_slice_writer_refuses_submit_when_stopped(tmp_path, small_grid):
    writer = SliceWriterThread(tmp_path / "slices")
    slice_data = np.zeros((small_grid.n_x, small_grid.n_y, small_grid.n_t), dtype=np.complex128)
    with pytest.raises(RuntimeError):
        writer.submit(0, FieldSlice(0.0, slice_data, small_grid))
    assert writer.close() == []
