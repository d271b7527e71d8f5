import csv
import json
import queue
import threading
from pathlib import Path

import numpy as np

from uppe_green.models.spectral_core import AXES, PHYSICAL
from uppe_green.utils.logging import logger

FIELD_DTYPE = "<c8"


def _number(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return value


def write_field(stem, data, rep, steps, axes=AXES, c=None, extra=None):
    """Write ``stem.bin`` (little-endian complex64, C order) and its ``stem.json`` sidecar."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(data, dtype=FIELD_DTYPE)
    bin_path = stem.with_suffix(".bin")
    data.tofile(bin_path)

    sidecar = {
        "file": bin_path.name,
        "dtype": "complex64",
        "byteorder": "little",
        "order": "C",
        "shape": list(data.shape),
        "axes": list(axes),
        "rep": list(rep),
        "steps": [float(s) for s in steps],
    }
    if c is not None:
        sidecar["c"] = float(c)
    if extra:
        sidecar.update(extra)
    json_path = stem.with_suffix(".json")
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
    logger.debug(f"Wrote field {bin_path} shape={data.shape}")
    return json_path


def read_field(sidecar_path):
    """Load a field from its sidecar alone; returns (data, sidecar dict)."""
    sidecar_path = Path(sidecar_path)
    with open(sidecar_path, encoding="utf-8") as f:
        meta = json.load(f)
    data = np.fromfile(sidecar_path.parent / meta["file"], dtype=FIELD_DTYPE)
    return data.reshape(meta["shape"]), meta


def write_csv(path, header, rows):
    """RFC 4180 CSV; floats are written with round-trip precision."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_number(v) for v in row])
    return path


def write_summary(path, summary):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    return path


class SliceWriterThread(threading.Thread):
    """Drains (index, FieldSlice) items from a queue to ``slice_<index>`` files.

    ``None`` ends the stream. The first write error stops the thread; it is
    kept in ``errors`` and re-raised by :meth:`submit` and :meth:`close` so
    the producer sees it.
    """

    def __init__(self, out_dir, stop_flag=None, maxsize=16, prefix="slice"):
        super().__init__(daemon=True)
        self.out_dir = Path(out_dir)
        self.prefix = prefix
        self.slice_queue = queue.Queue(maxsize=maxsize)
        self.stop_flag = stop_flag or threading.Event()
        self.written = []
        self.errors = []

    def _raise_if_failed(self):
        if self.errors:
            raise self.errors[0]
        if not self.is_alive():
            raise RuntimeError("slice writer is not running")

    def submit(self, index, field_slice):
        while True:
            self._raise_if_failed()
            try:
                self.slice_queue.put((index, field_slice), timeout=0.5)
                return
            except queue.Full:
                continue

    def write(self, index, field_slice):
        stem = self.out_dir / f"{self.prefix}_{index:05d}"
        grid = field_slice.grid
        sidecar = write_field(
            stem, field_slice.physical(), (PHYSICAL,) * 3, (grid.d_x, grid.d_y, grid.d_t),
            axes=("x", "y", "t"), c=grid.c, extra={"z": float(field_slice.z)},
        )
        self.written.append(str(sidecar))

    def run(self):
        while not self.stop_flag.is_set():
            try:
                item = self.slice_queue.get(timeout=0.5)
            except queue.Empty:
                continue
            try:
                if item is None:
                    break
                self.write(*item)
            except Exception as e:
                logger.error(f"Error writing slice: {e}")
                self.errors.append(e)
                self.stop_flag.set()
            finally:
                self.slice_queue.task_done()

    def close(self):
        if self.is_alive():
            while self.is_alive():
                try:
                    self.slice_queue.put(None, timeout=0.5)
                    break
                except queue.Full:
                    continue
            self.join()
        if self.errors:
            raise self.errors[0]
        return self.written
