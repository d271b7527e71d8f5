import math
import os
import tempfile
from datetime import datetime
from pathlib import Path

import numpy as np


def generate_output_dir(prefix: str = "uppe_green"):
    """Default output directory: ``$UPPE_GREEN_OUT`` or a dated dir in temp."""
    if os.getenv("UPPE_GREEN_OUT"):
        return str(Path(os.environ["UPPE_GREEN_OUT"]))

    root = Path(tempfile.gettempdir())
    time_str = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
    return str(root / f"{prefix}_{time_str}")


def get_workers(threads: int = 0):
    """Map the ``threads`` config value to a ``scipy.fft`` workers argument."""
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return int(threads)


def stable_sum(values) -> float:
    """Compensated sum of a real array, independent of summation order."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def energy(data, measure: float = 1.0) -> float:
    """Sum of |data|^2 times the cell measure."""
    return stable_sum(np.abs(data) ** 2) * measure


def relative_l2(a, b) -> float:
    """||a - b|| / ||b||, 0 when both vanish."""
    den = energy(b)
    num = energy(np.asarray(a) - np.asarray(b))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return math.sqrt(num / den)
