"""Recorded process paths and their CSV form."""

from __future__ import annotations

import contextlib
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

PATH_CSV_VERSION = 1


@contextlib.contextmanager
def _open_out(path):
    if hasattr(path, "write"):
        yield path
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def on_boundary(states: np.ndarray) -> np.ndarray:
    states = np.asarray(states)
    return (states[..., 0] == 0) | (states[..., 1] == 0)


@dataclass
class PathSample:
    """States of one path (``states.shape == (T, 2)``) or a batch (``(n, T, 2)``).

    ``in_E`` marks states lying on the boundary E; drift-flow states between
    jumps of the Trotter scheme can leave it.
    """

    times: np.ndarray
    states: np.ndarray
    provenance: dict = field(default_factory=dict)
    in_E: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.shape[-2] != self.times.shape[0]:
            raise ValueError("states and times disagree in length")
        if self.in_E is None:
            self.in_E = on_boundary(self.states)

    @property
    def batched(self) -> bool:
        return self.states.ndim == 3

    def at(self, t: float) -> np.ndarray:
        idx = int(np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))[0])
        return self.states[..., idx, :]

    def write_csv(self, path: str | Path | TextIO) -> None:
        """Schema v1: ``t,x1,x2,in_E``; batches prepend a ``path`` column.

        ``path`` may also be an open text stream.
        """
        with _open_out(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            if self.batched:
                w.writerow(["path", "t", "x1", "x2", "in_E"])
                for p in range(self.states.shape[0]):
                    for k, t in enumerate(self.times):
                        x1, x2 = self.states[p, k]
                        w.writerow([p, repr(float(t)), repr(float(x1)), repr(float(x2)), int(self.in_E[p, k])])
            else:
                w.writerow(["t", "x1", "x2", "in_E"])
                for k, t in enumerate(self.times):
                    x1, x2 = self.states[k]
                    w.writerow([repr(float(t)), repr(float(x1)), repr(float(x2)), int(self.in_E[k])])
