"""Trajectory container and its CSV export."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .state import StateMatrix


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-step diagnostics.

    ``min_eigenvalue`` and ``trace_error`` describe the raw integrator output
    *before* the post-step repair, so they measure drift rather than the
    (trivially clean) repaired state. ``extra`` carries backend-specific
    columns such as the subsystem entropies of a composite run.
    """

    entropy: float
    mean_values: tuple
    entropy_production: float
    dissipator_norm: float
    min_eigenvalue: float
    trace_error: float
    extra: tuple = ()


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    mean_names: tuple = ("mean_H",)
    extra_names: tuple = ()

    def append(self, t: float, state: StateMatrix, record: DiagnosticsRecord) -> None:
        self.times.append(float(t))
        self.states.append(state)
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> StateMatrix:
        return self.states[-1]

    @property
    def backward(self) -> bool:
        return len(self.times) > 1 and self.times[-1] < self.times[0]

    def column(self, name: str) -> np.ndarray:
        """One CSV column as an array."""
        names = self.columns
        if name not in names:
            raise KeyError(name)
        j = names.index(name)
        return np.array([row[j] for row in self.rows()])

    @property
    def columns(self) -> list:
        return (["t", "S", "entropy_production"] + list(self.mean_names)
                + ["dissipator_norm", "min_eigenvalue", "trace_error"] + list(self.extra_names))

    def rows(self):
        for t, r in zip(self.times, self.records):
            yield ([t, r.entropy, r.entropy_production] + list(r.mean_values)
                   + [r.dissipator_norm, r.min_eigenvalue, r.trace_error] + list(r.extra))

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows():
            writer.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text
