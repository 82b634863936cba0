"""Spectrum files, plot files and the JSON result envelope.

CSV files have a header row.  Coherent traces need ``frequency_hz`` and
``phase_rad``; thermal traces need ``frequency_hz`` and ``psd``.  An optional
``weight`` column is honoured for coherent data.  Frequencies in files are
always Hz.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .core import ModelError, SpectrumGrid, SpectrumKind, TWO_PI
from .fitting import CoherentDataset, unwrap_phase


class DuplicateFrequencyWarning(UserWarning):
    pass


_VALUE_COLUMN = {"coherent": "phase_rad", "thermal": "psd"}


def _read_columns(path, required, optional=()):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ModelError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise ModelError(f"{path}: missing column(s) {', '.join(missing)}; "
                             f"header is {header}")
        wanted = list(required) + [c for c in optional if c in header]
        idx = {c: header.index(c) for c in wanted}
        cols = {c: [] for c in wanted}
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            for c, j in idx.items():
                cell = row[j].strip() if j < len(row) else ""
                try:
                    cols[c].append(float(cell))
                except ValueError:
                    raise ModelError(f"{path}: non-numeric value {cell!r} in column {c} "
                                     f"at data row {row_no}") from None
    return {c: np.asarray(v, dtype=float) for c, v in cols.items()}


def _collapse(freq, arrays):
    """Average rows of a sorted trace that share a frequency."""
    uniq, inverse, counts = np.unique(freq, return_inverse=True, return_counts=True)
    n_dup = int(freq.size - uniq.size)
    if n_dup:
        warnings.warn(f"collapsed {n_dup} duplicate frequency row(s) by averaging",
                      DuplicateFrequencyWarning, stacklevel=3)
        arrays = {k: np.bincount(inverse, weights=v) / counts for k, v in arrays.items()}
    return uniq, arrays


def load_spectrum_csv(path, kind: str, n_c: Optional[float] = None):
    """Read a coherent (``CoherentDataset``) or thermal (``SpectrumGrid``) trace.

    The grid is sorted and duplicate frequencies are averaged with a warning.
    Coherent phase is unwrapped on ingestion.  Frequencies are converted to rad/s.
    """
    if kind not in _VALUE_COLUMN:
        raise ModelError(f"unknown spectrum kind {kind!r}; use 'coherent' or 'thermal'")
    value = _VALUE_COLUMN[kind]
    cols = _read_columns(path, ["frequency_hz", value], optional=["weight"])
    freq = cols.pop("frequency_hz")
    if freq.size == 0:
        raise ModelError(f"{path}: no data rows")
    order = np.argsort(freq, kind="stable")
    freq = freq[order]
    cols = {k: v[order] for k, v in cols.items()}
    if kind == "coherent":
        if n_c is None:
            raise ModelError("coherent data needs the photon number n_c")
        cols[value] = unwrap_phase(cols[value])
    freq, cols = _collapse(freq, cols)
    omega = TWO_PI * freq
    if kind == "coherent":
        return CoherentDataset(float(n_c), omega, cols[value], cols.get("weight"))
    return SpectrumGrid(omega, cols[value], SpectrumKind.THERMAL_PSD)


def write_columns(path, header, *columns, fmt="%.12e"):
    """Flat CSV with a header row; column order is the argument order."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=fmt)
    return str(path)


def write_plot_file(path, x, y, x_label, y_label):
    """Two whitespace-separated columns with a ``#`` header naming both."""
    data = np.column_stack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
    np.savetxt(path, data, header=f"{x_label} {y_label}", fmt="%.12e")
    return str(path)


def quantity(value, units: str) -> dict:
    """A numeric output tagged with its units; arrays become lists."""
    if isinstance(value, np.ndarray):
        value = value.tolist()
    elif isinstance(value, np.generic):
        value = value.item()
    return {"value": value, "units": units}


@dataclass
class ResultEnvelope:
    command: str
    config_text: str
    config_path: Optional[str]
    seed: int
    overrides: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    started: float = field(default_factory=time.perf_counter)
    elapsed: Optional[float] = None
    status: str = "ok"
    error: Optional[str] = None

    def finish(self):
        self.elapsed = time.perf_counter() - self.started

    def as_dict(self) -> dict:
        return {
            "version": __version__,
            "command": self.command,
            "status": self.status,
            "error": self.error,
            "config": {"path": self.config_path, "text": self.config_text,
                       "seed": self.seed, "overrides": self.overrides},
            "outputs": self.outputs,
            "files": self.files,
            "warnings": self.warnings,
            "timing": quantity(self.elapsed, "s"),
        }

    def write(self, path) -> str:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2, allow_nan=True) + "\n")
        return str(path)


def read_envelope(path) -> dict:
    return json.loads(Path(path).read_text())


def fixture_dir() -> Path:
    """Directory holding the bundled synthetic coherent-response fixture."""
    return Path(__file__).parent / "data"
