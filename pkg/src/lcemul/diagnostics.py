"""Per-step diagnostics records and their CSV serialization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

__all__ = ["DiagnosticsRow", "DiagnosticsWriter", "DIAGNOSTICS_COLUMNS", "DIAGNOSTICS_VERSION"]

DIAGNOSTICS_VERSION = 1


@dataclass
class DiagnosticsRow:
    step: int
    t: float
    e_mix: float
    e_pol: float
    e_anch: float
    e_gamma: float
    e_kin: float
    e_total: float
    energy_rate: float
    mass: float
    max_abs_d: float
    newton_iters: int
    residual_norm: float
    dissipation_estimate: float


DIAGNOSTICS_COLUMNS = tuple(f.name for f in fields(DiagnosticsRow))


def _fmt(value) -> str:
    # repr round-trips float64 exactly and is deterministic
    return repr(value) if isinstance(value, float) else str(value)


class DiagnosticsWriter:
    """CSV sink with a fixed, versioned header; one row per accepted step."""

    def __init__(self, stream):
        self._stream = stream
        self._writer = csv.writer(stream, lineterminator="\n")
        self._stream.write(f"# lcemul-diagnostics v{DIAGNOSTICS_VERSION}\n")
        self._writer.writerow(DIAGNOSTICS_COLUMNS)
        self._last_step = None

    def __call__(self, row: DiagnosticsRow) -> None:
        if self._last_step is not None and row.step <= self._last_step:
            raise ValueError("diagnostics rows must be strictly increasing in step")
        self._last_step = row.step
        self._writer.writerow([_fmt(getattr(row, name)) for name in DIAGNOSTICS_COLUMNS])


def read_diagnostics(path) -> list[DiagnosticsRow]:
    """Parse a diagnostics CSV back into rows (used by tests and tools)."""
    rows = []
    with open(path, "r", newline="") as fh:
        header = fh.readline()
        if not header.startswith("# lcemul-diagnostics"):
            raise ValueError("not a diagnostics file")
        reader = csv.reader(fh)
        names = next(reader)
        if tuple(names) != DIAGNOSTICS_COLUMNS:
            raise ValueError("diagnostics column mismatch")
        for rec in reader:
            kwargs = {}
            for name, val in zip(names, rec):
                kwargs[name] = int(val) if name in ("step", "newton_iters") else float(val)
            rows.append(DiagnosticsRow(**kwargs))
    return rows
