"""Result rows and their CSV form."""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, TextIO

from onemax.errors import InputDataError

_FLOAT_FIELDS = ("theta", "lam", "r", "rho", "error_level", "s", "realized_ratio",
                 "std_error", "bound", "reference")
_INT_FIELDS = ("n", "trials", "seed")
_BOOL_FIELDS = ("bound_applies", "clipped")


def _round12(x: Optional[float]) -> Optional[float]:
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    return float(f"{x:.12g}")


@dataclass(frozen=True)
class RunRecord:
    """One experiment outcome.

    Floats are rounded to 12 significant digits on construction so that a
    record survives a CSV round trip unchanged. ``None`` marks a column that
    does not apply to the experiment.
    """

    experiment: str
    theta: float
    lam: Optional[float]
    r: Optional[float]
    rho: Optional[float]
    n: Optional[int]
    trials: Optional[int]
    seed: Optional[int]
    error_kind: str
    error_level: Optional[float]
    s: Optional[float]
    realized_ratio: Optional[float]
    std_error: Optional[float]
    bound: Optional[float]
    bound_applies: bool
    reference: Optional[float] = None
    clipped: bool = False
    note: str = ""

    def __post_init__(self):
        for name in _FLOAT_FIELDS:
            object.__setattr__(self, name, _round12(getattr(self, name)))
        for name in _INT_FIELDS:
            value = getattr(self, name)
            object.__setattr__(self, name, None if value is None else int(value))
        for name in _BOOL_FIELDS:
            object.__setattr__(self, name, bool(getattr(self, name)))


COLUMNS = tuple(f.name for f in dataclasses.fields(RunRecord))


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.12g}"
    return str(value)


def write_records(records: Iterable[RunRecord], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(COLUMNS)
    for rec in records:
        writer.writerow([_format(getattr(rec, name)) for name in COLUMNS])


def emit_csv(records: Iterable[RunRecord], path: str | Path) -> None:
    """Write header plus one row per record; I/O failures name the path."""
    buf = io.StringIO()
    write_records(records, buf)
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc


def _parse(name: str, text: str):
    if text == "":
        return "" if name in ("error_kind", "note", "experiment") else (False if name in _BOOL_FIELDS else None)
    if name in _FLOAT_FIELDS:
        return float(text)
    if name in _INT_FIELDS:
        return int(text)
    if name in _BOOL_FIELDS:
        return text == "1"
    return text


def read_records(path: str | Path) -> list[RunRecord]:
    with Path(path).open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise InputDataError("bad_header", f"{path} is not a results file", line=1)
        return [RunRecord(**{name: _parse(name, text) for name, text in zip(COLUMNS, row)}) for row in reader]
