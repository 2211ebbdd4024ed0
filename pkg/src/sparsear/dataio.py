"""CSV ingestion, preprocessing pipelines and train/test splits."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ColumnNotFound, DataError, NonPositiveForLog, ParseError, TooShort
from .model import TimeSeries
from .utils.validation import as_series

__all__ = [
    "Step",
    "PipelineSpec",
    "SplitSpec",
    "PRESETS",
    "read_csv",
    "write_csv",
    "apply_pipeline",
    "parse_steps",
    "preset",
    "split",
    "select_rows",
]

STEP_KINDS = ("difference", "log_transform", "downsample", "block_average", "center")

# raw traffic feeds are typically per-minute; after downsampling by 4 an hour is 15 samples
TRAFFIC_BLOCK_WIDTH = 15


@dataclass(frozen=True)
class Step:
    kind: str
    arg: int = None

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise ValueError(f"unknown step {self.kind!r}; expected one of {STEP_KINDS}")
        if self.kind == "difference" and self.arg not in (1, 2):
            raise ValueError("difference order must be 1 or 2")
        if self.kind in ("downsample", "block_average") and not (isinstance(self.arg, int) and self.arg >= 1):
            raise ValueError(f"{self.kind} needs a positive integer argument")

    def __str__(self):
        return self.kind if self.arg is None else f"{self.kind}:{self.arg}"


@dataclass(frozen=True)
class PipelineSpec:
    steps: tuple = ()

    def __str__(self):
        return ",".join(str(s) for s in self.steps)


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "halves"
    fit_fraction: float = 0.5

    def __post_init__(self):
        if self.mode not in ("halves", "even_odd"):
            raise ValueError("mode must be 'halves' or 'even_odd'")
        if not 0 < self.fit_fraction < 1:
            raise ValueError("fit_fraction must lie in (0, 1)")


def parse_steps(text):
    """Parse ``"difference:1,log_transform,center"`` into a :class:`PipelineSpec`."""
    steps = []
    aliases = {"log": "log_transform", "diff": "difference"}
    for token in filter(None, (t.strip() for t in text.split(","))):
        name, _, arg = token.partition(":")
        name = aliases.get(name, name)
        steps.append(Step(name, int(arg) if arg else (1 if name == "difference" else None)))
    return PipelineSpec(tuple(steps))


def preset(name, block_width=TRAFFIC_BLOCK_WIDTH):
    """Named recipes: ``oil`` (first difference) and ``traffic``
    (downsample by 4, hourly block average, log, center)."""
    if name == "oil":
        return PipelineSpec((Step("difference", 1),))
    if name == "traffic":
        return PipelineSpec((Step("downsample", 4), Step("block_average", block_width),
                             Step("log_transform"), Step("center")))
    raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")


PRESETS = ("oil", "traffic")


def _parse_float(cell, row):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(row, f"cannot parse {cell!r} as a number") from None
    if not math.isfinite(v):
        raise ParseError(row, f"non-finite value {cell!r}")
    return v


def read_csv(path, column=0, has_header=True, delimiter=","):
    """Read one numeric column from a CSV file, in file order.

    ``column`` is a header name or a 0-based index.  Missing or
    non-finite cells raise :class:`ParseError` naming the 1-based line.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    values = []
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        idx = column
        if has_header:
            header = next(reader, None)
            if header is None:
                raise ParseError(1, "empty file")
            if isinstance(column, str) and column in header:
                idx = header.index(column)
        if isinstance(idx, str):
            if not idx.isdigit():
                raise ColumnNotFound(f"column {column!r} not found")
            idx = int(idx)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if idx >= len(row):
                raise ColumnNotFound(f"line {line} has {len(row)} fields, column {idx} requested")
            values.append(_parse_float(row[idx].strip(), line))
    return TimeSeries(np.array(values, dtype=float))


def write_csv(path_or_file, series, header="value", index=False, start=0):
    """Write a single-column CSV (optionally with an index column).

    Floats use ``repr`` so a round trip through :func:`read_csv` is exact.
    """
    x = as_series(series, min_length=0)
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(["index", header] if index else [header])
        for k, v in enumerate(x):
            writer.writerow([start + k, repr(float(v))] if index else [repr(float(v))])
    finally:
        if own:
            fh.close()


def _apply_step(x, step):
    if step.kind == "difference":
        if x.shape[0] <= step.arg:
            raise TooShort(f"difference({step.arg}) needs more than {step.arg} samples")
        return np.diff(x, n=step.arg)
    if step.kind == "log_transform":
        if np.any(x <= 0):
            raise NonPositiveForLog(f"log_transform at sample {int(np.argmax(x <= 0))}: value <= 0")
        return np.log(x)
    if step.kind == "downsample":
        return x[:: step.arg]
    if step.kind == "block_average":
        m = x.shape[0] // step.arg
        if m == 0:
            raise TooShort(f"block_average({step.arg}) needs at least {step.arg} samples")
        return x[: m * step.arg].reshape(m, step.arg).mean(axis=1)
    if x.shape[0] == 0:
        raise TooShort("center needs at least one sample")
    return x - x.mean()


def apply_pipeline(series, spec):
    """Apply the steps of ``spec`` in order.

    Output lengths: ``difference(d)``: ``m - d``; ``downsample(f)``:
    ``ceil(m / f)``; ``block_average(w)``: ``floor(m / w)`` (a trailing
    partial block is dropped); ``log_transform`` and ``center`` keep ``m``.
    """
    x = as_series(series, min_length=1)
    for step in spec.steps:
        x = _apply_step(x, step)
    return TimeSeries(x)


def select_rows(series, rows):
    """Slice with a ``"a:b"`` string (Python slice semantics, 0-based)."""
    x = as_series(series, min_length=0)
    a, _, b = rows.partition(":")
    return TimeSeries(x[slice(int(a) if a else None, int(b) if b else None)])


def split(series, spec=None):
    """Split into ``(fit, test)``.

    ``halves`` keeps a contiguous prefix of ``fit_fraction`` for fitting;
    ``even_odd`` interleaves.  Models fitted on an ``even_odd`` part use lag
    units of the decimated series.
    """
    spec = spec or SplitSpec()
    x = as_series(series, min_length=4)
    if spec.mode == "even_odd":
        return TimeSeries(x[0::2]), TimeSeries(x[1::2])
    k = int(round(spec.fit_fraction * x.shape[0]))
    k = min(max(k, 1), x.shape[0] - 1)
    return TimeSeries(x[:k]), TimeSeries(x[k:])
