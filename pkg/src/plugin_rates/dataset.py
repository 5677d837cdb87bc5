"""Labeled samples and their CSV representation.

File format: UTF-8, optional leading ``#`` comment lines, a header
``x1,...,xd,y`` and one sample per row. Floats are written with ``repr`` so
a write/read round trip is exact and reruns are byte-identical.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DatasetFormatError


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` points ``x`` in R^d with binary labels ``y``; arrays are read-only."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.array(self.y)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValueError(f"x must be a non-empty (n, d) array, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError(f"y has shape {y.shape}, expected ({x.shape[0]},)")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        y = y.astype(np.int8)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def flipped(self) -> "Dataset":
        return Dataset(self.x, 1 - self.y)


def format_float(v: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(v))


def dataset_to_csv(data: Dataset, header_comment: str | None = None) -> str:
    out = io.StringIO()
    if header_comment is not None:
        out.write(header_comment.rstrip("\n") + "\n")
    names = [f"x{j + 1}" for j in range(data.d)] + ["y"]
    out.write(",".join(names) + "\n")
    for xi, yi in zip(data.x, data.y):
        out.write(",".join(format_float(v) for v in xi) + f",{int(yi)}\n")
    return out.getvalue()


def write_dataset(path, data: Dataset, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dataset_to_csv(data, header_comment))


def parse_dataset(text: str) -> Dataset:
    """Parse dataset CSV text. Row numbers in errors are 1-based file lines."""
    lines = text.splitlines()
    start = 0
    while start < len(lines) and (lines[start].startswith("#") or not lines[start].strip()):
        start += 1
    if start == len(lines):
        raise DatasetFormatError("missing header")
    reader = csv.reader(lines[start:])
    header = [h.strip() for h in next(reader)]
    d = len(header) - 1
    expected = [f"x{j + 1}" for j in range(d)] + ["y"]
    if d < 1 or header != expected:
        raise DatasetFormatError(f"header must be {','.join(expected) if d >= 1 else 'x1,...,xd,y'}",
                                 row=start + 1)
    xs, ys = [], []
    for offset, row in enumerate(reader):
        lineno = start + 2 + offset
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != d + 1:
            raise DatasetFormatError(f"expected {d + 1} fields, found {len(row)}", row=lineno)
        vals = []
        for col, field in enumerate(row[:d]):
            try:
                v = float(field)
            except ValueError:
                raise DatasetFormatError(f"not a number: {field!r}", row=lineno, column=header[col]) from None
            if not np.isfinite(v):
                raise DatasetFormatError(f"non-finite value {field!r}", row=lineno, column=header[col])
            vals.append(v)
        label = row[d].strip()
        if label not in ("0", "1"):
            raise DatasetFormatError(f"label must be 0 or 1, found {label!r}", row=lineno, column="y")
        xs.append(vals)
        ys.append(int(label))
    if not xs:
        raise DatasetFormatError("no samples")
    return Dataset(np.array(xs), np.array(ys))


def read_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_dataset(fh.read())
