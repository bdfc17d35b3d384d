"""Data containers, CSV ingestion, and centering.

A :class:`Dataset` bundles the outcome vector with the treatment matrix and
the optional instrument/proxy blocks.  All blocks are validated once at
construction and never mutated afterwards, so datasets are safe to share
across concurrent tasks.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Dataset:
    """Observed sample: outcome y, treatments x, optional instruments z and
    outcome-inducing proxies w."""

    y: np.ndarray
    x: np.ndarray
    z: np.ndarray | None = None
    w: np.ndarray | None = None
    names: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if x.shape[0] == 1 and y.shape[0] != 1:
            x = x.T
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        for name in ("z", "w"):
            block = getattr(self, name)
            if block is not None:
                block = np.atleast_2d(np.asarray(block, dtype=float))
                if block.shape[0] == 1 and y.shape[0] != 1:
                    block = block.T
                object.__setattr__(self, name, block)
        if self.y.ndim != 1:
            raise InputError("outcome must be a vector")
        n = self.y.shape[0]
        if n < 1:
            raise InputError("dataset must contain at least one row")
        if self.x.shape[1] < 1:
            raise InputError("at least one treatment column is required")
        for name in ("x", "z", "w"):
            block = getattr(self, name)
            if block is None:
                continue
            if block.shape[0] != n:
                raise InputError(
                    f"block {name!r} has {block.shape[0]} rows, expected {n}"
                )
            if block.shape[1] < 1:
                raise InputError(f"block {name!r} has no columns")
            if not np.all(np.isfinite(block)):
                raise InputError(f"block {name!r} contains non-finite entries")
        if not np.all(np.isfinite(self.y)):
            raise InputError("outcome contains non-finite entries")
        self.y.setflags(write=False)
        self.x.setflags(write=False)
        for name in ("z", "w"):
            block = getattr(self, name)
            if block is not None:
                block.setflags(write=False)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def r(self) -> int:
        return 0 if self.z is None else self.z.shape[1]

    @property
    def s(self) -> int:
        return 0 if self.w is None else self.w.shape[1]


@dataclass(frozen=True)
class CenteringInfo:
    """Column means removed by :func:`center`; re-adding them restores the
    raw data exactly."""

    y_mean: float
    x_mean: np.ndarray
    z_mean: np.ndarray | None = None
    w_mean: np.ndarray | None = None


def load_schema(path: str) -> dict:
    """Read a column-role schema from a JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            schema = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read schema file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"schema file {path!r} is not valid JSON: {exc}") from exc
    if "outcome" not in schema or "treatments" not in schema:
        raise InputError("schema must declare 'outcome' and 'treatments'")
    return schema


def load_csv(path: str, schema: dict) -> Dataset:
    """Load a UTF-8 comma-delimited file with a header row into a Dataset.

    ``schema`` maps roles to column names: ``{"outcome": "y",
    "treatments": [...], "instruments": [...], "proxies": [...]}``.
    Column order within each block follows the schema, and row order
    follows the file.
    """
    outcome = schema["outcome"]
    treatments = list(schema["treatments"])
    instruments = list(schema.get("instruments") or [])
    proxies = list(schema.get("proxies") or [])
    wanted = [outcome] + treatments + instruments + proxies

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path!r}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path!r} is empty") from None
        header = [h.strip() for h in header]
        col_index = {}
        for name in wanted:
            if name not in header:
                raise InputError(f"column {name!r} not found in {path!r}")
            col_index[name] = header.index(name)

        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path!r} line {lineno}: expected {len(header)} cells, "
                    f"got {len(row)}"
                )
            parsed = []
            for name in wanted:
                cell = row[col_index[name]].strip()
                try:
                    value = float(cell)
                except ValueError:
                    value = np.nan
                if not np.isfinite(value):
                    raise InputError(
                        f"{path!r} line {lineno}, column {name!r}: "
                        f"non-numeric cell {cell!r}"
                    )
                parsed.append(value)
            rows.append(parsed)

    if not rows:
        raise InputError(f"{path!r} contains no data rows")
    data = np.asarray(rows, dtype=float)
    k = 1 + len(treatments)
    y = data[:, 0]
    x = data[:, 1:k]
    z = data[:, k:k + len(instruments)] if instruments else None
    w = data[:, k + len(instruments):] if proxies else None
    names = {"outcome": [outcome], "treatments": treatments,
             "instruments": instruments, "proxies": proxies}
    return Dataset(y=y, x=x, z=z, w=w, names=names)


def center(d: Dataset) -> tuple[Dataset, CenteringInfo]:
    """Remove column means from every block; returns the centered dataset and
    the means needed to undo it."""
    if d.n < 2:
        raise InputError("centering requires at least two rows")
    y_mean = float(d.y.mean())
    x_mean = d.x.mean(axis=0)
    z_mean = d.z.mean(axis=0) if d.z is not None else None
    w_mean = d.w.mean(axis=0) if d.w is not None else None
    centered = Dataset(
        y=d.y - y_mean,
        x=d.x - x_mean,
        z=None if d.z is None else d.z - z_mean,
        w=None if d.w is None else d.w - w_mean,
        names=d.names,
    )
    return centered, CenteringInfo(y_mean, x_mean, z_mean, w_mean)


def uncenter(d: Dataset, info: CenteringInfo) -> Dataset:
    """Inverse of :func:`center`."""
    return Dataset(
        y=d.y + info.y_mean,
        x=d.x + info.x_mean,
        z=None if d.z is None else d.z + info.z_mean,
        w=None if d.w is None else d.w + info.w_mean,
        names=d.names,
    )
