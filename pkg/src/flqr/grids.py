"""Functional-data containers, trapezoid quadrature, and CSV ingestion.

All curves live on a shared grid of abscissae in [0, 1].  Quadrature is
composite trapezoid throughout: it is exact for piecewise-linear curve
representations and keeps every Gram matrix symmetric.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DimensionMismatch,
    GridInvalid,
    GridMismatch,
    InvalidInput,
    ParseError,
)


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Ordered abscissae on [0, 1] with cached trapezoid weights."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(np.asarray(self.points, dtype=float).ravel())
        object.__setattr__(self, "points", pts)
        if pts.size < 4:
            raise GridInvalid(f"grid needs at least 4 points, got {pts.size}")
        if not np.all(np.isfinite(pts)):
            raise GridInvalid("grid contains non-finite abscissae")
        if np.any(np.diff(pts) <= 0):
            raise GridInvalid("grid abscissae must be strictly increasing")
        if abs(pts[0]) > 1e-12 or abs(pts[-1] - 1.0) > 1e-12:
            raise GridInvalid(
                f"grid must span [0, 1], got [{pts[0]}, {pts[-1]}] "
                "(rescale the abscissae affinely before loading)"
            )
        w = np.empty_like(pts)
        w[0] = 0.5 * (pts[1] - pts[0])
        w[-1] = 0.5 * (pts[-1] - pts[-2])
        w[1:-1] = 0.5 * (pts[2:] - pts[:-2])
        object.__setattr__(self, "_weights", _frozen(w))

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights matching :attr:`points`."""
        return self._weights

    @staticmethod
    def uniform(p: int = 101) -> "Grid":
        return Grid(np.linspace(0.0, 1.0, p))

    def matches(self, other: "Grid") -> bool:
        return self.points.shape == other.points.shape and np.array_equal(
            self.points, other.points
        )


@dataclass(frozen=True)
class GridFunction:
    """A function known by its values on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(np.asarray(self.values, dtype=float).ravel())
        object.__setattr__(self, "values", v)
        if v.size != self.grid.size:
            raise DimensionMismatch(
                f"{v.size} values on a {self.grid.size}-point grid"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidInput("grid function has non-finite values")

    @staticmethod
    def from_callable(grid: Grid, fn) -> "GridFunction":
        return GridFunction(grid, fn(grid.points))


@dataclass(frozen=True)
class FunctionalSample:
    """n discretized covariate curves on a shared grid plus scalar responses."""

    grid: Grid
    curves: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.curves, dtype=float)
        y = np.asarray(self.responses, dtype=float).ravel()
        if x.ndim != 2:
            raise DimensionMismatch("curves must be a 2-d array (n rows, p columns)")
        if x.shape[1] != self.grid.size:
            raise DimensionMismatch(
                f"curves have {x.shape[1]} columns but grid has {self.grid.size} points"
            )
        if x.shape[0] != y.size:
            raise DimensionMismatch(
                f"{x.shape[0]} curves but {y.size} responses"
            )
        if x.shape[0] < 2:
            raise InvalidInput("need at least 2 curves")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise InvalidInput("sample contains non-finite entries")
        object.__setattr__(self, "curves", _frozen(x))
        object.__setattr__(self, "responses", _frozen(y))

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    def curve(self, i: int) -> GridFunction:
        return GridFunction(self.grid, self.curves[i])


def integrate(f: GridFunction) -> float:
    """Composite-trapezoid value of the integral of ``f`` over [0, 1]."""
    if not np.all(np.isfinite(f.values)):
        raise InvalidInput("cannot integrate non-finite values")
    return float(f.grid.weights @ f.values)


def inner_l2(f: GridFunction, g: GridFunction) -> float:
    """L2 pairing of two functions on the same grid."""
    if not f.grid.matches(g.grid):
        raise GridMismatch("inner_l2 requires a shared grid")
    return float(f.grid.weights @ (f.values * g.values))


def _parse_row(row, lineno):
    out = np.empty(len(row))
    for j, tok in enumerate(row):
        tok = tok.strip()
        if not tok:
            raise ParseError(f"missing value in column {j + 1}", line=lineno)
        try:
            out[j] = float(tok)
        except ValueError:
            raise ParseError(f"cannot parse {tok!r} in column {j + 1}", line=lineno)
    if not np.all(np.isfinite(out)):
        raise ParseError("non-finite value", line=lineno)
    return out


def load_sample(curves_path, responses_path, rescale_grid: bool = False) -> FunctionalSample:
    """Read a sample from two CSV files.

    The curves file holds the grid abscissae in its first row and one curve
    per subsequent row.  The responses file holds one value per line, in the
    same order.  Rows with any missing value are rejected with their line
    number; nothing is imputed.

    ``rescale_grid`` maps arbitrary increasing abscissae affinely onto [0, 1]
    (for instruments that report physical locations).
    """
    rows = []
    with open(curves_path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not tok.strip() for tok in row):
                continue
            rows.append(_parse_row(row, lineno))
    if len(rows) < 2:
        raise ParseError("curves file needs a grid row plus at least one curve")
    gridvals = rows[0]
    if rescale_grid:
        lo, hi = gridvals[0], gridvals[-1]
        if hi <= lo:
            raise GridInvalid("cannot rescale a non-increasing grid row")
        gridvals = (gridvals - lo) / (hi - lo)
    grid = Grid(gridvals)
    curves = np.empty((len(rows) - 1, grid.size))
    for i, vals in enumerate(rows[1:], start=2):
        if vals.size != grid.size:
            raise ParseError(
                f"curve has {vals.size} values, expected {grid.size}", line=i
            )
        curves[i - 2] = vals

    responses = []
    with open(responses_path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not tok.strip() for tok in row):
                continue
            vals = _parse_row(row, lineno)
            if vals.size != 1:
                raise ParseError("responses file must hold one value per line", line=lineno)
            responses.append(vals[0])
    if len(responses) != curves.shape[0]:
        raise DimensionMismatch(
            f"{curves.shape[0]} curves but {len(responses)} responses"
        )
    return FunctionalSample(grid, curves, np.asarray(responses))


def save_sample(sample: FunctionalSample, curves_path, responses_path) -> None:
    """Write a sample in the format read by :func:`load_sample`.

    Values are written with ``repr`` so that a load/save round trip is exact
    at the bit level.
    """
    with open(curves_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([repr(float(v)) for v in sample.grid.points])
        for row in sample.curves:
            writer.writerow([repr(float(v)) for v in row])
    with open(responses_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for y in sample.responses:
            writer.writerow([repr(float(y))])
