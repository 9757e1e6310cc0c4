"""Monotonization of conditional-quantile estimates across tau.

Two devices enforce monotonicity of tau -> Q(tau | x) on a finite tau grid:
sorting (the discrete inverse of the induced distribution function) and
L2 isotonic regression via pool-adjacent-violators.  Their convex
combination weakly improves on the raw path in every L_q distance to any
monotone target, for any fixed weight.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, InvalidInput, InvalidTauGrid

DEFAULT_WEIGHT = 0.5


def default_tau_grid(count: int = 21, lo: float = 0.1, hi: float = 0.9) -> np.ndarray:
    return np.linspace(lo, hi, count)


@dataclass(frozen=True)
class QuantilePath:
    """Conditional-quantile estimates over an increasing tau grid."""

    taus: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)
        if taus.size != values.size:
            raise InvalidInput("taus and values differ in length")
        if taus.size == 0:
            raise InvalidTauGrid("empty quantile path")
        if np.any(taus <= 0) or np.any(taus >= 1):
            raise InvalidTauGrid("tau grid must lie inside (0, 1)")
        if taus.size > 1 and np.any(np.diff(taus) <= 0):
            raise InvalidTauGrid("tau grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("quantile path has non-finite values")

    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))


def rearrange(path: QuantilePath) -> QuantilePath:
    """Sorting-based rearrangement: rank j takes the j-th order statistic."""
    if path.taus.size < 2:
        raise InvalidInput("rearrangement needs at least 2 grid points")
    return QuantilePath(path.taus, np.sort(path.values, kind="stable"))


def pava(path: QuantilePath) -> QuantilePath:
    """L2 isotonic regression by pool-adjacent-violators."""
    v = path.values
    # (level value, weight) blocks; merge while the tail decreases.
    levels = np.empty(v.size)
    weights = np.empty(v.size)
    k = 0
    for x in v:
        levels[k] = x
        weights[k] = 1.0
        k += 1
        while k > 1 and levels[k - 2] > levels[k - 1]:
            merged = (
                levels[k - 2] * weights[k - 2] + levels[k - 1] * weights[k - 1]
            ) / (weights[k - 2] + weights[k - 1])
            weights[k - 2] += weights[k - 1]
            levels[k - 2] = merged
            k -= 1
    out = np.empty_like(v)
    pos = 0
    for j in range(k):
        cnt = int(round(weights[j]))
        out[pos : pos + cnt] = levels[j]
        pos += cnt
    return QuantilePath(path.taus, out)


def combine(path: QuantilePath, weight: float = DEFAULT_WEIGHT) -> QuantilePath:
    """Convex combination weight*rearranged + (1-weight)*isotonic."""
    if not 0.0 <= weight <= 1.0:
        raise DomainError(f"combination weight must lie in [0, 1], got {weight}")
    re = rearrange(path)
    iso = pava(path)
    return QuantilePath(path.taus, weight * re.values + (1.0 - weight) * iso.values)


def monotonize_table(path: QuantilePath, weight: float = DEFAULT_WEIGHT):
    """All four paths (raw, rearranged, isotonic, combined) as columns."""
    re = rearrange(path)
    iso = pava(path)
    comb = QuantilePath(path.taus, weight * re.values + (1.0 - weight) * iso.values)
    return {
        "tau": path.taus,
        "raw": path.values,
        "rearranged": re.values,
        "isotonic": iso.values,
        "combined": comb.values,
    }


def save_table(path, table: dict) -> None:
    cols = ["tau", "raw", "rearranged", "isotonic", "combined"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in zip(*(table[c] for c in cols)):
            writer.writerow([repr(float(x)) for x in row])
