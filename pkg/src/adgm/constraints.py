"""Matching polytopes, simplex projections, and feasibility checks.

An assignment between ``n1`` source points and ``n2`` target points is a
vector ``x`` of length ``n1 * n2`` laid out column-major: the candidate
pairing source ``i1`` with target ``i2`` lives at ``a = i2 * n1 + i1``.
Viewed as the ``n1 x n2`` matrix ``X`` with ``X[i1, i2] = x[a]``, each side
of the matching constrains its own sums: every row (source point) and every
column (target point) is either matched exactly once, at most once, or left
unconstrained.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Tolerance used by feasibility checks.
FEASIBILITY_TOL = 1e-9


class SideMode(Enum):
    """How one side of the matching constrains its sums."""

    EXACTLY_ONE = "exactly-one"
    AT_MOST_ONE = "at-most-one"
    UNCONSTRAINED = "unconstrained"

    @classmethod
    def parse(cls, text):
        key = str(text).strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown side mode {text!r}")


class SimplexMode(Enum):
    """Which scaled-simplex variant a vector is projected onto."""

    SUM_EQUALS_ONE = "sum-equals-one"
    SUM_AT_MOST_ONE = "sum-at-most-one"
    NONNEGATIVE_ONLY = "nonnegative-only"


_SIDE_TO_SIMPLEX = {
    SideMode.EXACTLY_ONE: SimplexMode.SUM_EQUALS_ONE,
    SideMode.AT_MOST_ONE: SimplexMode.SUM_AT_MOST_ONE,
    SideMode.UNCONSTRAINED: SimplexMode.NONNEGATIVE_ONLY,
}


@dataclass(frozen=True)
class ConstraintSpec:
    """Constraint modes for the two sides of an ``n1 x n2`` matching."""

    n1: int
    n2: int
    row_mode: SideMode = SideMode.EXACTLY_ONE
    col_mode: SideMode = SideMode.EXACTLY_ONE

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("n1 and n2 must be >= 1")
        # A side matched exactly once needs enough partners on the other side.
        if self.row_mode is SideMode.EXACTLY_ONE and self.n1 > self.n2:
            raise ValueError(
                f"every row matched exactly once needs n1 <= n2, got {self.n1} x {self.n2}"
            )
        if self.col_mode is SideMode.EXACTLY_ONE and self.n2 > self.n1:
            raise ValueError(
                f"every column matched exactly once needs n2 <= n1, got {self.n1} x {self.n2}"
            )

    @property
    def n(self):
        """Length of the flat assignment vector."""
        return self.n1 * self.n2

    @classmethod
    def injective(cls, n1, n2):
        """Every point on the smaller side matched once, the larger side
        at most once (both exactly once when the sides are equal)."""
        if n1 == n2:
            return cls(n1, n2, SideMode.EXACTLY_ONE, SideMode.EXACTLY_ONE)
        if n1 < n2:
            return cls(n1, n2, SideMode.EXACTLY_ONE, SideMode.AT_MOST_ONE)
        return cls(n1, n2, SideMode.AT_MOST_ONE, SideMode.EXACTLY_ONE)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    max_violation: float


def assignment_index(i1, i2, n1):
    """Flat index of the candidate pairing source ``i1`` with target ``i2``.

    Accepts scalars or arrays.
    """
    return np.asarray(i2) * n1 + np.asarray(i1)


def as_matrix(x, n1, n2):
    """View the flat assignment vector as its ``n1 x n2`` matrix."""
    return np.asarray(x, dtype=np.float64).reshape((n1, n2), order="F")


def as_vector(matrix):
    """Flatten an ``n1 x n2`` assignment matrix back to its vector."""
    return np.asarray(matrix, dtype=np.float64).ravel(order="F")


def project_simplex(v, mode):
    """Euclidean projection of a vector onto the chosen simplex variant.

    SUM_EQUALS_ONE:   {x >= 0, sum(x) = 1}
    SUM_AT_MOST_ONE:  {x >= 0, sum(x) <= 1}
    NONNEGATIVE_ONLY: {x >= 0}
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot project an empty vector")
    return _project_rows(v[None, :], mode)[0]


def _project_rows(rows, mode):
    """Project each row of a 2-D array onto the chosen simplex variant."""
    rows = np.asarray(rows, dtype=np.float64)
    if mode is SimplexMode.NONNEGATIVE_ONLY:
        return np.maximum(rows, 0.0)

    clipped = np.maximum(rows, 0.0)
    if mode is SimplexMode.SUM_AT_MOST_ONE:
        inside = clipped.sum(axis=1) <= 1.0
        if np.all(inside):
            return clipped
        equality = _project_rows_equality(rows)
        return np.where(inside[:, None], clipped, equality)
    return _project_rows_equality(rows)


def _project_rows_equality(rows):
    """Row-wise projection onto {x >= 0, sum(x) = 1} by sort and threshold."""
    m = rows.shape[1]
    desc = -np.sort(-rows, axis=1)
    csum = np.cumsum(desc, axis=1)
    counts = np.arange(1, m + 1, dtype=np.float64)
    # Largest k with desc_k > (csum_k - 1) / k; the mask is a prefix.
    support = desc - (csum - 1.0) / counts > 0.0
    k = support.sum(axis=1)
    theta = (csum[np.arange(rows.shape[0]), k - 1] - 1.0) / k
    return np.maximum(rows - theta[:, None], 0.0)


def project_rowwise(x, spec):
    """Project each row of the assignment matrix per the row constraint."""
    matrix = as_matrix(x, spec.n1, spec.n2)
    mode = _SIDE_TO_SIMPLEX[spec.row_mode]
    return as_vector(_project_rows(matrix, mode))


def project_colwise(x, spec):
    """Project each column of the assignment matrix per the column constraint."""
    matrix = as_matrix(x, spec.n1, spec.n2)
    mode = _SIDE_TO_SIMPLEX[spec.col_mode]
    return as_vector(_project_rows(matrix.T, mode).T)


def feasibility(x, spec, hard=False, tol=FEASIBILITY_TOL):
    """Check membership of ``x`` in the matching polytope of ``spec``.

    With ``hard=True`` additionally require every entry to be 0 or 1.
    Returns a FeasibilityReport with the largest constraint violation.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.n,):
        raise ValueError(f"x must have shape ({spec.n},), got {x.shape}")
    matrix = as_matrix(x, spec.n1, spec.n2)

    violation = max(float(np.max(-x, initial=0.0)), float(np.max(x - 1.0, initial=0.0)))
    for sums, mode in ((matrix.sum(axis=1), spec.row_mode), (matrix.sum(axis=0), spec.col_mode)):
        if mode is SideMode.EXACTLY_ONE:
            violation = max(violation, float(np.max(np.abs(sums - 1.0))))
        elif mode is SideMode.AT_MOST_ONE:
            violation = max(violation, float(np.max(sums - 1.0, initial=0.0)))
    if hard:
        violation = max(violation, float(np.min(np.abs(np.stack([x, x - 1.0])), axis=0).max()))
    return FeasibilityReport(feasible=violation <= tol, max_violation=violation)
