"""Hard-assignment extraction and exhaustive enumeration.

``hungarian`` turns a profit matrix into the exact best hard assignment
under the instance's side constraints; ``brute_force_optimum`` enumerates
every hard assignment of a small instance and returns the exact optimizer,
refusing loudly when the instance is too large to enumerate.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
from math import comb, factorial, perm

import numpy as np

from .constraints import ConstraintSpec, SideMode, as_vector
from .errors import OracleRefusalError, UnsupportedConstraintError


@dataclass(frozen=True)
class BruteForceLimits:
    """Size gates for exhaustive enumeration.

    ``max_injective`` bounds min(n1, n2) when one side must be fully
    matched; ``max_occluded`` bounds both sides when both may stay
    unmatched (the candidate count grows much faster there).
    ``max_candidates`` is a defensive cap on the total enumeration size.
    """

    max_injective: int = 7
    max_occluded: int = 5
    max_candidates: int = 2_000_000


def _assignment_min_cost(cost):
    """Exact square linear assignment by augmenting paths with potentials.

    Returns ``match_row`` of length nn+1 where ``match_row[j]`` is the
    1-based row assigned to 1-based column j.  O(n^3) with vectorized
    inner scans.
    """
    nn = cost.shape[0]
    u = np.zeros(nn + 1)
    v = np.zeros(nn + 1)
    match_row = np.zeros(nn + 1, dtype=np.int64)
    way = np.zeros(nn + 1, dtype=np.int64)
    for i in range(1, nn + 1):
        match_row[0] = i
        j0 = 0
        minv = np.full(nn + 1, np.inf)
        used = np.zeros(nn + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match_row[j0]
            # Tighten the tentative costs of unused columns via row i0.
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            better = ~used[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            scan = np.where(used[1:], np.inf, minv[1:])
            j1 = int(np.argmin(scan)) + 1
            delta = scan[j1 - 1]
            # Shift potentials so the chosen column becomes tight.
            u[match_row[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if match_row[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match_row[j0] = match_row[j1]
            j0 = j1
    return match_row


def hungarian(profit, spec):
    """Hard assignment maximizing total profit under ``spec``.

    Sides constrained to at-most-one are handled by padding to a square
    matrix with zero-profit dummy rows/columns, so leaving a point
    unmatched always beats a negative-profit match.  Returns the flat
    0/1 assignment vector; the optimum total is exact.
    """
    profit = np.asarray(profit, dtype=np.float64)
    if profit.shape != (spec.n1, spec.n2):
        raise ValueError(
            f"profit must have shape ({spec.n1}, {spec.n2}), got {profit.shape}"
        )
    if profit.size and not np.all(np.isfinite(profit)):
        raise ValueError("profit entries must be finite")
    if SideMode.UNCONSTRAINED in (spec.row_mode, spec.col_mode):
        raise UnsupportedConstraintError(
            "many-to-many sides have no one-to-one discretization; "
            "threshold the continuous solution instead"
        )

    n1, n2 = spec.n1, spec.n2
    if spec.row_mode is SideMode.EXACTLY_ONE and spec.col_mode is SideMode.EXACTLY_ONE:
        size = n1  # spec guarantees n1 == n2 here
    elif spec.row_mode is SideMode.EXACTLY_ONE:
        size = n2  # dummy rows absorb the surplus columns
    elif spec.col_mode is SideMode.EXACTLY_ONE:
        size = n1  # dummy columns absorb the surplus rows
    else:
        size = n1 + n2  # every real point may go unmatched

    padded = np.zeros((size, size))
    padded[:n1, :n2] = profit
    match_row = _assignment_min_cost(-padded)

    matrix = np.zeros((n1, n2))
    for j in range(1, size + 1):
        i = int(match_row[j])
        if 1 <= i <= n1 and j <= n2:
            matrix[i - 1, j - 1] = 1.0
    return as_vector(matrix)


def _enumerate_hard_assignments(spec):
    """Yield every hard assignment matrix allowed by ``spec``.

    Matrices are int arrays; the caller owns flattening and scoring.
    """
    n1, n2 = spec.n1, spec.n2
    row_exact = spec.row_mode is SideMode.EXACTLY_ONE
    col_exact = spec.col_mode is SideMode.EXACTLY_ONE
    if row_exact and col_exact:
        for cols in permutations(range(n2)):
            matrix = np.zeros((n1, n2))
            matrix[np.arange(n1), cols] = 1.0
            yield matrix
    elif row_exact:
        for cols in permutations(range(n2), n1):
            matrix = np.zeros((n1, n2))
            matrix[np.arange(n1), cols] = 1.0
            yield matrix
    elif col_exact:
        for rows in permutations(range(n1), n2):
            matrix = np.zeros((n1, n2))
            matrix[rows, np.arange(n2)] = 1.0
            yield matrix
    else:
        for k in range(min(n1, n2) + 1):
            for rows in combinations(range(n1), k):
                for cols in permutations(range(n2), k):
                    matrix = np.zeros((n1, n2))
                    matrix[list(rows), list(cols)] = 1.0
                    yield matrix


def _candidate_count(spec):
    n1, n2 = spec.n1, spec.n2
    row_exact = spec.row_mode is SideMode.EXACTLY_ONE
    col_exact = spec.col_mode is SideMode.EXACTLY_ONE
    if row_exact and col_exact:
        return factorial(n1)
    if row_exact:
        return perm(n2, n1)
    if col_exact:
        return perm(n1, n2)
    return sum(comb(n1, k) * comb(n2, k) * factorial(k) for k in range(min(n1, n2) + 1))


def brute_force_optimum(instance, limits=None):
    """Exact optimizer of the instance energy over all hard assignments.

    Returns ``(assignment_vector, energy)`` in the instance's native
    sense.  Ties are broken by the lexicographically smallest assignment
    vector.  Raises OracleRefusalError when the enumeration would exceed
    ``limits`` instead of silently truncating.
    """
    from .solver import Sense, energy  # local import to avoid a module cycle

    if limits is None:
        limits = BruteForceLimits()
    spec = instance.spec
    if SideMode.UNCONSTRAINED in (spec.row_mode, spec.col_mode):
        raise UnsupportedConstraintError(
            "brute force enumerates one-to-one assignments only"
        )
    both_soft = (
        spec.row_mode is SideMode.AT_MOST_ONE and spec.col_mode is SideMode.AT_MOST_ONE
    )
    if both_soft:
        if max(spec.n1, spec.n2) > limits.max_occluded:
            raise OracleRefusalError(
                f"occlusion enumeration needs n1, n2 <= {limits.max_occluded}, "
                f"got {spec.n1} x {spec.n2}"
            )
    elif min(spec.n1, spec.n2) > limits.max_injective:
        raise OracleRefusalError(
            f"injective enumeration needs min(n1, n2) <= {limits.max_injective}, "
            f"got {spec.n1} x {spec.n2}"
        )
    count = _candidate_count(spec)
    if count > limits.max_candidates:
        raise OracleRefusalError(
            f"enumeration of {count} candidates exceeds the cap of "
            f"{limits.max_candidates}"
        )

    maximize = instance.sense is Sense.MAXIMIZE
    best_key = None
    best_vec = None
    best_energy = None
    for matrix in _enumerate_hard_assignments(spec):
        x = as_vector(matrix)
        value = energy(instance, x)
        score = -value if maximize else value
        key = tuple(int(round(e)) for e in x)
        if best_key is None or score < best_key[0] or (
            score == best_key[0] and key < best_key[1]
        ):
            best_key = (score, key)
            best_vec = x
            best_energy = value
    return best_vec, best_energy
