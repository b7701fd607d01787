"""Shared random generators for the test suite."""

from __future__ import annotations

import numpy as np

from adgm.constraints import ConstraintSpec
from adgm.solver import MatchingInstance, Sense, SolverState
from adgm.tensor import SparseTensor


def random_sparse_tensor(rng, order, dim, nnz=None, scale=1.0):
    if nnz is None:
        nnz = int(rng.integers(0, min(dim**order, 30) + 1))
    indices = rng.integers(0, dim, size=(nnz, order))
    values = rng.normal(0.0, scale, size=nnz)
    return SparseTensor(order, dim, indices, values)


def random_instance(rng, n1, n2, max_order=2, sense=Sense.MINIMIZE, spec=None, nnz=None):
    """Instance with random sparse potentials at every order 1..max_order."""
    if spec is None:
        spec = ConstraintSpec.injective(n1, n2)
    n = n1 * n2
    potentials = []
    for d in range(1, max_order + 1):
        count = min(nnz if nnz is not None else max(1, 2 * n), n**d)
        potentials.append(random_sparse_tensor(rng, d, n, count))
    return MatchingInstance(n1, n2, tuple(potentials), spec, sense)


def dense_random_instance(rng, n1, n2, sense=Sense.MINIMIZE, spec=None):
    """Pairwise instance whose potentials have full support (every cell)."""
    if spec is None:
        spec = ConstraintSpec(n1, n2)
    n = n1 * n2
    first = SparseTensor(1, n, np.arange(n)[:, None], rng.normal(0.0, 1.0, n))
    grid = np.stack(
        np.meshgrid(np.arange(n), np.arange(n), indexing="ij"), axis=-1
    ).reshape(-1, 2)
    second = SparseTensor(2, n, grid, rng.normal(0.0, 1.0, n * n))
    return MatchingInstance(n1, n2, (first, second), spec, sense)


def random_state(rng, instance, rho=None):
    """Synthetic mid-run solver state with random blocks and multipliers."""
    D = instance.order
    n = instance.n
    return SolverState(
        blocks=[rng.random(n) for _ in range(D)],
        prev_blocks=[rng.random(n) for _ in range(D)],
        multipliers=[rng.normal(0.0, 1.0, n) for _ in range(D - 1)],
        rho=float(rng.uniform(0.5, 3.0)) if rho is None else rho,
    )
