"""Sparse coordinate tensors over assignment vectors.

A matching problem between two point sets is scored by potentials of
increasing order: an order-1 tensor holds unary scores, an order-2 tensor
pairwise scores, an order-3 tensor triple scores, and so on.  Every mode of
such a tensor indexes the same flat space of candidate assignments, so all
modes share a single dimension ``dim``.

Tensors are stored in coordinate format (an ``(nnz, order)`` index array and
a parallel value array) and are canonical by construction: indices sorted
lexicographically, duplicate indices merged by summation, exact zeros
dropped.  Instances are immutable; contraction helpers cache per-mode
scatter matrices on first use.
"""

from __future__ import annotations

from itertools import permutations
from math import factorial

import numpy as np
from scipy import sparse

# Largest combined dimension of the closed modes for which a cached sparse
# matrix is used by partial_contraction.  Beyond this the generic
# gather-multiply-scatter path runs instead (no n**(order-1) work vector).
_MATVEC_CAP = 1 << 20


class SparseTensor:
    """Immutable sparse tensor with ``order`` modes of common size ``dim``."""

    __slots__ = ("order", "dim", "indices", "values", "_contract_cache")

    def __init__(self, order, dim, indices=None, values=None):
        order = int(order)
        dim = int(dim)
        if order < 0:
            raise ValueError(f"order must be >= 0, got {order}")
        if dim < 0:
            raise ValueError(f"dim must be >= 0, got {dim}")

        if indices is None:
            indices = np.empty((0, order), dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        if indices.ndim != 2 or indices.shape[1] != order:
            raise ValueError(
                f"indices must have shape (nnz, {order}), got {indices.shape}"
            )
        if values is None:
            values = np.empty(0, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (indices.shape[0],):
            raise ValueError(
                f"values must have shape ({indices.shape[0]},), got {values.shape}"
            )
        if indices.size and (indices.min() < 0 or indices.max() >= dim):
            raise ValueError("tensor indices out of range [0, dim)")
        if values.size and not np.all(np.isfinite(values)):
            raise ValueError("tensor values must be finite")

        indices, values = _canonicalize(order, indices, values)
        indices.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_contract_cache", {})

    def __setattr__(self, name, value):
        raise AttributeError("SparseTensor is immutable")

    @classmethod
    def empty(cls, order, dim):
        """Tensor with no stored entries."""
        return cls(order, dim)

    @classmethod
    def from_entries(cls, order, dim, entries):
        """Build from ``{index_tuple: value}`` or an iterable of pairs."""
        if isinstance(entries, dict):
            entries = entries.items()
        pairs = list(entries)
        if not pairs:
            return cls(order, dim)
        indices = np.array([idx for idx, _ in pairs], dtype=np.int64)
        if indices.ndim == 1:
            # Entries given as bare ints only make sense for order 1.
            indices = indices.reshape(-1, 1)
        values = np.array([v for _, v in pairs], dtype=np.float64)
        return cls(order, dim, indices, values)

    @property
    def nnz(self):
        return self.values.shape[0]

    def items(self):
        """Yield ``(index_tuple, value)`` in canonical (sorted) order."""
        for row, v in zip(self.indices, self.values):
            yield tuple(int(i) for i in row), float(v)

    def scaled(self, factor):
        """New tensor with every value multiplied by ``factor``."""
        return SparseTensor(self.order, self.dim, self.indices, self.values * factor)

    def __eq__(self, other):
        if not isinstance(other, SparseTensor):
            return NotImplemented
        return (
            self.order == other.order
            and self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"SparseTensor(order={self.order}, dim={self.dim}, nnz={self.nnz})"

    # -- cached contraction helpers ------------------------------------

    def _contraction_operator(self, open_mode):
        """Sparse matrix mapping the combined closed modes to the open mode.

        Row = index along ``open_mode``; column = mixed-radix combination of
        the remaining mode indices in mode order.  Returns None when the
        combined closed dimension would exceed the cache cap.
        """
        key = open_mode
        cached = self._contract_cache.get(key)
        if cached is not None:
            return cached
        closed = [m for m in range(self.order) if m != open_mode - 1]
        combined_dim = self.dim ** len(closed)
        if combined_dim > _MATVEC_CAP:
            return None
        cols = np.zeros(self.nnz, dtype=np.int64)
        for m in closed:
            cols = cols * self.dim + self.indices[:, m]
        op = sparse.csr_matrix(
            (self.values, (self.indices[:, open_mode - 1], cols)),
            shape=(self.dim, combined_dim),
        )
        self._contract_cache[key] = op
        return op


def _canonicalize(order, indices, values):
    """Sort lexicographically, merge duplicate indices, drop exact zeros."""
    if indices.shape[0] == 0:
        return indices.copy(), values.copy()
    if order == 0:
        total = float(values.sum())
        if total == 0.0:
            return np.empty((0, 0), dtype=np.int64), np.empty(0, dtype=np.float64)
        return np.empty((1, 0), dtype=np.int64), np.array([total])
    uniq, inverse = np.unique(indices, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=values, minlength=uniq.shape[0])
    keep = merged != 0.0
    return uniq[keep].copy(), merged[keep]


def multilinear_form(tensor, vectors):
    """Evaluate ``F(x_1, ..., x_D)``: contract every mode with a vector.

    ``vectors`` must hold exactly ``tensor.order`` arrays of length
    ``tensor.dim``.  Returns a float (0.0 for an empty tensor).
    """
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    if len(vectors) != tensor.order:
        raise ValueError(
            f"expected {tensor.order} vectors, got {len(vectors)}"
        )
    for v in vectors:
        if v.shape != (tensor.dim,):
            raise ValueError(f"vectors must have shape ({tensor.dim},)")
    if tensor.nnz == 0:
        return 0.0
    factor = tensor.values.copy()
    for m, v in enumerate(vectors):
        factor *= v[tensor.indices[:, m]]
    return float(factor.sum())


def mode_product(tensor, mode, vector):
    """Contract one mode with a vector, returning an order-1 lower tensor."""
    if not 1 <= mode <= tensor.order:
        raise ValueError(f"mode must be in [1, {tensor.order}], got {mode}")
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (tensor.dim,):
        raise ValueError(f"vector must have shape ({tensor.dim},)")
    new_values = tensor.values * vector[tensor.indices[:, mode - 1]]
    new_indices = np.delete(tensor.indices, mode - 1, axis=1)
    return SparseTensor(tensor.order - 1, tensor.dim, new_indices, new_values)


def partial_contraction(tensor, open_mode, left, right):
    """Contract every mode except ``open_mode`` with the given vectors.

    ``left`` holds vectors for modes ``1 .. open_mode-1`` and ``right`` for
    modes ``open_mode+1 .. order``, each of length ``dim``.  Returns the
    dense length-``dim`` result: for each index ``a`` along the open mode,
    the sum of ``value * prod(closed-mode vector entries)`` over stored
    entries whose open-mode index is ``a``.
    """
    if not 1 <= open_mode <= tensor.order:
        raise ValueError(f"open_mode must be in [1, {tensor.order}], got {open_mode}")
    left = [np.asarray(v, dtype=np.float64) for v in left]
    right = [np.asarray(v, dtype=np.float64) for v in right]
    if len(left) != open_mode - 1:
        raise ValueError(f"expected {open_mode - 1} left vectors, got {len(left)}")
    if len(right) != tensor.order - open_mode:
        raise ValueError(
            f"expected {tensor.order - open_mode} right vectors, got {len(right)}"
        )
    for v in left + right:
        if v.shape != (tensor.dim,):
            raise ValueError(f"vectors must have shape ({tensor.dim},)")
    if tensor.nnz == 0:
        return np.zeros(tensor.dim)

    closed = left + right
    if tensor.order == 1:
        cached = tensor._contract_cache.get("dense1")
        if cached is None:
            cached = np.bincount(
                tensor.indices[:, 0], weights=tensor.values, minlength=tensor.dim
            )
            tensor._contract_cache["dense1"] = cached
        return cached.copy()

    op = tensor._contraction_operator(open_mode)
    if op is not None:
        work = closed[0]
        for v in closed[1:]:
            work = np.multiply.outer(work, v)
        return op @ work.ravel()

    # Generic path: gather closed-mode factors entry by entry, scatter-add.
    factor = tensor.values.copy()
    pos = 0
    for m in range(tensor.order):
        if m == open_mode - 1:
            continue
        factor *= closed[pos][tensor.indices[:, m]]
        pos += 1
    return np.bincount(
        tensor.indices[:, open_mode - 1], weights=factor, minlength=tensor.dim
    )


def symmetrize(tensor):
    """Average the tensor over all permutations of its modes.

    Every stored entry is replaced by ``order!`` permuted copies at
    ``value / order!``; coinciding copies merge.  The multilinear form is
    unchanged when all argument vectors are equal.
    """
    if tensor.order <= 1 or tensor.nnz == 0:
        return SparseTensor(tensor.order, tensor.dim, tensor.indices, tensor.values)
    perms = list(permutations(range(tensor.order)))
    scale = 1.0 / factorial(tensor.order)
    stacked = np.concatenate([tensor.indices[:, perm] for perm in perms], axis=0)
    values = np.tile(tensor.values * scale, len(perms))
    return SparseTensor(tensor.order, tensor.dim, stacked, values)
