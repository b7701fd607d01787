"""Text file formats: point sets, edge lists, tensors, instances,
solutions, and solver traces.

All formats are line-oriented UTF-8 text with ``#`` comments and blank
lines ignored.  Floats are written with ``repr`` so reads round-trip
bit-exactly.  See the README for worked examples of every format.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .constraints import ConstraintSpec, SideMode, as_matrix
from .solver import MatchingInstance, Sense
from .tensor import SparseTensor


def _data_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _fmt(value):
    return repr(float(value))


# -- point sets -------------------------------------------------------


def write_points(path, points):
    """Point-set file: header line ``n``, then one ``x y`` line per point."""
    points = np.asarray(points, dtype=np.float64)
    lines = [str(points.shape[0])]
    lines += [f"{_fmt(x)} {_fmt(y)}" for x, y in points]
    Path(path).write_text("\n".join(lines) + "\n")


def read_points(path):
    lines = list(_data_lines(Path(path).read_text()))
    if not lines:
        raise ValueError(f"{path}: empty point file")
    count = int(lines[0])
    if len(lines) - 1 != count:
        raise ValueError(f"{path}: expected {count} points, found {len(lines) - 1}")
    points = np.array([[float(f) for f in line.split()] for line in lines[1:]])
    if count and points.shape != (count, 2):
        raise ValueError(f"{path}: points must have two coordinates")
    return points.reshape(count, 2)


# -- edge lists -------------------------------------------------------


def write_edges(path, edges):
    """Edge-list file: one ``i j`` line per unordered edge."""
    lines = [f"{int(i)} {int(j)}" for i, j in edges]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_edges(path):
    edges = []
    for line in _data_lines(Path(path).read_text()):
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: edge lines need two indices, got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return edges


# -- unary score matrices ---------------------------------------------


def write_unary(path, matrix):
    """Unary matrix file: header ``n1 n2``, then one row per line."""
    matrix = np.asarray(matrix, dtype=np.float64)
    lines = [f"{matrix.shape[0]} {matrix.shape[1]}"]
    lines += [" ".join(_fmt(v) for v in row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n")


def read_unary(path):
    lines = list(_data_lines(Path(path).read_text()))
    if not lines:
        raise ValueError(f"{path}: empty unary file")
    n1, n2 = (int(p) for p in lines[0].split())
    rows = [[float(f) for f in line.split()] for line in lines[1:]]
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), -1)
    if matrix.shape != (n1, n2):
        raise ValueError(f"{path}: expected a {n1} x {n2} matrix, got {matrix.shape}")
    return matrix


# -- tensors ----------------------------------------------------------


def tensor_to_lines(tensor):
    """Tensor section: header ``order D dim n`` then ``i_1 ... i_D value``
    per entry (0-based indices, canonical order)."""
    lines = [f"order {tensor.order} dim {tensor.dim}"]
    for idx, value in tensor.items():
        lines.append(" ".join(str(i) for i in idx) + f" {_fmt(value)}")
    return lines


def tensor_from_lines(lines):
    lines = list(lines)
    if not lines:
        raise ValueError("tensor section is empty")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "order" or head[2] != "dim":
        raise ValueError(f"bad tensor header {lines[0]!r}")
    order, dim = int(head[1]), int(head[3])
    indices = []
    values = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != order + 1:
            raise ValueError(
                f"tensor entry needs {order} indices and a value, got {line!r}"
            )
        indices.append([int(p) for p in parts[:order]])
        values.append(float(parts[order]))
    indices = np.array(indices, dtype=np.int64).reshape(len(values), order)
    return SparseTensor(order, dim, indices, np.array(values))


def write_tensor(path, tensor):
    Path(path).write_text("\n".join(tensor_to_lines(tensor)) + "\n")


def read_tensor(path):
    return tensor_from_lines(_data_lines(Path(path).read_text()))


# -- ground truth -----------------------------------------------------


def truth_to_row_targets(truth, n1, n2):
    """Convert a hard assignment vector to per-row target indices (-1 =
    unmatched)."""
    matrix = as_matrix(truth, n1, n2)
    targets = np.full(n1, -1, dtype=np.int64)
    rows, cols = np.nonzero(matrix)
    targets[rows] = cols
    return targets


def row_targets_to_truth(targets, n1, n2):
    """Inverse of truth_to_row_targets."""
    matrix = np.zeros((n1, n2))
    for i, j in enumerate(targets):
        if j >= 0:
            matrix[i, int(j)] = 1.0
    return matrix.ravel(order="F")


def write_truth(path, truth, n1, n2):
    """Truth file: one ``i j`` line per matched pair."""
    targets = truth_to_row_targets(truth, n1, n2)
    lines = [f"{i} {int(j)}" for i, j in enumerate(targets) if j >= 0]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_truth(path, n1, n2):
    targets = np.full(n1, -1, dtype=np.int64)
    for line in _data_lines(Path(path).read_text()):
        i, j = (int(p) for p in line.split())
        if not (0 <= i < n1 and 0 <= j < n2):
            raise ValueError(f"{path}: pair ({i}, {j}) out of range")
        targets[i] = j
    return row_targets_to_truth(targets, n1, n2)


# -- matching instances -----------------------------------------------

_MAGIC = "matching-instance"


def write_instance(path, instance):
    """Self-describing instance container: sizes, side modes, sense, an
    optional truth line (per-row target index, -1 = unmatched), then one
    ``tensor`` section per potential order."""
    lines = [
        _MAGIC,
        f"n1 {instance.n1}",
        f"n2 {instance.n2}",
        f"rows {instance.spec.row_mode.value}",
        f"cols {instance.spec.col_mode.value}",
        f"sense {instance.sense.value}",
    ]
    if instance.ground_truth is not None:
        targets = truth_to_row_targets(instance.ground_truth, instance.n1, instance.n2)
        lines.append("truth " + " ".join(str(int(j)) for j in targets))
    for tensor in instance.potentials:
        lines.append("tensor")
        lines.extend(tensor_to_lines(tensor))
    Path(path).write_text("\n".join(lines) + "\n")


def read_instance(path):
    lines = list(_data_lines(Path(path).read_text()))
    if not lines or lines[0] != _MAGIC:
        raise ValueError(f"{path}: not an instance file (missing {_MAGIC!r} header)")
    fields = {}
    truth_targets = None
    sections = []
    pos = 1
    while pos < len(lines) and lines[pos] != "tensor":
        key, _, rest = lines[pos].partition(" ")
        if key == "truth":
            truth_targets = [int(p) for p in rest.split()]
        elif key in ("n1", "n2", "rows", "cols", "sense"):
            fields[key] = rest.strip()
        else:
            raise ValueError(f"{path}: unknown instance field {key!r}")
        pos += 1
    while pos < len(lines):
        # lines[pos] == "tensor"
        pos += 1
        section = []
        while pos < len(lines) and lines[pos] != "tensor":
            section.append(lines[pos])
            pos += 1
        sections.append(tensor_from_lines(section))

    missing = {"n1", "n2", "rows", "cols", "sense"} - set(fields)
    if missing:
        raise ValueError(f"{path}: missing instance fields {sorted(missing)}")
    n1, n2 = int(fields["n1"]), int(fields["n2"])
    spec = ConstraintSpec(
        n1, n2, SideMode.parse(fields["rows"]), SideMode.parse(fields["cols"])
    )
    n = n1 * n2
    by_order = {}
    for tensor in sections:
        if tensor.dim != n:
            raise ValueError(f"{path}: tensor dim {tensor.dim} does not match n={n}")
        if tensor.order in by_order:
            raise ValueError(f"{path}: duplicate tensor of order {tensor.order}")
        by_order[tensor.order] = tensor
    max_order = max(by_order) if by_order else 1
    potentials = tuple(
        by_order.get(k, SparseTensor.empty(k, n)) for k in range(1, max_order + 1)
    )
    truth = None
    if truth_targets is not None:
        if len(truth_targets) != n1:
            raise ValueError(f"{path}: truth line must list {n1} targets")
        truth = row_targets_to_truth(truth_targets, n1, n2)
    return MatchingInstance(
        n1, n2, potentials, spec, Sense.parse(fields["sense"]), truth
    )


# -- solutions and traces ---------------------------------------------


def write_solution(path, assignment, n1, n2, metadata=None):
    """Solution file: ``# key value`` metadata lines, then one matched
    ``i j`` pair per line."""
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key} {value}")
    targets = truth_to_row_targets(assignment, n1, n2)
    lines += [f"{i} {int(j)}" for i, j in enumerate(targets) if j >= 0]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def write_trace(path, rows):
    """Solver trace CSV: iteration, residual, rho, energy."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "residual", "rho", "energy"])
        for iteration, res, rho, energy_value in rows:
            writer.writerow([iteration, _fmt(res), _fmt(rho), _fmt(energy_value)])
