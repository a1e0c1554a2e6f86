"""Regression labels -> soft class memberships, and entropy over the result.

Continuous labels are binned into r uniform classes, distances to the bin
centers are softened row-wise with a softmax, and the resulting row-stochastic
membership matrix plays the role of the assignment matrix in the structural
entropy loss.  ``soft_cuts`` / ``soft_volumes`` are brute-force summation
oracles for the matrix form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .autodiff import DimensionError, Tensor, constant
from .entropy import AdjacencyMatrix, AssignmentMatrix, se_loss_matrix


@dataclass(frozen=True)
class BinSpec:
    """Uniform-width bins over [lo, hi] with midpoint centers."""

    lo: float
    hi: float
    centers: tuple[float, ...]

    @property
    def num_bins(self) -> int:
        return len(self.centers)


def make_bins(lo: float, hi: float, num_bins: int) -> BinSpec:
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if num_bins < 2:
        raise ValueError(f"need at least 2 bins, got {num_bins}")
    width = (hi - lo) / num_bins
    centers = tuple(lo + (j + 0.5) * width for j in range(num_bins))
    return BinSpec(float(lo), float(hi), centers)


def distance_matrix(labels, bins: BinSpec) -> Tensor:
    """|label_i - center_j| as a constant n x r tensor.

    Labels outside [lo, hi] are accepted (the distances stay well defined)
    but trigger a warning, since they usually indicate a range mistake.
    """
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim != 1:
        raise DimensionError("labels must be a 1-D sequence")
    if not np.all(np.isfinite(y)):
        raise ValueError("labels must be finite")
    if y.size and (y.min() < bins.lo or y.max() > bins.hi):
        warnings.warn(f"labels outside declared range [{bins.lo}, {bins.hi}]",
                      stacklevel=2)
    centers = np.asarray(bins.centers)
    return constant(np.abs(y[:, None] - centers[None, :]))


def soften(distances: Tensor, temperature: float = 1.0) -> AssignmentMatrix:
    """Row-stochastic membership: softmax of negated distances.

    Closer bin centers get higher probability; temperature 1 is the plain
    softmax, smaller values approach the hard nearest-bin limit.  The result
    carries no gradient (labels are data).
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    d = distances.values
    membership = constant(-d / temperature).softmax(axis=1)
    return AssignmentMatrix(constant(membership.values), mode="soft")


def nearest_bin(labels, bins: BinSpec) -> np.ndarray:
    """Hard nearest-center class ids (ties resolve to the lower index)."""
    y = np.asarray(labels, dtype=np.float64)
    centers = np.asarray(bins.centers)
    return np.argmin(np.abs(y[:, None] - centers[None, :]), axis=1)


def soft_volumes(adj: AdjacencyMatrix, assignment: AssignmentMatrix) -> np.ndarray:
    """Per-class soft volumes sum_i Y'_ij * d_i, by direct summation.

    Conserves the graph volume: the values sum to vol(G) for any
    row-stochastic membership.
    """
    m = assignment.membership.values
    if m.shape[0] != adj.n:
        raise DimensionError(f"membership has {m.shape[0]} rows, graph has {adj.n}")
    degrees = adj.degrees
    out = np.zeros(m.shape[1])
    for j in range(m.shape[1]):
        acc = 0.0
        for i in range(m.shape[0]):
            acc += m[i, j] * degrees[i]
        out[j] = acc
    return out


def soft_cuts(adj: AdjacencyMatrix, assignment: AssignmentMatrix) -> np.ndarray:
    """Per-class soft cuts sum_{i,k} A_ik * Y'_kj * (1 - Y'_ij), by direct summation.

    Each edge weight is scaled by the probability that one endpoint belongs
    to the class and the other does not; reduces to the hard cut for one-hot
    memberships.
    """
    m = assignment.membership.values
    if m.shape[0] != adj.n:
        raise DimensionError(f"membership has {m.shape[0]} rows, graph has {adj.n}")
    a = adj.weights.values
    n, r = m.shape
    out = np.zeros(r)
    for j in range(r):
        acc = 0.0
        for i in range(n):
            for k in range(n):
                acc += a[i, k] * m[k, j] * (1.0 - m[i, j])
        out[j] = acc
    return out


def soft_se_loss(adj: AdjacencyMatrix, assignment: AssignmentMatrix) -> Tensor:
    """Structural entropy loss over a probabilistic (soft) assignment.

    Same matrix formula as the hard case with C = Y'; the membership matrix
    is treated as a constant, so gradients reach only the adjacency side.
    """
    return se_loss_matrix(adj, assignment)
