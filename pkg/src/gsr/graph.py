"""Neuron/feature graphs: construction, Laplacian algebra, components, spectra.

All graphs here live over the units of a network layer (or the features of
an activation matrix), never over observations. Weights are symmetric,
non-negative, zero on the diagonal. The Laplacian is the unnormalized
L = D - W, positive semi-definite with the constant vector in its nullspace
(one zero mode per connected component).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConvergenceFailure, DegenerateBandwidth, DimensionMismatch

__all__ = [
    "Graph",
    "Laplacian",
    "EigenBasis",
    "build_grid_graph",
    "build_disjoint_pairs_graph",
    "laplacian",
    "adaptive_gaussian_graph",
    "connected_components",
    "eigendecompose",
    "graph_fourier",
    "spectral_penalty",
    "edge_list_tsv",
    "write_edge_tsv",
    "read_edge_tsv",
]

# Bandwidths below this are treated as degenerate duplicates.
BANDWIDTH_FLOOR = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Graph:
    """Symmetric non-negative weighted adjacency over n nodes, zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got {w.shape}")
        if not np.array_equal(w, w.T):
            raise ValueError("adjacency must be exactly symmetric")
        if np.any(w < 0):
            raise ValueError("edge weights must be non-negative")
        if np.any(np.diag(w) != 0):
            raise ValueError("diagonal must be zero (no self loops)")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights, k=1)))

    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)


@dataclass(frozen=True)
class Laplacian:
    """L = D - W for a Graph; rows sum to zero, symmetric PSD."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"Laplacian must be square, got {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EigenBasis:
    """Eigenpairs of a Laplacian: eigenvalues ascending, orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        vecs = np.asarray(self.eigenvectors, dtype=np.float64)
        if vecs.shape != (vals.shape[0], vals.shape[0]):
            raise DimensionMismatch(
                f"eigenvector matrix {vecs.shape} does not match {vals.shape[0]} eigenvalues"
            )
        object.__setattr__(self, "eigenvalues", _frozen(vals))
        object.__setattr__(self, "eigenvectors", _frozen(vecs))

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


def build_grid_graph(rows: int, cols: int) -> Graph:
    """4-neighbor lattice with unit weights, nodes in row-major order."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    n = rows * cols
    w = np.zeros((n, n))
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                w[i, i + 1] = w[i + 1, i] = 1.0
            if r + 1 < rows:
                j = (r + 1) * cols + c
                w[i, j] = w[j, i] = 1.0
    return Graph(w)


def build_disjoint_pairs_graph(pair_count: int) -> Graph:
    """2k nodes, unit edge between 2i and 2i+1, nothing else."""
    if pair_count < 1:
        raise ValueError("pair_count must be >= 1")
    n = 2 * pair_count
    w = np.zeros((n, n))
    for i in range(pair_count):
        w[2 * i, 2 * i + 1] = w[2 * i + 1, 2 * i] = 1.0
    return Graph(w)


def laplacian(g: Graph) -> Laplacian:
    """L = D - W with D the diagonal degree matrix."""
    m = np.diag(g.degrees()) - g.weights
    return Laplacian(m)


def _as_activation_array(activations) -> np.ndarray:
    """Accept a raw batch x feature array or anything exposing .values."""
    values = getattr(activations, "values", activations)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionMismatch(f"activations must be 2-D, got {arr.shape}")
    return arr


def adaptive_gaussian_graph(activations, k: int) -> Graph:
    """Feature graph from co-activations via an adaptive Gaussian kernel.

    Each feature column is a point in batch-dimensional space. With d_ij the
    Euclidean distance between columns and sigma_i the distance to column i's
    k-th nearest other column, the weight is

        w_ij = exp(-d_ij^2 / sigma_i^2) / 2 + exp(-d_ij^2 / sigma_j^2) / 2.

    The two-term average keeps the matrix exactly symmetric even though the
    bandwidth is per-node. Bandwidths are floored at BANDWIDTH_FLOOR; if some
    feature is identical to every other feature the kernel row would degenerate
    to all ones, so DegenerateBandwidth is raised instead.
    """
    z = _as_activation_array(activations)
    n = z.shape[1]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k + 1:
        raise ValueError(f"need at least k+1={k + 1} feature columns, got {n}")

    diff = z[:, :, None] - z[:, None, :]
    d2 = np.einsum("bij,bij->ij", diff, diff)
    np.fill_diagonal(d2, 0.0)

    # k-th nearest *other* column: sort each row excluding the diagonal zero.
    order = np.sort(d2 + np.diag(np.full(n, np.inf)), axis=1)
    sigma2 = np.maximum(order[:, k - 1], BANDWIDTH_FLOOR**2)

    off_diag_max = (d2 + np.diag(np.full(n, -np.inf))).max(axis=1)
    degenerate = np.flatnonzero(off_diag_max == 0.0)
    if degenerate.size:
        raise DegenerateBandwidth(
            f"feature {int(degenerate[0])} is identical to every other feature"
        )

    half = 0.5 * np.exp(-d2 / sigma2[:, None])
    w = half + half.T
    np.fill_diagonal(w, 0.0)
    return Graph(w)


def connected_components(g: Graph, threshold: float = 1e-4) -> tuple[int, np.ndarray]:
    """Count components after dropping edges with weight < threshold.

    Kernel graphs are dense with tiny weights everywhere, so pruning is what
    makes the count meaningful. Labels are component ids in [0, count),
    ordered by each component's smallest member node.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    w = g.weights
    n = g.n
    keep = (w > 0) & (w >= threshold)

    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    ii, jj = np.nonzero(np.triu(keep, k=1))
    for i, j in zip(ii.tolist(), jj.tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    labels = np.empty(n, dtype=np.int64)
    root_to_label: dict[int, int] = {}
    for v in range(n):
        r = find(v)
        if r not in root_to_label:
            root_to_label[r] = len(root_to_label)
        labels[v] = root_to_label[r]
    return len(root_to_label), labels


def eigendecompose(
    l: Laplacian,
    tol: float = 1e-10,
    max_sweeps: int | None = None,
) -> EigenBasis:
    """Full eigendecomposition by cyclic Jacobi rotations.

    Deterministic: fixed sweep order, eigenvalues sorted ascending, each
    eigenvector's largest-magnitude entry made positive. Convergence is the
    off-diagonal Frobenius norm dropping below `tol`; the budget defaults to
    100 * n^2 sweeps, which in practice is never approached.
    """
    a = np.array(l.matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    if max_sweeps is None:
        max_sweeps = 100 * n * n

    def off_norm(m: np.ndarray) -> float:
        off = m - np.diag(np.diag(m))
        return float(np.sqrt(np.sum(off * off)))

    sweeps = 0
    while off_norm(a) >= tol:
        if sweeps >= max_sweeps:
            raise ConvergenceFailure(
                f"Jacobi sweeps exhausted ({max_sweeps}) at off-norm {off_norm(a):.3e}"
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
        sweeps += 1

    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = v[:, order]
    for j in range(n):
        lead = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return EigenBasis(vals, vecs)


def graph_fourier(basis: EigenBasis, z: Sequence[float] | np.ndarray) -> np.ndarray:
    """Project a node signal onto the Laplacian eigenbasis."""
    zv = np.asarray(z, dtype=np.float64)
    if zv.shape != (basis.n,):
        raise DimensionMismatch(f"signal shape {zv.shape} does not match n={basis.n}")
    return basis.eigenvectors.T @ zv


def spectral_penalty(
    basis: EigenBasis,
    z: Sequence[float] | np.ndarray,
    mu: Callable[[float], float],
) -> float:
    """Filtered spectral energy sum_j mu(lambda_j) * coeff_j^2.

    Eigenvalues within the [-1e-8, 0) tolerance band are clamped to zero
    before mu is applied. mu must be non-negative on the spectrum; the
    identity filter makes this equal to the Laplacian quadratic form.
    """
    coeffs = graph_fourier(basis, z)
    lam = np.maximum(basis.eigenvalues, 0.0)
    weights = np.array([float(mu(x)) for x in lam])
    if np.any(weights < 0):
        raise ValueError("mu must be non-negative on the spectrum")
    return float(np.sum(weights * coeffs * coeffs))


def edge_list_tsv(g: Graph) -> str:
    """Serialize as a TSV edge list: header '#nodes=<n>', then src, dst, weight.

    Rows are emitted with src < dst, ordered by (src, dst); weights print with
    9 significant digits, so a round trip quantizes weights at that precision.
    """
    lines = [f"#nodes={g.n}"]
    w = g.weights
    for i in range(g.n):
        for j in range(i + 1, g.n):
            if w[i, j] > 0:
                lines.append(f"{i}\t{j}\t{w[i, j]:.9g}")
    return "\n".join(lines) + "\n"


def write_edge_tsv(g: Graph, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(edge_list_tsv(g))


def read_edge_tsv(path) -> Graph:
    """Parse an edge-list TSV written by write_edge_tsv."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#nodes="):
        raise ValueError(f"{path}: missing '#nodes=' header")
    n = int(lines[0].split("=", 1)[1])
    w = np.zeros((n, n))
    for ln in lines[1:]:
        parts = ln.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}: bad edge line {ln!r}")
        i, j, weight = int(parts[0]), int(parts[1]), float(parts[2])
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"{path}: node index out of range in {ln!r}")
        w[i, j] = w[j, i] = weight
    return Graph(w)
