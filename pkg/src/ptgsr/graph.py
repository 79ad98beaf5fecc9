"""Undirected weighted graphs, Laplacians, and the graph Fourier transform.

The GFT basis is the orthonormal eigenvector set of the combinatorial
Laplacian L = D - W with eigenvalues sorted ascending.  Eigendecompositions
are made deterministic by a sign convention (largest-magnitude entry of each
eigenvector is nonnegative) plus a lexicographic tie-break among equal
eigenvalues, so repeated runs produce identical bases.

Only the real symmetric case is implemented; complex (Hermitian) bases are
out of scope.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetryBeyondTolerance,
    ConvergenceFailure,
    DimensionMismatch,
    DisconnectedResult,
    NegativeWeight,
    NonSquare,
    OutOfRange,
)

SYMMETRY_TOL = 1e-12


def _as_matrix(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {w.shape}")
    return w


def _is_connected(w: np.ndarray) -> bool:
    """Breadth-first traversal over positive-weight edges."""
    n = w.shape[0]
    if n == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(w[i] > 0.0)[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


@dataclass(frozen=True)
class WeightedGraph:
    """Symmetric nonnegative adjacency with zero diagonal."""

    weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def is_connected(self) -> bool:
        return _is_connected(self.weights)


@dataclass(frozen=True)
class Laplacian:
    """Combinatorial Laplacian diag(degrees) - W; symmetric PSD."""

    matrix: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class GftBasis:
    """Orthonormal Laplacian eigenvectors (columns) and ascending eigenvalues."""

    eigenvectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.eigenvectors.shape[0]


def build_graph(weights, require_connected: bool = False) -> WeightedGraph:
    """Validate and symmetrize a weight matrix into a WeightedGraph.

    Symmetry is enforced by averaging (W + W^T)/2 after checking the input is
    symmetric within SYMMETRY_TOL; the diagonal is zeroed.
    """
    w = _as_matrix(weights)
    if not np.isfinite(w).all():
        raise NegativeWeight("weights must be finite")
    asym = np.abs(w - w.T).max(initial=0.0)
    if asym > SYMMETRY_TOL:
        raise AsymmetryBeyondTolerance(
            f"max |W - W^T| = {asym:.3e} exceeds {SYMMETRY_TOL:.0e}"
        )
    if (w < 0.0).any():
        raise NegativeWeight("weights must be nonnegative")
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 0.0)
    w.flags.writeable = False
    g = WeightedGraph(weights=w)
    if require_connected and not g.is_connected():
        raise DisconnectedResult("graph is not connected")
    return g


def laplacian(g: WeightedGraph) -> Laplacian:
    """L = diag(row sums of W) - W."""
    m = np.diag(g.degrees) - g.weights
    m.flags.writeable = False
    return Laplacian(matrix=m)


def _apply_sign_convention(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-|.| entry (lowest index on ties) is >= 0."""
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = int(np.argmax(np.abs(col)))
        if col[idx] < 0.0:
            out[:, k] = -col
    return out


def _order_degenerate(values: np.ndarray, vectors: np.ndarray):
    """Among exactly-equal eigenvalues, order columns descending-lexicographically.

    Descending lexicographic order keeps the identity basis of L = 0 as I.
    """
    order = np.arange(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[j + 1] == values[i]:
            j += 1
        if j > i:
            block = order[i : j + 1]
            keys = sorted(block, key=lambda c: tuple(-vectors[:, c]))
            order[i : j + 1] = keys
        i = j + 1
    return values[order], vectors[:, order]


def gft_basis(l: Laplacian) -> GftBasis:
    """Symmetric eigendecomposition with the deterministic conventions applied."""
    try:
        values, vectors = np.linalg.eigh(l.matrix)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    vectors = _apply_sign_convention(vectors)
    values, vectors = _order_degenerate(values, vectors)
    values = values.copy()
    values.flags.writeable = False
    vectors = np.ascontiguousarray(vectors)
    vectors.flags.writeable = False
    return GftBasis(eigenvectors=vectors, eigenvalues=values)


def gft(basis: GftBasis, x) -> np.ndarray:
    """Frequency-domain coefficients s = U^T x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (basis.n_nodes,):
        raise DimensionMismatch(f"expected length {basis.n_nodes}, got {x.shape}")
    return basis.eigenvectors.T @ x


def igft(basis: GftBasis, s) -> np.ndarray:
    """Node-domain signal x = U s."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (basis.n_nodes,):
        raise DimensionMismatch(f"expected length {basis.n_nodes}, got {s.shape}")
    return basis.eigenvectors @ s


def load_edge_csv(path, n_nodes: int, require_connected: bool = False) -> WeightedGraph:
    """Load a graph from a CSV edge list with rows ``i,j,weight`` (0-based)."""
    w = np.zeros((n_nodes, n_nodes))
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            i, j, weight = int(row[0]), int(row[1]), float(row[2])
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise OutOfRange(f"edge ({i},{j}) outside 0..{n_nodes - 1}")
            w[i, j] = weight
            w[j, i] = weight
    return build_graph(w, require_connected=require_connected)


def load_dense_csv(path, require_connected: bool = False) -> WeightedGraph:
    """Load a graph from a dense CSV weight matrix."""
    w = np.loadtxt(path, delimiter=",", ndmin=2)
    return build_graph(w, require_connected=require_connected)
