"""Graph container, normalised operators and the Laplacian eigensystem."""

from __future__ import annotations

import csv
import enum
import io
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
import numpy.typing as npt

from .errors import DataError

ZERO_EIGEN_TOL = 1e-9

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n_nodes-1``.

    ``adjacency`` is a dense 0/1 matrix; ``neighbours`` holds the sorted
    neighbour indices of every node for O(d_i) access by the samplers.
    """

    n_nodes: int
    adjacency: npt.NDArray[np.int8]
    neighbours: tuple[npt.NDArray[np.intp], ...] = field(repr=False)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build a graph from 0-based edge pairs; duplicates are idempotent."""
        if n_nodes < 1:
            raise DataError("graph needs at least one node")
        a = np.zeros((n_nodes, n_nodes), dtype=np.int8)
        for i, j in edges:
            if i == j:
                raise DataError(f"self-loop at node {i + 1}")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise DataError(f"edge ({i + 1}, {j + 1}) outside 1..{n_nodes}")
            a[i, j] = a[j, i] = 1
        return cls.from_adjacency(a)

    @classmethod
    def from_adjacency(cls, adjacency: npt.ArrayLike) -> "Graph":
        a = np.asarray(adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DataError("adjacency must be square")
        if not np.isin(a, (0, 1)).all():
            raise DataError("adjacency must be binary")
        if not np.array_equal(a, a.T):
            raise DataError("adjacency must be symmetric")
        if np.any(np.diag(a)):
            raise DataError("self-loops are not allowed")
        a = a.astype(np.int8)
        a.setflags(write=False)
        nbrs = tuple(np.flatnonzero(row) for row in a)
        for nb in nbrs:
            nb.setflags(write=False)
        return cls(a.shape[0], a, nbrs)

    @property
    def degrees(self) -> npt.NDArray[np.int64]:
        return self.adjacency.sum(axis=1, dtype=np.int64)

    @property
    def n_edges(self) -> int:
        return int(self.degrees.sum()) // 2

    def is_connected(self) -> bool:
        seen = np.zeros(self.n_nodes, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in self.neighbours[i]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        return bool(seen.all())


def load_edge_list(text: str | TextIO) -> Graph:
    """Parse a 1-based whitespace-separated edge list; ``#`` starts a comment line."""
    if not isinstance(text, str):
        text = text.read()
    edges = []
    n = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise DataError(f"line {lineno}: expected two node ids, got {line!r}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise DataError(f"line {lineno}: non-integer node id in {line!r}") from None
        if i < 1 or j < 1:
            raise DataError(f"line {lineno}: node ids are 1-based positive integers")
        if i == j:
            raise DataError(f"line {lineno}: self-loop {i} {j}")
        edges.append((i - 1, j - 1))
        n = max(n, i, j)
    if not edges:
        raise DataError("edge list is empty")
    return Graph.from_edges(n, edges)


def read_edge_list(path: str | Path) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return load_edge_list(fh)


def load_labels(text: str | TextIO, n_nodes: int) -> FloatArray:
    """Parse ``node_id,label`` rows (optional header) into a 0/1 vector of length ``n_nodes``."""
    if isinstance(text, str):
        text = io.StringIO(text)
    y = np.full(n_nodes, np.nan)
    for row in csv.reader(text):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if len(row) != 2:
            raise DataError(f"label row must be node_id,label: {row!r}")
        try:
            node, label = int(row[0]), int(row[1])
        except ValueError:
            if row[0].strip().lower() == "node_id":
                continue
            raise DataError(f"bad label row {row!r}") from None
        if not 1 <= node <= n_nodes:
            raise DataError(f"label for unknown node {node}")
        if label not in (0, 1):
            raise DataError(f"label for node {node} must be 0 or 1, got {label}")
        y[node - 1] = label
    missing = np.flatnonzero(np.isnan(y))
    if missing.size:
        raise DataError(f"no label for node(s) {', '.join(str(i + 1) for i in missing[:10])}")
    return y


def read_labels(path: str | Path, n_nodes: int) -> FloatArray:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_labels(fh, n_nodes)


def karate_club() -> tuple[Graph, FloatArray]:
    """Zachary's karate club with the members split (1 = instructor's faction)."""
    data = resources.files("graphsee") / "data"
    g = load_edge_list(data.joinpath("karate_edges.txt").read_text(encoding="utf-8"))
    y = load_labels(data.joinpath("karate_labels.csv").read_text(encoding="utf-8"), g.n_nodes)
    return g, y


def _require_no_isolated(g: Graph) -> npt.NDArray[np.int64]:
    d = g.degrees
    isolated = np.flatnonzero(d == 0)
    if isolated.size:
        raise DataError(f"node {isolated[0] + 1} is isolated; normalised adjacency undefined")
    return d


def normalized_adjacency(g: Graph) -> FloatArray:
    """M = D^{-1/2} A D^{-1/2}."""
    d = _require_no_isolated(g)
    s = 1.0 / np.sqrt(d)
    return g.adjacency * np.outer(s, s)


def looped_normalized_adjacency(g: Graph) -> FloatArray:
    """(I + D)^{-1/2} (I + A) (I + D)^{-1/2}."""
    s = 1.0 / np.sqrt(1.0 + g.degrees)
    return (g.adjacency + np.eye(g.n_nodes)) * np.outer(s, s)


def normalized_laplacian(g: Graph) -> FloatArray:
    return np.eye(g.n_nodes) - normalized_adjacency(g)


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigen-decomposition; ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``."""

    eigenvalues: FloatArray
    eigenvectors: FloatArray
    fiedler_index: int

    @property
    def fiedler_value(self) -> float:
        return float(self.eigenvalues[self.fiedler_index])

    @property
    def fiedler_vector(self) -> FloatArray:
        return self.eigenvectors[:, self.fiedler_index]

    def rank_of(self, k: int) -> int:
        """Rank of column ``k`` when eigenvalues are ordered decreasingly (1-based)."""
        return len(self.eigenvalues) - k


def eigensystem(laplacian: npt.ArrayLike) -> EigenSystem:
    """Full sorted eigen-decomposition of a symmetric matrix.

    Each eigenvector is signed so that its largest-magnitude entry is positive.
    """
    lap = np.asarray(laplacian, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise DataError("eigensystem needs a square matrix")
    if not np.allclose(lap, lap.T, rtol=0.0, atol=1e-12):
        raise DataError("eigensystem needs a symmetric matrix")
    vals, vecs = np.linalg.eigh(lap)
    peak = np.abs(vecs).argmax(axis=0)
    signs = np.sign(vecs[peak, np.arange(vecs.shape[1])])
    vecs = vecs * np.where(signs == 0, 1.0, signs)
    above = np.flatnonzero(vals > ZERO_EIGEN_TOL)
    if above.size == 0:
        raise DataError("matrix has no non-zero eigenvalue")
    if above[0] > 1:
        warnings.warn(
            f"{above[0]} zero eigenvalues: graph is disconnected", RuntimeWarning, stacklevel=2
        )
    return EigenSystem(vals, vecs, int(above[0]))


def orient(v: FloatArray, reference: FloatArray) -> FloatArray:
    """Flip ``v`` if it correlates negatively with ``reference``."""
    c = np.corrcoef(v, reference)[0, 1]
    return -v if c < 0 else v


class Variant(enum.Enum):
    PLAIN = "plain"  # (1 - lambda) I - M
    LOOPED = "looped"  # Diag(1 - lambda d / (1 + d)) - M~


@dataclass(frozen=True)
class PLambdaOperator:
    variant: Variant
    lam: float
    matrix: FloatArray
    looped_neighbourhoods: tuple[npt.NDArray[np.intp], ...] = field(repr=False)


def p_lambda(g: Graph, lam: float, variant: Variant | str = Variant.PLAIN) -> PLambdaOperator:
    """The linear system P_lambda x = 0 that eigenvectors with eigenvalue lambda satisfy."""
    variant = Variant(variant)
    if variant is Variant.PLAIN:
        p = (1.0 - lam) * np.eye(g.n_nodes) - normalized_adjacency(g)
    else:
        d = g.degrees
        p = np.diag(1.0 - lam * d / (1.0 + d)) - looped_normalized_adjacency(g)
    hoods = tuple(np.flatnonzero(row) for row in p)
    return PLambdaOperator(variant, float(lam), p, hoods)


def best_correlated_eigenvector(x: npt.ArrayLike, es: EigenSystem) -> tuple[int, float]:
    """Rank (1 = largest eigenvalue) and |Pearson r| of the eigenvector best correlated with x."""
    x = np.asarray(x, dtype=float)
    if np.ptp(x) == 0:
        raise DataError("correlation undefined for a constant vector")
    xc = x - x.mean()
    v = es.eigenvectors - es.eigenvectors.mean(axis=0)
    norms = np.linalg.norm(v, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.abs(xc @ v) / (np.linalg.norm(xc) * norms)
    # constant eigenvectors (regular graphs) have no defined correlation
    corr = np.where(norms > 1e-12, corr, -np.inf)
    k = int(np.argmax(corr))
    return es.rank_of(k), float(corr[k])
