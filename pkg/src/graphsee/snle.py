"""Supervised normalised Laplacian embedding, on the full graph and from snowball samples."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .errors import DataError, NumericalError
from .graph import (
    EigenSystem,
    FloatArray,
    Graph,
    Variant,
    best_correlated_eigenvector,
    eigensystem,
    normalized_laplacian,
    p_lambda,
)
from .sampling import (
    InclusionWeights,
    SampleGraph,
    replicate_rng,
    run_sbs,
    srs_inclusion_weights,
)


@dataclass(frozen=True)
class SnleConfig:
    lam: float
    gamma: float
    variant: Variant = Variant.LOOPED

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.gamma < 0:
            raise DataError("gamma must be nonnegative")


def _solve_refined(a: FloatArray, b: FloatArray) -> FloatArray:
    """LU solve followed by one step of residual refinement."""
    try:
        x = np.linalg.solve(a, b)
        x += np.linalg.solve(a, b - a @ x)
    except np.linalg.LinAlgError:
        raise NumericalError("singular embedding system") from None
    if not np.all(np.isfinite(x)):
        raise NumericalError("singular embedding system")
    return x


def snle_full(g: Graph, y: npt.ArrayLike, cfg: SnleConfig) -> FloatArray:
    """Graph-fit x0 = (I + P'P / gamma)^{-1} y.

    With gamma = 0 the loss is minimised over unit vectors instead: the
    eigenvector of P'P with the smallest eigenvalue, signed so corr(x0, y) >= 0.
    """
    y = np.asarray(y, dtype=float)
    p = p_lambda(g, cfg.lam, cfg.variant).matrix
    ptp = p.T @ p
    if cfg.gamma == 0:
        _, vecs = np.linalg.eigh(ptp)
        x = vecs[:, 0]
        if np.ptp(y) > 0 and np.corrcoef(x, y)[0, 1] < 0:
            x = -x
        return x
    return _solve_refined(np.eye(g.n_nodes) + ptp / cfg.gamma, y)


def snle_loss(g: Graph, y: npt.ArrayLike, cfg: SnleConfig, x: npt.ArrayLike) -> float:
    """sum_i xdot_i^2 + gamma sum_i (y_i - x_i)^2 with xdot_i summed over the looped neighbourhood."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    op = p_lambda(g, cfg.lam, cfg.variant)
    total = 0.0
    for i, hood in enumerate(op.looped_neighbourhoods):
        xdot = op.matrix[i, hood] @ x[hood]
        total += xdot * xdot
    return float(total + cfg.gamma * np.sum((y - x) ** 2))


def snle_gradient(g: Graph, y: npt.ArrayLike, cfg: SnleConfig, x: npt.ArrayLike) -> FloatArray:
    """2 P'P x - 2 gamma (y - x)."""
    p = p_lambda(g, cfg.lam, cfg.variant).matrix
    x = np.asarray(x, dtype=float)
    return 2 * p.T @ (p @ x) - 2 * cfg.gamma * (np.asarray(y, dtype=float) - x)


def sample_operator(g: Graph, sg: SampleGraph, cfg: SnleConfig) -> FloatArray:
    """P restricted to seed rows and U_s columns, built from the observed seed rows.

    Degrees of U_s nodes come from ``g`` as frame information.
    """
    s, us = sg.seed, sg.sampled_nodes
    d = g.degrees.astype(float)
    a = g.adjacency[np.ix_(s, us)].astype(float)
    diag = (s[:, None] == us[None, :]).astype(float)
    if cfg.variant is Variant.PLAIN:
        return (1.0 - cfg.lam) * diag - a / np.sqrt(np.outer(d[s], d[us]))
    scale = np.sqrt(np.outer(1 + d[s], 1 + d[us]))
    return diag * (1.0 - cfg.lam * d[s] / (1 + d[s]))[:, None] - (a + diag) / scale


def snle_sample(
    g: Graph,
    sg: SampleGraph,
    y_obs: npt.ArrayLike,
    iw: InclusionWeights,
    cfg: SnleConfig,
) -> FloatArray:
    """Solve the sample estimating equation for x on U_s (values ordered as ``sg.sampled_nodes``).

    x_hat = (W_U^{-1} P' W_s P / gamma + I)^{-1} y_U, solved as written.
    """
    if cfg.gamma <= 0:
        raise DataError("sample embedding needs gamma > 0")
    if sg.t_waves != 1:
        raise DataError("sample embedding is defined for 1-wave snowball samples")
    y_u = np.asarray(y_obs, dtype=float)[sg.sampled_nodes]
    if np.isnan(y_u).any():
        raise DataError("labels on U_s are not all observed")
    p = sample_operator(g, sg, cfg)
    w_s = iw.seed_weights(sg.seed)
    inv_w_u = 1.0 / iw.node_weights(sg.sampled_nodes)
    system = (inv_w_u[:, None] * (p.T @ (w_s[:, None] * p))) / cfg.gamma
    system[np.diag_indices_from(system)] += 1.0
    return _solve_refined(system, y_u)


@dataclass(frozen=True)
class ExpectedEmbedding:
    """Per-node mean of x_hat_i over the replicates in which i was in U_s (NaN if never)."""

    mean: FloatArray
    inclusion_count: npt.NDArray[np.int64]
    replications: int
    std_error: FloatArray

    @property
    def missing(self) -> npt.NDArray[np.intp]:
        return np.flatnonzero(self.inclusion_count == 0)


def _accumulate(g, y, cfg, iw, n, rng_seed, start, stop):
    sums = np.zeros(g.n_nodes)
    squares = np.zeros(g.n_nodes)
    counts = np.zeros(g.n_nodes, dtype=np.int64)
    for k in range(start, stop):
        rng = replicate_rng(rng_seed, k)
        sg = run_sbs(g, rng.choice(g.n_nodes, size=n, replace=False), 1)
        x_hat = snle_sample(g, sg, y, iw, cfg)
        sums[sg.sampled_nodes] += x_hat
        squares[sg.sampled_nodes] += x_hat**2
        counts[sg.sampled_nodes] += 1
    return sums, squares, counts


def snle_expected(
    g: Graph,
    y: npt.ArrayLike,
    cfg: SnleConfig,
    seed_size: int,
    replications: int,
    rng_seed: int = 0,
    threads: int = 1,
) -> ExpectedEmbedding:
    """Monte Carlo E(x_hat_i | i in U_s) under 1-wave snowball sampling from an SRS seed."""
    if replications < 1:
        raise DataError("replications must be positive")
    y = np.asarray(y, dtype=float)
    iw = srs_inclusion_weights(g, seed_size, 1)
    threads = max(1, min(threads, replications))
    bounds = np.linspace(0, replications, threads + 1).astype(int)
    chunks = list(zip(bounds[:-1], bounds[1:]))
    if threads == 1:
        parts = [_accumulate(g, y, cfg, iw, seed_size, rng_seed, *chunks[0])]
    else:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(
                pool.map(lambda c: _accumulate(g, y, cfg, iw, seed_size, rng_seed, *c), chunks)
            )
    sums = sum(p[0] for p in parts)
    squares = sum(p[1] for p in parts)
    counts = sum(p[2] for p in parts)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / counts, np.nan)
        var = np.where(counts > 1, (squares - counts * mean**2) / (counts - 1), np.nan)
        se = np.sqrt(np.maximum(var, 0.0) / counts)
    return ExpectedEmbedding(mean, counts, replications, se)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    rank: int
    correlation: float


def rank_sweep(
    g: Graph,
    y: npt.ArrayLike,
    lambdas,
    gamma: float,
    variant: Variant | str = Variant.PLAIN,
    es: EigenSystem | None = None,
) -> list[SweepRow]:
    """Rank of the eigenvector best correlated with x0 for each lambda."""
    if es is None:
        es = eigensystem(normalized_laplacian(g))
    rows = []
    for lam in lambdas:
        x0 = snle_full(g, y, SnleConfig(float(lam), gamma, variant))
        rank, corr = best_correlated_eigenvector(x0, es)
        rows.append(SweepRow(float(lam), rank, corr))
    return rows


def class_gap(x: npt.ArrayLike, y: npt.ArrayLike) -> float:
    """Smallest between-class distance of unit-norm x; negative when the classes overlap."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    x = x / np.linalg.norm(x)
    ones, zeros = x[y == 1], x[y == 0]
    return float(max(ones.min() - zeros.max(), zeros.min() - ones.max()))
