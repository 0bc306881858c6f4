"""Weighted sample estimating equations: design weights, replicate combination, variance.

A score family is anything with ``node_scores(theta) -> (N, p)`` and
``node_jacobians(theta) -> (N, p, p)``, the per-node terms u_i and du_i/dtheta
of a loss that is a sum over nodes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import numpy.typing as npt

from .errors import DataError, NumericalError
from .graph import FloatArray, Graph
from .sampling import InclusionWeights, SampleGraph, WalkTrace


class Provenance(enum.Enum):
    SBS_SEED = "sbs-seed"
    TRW_STATES = "trw-states"
    CENSUS = "census"


@dataclass(frozen=True)
class WeightedNodeSample:
    """Nodes entering a sample estimating equation with their weights.

    Walk samples may list a node once per visit.
    """

    nodes: npt.NDArray[np.intp]
    weights: FloatArray
    provenance: Provenance

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise DataError("nodes and weights differ in length")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0):
            raise DataError("weights must be positive and finite")

    def total(self, per_node: npt.ArrayLike) -> np.ndarray:
        """Weighted sum of per-node terms (indexed by node) over the sample entries."""
        per_node = np.asarray(per_node)
        return np.tensordot(self.weights, per_node[self.nodes], axes=1)


class ScoreFamily(Protocol):
    def node_scores(self, theta) -> FloatArray: ...

    def node_jacobians(self, theta) -> FloatArray: ...


def census_weights(g: Graph) -> WeightedNodeSample:
    return WeightedNodeSample(np.arange(g.n_nodes), np.ones(g.n_nodes), Provenance.CENSUS)


def trw_weights(trace: WalkTrace, g: Graph) -> WeightedNodeSample:
    """One entry per extracted state, weighted 1/(n (d_i + r))."""
    n = len(trace.states)
    r = trace.config.r
    w = 1.0 / (n * (g.degrees[trace.states] + r))
    return WeightedNodeSample(trace.states.copy(), w, Provenance.TRW_STATES)


def sbs_weights(sg: SampleGraph, iw: InclusionWeights) -> WeightedNodeSample:
    """Inverse seed-inclusion weights for every seed node."""
    return WeightedNodeSample(sg.seed.copy(), iw.seed_weights(sg.seed), Provenance.SBS_SEED)


def weighted_score(ws: WeightedNodeSample, family: ScoreFamily, theta) -> FloatArray:
    """u_s(theta) = sum over sample entries of w_i u_i(theta)."""
    return ws.total(family.node_scores(theta))


@dataclass(frozen=True)
class ReplicateSet:
    estimates: FloatArray  # (L, p)
    combined: FloatArray  # (p,)
    variance: FloatArray | None  # (p, p), None when L = 1

    @property
    def n_replicates(self) -> int:
        return self.estimates.shape[0]

    def standard_errors(self) -> FloatArray:
        if self.variance is None:
            raise DataError("variance needs at least two replicates")
        return np.sqrt(np.diag(self.variance))


def combine_replicates(estimates: Sequence, require_variance: bool = False) -> ReplicateSet:
    """Mean of independent replicate estimates and the variance of that mean.

    V = sum_l (theta_l - mean)(theta_l - mean)' / (L (L - 1)).
    """
    est = np.asarray(estimates, dtype=float)
    if est.ndim == 1:
        est = est[:, None]
    if est.ndim != 2 or est.shape[0] < 1:
        raise DataError("need at least one replicate estimate")
    big_l = est.shape[0]
    mean = est.mean(axis=0)
    if big_l < 2:
        if require_variance:
            raise DataError("variance needs at least two replicates")
        return ReplicateSet(est, mean, None)
    dev = est - mean
    var = dev.T @ dev / (big_l * (big_l - 1))
    return ReplicateSet(est, mean, var)


def sbs_variance_approx(iw: InclusionWeights, family: ScoreFamily, theta0) -> FloatArray:
    """Linearised sampling covariance of a seed-sample SEE solution.

    H^{-1} [ sum_{i,j} (w_i w_j Pr(i, j in s) - 1) u_i u_j' ] H^{-1}, with u_i
    and H = sum_i du_i/dtheta evaluated on the whole graph at the graph-fit.
    """
    if iw.joint_seed_prob is None:
        raise DataError("joint seed inclusion probabilities are required")
    u = np.atleast_2d(np.asarray(family.node_scores(theta0), dtype=float).T).T
    jac = np.asarray(family.node_jacobians(theta0), dtype=float)
    h = jac.reshape(u.shape[0], u.shape[1], u.shape[1]).sum(axis=0)
    w = iw.seed_weights(np.arange(len(iw.seed_prob)))
    middle = u.T @ ((np.outer(w, w) * iw.joint_seed_prob - 1.0) @ u)
    try:
        h_inv = np.linalg.inv(h)
    except np.linalg.LinAlgError:
        raise NumericalError("score Jacobian is singular at theta0") from None
    return h_inv @ middle @ h_inv.T
