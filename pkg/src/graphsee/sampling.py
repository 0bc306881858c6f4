"""Targeted random walks, T-wave snowball sampling and inclusion probabilities.

Every random draw comes from a Philox (counter-based, 64-bit key) generator.
Replicate ``k`` of a run with base seed ``s`` uses seed ``s + k``, so a
replicate can be regenerated on its own and replicates may run in any order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb

import numpy as np
import numpy.typing as npt

from .errors import DataError
from .graph import FloatArray, Graph


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def replicate_rng(base_seed: int, index: int) -> np.random.Generator:
    return make_rng(base_seed + index)


# --------------------------------------------------------------------------
# targeted random walk


@dataclass(frozen=True)
class WalkConfig:
    """Random walk settings; ``burn_in=None`` means 50 steps per node."""

    r: float = 2.0
    n_states: int = 1000
    burn_in: int | None = None
    spacing: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.r < 0:
            raise DataError("r must be nonnegative")
        if self.n_states < 1 or self.spacing < 1:
            raise DataError("n_states and spacing must be positive")
        if self.burn_in is not None and self.burn_in < 0:
            raise DataError("burn_in must be nonnegative")

    def burn_in_for(self, g: Graph) -> int:
        return 50 * g.n_nodes if self.burn_in is None else self.burn_in


@dataclass(frozen=True)
class WalkTrace:
    states: npt.NDArray[np.intp]
    visit_counts: npt.NDArray[np.int64]
    config: WalkConfig

    def observed_nodes(self, g: Graph) -> npt.NDArray[np.intp]:
        """Visited nodes and their neighbourhoods (incident observation)."""
        seen = np.zeros(g.n_nodes, dtype=bool)
        for i in np.unique(self.states):
            seen[i] = True
            seen[g.neighbours[i]] = True
        return np.flatnonzero(seen)


def trw_transition_row(g: Graph, cfg: WalkConfig, i: int) -> FloatArray:
    """Transition probabilities out of node ``i``.

    Neighbours get (1 + r/N)/(d_i + r); every other node, ``i`` included,
    gets r/(N(d_i + r)).
    """
    n = g.n_nodes
    d_i = int(g.degrees[i])
    if cfg.r == 0 and d_i == 0:
        raise DataError(f"node {i + 1} is absorbing: isolated with r = 0")
    row = np.full(n, cfg.r / (n * (d_i + cfg.r)))
    row[g.neighbours[i]] = (1.0 + cfg.r / n) / (d_i + cfg.r)
    return row


def stationary_distribution(g: Graph, r: float) -> FloatArray:
    w = g.degrees + r
    return w / w.sum()


def run_trw(g: Graph, cfg: WalkConfig, start: int) -> WalkTrace:
    """Simulate the walk from ``start`` and extract every ``spacing``-th state after burn-in.

    A step is an edge move with probability d_i/(d_i + r), otherwise a jump to a
    uniformly drawn node; this mixture has exactly the transition row above.
    """
    degrees = g.degrees
    if cfg.r == 0:
        if np.any(degrees == 0):
            raise DataError("r = 0 needs every node to have a neighbour")
        if not g.is_connected():
            raise DataError("r = 0 walk is reducible on a disconnected graph")
    n = g.n_nodes
    burn = cfg.burn_in_for(g)
    total = burn + cfg.spacing * cfg.n_states
    rng = make_rng(cfg.rng_seed)
    u_move = rng.random(total)
    u_pick = rng.random(total)
    jump_to = rng.integers(0, n, size=total)
    move_prob = degrees / (degrees + cfg.r)
    nbrs = g.neighbours

    states = np.empty(cfg.n_states, dtype=np.intp)
    cur = int(start)
    k = 0
    for t in range(total):
        if u_move[t] < move_prob[cur]:
            nb = nbrs[cur]
            cur = int(nb[int(u_pick[t] * len(nb))])
        else:
            cur = int(jump_to[t])
        if t >= burn and (t - burn + 1) % cfg.spacing == 0:
            states[k] = cur
            k += 1
    counts = np.bincount(states, minlength=n).astype(np.int64)
    return WalkTrace(states, counts, cfg)


# --------------------------------------------------------------------------
# snowball sampling


@dataclass(frozen=True)
class SampleGraph:
    """Outcome of T-wave snowball sampling with incident observation.

    Rows ``adjacency[k]`` are observed for every seed node ``k``; for other
    nodes in ``sampled_nodes`` only their edges into the seed are known.
    """

    waves: tuple[npt.NDArray[np.intp], ...]
    seed: npt.NDArray[np.intp]
    sampled_nodes: npt.NDArray[np.intp]
    t_waves: int

    def observed_edges(self, g: Graph) -> npt.NDArray[np.int8]:
        """Adjacency restricted to ``seed x U  union  U x seed``; unobserved entries are 0."""
        a = np.zeros_like(g.adjacency)
        a[self.seed, :] = g.adjacency[self.seed, :]
        a[:, self.seed] = g.adjacency[:, self.seed]
        return a


def run_sbs(g: Graph, s0, t_waves: int = 1) -> SampleGraph:
    """T-wave snowball sample from the initial node set ``s0``."""
    s0 = np.unique(np.asarray(s0, dtype=np.intp))
    if s0.size == 0:
        raise DataError("initial sample is empty")
    if t_waves < 1:
        raise DataError("t_waves must be at least 1")
    if s0.min() < 0 or s0.max() >= g.n_nodes:
        raise DataError("initial sample contains an unknown node")
    reached = np.zeros(g.n_nodes, dtype=bool)
    reached[s0] = True
    waves = [s0]
    for _ in range(1, t_waves):
        frontier = np.zeros(g.n_nodes, dtype=bool)
        for i in waves[-1]:
            frontier[g.neighbours[i]] = True
        nxt = np.flatnonzero(frontier & ~reached)
        if nxt.size == 0:
            break
        reached[nxt] = True
        waves.append(nxt)
    seed = np.flatnonzero(reached)
    in_sample = reached.copy()
    for k in seed:
        in_sample[g.neighbours[k]] = True
    return SampleGraph(tuple(waves), seed, np.flatnonzero(in_sample), t_waves)


def observed_labels(sg: SampleGraph, y: npt.ArrayLike) -> FloatArray:
    """Copy of ``y`` with every node outside ``U_s`` set to NaN."""
    y = np.asarray(y, dtype=float)
    out = np.full_like(y, np.nan)
    out[sg.sampled_nodes] = y[sg.sampled_nodes]
    return out


# --------------------------------------------------------------------------
# inclusion probabilities


class WeightMethod(enum.Enum):
    EXACT_SRS_1WAVE = "exact-srs-1wave"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class InclusionWeights:
    """Seed and sample-graph inclusion probabilities for one sampling design.

    ``joint_seed_prob[i, j]`` is Pr(i in s and j in s); ``joint_node_prob`` is
    the same for U_s. Monte Carlo estimates may contain zeros, which mark
    weights that cannot be used.
    """

    seed_prob: FloatArray
    node_prob: FloatArray
    method: WeightMethod
    joint_seed_prob: FloatArray | None = field(default=None, repr=False)
    joint_node_prob: FloatArray | None = field(default=None, repr=False)
    replications: int | None = None

    def seed_weights(self, nodes) -> FloatArray:
        p = self.seed_prob[np.asarray(nodes, dtype=np.intp)]
        if np.any(p <= 0):
            bad = np.asarray(nodes)[p <= 0]
            raise DataError(f"unusable seed weight for node(s) {[int(b) + 1 for b in bad]}")
        return 1.0 / p

    def node_weights(self, nodes) -> FloatArray:
        p = self.node_prob[np.asarray(nodes, dtype=np.intp)]
        if np.any(p <= 0):
            bad = np.asarray(nodes)[p <= 0]
            raise DataError(f"unusable node weight for node(s) {[int(b) + 1 for b in bad]}")
        return 1.0 / p

    def standard_errors(self) -> tuple[FloatArray, FloatArray]:
        """Binomial standard errors of Monte Carlo estimates (zeros for exact weights)."""
        if self.replications is None:
            return np.zeros_like(self.seed_prob), np.zeros_like(self.node_prob)
        r = self.replications
        return (
            np.sqrt(self.seed_prob * (1 - self.seed_prob) / r),
            np.sqrt(self.node_prob * (1 - self.node_prob) / r),
        )


def srs_inclusion_weights(g: Graph, n: int, t_waves: int = 1) -> InclusionWeights:
    """Exact probabilities for 1-wave snowball sampling from a simple random sample of size n."""
    big_n = g.n_nodes
    if t_waves != 1:
        raise DataError("exact weights are only available for 1-wave sampling")
    if not 1 <= n <= big_n:
        raise DataError(f"sample size {n} outside 1..{big_n}")
    total = comb(big_n, n)
    closed = g.adjacency.astype(bool) | np.eye(big_n, dtype=bool)  # F_j = nu_j + {j}
    f_size = closed.sum(axis=1)
    miss = np.array([comb(big_n - int(f), n) / total for f in f_size])
    union = (closed[:, None, :] | closed[None, :, :]).sum(axis=2)
    miss_both = np.vectorize(lambda u: comb(big_n - int(u), n) / total, otypes=[float])(union)
    joint_node = 1.0 - miss[:, None] - miss[None, :] + miss_both

    pair = n * (n - 1) / (big_n * (big_n - 1)) if big_n > 1 else 0.0
    joint_seed = np.full((big_n, big_n), pair)
    np.fill_diagonal(joint_seed, n / big_n)
    return InclusionWeights(
        seed_prob=np.full(big_n, n / big_n),
        node_prob=1.0 - miss,
        method=WeightMethod.EXACT_SRS_1WAVE,
        joint_seed_prob=joint_seed,
        joint_node_prob=joint_node,
    )


@dataclass(frozen=True)
class SbsDesign:
    """Snowball design: SRS initial sample of size ``n_initial``, then ``t_waves`` waves."""

    n_initial: int
    t_waves: int = 1

    def draw(self, g: Graph, rng: np.random.Generator) -> SampleGraph:
        s0 = rng.choice(g.n_nodes, size=self.n_initial, replace=False)
        return run_sbs(g, s0, self.t_waves)


def monte_carlo_inclusion_weights(
    g: Graph,
    design: SbsDesign,
    replications: int,
    rng_seed: int,
    joint: bool = False,
) -> InclusionWeights:
    """Inclusion frequencies of ``design`` over independent replicates."""
    if replications < 1000:
        raise DataError("Monte Carlo weights need at least 1000 replications")
    n = g.n_nodes
    seed_hits = np.zeros(n)
    node_hits = np.zeros(n)
    joint_seed = np.zeros((n, n)) if joint else None
    for k in range(replications):
        sg = design.draw(g, replicate_rng(rng_seed, k))
        seed_hits[sg.seed] += 1
        node_hits[sg.sampled_nodes] += 1
        if joint:
            joint_seed[np.ix_(sg.seed, sg.seed)] += 1
    return InclusionWeights(
        seed_prob=seed_hits / replications,
        node_prob=node_hits / replications,
        method=WeightMethod.MONTE_CARLO,
        joint_seed_prob=None if joint_seed is None else joint_seed / replications,
        replications=replications,
    )
