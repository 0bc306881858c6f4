"""Eigen neighbour function embedding x = xi M y and GLM node classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from .errors import DataError, NumericalError
from .graph import FloatArray, Graph, normalized_adjacency
from .sampling import (
    SbsDesign,
    WalkConfig,
    observed_labels,
    replicate_rng,
    run_trw,
    srs_inclusion_weights,
)
from .see import WeightedNodeSample, sbs_weights, trw_weights, weighted_score

MAX_NEWTON_ITER = 100
MAX_HALVINGS = 20
SCORE_TOL = 1e-10


class Link(enum.Enum):
    LOGISTIC = "logistic"
    TANH = "tanh"

    def prob(self, eta: FloatArray) -> FloatArray:
        if self is Link.LOGISTIC:
            return expit(eta)
        return 0.5 * (1.0 + np.tanh(eta))

    def log_probs(self, eta: FloatArray) -> tuple[FloatArray, FloatArray]:
        """log p and log(1 - p), computed without cancellation."""
        k = 1.0 if self is Link.LOGISTIC else 2.0  # (1 + tanh e)/2 = sigmoid(2e)
        return -np.logaddexp(0.0, -k * eta), -np.logaddexp(0.0, k * eta)


@dataclass(frozen=True)
class EnfModel:
    xi: float
    psi: FloatArray
    link: Link
    normalized: bool = False


def m_smooth(g: Graph, y: npt.ArrayLike) -> FloatArray:
    """ydot = M y."""
    return normalized_adjacency(g) @ np.asarray(y, dtype=float)


def m_smooth_at(g: Graph, y: npt.ArrayLike, nodes) -> FloatArray:
    """ydot_i for the given nodes, reading only their neighbourhoods.

    ``y`` may be NaN outside the observed nodes; touching such a value is an error.
    Degrees are taken from ``g`` as frame information.
    """
    y = np.asarray(y, dtype=float)
    d = g.degrees
    out = np.empty(len(nodes))
    for k, i in enumerate(nodes):
        nb = g.neighbours[i]
        if nb.size == 0:
            raise DataError(f"node {i + 1} is isolated")
        vals = y[nb]
        if np.isnan(vals).any():
            raise DataError(f"neighbour labels of node {i + 1} are not observed")
        out[k] = np.sum(vals / np.sqrt(d[i] * d[nb]))
    return out


def fit_xi(g: Graph, y: npt.ArrayLike) -> float:
    """Least-squares xi minimising sum_i (y_i - xi ydot_i)^2."""
    y = np.asarray(y, dtype=float)
    yd = m_smooth(g, y)
    den = yd @ yd
    if den == 0:
        raise NumericalError("M y is identically zero")
    return float(yd @ y / den)


def xi_loss(g: Graph, y: npt.ArrayLike, xi: float) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.sum((y - xi * m_smooth(g, y)) ** 2))


def embed(g: Graph, y: npt.ArrayLike, xi: float, normalize: bool = False) -> FloatArray:
    """x = xi M y, optionally scaled to unit norm with corr(x, y) >= 0."""
    y = np.asarray(y, dtype=float)
    x = xi * m_smooth(g, y)
    if not normalize:
        return x
    norm = np.linalg.norm(x)
    if norm == 0:
        raise NumericalError("cannot normalise a zero embedding")
    x = x / norm
    if np.ptp(x) > 0 and np.ptp(y) > 0 and np.corrcoef(x, y)[0, 1] < 0:
        x = -x
    return x


def _design(x: FloatArray) -> FloatArray:
    return np.column_stack([np.ones_like(x), x])


def _neg_loglik(psi, x, y, w, link: Link) -> float:
    lp, lq = link.log_probs(_design(x) @ psi)
    return -float(np.sum(w * (y * lp + (1 - y) * lq)))


def psi_score(psi, x, y, link: Link, weights=None) -> FloatArray:
    """u(psi) = sum_i w_i (y_i - p_i) (1, x_i)'."""
    xd = _design(np.asarray(x, dtype=float))
    w = np.ones(len(xd)) if weights is None else np.asarray(weights, dtype=float)
    p = link.prob(xd @ psi)
    return xd.T @ (w * (y - p))


def psi_hessian(psi, x, y, link: Link, weights=None) -> FloatArray:
    """du/dpsi: -sum w p(1-p) XX' (logistic), -1/2 sum w (1+t)(1-t) XX' (tanh)."""
    xd = _design(np.asarray(x, dtype=float))
    w = np.ones(len(xd)) if weights is None else np.asarray(weights, dtype=float)
    eta = xd @ psi
    if link is Link.LOGISTIC:
        p = link.prob(eta)
        c = p * (1 - p)
    else:
        t = np.tanh(eta)
        c = 0.5 * (1 + t) * (1 - t)
    return -(xd.T * (w * c)) @ xd


def fit_psi(x: npt.ArrayLike, y: npt.ArrayLike, link: Link | str = Link.LOGISTIC, weights=None) -> FloatArray:
    """Newton-Raphson solution of the (weighted) classification score equation.

    Starts at psi = 0 and halves the step while the log-likelihood does not improve.
    """
    link = Link(link)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones(len(x)) if weights is None else np.asarray(weights, dtype=float)
    psi = np.zeros(2)
    loss = _neg_loglik(psi, x, y, w, link)
    for _ in range(MAX_NEWTON_ITER):
        u = psi_score(psi, x, y, link, w)
        if np.linalg.norm(u) <= SCORE_TOL:
            return _check_not_separated(psi, x, y, link)
        h = psi_hessian(psi, x, y, link, w)
        try:
            step = -np.linalg.solve(h, u)
        except np.linalg.LinAlgError:
            raise NumericalError("classification Hessian is singular") from None
        if not np.all(np.isfinite(step)):
            raise NumericalError("classification Hessian is singular")
        for _ in range(MAX_HALVINGS):
            cand = psi + step
            cand_loss = _neg_loglik(cand, x, y, w, link)
            if cand_loss <= loss:
                break
            step = step / 2
        psi, loss = cand, cand_loss
    if np.linalg.norm(psi_score(psi, x, y, link, w)) <= SCORE_TOL:
        return _check_not_separated(psi, x, y, link)
    raise NumericalError(
        f"classifier did not converge in {MAX_NEWTON_ITER} iterations; "
        "the classes are probably separated by x"
    )


def _check_not_separated(psi, x, y, link: Link) -> FloatArray:
    # the score also vanishes as |psi| -> inf when x separates the classes
    if np.max(np.abs(y - link.prob(_design(x) @ psi))) < 1e-6:
        raise NumericalError("classes are separated by x; the score has no finite root")
    return psi


def class_probs(x: npt.ArrayLike, psi, link: Link | str) -> FloatArray:
    return Link(link).prob(_design(np.asarray(x, dtype=float)) @ np.asarray(psi))


def classify(x: npt.ArrayLike, psi, link: Link | str = Link.LOGISTIC) -> npt.NDArray[np.int64]:
    """1(p_i > 0.5); ties go to class 0."""
    return (class_probs(x, psi, link) > 0.5).astype(np.int64)


def misclassified(y_hat, y) -> tuple[int, int]:
    """(1-nodes predicted 0, 0-nodes predicted 1)."""
    y_hat = np.asarray(y_hat)
    y = np.asarray(y)
    return int(np.sum((y == 1) & (y_hat == 0))), int(np.sum((y == 0) & (y_hat == 1)))


def fit_enf(g: Graph, y: npt.ArrayLike, link: Link | str = Link.LOGISTIC, normalize: bool = False) -> EnfModel:
    xi = fit_xi(g, y)
    x = embed(g, y, xi, normalize)
    return EnfModel(xi, fit_psi(x, y, link), Link(link), normalize)


# --------------------------------------------------------------------------
# sample fits


def sample_fit_xi(g: Graph, y_obs: npt.ArrayLike, ws: WeightedNodeSample) -> float:
    """Weighted closed form sum w ydot y / sum w ydot^2 over the sample entries.

    ``y_obs`` holds labels on the observed nodes (NaN elsewhere); only the
    neighbourhoods of sampled entries are read.
    """
    y_obs = np.asarray(y_obs, dtype=float)
    yd = m_smooth_at(g, y_obs, ws.nodes)
    den = np.sum(ws.weights * yd**2)
    if den == 0:
        raise NumericalError("weighted sum of ydot^2 is zero")
    return float(np.sum(ws.weights * yd * y_obs[ws.nodes]) / den)


def sample_fit_psi(
    g: Graph,
    y_obs: npt.ArrayLike,
    ws: WeightedNodeSample,
    xi_hat: float,
    link: Link | str = Link.LOGISTIC,
) -> FloatArray:
    """Plug-in weighted classifier fit with x_hat_i = xi_hat ydot_i on the sample entries."""
    y_obs = np.asarray(y_obs, dtype=float)
    x_hat = xi_hat * m_smooth_at(g, y_obs, ws.nodes)
    return fit_psi(x_hat, y_obs[ws.nodes], link, ws.weights)


# --------------------------------------------------------------------------
# score families for the SEE machinery


class XiScore:
    """Per-node terms of the embedding-scale equation: u_i = ydot_i (y_i - xi ydot_i)."""

    def __init__(self, g: Graph, y: npt.ArrayLike):
        self.y = np.asarray(y, dtype=float)
        self.ydot = m_smooth(g, self.y)

    def node_scores(self, xi) -> FloatArray:
        xi = float(np.ravel(xi)[0])
        return (self.ydot * (self.y - xi * self.ydot))[:, None]

    def node_jacobians(self, xi) -> FloatArray:
        return (-(self.ydot**2))[:, None, None]


class PsiScore:
    """Per-node classification score terms (y_i - p_i)(1, x_i)' for a fixed embedding."""

    def __init__(self, x: npt.ArrayLike, y: npt.ArrayLike, link: Link | str = Link.LOGISTIC):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.link = Link(link)

    def node_scores(self, psi) -> FloatArray:
        xd = _design(self.x)
        p = self.link.prob(xd @ np.asarray(psi))
        return xd * (self.y - p)[:, None]

    def node_jacobians(self, psi) -> FloatArray:
        xd = _design(self.x)
        eta = xd @ np.asarray(psi)
        if self.link is Link.LOGISTIC:
            p = self.link.prob(eta)
            c = p * (1 - p)
        else:
            t = np.tanh(eta)
            c = 0.5 * (1 + t) * (1 - t)
        return -c[:, None, None] * xd[:, :, None] * xd[:, None, :]


# --------------------------------------------------------------------------
# repeated sampling


@dataclass(frozen=True)
class EnfReplicates:
    """Per-replicate sample fits; NaN marks replicates where a fit failed."""

    xi_hat: FloatArray
    score_at_xi0: FloatArray
    psi_hat: FloatArray | None
    visit_counts: npt.NDArray[np.int64] | None = None

    @property
    def xi_failures(self) -> int:
        return int(np.isnan(self.xi_hat).sum())

    @property
    def psi_failures(self) -> int:
        if self.psi_hat is None:
            return 0
        return int(np.isnan(self.psi_hat[:, 0]).sum())


def sbs_enf_replicates(
    g: Graph,
    y: npt.ArrayLike,
    seed_size: int,
    replications: int,
    rng_seed: int = 0,
    link: Link | str | None = None,
) -> EnfReplicates:
    """Sample fits under 1-wave snowball sampling from an SRS seed of ``seed_size`` nodes.

    ``link=None`` skips the classifier fit.
    """
    y = np.asarray(y, dtype=float)
    xi0 = fit_xi(g, y)
    family = XiScore(g, y)
    iw = srs_inclusion_weights(g, seed_size, 1)
    design = SbsDesign(seed_size, 1)
    xi_hat = np.full(replications, np.nan)
    score = np.empty(replications)
    psi_hat = None if link is None else np.full((replications, 2), np.nan)
    for k in range(replications):
        sg = design.draw(g, replicate_rng(rng_seed, k))
        ws = sbs_weights(sg, iw)
        score[k] = weighted_score(ws, family, xi0)[0]
        y_obs = observed_labels(sg, y)
        try:
            xi_hat[k] = sample_fit_xi(g, y_obs, ws)
        except NumericalError:
            continue
        if link is not None:
            try:
                psi_hat[k] = sample_fit_psi(g, y_obs, ws, xi_hat[k], link)
            except NumericalError:
                pass
    return EnfReplicates(xi_hat, score, psi_hat)


def trw_enf_replicates(
    g: Graph,
    y: npt.ArrayLike,
    cfg: WalkConfig,
    walks: int,
    start: int = 0,
) -> EnfReplicates:
    """Embedding-scale fits from ``walks`` independent walks seeded ``cfg.rng_seed + l``.

    ``visit_counts`` pools the extracted states of all walks.
    """
    y = np.asarray(y, dtype=float)
    xi0 = fit_xi(g, y)
    family = XiScore(g, y)
    xi_hat = np.full(walks, np.nan)
    score = np.empty(walks)
    counts = np.zeros(g.n_nodes, dtype=np.int64)
    for l in range(walks):
        walk_cfg = WalkConfig(cfg.r, cfg.n_states, cfg.burn_in, cfg.spacing, cfg.rng_seed + l)
        trace = run_trw(g, walk_cfg, start)
        counts += trace.visit_counts
        ws = trw_weights(trace, g)
        score[l] = weighted_score(ws, family, xi0)[0]
        y_obs = np.full_like(y, np.nan)
        seen = trace.observed_nodes(g)
        y_obs[seen] = y[seen]
        try:
            xi_hat[l] = sample_fit_xi(g, y_obs, ws)
        except NumericalError:
            pass
    return EnfReplicates(xi_hat, score, None, counts)
