"""Command-line experiments: ``graphsee {graph-info,enf,snle,trw}``.

Result rows go to stdout (or ``--out``) as CSV; summary scalars go to stderr
(or ``--summary``) as one JSON object. Exit codes: 0 ok, 2 usage, 3 data,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from scipy import stats

from . import enf, snle
from .errors import DataError, NumericalError
from .graph import (
    Graph,
    Variant,
    best_correlated_eigenvector,
    eigensystem,
    karate_club,
    load_edge_list,
    normalized_laplacian,
    orient,
    read_edge_list,
    read_labels,
)
from .sampling import WalkConfig, stationary_distribution
from .see import combine_replicates

KARATE = "karate"
SEED_ENV = "GRAPHSEE_SEED"

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if np.isnan(v):
        return ""
    return f"{v:.9g}"


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if np.isnan(v) else float(f"{float(v):.9g}")
    return v


@contextmanager
def _sink(path: str | None, fallback):
    if path is None:
        yield fallback
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


class Report:
    def __init__(self, command: str, params: dict):
        self.command = command
        self.params = params
        self.header: list[str] = []
        self.rows: list[list] = []
        self.summary: dict = {}

    def write(self, out: str | None, summary: str | None) -> None:
        with _sink(out, sys.stdout) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            for row in self.rows:
                w.writerow([fmt(v) for v in row])
        doc = {"command": self.command, "parameters": self.params, "summary": self.summary}
        with _sink(summary, sys.stderr) as fh:
            fh.write(json.dumps(_jsonable(doc), sort_keys=True) + "\n")


def _load_graph(source: str) -> tuple[Graph, np.ndarray | None]:
    if source == KARATE:
        return karate_club()
    if source.startswith("inline:"):
        return load_edge_list(source[len("inline:"):].replace(";", "\n")), None
    return read_edge_list(source), None


def _load(args) -> tuple[Graph, np.ndarray | None]:
    try:
        g, y = _load_graph(args.edge_list)
    except OSError as exc:
        raise DataError(f"cannot read edge list: {exc}") from None
    if getattr(args, "labels", None):
        try:
            y = read_labels(args.labels, g.n_nodes)
        except OSError as exc:
            raise DataError(f"cannot read labels: {exc}") from None
    return g, y


def _need_labels(y):
    if y is None:
        raise DataError("this command needs --labels")
    return y


def _fiedler(g: Graph, y=None):
    es = eigensystem(normalized_laplacian(g))
    z0 = es.fiedler_vector
    if y is not None:
        z0 = orient(z0, y)
    return es, z0


# --------------------------------------------------------------------------


def cmd_graph_info(args) -> Report:
    g, _ = _load(args)
    es, z0 = _fiedler(g)
    d = g.degrees
    rep = Report("graph-info", {"edge_list": args.edge_list})
    rep.header = ["node_id", "degree", "z0"]
    rep.rows = [[i + 1, d[i], z0[i]] for i in range(g.n_nodes)]
    rep.summary = {
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "degree_min": d.min(),
        "degree_max": d.max(),
        "degree_mean": d.mean(),
        "connected": g.is_connected(),
        "lambda0": es.fiedler_value,
    }
    return rep


def cmd_enf(args) -> Report:
    g, y = _load(args)
    y = _need_labels(y)
    link = enf.Link(args.link)
    _, z0 = _fiedler(g, y)
    xi0 = enf.fit_xi(g, y)
    ydot = enf.m_smooth(g, y)
    x = enf.embed(g, y, xi0, args.normalize)
    raw = xi0 * ydot
    scale = (x @ raw) / (raw @ raw)  # x is a multiple of xi0 * ydot
    psi0 = enf.fit_psi(x, y, link)
    p = enf.class_probs(x, psi0, link)
    y_hat = enf.classify(x, psi0, link)
    missed_ones, missed_zeros = enf.misclassified(y_hat, y)

    rep = Report(
        "enf",
        {
            "edge_list": args.edge_list,
            "labels": args.labels,
            "link": link.value,
            "normalize": args.normalize,
            "sample": args.sample,
            "replicates": args.replicates,
            "seed": args.seed,
        },
    )
    rep.summary = {
        "xi0": xi0,
        "psi0": psi0,
        "misclassified_ones": missed_ones,
        "misclassified_zeros": missed_zeros,
        "misclassified": missed_ones + missed_zeros,
    }
    rep.header = ["node_id", "y", "ydot", "x0", "p", "yhat", "z0"]
    rows = [[i + 1, y[i], ydot[i], x[i], p[i], y_hat[i], z0[i]] for i in range(g.n_nodes)]

    if args.sample:
        reps = enf.sbs_enf_replicates(g, y, args.sample, args.replicates, args.seed, link)
        ok = ~np.isnan(reps.xi_hat)
        xi_set = combine_replicates(reps.xi_hat[ok])
        score_set = combine_replicates(reps.score_at_xi0)
        psi_ok = reps.psi_hat[~np.isnan(reps.psi_hat[:, 0])]
        rep.summary.update(
            xi_hat_mean=xi_set.combined[0],
            xi_hat_se=None if xi_set.variance is None else xi_set.standard_errors()[0],
            xi_hat_failures=reps.xi_failures,
            score_at_xi0_mean=score_set.combined[0],
            score_at_xi0_se=None if score_set.variance is None else score_set.standard_errors()[0],
            psi_hat_mean=psi_ok.mean(axis=0) if len(psi_ok) else None,
            psi_hat_failures=reps.psi_failures,
        )
        x_hat_mean = scale * xi_set.combined[0] * ydot
        rep.header.append("xhat_mean")
        for row, v in zip(rows, x_hat_mean):
            row.append(v)
    rep.rows = rows
    return rep


def _parse_sweep(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise DataError(f"--sweep expects lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise DataError("--sweep needs lo <= hi and step > 0")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 12)


def cmd_snle(args) -> Report:
    g, y = _load(args)
    y = _need_labels(y)
    variant = Variant(args.variant)
    es, z0 = _fiedler(g, y)
    params = {
        "edge_list": args.edge_list,
        "labels": args.labels,
        "lambda": args.lam,
        "gamma": args.gamma,
        "variant": variant.value,
        "sample": args.sample,
        "replicates": args.replicates,
        "seed": args.seed,
        "sweep": args.sweep,
    }
    if args.sweep:
        rep = Report("snle", params)
        rep.header = ["lambda", "rank", "correlation"]
        rows = snle.rank_sweep(g, y, _parse_sweep(args.sweep), args.gamma, variant, es)
        rep.rows = [[r.lam, r.rank, r.correlation] for r in rows]
        rep.summary = {"rank_of_z0": es.rank_of(es.fiedler_index), "lambda0": es.fiedler_value}
        return rep

    cfg = snle.SnleConfig(args.lam, args.gamma, variant)
    x0 = snle.snle_full(g, y, cfg)
    rank, corr = best_correlated_eigenvector(x0, es)
    rep = Report("snle", params)
    rep.summary = {
        "corr_x0_z0": float(np.corrcoef(x0, z0)[0, 1]),
        "best_rank": rank,
        "best_correlation": corr,
        "gap_x0": snle.class_gap(x0, y),
    }
    rep.header = ["node_id", "y", "z0", "x0"]
    rows = [[i + 1, y[i], z0[i], x0[i]] for i in range(g.n_nodes)]
    if args.sample:
        ee = snle.snle_expected(g, y, cfg, args.sample, args.replicates, args.seed, args.threads)
        rep.header += ["xhat_mean", "inclusion_count", "xhat_se"]
        for i, row in enumerate(rows):
            row += [ee.mean[i], ee.inclusion_count[i], ee.std_error[i]]
        rep.summary["missing_nodes"] = [int(i) + 1 for i in ee.missing]
        if ee.missing.size == 0:
            rep.summary["gap_xhat_mean"] = snle.class_gap(ee.mean, y)
            rep.summary["corr_xhat_mean_x0"] = float(np.corrcoef(ee.mean, x0)[0, 1])
    rep.rows = rows
    return rep


def cmd_trw(args) -> Report:
    g, y = _load(args)
    y = _need_labels(y)
    cfg = WalkConfig(args.r, args.states, args.burnin, args.spacing, args.seed)
    reps = enf.trw_enf_replicates(g, y, cfg, args.walks, args.start - 1)
    xi0 = enf.fit_xi(g, y)
    counts = reps.visit_counts
    pi = stationary_distribution(g, args.r)
    total = counts.sum()
    chi2, pval = stats.chisquare(counts, pi * total)

    ok = ~np.isnan(reps.xi_hat)
    combined = combine_replicates(reps.xi_hat[ok])
    rep = Report(
        "trw",
        {
            "edge_list": args.edge_list,
            "labels": args.labels,
            "r": args.r,
            "states": args.states,
            "burnin": cfg.burn_in_for(g),
            "spacing": args.spacing,
            "walks": args.walks,
            "seed": args.seed,
            "start": args.start,
        },
    )
    rep.header = ["walk", "seed", "xi_hat", "score_at_xi0"]
    rep.rows = [
        [l + 1, args.seed + l, reps.xi_hat[l], reps.score_at_xi0[l]] for l in range(args.walks)
    ]
    freq = counts / total
    rep.summary = {
        "xi0": xi0,
        "xi_hat_combined": combined.combined[0],
        "xi_hat_variance": None if combined.variance is None else combined.variance[0, 0],
        "xi_hat_failures": reps.xi_failures,
        "chi2": chi2,
        "chi2_pvalue": pval,
        "max_rel_freq_error": float(np.max(np.abs(freq - pi) / pi)),
        "visit_frequency": freq,
        "stationary_probability": pi,
    }
    return rep


# --------------------------------------------------------------------------


def _seed_default() -> int:
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"{SEED_ENV} must be an integer, got {env!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphsee", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, labels=True):
        p.add_argument(
            "edge_list",
            help=f"edge-list file, '{KARATE}' for the bundled club, or 'inline:1 2;2 3'",
        )
        if labels:
            p.add_argument("--labels", help="CSV of node_id,label (default: bundled with karate)")
        p.add_argument("--out", help="CSV output path (default stdout)")
        p.add_argument("--summary", help="JSON summary path (default stderr)")
        p.add_argument("--seed", type=int, default=_seed_default())
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("graph-info", help="size, degrees, smallest non-zero eigenvalue, z0")
    common(p, labels=False)
    p.set_defaults(func=cmd_graph_info)

    p = sub.add_parser("enf", help="eigen neighbour function embedding and classifier")
    common(p)
    p.add_argument("--link", choices=[l.value for l in enf.Link], default="logistic")
    p.add_argument("--normalize", action="store_true", help="scale x to unit norm")
    p.add_argument("--sample", type=int, help="SRS seed size for 1-wave snowball replicates")
    p.add_argument("--replicates", type=int, default=10_000)
    p.set_defaults(func=cmd_enf)

    p = sub.add_parser("snle", help="supervised normalised Laplacian embedding")
    common(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="looped")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--sample", type=int, help="SRS seed size for 1-wave snowball replicates")
    mode.add_argument("--sweep", help="lambda grid lo:hi:step; emits lambda,rank,correlation")
    p.add_argument("--replicates", type=int, default=10_000)
    p.set_defaults(func=cmd_snle)

    p = sub.add_parser("trw", help="embedding scale from independent targeted random walks")
    common(p)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--states", type=int, default=1000, help="extracted states per walk")
    p.add_argument("--burnin", type=int, default=None, help="default 50 steps per node")
    p.add_argument("--spacing", type=int, default=5)
    p.add_argument("--walks", type=int, default=10)
    p.add_argument("--start", type=int, default=1, help="1-based start node")
    p.set_defaults(func=cmd_trw)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "replicates", 1) < 1 or args.threads < 1:
        parser.error("--replicates and --threads must be positive")
    try:
        report = args.func(args)
        report.write(args.out, args.summary)
    except DataError as exc:
        print(f"graphsee: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"graphsee: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
