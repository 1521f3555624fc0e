"""Benchmark harness: every partitioner on every graph, repeated, timed.

Report schema (one row per partitioner x graph)::

    partitioner, graph, n, edges, g, repeats,
    edge_cut_ratio_mean, edge_cut_ratio_sd,
    balancedness_mean, balancedness_sd,
    exact_ncut_mean, exact_ncut_sd,
    wall_ms_mean, wall_ms_sd,      time of the partitioning call itself
    features_ms_mean,              GAP only: feature construction inside the call
    train_ms,                      GAP only: one-off training cost, never mixed into wall_ms
    error                          empty, or the message of the first failure

Standard deviations use ``ddof=0`` and are 0 for a single repeat.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import random_partition, spectral_partition
from .io import atomic_write
from .loss import exact_ncut
from .metrics import balancedness, edge_cut_ratio
from .model import GapModel, infer

COLUMNS = ["partitioner", "graph", "n", "edges", "g", "repeats",
           "edge_cut_ratio_mean", "edge_cut_ratio_sd", "balancedness_mean", "balancedness_sd",
           "exact_ncut_mean", "exact_ncut_sd", "wall_ms_mean", "wall_ms_sd",
           "features_ms_mean", "train_ms", "error"]


class GapPartitioner:
    """Inference with a trained model, as a benchmark partitioner."""

    def __init__(self, model: GapModel, train_ms: float | None = None):
        self.model = model
        self.train_ms = train_ms

    def __call__(self, g, g_parts, seed=0):
        res = infer(self.model, g, g_parts=g_parts, seed=seed)
        return res.assignment, {"features_ms": res.metrics.extra["features_ms"]}


def default_partitioners() -> dict:
    return {"spectral": spectral_partition, "random": random_partition_for_graph}


def random_partition_for_graph(g, g_parts, seed=0):
    return random_partition(g.n, g_parts, seed)


def _run_cell(name, part, gname, g, g_parts, repeats, seed):
    cuts, bals, ncuts, walls, feats = [], [], [], [], []
    error = ""
    for r in range(repeats):
        try:
            t0 = time.perf_counter()
            out = part(g, g_parts, seed + r)
            wall = (time.perf_counter() - t0) * 1e3
        except Exception as exc:  # a failing cell must not stop the table
            error = f"{type(exc).__name__}: {exc}"
            break
        a, extra = out if isinstance(out, tuple) else (out, {})
        a = np.asarray(a)
        cuts.append(edge_cut_ratio(g, a))
        bals.append(balancedness(a, g_parts))
        ncuts.append(exact_ncut(g, a, g_parts))
        walls.append(wall)
        if "features_ms" in extra:
            feats.append(extra["features_ms"])

    def stats(xs):
        return (float(np.mean(xs)), float(np.std(xs))) if xs else (float("nan"), float("nan"))

    row = {"partitioner": name, "graph": gname, "n": g.n, "edges": g.num_edges, "g": g_parts,
           "repeats": len(walls)}
    for key, xs in (("edge_cut_ratio", cuts), ("balancedness", bals), ("exact_ncut", ncuts),
                    ("wall_ms", walls)):
        row[f"{key}_mean"], row[f"{key}_sd"] = stats(xs)
    row["features_ms_mean"] = stats(feats)[0] if feats else None
    row["train_ms"] = getattr(part, "train_ms", None)
    row["error"] = error
    return row


def benchmark(partitioners: dict, graphs, g_parts: int, repeats: int = 1, seed: int = 0,
              workers: int = 1) -> list[dict]:
    """Run every ``(partitioner, graph)`` cell and return report rows.

    ``partitioners`` maps a name to ``f(graph, g_parts, seed)`` returning an
    assignment, or ``(assignment, extras)``. ``graphs`` is a list of
    ``(name, Graph)``. Repeat ``r`` uses seed ``seed + r``. Cells run on a
    thread pool of ``workers``; rows come back in partitioner-major order.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    cells = [(name, part, gname, g) for name, part in partitioners.items() for gname, g in graphs]
    if workers <= 1:
        return [_run_cell(n, p, gn, g, g_parts, repeats, seed) for n, p, gn, g in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_cell, n, p, gn, g, g_parts, repeats, seed)
                   for n, p, gn, g in cells]
        return [f.result() for f in futures]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in COLUMNS})
    return buf.getvalue()


def write_report(rows, csv_path=None, json_path=None, meta=None) -> None:
    if csv_path is not None:
        atomic_write(csv_path, rows_to_csv(rows))
    if json_path is not None:
        doc = {"schema": COLUMNS, "meta": meta or {}, "rows": rows}
        atomic_write(json_path, json.dumps(doc, indent=2, default=float))
