"""``gappart`` command line.

Every subcommand accepts ``--config`` (YAML or JSON) and flags; flags win over
the config file. Each run writes ``resolved_config.yaml`` into its output
directory so it can be replayed with ``--config``.

Exit codes: 0 success, 2 invalid input or arguments, 3 numerical failure
(divergence, non-convergence), 4 I/O failure (unreadable or unwritable files,
corrupt checkpoints).
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import sys
import time

import click
import numpy as np
import yaml

from . import autodiff as ad
from .baselines import ExternalPartitioner, OracleTooLarge, brute_force_min_ncut
from .bench import GapPartitioner, benchmark, default_partitioners, write_report
from .checkpoint import CheckpointError, read_checkpoint, save_checkpoint, vocab_path
from .eigen import EigenNonConvergence
from .features import FeatureMismatch, FeatureSpec
from .graph import (Graph, GraphError, generate_clique_chain, generate_erdos_renyi,
                    generate_featured_blocks, generate_scale_free)
from .io import (atomic_write, load_edge_list, load_featured_graph, load_metis, read_assignment,
                 read_vocab, write_assignment, write_edge_list, write_featured_graph, write_metis)
from .metrics import degree_histogram as degree_counts, evaluate
from .model import GapModel, ModelConfig, infer
from .presets import PRESETS, get_preset
from .training import TrainConfig, TrainingDiverged, train_multi_graph

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

CONFIG_SCHEMA = {
    "seed": None,
    "dataset": {"kind", "n", "p", "attach_m", "count", "sizes", "train", "val", "graph",
                "weighted", "vocab", "unknown", "graphs"},
    "model": {"preset", "g_parts", "embedding", "embedding_mode", "hidden", "layers",
              "shared_pooling", "sample_size", "projection_bias", "head_layers", "features",
              "feature_dim", "checkpoint"},
    "training": set(TrainConfig.__dataclass_fields__) - {"seed", "preset"},
    "output": {"dir"},
    "bench": {"repeats", "workers", "external", "partitioners"},
}


class ConfigError(ValueError):
    pass


# -- config handling --------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        text = fh.read()
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    for key, val in data.items():
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        allowed = CONFIG_SCHEMA[key]
        if allowed is None:
            continue
        if not isinstance(val, dict):
            raise ConfigError(f"{path}: section {key!r} must be a mapping")
        for sub in val:
            if sub not in allowed:
                raise ConfigError(f"{path}: unknown key {key}.{sub}")
    return data


def merge(cfg: dict, section: str, **flags) -> dict:
    """Section of ``cfg`` with non-None flag values layered on top."""
    out = dict(cfg.get(section, {}))
    out.update({k: v for k, v in flags.items() if v is not None and v != ()})
    return out


def write_resolved(out_dir, resolved: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    atomic_write(os.path.join(out_dir, "resolved_config.yaml"),
                 yaml.safe_dump(resolved, sort_keys=True))


def load_graph(path, weighted=False, vocab=None, unknown="error") -> Graph:
    p = str(path)
    if p.endswith(".json"):
        return load_featured_graph(p, vocab=vocab, unknown=unknown)
    if p.endswith((".metis", ".graph")):
        return load_metis(p)
    return load_edge_list(p, weighted=weighted)


def _sha(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# -- commands -------------------------------------------------------------------

common_seed = click.option("--seed", type=int, default=None, help="Random seed (default 0).")
common_out = click.option("--out", type=click.Path(file_okay=False), default=None,
                          help="Output directory.")
common_config = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                             default=None, help="YAML or JSON run configuration.")


@click.group()
@click.version_option(package_name="artifact")
def cli():
    """Balanced graph partitioning with a differentiable normalized cut."""


@cli.command()
@click.option("--kind", type=click.Choice(["er", "scalefree", "featured-blocks", "clique-chain"]),
              default=None)
@click.option("--n", "n", type=click.IntRange(min=1), default=None)
@click.option("--p", "p", type=click.FloatRange(0.0, 1.0), default=None,
              help="Edge probability (er) or within-block probability (featured-blocks).")
@click.option("--attach-m", type=click.IntRange(min=1), default=None)
@click.option("--sizes", type=str, default=None,
              help="Comma-separated block or clique sizes.")
@click.option("--count", type=click.IntRange(min=1), default=None)
@common_seed
@common_out
@common_config
def generate(kind, n, p, attach_m, sizes, count, seed, out, config_path):
    """Generate synthetic graphs (edge list + METIS) and a manifest."""
    cfg = load_config(config_path)
    ds = merge(cfg, "dataset", kind=kind, n=n, p=p, attach_m=attach_m, sizes=sizes, count=count)
    seed = seed if seed is not None else cfg.get("seed", 0)
    out = out or cfg.get("output", {}).get("dir") or "graphs"
    kind = ds.get("kind", "er")
    count = int(ds.get("count", 1))
    if isinstance(ds.get("sizes"), str):
        ds["sizes"] = [int(s) for s in ds["sizes"].split(",") if s.strip()]
    os.makedirs(out, exist_ok=True)
    files = []
    for i in range(count):
        s = seed + i
        if kind == "er":
            g = generate_erdos_renyi(int(ds.get("n", 1000)), float(ds.get("p", 0.1)), s)
        elif kind == "scalefree":
            g = generate_scale_free(int(ds.get("n", 1000)), s, int(ds.get("attach_m", 2)))
        elif kind == "clique-chain":
            g = generate_clique_chain(ds.get("sizes") or [3, 3])
        else:
            sizes_ = ds.get("sizes") or [200, 100]
            ops = [f"op{k}" for k in range(8)]
            g = generate_featured_blocks(sizes_, float(ds.get("p", 0.05)), 0.002, ops,
                                         ops[:len(sizes_)], seed=s)
        stem = os.path.join(out, f"{kind}_{i:03d}")
        paths = [stem + ".edges", stem + ".metis"]
        write_edge_list(g, paths[0])
        write_metis(g, paths[1])
        if kind == "featured-blocks":
            paths.append(stem + ".json")
            write_featured_graph(paths[2], g.meta["op_types"], g.edges)
        files.append({"seed": s, "n": g.n, "edges": g.num_edges,
                      "files": [os.path.basename(q) for q in paths],
                      "sha256": {os.path.basename(q): _sha(q) for q in paths}})
    resolved = {"seed": seed, "dataset": {**ds, "kind": kind, "count": count}, "output": {"dir": out}}
    manifest = {"generator": resolved["dataset"], "seed": seed, "graphs": files}
    atomic_write(os.path.join(out, "manifest.json"), json.dumps(manifest, indent=2))
    write_resolved(out, resolved)
    click.echo(f"wrote {count} graph(s) to {out}")


def _build_model(mcfg: dict, train_graphs, seed: int, vocab_file=None, unknown="error") -> GapModel:
    g_parts = mcfg.get("g_parts")
    if g_parts is None:
        raise ConfigError("model.g_parts (--g) is required")
    kind = mcfg.get("features") or ("onehot" if train_graphs[0].feature_names else "pca")
    dim = mcfg.get("feature_dim")
    if kind == "onehot":
        if vocab_file:
            vocab = read_vocab(vocab_file)
        else:
            vocab = sorted({nm for g in train_graphs for nm in (g.feature_names or ())})
        spec = FeatureSpec.onehot(vocab, unknown=unknown)
    elif kind == "given":
        spec = FeatureSpec("given", int(dim or train_graphs[0].node_features.shape[1]))
    else:
        spec = FeatureSpec(kind, int(dim or (1000 if kind == "pca" else max(g.n for g in train_graphs))))
    fields = {k: mcfg[k] for k in ("embedding", "embedding_mode", "hidden", "layers", "shared_pooling",
                                    "sample_size", "projection_bias", "head_layers") if k in mcfg}
    return GapModel.create(ModelConfig(int(g_parts), **fields), spec, seed=seed)


def _history_csv(result) -> str:
    buf = _io.StringIO()
    cols = ["epoch", "graph", "loss", "expected_ncut", "balance_error", "edge_cut_ratio", "balancedness"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in result.history:
        w.writerow(row)
    return buf.getvalue()


def _paths(values):
    out = []
    for v in values or []:
        out.extend(v if isinstance(v, list) else [v])
    return out


@cli.command()
@click.option("--graph", "graphs", multiple=True, type=str, help="Training graph file (repeatable).")
@click.option("--val", "vals", multiple=True, type=str, help="Validation graph file (repeatable).")
@click.option("--g", "g_parts", type=click.IntRange(min=2), default=None, help="Number of partitions.")
@click.option("--preset", type=click.Choice(sorted(PRESETS)), default=None)
@click.option("--embedding", type=click.Choice(["gcn", "sage", "none"]), default=None)
@click.option("--embedding-mode", type=click.Choice(["trained", "offline"]), default=None)
@click.option("--hidden", type=click.IntRange(min=1), default=None)
@click.option("--layers", type=click.IntRange(min=0), default=None)
@click.option("--features", type=click.Choice(["onehot", "pca", "identity", "given"]), default=None)
@click.option("--feature-dim", type=click.IntRange(min=1), default=None)
@click.option("--vocab", type=str, default=None, help="Fixed vocabulary file for one-hot features.")
@click.option("--lr", "learning_rate", type=float, default=None)
@click.option("--epochs", "max_epochs", type=click.IntRange(min=1), default=None)
@click.option("--patience", type=click.IntRange(min=1), default=None)
@click.option("--lam", type=click.FloatRange(min=0.0), default=None)
@click.option("--normalized-balance/--raw-balance", default=None)
@click.option("--resume", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Checkpoint to continue from, including its optimizer state.")
@click.option("--weighted", is_flag=True, default=None)
@common_seed
@common_out
@common_config
def train(graphs, vals, g_parts, preset, embedding, embedding_mode, hidden, layers, features,
          feature_dim, vocab, learning_rate, max_epochs, patience, lam, normalized_balance, resume,
          weighted, seed, out, config_path):
    """Train a model on one or more graphs; writes model.ckpt and history.csv."""
    cfg = load_config(config_path)
    seed = seed if seed is not None else cfg.get("seed", 0)
    out = out or cfg.get("output", {}).get("dir") or "run"
    ds = merge(cfg, "dataset", train=list(graphs) or None, val=list(vals) or None,
               vocab=vocab, weighted=weighted)
    mflags = merge(cfg, "model", g_parts=g_parts, preset=preset, embedding=embedding,
                   embedding_mode=embedding_mode, hidden=hidden, layers=layers, features=features,
                   feature_dim=feature_dim)
    preset_name = mflags.get("preset")
    base_model, base_train = {}, {}
    if preset_name:
        p = get_preset(preset_name)
        base_model = dict(p["model"])
        base_model["features"] = p["features"]["kind"]
        if p["features"]["dim"] is not None:
            base_model["feature_dim"] = p["features"]["dim"]
        base_train = p["training"]
    mcfg = {**base_model, **mflags}
    tflags = merge(cfg, "training", learning_rate=learning_rate, max_epochs=max_epochs,
                   patience=patience, lam=lam, normalized_balance=normalized_balance)
    tcfg_dict = {**base_train, **tflags}
    train_paths = _paths(ds.get("train"))
    if not train_paths:
        raise ConfigError("no training graphs given (--graph or dataset.train)")
    val_paths = _paths(ds.get("val"))
    for pth in train_paths + val_paths:
        if not os.path.exists(pth):
            raise FileNotFoundError(f"graph file not found: {pth}")
    unknown = ds.get("unknown", "error")
    vocab_file = ds.get("vocab")
    adam = None
    if resume:
        model, adam, _ = read_checkpoint(resume)
        if model.feature_spec.kind == "onehot":
            vocab_file = vocab_file or (vocab_path(resume) if os.path.exists(vocab_path(resume)) else None)
    vocab_list = read_vocab(vocab_file) if vocab_file else None
    weighted_ = bool(ds.get("weighted", False))
    train_graphs = [load_graph(p, weighted_, vocab_list, unknown) for p in train_paths]
    val_graphs = [load_graph(p, weighted_, vocab_list, unknown) for p in val_paths]
    if not resume:
        model = _build_model(mcfg, train_graphs, seed, vocab_file, unknown)
    tcfg = TrainConfig(seed=seed, preset=preset_name, **tcfg_dict)
    resolved = {"seed": seed, "dataset": {**ds, "train": train_paths, "val": val_paths},
                "model": {**mcfg, **model.config.to_dict(), "features": model.feature_spec.kind,
                          "feature_dim": model.feature_spec.dim},
                "training": {k: v for k, v in tcfg.to_dict().items() if k not in ("seed", "preset")},
                "output": {"dir": out}}
    if resume:
        resolved["model"]["checkpoint"] = resume
    write_resolved(out, resolved)
    try:
        result = train_multi_graph(model, train_graphs, val_graphs, tcfg, adam_state=adam)
    except TrainingDiverged as exc:
        save_checkpoint(exc.model, os.path.join(out, "last_finite.ckpt"), exc.adam_state)
        raise
    save_checkpoint(result.model, os.path.join(out, "model.ckpt"), result.adam_state,
                    extra_meta={"train_s": result.elapsed_s, "best_epoch": result.best_epoch,
                                "best_loss": result.best_loss})
    atomic_write(os.path.join(out, "history.csv"), _history_csv(result))
    click.echo(f"best monitored loss {result.best_loss:.6f} at epoch {result.best_epoch} "
               f"({result.stop_reason}); wrote {os.path.join(out, 'model.ckpt')}")


def _load_model_for(checkpoint, g_parts):
    model, _, meta = read_checkpoint(checkpoint)
    if g_parts is not None and g_parts != model.g_parts:
        raise ConfigError(f"checkpoint was trained for g={model.g_parts}, requested g={g_parts}; "
                          "the partition count is fixed by the model head")
    vocab = None
    if model.feature_spec.kind == "onehot":
        vocab = list(model.feature_spec.vocab)
    return model, meta, vocab


@cli.command("infer")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--graph", type=str, default=None)
@click.option("--g", "g_parts", type=click.IntRange(min=2), default=None)
@click.option("--weighted", is_flag=True, default=None)
@common_seed
@common_out
@common_config
def infer_cmd(checkpoint, graph, g_parts, weighted, seed, out, config_path):
    """Partition a graph with a trained model; writes assignment.txt and metrics.json."""
    cfg = load_config(config_path)
    seed = seed if seed is not None else cfg.get("seed", 0)
    out = out or cfg.get("output", {}).get("dir") or "infer"
    ds = merge(cfg, "dataset", graph=graph, weighted=weighted)
    mcfg = merge(cfg, "model", checkpoint=checkpoint, g_parts=g_parts)
    if not mcfg.get("checkpoint") or not ds.get("graph"):
        raise ConfigError("infer needs --checkpoint and --graph")
    model, _, vocab = _load_model_for(mcfg["checkpoint"], mcfg.get("g_parts"))
    unknown = model.feature_spec.unknown
    g = load_graph(ds["graph"], bool(ds.get("weighted", False)), vocab, unknown)
    write_resolved(out, {"seed": seed, "dataset": ds, "model": mcfg, "output": {"dir": out}})
    res = infer(model, g, seed=seed)
    write_assignment(res.assignment, os.path.join(out, "assignment.txt"))
    atomic_write(os.path.join(out, "metrics.json"), json.dumps(res.metrics.to_dict(), indent=2))
    m = res.metrics
    click.echo(f"edge_cut_ratio {m.edge_cut_ratio:.4f} balancedness {m.balancedness:.4f} "
               f"wall_clock_ms {m.wall_clock_ms:.1f}")


@cli.command("eval")
@click.option("--graph", type=str, required=False, default=None)
@click.option("--assignment", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--g", "g_parts", type=click.IntRange(min=2), default=None)
@click.option("--degree-histogram", type=click.Path(dir_okay=False), default=None,
              help="Also write a degree,count CSV here.")
@click.option("--weighted", is_flag=True, default=None)
@common_seed
@common_out
@common_config
def eval_cmd(graph, assignment, g_parts, degree_histogram, weighted, seed, out, config_path):
    """Score an assignment file against a graph."""
    cfg = load_config(config_path)
    ds = merge(cfg, "dataset", graph=graph, weighted=weighted)
    if not ds.get("graph") or assignment is None:
        raise ConfigError("eval needs --graph and --assignment")
    g = load_graph(ds["graph"], bool(ds.get("weighted", False)))
    a = read_assignment(assignment, g.n)
    g_parts = g_parts or merge(cfg, "model").get("g_parts") or int(a.max()) + 1
    report = evaluate(g, a, max(int(g_parts), 2))
    doc = json.dumps(report.to_dict(), indent=2)
    if out:
        write_resolved(out, {"dataset": ds, "model": {"g_parts": int(g_parts)}, "output": {"dir": out}})
        atomic_write(os.path.join(out, "metrics.json"), doc)
    if degree_histogram:
        rows = "degree,count\n" + "".join(f"{d:g},{c}\n" for d, c in degree_counts(g))
        atomic_write(degree_histogram, rows)
    click.echo(doc)


@cli.command()
@click.option("--graph", type=str, default=None)
@click.option("--g", "g_parts", type=click.IntRange(min=2), default=None)
@click.option("--balanced", is_flag=True, help="Only consider assignments with sizes differing by <= 1.")
@click.option("--weighted", is_flag=True, default=None)
@common_seed
@common_out
@common_config
def oracle(graph, g_parts, balanced, weighted, seed, out, config_path):
    """Exact minimum normalized cut by enumeration (small graphs only)."""
    cfg = load_config(config_path)
    ds = merge(cfg, "dataset", graph=graph, weighted=weighted)
    g_parts = g_parts or merge(cfg, "model").get("g_parts") or 2
    if not ds.get("graph"):
        raise ConfigError("oracle needs --graph")
    g = load_graph(ds["graph"], bool(ds.get("weighted", False)))
    res = brute_force_min_ncut(g, int(g_parts), require_balanced=balanced)
    doc = {"ncut": res.ncut, "assignment": res.assignment.tolist(), "enumerated": res.enumerated,
           "g": int(g_parts), "balanced": balanced}
    if out:
        write_resolved(out, {"dataset": ds, "model": {"g_parts": int(g_parts)}, "output": {"dir": out}})
        write_assignment(res.assignment, os.path.join(out, "assignment.txt"))
        atomic_write(os.path.join(out, "oracle.json"), json.dumps(doc, indent=2))
    click.echo(f"min Ncut {res.ncut:.6f} over {res.enumerated} assignments")


@cli.command()
@click.option("--graph", "graphs", multiple=True, type=str, help="Graph file (repeatable).")
@click.option("--g", "g_parts", type=click.IntRange(min=2), default=None)
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Add a GAP inference column from this trained model.")
@click.option("--external", multiple=True, type=str,
              help="NAME=COMMAND template with {graph}, {g} and optionally {out}.")
@click.option("--repeats", type=click.IntRange(min=1), default=None)
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--weighted", is_flag=True, default=None)
@common_seed
@common_out
@common_config
def bench(graphs, g_parts, checkpoint, external, repeats, workers, weighted, seed, out, config_path):
    """Compare partitioners on a set of graphs; writes bench.csv and bench.json."""
    cfg = load_config(config_path)
    seed = seed if seed is not None else cfg.get("seed", 0)
    out = out or cfg.get("output", {}).get("dir") or "bench"
    ds = merge(cfg, "dataset", graphs=list(graphs) or None, weighted=weighted)
    mcfg = merge(cfg, "model", g_parts=g_parts, checkpoint=checkpoint)
    bcfg = merge(cfg, "bench", repeats=repeats, workers=workers, external=list(external) or None)
    paths = _paths(ds.get("graphs"))
    if not paths:
        raise ConfigError("bench needs at least one --graph")
    parts = default_partitioners()
    vocab, unknown = None, "error"
    if mcfg.get("checkpoint"):
        model, meta, vocab = _load_model_for(mcfg["checkpoint"], mcfg.get("g_parts"))
        unknown = model.feature_spec.unknown
        train_s = meta.get("extra", {}).get("train_s")
        parts["gap"] = GapPartitioner(model, train_ms=None if train_s is None else train_s * 1e3)
        mcfg.setdefault("g_parts", model.g_parts)
    if mcfg.get("g_parts") is None:
        raise ConfigError("bench needs --g (or a checkpoint)")
    for spec in _paths(bcfg.get("external")):
        if "=" not in spec:
            raise ConfigError(f"--external expects NAME=COMMAND, got {spec!r}")
        name, template = spec.split("=", 1)
        parts[name.strip()] = ExternalPartitioner(template.strip(), name=name.strip())
    if bcfg.get("partitioners"):
        keep = set(bcfg["partitioners"])
        parts = {k: v for k, v in parts.items() if k in keep}
    weighted_ = bool(ds.get("weighted", False))
    loaded = [(os.path.basename(p), load_graph(p, weighted_, vocab, unknown)) for p in paths]
    write_resolved(out, {"seed": seed, "dataset": {**ds, "graphs": paths}, "model": mcfg,
                         "bench": bcfg, "output": {"dir": out}})
    rows = benchmark(parts, loaded, int(mcfg["g_parts"]), repeats=int(bcfg.get("repeats", 1)),
                     seed=seed, workers=int(bcfg.get("workers", 1)))
    write_report(rows, os.path.join(out, "bench.csv"), os.path.join(out, "bench.json"),
                 meta={"spectral_laplacian": "unnormalized", "kmeans_restarts": 20,
                       "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")})
    for r in rows:
        click.echo(f"{r['partitioner']:>10} {r['graph']:>20}  cut {r['edge_cut_ratio_mean']:.4f}  "
                   f"bal {r['balancedness_mean']:.4f}  {r['wall_ms_mean']:.1f} ms"
                   + (f"  error: {r['error']}" if r["error"] else ""))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="gappart", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except (TrainingDiverged, ad.NonFiniteError, EigenNonConvergence, FloatingPointError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERIC
    except (CheckpointError, OSError) as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO
    except (ConfigError, GraphError, FeatureMismatch, OracleTooLarge, ValueError, KeyError,
            yaml.YAMLError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
