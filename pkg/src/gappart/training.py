"""Per-graph and multi-graph training of :class:`GapModel`."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .graph import Graph
from .loss import gap_loss_terms, hard_assignment, minibatch_loss_terms
from .metrics import balancedness, edge_cut_ratio
from .model import GapModel
from .optim import AdamState, adam_step


class TrainingDiverged(FloatingPointError):
    """Loss or gradient became non-finite. ``model`` holds the last finite weights."""

    def __init__(self, message, model, history, adam_state):
        super().__init__(message)
        self.model = model
        self.history = history
        self.adam_state = adam_state


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 500
    seed: int = 0
    lam: float = 1.0
    normalized_balance: bool = False
    minibatch_size: int | None = None
    patience: int = 50
    accumulate: bool = False
    loss_path: str = "sparse"
    target_loss: float | None = None
    preset: str | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.loss_path not in ("sparse", "dense"):
            raise ValueError("loss_path must be 'sparse' or 'dense'")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: GapModel
    history: list[dict]
    monitor: list[tuple[int, float]]
    best_epoch: int
    best_loss: float
    adam_state: AdamState
    stop_reason: str
    elapsed_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def per_graph(self) -> dict[int, list[dict]]:
        out: dict[int, list[dict]] = {}
        for row in self.history:
            out.setdefault(row["graph"], []).append(row)
        return out


def _loss(model, g, y, cfg, rng):
    n = g.n
    if cfg.minibatch_size and cfg.minibatch_size < n:
        nodes = np.sort(rng.choice(n, size=cfg.minibatch_size, replace=False))
        return minibatch_loss_terms(g, y, nodes, model.g_parts, cfg.lam,
                                    cfg.normalized_balance, cfg.loss_path)
    return gap_loss_terms(g, y, model.g_parts, cfg.lam, cfg.normalized_balance, cfg.loss_path)


def evaluate_loss(model: GapModel, graphs, features, cfg: TrainConfig) -> float:
    """Mean full-graph loss over ``graphs`` with current weights, no gradients."""
    vals = []
    for g, x in zip(graphs, features):
        y = model.forward(g, x, sample=False)
        vals.append(gap_loss_terms(g, y, model.g_parts, cfg.lam, cfg.normalized_balance,
                                   cfg.loss_path)[0].item())
    return float(np.mean(vals))


def train_multi_graph(model: GapModel, train_graphs, val_graphs, cfg: TrainConfig,
                      train_features=None, val_features=None, adam_state=None,
                      callback=None) -> TrainResult:
    """Train on several graphs, one Adam step per graph visit.

    Epoch order over ``train_graphs`` is reshuffled from ``cfg.seed``. The
    monitored loss is the mean loss on ``val_graphs`` measured at the start
    of every epoch (and once after the last). With no validation graphs the
    monitor falls back to the mean training loss of the epoch's forward
    passes, each measured just before its own update; with a single graph
    that is exactly the loss of the start-of-epoch weights. The weights with
    the lowest monitored loss are returned; training stops after
    ``cfg.patience`` epochs without improvement or once the monitor drops to
    ``cfg.target_loss``.

    ``model`` itself is left untouched.
    """
    train_graphs = list(train_graphs)
    val_graphs = list(val_graphs or [])
    if not train_graphs:
        raise ValueError("need at least one training graph")
    model = model.copy()
    t_start = time.perf_counter()
    if train_features is None:
        train_features = [model.features(g, seed=cfg.seed) for g in train_graphs]
    if val_features is None:
        val_features = [model.features(g, seed=cfg.seed) for g in val_graphs]
    state = adam_state if adam_state is not None else AdamState(lr=cfg.learning_rate)
    state.lr = cfg.learning_rate
    rng = np.random.default_rng(cfg.seed)
    trainable = model.trainable_names()
    sampling = model.config.embedding == "sage" and model.config.sample_size is not None

    # frozen embeddings only need computing once per graph
    frozen_z: dict[int, np.ndarray] = {}
    if model.config.embedding_mode == "offline" and not sampling:
        for i, (g, x) in enumerate(zip(train_graphs, train_features)):
            frozen_z[i] = model.embed(g, x).value

    history: list[dict] = []
    monitor: list[tuple[int, float]] = []
    best = (np.inf, -1, model.copy())
    since_best = 0
    stop_reason = "max_epochs"
    last_finite = model.copy()

    def record_monitor(epoch, value):
        nonlocal best, since_best
        monitor.append((epoch, value))
        if value < best[0]:
            best = (value, epoch, snapshot)
            since_best = 0
        else:
            since_best += 1

    def diverged(msg):
        raise TrainingDiverged(msg, last_finite, history, state)

    for epoch in range(cfg.max_epochs + 1):
        snapshot = model.copy()
        if val_graphs:
            try:
                record_monitor(epoch, evaluate_loss(model, val_graphs, val_features, cfg))
            except ad.NonFiniteError as exc:
                diverged(f"validation loss became non-finite at epoch {epoch}: {exc}")
        if epoch == cfg.max_epochs:
            if not val_graphs:
                record_monitor(epoch, evaluate_loss(model, train_graphs, train_features, cfg))
            break
        if val_graphs and (cfg.target_loss is not None and monitor[-1][1] <= cfg.target_loss):
            stop_reason = "target_loss"
            break
        if val_graphs and since_best > cfg.patience:
            stop_reason = "early_stop"
            break

        order = rng.permutation(len(train_graphs))
        epoch_losses = []
        acc: dict[str, np.ndarray] = {}
        for gi in order:
            g, x = train_graphs[gi], train_features[gi]
            tape = ad.Tape()
            try:
                y = model.forward(g, x, tape=tape, seed=cfg.seed, epoch=epoch, sample=sampling,
                                  z=frozen_z.get(int(gi)))
                loss, ncut, bal = _loss(model, g, y, cfg, rng)
                grads = ad.backward(tape, loss, wrt=trainable)
            except ad.NonFiniteError as exc:
                diverged(f"non-finite values at epoch {epoch}, graph {gi}: {exc}")
            a = hard_assignment(y)
            row = {"epoch": epoch, "graph": int(gi), "loss": loss.item(),
                   "expected_ncut": ncut.item(), "balance_error": bal.item(),
                   "edge_cut_ratio": edge_cut_ratio(g, a),
                   "balancedness": balancedness(a, model.g_parts)}
            history.append(row)
            epoch_losses.append(row["loss"])
            if cfg.accumulate:
                for k, v in grads.items():
                    acc[k] = acc[k] + v if k in acc else v
                continue
            try:
                model.params = adam_step(state, model.params, grads)
            except ad.NonFiniteError as exc:
                diverged(str(exc))
            last_finite = model.copy()
        if cfg.accumulate:
            try:
                model.params = adam_step(state, model.params,
                                         {k: v / len(order) for k, v in acc.items()})
            except ad.NonFiniteError as exc:
                diverged(str(exc))
            last_finite = model.copy()
        if callback is not None:
            callback(epoch, history)
        if not val_graphs:
            record_monitor(epoch, float(np.mean(epoch_losses)))
            if cfg.target_loss is not None and monitor[-1][1] <= cfg.target_loss:
                stop_reason = "target_loss"
                break
            if since_best > cfg.patience:
                stop_reason = "early_stop"
                break

    best_loss, best_epoch, best_model = best
    return TrainResult(best_model, history, monitor, best_epoch, float(best_loss), state,
                       stop_reason, time.perf_counter() - t_start)


def train_single_graph(model: GapModel, g: Graph, cfg: TrainConfig, features=None,
                       adam_state=None, callback=None) -> TrainResult:
    """Optimize the model for one graph; the multi-graph loop with a single
    training graph and no validation set."""
    feats = None if features is None else [features]
    return train_multi_graph(model, [g], [], cfg, train_features=feats,
                             adam_state=adam_state, callback=callback)
