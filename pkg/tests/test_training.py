import numpy as np
import pytest

from gappart.baselines import brute_force_min_ncut
from gappart.features import FeatureSpec
from gappart.graph import Graph, generate_clique_chain, generate_erdos_renyi
from gappart.loss import exact_ncut
from gappart.model import GapModel, ModelConfig, infer
from gappart.training import (TrainConfig, TrainingDiverged, evaluate_loss, train_multi_graph,
                              train_single_graph)


def _small(g_parts=2, n=6, embedding="gcn"):
    cfg = ModelConfig(g_parts, embedding=embedding, hidden=16, layers=2, head_layers=(16,))
    return GapModel.create(cfg, FeatureSpec("identity", n), seed=0)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(max_epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(loss_path="gpu")
    assert TrainConfig().to_dict()["patience"] == 50


def test_two_triangles_recovered(two_triangles):
    cfg = TrainConfig(learning_rate=0.01, max_epochs=500, patience=500, seed=0)
    res = train_single_graph(_small(), two_triangles, cfg)
    a = infer(res.model, two_triangles).assignment
    assert exact_ncut(two_triangles, a) == pytest.approx(brute_force_min_ncut(two_triangles, 2).ncut)
    assert res.best_loss < 0.5


def test_training_is_deterministic(two_triangles):
    cfg = TrainConfig(learning_rate=0.01, max_epochs=20, seed=3)
    a = train_single_graph(_small(), two_triangles, cfg)
    b = train_single_graph(_small(), two_triangles, cfg)
    assert a.model.checksum() == b.model.checksum()
    assert [r["loss"] for r in a.history] == [r["loss"] for r in b.history]


def test_single_graph_is_multi_with_one_graph(two_triangles):
    cfg = TrainConfig(learning_rate=0.01, max_epochs=15, seed=1)
    a = train_single_graph(_small(), two_triangles, cfg)
    b = train_multi_graph(_small(), [two_triangles], [], cfg)
    assert a.model.checksum() == b.model.checksum()
    assert a.monitor == b.monitor


def test_input_model_untouched(two_triangles):
    m = _small()
    before = m.checksum()
    train_single_graph(m, two_triangles, TrainConfig(max_epochs=5))
    assert m.checksum() == before


def test_monitor_without_val_is_start_of_epoch_loss(two_triangles):
    cfg = TrainConfig(learning_rate=0.01, max_epochs=10, patience=100)
    res = train_single_graph(_small(), two_triangles, cfg)
    losses = [r["loss"] for r in res.history]
    assert [v for _, v in res.monitor[:10]] == losses
    assert len(res.monitor) == 11
    x = res.model.features(two_triangles)
    assert evaluate_loss(res.model, [two_triangles], [x], cfg) == pytest.approx(res.best_loss)


def test_multi_graph_with_validation():
    train = [generate_erdos_renyi(12, 0.4, s) for s in range(3)]
    val = [generate_erdos_renyi(12, 0.4, 10)]
    cfg = TrainConfig(learning_rate=0.01, max_epochs=8, patience=100)
    res = train_multi_graph(_small(2, 12), train, val, cfg)
    assert len(res.history) == 8 * 3
    assert sorted(res.per_graph()) == [0, 1, 2]
    assert [e for e, _ in res.monitor] == list(range(9))
    assert res.best_loss == min(v for _, v in res.monitor)


def test_early_stop_and_target_loss(two_triangles):
    # edgeless graph, no balance term: the loss is identically 0 and never improves
    flat = Graph.from_edges(6, [])
    res = train_single_graph(_small(), flat, TrainConfig(lam=0, max_epochs=200, patience=2))
    assert res.stop_reason == "early_stop" and len(res.monitor) == 4 and res.best_epoch == 0
    res = train_single_graph(_small(), two_triangles,
                             TrainConfig(learning_rate=0.01, max_epochs=500, patience=500,
                                         target_loss=0.9))
    assert res.stop_reason == "target_loss" and res.best_loss <= 0.9


def test_minibatch_and_accumulate_run():
    g = generate_erdos_renyi(30, 0.2, 0)
    for cfg in (TrainConfig(max_epochs=3, minibatch_size=10), TrainConfig(max_epochs=3, accumulate=True)):
        res = train_single_graph(_small(2, 30), g, cfg)
        assert np.isfinite(res.best_loss)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_last_finite_model(two_triangles):
    cfg = TrainConfig(learning_rate=1e300, max_epochs=20)
    with pytest.raises(TrainingDiverged) as info:
        train_single_graph(_small(), two_triangles, cfg)
    exc = info.value
    assert all(np.all(np.isfinite(v)) for v in exc.model.params.values())


def test_resume_continues_optimizer_state(two_triangles):
    cfg = TrainConfig(learning_rate=0.01, max_epochs=5, patience=100)
    first = train_single_graph(_small(), two_triangles, cfg)
    assert first.adam_state.t == 5
    second = train_single_graph(first.model, two_triangles, cfg, adam_state=first.adam_state)
    assert second.adam_state.t == 10


def test_offline_sage_sampling_trains():
    g = generate_clique_chain([4, 4])
    cfg = ModelConfig(2, embedding="sage", embedding_mode="offline", hidden=8, layers=2,
                      sample_size=2, head_layers=(8,))
    m = GapModel.create(cfg, FeatureSpec("identity", 8), seed=0)
    before = m.checksum(m.embedding_names())
    res = train_single_graph(m, g, TrainConfig(learning_rate=0.01, max_epochs=5))
    assert res.model.checksum(m.embedding_names()) == before
