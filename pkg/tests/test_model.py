import numpy as np
import pytest

from gappart import autodiff as ad
from gappart.checkpoint import MAGIC, CheckpointError, load_checkpoint, read_checkpoint, save_checkpoint
from gappart.features import FeatureMismatch, FeatureSpec
from gappart.graph import generate_erdos_renyi, generate_featured_blocks
from gappart.loss import gap_loss
from gappart.model import GapModel, ModelConfig, infer
from gappart.optim import AdamState, adam_step

OPS = ["Add", "Conv2D", "MatMul", "Relu"]


def _model(embedding="gcn", mode="trained", g_parts=3, dim=5, **kw):
    cfg = ModelConfig(g_parts, embedding=embedding, embedding_mode=mode, hidden=6, layers=2,
                      head_layers=(7,), **kw)
    return GapModel.create(cfg, FeatureSpec("pca", dim), seed=1)


@pytest.mark.parametrize("embedding", ["gcn", "sage", "none"])
def test_forward_shapes_and_rows(embedding):
    g = generate_erdos_renyi(20, 0.3, 0)
    y = _model(embedding).forward(g).value
    assert y.shape == (20, 3)
    np.testing.assert_allclose(y.sum(axis=1), 1, atol=1e-12)
    assert np.all(y > 0)


def test_zero_final_layer_gives_uniform():
    g = generate_erdos_renyi(10, 0.4, 0)
    m = _model()
    m.params["head1.W"][:] = 0
    np.testing.assert_allclose(m.forward(g).value, 1 / 3, atol=1e-15)


def test_config_validation_and_roundtrip():
    with pytest.raises(ValueError):
        ModelConfig(1)
    with pytest.raises(ValueError):
        ModelConfig(2, embedding="gat")
    with pytest.raises(ValueError):
        ModelConfig(2, embedding_mode="frozen")
    cfg = ModelConfig(4, embedding="sage", head_layers=[8, 8])
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.fingerprint() != ModelConfig(4).fingerprint()


def test_parameter_names_and_trainable_sets():
    m = _model("gcn", "offline")
    assert m.head_names() == ["head0.W", "head0.b", "head1.W", "head1.b"]
    assert m.trainable_names() == m.head_names()
    t = _model("gcn", "trained")
    assert t.trainable_names() == ["gcn.W0", "gcn.W1", *t.head_names()]
    assert t.shape_table()["head0.W"] == (6, 7)
    assert _model("none").shape_table()["head0.W"] == (5, 7)


def test_seeded_creation_is_deterministic():
    assert _model().checksum() == _model().checksum()
    cfg = ModelConfig(3, hidden=6, layers=2, head_layers=(7,))
    assert GapModel.create(cfg, FeatureSpec("pca", 5), seed=2).checksum() != _model().checksum()


def test_offline_embedding_stays_frozen():
    g = generate_erdos_renyi(15, 0.3, 0)
    m = _model("gcn", "offline")
    before = m.checksum(m.embedding_names())
    state = AdamState(lr=0.1)
    for _ in range(3):
        tape = ad.Tape()
        loss = gap_loss(g, m.forward(g, tape=tape), 3)
        grads = ad.backward(tape, loss, wrt=m.trainable_names())
        assert set(grads) == set(m.head_names())
        m.params = adam_step(state, m.params, grads)
    assert m.checksum(m.embedding_names()) == before


@pytest.mark.parametrize("embedding", ["gcn", "sage"])
def test_model_gradients_match_finite_differences(embedding):
    g = generate_erdos_renyi(8, 0.5, 3)
    m = _model(embedding, dim=4)
    rng = np.random.default_rng(0)
    for k in m.params:
        if k.endswith(".b"):
            m.params[k] = rng.normal(scale=0.1, size=m.params[k].shape)
    x = m.features(g)

    def build(tape, t):
        bound = {**{k: ad.as_tensor(v) for k, v in m.params.items()}, **t}
        return gap_loss(g, m.head(m.embed(g, x, bound), bound), 3)

    assert ad.finite_difference_check(build, m.params) <= 1e-4


def test_infer_result_and_g_check():
    g = generate_erdos_renyi(30, 0.2, 0)
    m = _model()
    res = infer(m, g)
    assert res.assignment.shape == (30,) and res.probs.shape == (30, 3)
    assert np.array_equal(res.assignment, res.probs.argmax(axis=1))
    assert res.metrics.wall_clock_ms >= 0 and res.metrics.extra["features_ms"] >= 0
    with pytest.raises(ValueError, match="g=3"):
        infer(m, g, g_parts=4)


def test_feature_width_mismatch():
    g = generate_erdos_renyi(10, 0.3, 0)
    with pytest.raises(FeatureMismatch):
        _model().forward(g, x=np.zeros((10, 4)))


def test_checkpoint_roundtrip_bit_identical(tmp_path):
    g = generate_erdos_renyi(12, 0.3, 0)
    m = _model("sage")
    state = AdamState(lr=0.01)
    tape = ad.Tape()
    grads = ad.backward(tape, gap_loss(g, m.forward(g, tape=tape), 3))
    m.params = adam_step(state, m.params, grads)
    path = tmp_path / "m.ckpt"
    save_checkpoint(m, path, state, extra_meta={"note": 1})
    m2, s2, meta = read_checkpoint(path)
    assert m2.config == m.config and m2.feature_spec == m.feature_spec
    assert m2.checksum() == m.checksum()
    assert s2.t == state.t and all(np.array_equal(s2.m[k], state.m[k]) for k in state.m)
    assert meta["extra"] == {"note": 1}
    assert np.array_equal(infer(m2, g).probs, infer(m, g).probs)


def test_checkpoint_onehot_writes_vocab(tmp_path):
    g = generate_featured_blocks([10, 10], 0.3, 0.05, OPS, ["Conv2D", "MatMul"], seed=0)
    m = GapModel.create(ModelConfig(2, hidden=4, layers=1, head_layers=(4,)), FeatureSpec.onehot(OPS))
    save_checkpoint(m, tmp_path / "m.ckpt")
    assert (tmp_path / "m.ckpt.vocab").read_text().split() == OPS
    assert load_checkpoint(tmp_path / "m.ckpt").feature_spec.vocab == tuple(OPS)
    infer(m, g)


def test_checkpoint_corruption_detected(tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(_model(), path)
    data = path.read_bytes()
    assert data.startswith(MAGIC)
    (tmp_path / "magic").write_bytes(b"NOTACKPT" + data[8:])
    with pytest.raises(CheckpointError, match="magic"):
        read_checkpoint(tmp_path / "magic")
    flipped = bytearray(data)
    flipped[len(data) // 2] ^= 0xFF
    (tmp_path / "flip").write_bytes(bytes(flipped))
    with pytest.raises(CheckpointError):
        read_checkpoint(tmp_path / "flip")
    (tmp_path / "short").write_bytes(data[:-40])
    with pytest.raises(CheckpointError):
        read_checkpoint(tmp_path / "short")
    (tmp_path / "version").write_bytes(data[:8] + (9).to_bytes(4, "little") + data[12:])
    with pytest.raises(CheckpointError, match="version 9"):
        read_checkpoint(tmp_path / "version")


def test_checkpoint_g_mismatch(tmp_path):
    save_checkpoint(_model(), tmp_path / "m.ckpt")
    with pytest.raises(CheckpointError, match="g=3"):
        load_checkpoint(tmp_path / "m.ckpt", g_parts=2)
