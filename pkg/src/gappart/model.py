"""The partitioning network: node embedding followed by a dense softmax head."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .embedding import GcnParams, SageParams, gcn_forward, sage_forward
from .features import FeatureMismatch, FeatureSpec
from .graph import Graph
from .loss import hard_assignment
from .metrics import MetricsReport, evaluate
from .optim import xavier_init


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of a :class:`GapModel`.

    ``embedding`` is ``gcn``, ``sage`` or ``none`` (head reads raw features).
    ``embedding_mode="offline"`` keeps embedding weights at their random
    initialization and stops gradients at the embedding output.
    ``head_layers`` lists hidden dense widths; a final dense layer of width
    ``g_parts`` and a row softmax always follow.
    """

    g_parts: int
    embedding: str = "gcn"
    embedding_mode: str = "trained"
    hidden: int = 64
    layers: int = 3
    shared_pooling: bool = False
    sample_size: int | None = None
    projection_bias: str = "agg"
    head_layers: tuple[int, ...] = (64,)

    def __post_init__(self):
        if self.g_parts < 2:
            raise ValueError(f"need at least 2 partitions, got {self.g_parts}")
        if self.embedding not in ("gcn", "sage", "none"):
            raise ValueError(f"unknown embedding kind {self.embedding!r}")
        if self.embedding_mode not in ("trained", "offline"):
            raise ValueError(f"embedding_mode must be 'trained' or 'offline', got {self.embedding_mode!r}")
        if self.hidden < 1 or self.layers < 0 or any(w < 1 for w in self.head_layers):
            raise ValueError("layer widths must be >= 1 and layer counts >= 0")
        object.__setattr__(self, "head_layers", tuple(int(w) for w in self.head_layers))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["head_layers"] = list(self.head_layers)
        return d

    @classmethod
    def from_dict(cls, d) -> ModelConfig:
        d = dict(d)
        if "head_layers" in d:
            d["head_layers"] = tuple(d["head_layers"])
        return cls(**d)

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class GapModel:
    config: ModelConfig
    feature_spec: FeatureSpec
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def create(cls, config: ModelConfig, feature_spec: FeatureSpec, seed=0) -> GapModel:
        m = cls(config, feature_spec)
        m.params = m._init_params(seed)
        return m

    # -- structure -------------------------------------------------------

    @property
    def g_parts(self) -> int:
        return self.config.g_parts

    @property
    def embed_spec(self):
        c = self.config
        if c.embedding == "gcn":
            return GcnParams(self.feature_spec.dim, c.hidden, c.layers,
                             trainable=c.embedding_mode == "trained")
        if c.embedding == "sage":
            return SageParams(self.feature_spec.dim, c.hidden, c.layers, c.shared_pooling,
                              c.sample_size, c.projection_bias,
                              trainable=c.embedding_mode == "trained")
        return None

    @property
    def embed_dim(self) -> int:
        spec = self.embed_spec
        return self.feature_spec.dim if spec is None else spec.out_dim

    def head_names(self) -> list[str]:
        n = len(self.config.head_layers) + 1
        return [nm for i in range(n) for nm in (f"head{i}.W", f"head{i}.b")]

    def embedding_names(self) -> list[str]:
        spec = self.embed_spec
        return [] if spec is None else spec.names()

    def trainable_names(self) -> list[str]:
        names = list(self.head_names())
        if self.config.embedding_mode == "trained":
            names = self.embedding_names() + names
        return names

    def _init_params(self, seed) -> dict[str, np.ndarray]:
        ss = np.random.SeedSequence(seed)
        emb_seed, head_seed = ss.spawn(2)
        params = {}
        spec = self.embed_spec
        if spec is not None:
            params.update(spec.init(emb_seed.generate_state(1)[0]))
        rng = np.random.default_rng(head_seed)
        widths = [self.embed_dim, *self.config.head_layers, self.g_parts]
        for i in range(len(widths) - 1):
            params[f"head{i}.W"] = xavier_init(widths[i], widths[i + 1], rng.integers(2**63))
            params[f"head{i}.b"] = np.zeros((1, widths[i + 1]))
        return params

    def shape_table(self) -> dict[str, tuple[int, ...]]:
        return {k: tuple(v.shape) for k, v in self.params.items()}

    def copy(self) -> GapModel:
        return GapModel(self.config, self.feature_spec,
                        {k: np.array(v) for k, v in self.params.items()})

    # -- forward ---------------------------------------------------------

    def features(self, g: Graph, seed=0) -> np.ndarray:
        return self.feature_spec.build(g, seed=seed)

    def _bind(self, tape):
        """Parameter tensors: trainable ones on the tape, the rest as constants."""
        train = set(self.trainable_names()) if tape is not None else set()
        out = {}
        for k, v in self.params.items():
            out[k] = tape.parameter(k, v) if k in train else ad.as_tensor(v)
        return out

    def embed(self, g: Graph, x, bound=None, seed=0, epoch=0, sample=False):
        bound = bound if bound is not None else {k: ad.as_tensor(v) for k, v in self.params.items()}
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (g.n, self.feature_spec.dim):
            raise FeatureMismatch(f"features have shape {x.shape}, model expects ({g.n}, {self.feature_spec.dim})")
        spec = self.embed_spec
        if spec is None:
            z = ad.as_tensor(x)
        elif isinstance(spec, GcnParams):
            z = gcn_forward(g, x, bound, spec)
        else:
            z = sage_forward(g, x, bound, spec, seed=seed, epoch=epoch, sample=sample)
        if self.config.embedding_mode == "offline":
            z = ad.stop_gradient(z)
        return z

    def head(self, z, bound=None):
        bound = bound if bound is not None else {k: ad.as_tensor(v) for k, v in self.params.items()}
        h = ad.as_tensor(z)
        n_dense = len(self.config.head_layers) + 1
        for i in range(n_dense):
            h = ad.matmul(h, bound[f"head{i}.W"]) + bound[f"head{i}.b"]
            if i < n_dense - 1:
                h = ad.relu(h)
        return ad.row_softmax(h)

    def forward(self, g: Graph, x=None, tape=None, seed=0, epoch=0, sample=False, z=None):
        """Partition probabilities ``Y`` (n x g).

        With a tape, trainable parameters are registered on it and the result
        supports :func:`autodiff.backward`. ``z`` short-circuits the embedding
        (used to reuse frozen embeddings across training steps).
        """
        bound = self._bind(tape)
        if z is None:
            if x is None:
                x = self.features(g, seed=seed)
            z = self.embed(g, x, bound, seed=seed, epoch=epoch, sample=sample)
        return self.head(z, bound)

    def checksum(self, names=None) -> str:
        h = hashlib.sha256()
        for k in sorted(self.params if names is None else names):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self.params[k]).tobytes())
        return h.hexdigest()


@dataclass
class InferenceResult:
    assignment: np.ndarray
    probs: np.ndarray
    metrics: MetricsReport


def infer(model: GapModel, g: Graph, g_parts: int | None = None, x=None, seed=0) -> InferenceResult:
    """One forward pass and a row argmax (ties to the lowest partition id).

    ``metrics.wall_clock_ms`` times the forward pass and argmax;
    ``metrics.extra["features_ms"]`` times feature construction separately.
    GraphSAGE always uses full neighborhoods here so results are deterministic.
    """
    if g_parts is not None and g_parts != model.g_parts:
        raise ValueError(f"model was built for g={model.g_parts}; g is fixed by the head "
                         f"and cannot be changed to {g_parts}")
    t0 = time.perf_counter()
    if x is None:
        x = model.features(g, seed=seed)
    t1 = time.perf_counter()
    y = model.forward(g, x, tape=None, seed=seed, sample=False).value
    a = hard_assignment(y)
    t2 = time.perf_counter()
    report = evaluate(g, a, model.g_parts, probs=y, wall_clock_ms=(t2 - t1) * 1e3,
                      features_ms=(t1 - t0) * 1e3)
    return InferenceResult(a, y, report)
