"""Named hyperparameter presets.

Widths, depths and learning rates are the reference settings for each named
model. Epoch budgets and patience have no reference values; the ones here
are our own choices and are listed with each preset.

Feature ``dim`` of ``None`` for one-hot presets means "the vocabulary found in
the training data".
"""

from __future__ import annotations

import copy

PRESETS: dict[str, dict] = {
    "gap-op-sage-trained": {
        "description": "op-type one-hots, 5-step GraphSAGE (512, shared pooling), "
                       "3 dense layers of 64, embedding trained jointly",
        "features": {"kind": "onehot", "dim": None},
        "model": {"embedding": "sage", "embedding_mode": "trained", "hidden": 512, "layers": 5,
                  "shared_pooling": True, "head_layers": [64, 64, 64]},
        "training": {"learning_rate": 7.5e-5, "max_epochs": 2000, "patience": 50},
    },
    "gap-op-gcn-offline": {
        "description": "op-type one-hots, frozen random 3-layer GCN (64), 3 dense layers of 64",
        "features": {"kind": "onehot", "dim": None},
        "model": {"embedding": "gcn", "embedding_mode": "offline", "hidden": 64, "layers": 3,
                  "head_layers": [64, 64, 64]},
        "training": {"learning_rate": 7.5e-5, "max_epochs": 2000, "patience": 50},
    },
    "gap-id-gcn-offline": {
        "description": "node-index one-hots (width 1024), frozen random 3-layer GCN (64), "
                       "3 dense layers of 64",
        "features": {"kind": "identity", "dim": 1024},
        "model": {"embedding": "gcn", "embedding_mode": "offline", "hidden": 64, "layers": 3,
                  "head_layers": [64, 64, 64]},
        "training": {"learning_rate": 7.5e-5, "max_epochs": 2000, "patience": 50},
    },
    "gap-random-1": {
        "description": "PCA-1000 features, 5-step GraphSAGE (128, shared pooling), "
                       "2 dense layers of 64, trained on one random graph",
        "features": {"kind": "pca", "dim": 1000},
        "model": {"embedding": "sage", "embedding_mode": "trained", "hidden": 128, "layers": 5,
                  "shared_pooling": True, "head_layers": [64, 64]},
        "training": {"learning_rate": 7.5e-4, "max_epochs": 1000, "patience": 50,
                     "normalized_balance": True},
    },
    "gap-random-10": {
        "description": "PCA-1000 features, 2-step GraphSAGE (256, shared pooling), "
                       "3 dense layers of 128, trained on ten random graphs",
        "features": {"kind": "pca", "dim": 1000},
        "model": {"embedding": "sage", "embedding_mode": "trained", "hidden": 256, "layers": 2,
                  "shared_pooling": True, "head_layers": [128, 128, 128]},
        "training": {"learning_rate": 7.5e-6, "max_epochs": 1000, "patience": 50,
                     "normalized_balance": True},
    },
    "gap-scalefree-1": {
        "description": "PCA-1000 features, 5-step GraphSAGE (512), 3 dense layers of 128, "
                       "trained on one scale-free graph",
        "features": {"kind": "pca", "dim": 1000},
        "model": {"embedding": "sage", "embedding_mode": "trained", "hidden": 512, "layers": 5,
                  "head_layers": [128, 128, 128]},
        "training": {"learning_rate": 2.5e-6, "max_epochs": 1000, "patience": 50,
                     "normalized_balance": True},
    },
    "gap-scalefree-10": {
        "description": "PCA-1000 features, 4-step GraphSAGE (128), 1 dense layer of 64, "
                       "trained on ten scale-free graphs",
        "features": {"kind": "pca", "dim": 1000},
        "model": {"embedding": "sage", "embedding_mode": "trained", "hidden": 128, "layers": 4,
                  "head_layers": [64]},
        "training": {"learning_rate": 7.5e-6, "max_epochs": 1000, "patience": 50,
                     "normalized_balance": True},
    },
}


def get_preset(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
