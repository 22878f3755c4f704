"""Scikit-learn style surface: a stateless structural featurizer plus
fit/predict estimators wrapping the model and training loop.

X is a list of Graph objects (or PreparedGraph, when a StructureFeaturizer
ran first in a pipeline); y may be omitted when the graphs carry targets.
Estimators follow the get_params/set_params contract, so they clone and
compose with sklearn pipelines and searches.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin

from .config import ModelConfig, TrainConfig
from .errors import ConfigError
from .graphs import Dataset, Graph, bond_type_count
from .model import ChromaticGraphTransformer, metric_fn
from .structure import PreparedGraph, compute_structure
from .training import train_model


def check_graphs(X) -> tuple[list[Graph], list | None]:
    """Validate X and split it into graphs plus (optional) structures."""
    if isinstance(X, (Graph, PreparedGraph)):
        raise ConfigError("X must be a sequence of graphs, not a single graph")
    items = list(X)
    if not items:
        raise ConfigError("X is empty")
    if all(isinstance(i, PreparedGraph) for i in items):
        return [i.graph for i in items], [i.structure for i in items]
    if all(isinstance(i, Graph) for i in items):
        return items, None
    raise ConfigError("X must hold graphs or prepared graphs, not a mix")


class StructureFeaturizer(BaseEstimator, TransformerMixin):
    """Stateless transform: pair a graph with its precomputed walk powers,
    distances and (optionally) rings. fit is a no-op."""

    def __init__(self, steps: int = 8, rings: bool = False, max_ring_size: int = 6):
        self.steps = steps
        self.rings = rings
        self.max_ring_size = max_ring_size

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> list[PreparedGraph]:
        graphs, _ = check_graphs(X)
        ring_size = self.max_ring_size if self.rings else None
        return [
            PreparedGraph(g, compute_structure(g, self.steps, ring_size))
            for g in graphs
        ]


class _BaseGraphEstimator(BaseEstimator):
    """Shared fit machinery; subclasses fix the task and prediction shape."""

    _task = "regression"

    def _model_config(self, graphs: list[Graph]) -> ModelConfig:
        vocab = [
            max(f[i] for g in graphs for f in g.node_feats) + 1
            for i in range(len(graphs[0].node_feats[0]))
        ]
        bonds = max(max(bond_type_count(g) for g in graphs), 1)
        cfg = ModelConfig(
            layers=self.layers,
            width=self.width,
            heads=self.heads,
            attention=self.attention,
            use_edge_values=self.use_edge_values,
            norm=self.norm,
            rpe=self.rpe,
            rpe_steps=self.rpe_steps,
            rpe_dim=self.rpe_dim,
            node_pe_steps=self.node_pe_steps,
            node_pe_dim=self.node_pe_dim,
            rings=self.rings,
            max_ring_size=self.max_ring_size,
            ring_encoding=self.ring_encoding,
            attn_dropout=self.attn_dropout,
            attn_dropout_p=self.attn_dropout_p,
            task=self._task,
            num_classes=getattr(self, "_n_classes_", 2),
            node_vocab_sizes=vocab,
            num_bond_types=bonds,
            bond_dim=min(self.width, 16),
        )
        cfg.validate()
        return cfg

    def _needed_steps(self) -> int:
        steps = self.node_pe_steps
        if self.rpe != "none":
            steps = max(steps, self.rpe_steps)
        return max(steps, 1)

    def _prepare(self, X):
        graphs, structures = check_graphs(X)
        if structures is None:
            ring_size = self.max_ring_size if self.rings else None
            structures = [
                compute_structure(g, self._needed_steps(), ring_size) for g in graphs
            ]
        return graphs, structures

    def _attach_targets(self, graphs: list[Graph], y) -> list[Graph]:
        if y is None:
            missing = [i for i, g in enumerate(graphs) if g.target is None]
            if missing:
                raise ConfigError(
                    f"graphs {missing[:5]} carry no target and y was not given"
                )
            return graphs
        if len(y) != len(graphs):
            raise ConfigError(f"{len(y)} targets for {len(graphs)} graphs")
        out = []
        for g, target in zip(graphs, y):
            if self._task == "regression":
                target = float(target)
            else:
                target = tuple(int(c) for c in np.asarray(target))
            out.append(Graph(g.num_nodes, g.node_feats, g.edges, target))
        return out

    def _fit(self, X, y):
        graphs, structures = self._prepare(X)
        graphs = self._attach_targets(graphs, y)
        if self._task == "node_class":
            self._n_classes_ = (
                max(max(g.target) for g in graphs) + 1  # type: ignore[arg-type]
            )
        splits = self._holdout_splits(len(graphs))
        dataset = Dataset(graphs=tuple(graphs), splits=tuple(splits))
        cfg = self._model_config(graphs)
        tcfg = TrainConfig(
            epochs=self.epochs,
            warmup_epochs=self.warmup_epochs,
            lr=self.lr,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            seed=self.seed,
            clip_norm=self.clip_norm,
        )
        model = ChromaticGraphTransformer(cfg, seed=self.seed)
        self.result_ = train_model(model, dataset, structures, tcfg)
        self.model_ = model
        self.config_ = cfg
        return self

    def _holdout_splits(self, n: int) -> list[str]:
        n_val = max(1, int(round(self.val_fraction * n))) if n > 1 else 0
        order = np.random.default_rng([self.seed, 3]).permutation(n)
        splits = ["train"] * n
        for idx in order[:n_val]:
            splits[idx] = "val"
        return splits

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ConfigError("estimator is not fitted; call fit first")


class GraphTransformerRegressor(_BaseGraphEstimator, RegressorMixin):
    """Graph-level regression with mean-pooled read-out."""

    _task = "regression"

    def __init__(self, layers: int = 3, width: int = 32, heads: int = 4,
                 attention: str = "chromatic", use_edge_values: bool = True,
                 norm: str = "batch", rpe: str = "rwse", rpe_steps: int = 8,
                 rpe_dim: int = 16, node_pe_steps: int = 8, node_pe_dim: int = 16,
                 rings: bool = False, max_ring_size: int = 6,
                 ring_encoding: str = "additive", attn_dropout: str = "none",
                 attn_dropout_p: float = 0.0, epochs: int = 150,
                 warmup_epochs: int = 10, lr: float = 2e-3,
                 weight_decay: float = 1e-5, batch_size: int = 8,
                 clip_norm: float | None = 2.0, val_fraction: float = 0.1,
                 seed: int = 0):
        self.layers = layers
        self.width = width
        self.heads = heads
        self.attention = attention
        self.use_edge_values = use_edge_values
        self.norm = norm
        self.rpe = rpe
        self.rpe_steps = rpe_steps
        self.rpe_dim = rpe_dim
        self.node_pe_steps = node_pe_steps
        self.node_pe_dim = node_pe_dim
        self.rings = rings
        self.max_ring_size = max_ring_size
        self.ring_encoding = ring_encoding
        self.attn_dropout = attn_dropout
        self.attn_dropout_p = attn_dropout_p
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.val_fraction = val_fraction
        self.seed = seed

    def fit(self, X, y=None):
        return self._fit(X, y)

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        graphs, structures = self._prepare(X)
        return np.array(
            [self.model_.predict(g, s) for g, s in zip(graphs, structures)]
        )

    def mae(self, X, y=None) -> float:
        """Mean absolute error (the training metric; lower is better)."""
        self._check_fitted()
        graphs, structures = self._prepare(X)
        graphs = self._attach_targets(graphs, y)
        return metric_fn(self.model_, graphs, structures, list(range(len(graphs))))


class GraphTransformerNodeClassifier(_BaseGraphEstimator):
    """Per-node classification with a linear head; predict returns one
    label array per input graph."""

    _task = "node_class"

    def __init__(self, layers: int = 3, width: int = 32, heads: int = 4,
                 attention: str = "chromatic", use_edge_values: bool = True,
                 norm: str = "batch", rpe: str = "rwse", rpe_steps: int = 8,
                 rpe_dim: int = 16, node_pe_steps: int = 8, node_pe_dim: int = 16,
                 rings: bool = False, max_ring_size: int = 6,
                 ring_encoding: str = "additive", attn_dropout: str = "none",
                 attn_dropout_p: float = 0.0, epochs: int = 150,
                 warmup_epochs: int = 10, lr: float = 2e-3,
                 weight_decay: float = 1e-5, batch_size: int = 8,
                 clip_norm: float | None = 2.0, val_fraction: float = 0.1,
                 seed: int = 0):
        self.layers = layers
        self.width = width
        self.heads = heads
        self.attention = attention
        self.use_edge_values = use_edge_values
        self.norm = norm
        self.rpe = rpe
        self.rpe_steps = rpe_steps
        self.rpe_dim = rpe_dim
        self.node_pe_steps = node_pe_steps
        self.node_pe_dim = node_pe_dim
        self.rings = rings
        self.max_ring_size = max_ring_size
        self.ring_encoding = ring_encoding
        self.attn_dropout = attn_dropout
        self.attn_dropout_p = attn_dropout_p
        self.epochs = epochs
        self.warmup_epochs = warmup_epochs
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.clip_norm = clip_norm
        self.val_fraction = val_fraction
        self.seed = seed

    def fit(self, X, y=None):
        return self._fit(X, y)

    def predict(self, X) -> list[np.ndarray]:
        self._check_fitted()
        graphs, structures = self._prepare(X)
        return [self.model_.predict(g, s) for g, s in zip(graphs, structures)]

    def score(self, X, y=None) -> float:
        """Mean per-node accuracy over all nodes of all graphs."""
        self._check_fitted()
        graphs, structures = self._prepare(X)
        graphs = self._attach_targets(graphs, y)
        error = metric_fn(self.model_, graphs, structures, list(range(len(graphs))))
        return 1.0 - error
