"""The full graph transformer: node encoder, stacked attention layers,
task heads and losses.

Every graph is processed individually (no cross-graph padding); mini-batches
are gradient accumulation over graphs. Forward passes never mutate
parameters, so concurrent read-only forwards are safe.
"""

from __future__ import annotations

import numpy as np

from .attention import AttentionLayer, EdgeEncoder, embedding_init, glorot
from .autodiff import (
    ParameterStore,
    Tensor,
    concat,
    gather_rows,
    load_checkpoint,
    mean_pool,
    save_checkpoint,
)
from .config import ModelConfig
from .errors import ConfigError, EncodingError
from .graphs import Graph
from .structure import GraphStructure


class ChromaticGraphTransformer:
    """Stack of channel-filtered attention layers over dense node pairs."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.store = ParameterStore()
        self.buffers: dict[str, np.ndarray] = {}
        rng = np.random.default_rng([seed, 0xC47])

        d = cfg.width
        self.node_tables = [
            self.store.add(f"nodes.field{i}.embed", embedding_init(rng, vocab, d))
            for i, vocab in enumerate(cfg.node_vocab_sizes)
        ]
        in_width = d
        self.w_pe = None
        if cfg.node_pe_steps > 0:
            self.w_pe = self.store.add(
                "nodes.w_pe", glorot(rng, cfg.node_pe_steps, cfg.node_pe_dim)
            )
            in_width = d + cfg.node_pe_dim
        self.w_in = self.store.add("nodes.w_in", glorot(rng, in_width, d))

        self.edge_encoder = EdgeEncoder(self.store, cfg, rng)
        base_width = self.edge_encoder.base_width
        self.w_e = None
        self.w_ev = None
        if cfg.share_edge_params and cfg.layers > 0:
            self.w_e = self.store.add("edges.w_e", glorot(rng, base_width, d))
            self.w_ev = self.store.add("edges.w_ev", glorot(rng, base_width, d))
        self.layers = [
            AttentionLayer(
                self.store,
                self.buffers,
                f"layer{i}",
                cfg,
                base_width,
                rng,
                owns_projections=not cfg.share_edge_params,
            )
            for i in range(cfg.layers)
        ]

        if cfg.task == "regression":
            self.head_w1 = self.store.add("head.w1", glorot(rng, d, d))
            self.head_b1 = self.store.add("head.b1", np.zeros(d))
            self.head_w2 = self.store.add("head.w2", glorot(rng, d, 1))
            self.head_b2 = self.store.add("head.b2", np.zeros(1))
        else:
            self.head_w = self.store.add("head.w", glorot(rng, d, cfg.num_classes))
            self.head_b = self.store.add("head.b", np.zeros(cfg.num_classes))

    # -- encoders ----------------------------------------------------------

    def node_states(self, g: Graph, structure: GraphStructure | None) -> Tensor:
        """Initial states: summed categorical embeddings, concatenated with a
        projection of the node return-probability features, mapped to width."""
        cfg = self.cfg
        if len(g.node_feats[0]) != len(self.node_tables):
            raise EncodingError(
                f"graph has {len(g.node_feats[0])} node feature fields, "
                f"model expects {len(self.node_tables)}"
            )
        feats = np.asarray(g.node_feats, dtype=np.int64)
        h = None
        for i, table in enumerate(self.node_tables):
            if feats[:, i].max() >= table.shape[0]:
                raise EncodingError(
                    f"node feature field {i}: id {int(feats[:, i].max())} outside "
                    f"vocabulary of {table.shape[0]}"
                )
            emb = gather_rows(table, feats[:, i])
            h = emb if h is None else h + emb
        if self.w_pe is not None:
            if structure is None:
                raise ConfigError(
                    "model wants node positional encodings but no structure was given"
                )
            pe = Tensor(structure.node_pe(cfg.node_pe_steps)) @ self.w_pe
            h = concat([h, pe], axis=-1)
        return h @ self.w_in

    def edge_tensors(self, g: Graph, structure: GraphStructure | None):
        """Shared-projection pair tensors, or the raw base for per-layer
        projection when sharing is off. Returns (base, att, val)."""
        base = self.edge_encoder.base(g, structure)
        if self.cfg.share_edge_params:
            return base, base @ self.w_e, base @ self.w_ev
        return base, None, None

    # -- forward -------------------------------------------------------------

    def forward(self, g: Graph, structure: GraphStructure | None = None,
                train: bool = False, rng: np.random.Generator | None = None,
                capture_layer: int | None = None, capture: dict | None = None,
                update_stats: bool = True) -> Tensor:
        h = self.node_states(g, structure)
        if self.layers:
            base, att, val = self.edge_tensors(g, structure)
            for i, layer in enumerate(self.layers):
                if not self.cfg.share_edge_params:
                    att, val = layer.project_edges(base)
                layer_capture = capture if capture_layer == i else None
                h = layer.forward(h, att, val, train=train, rng=rng,
                                  capture=layer_capture, update_stats=update_stats)
        return self._head(h)

    def _head(self, h: Tensor) -> Tensor:
        if self.cfg.task == "regression":
            pooled = mean_pool(h, axis=0).reshape(1, -1)
            hidden = (pooled @ self.head_w1 + self.head_b1).relu()
            return (hidden @ self.head_w2 + self.head_b2).reshape(())
        return h @ self.head_w + self.head_b

    def predict(self, g: Graph, structure: GraphStructure | None = None):
        """Eval-mode prediction: float for regression, labels for nodes."""
        out = self.forward(g, structure, train=False)
        if self.cfg.task == "regression":
            return float(out.data)
        return out.data.argmax(axis=1)

    # -- persistence -----------------------------------------------------------

    def save(self, path) -> None:
        save_checkpoint(path, self.store, buffers=self.buffers,
                        config=self.cfg.to_dict())

    @classmethod
    def load(cls, path) -> "ChromaticGraphTransformer":
        payload = load_checkpoint(path)
        if "config" not in payload:
            raise ConfigError("checkpoint carries no model config")
        model = cls(ModelConfig.from_dict(payload["config"]))
        model.store.load_state(payload["params"])
        for name, value in payload.get("buffers", {}).items():
            if name not in model.buffers:
                raise ConfigError(f"checkpoint buffer {name!r} unknown to the model")
            model.buffers[name] = value.reshape(model.buffers[name].shape)
        return model


# -- losses and metrics ----------------------------------------------------------


def loss_fn(prediction: Tensor, target, task: str) -> Tensor:
    """Mean absolute error for graph regression, mean cross-entropy over
    nodes for node classification."""
    if task == "regression":
        diff = prediction - Tensor(np.asarray(target, dtype=np.float64))
        return diff.abs().mean() if diff.size > 1 else diff.abs().reshape(())
    if task == "node_class":
        labels = np.asarray(target, dtype=np.int64)
        n, k = prediction.shape
        if labels.shape[0] != n:
            raise ConfigError(f"{labels.shape[0]} labels for {n} nodes")
        shifted = prediction - Tensor(prediction.data.max(axis=1, keepdims=True))
        log_norm = shifted.exp().sum(axis=1, keepdims=True).log()
        onehot = np.zeros((n, k))
        onehot[np.arange(n), labels] = 1.0
        picked = (shifted * Tensor(onehot)).sum(axis=1, keepdims=True)
        return (log_norm - picked).mean()
    raise ConfigError(f"unknown task {task!r}")


def metric_fn(model: ChromaticGraphTransformer, graphs, structures,
              indices) -> float:
    """Validation metric: MAE (lower is better) for regression, node error
    rate (1 - accuracy, lower is better) for classification."""
    if not indices:
        return float("nan")
    if model.cfg.task == "regression":
        errs = [
            abs(model.predict(graphs[i], structures[i]) - float(graphs[i].target))
            for i in indices
        ]
        return float(np.mean(errs))
    correct = 0
    total = 0
    for i in indices:
        pred = model.predict(graphs[i], structures[i])
        labels = np.asarray(graphs[i].target, dtype=np.int64)
        correct += int((pred == labels).sum())
        total += labels.shape[0]
    return 1.0 - correct / total
