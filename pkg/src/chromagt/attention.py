"""Channel-wise ("chromatic") self-attention over dense node pairs.

Instead of one scalar score per node pair (and head), every output channel
gets its own score: the pair bias is a full d-vector, so the exponentiated
logits form an attention *filter* a(i, j) in R^d that modulates incoming
messages channel by channel. Filters are l1-normalized over senders per
channel, and messages optionally carry a learned per-pair value vector on
top of the sender's value.

Three variants share one code path:
  chromatic  - per-head dot products, per-channel pair bias
  monochrome - per-head dot products, bias averaged per head (standard
               biased multi-head attention)
  additive   - elementwise q_i + k_j + bias, no head structure at all

Internally filters are kept as (N, N, H, C) blocks: (heads, d/heads) for
chromatic, (heads, 1) for monochrome, (1, d) for additive. Broadcasting
against values reshaped to (1, N, heads, d/heads) makes the variants
interchangeable downstream.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import ParameterStore, Tensor, apply_mask, detached_max, gather_rows
from .config import ModelConfig
from .errors import ConfigError, EncodingError, NumericalError
from .graphs import Graph
from .rings import ring_comembership, ring_edge_encoding
from .structure import GraphStructure


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def embedding_init(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    return rng.normal(0.0, 0.02, size=(rows, dim))


# -- normalization layers -----------------------------------------------------


class BatchNorm:
    """Feature-wise standardization of node rows.

    Forwards are per-graph, so the normalizing statistics are the running
    buffers (momentum 0.1) accumulated over all node rows seen during
    training, not the current graph's own moments: normalizing a graph by
    its own statistics would pin the per-feature mean to zero and make a
    mean-pooled read-out blind to the graph. Training forwards fold the
    current rows into the buffers unless update_stats is off (gradient
    checks need the statistics fixed); eval never updates.
    """

    def __init__(self, store: ParameterStore, buffers: dict, name: str, dim: int,
                 momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = store.add(f"{name}.gamma", np.ones(dim))
        self.beta = store.add(f"{name}.beta", np.zeros(dim))
        self.eps = eps
        self.momentum = momentum
        self._buffers = buffers
        self._mean_key = f"{name}.running_mean"
        self._var_key = f"{name}.running_var"
        buffers[self._mean_key] = np.zeros(dim)
        buffers[self._var_key] = np.ones(dim)

    def __call__(self, x: Tensor, train: bool, update_stats: bool = True) -> Tensor:
        mu = Tensor(self._buffers[self._mean_key])
        var = Tensor(self._buffers[self._var_key])
        if train and update_stats:
            batch_mu = x.data.mean(axis=0)
            batch_var = x.data.var(axis=0)
            m = self.momentum
            self._buffers[self._mean_key] *= 1.0 - m
            self._buffers[self._mean_key] += m * batch_mu
            self._buffers[self._var_key] *= 1.0 - m
            self._buffers[self._var_key] += m * batch_var
        xhat = (x - mu) / ((var + self.eps) ** 0.5)
        return xhat * self.gamma + self.beta


class LayerNorm:
    """Per-row standardization; fallback for batch-size-1 debugging."""

    def __init__(self, store: ParameterStore, buffers: dict, name: str, dim: int,
                 eps: float = 1e-5):
        self.gamma = store.add(f"{name}.gamma", np.ones(dim))
        self.beta = store.add(f"{name}.beta", np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor, train: bool, update_stats: bool = True) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
        xhat = (x - mu) / ((var + self.eps) ** 0.5)
        return xhat * self.gamma + self.beta


def make_norm(kind: str, store, buffers, name, dim):
    return (BatchNorm if kind == "batch" else LayerNorm)(store, buffers, name, dim)


# -- pairwise positional encodings ---------------------------------------------


def rwse_pair_encoding(pair_probs: np.ndarray, weights: Tensor,
                       nonneg: bool = False) -> Tensor:
    """Linear map of the transition-probability vector of every pair.

    pair_probs: (N, N, p) constant stack, weights: (d, p) learnable. With
    nonneg the stored weights are squared first, which keeps the encoding a
    re-weighted diffusion kernel. The output is generally asymmetric in
    (i, j) because the walk matrix is row-stochastic, not symmetric.
    """
    w = weights * weights if nonneg else weights
    return Tensor(pair_probs) @ w.transpose((1, 0))


def spd_embedding_tensor(spd: np.ndarray, cap: int, table: Tensor) -> Tensor:
    """Embed the shortest-path distance of every pair.

    Table layout (cap + 2 rows): rows 0..cap-1 hold distances 1..cap, row
    cap is for pairs unreachable within cap hops, row cap + 1 for the
    self-connection on the diagonal. Distance 0 never occurs off-diagonal.
    """
    if table.shape[0] != cap + 2:
        raise ConfigError(
            f"distance table needs {cap + 2} rows for cap {cap}, has {table.shape[0]}"
        )
    within = (spd >= 1) & (spd <= cap)
    idx = np.where(spd == 0, cap + 1, np.where(within, spd - 1, cap))
    return gather_rows(table, idx)


# -- edge feature encoder --------------------------------------------------------


def completed_bond_ids(g: Graph, num_bond_types: int) -> np.ndarray:
    """N x N categorical matrix: stored bond types on edges, one extra
    category for the diagonal and another for non-connected pairs."""
    n = g.num_nodes
    ids = np.full((n, n), num_bond_types + 1, dtype=np.int64)
    for u, v, bond in g.edges:
        if bond >= num_bond_types:
            raise EncodingError(
                f"bond type {bond} outside vocabulary of {num_bond_types}"
            )
        ids[u, v] = bond
        ids[v, u] = bond
    np.fill_diagonal(ids, num_bond_types)
    return ids


class EdgeEncoder:
    """Builds the raw pair feature tensor consumed by every layer.

    Bond categories (completed with self / non-connected slots and, when
    ring features are on, combined with the ring co-membership bit) are
    embedded and concatenated with the pairwise positional encoding. The
    projections to the attention-bias and message-value spaces live either
    here (edge parameter sharing) or in each layer.
    """

    def __init__(self, store: ParameterStore, cfg: ModelConfig,
                 rng: np.random.Generator, name: str = "edges"):
        self.cfg = cfg
        vocab = cfg.num_bond_types + 2
        if cfg.rings and cfg.ring_encoding == "categorical":
            vocab *= 2
        self.bond_table = store.add(
            f"{name}.bond_embed", embedding_init(rng, vocab, cfg.bond_dim)
        )
        self.ring_table = None
        if cfg.rings and cfg.ring_encoding == "additive":
            self.ring_table = store.add(
                f"{name}.ring_embed", embedding_init(rng, 2, cfg.bond_dim)
            )
        self.rwse_weights = None
        self.spd_table = None
        if cfg.rpe == "rwse":
            self.rwse_weights = store.add(
                f"{name}.rwse_weights",
                embedding_init(rng, cfg.rpe_dim, cfg.rpe_steps),
            )
        elif cfg.rpe == "spde":
            self.spd_table = store.add(
                f"{name}.spd_embed",
                embedding_init(rng, cfg.rpe_steps + 2, cfg.rpe_dim),
            )

    @property
    def base_width(self) -> int:
        rpe_dim = self.cfg.rpe_dim if self.cfg.rpe != "none" else 0
        return self.cfg.bond_dim + rpe_dim

    def pair_ids(self, g: Graph, structure: GraphStructure | None) -> np.ndarray:
        cfg = self.cfg
        ids = completed_bond_ids(g, cfg.num_bond_types)
        if cfg.rings and cfg.ring_encoding == "categorical":
            ids = ring_edge_encoding(ids, self._bound_matrix(g, structure),
                                     "categorical")
        return ids

    def _bound_matrix(self, g: Graph, structure: GraphStructure | None) -> np.ndarray:
        if structure is None or structure.rings is None:
            raise ConfigError(
                "ring features are enabled but the precomputed structure "
                "carries no rings"
            )
        return ring_comembership(
            structure.rings, g.num_nodes, include_self=self.cfg.ring_self_membership
        )

    def base(self, g: Graph, structure: GraphStructure | None) -> Tensor:
        """Raw per-pair features: bond embedding (+ ring bit) || positional."""
        cfg = self.cfg
        bond = gather_rows(self.bond_table, self.pair_ids(g, structure))
        if self.ring_table is not None:
            bits = ring_edge_encoding(
                None, self._bound_matrix(g, structure), "additive"
            )
            bond = bond + gather_rows(self.ring_table, bits)
        if cfg.rpe == "none":
            return bond
        if structure is None:
            raise ConfigError(
                f"model wants {cfg.rpe} pair encodings but no structure was given"
            )
        if cfg.rpe == "rwse":
            rpe = rwse_pair_encoding(
                structure.pair_probabilities(cfg.rpe_steps),
                self.rwse_weights,
                nonneg=cfg.nonneg_rwse,
            )
        else:
            if structure.spd_cap < cfg.rpe_steps:
                raise ConfigError(
                    f"structure caps distances at {structure.spd_cap}, "
                    f"distance encoding needs {cfg.rpe_steps}"
                )
            rpe = spd_embedding_tensor(structure.spd, cfg.rpe_steps, self.spd_table)
        from .autodiff import concat

        return concat([bond, rpe], axis=-1)


# -- attention filters ------------------------------------------------------------


def filter_block_shape(cfg: ModelConfig) -> tuple[int, int]:
    """(heads, channels-per-head) layout of the value blocks."""
    if cfg.attention == "additive":
        return 1, cfg.width
    return cfg.heads, cfg.width // cfg.heads


def attention_filters(q: Tensor, k: Tensor, edge_att: Tensor, cfg: ModelConfig,
                      stabilize: bool = True,
                      pair_mask: np.ndarray | None = None) -> Tensor:
    """Exponentiated per-channel attention logits, shape (N, N, H, C).

    Chromatic and monochrome share the per-head scaled dot product; they
    differ only in the pair bias (per channel vs averaged per head), which
    is what makes the color ablation a pure mechanism change. The additive
    variant drops the dot product entirely. With stabilize the per-(i,
    channel) max is subtracted before exponentiation; the downstream
    normalization cancels the shift exactly.

    pair_mask (0/1 over pairs, from ablation_mask) silences entries at the
    logit level: the masked ones exponentiate to exactly zero while the
    stabilizing max is taken over the survivors, so a row's surviving mass
    can never underflow even when the mask removes the dominant logit.
    """
    n, d = q.shape
    heads = cfg.heads
    dh = d // heads
    if cfg.attention == "additive":
        logits = (
            q.reshape(n, 1, 1, d) + k.reshape(1, n, 1, d) + edge_att.reshape(n, n, 1, d)
        )
    else:
        qh = q.reshape(n, heads, dh).transpose((1, 0, 2))
        kh = k.reshape(n, heads, dh).transpose((1, 2, 0))
        scores = (qh @ kh).transpose((1, 2, 0)).reshape(n, n, heads, 1)
        if cfg.scale_scores:
            scores = scores * (1.0 / math.sqrt(dh))
        bias = edge_att.reshape(n, n, heads, dh)
        if cfg.attention == "monochrome":
            bias = bias.mean(axis=3, keepdims=True)
        logits = scores + bias
    if pair_mask is not None:
        silence = np.where(pair_mask > 0.0, 0.0, -np.inf)[:, :, None, None]
        logits = logits + Tensor(silence)
    if stabilize:
        logits = logits - detached_max(logits, axis=1, keepdims=True)
    return logits.exp()


def normalize_filters(a: Tensor) -> Tensor:
    """l1-normalize over senders, independently per receiver and channel."""
    return a / a.sum(axis=1, keepdims=True)


def ablation_mask(n: int, mode: str, p: float, rng: np.random.Generator) -> np.ndarray:
    """Pair mask for node- or edge-ablation dropout.

    Node ablation silences whole senders across all receivers; edge
    ablation silences individual pairs. Receivers left with no surviving
    sender fall back to their self-connection so normalization stays
    well-defined.
    """
    if mode == "node":
        keep = rng.random(n) >= p
        mask = np.repeat(keep[None, :], n, axis=0).astype(np.float64)
    elif mode == "edge":
        mask = (rng.random((n, n)) >= p).astype(np.float64)
    else:
        raise ConfigError(f"unknown ablation mode {mode!r}")
    dead = mask.sum(axis=1) == 0.0
    if dead.any():
        idx = np.where(dead)[0]
        mask[idx, idx] = 1.0
    return mask


def channel_dropout_mask(channels: int, heads: int, p: float,
                         rng: np.random.Generator) -> np.ndarray:
    """Per-channel 0/(1-p)^-1 mask, shaped to broadcast over filters."""
    keep = (rng.random(channels) >= p).astype(np.float64)
    return (keep / (1.0 - p)).reshape(1, 1, heads, channels // heads)


def attention_dropout(filters: Tensor, mode: str, p: float,
                      rng: np.random.Generator, channels: int | None = None) -> Tensor:
    """Dropout acting directly on the attention tensor.

    Ablation modes (node / edge) must be applied to the raw filters before
    normalization, so the surviving mass renormalizes; feature dropout is
    applied after normalization with inverse-keep rescaling, preserving
    channel means in expectation.
    """
    if mode == "none" or p <= 0.0:
        return filters
    n, _, heads, block = filters.shape
    if mode in ("node", "edge"):
        mask = ablation_mask(n, mode, p, rng)
        return apply_mask(filters, mask[:, :, None, None])
    if mode == "feature":
        channels = channels if channels is not None else heads * block
        return apply_mask(filters, channel_dropout_mask(channels, heads, p, rng))
    raise ConfigError(f"unknown attention dropout mode {mode!r}")


def filtered_update(h: Tensor, filters: Tensor, values: Tensor,
                    edge_values: Tensor | None, cfg: ModelConfig) -> Tensor:
    """Residual update: h_i + sum_j filter(i,j) * (V_j + value-bias(i,j)).

    Dropping the edge-value term recovers the plain filtered value sum.
    """
    n, d = h.shape
    heads, block = filter_block_shape(cfg)
    v4 = values.reshape(1, n, heads, block)
    msg = v4 if edge_values is None else v4 + edge_values.reshape(n, n, heads, block)
    mixed = (filters * msg).sum(axis=1)
    return h + mixed.reshape(n, d)


# -- full layer --------------------------------------------------------------------


class AttentionLayer:
    """One transformer block: filtered attention, then a two-layer
    feed-forward, each with a residual connection and normalization."""

    def __init__(self, store: ParameterStore, buffers: dict, name: str,
                 cfg: ModelConfig, base_width: int, rng: np.random.Generator,
                 owns_projections: bool):
        d = cfg.width
        self.cfg = cfg
        self.name = name
        self.w_q = store.add(f"{name}.w_q", glorot(rng, d, d))
        self.w_k = store.add(f"{name}.w_k", glorot(rng, d, d))
        self.w_v = store.add(f"{name}.w_v", glorot(rng, d, d))
        self.w_e = None
        self.w_ev = None
        if owns_projections:
            self.w_e = store.add(f"{name}.w_e", glorot(rng, base_width, d))
            self.w_ev = store.add(f"{name}.w_ev", glorot(rng, base_width, d))
        hidden = 2 * d
        self.ffn_w1 = store.add(f"{name}.ffn_w1", glorot(rng, d, hidden))
        self.ffn_b1 = store.add(f"{name}.ffn_b1", np.zeros(hidden))
        self.ffn_w2 = store.add(f"{name}.ffn_w2", glorot(rng, hidden, d))
        self.ffn_b2 = store.add(f"{name}.ffn_b2", np.zeros(d))
        self.norm1 = make_norm(cfg.norm, store, buffers, f"{name}.norm1", d)
        self.norm2 = make_norm(cfg.norm, store, buffers, f"{name}.norm2", d)

    def project_edges(self, base: Tensor) -> tuple[Tensor, Tensor]:
        """Per-layer projections when edge parameters are not shared."""
        return base @ self.w_e, base @ self.w_ev

    def forward(self, h: Tensor, edge_att: Tensor, edge_val: Tensor,
                train: bool = False, rng: np.random.Generator | None = None,
                capture: dict | None = None, update_stats: bool = True) -> Tensor:
        cfg = self.cfg
        if train and cfg.attn_dropout != "none" and cfg.attn_dropout_p > 0 and rng is None:
            raise ConfigError("attention dropout in training mode needs an rng")
        q = h @ self.w_q
        k = h @ self.w_k
        v = h @ self.w_v

        pair_mask = None
        if train and cfg.attn_dropout in ("node", "edge") and cfg.attn_dropout_p > 0:
            pair_mask = ablation_mask(h.shape[0], cfg.attn_dropout,
                                      cfg.attn_dropout_p, rng)
        raw = attention_filters(q, k, edge_att, cfg, pair_mask=pair_mask)
        filters = normalize_filters(raw)
        if capture is not None:
            capture["filters"] = self._full_filters(filters)
        if train and cfg.attn_dropout == "feature" and cfg.attn_dropout_p > 0:
            filters = attention_dropout(
                filters, "feature", cfg.attn_dropout_p, rng, channels=cfg.width
            )

        updated = filtered_update(
            h, filters, v, edge_val if cfg.use_edge_values else None, cfg
        )
        self._check_finite(updated, "attention")
        x = self.norm1(updated, train, update_stats)

        hidden = (x @ self.ffn_w1 + self.ffn_b1).relu()
        if train and cfg.dropout > 0:
            keep = (rng.random(hidden.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            hidden = apply_mask(hidden, keep)
        out = self.norm2(x + (hidden @ self.ffn_w2 + self.ffn_b2), train, update_stats)
        self._check_finite(out, "ffn")
        return out

    def _full_filters(self, filters: Tensor) -> np.ndarray:
        """Normalized filters expanded to (N, N, width) for export."""
        n = filters.shape[0]
        heads, block = filter_block_shape(self.cfg)
        full = np.broadcast_to(filters.data, (n, n, heads, block))
        return full.reshape(n, n, self.cfg.width).copy()

    def _check_finite(self, x: Tensor, block: str) -> None:
        if not np.isfinite(x.data).all():
            raise NumericalError(f"{self.name}: non-finite activation in {block} block")
