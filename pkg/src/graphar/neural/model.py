"""The neural graph-autoregressive (NGAR) predictor.

Three blocks trained end to end: a two-layer graph convolution with gated
global pooling turns each graph of the input window into an embedding
vector (shared weights across the window); a two-layer LSTM consumes the
embedding sequence; a two-layer dense trunk with parallel sigmoid and
linear heads decodes the final hidden state into adjacency probabilities
and node features.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..baselines import binarize_adjacency
from ..errors import DatasetFormatError, NumericalError
from ..graphs import AttributedGraph
from .layers import (
    dense_backward,
    dense_forward,
    gated_pool_backward,
    gated_pool_forward,
    gcn_backward,
    gcn_forward,
    lstm_seq_backward,
    lstm_seq_forward,
    normalize_adjacency,
    sigmoid,
    tune_allocator,
)

PROB_CLIP = 1e-7

# weights carrying the L2 penalty: conv and dense trunk, never biases or LSTM
REGULARIZED = ("conv1_W", "conv2_W", "dense1_W", "dense2_W")


@dataclass(frozen=True)
class NgarConfig:
    """Architecture and training hyperparameters."""

    window: int = 20
    conv_channels: int = 128
    pool_channels: int = 128
    rnn_units: int = 256
    dense_units: tuple = (256, 512)
    l2_weight: float = 0.0005
    learning_rate: float = 0.001
    batch_size: int = 256
    patience: int = 20
    max_epochs: int = 200
    adjacency_threshold: float = 0.5
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        sizes = (
            self.conv_channels,
            self.pool_channels,
            self.rnn_units,
            *self.dense_units,
            self.batch_size,
            self.patience,
            self.max_epochs,
        )
        if any(int(s) <= 0 for s in sizes):
            raise ValueError("all layer sizes and loop bounds must be positive")
        if len(self.dense_units) != 2:
            raise ValueError("dense_units must hold exactly two layer sizes")
        if self.l2_weight < 0 or self.learning_rate <= 0:
            raise ValueError("l2_weight must be >= 0 and learning_rate > 0")
        if np.dtype(self.dtype) not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ValueError("dtype must be float32 or float64")
        object.__setattr__(self, "dense_units", tuple(int(u) for u in self.dense_units))


def _glorot(rng, shape, dtype):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _lstm_init(rng, dim_in, hidden, dtype):
    from ..generators import random_orthogonal

    w = np.concatenate([_glorot(rng, (dim_in, hidden), dtype) for _ in range(4)], axis=1)
    u = np.concatenate(
        [random_orthogonal(hidden, rng).astype(dtype) for _ in range(4)], axis=1
    )
    b = np.zeros(4 * hidden, dtype=dtype)
    b[hidden : 2 * hidden] = 1.0  # forget-gate bias
    return w, u, b


class NgarModel:
    """Parameter container plus optimizer state for the NGAR network."""

    def __init__(self, n_nodes, feature_dim, config, params, opt_m, opt_v, step=0):
        self.n_nodes = n_nodes
        self.feature_dim = feature_dim
        self.config = config
        self.params = params
        self.opt_m = opt_m
        self.opt_v = opt_v
        self.step = step

    @classmethod
    def initialize(
        cls, n_nodes: int, feature_dim: int, config: NgarConfig = NgarConfig()
    ) -> "NgarModel":
        """Glorot-uniform weights (orthogonal LSTM recurrences, unit forget
        bias), deterministic in config.seed."""
        rng = np.random.default_rng([config.seed, 0])
        dtype = np.dtype(config.dtype)
        c, p, h = config.conv_channels, config.pool_channels, config.rnn_units
        d1, d2 = config.dense_units
        params = {}
        params["conv1_W"] = _glorot(rng, (feature_dim, c), dtype)
        params["conv1_b"] = np.zeros(c, dtype=dtype)
        params["conv2_W"] = _glorot(rng, (c, c), dtype)
        params["conv2_b"] = np.zeros(c, dtype=dtype)
        params["pool_gate_W"] = _glorot(rng, (c, p), dtype)
        params["pool_gate_b"] = np.zeros(p, dtype=dtype)
        params["pool_proj_W"] = _glorot(rng, (c, p), dtype)
        params["pool_proj_b"] = np.zeros(p, dtype=dtype)
        for name, dim_in in (("lstm1", p), ("lstm2", h)):
            w, u, b = _lstm_init(rng, dim_in, h, dtype)
            params[f"{name}_W"] = w
            params[f"{name}_U"] = u
            params[f"{name}_b"] = b
        params["dense1_W"] = _glorot(rng, (h, d1), dtype)
        params["dense1_b"] = np.zeros(d1, dtype=dtype)
        params["dense2_W"] = _glorot(rng, (d1, d2), dtype)
        params["dense2_b"] = np.zeros(d2, dtype=dtype)
        params["head_adj_W"] = _glorot(rng, (d2, n_nodes * n_nodes), dtype)
        params["head_adj_b"] = np.zeros(n_nodes * n_nodes, dtype=dtype)
        params["head_feat_W"] = _glorot(rng, (d2, n_nodes * feature_dim), dtype)
        params["head_feat_b"] = np.zeros(n_nodes * feature_dim, dtype=dtype)
        opt_m = {k: np.zeros_like(v) for k, v in params.items()}
        opt_v = {k: np.zeros_like(v) for k, v in params.items()}
        return cls(n_nodes, feature_dim, config, params, opt_m, opt_v)

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(self.config.dtype)

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}

    def l2_penalty(self) -> float:
        return float(sum((self.params[k].astype(np.float64) ** 2).sum() for k in REGULARIZED))


def decode_heads(h, params, n_nodes, feature_dim):
    """Dense trunk plus parallel heads: sigmoid adjacency probabilities and
    linear node features, reshaped row-major."""
    h = np.asarray(h)
    single = h.ndim == 1
    if single:
        h = h[None]
    d1, _ = dense_forward(h, params["dense1_W"], params["dense1_b"])
    d2, _ = dense_forward(d1, params["dense2_W"], params["dense2_b"])
    a_prob = sigmoid(d2 @ params["head_adj_W"] + params["head_adj_b"])
    x_hat = d2 @ params["head_feat_W"] + params["head_feat_b"]
    a_prob = a_prob.reshape(-1, n_nodes, n_nodes)
    x_hat = x_hat.reshape(-1, n_nodes, feature_dim)
    if single:
        return a_prob[0], x_hat[0]
    return a_prob, x_hat


def forward_batch(model: NgarModel, x_win: np.ndarray, a_norm_win: np.ndarray):
    """Full forward pass on a batch of windows, time-major.

    x_win: (k, B, N, F) features; a_norm_win: (k, B, N, N) normalized
    adjacencies. Returns (a_prob (B, N, N), x_hat (B, N, F), cache).
    """
    tune_allocator()
    p = model.params
    k, batch, n, f = x_win.shape
    flat_x = x_win.reshape(k * batch, n, f)
    flat_a = a_norm_win.reshape(k * batch, n, n)
    h1, c_gcn1 = gcn_forward(flat_x, flat_a, p["conv1_W"], p["conv1_b"])
    h2, c_gcn2 = gcn_forward(h1, flat_a, p["conv2_W"], p["conv2_b"])
    emb, c_pool = gated_pool_forward(
        h2, p["pool_gate_W"], p["pool_gate_b"], p["pool_proj_W"], p["pool_proj_b"]
    )
    emb_seq = emb.reshape(k, batch, -1)
    hs1, c_lstm1 = lstm_seq_forward(emb_seq, p["lstm1_W"], p["lstm1_U"], p["lstm1_b"])
    hs2, c_lstm2 = lstm_seq_forward(hs1, p["lstm2_W"], p["lstm2_U"], p["lstm2_b"])
    h_final = hs2[-1]
    d1, c_d1 = dense_forward(h_final, p["dense1_W"], p["dense1_b"])
    d2, c_d2 = dense_forward(d1, p["dense2_W"], p["dense2_b"])
    adj_lin = d2 @ p["head_adj_W"] + p["head_adj_b"]
    a_prob = sigmoid(adj_lin).reshape(batch, n, n)
    x_hat = (d2 @ p["head_feat_W"] + p["head_feat_b"]).reshape(batch, n, f)
    cache = (c_gcn1, c_gcn2, c_pool, c_lstm1, c_lstm2, c_d1, c_d2, d2, (k, batch, n, f))
    return a_prob, x_hat, cache


def loss_terms(a_prob, x_hat, a_target, x_target):
    """(feature MSE, adjacency log-loss), each a mean over all entries."""
    mse = float(np.mean((np.asarray(x_hat, dtype=np.float64) - x_target) ** 2))
    prob = np.clip(np.asarray(a_prob, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    bce = float(
        -np.mean(a_target * np.log(prob) + (1.0 - a_target) * np.log1p(-prob))
    )
    return mse, bce


def _check_grads(name, *arrays):
    for a in arrays:
        if not np.isfinite(a).all():
            raise NumericalError(f"non-finite gradient in {name}")


def backward_batch(model: NgarModel, cache, a_prob, x_hat, a_target, x_target):
    """Gradients of the batch-mean loss (data terms plus L2) with respect
    to every parameter. Gradient reduction over the batch is a fixed-order
    sum, so results are deterministic."""
    p = model.params
    c_gcn1, c_gcn2, c_pool, c_lstm1, c_lstm2, c_d1, c_d2, d2, dims = cache
    k, batch, n, f = dims
    dtype = x_hat.dtype

    d_xhat = (2.0 / (batch * n * f)) * (x_hat - x_target)
    interior = (a_prob > PROB_CLIP) & (a_prob < 1.0 - PROB_CLIP)
    # exact gradient of the clipped log-loss through the sigmoid
    d_adj_lin = (a_prob - a_target) * interior / np.asarray(batch * n * n, dtype=dtype)

    grads = {}
    d_adj_flat = d_adj_lin.reshape(batch, n * n)
    d_feat_flat = d_xhat.reshape(batch, n * f)
    grads["head_adj_W"] = d2.T @ d_adj_flat
    grads["head_adj_b"] = d_adj_flat.sum(axis=0)
    grads["head_feat_W"] = d2.T @ d_feat_flat
    grads["head_feat_b"] = d_feat_flat.sum(axis=0)
    _check_grads("heads", grads["head_adj_W"], grads["head_feat_W"])

    d_d2 = d_adj_flat @ p["head_adj_W"].T + d_feat_flat @ p["head_feat_W"].T
    d_d1, grads["dense2_W"], grads["dense2_b"] = dense_backward(c_d2, d_d2)
    d_h, grads["dense1_W"], grads["dense1_b"] = dense_backward(c_d1, d_d1)
    _check_grads("dense", grads["dense1_W"], grads["dense2_W"])

    hidden = d_h.shape[-1]
    d_hs2 = np.zeros((k, batch, hidden), dtype=dtype)
    d_hs2[-1] = d_h
    d_hs1, grads["lstm2_W"], grads["lstm2_U"], grads["lstm2_b"] = lstm_seq_backward(
        c_lstm2, d_hs2
    )
    d_emb_seq, grads["lstm1_W"], grads["lstm1_U"], grads["lstm1_b"] = lstm_seq_backward(
        c_lstm1, d_hs1
    )
    _check_grads("lstm", grads["lstm1_W"], grads["lstm2_W"])

    d_emb = d_emb_seq.reshape(k * batch, -1)
    (
        d_h2,
        grads["pool_gate_W"],
        grads["pool_gate_b"],
        grads["pool_proj_W"],
        grads["pool_proj_b"],
    ) = gated_pool_backward(c_pool, d_emb)
    d_h1, grads["conv2_W"], grads["conv2_b"] = gcn_backward(c_gcn2, d_h2)
    _, grads["conv1_W"], grads["conv1_b"] = gcn_backward(c_gcn1, d_h1)
    _check_grads("conv", grads["conv1_W"], grads["conv2_W"])

    l2 = model.config.l2_weight
    if l2 > 0:
        two_l2 = np.asarray(2.0 * l2, dtype=dtype)
        for key in REGULARIZED:
            grads[key] = grads[key] + two_l2 * p[key]
    return grads


def _window_arrays(model: NgarModel, window):
    graphs = list(window)
    if len(graphs) != model.config.window:
        raise ValueError(
            f"window must hold exactly {model.config.window} graphs, got {len(graphs)}"
        )
    for g in graphs:
        if g.n_nodes != model.n_nodes or g.feature_dim != model.feature_dim:
            raise ValueError("window graphs do not match the model layout")
    dtype = model.dtype
    x = np.stack([g.node_features for g in graphs]).astype(dtype)
    a_norm = np.stack(
        [normalize_adjacency(g.adjacency, dtype=dtype) for g in graphs]
    )
    return x[:, None], a_norm[:, None]  # time-major, batch of one


def ngar_forward(model: NgarModel, window):
    """Predict adjacency probabilities and node features from a window of
    the last k graphs. Returns (a_prob (N, N), x_hat (N, F))."""
    x, a_norm = _window_arrays(model, window)
    a_prob, x_hat, _ = forward_batch(model, x, a_norm)
    return a_prob[0], x_hat[0]


def ngar_loss(
    a_prob,
    x_hat,
    target: AttributedGraph,
    model: NgarModel,
    l2_weight: Optional[float] = None,
) -> float:
    """Feature MSE plus adjacency log-loss (probabilities clipped at 1e-7)
    plus the L2 penalty on conv and dense-trunk weights."""
    if l2_weight is None:
        l2_weight = model.config.l2_weight
    a_target = np.asarray(target.adjacency, dtype=np.float64)
    x_target = np.asarray(target.node_features, dtype=np.float64)
    if np.asarray(a_prob).shape != a_target.shape or np.asarray(x_hat).shape != x_target.shape:
        raise ValueError("prediction shapes do not match the target graph")
    mse, bce = loss_terms(a_prob, x_hat, a_target, x_target)
    return mse + bce + l2_weight * model.l2_penalty()


def ngar_backward(model: NgarModel, window, target: AttributedGraph) -> dict:
    """Exact gradients of ngar_loss for one (window, target) sample."""
    x, a_norm = _window_arrays(model, window)
    a_prob, x_hat, cache = forward_batch(model, x, a_norm)
    dtype = model.dtype
    a_target = target.adjacency.astype(dtype)[None]
    x_target = target.node_features.astype(dtype)[None]
    return backward_batch(model, cache, a_prob, x_hat, a_target, x_target)


def ngar_predict(model: NgarModel, window) -> AttributedGraph:
    """Forward pass plus decoding into a valid graph: adjacency thresholded
    at config.adjacency_threshold with pair-mean symmetrization and zero
    diagonal."""
    a_prob, x_hat = ngar_forward(model, window)
    adjacency = binarize_adjacency(
        np.asarray(a_prob, dtype=np.float64),
        directed=False,
        threshold=model.config.adjacency_threshold,
    )
    return AttributedGraph(np.asarray(x_hat, dtype=np.float64), adjacency)


def save_model(model: NgarModel, path) -> None:
    """Checkpoint parameters, Adam moments, step counter and config to an
    .npz container; load_model restores them bit-exactly."""
    meta = {
        "format": "graphar-ngar",
        "n_nodes": model.n_nodes,
        "feature_dim": model.feature_dim,
        "step": model.step,
        "config": asdict(model.config),
    }
    arrays = {f"p_{k}": v for k, v in model.params.items()}
    arrays.update({f"m_{k}": v for k, v in model.opt_m.items()})
    arrays.update({f"v_{k}": v for k, v in model.opt_v.items()})
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_model(path) -> NgarModel:
    path = Path(path)
    with np.load(path) as data:
        try:
            meta = json.loads(bytes(data["meta"]).decode())
        except (KeyError, json.JSONDecodeError) as exc:
            raise DatasetFormatError(f"bad checkpoint metadata: {exc}") from exc
        if meta.get("format") != "graphar-ngar":
            raise DatasetFormatError("not a graphar-ngar checkpoint")
        cfg_dict = meta["config"]
        cfg_dict["dense_units"] = tuple(cfg_dict["dense_units"])
        config = NgarConfig(**cfg_dict)
        params, opt_m, opt_v = {}, {}, {}
        for key in data.files:
            if key.startswith("p_"):
                params[key[2:]] = data[key]
            elif key.startswith("m_"):
                opt_m[key[2:]] = data[key]
            elif key.startswith("v_"):
                opt_v[key[2:]] = data[key]
    return NgarModel(
        meta["n_nodes"],
        meta["feature_dim"],
        config,
        params,
        opt_m,
        opt_v,
        step=int(meta["step"]),
    )
