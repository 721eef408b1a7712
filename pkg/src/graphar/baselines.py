"""Reference predictors: stationary mean, martingale, moving mean, and a
vector autoregression on the flattened graph representation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distance import DistanceParams, frechet_mean_closed_form
from .errors import DatasetFormatError, NumericalError
from .graphs import AttributedGraph, GraphSequence


def predict_mean(train: GraphSequence) -> AttributedGraph:
    """Fréchet sample mean of the whole training sequence (optimal for a
    stationary i.i.d. process)."""
    if len(train) == 0:
        raise ValueError("predict_mean requires a nonempty sequence")
    return frechet_mean_closed_form(train.graphs, DistanceParams())


def predict_mart(window: GraphSequence) -> AttributedGraph:
    """Martingale predictor: the most recent graph, unchanged."""
    if len(window) == 0:
        raise ValueError("predict_mart requires a nonempty window")
    return window[len(window) - 1]


def predict_move(window: GraphSequence, k: int = 20) -> AttributedGraph:
    """Fréchet sample mean of the last k graphs."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(window) < k:
        raise ValueError(f"window holds {len(window)} graphs, need {k}")
    return frechet_mean_closed_form(window.graphs[-k:], DistanceParams())


def _flatten(seq: GraphSequence) -> np.ndarray:
    """Per-step vectors u_t = [vec(X_t), vec(A_t)], shape (T, N*F + N^2)."""
    t = len(seq)
    feats = seq.features_array().reshape(t, -1)
    adjs = seq.adjacency_array().reshape(t, -1).astype(np.float64)
    return np.hstack([feats, adjs])


@dataclass
class VarModel:
    """Fitted vector AR model on flattened graphs.

    coefficients[i-1] is the lag-i matrix B_i in
    u_hat_{t+1} = intercept + sum_i B_i u_{t-i+1}.
    """

    order: int
    intercept: np.ndarray  # (D,)
    coefficients: np.ndarray  # (k, D, D)
    ridge: float
    n_nodes: int
    feature_dim: int
    directed: bool = False

    @property
    def dim(self) -> int:
        return self.n_nodes * self.feature_dim + self.n_nodes**2


def var_fit(train: GraphSequence, k: int = 20, ridge: float = 1e-6) -> VarModel:
    """Ridge least-squares fit of an order-k vector AR model.

    Minimizes sum_t ||u_{t+1} - B_0 - sum_i B_i u_{t-i+1}||^2 plus
    ridge * ||B||^2 over all parameters (intercept included). Flattened
    adjacency entries contain constant columns (the diagonal, and the
    duplicated symmetric half), so ridge = 0 generally leaves the normal
    equations singular.
    """
    if k < 1:
        raise ValueError("order k must be >= 1")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    n_steps = len(train)
    d = train.n_nodes * train.feature_dim + train.n_nodes**2
    if n_steps <= k + d:
        raise ValueError(
            f"need more than k + D = {k + d} graphs to fit, got {n_steps}"
        )
    u = _flatten(train)
    targets = u[k:]
    blocks = [np.ones((n_steps - k, 1))]
    blocks += [u[k - i : n_steps - i] for i in range(1, k + 1)]
    z = np.hstack(blocks)

    try:
        if ridge > 0:
            gram = z.T @ z + ridge * np.eye(z.shape[1])
            w = np.linalg.solve(gram, z.T @ targets)
        else:
            # plain least squares; rank-deficient designs (constant
            # adjacency columns) take the minimum-norm solution
            w, *_ = np.linalg.lstsq(z, targets, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            "least-squares system is singular; refit with ridge > 0"
        ) from exc
    if not np.isfinite(w).all():
        raise NumericalError(
            "least-squares solution is not finite; refit with ridge > 0"
        )
    intercept = w[0].copy()
    coefficients = np.stack(
        [w[1 + i * d : 1 + (i + 1) * d].T for i in range(k)]
    )
    return VarModel(
        order=k,
        intercept=intercept,
        coefficients=coefficients,
        ridge=ridge,
        n_nodes=train.n_nodes,
        feature_dim=train.feature_dim,
        directed=train.directed,
    )


def binarize_adjacency(
    raw: np.ndarray, directed: bool, threshold: float = 0.5
) -> np.ndarray:
    """Threshold a real-valued adjacency block into a valid 0/1 matrix.

    Undirected graphs threshold the mean of each symmetric pair, so ties
    at the threshold resolve to 0; the diagonal is cleared.
    """
    if not directed:
        raw = (raw + raw.T) / 2.0
    adj = (raw > threshold).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return adj


def var_predict(model: VarModel, window: GraphSequence) -> AttributedGraph:
    """One-step prediction from the last k graphs, re-assembled into a
    graph: feature block reshaped row-major, adjacency block thresholded
    at 0.5 with symmetrization."""
    if len(window) != model.order:
        raise ValueError(
            f"window must hold exactly {model.order} graphs, got {len(window)}"
        )
    if window.n_nodes != model.n_nodes or window.feature_dim != model.feature_dim:
        raise ValueError("window layout does not match the fitted model")
    u = _flatten(window)
    u_hat = model.intercept + sum(
        model.coefficients[i - 1] @ u[-i] for i in range(1, model.order + 1)
    )
    n, f = model.n_nodes, model.feature_dim
    features = u_hat[: n * f].reshape(n, f)
    raw_adj = u_hat[n * f :].reshape(n, n)
    adjacency = binarize_adjacency(raw_adj, model.directed)
    return AttributedGraph(features, adjacency, directed=model.directed)


def save_var_model(model: VarModel, path) -> None:
    """Serialize to a flat JSON container (float lists plus dims)."""
    payload = {
        "format": "graphar-var",
        "order": model.order,
        "n_nodes": model.n_nodes,
        "feature_dim": model.feature_dim,
        "directed": model.directed,
        "ridge": model.ridge,
        "intercept": [float(v) for v in model.intercept],
        "coefficients": [float(v) for v in model.coefficients.ravel()],
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_var_model(path) -> VarModel:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"invalid JSON: {exc}") from exc
    if payload.get("format") != "graphar-var":
        raise DatasetFormatError("not a graphar-var file")
    try:
        k = int(payload["order"])
        n = int(payload["n_nodes"])
        f = int(payload["feature_dim"])
        d = n * f + n * n
        intercept = np.asarray(payload["intercept"], dtype=np.float64)
        coefficients = np.asarray(payload["coefficients"], dtype=np.float64)
        if intercept.shape != (d,) or coefficients.size != k * d * d:
            raise ValueError("parameter lengths do not match dims")
        return VarModel(
            order=k,
            intercept=intercept,
            coefficients=coefficients.reshape(k, d, d),
            ridge=float(payload["ridge"]),
            n_nodes=n,
            feature_dim=f,
            directed=bool(payload["directed"]),
        )
    except KeyError as exc:
        raise DatasetFormatError(f"missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise DatasetFormatError(str(exc)) from exc
