"""Synthetic graph-generating processes.

Both processes iterate a vector recursion x_{t+1} = f(x_t, ...) + eps with
eps ~ N(0, sigma^2) per component, then turn each state into a graph: the
observed N*F components are reshaped row-major into the node-feature
matrix and the adjacency is the Delaunay triangulation of the feature
rows (F = 2).

Rotational model of order p: f rotates each node's feature pair by an
angle that depends on the last p states,

    omega_n = c_n + alpha * cos( sum_{i=0}^{p-1} x_{t-i}[2n] + x_{t-i}[2n+1] )

(0-based node n). PMLDS(c): a linear system x_{t+1} = R x_t with a Haar
orthogonal R of size c, observed only through its first N*F components,
which makes the observed process autoregressive of order up to c.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .delaunay import delaunay_adjacency
from .graphs import AttributedGraph, GraphSequence

BURN_IN_STEPS = 100

_PARAM_STREAM = 0  # substream drawing process parameters (offsets, R)
_PROCESS_STREAM = 1  # substream driving initialization and noise


@dataclass(frozen=True)
class NoiseSpec:
    """Stationary Gaussian noise added inside the state recursion."""

    std: float
    mode: str = "process"

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("noise std must be nonnegative")
        if self.mode != "process":
            raise ValueError(f"unknown noise mode {self.mode!r}")


@dataclass(frozen=True, eq=False)
class RotationalConfig:
    """Rotational process parameters.

    phase_offsets holds one base angle per node, each in (-1, 1];
    feature_dim is fixed at 2 (the rotation acts on feature pairs).
    """

    n_nodes: int
    order: int
    phase_offsets: np.ndarray
    amplitude: float = 0.01
    noise_std: float = 0.001
    seed: int = 0
    feature_dim: int = field(default=2)

    def __post_init__(self):
        if self.feature_dim != 2:
            raise ValueError("rotational process requires feature_dim = 2")
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        NoiseSpec(self.noise_std)
        offsets = np.asarray(self.phase_offsets, dtype=np.float64)
        if offsets.shape != (self.n_nodes,):
            raise ValueError(
                f"phase_offsets must have shape ({self.n_nodes},), got {offsets.shape}"
            )
        if np.any(offsets <= -1.0) or np.any(offsets > 1.0):
            raise ValueError("phase offsets must lie in (-1, 1]")
        offsets.flags.writeable = False
        object.__setattr__(self, "phase_offsets", offsets)

    @property
    def state_dim(self) -> int:
        return self.n_nodes * self.feature_dim

    def __eq__(self, other):
        if not isinstance(other, RotationalConfig):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and self.order == other.order
            and np.array_equal(self.phase_offsets, other.phase_offsets)
            and self.amplitude == other.amplitude
            and self.noise_std == other.noise_std
            and self.seed == other.seed
        )


def random_rotational_config(
    n_nodes: int,
    order: int,
    seed: int,
    amplitude: float = 0.01,
    noise_std: float = 0.001,
) -> RotationalConfig:
    """Rotational config with per-node phase offsets drawn uniformly from
    (-1, 1], deterministically from the seed."""
    rng = np.random.default_rng([seed, _PARAM_STREAM])
    offsets = -rng.uniform(-1.0, 1.0, size=n_nodes)  # flip [-1,1) to (-1,1]
    return RotationalConfig(
        n_nodes=n_nodes,
        order=order,
        phase_offsets=offsets,
        amplitude=amplitude,
        noise_std=noise_std,
        seed=seed,
    )


@dataclass(frozen=True, eq=False)
class PmldsConfig:
    """Partially masked linear dynamical system parameters.

    The latent state has dimension ``complexity`` (> N*F) and evolves by an
    orthogonal matrix; only the first N*F components are observed.
    """

    n_nodes: int
    feature_dim: int
    complexity: int
    dynamics_matrix: np.ndarray
    noise_std: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be positive")
        if self.complexity <= self.n_nodes * self.feature_dim:
            raise ValueError(
                f"complexity must exceed N*F = {self.n_nodes * self.feature_dim}"
            )
        NoiseSpec(self.noise_std)
        r = np.asarray(self.dynamics_matrix, dtype=np.float64)
        c = self.complexity
        if r.shape != (c, c):
            raise ValueError(f"dynamics_matrix must be ({c}, {c}), got {r.shape}")
        if np.abs(r.T @ r - np.eye(c)).max() > 1e-10:
            raise ValueError("dynamics_matrix must be orthogonal (R^T R = I)")
        r.flags.writeable = False
        object.__setattr__(self, "dynamics_matrix", r)

    @property
    def state_dim(self) -> int:
        return self.complexity

    @property
    def observed_dim(self) -> int:
        return self.n_nodes * self.feature_dim

    def __eq__(self, other):
        if not isinstance(other, PmldsConfig):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and self.feature_dim == other.feature_dim
            and self.complexity == other.complexity
            and np.array_equal(self.dynamics_matrix, other.dynamics_matrix)
            and self.noise_std == other.noise_std
            and self.seed == other.seed
        )


def random_pmlds_config(
    n_nodes: int,
    complexity: int,
    seed: int,
    feature_dim: int = 2,
    noise_std: float = 0.001,
) -> PmldsConfig:
    """PMLDS config with a Haar orthogonal dynamics matrix drawn
    deterministically from the seed."""
    rng = np.random.default_rng([seed, _PARAM_STREAM])
    r = random_orthogonal(complexity, rng)
    return PmldsConfig(
        n_nodes=n_nodes,
        feature_dim=feature_dim,
        complexity=complexity,
        dynamics_matrix=r,
        noise_std=noise_std,
        seed=seed,
    )


GeneratorConfig = Union[RotationalConfig, PmldsConfig]


def rotation_omega(
    history: Sequence[np.ndarray], node: int, config: RotationalConfig
) -> float:
    """Rotation angle of one node given the last p state vectors,
    most recent first."""
    if len(history) != config.order:
        raise ValueError(
            f"history must hold exactly {config.order} vectors, got {len(history)}"
        )
    if not 0 <= node < config.n_nodes:
        raise ValueError(f"node index {node} out of range")
    total = 0.0
    for x in history:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (config.state_dim,):
            raise ValueError(
                f"state vectors must have length {config.state_dim}, got {x.shape}"
            )
        total += x[2 * node] + x[2 * node + 1]
    return float(
        config.phase_offsets[node] + config.amplitude * np.cos(total)
    )


def _rotation_angles(history: Sequence[np.ndarray], config: RotationalConfig):
    stacked = np.asarray(history, dtype=np.float64)
    sums = stacked[:, 0::2].sum(axis=0) + stacked[:, 1::2].sum(axis=0)
    return config.phase_offsets + config.amplitude * np.cos(sums)


def rotational_step(
    history: Sequence[np.ndarray],
    config: RotationalConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """One step of the rotational recursion: rotate each node's feature
    pair by its angle, then add process noise."""
    if len(history) != config.order:
        raise ValueError(
            f"history must hold exactly {config.order} vectors, got {len(history)}"
        )
    omega = _rotation_angles(history, config)
    x = np.asarray(history[0], dtype=np.float64)
    a, b = x[0::2], x[1::2]
    cos_w, sin_w = np.cos(omega), np.sin(omega)
    nxt = np.empty_like(x)
    nxt[0::2] = cos_w * a + sin_w * b
    nxt[1::2] = -sin_w * a + cos_w * b
    if config.noise_std > 0:
        nxt += config.noise_std * rng.standard_normal(config.state_dim)
    return nxt


def random_orthogonal(size: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix.

    QR factorization of a standard normal matrix with the R-diagonal sign
    convention that makes the factorization unique.
    """
    if size < 1:
        raise ValueError("size must be positive")
    z = rng.standard_normal((size, size))
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diagonal(r))
    signs[signs == 0] = 1.0
    return q * signs


def pmlds_step(
    x: np.ndarray, config: PmldsConfig, rng: np.random.Generator
) -> np.ndarray:
    """One step of the latent linear recursion R @ x plus process noise."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (config.complexity,):
        raise ValueError(
            f"state must have length {config.complexity}, got shape {x.shape}"
        )
    nxt = config.dynamics_matrix @ x
    if config.noise_std > 0:
        nxt += config.noise_std * rng.standard_normal(config.complexity)
    return nxt


def _state_to_graph(observed: np.ndarray, n_nodes: int, feature_dim: int):
    features = observed.reshape(n_nodes, feature_dim)
    return AttributedGraph(features, delaunay_adjacency(features))


def generate_sequence(
    config: GeneratorConfig,
    length: int,
    rng: Optional[np.random.Generator] = None,
) -> GraphSequence:
    """Run the configured process and emit a graph sequence of the given
    length.

    Initial states are standard normal and a burn-in of 100 steps is
    discarded before emission. With rng omitted the process stream is
    derived from config.seed, so equal configs yield bit-identical
    sequences.
    """
    if length < 0:
        raise ValueError("length must be nonnegative")
    if rng is None:
        rng = np.random.default_rng([config.seed, _PROCESS_STREAM])

    graphs = []
    if isinstance(config, RotationalConfig):
        history = [rng.standard_normal(config.state_dim) for _ in range(config.order)]
        for step in range(BURN_IN_STEPS + length):
            nxt = rotational_step(history, config, rng)
            history = [nxt] + history[: config.order - 1]
            if step >= BURN_IN_STEPS:
                graphs.append(_state_to_graph(nxt, config.n_nodes, config.feature_dim))
    elif isinstance(config, PmldsConfig):
        x = rng.standard_normal(config.complexity)
        for step in range(BURN_IN_STEPS + length):
            x = pmlds_step(x, config, rng)
            if step >= BURN_IN_STEPS:
                graphs.append(
                    _state_to_graph(
                        x[: config.observed_dim], config.n_nodes, config.feature_dim
                    )
                )
    else:
        raise ValueError(f"unknown generator config type {type(config).__name__}")
    return GraphSequence(graphs, origin=config)
