import math

import numpy as np
import pytest

from graphar import (
    NoiseSpec,
    PmldsConfig,
    RotationalConfig,
    generate_sequence,
    pmlds_step,
    random_orthogonal,
    random_pmlds_config,
    random_rotational_config,
    rotation_omega,
    rotational_step,
)


def rot_config(n_nodes=2, order=1, offsets=None, amplitude=0.01, noise_std=0.0, seed=0):
    if offsets is None:
        offsets = np.full(n_nodes, 0.5)
    return RotationalConfig(
        n_nodes=n_nodes,
        order=order,
        phase_offsets=np.asarray(offsets, dtype=float),
        amplitude=amplitude,
        noise_std=noise_std,
        seed=seed,
    )


def test_noise_spec_validation():
    NoiseSpec(0.0)
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)
    with pytest.raises(ValueError):
        NoiseSpec(0.1, mode="observation")


def test_omega_zero_history():
    cfg = rot_config(offsets=[0.5, 0.5])
    history = [np.zeros(4)]
    assert rotation_omega(history, 0, cfg) == pytest.approx(0.51)


def test_omega_without_amplitude_is_offset():
    cfg = rot_config(offsets=[0.3, -0.7], amplitude=0.0)
    rng = np.random.default_rng(0)
    history = [rng.standard_normal(4)]
    assert rotation_omega(history, 0, cfg) == pytest.approx(0.3)
    assert rotation_omega(history, 1, cfg) == pytest.approx(-0.7)


def test_omega_two_step_history():
    # first node, sum of its two components over both history entries is 2
    cfg = rot_config(n_nodes=2, order=2, offsets=[1e-12, 0.5])
    x_t = np.array([1.0, 0.0, 0.0, 0.0])
    x_prev = np.array([0.0, 1.0, 0.0, 0.0])
    got = rotation_omega([x_t, x_prev], 0, cfg)
    assert got == pytest.approx(1e-12 + 0.01 * math.cos(2.0), abs=1e-15)


def test_omega_history_length_checked():
    cfg = rot_config(order=2)
    with pytest.raises(ValueError):
        rotation_omega([np.zeros(4)], 0, cfg)


def test_step_identity_rotation():
    cfg = rot_config(offsets=[1e-300, 1e-300], amplitude=0.0)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(4)
    nxt = rotational_step([x], cfg, rng)
    assert np.allclose(nxt, x, atol=1e-12)


def test_step_preserves_norm_without_noise():
    cfg = rot_config(n_nodes=3, order=2, offsets=[0.9, -0.4, 0.2])
    rng = np.random.default_rng(1)
    history = [rng.standard_normal(6) for _ in range(2)]
    nxt = rotational_step(history, cfg, rng)
    assert np.linalg.norm(nxt) == pytest.approx(np.linalg.norm(history[0]), abs=1e-12)


def test_step_quarter_turn():
    # choose amplitude so that omega = pi/2 for x = (1, 0)
    amplitude = (math.pi / 2) / math.cos(1.0)
    cfg = rot_config(n_nodes=1, offsets=[1e-300], amplitude=amplitude)
    rng = np.random.default_rng(2)
    nxt = rotational_step([np.array([1.0, 0.0])], cfg, rng)
    assert np.allclose(nxt, [0.0, -1.0], atol=1e-12)


def test_step_matches_per_node_omegas():
    cfg = rot_config(n_nodes=3, order=2, offsets=[0.1, 0.7, -0.3])
    rng = np.random.default_rng(3)
    history = [rng.standard_normal(6) for _ in range(2)]
    nxt = rotational_step(history, cfg, rng)
    x = history[0]
    for node in range(3):
        w = rotation_omega(history, node, cfg)
        block = np.array([[math.cos(w), math.sin(w)], [-math.sin(w), math.cos(w)]])
        expected = block @ x[2 * node : 2 * node + 2]
        assert np.allclose(nxt[2 * node : 2 * node + 2], expected, atol=1e-12)


def test_phase_offset_range_enforced():
    with pytest.raises(ValueError):
        rot_config(offsets=[-1.0, 0.5])
    with pytest.raises(ValueError):
        rot_config(offsets=[1.5, 0.5])
    cfg = random_rotational_config(n_nodes=50, order=1, seed=0)
    assert np.all(cfg.phase_offsets > -1.0)
    assert np.all(cfg.phase_offsets <= 1.0)


def test_random_orthogonal():
    rng = np.random.default_rng(0)
    r1 = random_orthogonal(1, rng)
    assert r1.shape == (1, 1) and abs(abs(r1[0, 0]) - 1.0) < 1e-12
    for c in (3, 20):
        r = random_orthogonal(c, np.random.default_rng(5))
        assert np.abs(r.T @ r - np.eye(c)).max() < 1e-10
        v = np.random.default_rng(6).standard_normal(c)
        assert np.linalg.norm(r @ v) == pytest.approx(np.linalg.norm(v), abs=1e-10)
    eigvals = np.linalg.eigvals(random_orthogonal(20, np.random.default_rng(7)))
    assert np.abs(np.abs(eigvals) - 1.0).max() < 1e-8
    with pytest.raises(ValueError):
        random_orthogonal(0, rng)


def test_random_orthogonal_deterministic():
    a = random_orthogonal(8, np.random.default_rng(42))
    b = random_orthogonal(8, np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_pmlds_step():
    cfg = random_pmlds_config(n_nodes=1, complexity=2, seed=0, feature_dim=1, noise_std=0.0)
    x = np.array([1.0, 0.0])
    nxt = pmlds_step(x, cfg, np.random.default_rng(0))
    assert np.array_equal(nxt, cfg.dynamics_matrix @ x)
    with pytest.raises(ValueError):
        pmlds_step(np.zeros(3), cfg, np.random.default_rng(0))


def test_pmlds_identity_dynamics():
    cfg = PmldsConfig(
        n_nodes=1, feature_dim=1, complexity=3, dynamics_matrix=np.eye(3), noise_std=0.0
    )
    x = np.array([1.0, -2.0, 0.5])
    assert np.array_equal(pmlds_step(x, cfg, np.random.default_rng(0)), x)


def test_pmlds_config_validation():
    with pytest.raises(ValueError):
        PmldsConfig(n_nodes=2, feature_dim=2, complexity=4, dynamics_matrix=np.eye(4))
    with pytest.raises(ValueError):
        PmldsConfig(
            n_nodes=1, feature_dim=1, complexity=2, dynamics_matrix=np.ones((2, 2))
        )


def test_generate_empty_sequence():
    cfg = random_rotational_config(n_nodes=2, order=1, seed=0)
    assert len(generate_sequence(cfg, 0)) == 0
    with pytest.raises(ValueError):
        generate_sequence(cfg, -1)


def test_generated_graphs_are_valid():
    cfg = random_rotational_config(n_nodes=5, order=3, seed=1)
    seq = generate_sequence(cfg, 40)
    assert len(seq) == 40
    assert seq.origin == cfg
    for g in seq:
        assert g.n_nodes == 5
        assert np.array_equal(g.adjacency, g.adjacency.T)
        assert not np.diagonal(g.adjacency).any()


def test_generation_reproducible():
    cfg = random_pmlds_config(n_nodes=3, complexity=8, seed=9)
    a = generate_sequence(cfg, 25)
    b = generate_sequence(cfg, 25)
    assert a == b


def test_different_seeds_differ():
    a = generate_sequence(random_rotational_config(5, 2, seed=1), 10)
    b = generate_sequence(random_rotational_config(5, 2, seed=2), 10)
    assert a != b


def test_noiseless_norm_preserved_long_run():
    # latent norm is conserved over 10^4 steps for both processes
    cfg = random_rotational_config(n_nodes=2, order=2, seed=3, noise_std=0.0)
    rng = np.random.default_rng([3, 1])
    history = [rng.standard_normal(4) for _ in range(2)]
    norm0 = np.linalg.norm(history[0])
    for _ in range(10_000):
        nxt = rotational_step(history, cfg, rng)
        history = [nxt, history[0]]
    assert abs(np.linalg.norm(history[0]) - norm0) < 1e-10

    pcfg = random_pmlds_config(n_nodes=2, complexity=6, seed=4, noise_std=0.0)
    x = rng.standard_normal(6)
    norm0 = np.linalg.norm(x)
    for _ in range(10_000):
        x = pmlds_step(x, pcfg, rng)
    assert abs(np.linalg.norm(x) - norm0) < 1e-10


def test_pmlds_observed_linear_recurrence():
    # Cayley-Hamilton: noiseless observed components satisfy a shared
    # scalar recurrence of order <= c; verified by least squares
    c = 6
    cfg = random_pmlds_config(n_nodes=2, complexity=c, seed=5, noise_std=0.0)
    seq = generate_sequence(cfg, 300)
    y = seq.features_array().reshape(300, -1)  # (T, N*F)
    rows, targets = [], []
    for t in range(c, 300):
        for d in range(y.shape[1]):
            rows.append([y[t - i, d] for i in range(1, c + 1)])
            targets.append(y[t, d])
    coeffs, *_ = np.linalg.lstsq(np.asarray(rows), np.asarray(targets), rcond=None)
    residual = np.asarray(targets) - np.asarray(rows) @ coeffs
    assert np.abs(residual).max() < 1e-8
