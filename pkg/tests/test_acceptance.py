"""Acceptance gate: one test per criterion, each printing a PASS line.

Criteria 7-9 train the full-size network on 20k-step sequences and share
their experiment runs through module-scoped fixtures; expect the module
to run for a few hours on a 2-core box. Run with `pytest -s
tests/test_acceptance.py` to watch the per-criterion lines appear.
"""

import itertools
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from graphar import (
    AttributedGraph,
    Correspondence,
    DistanceParams,
    NgarConfig,
    NgarModel,
    delaunay_adjacency,
    frechet_mean_closed_form,
    frechet_variation,
    ged,
    generate_sequence,
    random_pmlds_config,
    random_rotational_config,
    var_fit,
    var_predict,
)
from graphar.distance import frechet_cost
from graphar.harness import ExperimentConfig, run_experiment
from graphar.neural import (
    dense_backward,
    dense_forward,
    gated_pool_backward,
    gated_pool_forward,
    gcn_backward,
    gcn_forward,
    lstm_layer_backward,
    lstm_layer_forward,
    ngar_backward,
    ngar_forward,
    ngar_loss,
)
from graphar.neural.layers import normalize_adjacency

from helpers import (
    naive_pair_cost,
    numeric_gradient,
    oracle_delaunay,
    random_graph,
    relative_error,
    scalar_graph,
)


def _passed(name, detail=""):
    print(f"ACCEPTANCE {name}: PASS {detail}".rstrip())


# ---------------------------------------------------------------------------
# 1. scalar reduction: Fréchet statistics collapse to mean and variance

def test_c01_scalar_reduction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    for _ in range(200):
        values = rng.standard_normal(rng.integers(2, 30))
        sample = [scalar_graph(v) for v in values]
        mean = frechet_mean_closed_form(sample)
        assert abs(mean.node_features[0, 0] - values.mean()) <= 1e-12
        assert abs(frechet_variation(sample) - values.var()) <= 1e-12
    _passed("1 scalar-reduction", f"({time.perf_counter() - t0:.2f}s)")


# ---------------------------------------------------------------------------
# 2. closed-form Fréchet mean beats an exhaustive candidate grid

def _candidate_grid(sample):
    base = np.mean([g.node_features for g in sample], axis=0)
    pair_index = [(0, 1), (0, 2), (1, 2)]
    adjacencies = []
    for bits in itertools.product((0, 1), repeat=3):
        adj = np.zeros((3, 3), dtype=np.int8)
        for bit, (i, j) in zip(bits, pair_index):
            adj[i, j] = adj[j, i] = bit
        adjacencies.append(adj)
    for adj in adjacencies:
        for deltas in itertools.product((-0.25, 0.0, 0.25), repeat=3):
            feats = base + np.array(deltas)[:, None]
            yield AttributedGraph(feats, adj)


def test_c02_frechet_closed_form_vs_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    params = DistanceParams()
    for _ in range(100):
        sample = [random_graph(rng, n_nodes=3, feature_dim=1) for _ in range(8)]
        mean = frechet_mean_closed_form(sample, params)
        mean_cost = frechet_cost(mean, sample, params)
        for cand in _candidate_grid(sample):
            assert mean_cost <= frechet_cost(cand, sample, params) + 1e-10
    _passed("2 frechet-closed-form-vs-oracle", f"({time.perf_counter() - t0:.2f}s)")


# ---------------------------------------------------------------------------
# 3. exact permutation GED against an independent loop

def _integer_graph(rng, n):
    feats = rng.integers(-3, 4, size=(n, 2)).astype(np.float64)
    return AttributedGraph(feats, _random_sym(rng, n))


def test_c03_exact_ged():
    # integer-valued features keep every partial sum exactly representable,
    # so the two independent summation orders must agree bit for bit; a
    # continuous-feature sweep checks agreement to float roundoff on top
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    params = DistanceParams(correspondence=Correspondence.OPTIMAL_PERMUTATION)
    for _ in range(100):
        g1 = _integer_graph(rng, 4)
        g2 = _integer_graph(rng, 4)
        best = min(
            naive_pair_cost(g1, g2, perm)
            for perm in itertools.permutations(range(4))
        )
        assert ged(g1, g2, params) == np.sqrt(best)
    for _ in range(100):
        g1 = random_graph(rng, n_nodes=4)
        g2 = random_graph(rng, n_nodes=4)
        best = min(
            naive_pair_cost(g1, g2, perm)
            for perm in itertools.permutations(range(4))
        )
        got = ged(g1, g2, params)
        assert abs(got - np.sqrt(best)) <= 2 * np.spacing(got)
    _passed("3 exact-ged", f"({time.perf_counter() - t0:.2f}s)")


# ---------------------------------------------------------------------------
# 4. Delaunay adjacency against the incircle-determinant oracle

def test_c04_delaunay():
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    for _ in range(1000):
        pts = rng.standard_normal((5, 2))
        adj = delaunay_adjacency(pts)
        assert np.array_equal(adj, oracle_delaunay(pts))
        assert int(adj.sum()) // 2 <= 9
    _passed("4 delaunay", f"({time.perf_counter() - t0:.2f}s)")


# ---------------------------------------------------------------------------
# 5. gradient checks: every layer type plus the composed model

def _probe(loss_fn, params, grads, rng, n_probes, tol=1e-4):
    names = sorted(params)
    worst = 0.0
    for _ in range(n_probes):
        name = names[rng.integers(len(names))]
        arr = params[name]
        index = np.unravel_index(rng.integers(arr.size), arr.shape)
        numeric = numeric_gradient(loss_fn, arr, index)
        worst = max(worst, relative_error(numeric, grads[name][index]))
    assert worst <= tol, f"worst relative error {worst}"
    return worst


def test_c05_gradient_checks():
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    worst = 0.0

    # graph convolution
    x = rng.standard_normal((2, 4, 3))
    adj = np.stack([_random_sym(rng, 4), _random_sym(rng, 4)])
    a_norm = normalize_adjacency(adj)
    params = {"w": rng.standard_normal((3, 5)), "b": rng.standard_normal(5)}
    proj = rng.standard_normal((2, 4, 5))
    out, cache = gcn_forward(x, a_norm, params["w"], params["b"])
    _, d_w, d_b = gcn_backward(cache, proj)
    worst = max(worst, _probe(
        lambda: float((gcn_forward(x, a_norm, params["w"], params["b"])[0] * proj).sum()),
        params, {"w": d_w, "b": d_b}, rng, 50,
    ))

    # gated pooling
    h = rng.standard_normal((3, 4, 6))
    params = {
        "wg": rng.standard_normal((6, 6)), "bg": rng.standard_normal(6),
        "wp": rng.standard_normal((6, 6)), "bp": rng.standard_normal(6),
    }
    proj = rng.standard_normal((3, 6))
    _, cache = gated_pool_forward(h, params["wg"], params["bg"], params["wp"], params["bp"])
    _, d_wg, d_bg, d_wp, d_bp = gated_pool_backward(cache, proj)
    worst = max(worst, _probe(
        lambda: float((gated_pool_forward(h, params["wg"], params["bg"], params["wp"], params["bp"])[0] * proj).sum()),
        params, {"wg": d_wg, "bg": d_bg, "wp": d_wp, "bp": d_bp}, rng, 50,
    ))

    # LSTM layer
    x_seq = rng.standard_normal((2, 3, 4))
    params = {
        "w": rng.standard_normal((4, 20)), "u": rng.standard_normal((5, 20)),
        "b": rng.standard_normal(20),
    }
    proj = rng.standard_normal((2, 3, 5))
    _, cache = lstm_layer_forward(x_seq, params["w"], params["u"], params["b"])
    _, d_w, d_u, d_b = lstm_layer_backward(cache, proj)
    worst = max(worst, _probe(
        lambda: float((lstm_layer_forward(x_seq, params["w"], params["u"], params["b"])[0] * proj).sum()),
        params, {"w": d_w, "u": d_u, "b": d_b}, rng, 50,
    ))

    # dense layers, both activations
    for activation in ("relu", "linear"):
        x = rng.standard_normal((6, 5))
        params = {"w": rng.standard_normal((5, 4)), "b": rng.standard_normal(4)}
        proj = rng.standard_normal((6, 4))
        _, cache = dense_forward(x, params["w"], params["b"], activation)
        _, d_w, d_b = dense_backward(cache, proj)
        worst = max(worst, _probe(
            lambda: float((dense_forward(x, params["w"], params["b"], activation)[0] * proj).sum()),
            params, {"w": d_w, "b": d_b}, rng, 50,
        ))

    # full composed model: N=3, k=2, reduced channels, float64
    config = NgarConfig(
        window=2, conv_channels=4, pool_channels=4, rnn_units=6,
        dense_units=(5, 7), batch_size=4, dtype="float64", seed=105,
    )
    model = NgarModel.initialize(3, 2, config)
    graphs = [random_graph(rng, 3, 2) for _ in range(3)]
    window, target = graphs[:2], graphs[2]
    grads = ngar_backward(model, window, target)

    def model_loss():
        a_prob, x_hat = ngar_forward(model, window)
        return ngar_loss(a_prob, x_hat, target, model)

    worst = max(worst, _probe(model_loss, model.params, grads, rng, 60))
    _passed("5 gradient-check", f"(worst rel err {worst:.2e}, {time.perf_counter() - t0:.1f}s)")


def _random_sym(rng, n):
    a = np.triu((rng.random((n, n)) < 0.5).astype(np.int8), 1)
    return a + a.T


# ---------------------------------------------------------------------------
# 6. VAR exactness on a noiseless partially observed linear system

def test_c06_var_exactness():
    t0 = time.perf_counter()
    config = random_pmlds_config(n_nodes=5, complexity=11, seed=106, noise_std=0.0)
    seq = generate_sequence(config, 2500)
    train, k = seq[:2250], 20
    model = var_fit(train, k=k, ridge=1e-6)
    errors = []
    for t in range(2250, 2500):
        pred = var_predict(model, seq[t - k : t])
        errors.append(((pred.node_features - seq[t].node_features) ** 2).mean())
    mse = float(np.mean(errors))
    assert mse <= 1e-6, f"held-out feature MSE {mse}"
    _passed("6 var-exactness", f"(MSE {mse:.2e}, {time.perf_counter() - t0:.1f}s)")


# ---------------------------------------------------------------------------
# 7-9. full-scale experiments (shared fixtures)

FULL_METHODS = ("mean", "mart", "move", "var", "ngar")
T = 20_000


def _experiment(generator, name, methods):
    config = ExperimentConfig(
        generator=generator,
        name=name,
        total_steps=T,
        methods=methods,
        ngar=NgarConfig(seed=0),
        seed=7,
    )
    t0 = time.perf_counter()
    report = run_experiment(config)
    print(
        f"[experiment {name}: {(time.perf_counter() - t0) / 60:.1f} min, "
        f"{report.training['epochs']} epochs]"
    )
    return report


@pytest.fixture(scope="module")
def exp_pmlds11():
    return _experiment(random_pmlds_config(5, 11, seed=7), "pmlds11", FULL_METHODS)


@pytest.fixture(scope="module")
def exp_pmlds15():
    return _experiment(random_pmlds_config(5, 15, seed=7), "pmlds15", FULL_METHODS)


@pytest.fixture(scope="module")
def exp_pmlds60():
    return _experiment(random_pmlds_config(5, 60, seed=7), "pmlds60", ("ngar",))


@pytest.fixture(scope="module")
def exp_rot5():
    return _experiment(random_rotational_config(5, 5, seed=7), "rot5", ("ngar",))


@pytest.fixture(scope="module")
def exp_rot100():
    return _experiment(random_rotational_config(5, 100, seed=7), "rot100", ("ngar",))


def test_c07_pmlds11_accuracy(exp_pmlds11):
    accuracy = exp_pmlds11.ngar_metrics["adjacency_accuracy"]
    assert accuracy >= 0.85, f"adjacency accuracy {accuracy}"
    _passed("7 pmlds11-accuracy", f"(accuracy {accuracy:.3f})")


def test_c08_complexity_trend(exp_pmlds15, exp_pmlds60, exp_rot5, exp_rot100):
    low_c = exp_pmlds15.ngar_metrics["loss"]
    high_c = exp_pmlds60.ngar_metrics["loss"]
    assert low_c < high_c, f"pmlds loss {low_c} !< {high_c}"
    low_p = exp_rot5.ngar_metrics["loss"]
    high_p = exp_rot100.ngar_metrics["loss"]
    assert low_p < high_p, f"rotational loss {low_p} !< {high_p}"
    _passed(
        "8 complexity-trend",
        f"(pmlds {low_c:.3f} < {high_c:.3f}; rotational {low_p:.3f} < {high_p:.3f})",
    )


def test_c09_baseline_ranking(exp_pmlds11, exp_pmlds15):
    for report in (exp_pmlds11, exp_pmlds15):
        medians = {m: r.summary()["median"] for m, r in report.results.items()}
        for baseline in ("mean", "mart", "move", "var"):
            assert medians["ngar"] < medians[baseline], (
                f"{report.name}: ngar median {medians['ngar']} not below "
                f"{baseline} {medians[baseline]}"
            )
    _passed("9 baseline-ranking")


# ---------------------------------------------------------------------------
# 10. byte-identical sweep reports under a fixed seed, single-threaded

def test_c10_sweep_reproducibility(tmp_path):
    t0 = time.perf_counter()
    entry = {
        "name": "repro",
        "generator": {"kind": "pmlds", "n_nodes": 5, "complexity": 11, "seed": 3},
        "total_steps": 700,
        "window": 20,
        "methods": ["mean", "mart", "move", "var", "ngar"],
        "ngar": {"window": 20, "max_epochs": 3, "seed": 3},
        "seed": 3,
    }
    configs = tmp_path / "sweep.jsonl"
    configs.write_text(json.dumps(entry) + "\n")
    env = dict(os.environ, OPENBLAS_NUM_THREADS="1", OMP_NUM_THREADS="1")
    for run in ("one", "two"):
        subprocess.run(
            [
                sys.executable, "-m", "graphar", "sweep",
                "--configs", str(configs), "--out", str(tmp_path / run),
            ],
            check=True,
            env=env,
            capture_output=True,
        )
    compared = 0
    for name in ("summary.csv", "repro/report.json", "repro/metrics.csv", "repro/residuals.csv"):
        a = (tmp_path / "one" / name).read_bytes()
        b = (tmp_path / "two" / name).read_bytes()
        assert a == b, f"{name} differs between runs"
        compared += 1
    _passed(
        "10 sweep-reproducibility",
        f"({compared} files byte-identical, {time.perf_counter() - t0:.1f}s)",
    )
