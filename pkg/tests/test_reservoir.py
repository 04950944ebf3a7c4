import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PAULI, dense_circuit, embed
from qfinseq.data import build_lags
from qfinseq.encoding import RandomProjection
from qfinseq.qsim import CNOT, Rot
from qfinseq.reservoir import (
    EsnConfig, Mlp, MlpConfig, QrcConfig, ReservoirError, ReservoirTrace, compress_memory, config_from_dict,
    esn_step, fading_memory_gap, fit_nn_readout, fit_reservoir_forecaster, fit_ridge, predict_linear, qrc_mix,
    qrc_step, run_reservoir, write_trace_csv,
)


def cholesky_oracle(R, Y, reg):
    """Ridge solution by a hand-written Cholesky factorization and two triangular sweeps."""
    A = R.T @ R + reg * np.eye(R.shape[1])
    B = R.T @ Y
    n = A.shape[0]
    L = np.zeros_like(A)
    for i in range(n):
        for j in range(i + 1):
            s = A[i, j] - sum(L[i, k] * L[j, k] for k in range(j))
            L[i, j] = math.sqrt(s) if i == j else s / L[j, j]
    Z = np.zeros_like(B)
    for i in range(n):
        Z[i] = (B[i] - L[i, :i] @ Z[:i]) / L[i, i]
    X = np.zeros_like(B)
    for i in reversed(range(n)):
        X[i] = (Z[i] - L[i + 1:, i] @ X[i + 1:]) / L[i, i]
    return X


# ---------------------------------------------------------------- quantum reservoir


def test_leak_one_ignores_memory():
    cfg = QrcConfig.from_seed(1, n_qubits=3, n_layers=2, leak=1.0)
    x = [0.4]
    a = qrc_mix(cfg, np.zeros(9), x)
    b = qrc_mix(cfg, np.random.default_rng(0).uniform(-1, 1, 9), x)
    assert np.array_equal(a, b)
    assert np.allclose(a, cfg.input_scale * 0.4 + cfg.bias)
    assert np.array_equal(qrc_step(cfg, np.zeros(9), x), qrc_step(cfg, np.ones(9) * 0.3, x))


def test_leak_zero_ignores_input():
    cfg = QrcConfig.from_seed(1, n_qubits=3, n_layers=2, leak=0.0)
    r = np.random.default_rng(0).uniform(-1, 1, 9)
    assert np.array_equal(qrc_mix(cfg, r, [0.1]), qrc_mix(cfg, r, [5.0]))
    assert np.allclose(qrc_mix(cfg, r, [0.1]), compress_memory(cfg, r))
    assert np.allclose(compress_memory(cfg, r), r.reshape(3, 3).mean(axis=0))


def test_input_wrapping():
    cfg = QrcConfig.from_seed(0, n_qubits=4, leak=1.0)
    v = qrc_mix(cfg, np.zeros(12), [1.0, 2.0])
    assert np.allclose(v - cfg.bias, cfg.input_scale * np.array([1.0, 2.0, 1.0, 2.0]))


def dense_qrc_step(cfg, prev_r, x):
    n = cfg.n_qubits
    wx, wy, wz = cfg.weights
    prev = np.asarray(prev_r).reshape(3, n)
    m = wx * prev[0] + wy * prev[1] + wz * prev[2]
    xs = [cfg.input_scale * x[i % len(x)] + cfg.bias[i] for i in range(n)]
    v = [cfg.leak * xs[i] + (1 - cfg.leak) * m[i] for i in range(n)]
    lifted = np.array(v + [math.tanh(a) for a in v] + [1.0])
    amp = cfg.proj.matrix @ lifted
    psi = amp / np.linalg.norm(amp)
    gates = []
    for layer in range(cfg.n_layers):
        gates += [Rot(*cfg.angles[layer, q], q) for q in range(n)]
        gates += [CNOT(q, (q + 1) % n) for q in range(n)]
    out = dense_circuit(gates, n) @ psi
    return np.array([[np.vdot(out, embed(PAULI[a], q, n) @ out).real for q in range(n)] for a in "XYZ"]).reshape(-1)


def test_two_qubit_step_against_dense_oracle():
    cfg = QrcConfig.from_seed(3, n_qubits=2, n_layers=1)
    r = qrc_step(cfg, np.zeros(6), [0.7])
    assert np.max(np.abs(r - dense_qrc_step(cfg, np.zeros(6), [0.7]))) < 1e-12
    r2 = qrc_step(cfg, r, [-0.2])
    assert np.max(np.abs(r2 - dense_qrc_step(cfg, r, [-0.2]))) < 1e-12


def test_first_step_uses_zero_memory():
    cfg = QrcConfig.from_seed(5, n_qubits=3, n_layers=2, leak=0.5)
    R = run_reservoir(cfg, np.array([[0.3]]))
    assert R.shape == (1, 9)
    assert np.allclose(qrc_mix(cfg, np.zeros(9), [0.3]), 0.5 * (cfg.input_scale * 0.3 + cfg.bias))
    assert np.array_equal(R[0], qrc_step(cfg, np.zeros(9), [0.3]))


def test_trace_is_deterministic_and_bounded():
    x = np.random.default_rng(1).standard_normal((40, 2)) * 3
    a = run_reservoir(QrcConfig.from_seed(9), x)
    b = run_reservoir(QrcConfig.from_seed(9), x)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a) <= 1 + 1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 1), st.integers(1, 3))
def test_quantum_trace_bounds_property(seed, leak, d):
    cfg = QrcConfig.from_seed(seed, n_qubits=3, n_layers=2, leak=leak)
    x = np.random.default_rng(seed).standard_normal((10, d)) * 5
    assert np.all(np.abs(run_reservoir(cfg, x)) <= 1 + 1e-10)


def test_serialization_reproduces_trace_bitwise():
    cfg = QrcConfig.from_seed(4)
    clone = config_from_dict(json.loads(json.dumps(cfg.to_dict())))
    x = np.random.default_rng(0).standard_normal((30, 1))
    assert np.array_equal(run_reservoir(cfg, x), run_reservoir(clone, x))
    esn = EsnConfig.from_seed(4, 1)
    esn_clone = config_from_dict(json.loads(json.dumps(esn.to_dict())))
    assert np.array_equal(run_reservoir(esn, x), run_reservoir(esn_clone, x))


def test_config_validation():
    with pytest.raises(ReservoirError):
        QrcConfig.from_seed(0, leak=1.5)
    with pytest.raises(ReservoirError):
        QrcConfig.from_seed(0, reg=0.0)
    cfg = QrcConfig.from_seed(0, n_qubits=2, n_layers=1)
    with pytest.raises(ReservoirError):
        QrcConfig(2, 1, 0.5, cfg.weights, cfg.bias, cfg.angles, RandomProjection(np.ones((4, 3))))
    with pytest.raises(ReservoirError):
        run_reservoir(cfg, np.zeros((0, 1)))


def test_degenerate_projection_reports_step():
    base = QrcConfig.from_seed(0, n_qubits=2, n_layers=1, lift_kind="identity")
    cfg = QrcConfig(2, 1, 1.0, base.weights, np.zeros(2), base.angles, RandomProjection(np.eye(4, 2)),
                    lift_kind="identity")
    with pytest.raises(ReservoirError, match="step 2"):
        run_reservoir(cfg, np.array([[1.0], [2.0], [0.0], [1.0]]))


def test_fading_memory_report():
    x = np.random.default_rng(0).standard_normal((60, 1))
    r0 = np.random.default_rng(1).uniform(-1, 1, 12)
    gap_q = fading_memory_gap(QrcConfig.from_seed(0), x, r0)
    gap_c = fading_memory_gap(EsnConfig.from_seed(0, 1), x, np.random.default_rng(1).uniform(-1, 1, 12))
    print(f"fading-memory gap at t=50: quantum {gap_q:.3e}, classical {gap_c:.3e}")
    assert np.isfinite(gap_q)
    assert gap_c < 1e-2


# ---------------------------------------------------------------- echo state network


def test_esn_zero_weights():
    cfg = EsnConfig(np.zeros((3, 3)), np.zeros((3, 1)), np.zeros(3), leak=0.3)
    prev = np.array([0.5, -1.0, 2.0])
    assert np.allclose(esn_step(cfg, prev, [4.0]), 0.7 * prev)


def test_esn_memoryless_with_full_leak():
    W_in = np.array([[0.5], [-1.0]])
    b = np.array([0.1, 0.2])
    cfg = EsnConfig(np.zeros((2, 2)), W_in, b, leak=1.0)
    assert np.allclose(esn_step(cfg, np.array([9.0, -9.0]), [0.3]), np.tanh(W_in[:, 0] * 0.3 + b))
    R = run_reservoir(cfg, np.array([[0.3], [0.3]]))
    assert np.array_equal(R[0], R[1])


def test_esn_scalar_oracle():
    cfg = EsnConfig.from_seed(2, 2, n_units=5)
    xs = np.random.default_rng(3).standard_normal((5, 2))
    R = run_reservoir(cfg, xs)
    s = [0.0] * 5
    for t, x in enumerate(xs):
        pre = [sum(cfg.W_res[i, j] * s[j] for j in range(5)) + sum(cfg.W_in[i, j] * x[j] for j in range(2))
               + cfg.bias[i] for i in range(5)]
        s = [(1 - cfg.leak) * s[i] + cfg.leak * math.tanh(pre[i]) for i in range(5)]
        assert np.max(np.abs(R[t] - s)) < 1e-12


@pytest.mark.parametrize("rho", [0.5, 0.9, 1.2])
def test_esn_spectral_radius(rho):
    cfg = EsnConfig.from_seed(7, 1, n_units=12, rho=rho)
    assert abs(cfg.spectral_radius() - rho) < 1e-6


def test_esn_dimension_mismatch():
    cfg = EsnConfig.from_seed(0, 2)
    with pytest.raises(ReservoirError):
        esn_step(cfg, np.zeros(12), [1.0])


# ---------------------------------------------------------------- ridge readout


def test_ridge_identity_design():
    Y = np.random.default_rng(0).standard_normal((12, 2))
    W = fit_ridge(ReservoirTrace(np.eye(12), Y), 1e-12)
    assert np.max(np.abs(W - Y)) < 1e-8


def test_ridge_shrinkage():
    rng = np.random.default_rng(1)
    R, Y = rng.standard_normal((30, 4)), rng.standard_normal((30, 1))
    W = fit_ridge(R, 1e12, Y)
    assert np.linalg.norm(W) < 1e-6 * np.linalg.norm(R.T @ Y)


def test_ridge_matches_cholesky_oracle():
    rng = np.random.default_rng(50)
    R, Y = rng.standard_normal((50, 6)), rng.standard_normal((50, 1))
    W = fit_ridge(ReservoirTrace(R, Y), 0.1)
    assert np.max(np.abs(W - cholesky_oracle(R, Y, 0.1))) < 1e-9


def test_ridge_normal_equations():
    rng = np.random.default_rng(8)
    for _ in range(20):
        R = rng.uniform(-1, 1, (int(rng.integers(10, 80)), 12))
        Y = rng.standard_normal((R.shape[0], 2))
        reg = 10 ** rng.uniform(-6, 2)
        W = fit_ridge(R, reg, Y)
        lhs = (R.T @ R + reg * np.eye(12)) @ W
        assert np.linalg.norm(lhs - R.T @ Y) / np.linalg.norm(R.T @ Y) < 1e-8


def test_ridge_errors():
    with pytest.raises(ReservoirError, match="row count"):
        ReservoirTrace(np.zeros((5, 3)), np.zeros((4, 1)))
    with pytest.raises(ReservoirError):
        fit_ridge(np.eye(3), 0.0, np.ones(3))


def test_predict_linear():
    rng = np.random.default_rng(2)
    W = rng.standard_normal((6, 2))
    assert np.array_equal(predict_linear(np.zeros((6, 2)), rng.standard_normal(6)), np.zeros(2))
    assert np.array_equal(predict_linear(W, np.eye(6)[3]), W[3])
    r = rng.standard_normal(6)
    loop = [sum(r[i] * W[i, j] for i in range(6)) for j in range(2)]
    assert np.allclose(predict_linear(W, r), loop, atol=1e-14)
    with pytest.raises(ReservoirError):
        predict_linear(W, np.ones(5))


def test_trace_csv(tmp_path):
    R = np.random.default_rng(0).uniform(-1, 1, (4, 12))
    Y = np.arange(4.0)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, R, Y)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t"] + [f"r_{j}" for j in range(1, 13)] + ["y_1"]
    assert len(rows) == 5
    assert np.array_equal(np.array(rows[1:], dtype=float)[:, 1:13], R)


# ---------------------------------------------------------------- MLP readout


def test_zero_mlp_outputs_bias():
    mlp = Mlp(2, 1, hidden=4, init="zero")
    mlp.params[-1] = 0.37
    assert np.array_equal(mlp(np.random.default_rng(0).standard_normal((5, 2))), np.full((5, 1), 0.37))


def test_mlp_learning_rate_zero():
    X = np.random.default_rng(0).standard_normal((10, 1))
    mlp, losses = fit_nn_readout(X, 2 * X, MlpConfig(learning_rate=0.0, epochs=4, seed=3))
    assert np.array_equal(mlp.params, Mlp(1, 1, 16, seed=3).params)
    assert len(set(losses)) == 1


def test_mlp_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    X, Y = rng.standard_normal((4, 2)), rng.standard_normal((4, 1))
    mlp = Mlp(2, 1, hidden=5, seed=1)
    mlp.params += 0.3 * rng.standard_normal(mlp.n_params)
    _, g = mlp.loss_and_grad(X, Y)
    fd = np.empty_like(g)
    for j in range(g.size):
        p = mlp.params.copy()
        mlp.params = p.copy()
        mlp.params[j] += 1e-6
        lp = mlp.loss_and_grad(X, Y)[0]
        mlp.params = p.copy()
        mlp.params[j] -= 1e-6
        lm = mlp.loss_and_grad(X, Y)[0]
        mlp.params = p
        fd[j] = (lp - lm) / 2e-6
    assert np.max(np.abs(g - fd)) < 1e-4


def test_mlp_training_reduces_loss():
    X = np.linspace(-1, 1, 40)[:, None]
    _, losses = fit_nn_readout(X, np.sin(2 * X), MlpConfig(epochs=300))
    assert np.all(np.isfinite(losses)) and losses[-1] < 0.1 * losses[0]
    with pytest.raises(ReservoirError):
        fit_nn_readout(np.zeros((0, 1)), np.zeros((0, 1)))


# ---------------------------------------------------------------- pipeline


@pytest.mark.parametrize("make", [lambda: QrcConfig.from_seed(0), lambda: EsnConfig.from_seed(0, 1)])
def test_forecaster_alignment_and_washout(make):
    cfg = make()
    series = np.sin(np.arange(40) / 3.0)
    data = build_lags(series, 4)
    fit = fit_reservoir_forecaster(cfg, series, data, washout=5)
    R = run_reservoir(cfg, series[:, None])
    assert np.array_equal(fit.features, R[np.arange(data.n_rows) + 3])
    rows = [j for j in range(data.split_index) if j + 3 >= 5]
    assert np.allclose(fit.W_out, fit_ridge(R[np.array(rows) + 3], cfg.reg, data.Y[rows]))
    assert fit.n_trained == 12
    nn = fit_reservoir_forecaster(cfg, series, data, mlp_cfg=MlpConfig(epochs=20))
    assert nn.pred.shape == data.Y.shape and nn.n_trained == 12 + nn.mlp.n_params
    assert np.array_equal(nn.lr_pred, fit.lr_pred)
