"""Quantum reservoir computing, echo state networks and their readouts.

The quantum reservoir re-prepares its state every step: the previous step's
Pauli expectations are compressed to one value per qubit, blended with the new
input, lifted, projected to ``2**n`` amplitudes and evolved through a fixed
random circuit. Only the readouts (ridge regression, optionally followed by a
small MLP) are trained.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from . import qsim
from .data import atomic_write_text
from .encoding import EncodingError, RandomProjection, amplitude_encode, lift_and_project, lifted_dim
from .train import Optimizer, OptimizerConfig, check_loss


class ReservoirError(ValueError):
    pass


@dataclass(frozen=True)
class QrcConfig:
    n_qubits: int
    n_layers: int
    leak: float
    weights: tuple
    bias: np.ndarray = field(repr=False)
    angles: np.ndarray = field(repr=False)
    proj: RandomProjection = field(repr=False)
    reg: float = 1e-2
    lift_kind: str = "tanh-affine"
    seed: int | None = None
    input_scale: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.leak <= 1.0:
            raise ReservoirError(f"leak rate must lie in [0, 1], got {self.leak}")
        if self.reg <= 0:
            raise ReservoirError(f"ridge regularizer must be positive, got {self.reg}")
        bias = np.array(self.bias, dtype=float).reshape(-1)
        angles = np.array(self.angles, dtype=float).reshape(self.n_layers, self.n_qubits, 3)
        if bias.shape[0] != self.n_qubits:
            raise ReservoirError("bias length must equal the qubit count")
        if self.proj.n_qubits != self.n_qubits or self.proj.in_dim != lifted_dim(self.n_qubits, self.lift_kind):
            raise ReservoirError("projection shape does not match qubit count and lift")
        bias.setflags(write=False)
        angles.setflags(write=False)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "_circuit", qsim.reservoir_circuit(angles))

    @classmethod
    def from_seed(cls, seed, n_qubits=4, n_layers=3, leak=0.5, weights=(1 / 3, 1 / 3, 1 / 3),
                  bias_range=0.1, reg=1e-2, lift_kind="tanh-affine", input_scale=0.1):
        rng = np.random.default_rng(seed)
        angles = rng.uniform(0.0, 2.0 * np.pi, (n_layers, n_qubits, 3))
        bias = rng.uniform(-bias_range, bias_range, n_qubits)
        proj_seed = int(rng.integers(2**62))
        proj = RandomProjection.from_seed(n_qubits, lifted_dim(n_qubits, lift_kind), proj_seed)
        return cls(n_qubits, n_layers, leak, weights, bias, angles, proj, reg, lift_kind, seed, input_scale)

    @property
    def circuit(self):
        return self._circuit

    @property
    def n_features(self):
        return 3 * self.n_qubits

    def to_dict(self):
        return {
            "kind": "qrc", "n_qubits": self.n_qubits, "n_layers": self.n_layers, "leak": self.leak,
            "weights": list(self.weights), "bias": self.bias.tolist(), "angles": self.angles.tolist(),
            "proj": self.proj.matrix.tolist(), "proj_seed": self.proj.seed, "reg": self.reg,
            "lift_kind": self.lift_kind, "seed": self.seed, "input_scale": self.input_scale,
        }

    @classmethod
    def from_dict(cls, d):
        proj = RandomProjection(np.array(d["proj"], dtype=float), d.get("proj_seed"))
        return cls(d["n_qubits"], d["n_layers"], d["leak"], tuple(d["weights"]), np.array(d["bias"]),
                   np.array(d["angles"]), proj, d["reg"], d["lift_kind"], d.get("seed"),
                   d.get("input_scale", 0.1))


@dataclass(frozen=True)
class EsnConfig:
    W_res: np.ndarray = field(repr=False)
    W_in: np.ndarray = field(repr=False)
    bias: np.ndarray = field(repr=False)
    leak: float = 0.5
    reg: float = 1e-2
    rho: float | None = None
    seed: int | None = None

    def __post_init__(self):
        W_res = np.array(self.W_res, dtype=float)
        W_in = np.array(self.W_in, dtype=float)
        bias = np.array(self.bias, dtype=float).reshape(-1)
        n = W_res.shape[0]
        if W_res.shape != (n, n) or W_in.ndim != 2 or W_in.shape[0] != n or bias.shape[0] != n:
            raise ReservoirError("inconsistent ESN weight shapes")
        if not 0.0 <= self.leak <= 1.0:
            raise ReservoirError(f"leak rate must lie in [0, 1], got {self.leak}")
        if self.reg <= 0:
            raise ReservoirError(f"ridge regularizer must be positive, got {self.reg}")
        for a in (W_res, W_in, bias):
            a.setflags(write=False)
        object.__setattr__(self, "W_res", W_res)
        object.__setattr__(self, "W_in", W_in)
        object.__setattr__(self, "bias", bias)

    @classmethod
    def from_seed(cls, seed, input_size, n_units=12, rho=0.9, leak=0.5, reg=1e-2, input_scale=1.0, bias_range=0.1):
        rng = np.random.default_rng(seed)
        W = rng.uniform(-1.0, 1.0, (n_units, n_units))
        radius = np.max(np.abs(np.linalg.eigvals(W)))
        W_res = W * (rho / radius)
        W_in = input_scale * rng.uniform(-1.0, 1.0, (n_units, input_size))
        bias = rng.uniform(-bias_range, bias_range, n_units)
        return cls(W_res, W_in, bias, leak, reg, rho, seed)

    @property
    def n_units(self):
        return self.W_res.shape[0]

    @property
    def n_features(self):
        return self.n_units

    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.W_res))))

    def to_dict(self):
        return {
            "kind": "esn", "W_res": self.W_res.tolist(), "W_in": self.W_in.tolist(), "bias": self.bias.tolist(),
            "leak": self.leak, "reg": self.reg, "rho": self.rho, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["W_res"]), np.array(d["W_in"]), np.array(d["bias"]), d["leak"], d["reg"],
                   d.get("rho"), d.get("seed"))


def config_from_dict(d):
    return QrcConfig.from_dict(d) if d["kind"] == "qrc" else EsnConfig.from_dict(d)


# ---------------------------------------------------------------------------
# stepping


def compress_memory(cfg: QrcConfig, prev_r):
    """Per-qubit weighted sum of the previous <X>, <Y>, <Z>."""
    r = np.asarray(prev_r, dtype=float).reshape(3, cfg.n_qubits)
    wx, wy, wz = cfg.weights
    return wx * r[0] + wy * r[1] + wz * r[2]


def qrc_mix(cfg: QrcConfig, prev_r, x_t):
    """Leaky blend ``leak * (s * x_wrapped + b) + (1 - leak) * memory``.

    ``s`` is ``cfg.input_scale``; keeping the drive small relative to the
    lift's constant term keeps the feature map close to its linear regime.
    """
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    if x_t.shape[0] == 0:
        raise ReservoirError("empty input vector")
    wrapped = cfg.input_scale * x_t[np.arange(cfg.n_qubits) % x_t.shape[0]] + cfg.bias
    return cfg.leak * wrapped + (1.0 - cfg.leak) * compress_memory(cfg, prev_r)


def qrc_step(cfg: QrcConfig, prev_r, x_t, t=None) -> np.ndarray:
    """One reservoir step; returns ``[<X_1..n>, <Y_1..n>, <Z_1..n>]``."""
    v = qrc_mix(cfg, prev_r, x_t)
    a = lift_and_project(v, cfg.proj, cfg.lift_kind)
    try:
        state = amplitude_encode(a)
    except EncodingError as exc:
        where = f" at step {t}" if t is not None else ""
        raise ReservoirError(f"degenerate reservoir input{where}: {exc}") from None
    out = qsim.run_circuit(state, cfg.circuit)
    return qsim.pauli_expectations(out).reshape(-1)


def esn_step(cfg: EsnConfig, prev, x_t) -> np.ndarray:
    prev = np.asarray(prev, dtype=float)
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    if prev.shape[0] != cfg.n_units or x_t.shape[0] != cfg.W_in.shape[1]:
        raise ReservoirError(
            f"dimension mismatch: state {prev.shape[0]} vs {cfg.n_units}, input {x_t.shape[0]} vs {cfg.W_in.shape[1]}"
        )
    pre = cfg.W_res @ prev + cfg.W_in @ x_t + cfg.bias
    return (1.0 - cfg.leak) * prev + cfg.leak * np.tanh(pre)


def run_reservoir(cfg, inputs, r0=None) -> np.ndarray:
    """Drive the reservoir with ``(T, d_x)`` inputs; row ``t`` is the state after input ``t``."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    if inputs.shape[0] < 1:
        raise ReservoirError("need at least one time step")
    width = cfg.n_features
    r = np.zeros(width) if r0 is None else np.asarray(r0, dtype=float).copy()
    out = np.empty((inputs.shape[0], width))
    for t in range(inputs.shape[0]):
        if isinstance(cfg, QrcConfig):
            r = qrc_step(cfg, r, inputs[t], t)
        else:
            r = esn_step(cfg, r, inputs[t])
        out[t] = r
    return out


def fading_memory_gap(cfg, inputs, r0, t=50):
    """Distance at step ``t`` between runs started from zero and from ``r0``."""
    a = run_reservoir(cfg, inputs[: t + 1])
    b = run_reservoir(cfg, inputs[: t + 1], r0=r0)
    return float(np.linalg.norm(a[t] - b[t]))


# ---------------------------------------------------------------------------
# linear readout


@dataclass
class ReservoirTrace:
    R: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.Y.ndim == 1:
            self.Y = self.Y[:, None]
        if self.R.shape[0] != self.Y.shape[0]:
            raise ReservoirError(f"row count mismatch: R has {self.R.shape[0]} rows, Y has {self.Y.shape[0]}")


def fit_ridge(trace, reg=None, Y=None) -> np.ndarray:
    """Ridge readout ``(R^T R + reg I)^{-1} R^T Y`` via a Cholesky solve.

    Accepts a :class:`ReservoirTrace` or ``(R, reg, Y)`` arrays.
    """
    if not isinstance(trace, ReservoirTrace):
        trace = ReservoirTrace(trace, Y)
    if reg is None or reg <= 0:
        raise ReservoirError(f"ridge regularizer must be positive, got {reg}")
    R, Y = trace.R, trace.Y
    gram = R.T @ R + reg * np.eye(R.shape[1])
    return sla.cho_solve(sla.cho_factor(gram, lower=True), R.T @ Y)


def predict_linear(W_out, r) -> np.ndarray:
    W_out = np.asarray(W_out, dtype=float)
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != W_out.shape[0]:
        raise ReservoirError(f"feature width {r.shape[-1]} does not match readout rows {W_out.shape[0]}")
    return r @ W_out


def write_trace_csv(path, R, Y=None):
    R = np.asarray(R, dtype=float)
    Y = np.zeros((R.shape[0], 0)) if Y is None else np.asarray(Y, dtype=float).reshape(R.shape[0], -1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"r_{j + 1}" for j in range(R.shape[1])] + [f"y_{j + 1}" for j in range(Y.shape[1])])
    for t in range(R.shape[0]):
        w.writerow([t] + [repr(float(v)) for v in R[t]] + [repr(float(v)) for v in Y[t]])
    atomic_write_text(path, buf.getvalue())


# ---------------------------------------------------------------------------
# MLP readout


@dataclass(frozen=True)
class MlpConfig:
    hidden: int = 16
    learning_rate: float = 0.01
    epochs: int = 500
    seed: int = 0
    init: str = "random"


class Mlp:
    """One tanh hidden layer, linear output."""

    def __init__(self, n_in, n_out, hidden=16, seed=0, init="random"):
        self.n_in, self.n_out, self.hidden = n_in, n_out, hidden
        n = hidden * n_in + hidden + n_out * hidden + n_out
        if init == "zero":
            self.params = np.zeros(n)
        else:
            rng = np.random.default_rng(seed)
            self.params = np.concatenate([
                rng.standard_normal(hidden * n_in) * np.sqrt(1.0 / n_in),
                np.zeros(hidden),
                rng.standard_normal(n_out * hidden) * np.sqrt(1.0 / hidden),
                np.zeros(n_out),
            ])

    def _views(self):
        h, i, o = self.hidden, self.n_in, self.n_out
        p = self.params
        W1 = p[: h * i].reshape(h, i)
        b1 = p[h * i: h * i + h]
        W2 = p[h * i + h: h * i + h + o * h].reshape(o, h)
        b2 = p[h * i + h + o * h:]
        return W1, b1, W2, b2

    @property
    def n_params(self):
        return self.params.shape[0]

    def __call__(self, X):
        W1, b1, W2, b2 = self._views()
        return np.tanh(np.asarray(X) @ W1.T + b1) @ W2.T + b2

    def loss_and_grad(self, X, Y):
        W1, b1, W2, b2 = self._views()
        a = np.tanh(X @ W1.T + b1)
        err = a @ W2.T + b2 - Y
        loss = float(np.mean(err * err))
        d = 2.0 * err / err.size
        dW2 = d.T @ a
        db2 = d.sum(axis=0)
        da = (d @ W2) * (1.0 - a * a)
        dW1 = da.T @ X
        db1 = da.sum(axis=0)
        return loss, np.concatenate([dW1.reshape(-1), db1, dW2.reshape(-1), db2])


def fit_nn_readout(inputs, targets, cfg: MlpConfig = MlpConfig()):
    """Train an :class:`Mlp` on ``inputs -> targets`` by full-batch Adam. Returns ``(mlp, losses)``."""
    X = np.asarray(inputs, dtype=float)
    Y = np.asarray(targets, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] == 0 or X.shape[0] != Y.shape[0]:
        raise ReservoirError("need non-empty, equally long inputs and targets")
    mlp = Mlp(X.shape[1], Y.shape[1], cfg.hidden, cfg.seed, cfg.init)
    opt = Optimizer(OptimizerConfig("adam", cfg.learning_rate, cfg.epochs), mlp.params)
    losses = []
    for epoch in range(cfg.epochs):
        loss, grad = mlp.loss_and_grad(X, Y)
        check_loss(loss, epoch)
        losses.append(loss)
        mlp.params = opt.step(mlp.params, grad)
    return mlp, losses


# ---------------------------------------------------------------------------
# forecasting pipeline


@dataclass
class ReservoirFit:
    W_out: np.ndarray
    features: np.ndarray
    lr_pred: np.ndarray
    pred: np.ndarray
    mlp: Mlp | None = None
    losses: list = field(default_factory=list)

    @property
    def n_trained(self):
        return self.W_out.size + (self.mlp.n_params if self.mlp is not None else 0)


def fit_reservoir_forecaster(cfg, series, data, washout=5, mlp_cfg: MlpConfig | None = None) -> ReservoirFit:
    """Fit LR (and optionally LR -> NN) readouts aligned with a lag dataset.

    The reservoir is driven by the raw channel vectors of ``series`` (shape
    ``(T, channels)``). Lag row ``j`` uses the state after input
    ``j + k - 1`` (the newest value in its window). Training rows before
    ``washout`` reservoir steps are dropped.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    R_all = run_reservoir(cfg, series)
    step = np.arange(data.n_rows) + data.k - 1
    feats = R_all[step]
    train = np.arange(data.split_index)
    train = train[step[train] >= washout]
    if train.shape[0] == 0:
        raise ReservoirError("no training rows left after washout")
    W_out = fit_ridge(ReservoirTrace(feats[train], data.Y[train]), cfg.reg)
    lr_pred = predict_linear(W_out, feats)
    if mlp_cfg is None:
        return ReservoirFit(W_out, feats, lr_pred, lr_pred)
    mlp, losses = fit_nn_readout(lr_pred[train], data.Y[train], mlp_cfg)
    return ReservoirFit(W_out, feats, lr_pred, mlp(lr_pred), mlp, losses)
