"""Classical LSTM and quantum LSTM cells with a shared training loop.

Both cells implement the same recurrence

    f = sigma(a_f), i = sigma(a_i), g = tanh(a_c), o = sigma(a_o)
    c_t = f * c_{t-1} + i * g,  h_t = o * tanh(c_t)

and differ in how the gate pre-activations ``a_k`` are produced from
``v_t = [h_{t-1}, x_t]``: an affine map for the LSTM, and for the QLSTM an
amplitude-encoded ``W_enc v_t + b_enc`` fed through one variational circuit per gate,
measured as per-qubit ``<Z>``.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import qsim
from .encoding import EncodingError, amplitude_encode
from .train import NumericalError, Optimizer, OptimizerConfig, check_loss

GATES = ("f", "i", "c", "o")


def sigmoid(x):
    return expit(x)


@dataclass
class RecurrentState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden):
        return cls(np.zeros(hidden), np.zeros(hidden))


def _activate(pre):
    """Gate activations from the four stacked pre-activations ``(4, ..., H)``."""
    return sigmoid(pre[0]), sigmoid(pre[1]), np.tanh(pre[2]), sigmoid(pre[3])


def _cell_update(state_c, pre):
    f, i, g, o = _activate(pre)
    c = f * state_c + i * g
    h = o * np.tanh(c)
    return h, c, (f, i, g, o)


class Readout:
    """Affine map from the final hidden state to the output channels."""

    def __init__(self, hidden, n_out, seed=0, scale=0.1):
        rng = np.random.default_rng(seed)
        self.hidden = hidden
        self.n_out = n_out
        self.params = np.concatenate([scale * rng.standard_normal(n_out * hidden), np.zeros(n_out)])

    @property
    def W(self):
        return self.params[: self.n_out * self.hidden].reshape(self.n_out, self.hidden)

    @property
    def b(self):
        return self.params[self.n_out * self.hidden:]

    @property
    def n_params(self):
        return self.params.shape[0]

    def __call__(self, h):
        return h @ self.W.T + self.b

    def copy(self):
        new = Readout.__new__(Readout)
        new.hidden, new.n_out, new.params = self.hidden, self.n_out, self.params.copy()
        return new


class LstmCell:
    """Classical LSTM cell; weights ``W[k]`` are ``H x (H + D)``."""

    kind = "lstm"

    def __init__(self, input_size, hidden_size, seed=0, scale=0.1):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.seed = seed
        rng = np.random.default_rng(seed)
        n_w = 4 * hidden_size * (hidden_size + input_size)
        self.params = np.concatenate([scale * rng.standard_normal(n_w), np.zeros(4 * hidden_size)])

    @property
    def W(self):
        H, D = self.hidden_size, self.input_size
        return self.params[: 4 * H * (H + D)].reshape(4, H, H + D)

    @property
    def b(self):
        H, D = self.hidden_size, self.input_size
        return self.params[4 * H * (H + D):].reshape(4, H)

    @property
    def n_params(self):
        return self.params.shape[0]

    def config(self):
        return {"kind": self.kind, "input_size": self.input_size, "hidden_size": self.hidden_size, "seed": self.seed}

    def copy(self):
        new = LstmCell.__new__(LstmCell)
        new.__dict__.update(self.__dict__)
        new.params = self.params.copy()
        return new

    def preactivations(self, v):
        return np.einsum("khj,...j->k...h", self.W, v) + self.b.reshape((4,) + (1,) * (v.ndim - 1) + (-1,))

    def forward_batch(self, seqs):
        """Run the recurrence on ``(B, T, D)`` inputs; returns ``(h_T, cache)``."""
        B, T, _ = seqs.shape
        h = np.zeros((B, self.hidden_size))
        c = np.zeros((B, self.hidden_size))
        cache = []
        for t in range(T):
            v = np.concatenate([h, seqs[:, t, :]], axis=1)
            c_prev = c
            h, c, acts = _cell_update(c_prev, self.preactivations(v))
            cache.append((v, c_prev, c, acts))
        return h, cache

    def backward_batch(self, cache, dh):
        H = self.hidden_size
        dW = np.zeros_like(self.W)
        db = np.zeros_like(self.b)
        W = self.W
        dc = np.zeros_like(dh)
        for v, c_prev, c, (f, i, g, o) in reversed(cache):
            tc = np.tanh(c)
            dc = dc + dh * o * (1.0 - tc * tc)
            da = np.stack([
                dc * c_prev * f * (1.0 - f),
                dc * g * i * (1.0 - i),
                dc * i * (1.0 - g * g),
                dh * tc * o * (1.0 - o),
            ])
            dW += np.einsum("kbh,bj->khj", da, v)
            db += da.sum(axis=1)
            dv = np.einsum("kbh,khj->bj", da, W)
            dh = dv[:, :H]
            dc = dc * f
        return np.concatenate([dW.reshape(-1), db.reshape(-1)])


ENCODER_BIAS_KINDS = ("fixed", "trainable", "none")


class QlstmCell:
    """Quantum LSTM cell with ``hidden_size == n_qubits``.

    ``W_enc`` maps ``[h, x]`` to ``2**n_qubits`` amplitudes; each of the four
    gates owns an independent parameter vector for a shared circuit layout.

    A state and its negation give the same measurements, so a purely linear
    encoder would make every gate an even function of ``[h, x]``; at ``t = 0``
    (where ``h = 0``) the cell could not tell ``x`` from ``-x``. The encoder
    therefore adds an offset, ``e = W_enc [h, x] + b_enc``:

    * ``encoder_bias="fixed"`` (default): ``b_enc`` is a seeded Gaussian vector
      (std ``bias_scale``) that is never trained, so the trainable parameter
      count is the same as for the plain linear encoder;
    * ``"trainable"``: ``b_enc`` is an extra trainable column of ``W_enc``;
    * ``"none"``: no offset.
    """

    kind = "qlstm"

    def __init__(self, input_size, n_qubits=4, n_layers=2, seed=0, ansatz="hry", enc_scale=0.1,
                 encoder_bias="fixed", bias_scale=1.0):
        if encoder_bias not in ENCODER_BIAS_KINDS:
            raise ValueError(f"encoder_bias must be one of {ENCODER_BIAS_KINDS}, got {encoder_bias!r}")
        self.input_size = input_size
        self.encoder_bias = encoder_bias
        self.bias_scale = float(bias_scale)
        self.n_qubits = n_qubits
        self.hidden_size = n_qubits
        self.n_layers = n_layers
        self.ansatz = ansatz
        self.seed = seed
        self.circuit = qsim.qlstm_ansatz(n_qubits, n_layers, ansatz)
        rng = np.random.default_rng(seed)
        W0 = enc_scale * rng.standard_normal((1 << n_qubits, n_qubits + input_size))
        # The offset is larger than the data weights so the normalized encoding
        # starts close to its linear regime.
        b0 = self.bias_scale * rng.standard_normal(1 << n_qubits)
        thetas = rng.uniform(-np.pi, np.pi, 4 * self.circuit.n_params)
        if encoder_bias == "trainable":
            W0 = np.column_stack([W0, b0])
        self.b_enc = b0 if encoder_bias == "fixed" else np.zeros(1 << n_qubits)
        self.b_enc.setflags(write=False)
        self.params = np.concatenate([W0.reshape(-1), thetas])
        self._obs_key = None

    @property
    def enc_dim(self):
        return 1 << self.n_qubits

    @property
    def enc_in(self):
        """Encoder input width: ``H + D``, plus one for a trainable bias column."""
        return self.hidden_size + self.input_size + int(self.encoder_bias == "trainable")

    @property
    def W_enc(self):
        n = self.enc_dim * self.enc_in
        return self.params[:n].reshape(self.enc_dim, self.enc_in)

    @property
    def thetas(self):
        n = self.enc_dim * self.enc_in
        return self.params[n:].reshape(4, self.circuit.n_params)

    @property
    def n_params(self):
        return self.params.shape[0]

    def config(self):
        return {
            "kind": self.kind, "input_size": self.input_size, "n_qubits": self.n_qubits,
            "n_layers": self.n_layers, "ansatz": self.ansatz, "seed": self.seed,
            "encoder_bias": self.encoder_bias, "bias_scale": self.bias_scale,
        }

    def copy(self):
        new = QlstmCell.__new__(QlstmCell)
        new.__dict__.update(self.__dict__)
        new.params = self.params.copy()
        new._obs_key = None
        return new

    def observables(self):
        """``(4, Q, 2**Q, 2**Q)`` Heisenberg Z observables, cached per parameter value."""
        key = self.thetas.tobytes()
        if self._obs_key != key:
            self._obs = np.stack([qsim.z_observables(self.circuit, th) for th in self.thetas])
            self._obs_key = key
        return self._obs

    def observable_grads(self):
        """Parameter-shift derivatives, ``(4, P, Q, 2**Q, 2**Q)``."""
        return np.stack([qsim.z_observables_shift_grad(self.circuit, th) for th in self.thetas])

    def encode(self, v, t=None):
        e = v @ self.W_enc.T + self.b_enc
        norm = np.linalg.norm(e, axis=-1, keepdims=True)
        if np.any(norm == 0.0):
            where = f" at time step {t}" if t is not None else ""
            raise EncodingError(f"encoded vector is all zeros{where}")
        return e / norm, norm

    def forward_batch(self, seqs):
        B, T, _ = seqs.shape
        obs = self.observables()
        h = np.zeros((B, self.hidden_size))
        c = np.zeros((B, self.hidden_size))
        cache = []
        for t in range(T):
            parts = [h, seqs[:, t, :]] + ([np.ones((B, 1))] if self.encoder_bias == "trainable" else [])
            v = np.concatenate(parts, axis=1)
            psi, norm = self.encode(v, t)
            pre = np.einsum("bi,kqij,bj->kbq", psi, obs, psi)
            c_prev = c
            h, c, acts = _cell_update(c_prev, pre)
            cache.append((v, psi, norm, c_prev, c, acts))
        return h, cache

    def backward_batch(self, cache, dh):
        H = self.hidden_size
        obs = self.observables()
        dobs = self.observable_grads()
        W_enc = self.W_enc
        dW_enc = np.zeros_like(W_enc)
        # sum_t sum_b da[k, b, q] psi_b psi_b^T, contracted with dobs at the end
        moments = np.zeros((4, H, self.enc_dim, self.enc_dim))
        dc = np.zeros_like(dh)
        for v, psi, norm, c_prev, c, (f, i, g, o) in reversed(cache):
            tc = np.tanh(c)
            dc = dc + dh * o * (1.0 - tc * tc)
            da = np.stack([
                dc * c_prev * f * (1.0 - f),
                dc * g * i * (1.0 - i),
                dc * i * (1.0 - g * g),
                dh * tc * o * (1.0 - o),
            ])
            moments += np.einsum("kbq,bi,bj->kqij", da, psi, psi)
            dpsi = 2.0 * np.einsum("kbq,kqij,bj->bi", da, obs, psi)
            de = (dpsi - psi * np.sum(psi * dpsi, axis=1, keepdims=True)) / norm
            dW_enc += de.T @ v
            dh = (de @ W_enc)[:, :H]
            dc = dc * f
        dtheta = np.einsum("kqij,kpqij->kp", moments, dobs)
        return np.concatenate([dW_enc.reshape(-1), dtheta.reshape(-1)])


def lstm_step(cell: LstmCell, state: RecurrentState, x) -> RecurrentState:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != cell.input_size or state.h.shape[0] != cell.hidden_size:
        raise ValueError(
            f"dimension mismatch: input {x.shape[0]} (expected {cell.input_size}), "
            f"hidden {state.h.shape[0]} (expected {cell.hidden_size})"
        )
    v = np.concatenate([state.h, x])
    h, c, _ = _cell_update(state.c, cell.preactivations(v))
    return RecurrentState(h, c)


def qlstm_gate_outputs(cell: QlstmCell, state: RecurrentState, x, t=None):
    """Per-gate measurement vectors ``z[k]`` via explicit state preparation and simulation."""
    extra = [[1.0]] if cell.encoder_bias == "trainable" else []
    v = np.concatenate([state.h, np.asarray(x, dtype=float).reshape(-1)] + extra)
    e = cell.W_enc @ v + cell.b_enc
    try:
        psi = amplitude_encode(e)
    except EncodingError as exc:
        where = f" at time step {t}" if t is not None else ""
        raise EncodingError(f"{exc}{where}") from None
    z = np.empty((4, cell.n_qubits))
    for k in range(4):
        out = qsim.run_circuit(psi, cell.circuit, cell.thetas[k])
        z[k] = [qsim.expect_pauli(out, "Z", q) for q in range(cell.n_qubits)]
    return z


def qlstm_step(cell: QlstmCell, state: RecurrentState, x, t=None) -> RecurrentState:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != cell.input_size or state.h.shape[0] != cell.hidden_size:
        raise ValueError(
            f"dimension mismatch: input {x.shape[0]} (expected {cell.input_size}), "
            f"hidden {state.h.shape[0]} (expected {cell.hidden_size})"
        )
    z = qlstm_gate_outputs(cell, state, x, t)
    h, c, _ = _cell_update(state.c, z)
    return RecurrentState(h, c)


def forecast_sequence(cell, readout: Readout, seqs) -> np.ndarray:
    """Readout of the final hidden state for each ``(T, D)`` window in ``seqs``."""
    seqs = np.asarray(seqs, dtype=float)
    if seqs.ndim == 2:
        seqs = seqs[None]
    if seqs.shape[0] == 0 or seqs.shape[1] == 0:
        raise ValueError("empty sequence")
    h, _ = cell.forward_batch(seqs)
    return readout(h)


def loss_and_grad(cell, readout: Readout, seqs, Y):
    """Mean squared error over all rows and channels and its full gradient."""
    h, cache = cell.forward_batch(seqs)
    pred = readout(h)
    err = pred - Y
    loss = float(np.mean(err * err))
    dpred = 2.0 * err / err.size
    g_read = np.concatenate([(dpred.T @ h).reshape(-1), dpred.sum(axis=0)])
    g_cell = cell.backward_batch(cache, dpred @ readout.W)
    return loss, np.concatenate([g_cell, g_read])


def _set_flat(cell, readout, flat):
    n = cell.n_params
    cell.params[:] = flat[:n]
    readout.params[:] = flat[n:]


def train_recurrent(cell, readout: Readout, data, opt: OptimizerConfig, rows=None):
    """Full-batch training on the training split of a :class:`LagDataset`.

    Returns ``(trained_cell, trained_readout, losses)``; the inputs are not
    modified. ``losses[e]`` is the training MSE at the start of epoch ``e``.
    """
    rows = data.train if rows is None else rows
    seqs = data.sequences(rows)
    Y = data.Y[rows]
    if seqs.shape[0] == 0:
        raise ValueError("no training rows")
    cell, readout = cell.copy(), readout.copy()
    flat = np.concatenate([cell.params, readout.params])
    optimizer = Optimizer(opt, flat)
    losses = []
    for epoch in range(opt.epochs):
        loss, grad = loss_and_grad(cell, readout, seqs, Y)
        check_loss(loss, epoch)
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient at epoch {epoch}")
        losses.append(loss)
        flat = optimizer.step(flat, grad)
        _set_flat(cell, readout, flat)
    return cell, readout, losses


def train_qlstm(cell: QlstmCell, readout: Readout, data, opt: OptimizerConfig, rows=None):
    return train_recurrent(cell, readout, data, opt, rows)


def count_params(cell, readout=None):
    return cell.n_params + (readout.n_params if readout is not None else 0)


def lstm_param_count(input_size, hidden, n_out):
    return 4 * hidden * (hidden + input_size) + 4 * hidden + hidden * n_out + n_out


def matched_lstm_hidden(target, input_size, n_out, max_hidden=128):
    """Hidden size whose LSTM (+ readout) parameter count is closest to ``target``."""
    return min(range(1, max_hidden + 1), key=lambda h: (abs(lstm_param_count(input_size, h, n_out) - target), h))


def save_checkpoint(path, cell, readout: Readout, extra=None):
    meta = {"cell": cell.config(), "readout": {"hidden": readout.hidden, "n_out": readout.n_out}}
    meta.update(extra or {})
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".npz")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), cell=cell.params, readout=readout.params)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        cell_params = z["cell"].copy()
        readout_params = z["readout"].copy()
    cfg = dict(meta["cell"])
    kind = cfg.pop("kind")
    cell = LstmCell(**cfg) if kind == "lstm" else QlstmCell(**cfg)
    if cell_params.shape != cell.params.shape:
        raise ValueError(f"checkpoint parameter shape {cell_params.shape} does not match {cell.params.shape}")
    cell.params = cell_params
    readout = Readout(meta["readout"]["hidden"], meta["readout"]["n_out"])
    readout.params = readout_params
    return cell, readout, meta
