"""Dense statevector simulation of small parameterized circuits.

Conventions:

* qubit 0 is the most significant bit of the basis index;
* ``R_A(theta) = exp(-i theta A / 2)``;
* ``Rot(alpha, beta, gamma) = RZ(gamma) RY(beta) RZ(alpha)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, sin, sqrt

import numpy as np

from . import _backend

MAX_QUBITS = 14
NORM_TOL = 1e-10

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ("H", "RX", "RY", "RZ", "Rot", "CNOT")
_N_ANGLES = {"H": 0, "CNOT": 0, "RX": 1, "RY": 1, "RZ": 1, "Rot": 3}
_AXES = {"X": 0, "Y": 1, "Z": 2}

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / sqrt(2.0)


class CircuitError(ValueError):
    """Raised for malformed gates, circuits or parameter bindings."""


def _readonly(a):
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    """Immutable n-qubit pure state."""

    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        amps = _readonly(self.amplitudes).reshape(-1)
        if amps.shape[0] != 1 << self.n_qubits:
            raise CircuitError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.shape[0]}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        n = int(amps.shape[0]).bit_length() - 1
        if amps.shape[0] < 2 or 1 << n != amps.shape[0]:
            raise CircuitError(f"amplitude count {amps.shape[0]} is not a power of two >= 2")
        return cls(n, amps)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class Gate:
    kind: str
    wires: tuple
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        wires = tuple(int(w) for w in self.wires)
        params = tuple(float(p) for p in self.params)
        if len(params) != _N_ANGLES[self.kind]:
            raise CircuitError(f"{self.kind} takes {_N_ANGLES[self.kind]} angle(s), got {len(params)}")
        if len(wires) != (2 if self.kind == "CNOT" else 1):
            raise CircuitError(f"{self.kind} acts on wrong number of wires: {wires}")
        if self.kind == "CNOT" and wires[0] == wires[1]:
            raise CircuitError(f"CNOT control and target coincide (qubit {wires[0]})")
        if any(w < 0 for w in wires):
            raise CircuitError(f"negative wire index in {wires}")
        object.__setattr__(self, "wires", wires)
        object.__setattr__(self, "params", params)

    def with_params(self, params) -> "Gate":
        return Gate(self.kind, self.wires, tuple(params))


def H(q):
    return Gate("H", (q,))


def RX(theta, q):
    return Gate("RX", (q,), (theta,))


def RY(theta, q):
    return Gate("RY", (q,), (theta,))


def RZ(theta, q):
    return Gate("RZ", (q,), (theta,))


def Rot(alpha, beta, gamma, q):
    return Gate("Rot", (q,), (alpha, beta, gamma))


def CNOT(control, target):
    return Gate("CNOT", (control, target))


def rotation_matrix(kind: str, theta: float) -> np.ndarray:
    c, s = cos(theta / 2.0), sin(theta / 2.0)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0.0], [0.0, c + 1j * s]], dtype=complex)
    raise CircuitError(f"{kind} is not a single-angle rotation")


def gate_matrix(gate: Gate) -> np.ndarray:
    """2x2 unitary of a single-qubit gate."""
    if gate.kind == "H":
        return _H.copy()
    if gate.kind == "Rot":
        a, b, g = gate.params
        return rotation_matrix("RZ", g) @ rotation_matrix("RY", b) @ rotation_matrix("RZ", a)
    if gate.kind in ROTATIONS:
        return rotation_matrix(gate.kind, gate.params[0])
    raise CircuitError(f"{gate.kind} has no 2x2 matrix")


@dataclass(frozen=True)
class CircuitSpec:
    """Ordered gate list with trainable angle slots.

    ``slots[k] = (gate_index, angle_position)`` binds the k-th entry of a
    parameter vector to one angle; angles not referenced by a slot keep the
    value stored on the gate.
    """

    n_qubits: int
    gates: tuple = ()
    slots: tuple = ()

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        gates = tuple(self.gates)
        slots = tuple((int(g), int(p)) for g, p in self.slots)
        for g in gates:
            if max(g.wires) >= self.n_qubits:
                raise CircuitError(f"gate {g.kind} on wires {g.wires} exceeds {self.n_qubits} qubits")
        if len(set(slots)) != len(slots):
            raise CircuitError("two parameter slots reference the same angle")
        for gi, pos in slots:
            if not 0 <= gi < len(gates) or not 0 <= pos < len(gates[gi].params):
                raise CircuitError(f"slot ({gi}, {pos}) does not reference a gate angle")
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "slots", slots)

    @property
    def n_params(self) -> int:
        return len(self.slots)

    def initial_params(self) -> np.ndarray:
        return np.array([self.gates[g].params[p] for g, p in self.slots], dtype=float)

    def bind(self, params) -> tuple:
        """Return the gate tuple with ``params`` written into the slots."""
        params = np.asarray(params, dtype=float).reshape(-1)
        if params.shape[0] != len(self.slots):
            raise CircuitError(f"circuit has {len(self.slots)} parameter slots, got {params.shape[0]} values")
        angles = [list(g.params) for g in self.gates]
        for value, (gi, pos) in zip(params, self.slots):
            angles[gi][pos] = float(value)
        return tuple(g.with_params(a) if a else g for g, a in zip(self.gates, angles))


def _check_wires(gate, n):
    if max(gate.wires) >= n:
        raise CircuitError(f"gate {gate.kind} on wires {gate.wires} exceeds {n} qubits")


def _apply_inplace(states, gates, n, kernels):
    for gate in gates:
        if gate.kind == "CNOT":
            kernels.apply_cnot(states, gate.wires[0], gate.wires[1], n)
        else:
            kernels.apply_1q(states, gate_matrix(gate), gate.wires[0], n)
    return states


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    _check_wires(gate, state.n_qubits)
    work = np.array(state.amplitudes, dtype=complex).reshape(1, -1)
    _apply_inplace(work, (gate,), state.n_qubits, _backend.kernels)
    return StateVector(state.n_qubits, work[0])


def run_batch(states, circuit: CircuitSpec, params=(), kernels=None) -> np.ndarray:
    """Evolve each row of a ``(batch, 2**n)`` array through ``circuit``."""
    kernels = kernels or _backend.kernels
    work = np.array(states, dtype=complex, order="C", copy=True)
    if work.ndim == 1:
        work = work.reshape(1, -1)
    if work.shape[1] != 1 << circuit.n_qubits:
        raise CircuitError(f"state width {work.shape[1]} does not match {circuit.n_qubits} qubits")
    return _apply_inplace(work, circuit.bind(params), circuit.n_qubits, kernels)


def run_circuit(state: StateVector, circuit: CircuitSpec, params=()) -> StateVector:
    if state.n_qubits != circuit.n_qubits:
        raise CircuitError(f"state has {state.n_qubits} qubits, circuit has {circuit.n_qubits}")
    out = run_batch(state.amplitudes, circuit, params)
    return StateVector(state.n_qubits, out[0])


def circuit_unitary(circuit: CircuitSpec, params=()) -> np.ndarray:
    """Dense unitary, obtained by evolving every basis state."""
    dim = 1 << circuit.n_qubits
    return run_batch(np.eye(dim, dtype=complex), circuit, params).T


def pauli_expectations(state: StateVector) -> np.ndarray:
    """All single-qubit Pauli expectations, shape ``(3, n)`` ordered X, Y, Z."""
    work = np.ascontiguousarray(state.amplitudes.reshape(1, -1))
    return _backend.kernels.pauli_expectations(work, state.n_qubits)[0]


def expect_pauli(state: StateVector, axis: str, qubit: int, shots=None, rng=None) -> float:
    """Expectation of a Pauli operator on one qubit.

    Exact by default. With ``shots`` set, the value is estimated from that many
    simulated measurement outcomes in the axis eigenbasis.
    """
    if axis not in _AXES:
        raise CircuitError(f"axis must be one of X, Y, Z, got {axis!r}")
    if not 0 <= qubit < state.n_qubits:
        raise CircuitError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    value = float(pauli_expectations(state)[_AXES[axis], qubit])
    if shots is None:
        return value
    rng = rng if rng is not None else np.random.default_rng()
    p_plus = min(max((1.0 + value) / 2.0, 0.0), 1.0)
    n_plus = rng.binomial(int(shots), p_plus)
    return (2.0 * n_plus - shots) / shots


def _weighted_expectation(amplitudes, circuit, params, observables, weights):
    out = run_batch(amplitudes, circuit, params)
    exps = _backend.kernels.pauli_expectations(out, circuit.n_qubits)[0]
    return sum(w * exps[_AXES[a], q] for (a, q), w in zip(observables, weights))


def parameter_shift_grad(circuit: CircuitSpec, params, input_state: StateVector, observables, weights=None):
    """Gradient of ``sum_j w_j <P_j>`` with respect to every slotted angle.

    ``observables`` is a list of ``(axis, qubit)`` pairs. Each component is
    ``0.5 * (f(theta_k + pi/2) - f(theta_k - pi/2))``.
    """
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.shape[0] != circuit.n_params:
        raise CircuitError(f"circuit has {circuit.n_params} parameter slots, got {params.shape[0]} values")
    observables = [(a, int(q)) for a, q in observables]
    for a, q in observables:
        if a not in _AXES or not 0 <= q < circuit.n_qubits:
            raise CircuitError(f"invalid observable ({a!r}, {q})")
    weights = np.ones(len(observables)) if weights is None else np.asarray(weights, dtype=float)
    if weights.shape[0] != len(observables):
        raise CircuitError("weights and observables differ in length")
    for gi, _ in circuit.slots:
        if circuit.gates[gi].kind not in ROTATIONS + ("Rot",):
            raise CircuitError(f"slotted gate {gi} is {circuit.gates[gi].kind}, not a rotation")
    amps = input_state.amplitudes
    grad = np.empty(params.shape[0])
    shift = np.pi / 2.0
    for k in range(params.shape[0]):
        plus = params.copy()
        plus[k] += shift
        minus = params.copy()
        minus[k] -= shift
        f_plus = _weighted_expectation(amps, circuit, plus, observables, weights)
        f_minus = _weighted_expectation(amps, circuit, minus, observables, weights)
        grad[k] = 0.5 * (f_plus - f_minus)
    return grad


def z_observables(circuit: CircuitSpec, params=()) -> np.ndarray:
    """Real parts of the Heisenberg-picture observables ``U^dag Z_q U``.

    For a real input state ``psi`` the expectation ``<Z_q>`` after the circuit
    equals ``psi @ O[q] @ psi``. Shape ``(n, 2**n, 2**n)``.
    """
    n = circuit.n_qubits
    u = circuit_unitary(circuit, params)
    idx = np.arange(1 << n)
    obs = np.empty((n, 1 << n, 1 << n))
    uh = u.conj().T
    for q in range(n):
        sign = 1.0 - 2.0 * ((idx >> (n - 1 - q)) & 1)
        obs[q] = ((uh * sign) @ u).real
    return obs


def z_observables_shift_grad(circuit: CircuitSpec, params) -> np.ndarray:
    """Parameter-shift derivatives of :func:`z_observables`, shape ``(P, n, 2**n, 2**n)``."""
    params = np.asarray(params, dtype=float).reshape(-1)
    out = np.empty((params.shape[0], circuit.n_qubits, 1 << circuit.n_qubits, 1 << circuit.n_qubits))
    for k in range(params.shape[0]):
        plus = params.copy()
        plus[k] += np.pi / 2.0
        minus = params.copy()
        minus[k] -= np.pi / 2.0
        out[k] = 0.5 * (z_observables(circuit, plus) - z_observables(circuit, minus))
    return out
