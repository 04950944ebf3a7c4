"""Circuit layouts used by the recurrent models."""
import numpy as np

from .simulator import CNOT, H, CircuitSpec, Rot, RY


def cnot_ring(n):
    """CNOT_{q -> q+1} for q < n-1, closed by CNOT_{n-1 -> 0}. Empty for one qubit."""
    if n < 2:
        return []
    return [CNOT(q, q + 1) for q in range(n - 1)] + [CNOT(n - 1, 0)]


def qlstm_ansatz(n_qubits, n_layers, kind="hry"):
    """Trainable gate circuit for one QLSTM gate.

    ``kind="hry"``: each layer applies H then a trainable RY on every qubit and a
    CNOT ring; a trainable Rot on every qubit closes the circuit.
    ``kind="rot"``: each layer is a trainable Rot per qubit followed by a CNOT ring.
    """
    gates, slots = [], []
    for _ in range(n_layers):
        for q in range(n_qubits):
            if kind == "hry":
                gates.append(H(q))
                gates.append(RY(0.0, q))
                slots.append((len(gates) - 1, 0))
            elif kind == "rot":
                gates.append(Rot(0.0, 0.0, 0.0, q))
                slots.extend((len(gates) - 1, p) for p in range(3))
            else:
                raise ValueError(f"unknown ansatz kind {kind!r}")
        gates.extend(cnot_ring(n_qubits))
    if kind == "hry":
        for q in range(n_qubits):
            gates.append(Rot(0.0, 0.0, 0.0, q))
            slots.extend((len(gates) - 1, p) for p in range(3))
    return CircuitSpec(n_qubits, tuple(gates), tuple(slots))


def reservoir_circuit(angles):
    """Fixed reservoir unitary from an ``(L, n, 3)`` array of Rot angles."""
    angles = np.asarray(angles, dtype=float)
    n_layers, n_qubits = angles.shape[:2]
    gates = []
    for layer in range(n_layers):
        for q in range(n_qubits):
            gates.append(Rot(*angles[layer, q], q))
        gates.extend(cnot_ring(n_qubits))
    return CircuitSpec(n_qubits, tuple(gates))
