"""Statevector simulator with compiled kernels and a numpy fallback."""
from ._backend import BACKEND, get_kernels
from .ansatz import cnot_ring, qlstm_ansatz, reservoir_circuit
from .simulator import (
    CNOT,
    MAX_QUBITS,
    RX,
    RY,
    RZ,
    CircuitError,
    CircuitSpec,
    Gate,
    H,
    Rot,
    StateVector,
    apply_gate,
    circuit_unitary,
    expect_pauli,
    gate_matrix,
    parameter_shift_grad,
    pauli_expectations,
    rotation_matrix,
    run_batch,
    run_circuit,
    z_observables,
    z_observables_shift_grad,
)

__all__ = [
    "BACKEND", "get_kernels", "cnot_ring", "qlstm_ansatz", "reservoir_circuit",
    "CNOT", "MAX_QUBITS", "RX", "RY", "RZ", "CircuitError", "CircuitSpec", "Gate", "H", "Rot",
    "StateVector", "apply_gate", "circuit_unitary", "expect_pauli", "gate_matrix",
    "parameter_shift_grad", "pauli_expectations", "rotation_matrix", "run_batch", "run_circuit",
    "z_observables", "z_observables_shift_grad",
]
