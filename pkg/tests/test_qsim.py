import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PAULI, dense_circuit, embed, rot_oracle
from qfinseq.qsim import (
    CNOT, MAX_QUBITS, RX, RY, RZ, CircuitError, CircuitSpec, Gate, H, Rot, StateVector,
    apply_gate, circuit_unitary, cnot_ring, expect_pauli, gate_matrix, get_kernels,
    parameter_shift_grad, pauli_expectations, qlstm_ansatz, reservoir_circuit, rotation_matrix,
    run_batch, run_circuit, z_observables, z_observables_shift_grad,
)


def random_state(rng, n):
    a = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return StateVector(n, a / np.linalg.norm(a))


def random_circuit(rng, n, n_gates):
    gates, slots = [], []
    for _ in range(n_gates):
        kind = rng.choice(["H", "RX", "RY", "RZ", "Rot", "CNOT"] if n > 1 else ["H", "RX", "RY", "RZ", "Rot"])
        q = int(rng.integers(n))
        if kind == "CNOT":
            t = int((q + 1 + rng.integers(n - 1)) % n)
            gates.append(CNOT(q, t))
        elif kind == "H":
            gates.append(H(q))
        elif kind == "Rot":
            gates.append(Rot(*rng.uniform(-np.pi, np.pi, 3), q))
            slots.extend((len(gates) - 1, p) for p in range(3))
        else:
            gates.append(Gate(kind, (q,), (rng.uniform(-np.pi, np.pi),)))
            slots.append((len(gates) - 1, 0))
    return CircuitSpec(n, tuple(gates), tuple(slots))


def weighted_f(circuit, params, state, observables, weights):
    out = run_circuit(state, circuit, params)
    return sum(w * expect_pauli(out, a, q) for (a, q), w in zip(observables, weights))


# ---------------------------------------------------------------- gates


def test_hadamard_on_zero():
    out = apply_gate(StateVector.zero(1), H(0))
    assert np.allclose(out.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)


def test_cnot_with_control_unset_is_identity():
    out = apply_gate(StateVector.zero(2), CNOT(0, 1))
    assert np.array_equal(out.amplitudes, [1, 0, 0, 0])


def test_cnot_flips_target_when_control_set():
    s = StateVector(2, [0, 0, 1, 0])  # |10>
    assert np.array_equal(apply_gate(s, CNOT(0, 1)).amplitudes, [0, 0, 0, 1])


def test_ry_half_pi():
    out = apply_gate(StateVector.zero(1), RY(np.pi / 2, 0))
    assert np.allclose(out.amplitudes, [np.cos(np.pi / 4), np.sin(np.pi / 4)], atol=1e-15)


def test_qubit_zero_is_most_significant():
    out = apply_gate(StateVector.zero(3), RX(np.pi, 0))
    assert abs(out.amplitudes[4]) == pytest.approx(1.0)


@pytest.mark.parametrize("kind", ["RX", "RY", "RZ"])
@pytest.mark.parametrize("theta", [0.0, 0.3, -1.7, np.pi, 5.0])
def test_rotation_matches_matrix_exponential(kind, theta):
    assert np.allclose(rotation_matrix(kind, theta), rot_oracle(kind[1], theta), atol=1e-13)


@given(st.floats(-7, 7), st.floats(-7, 7), st.floats(-7, 7))
def test_rot_is_zyz_composition(a, b, g):
    expected = rotation_matrix("RZ", g) @ rotation_matrix("RY", b) @ rotation_matrix("RZ", a)
    assert np.max(np.abs(gate_matrix(Rot(a, b, g, 0)) - expected)) < 1e-12


def test_gate_errors():
    with pytest.raises(CircuitError):
        CNOT(1, 1)
    with pytest.raises(CircuitError):
        apply_gate(StateVector.zero(2), H(2))
    with pytest.raises(CircuitError):
        apply_gate(StateVector.zero(2), CNOT(0, 3))
    with pytest.raises(CircuitError):
        Gate("RY", (0,), ())
    with pytest.raises(CircuitError):
        Gate("T", (0,))
    with pytest.raises(CircuitError):
        rotation_matrix("Rot", 0.1)


def test_state_validation():
    with pytest.raises(CircuitError):
        StateVector(2, np.ones(3))
    with pytest.raises(CircuitError):
        StateVector.zero(MAX_QUBITS + 1)
    with pytest.raises(CircuitError):
        StateVector.from_amplitudes(np.ones(6))
    s = StateVector.zero(2)
    with pytest.raises(ValueError):
        s.amplitudes[0] = 0.0


# ---------------------------------------------------------------- circuits


def test_empty_circuit_is_identity(rng):
    s = random_state(rng, 3)
    assert np.array_equal(run_circuit(s, CircuitSpec(3), ()).amplitudes, s.amplitudes)


def test_zero_angle_rotations_are_identity(rng):
    s = random_state(rng, 3)
    gates = [RX(0, 0), RY(0, 1), RZ(0, 2), Rot(0, 0, 0, 1)]
    out = run_circuit(s, CircuitSpec(3, tuple(gates)), ())
    assert np.allclose(out.amplitudes, s.amplitudes, atol=1e-15)


def test_bell_circuit_against_dense_product():
    gates = [H(0), H(1)] + cnot_ring(2)
    out = run_circuit(StateVector.zero(2), CircuitSpec(2, tuple(gates)), ())
    expected = dense_circuit(gates, 2) @ np.array([1, 0, 0, 0], dtype=complex)
    assert np.allclose(out.amplitudes, expected, atol=1e-12)
    assert out.norm_sq == pytest.approx(1.0, abs=1e-12)


def test_param_length_mismatch():
    c = qlstm_ansatz(2, 1)
    with pytest.raises(CircuitError):
        run_circuit(StateVector.zero(2), c, np.zeros(c.n_params + 1))
    with pytest.raises(CircuitError):
        run_circuit(StateVector.zero(3), c, np.zeros(c.n_params))


def test_slot_validation():
    with pytest.raises(CircuitError):
        CircuitSpec(1, (RY(0, 0),), ((0, 0), (0, 0)))
    with pytest.raises(CircuitError):
        CircuitSpec(1, (H(0),), ((0, 0),))
    with pytest.raises(CircuitError):
        CircuitSpec(2, (H(2),))


def test_unslotted_angles_stay_fixed():
    c = CircuitSpec(1, (RY(0.4, 0), RY(0.0, 0)), ((1, 0),))
    out = run_circuit(StateVector.zero(1), c, [0.6])
    assert np.allclose(out.amplitudes, [np.cos(0.5), np.sin(0.5)], atol=1e-14)
    assert c.initial_params().tolist() == [0.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 25), st.integers(0, 2**32 - 1))
def test_oracle_equivalence_and_norm(n, n_gates, seed):
    rng = np.random.default_rng(seed)
    circ = random_circuit(rng, n, n_gates)
    params = rng.uniform(-np.pi, np.pi, circ.n_params)
    s = random_state(rng, n)
    out = run_circuit(s, circ, params)
    expected = dense_circuit(circ.bind(params), n) @ s.amplitudes
    assert np.max(np.abs(out.amplitudes - expected)) < 1e-9
    assert abs(out.norm_sq - 1.0) < 1e-10


def test_circuit_unitary_is_unitary(rng):
    circ = random_circuit(rng, 3, 20)
    u = circuit_unitary(circ, rng.uniform(size=circ.n_params))
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-12)


def test_ansatz_layouts():
    c = qlstm_ansatz(4, 2, "hry")
    assert c.n_params == 4 * 2 + 4 * 3
    assert [g.kind for g in c.gates[:2]] == ["H", "RY"]
    assert qlstm_ansatz(3, 2, "rot").n_params == 18
    with pytest.raises(ValueError):
        qlstm_ansatz(2, 1, "bogus")
    ring = cnot_ring(4)
    assert [g.wires for g in ring] == [(0, 1), (1, 2), (2, 3), (3, 0)]
    assert cnot_ring(1) == []
    rc = reservoir_circuit(np.zeros((2, 3, 3)))
    assert [g.kind for g in rc.gates[:4]] == ["Rot", "Rot", "Rot", "CNOT"]
    assert rc.n_params == 0


# ---------------------------------------------------------------- expectations


def test_expectation_examples():
    assert expect_pauli(StateVector.zero(1), "Z", 0) == pytest.approx(1.0)
    plus = StateVector(1, np.array([1, 1]) / np.sqrt(2))
    assert expect_pauli(plus, "X", 0) == pytest.approx(1.0)
    for theta in (0.3, 1.1, 2.5):
        s = apply_gate(StateVector.zero(1), RY(theta, 0))
        assert expect_pauli(s, "Z", 0) == pytest.approx(np.cos(theta), abs=1e-12)


def test_expectations_match_dense_operators(rng):
    n = 3
    s = random_state(rng, n)
    exps = pauli_expectations(s)
    for i, axis in enumerate("XYZ"):
        for q in range(n):
            op = embed(PAULI[axis], q, n)
            assert exps[i, q] == pytest.approx(np.vdot(s.amplitudes, op @ s.amplitudes).real, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_expectation_bounds(n, seed):
    s = random_state(np.random.default_rng(seed), n)
    e = pauli_expectations(s)
    assert e.shape == (3, n)
    assert np.all(np.abs(e) <= 1 + 1e-10)


def test_expectation_errors():
    s = StateVector.zero(2)
    with pytest.raises(CircuitError):
        expect_pauli(s, "Z", 2)
    with pytest.raises(CircuitError):
        expect_pauli(s, "W", 0)


def test_shot_estimate_converges():
    s = apply_gate(StateVector.zero(1), RY(1.1, 0))
    est = expect_pauli(s, "Z", 0, shots=200000, rng=np.random.default_rng(0))
    assert est == pytest.approx(np.cos(1.1), abs=0.01)
    again = expect_pauli(s, "Z", 0, shots=200000, rng=np.random.default_rng(0))
    assert est == again


# ---------------------------------------------------------------- gradients


def test_shift_gradient_examples():
    c = CircuitSpec(1, (RY(0.0, 0),), ((0, 0),))
    g = parameter_shift_grad(c, [np.pi / 2], StateVector.zero(1), [("Z", 0)])
    assert g[0] == pytest.approx(-1.0, abs=1e-12)
    g = parameter_shift_grad(c, [0.0], StateVector.zero(1), [("Z", 0)])
    assert g[0] == pytest.approx(0.0, abs=1e-12)


def fd_grad(circ, params, state, obs, weights, step=1e-5):
    out = np.empty_like(params)
    for k in range(params.size):
        p, m = params.copy(), params.copy()
        p[k] += step
        m[k] -= step
        out[k] = (weighted_f(circ, p, state, obs, weights) - weighted_f(circ, m, state, obs, weights)) / (2 * step)
    return out


def test_shift_gradient_depth2_ring():
    rng = np.random.default_rng(7)
    circ = qlstm_ansatz(3, 2, "rot")
    params = rng.uniform(-np.pi, np.pi, circ.n_params)
    s = random_state(rng, 3)
    obs, w = [("Z", 0), ("X", 1), ("Y", 2)], [1.0, -0.5, 2.0]
    g = parameter_shift_grad(circ, params, s, obs, w)
    assert np.max(np.abs(g - fd_grad(circ, params, s, obs, w))) < 1e-4


def test_shift_gradient_random_instances():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        circ = random_circuit(rng, n, int(rng.integers(1, 8)))
        if circ.n_params == 0:
            circ = CircuitSpec(n, circ.gates + (RY(0.2, 0),), circ.slots + ((len(circ.gates), 0),))
        params = rng.uniform(-np.pi, np.pi, circ.n_params)
        s = random_state(rng, n)
        obs = [(str(rng.choice(list("XYZ"))), int(rng.integers(n))) for _ in range(2)]
        w = rng.standard_normal(2)
        g = parameter_shift_grad(circ, params, s, obs, w)
        worst = max(worst, np.max(np.abs(g - fd_grad(circ, params, s, obs, w))))
    assert worst < 1e-4


def test_shift_gradient_errors():
    c = CircuitSpec(1, (RY(0.0, 0),), ((0, 0),))
    with pytest.raises(CircuitError):
        parameter_shift_grad(c, [0.1, 0.2], StateVector.zero(1), [("Z", 0)])
    with pytest.raises(CircuitError):
        parameter_shift_grad(c, [0.1], StateVector.zero(1), [("Q", 0)])
    with pytest.raises(CircuitError):
        parameter_shift_grad(c, [0.1], StateVector.zero(1), [("Z", 0)], weights=[1.0, 2.0])


def test_z_observables_reproduce_expectations(rng):
    circ = qlstm_ansatz(3, 2)
    params = rng.uniform(-np.pi, np.pi, circ.n_params)
    psi = rng.standard_normal(8)
    psi /= np.linalg.norm(psi)
    obs = z_observables(circ, params)
    exps = pauli_expectations(run_circuit(StateVector(3, psi), circ, params))[2]
    assert np.allclose(np.einsum("i,qij,j->q", psi, obs, psi), exps, atol=1e-12)
    d = z_observables_shift_grad(circ, params)
    k, h = 5, 1e-6
    p, m = params.copy(), params.copy()
    p[k] += h
    m[k] -= h
    fd = (z_observables(circ, p) - z_observables(circ, m)) / (2 * h)
    assert np.max(np.abs(d[k] - fd)) < 1e-6


# ---------------------------------------------------------------- backends


@pytest.mark.parametrize("n", [1, 2, 4, 6])
def test_backends_agree(n):
    try:
        cy = get_kernels("cython")
    except ImportError:
        pytest.skip("compiled kernels not built")
    py = get_kernels("python")
    rng = np.random.default_rng(n)
    circ = random_circuit(rng, n, 30)
    params = rng.uniform(-np.pi, np.pi, circ.n_params)
    states = rng.standard_normal((5, 1 << n)) + 1j * rng.standard_normal((5, 1 << n))
    a = run_batch(states, circ, params, kernels=py)
    b = run_batch(states, circ, params, kernels=cy)
    assert np.allclose(a, b, atol=1e-12)
    assert np.allclose(py.pauli_expectations(a, n), cy.pauli_expectations(b, n), atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_kernels("fortran")


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, QFINSEQ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from qfinseq.qsim import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
