"""Pure numpy fallback for the compiled statevector kernels.

Same in-place contract as ``_kernels.pyx``: ``states`` is a C-contiguous
``(batch, 2**n)`` complex128 array, qubit 0 is the most significant bit.
"""
import numpy as np


def apply_1q(states, m, target, n):
    v = states.reshape(states.shape[0], 1 << target, 2, 1 << (n - 1 - target))
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :].copy()
    v[:, :, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
    v[:, :, 1, :] = m[1, 0] * a0 + m[1, 1] * a1


def apply_cnot(states, control, target, n):
    lo, hi = sorted((control, target))
    v = states.reshape(
        states.shape[0], 1 << lo, 2, 1 << (hi - lo - 1), 2, 1 << (n - 1 - hi)
    )
    if control < target:
        sub = v[:, :, 1, :, :, :]
        tmp = sub[:, :, :, 0, :].copy()
        sub[:, :, :, 0, :] = sub[:, :, :, 1, :]
        sub[:, :, :, 1, :] = tmp
    else:
        sub = v[:, :, :, :, 1, :]
        tmp = sub[:, :, 0, :, :].copy()
        sub[:, :, 0, :, :] = sub[:, :, 1, :, :]
        sub[:, :, 1, :, :] = tmp


def pauli_expectations(states, n):
    nb = states.shape[0]
    out = np.empty((nb, 3, n))
    for q in range(n):
        v = states.reshape(nb, 1 << q, 2, 1 << (n - 1 - q))
        a0 = v[:, :, 0, :]
        a1 = v[:, :, 1, :]
        c = np.conj(a0) * a1
        out[:, 0, q] = 2.0 * c.real.sum(axis=(1, 2))
        out[:, 1, q] = 2.0 * c.imag.sum(axis=(1, 2))
        out[:, 2, q] = (np.abs(a0) ** 2 - np.abs(a1) ** 2).sum(axis=(1, 2))
    return out
