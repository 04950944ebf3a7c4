"""Amplitude encoding and the fixed random lift used in front of it."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qsim import StateVector

LIFT_KINDS = ("tanh-affine", "tanh", "identity")


class EncodingError(ValueError):
    """Raised when a vector cannot be turned into a quantum state."""


def _n_qubits_for(length):
    n = int(length).bit_length() - 1
    if length < 2 or 1 << n != length:
        raise EncodingError(f"vector length {length} is not a power of two >= 2")
    return n


def normalize(vec) -> np.ndarray:
    """Return ``vec / ||vec||`` for a real vector whose length is a power of two."""
    vec = np.asarray(vec, dtype=float).reshape(-1)
    _n_qubits_for(vec.shape[0])
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm):
        raise EncodingError("vector contains non-finite entries")
    if norm == 0.0:
        raise EncodingError("cannot amplitude-encode the all-zero vector")
    return vec / norm


def amplitude_encode(vec) -> StateVector:
    """Prepare the state whose amplitudes are the normalized entries of ``vec``."""
    amps = normalize(vec)
    return StateVector(_n_qubits_for(amps.shape[0]), amps)


def lift(vec, kind="tanh-affine") -> np.ndarray:
    """Fixed feature lift applied before projection.

    ``"tanh-affine"`` appends ``tanh(v)`` and a constant 1. The constant matters:
    a state and its negation are physically identical, so without it every
    measured feature would be an even function of ``v``.
    """
    vec = np.asarray(vec, dtype=float).reshape(-1)
    if kind == "tanh-affine":
        return np.concatenate([vec, np.tanh(vec), [1.0]])
    if kind == "tanh":
        return np.concatenate([vec, np.tanh(vec)])
    if kind == "identity":
        return vec
    raise ValueError(f"unknown lift kind {kind!r}; expected one of {LIFT_KINDS}")


def lifted_dim(d, kind="tanh-affine"):
    if kind not in LIFT_KINDS:
        raise ValueError(f"unknown lift kind {kind!r}; expected one of {LIFT_KINDS}")
    return {"tanh-affine": 2 * d + 1, "tanh": 2 * d, "identity": d}[kind]


@dataclass(frozen=True)
class RandomProjection:
    """Fixed Gaussian map from the lifted feature space to ``2**n_qubits`` amplitudes.

    Entries are i.i.d. standard normal divided by ``sqrt(d_lift)``, drawn from
    ``numpy.random.default_rng(seed)``.
    """

    matrix: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, copy=True)
        if m.ndim != 2:
            raise EncodingError("projection matrix must be two-dimensional")
        _n_qubits_for(m.shape[0])
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_seed(cls, n_qubits: int, d_lift: int, seed: int) -> "RandomProjection":
        rng = np.random.default_rng(seed)
        m = rng.standard_normal((1 << n_qubits, d_lift)) / np.sqrt(d_lift)
        return cls(m, seed)

    @property
    def n_qubits(self):
        return _n_qubits_for(self.matrix.shape[0])

    @property
    def in_dim(self):
        return self.matrix.shape[1]


def lift_and_project(vec, proj: RandomProjection, lift_kind="tanh-affine") -> np.ndarray:
    """Unnormalized ``P @ lift(vec)``; normalization is left to :func:`amplitude_encode`."""
    u = lift(vec, lift_kind)
    if u.shape[0] != proj.in_dim:
        raise EncodingError(f"lifted vector has length {u.shape[0]}, projection expects {proj.in_dim}")
    return proj.matrix @ u
