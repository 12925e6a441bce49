"""Exact statevector reference for quantum circuit learning.

Inputs in [-1, 1]^D are encoded as Kronecker products of per-qubit
amplitude pairs (x_d, sqrt(1 - x_d^2)); a depth-M circuit alternates
frozen Haar-random unitaries with per-qubit rotation layers whose angles
are the learnable parameters; predictions read out expectations of a
Hermitian observable.

Index convention: the first Kronecker factor occupies the most
significant bits of the amplitude index, and the angle for layer m
(0-based), qubit q is theta[m * n_qubits + q].

This module exists as a baseline learner and as the oracle for the
coverage study; the statevector dimension is capped, not optimized.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MAX_QUBITS",
    "EncodingSpec",
    "Observable",
    "CircuitSpec",
    "encode",
    "encode_batch",
    "haar_unitary",
    "apply_rotation_layer",
    "apply_circuit",
    "expectation",
    "predict_qcl",
    "gradient_qcl",
    "QclPredictor",
]

MAX_QUBITS = 24


@dataclass(frozen=True)
class EncodingSpec:
    """Qubit budget per input dimension; total qubits is the sum."""

    qubits_per_dim: tuple

    def __post_init__(self):
        q = tuple(int(v) for v in self.qubits_per_dim)
        if not q or any(v < 1 for v in q):
            raise ValueError("each dimension needs at least one qubit")
        object.__setattr__(self, "qubits_per_dim", q)

    @property
    def n_dims(self):
        return len(self.qubits_per_dim)

    @property
    def n_qubits(self):
        return sum(self.qubits_per_dim)


def _check_statevector_cap(n_qubits):
    if n_qubits > MAX_QUBITS:
        raise ValueError(
            f"{n_qubits} qubits exceeds the statevector cap of {MAX_QUBITS}; "
            "use the sketched model for larger systems"
        )


def _amplitude_pairs(X, spec):
    """Per-sample factor table of shape (N, Q, 2); validates the domain."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.n_dims:
        raise ValueError(
            f"input has {X.shape[1]} dims, encoding expects {spec.n_dims}"
        )
    for d in range(spec.n_dims):
        bad = np.abs(X[:, d]) > 1
        if bad.any():
            raise ValueError(
                f"input dimension {d} outside [-1, 1]: value {X[bad, d][0]}"
            )
    cols = []
    for d, qd in enumerate(spec.qubits_per_dim):
        x = X[:, d]
        pair = np.stack([x, np.sqrt(np.clip(1.0 - x * x, 0.0, None))], axis=1)
        cols.extend([pair] * qd)
    return np.stack(cols, axis=1)


def encode_batch(X, spec: EncodingSpec):
    """Encode rows of X into statevectors; returns (N, 2^Q) complex."""
    _check_statevector_cap(spec.n_qubits)
    pairs = _amplitude_pairs(X, spec)
    n = pairs.shape[0]
    out = np.ones((n, 1))
    for q in range(pairs.shape[1]):
        out = (out[:, :, None] * pairs[:, q][:, None, :]).reshape(n, -1)
    return out.astype(np.complex128)


def encode(x, spec: EncodingSpec):
    """Encode one input vector into a unit-norm statevector."""
    return encode_batch(np.atleast_1d(np.asarray(x, dtype=np.float64))[None, :], spec)[0]


def haar_unitary(dim, rng):
    """Haar-distributed unitary via QR of a complex Gaussian matrix.

    The R diagonal is normalized to positive reals, which removes the
    phase ambiguity that would otherwise bias the distribution.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z / np.sqrt(2.0))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


@dataclass(frozen=True)
class Observable:
    """Hermitian readout matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("observable must be square")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ValueError("observable must be Hermitian")
        object.__setattr__(self, "matrix", m)
        self.matrix.setflags(write=False)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def diag_support(cls, dim, start, stop):
        """Diagonal 0/1 observable supported on indices [start, stop)."""
        d = np.zeros(dim)
        d[start:stop] = 1.0
        return cls(matrix=np.diag(d))


@dataclass(frozen=True)
class CircuitSpec:
    """Frozen circuit structure: depth layers of Haar unitaries.

    The learnable rotation angles live outside this object.
    """

    n_qubits: int
    depth: int
    unitaries: tuple
    seed: int = 0

    def __post_init__(self):
        _check_statevector_cap(self.n_qubits)
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if len(self.unitaries) != self.depth:
            raise ValueError("need one unitary per layer")
        dim = 1 << self.n_qubits
        for u in self.unitaries:
            if u.shape != (dim, dim):
                raise ValueError("layer unitary has wrong shape")
            if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > 1e-10:
                raise ValueError("layer matrix is not unitary")

    @property
    def n_angles(self):
        return self.depth * self.n_qubits

    @classmethod
    def sample(cls, n_qubits, depth, seed):
        _check_statevector_cap(n_qubits)
        rng = np.random.default_rng(seed)
        dim = 1 << n_qubits
        us = tuple(haar_unitary(dim, rng) for _ in range(depth))
        return cls(n_qubits=n_qubits, depth=depth, unitaries=us, seed=seed)


def _rotate_axis(states, n_qubits, qubit, cos_t, sin_t):
    """Apply [[c,-s],[s,c]] on one qubit of a (N, 2^Q) batch."""
    n = states.shape[0]
    x = states.reshape((n,) + (2,) * n_qubits)
    a0 = np.take(x, 0, axis=1 + qubit)
    a1 = np.take(x, 1, axis=1 + qubit)
    out = np.empty_like(x)
    idx0 = (slice(None),) * (1 + qubit) + (0,)
    idx1 = (slice(None),) * (1 + qubit) + (1,)
    out[idx0] = cos_t * a0 - sin_t * a1
    out[idx1] = sin_t * a0 + cos_t * a1
    return out.reshape(n, -1)


def apply_rotation_layer(states, angles):
    """Kronecker product of per-qubit rotations, applied in O(Q 2^Q)
    per sample without building the dense matrix.

    Accepts a single statevector or an (N, 2^Q) batch.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    single = np.asarray(states).ndim == 1
    x = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    n_qubits = angles.size
    if x.shape[1] != 1 << n_qubits:
        raise ValueError(
            f"state dimension {x.shape[1]} does not match {n_qubits} angles"
        )
    for q in range(n_qubits):
        x = _rotate_axis(x, n_qubits, q, np.cos(angles[q]), np.sin(angles[q]))
    return x[0] if single else x


def apply_circuit(spec: CircuitSpec, theta, states):
    """Alternate U_m then rotation layer m, for m = 1..depth."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size != spec.n_angles:
        raise ValueError(
            f"expected {spec.n_angles} angles, got {theta.size}"
        )
    single = np.asarray(states).ndim == 1
    x = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    q = spec.n_qubits
    for m in range(spec.depth):
        x = x @ spec.unitaries[m].T
        x = apply_rotation_layer(x, theta[m * q:(m + 1) * q])
    return x[0] if single else x


def expectation(state, obs: Observable):
    """Real readout <psi|B|psi>; batched input gives a value per row."""
    single = np.asarray(state).ndim == 1
    x = np.atleast_2d(np.asarray(state, dtype=np.complex128))
    if x.shape[1] != obs.dim:
        raise ValueError("state and observable dimensions differ")
    vals = np.einsum("ni,ij,nj->n", x.conj(), obs.matrix, x).real
    return float(vals[0]) if single else vals


def predict_qcl(spec, theta, a, b, x, obs, out_fn=None):
    """F(a <B> + b) for one input; out_fn defaults to identity."""
    enc = EncodingSpec(qubits_per_dim=(spec.n_qubits,)) if np.ndim(x) == 0 else None
    if enc is None:
        raise ValueError("pass a scalar input or use QclPredictor for vectors")
    state = apply_circuit(spec, theta, encode(x, enc))
    val = a * expectation(state, obs) + b
    return val if out_fn is None else out_fn(val)


def _raw_and_grad(spec, theta, states, observables, want_grad):
    """Expectations and, optionally, exact angle gradients.

    The output state is linear in (cos t_p, sin t_p), so the derivative
    state is the circuit evaluated with angle p advanced by pi/2; the
    gradient assembles as 2 Re <d psi|B|psi>.  Computed with one forward
    pass plus one backward (adjoint) pass per observable.
    """
    q = spec.n_qubits
    # forward pass, retaining post-rotation states per layer
    x = states
    post_rot = []
    for m in range(spec.depth):
        x = x @ spec.unitaries[m].T
        x = apply_rotation_layer(x, theta[m * q:(m + 1) * q])
        post_rot.append(x)
    psi = x
    n = psi.shape[0]
    raw = np.empty((n, len(observables)))
    for c, obs in enumerate(observables):
        raw[:, c] = np.einsum("ni,ij,nj->n", psi.conj(), obs.matrix, psi).real
    if not want_grad:
        return raw, None
    grad = np.zeros((n, len(observables), spec.n_angles))
    for c, obs in enumerate(observables):
        w = psi @ obs.matrix.T.conj()  # rows B|psi_n>
        for m in range(spec.depth - 1, -1, -1):
            f = post_rot[m]
            for qb in range(q):
                # extra pi/2 rotation on one qubit: (a0, a1) -> (-a1, a0)
                shifted = _rotate_axis(f, q, qb, 0.0, 1.0)
                grad[:, c, m * q + qb] = 2.0 * np.einsum(
                    "ni,ni->n", shifted.conj(), w
                ).real
            if m > 0:
                w = apply_rotation_layer(w, -theta[m * q:(m + 1) * q])
                w = w @ spec.unitaries[m].conj()
    return raw, grad


def gradient_qcl(spec, theta, x, obs):
    """Exact gradient of <B> w.r.t. every rotation angle for one input."""
    theta = np.asarray(theta, dtype=np.float64)
    enc = EncodingSpec(qubits_per_dim=(spec.n_qubits,))
    states = encode_batch(np.atleast_1d(x)[None, :], enc)
    _, grad = _raw_and_grad(spec, theta, states, [obs], want_grad=True)
    return grad[0, 0]


class QclPredictor:
    """Trainable wrapper: encoding + circuit + observables.

    Exposes the raw-output interface the optimizer consumes:
    ``raw_outputs`` returns (N, C) expectations, ``raw_outputs_and_grad``
    additionally returns the (N, C, P) angle gradients.
    """

    def __init__(self, encoding: EncodingSpec, circuit: CircuitSpec, observables):
        if circuit.n_qubits != encoding.n_qubits:
            raise ValueError("circuit and encoding qubit counts differ")
        self.encoding = encoding
        self.circuit = circuit
        self.observables = list(observables)
        for obs in self.observables:
            if obs.dim != 1 << encoding.n_qubits:
                raise ValueError("observable dimension does not match circuit")

    @property
    def n_angles(self):
        return self.circuit.n_angles

    @property
    def n_heads(self):
        return len(self.observables)

    def raw_outputs(self, theta, X):
        states = encode_batch(X, self.encoding)
        raw, _ = _raw_and_grad(
            self.circuit, np.asarray(theta, float), states, self.observables, False
        )
        return raw

    def raw_outputs_and_grad(self, theta, X):
        states = encode_batch(X, self.encoding)
        return _raw_and_grad(
            self.circuit, np.asarray(theta, float), states, self.observables, True
        )
