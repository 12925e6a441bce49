"""Sketched circuit-like learning model.

The model never touches the 2^Q-dimensional space: inputs and the
parameterized weight vector are compressed to ``sketch_dim`` dimensions
with frozen count sketches, one per Kronecker factor, combined by the
FFT tensor-sketch path.  Output component i is the inner product between
the i-th independently sketched weight vector and the sketched input
(optionally routed through a frozen random unitary).

Because each weight factor is (cos t_p, sin t_p), advancing angle p by
pi/2 turns the factor into its derivative, so output gradients are exact
re-evaluations, not finite differences.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .qcl import EncodingSpec, Observable, haar_unitary, _amplitude_pairs
from .spectral import fft, ifft

__all__ = ["QcllModel"]


@dataclass
class QcllModel:
    """Frozen random structure plus learnable parameters (theta, a, b).

    All sketch tables and the optional mixing unitary are regenerated
    deterministically from ``seed``; only dimensions, flags, and learned
    parameters need to be persisted.
    """

    encoding: EncodingSpec
    n_angles: int
    n_outputs: int = 10
    sketch_dim: int = 100
    variant: str = "eq14"
    observables: list = None
    seed: int = 0

    theta: np.ndarray = field(init=False)
    a: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_angles < 1 or self.n_outputs < 1 or self.sketch_dim < 1:
            raise ValueError("n_angles, n_outputs, sketch_dim must be >= 1")
        if self.variant not in ("eq14", "eq15"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.observables is None:
            lim = min(5, self.n_outputs)
            self.observables = [Observable.diag_support(self.n_outputs, 0, lim)]
        for obs in self.observables:
            if obs.dim != self.n_outputs:
                raise ValueError("observable dimension must equal n_outputs")

        q = self.encoding.n_qubits
        kp = self.sketch_dim
        ss = np.random.SeedSequence(self.seed)
        rng_in, rng_w, rng_r = (np.random.default_rng(c) for c in ss.spawn(3))
        # one K' x 2 sketch per input qubit
        self._h_in = rng_in.integers(0, kp, size=(q, 2))
        self._s_in = rng_in.choice([-1.0, 1.0], size=(q, 2))
        # n_outputs independent sets of n_angles sketches for the weights
        self._h_w = rng_w.integers(0, kp, size=(self.n_outputs, self.n_angles, 2))
        self._s_w = rng_w.choice([-1.0, 1.0], size=(self.n_outputs, self.n_angles, 2))
        self._mixer = haar_unitary(kp, rng_r) if self.variant == "eq15" else None

        # A sketched 2-entry factor is a sum of two signed basis vectors, so
        # its spectrum is a closed-form pair of complex exponentials.  With
        # these tables the training loop never runs an FFT: spectra combine
        # by elementwise products and inner products evaluate via Parseval.
        freq = np.arange(kp)
        self._espec_in = self._s_in[:, :, None] * np.exp(
            -2j * np.pi * self._h_in[:, :, None] * freq / kp
        )  # (Q, 2, K')
        self._espec_w = self._s_w[:, :, :, None] * np.exp(
            -2j * np.pi * self._h_w[:, :, :, None] * freq / kp
        )  # (I, P, 2, K')

        self.theta = np.zeros(self.n_angles)
        self.a = np.ones(self.n_heads)
        self.b = np.zeros(self.n_heads)
        self._input_cache = {}

    @property
    def n_heads(self):
        return len(self.observables)

    def set_params(self, a, b, theta):
        self.a = np.atleast_1d(np.asarray(a, float)).copy()
        self.b = np.atleast_1d(np.asarray(b, float)).copy()
        self.theta = np.asarray(theta, float).copy()
        if self.a.size != self.n_heads or self.b.size != self.n_heads:
            raise ValueError("a and b need one entry per observable")
        if self.theta.size != self.n_angles:
            raise ValueError(f"theta must have length {self.n_angles}")

    # ---- input side -----------------------------------------------------

    def sketch_inputs(self, X):
        """Tensor sketches of the encoded inputs; (N, sketch_dim) complex.

        Memory and time are linear in the qubit count; the encoded
        2^Q-dimensional vector is never formed.
        """
        pairs = _amplitude_pairs(X, self.encoding)  # (N, Q, 2)
        spectra = np.einsum("nqj,qjk->nqk", pairs, self._espec_in)
        return ifft(np.prod(spectra, axis=1))

    def sketch_input(self, x):
        """Sketch of one input vector."""
        return self.sketch_inputs(np.atleast_1d(np.asarray(x, float))[None, :])[0]

    def _mixed_inputs(self, X):
        """(w, fft(w)) for the sketched, optionally mixed inputs; cached
        so repeated evaluations during training sketch each X once."""
        key = (X.shape, hash(X.tobytes()))
        if key not in self._input_cache:
            if len(self._input_cache) > 8:
                self._input_cache.clear()
            w = self.sketch_inputs(X)
            if self._mixer is not None:
                w = w @ self._mixer.T
            self._input_cache[key] = (w, fft(w))
        return self._input_cache[key]

    # ---- weight side ----------------------------------------------------

    def _weight_spectra(self, theta, derivative=False):
        """Spectra of the sketched per-angle factors; (n_outputs, P, K')."""
        c, s = np.cos(theta), np.sin(theta)
        v0, v1 = (-s, c) if derivative else (c, s)
        return (
            v0[None, :, None] * self._espec_w[:, :, 0, :]
            + v1[None, :, None] * self._espec_w[:, :, 1, :]
        )

    def sketch_weight(self, theta, i):
        """Tensor sketch of the weight vector using sketch set i."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.n_angles:
            raise ValueError(f"theta must have length {self.n_angles}")
        if not 0 <= i < self.n_outputs:
            raise ValueError(f"weight index {i} out of range")
        return ifft(np.prod(self._weight_spectra(theta)[i], axis=0))

    def weight_matrix(self, theta):
        """All sketched weight vectors stacked; (n_outputs, sketch_dim)."""
        return ifft(np.prod(self._weight_spectra(np.asarray(theta, float)), axis=1))

    def _weight_spectra_and_grads(self, theta):
        """Spectra of all weight vectors (I, K') and of their angle
        derivatives (I, P, K'); derivatives reuse prefix/suffix products."""
        spec = self._weight_spectra(theta)  # (I, P, K')
        pref = np.cumprod(spec, axis=1)
        suf = np.cumprod(spec[:, ::-1], axis=1)[:, ::-1]
        dspec = self._weight_spectra(theta, derivative=True)
        if self.n_angles == 1:
            env = np.ones_like(dspec)
        else:
            env = np.empty_like(dspec)
            env[:, 0] = suf[:, 1]
            env[:, -1] = pref[:, -2]
            if self.n_angles > 2:
                env[:, 1:-1] = pref[:, :-2] * suf[:, 2:]
        return pref[:, -1], env * dspec

    # ---- outputs --------------------------------------------------------

    def output_vector(self, x, theta=None):
        """The length-I vector of sketched inner products for one input."""
        theta = self.theta if theta is None else np.asarray(theta, float)
        w, _ = self._mixed_inputs(np.atleast_1d(np.asarray(x, float))[None, :])
        return self.weight_matrix(theta).conj() @ w[0]

    def raw_outputs(self, theta, X):
        """Quadratic-form readouts per observable; (N, n_heads)."""
        _, w_hat = self._mixed_inputs(np.atleast_2d(np.asarray(X, float)))
        u_hat = np.prod(self._weight_spectra(np.asarray(theta, float)), axis=1)
        # Parseval: conj(u) . w = conj(fft(u)) . fft(w) / K'
        v = w_hat @ u_hat.conj().T / self.sketch_dim  # (N, I)
        raw = np.empty((v.shape[0], self.n_heads))
        for c, obs in enumerate(self.observables):
            raw[:, c] = np.einsum("ni,ij,nj->n", v.conj(), obs.matrix, v).real
        return raw

    def output_gradient(self, x, theta=None):
        """d output_vector / d theta_p as an (n_outputs, P) complex matrix."""
        theta = self.theta if theta is None else np.asarray(theta, float)
        w, _ = self._mixed_inputs(np.atleast_1d(np.asarray(x, float))[None, :])
        _, du_hat = self._weight_spectra_and_grads(theta)
        return ifft(du_hat).conj() @ w[0]

    def raw_outputs_and_grad(self, theta, X):
        """Readouts (N, C) and their exact angle gradients (N, C, P)."""
        theta = np.asarray(theta, dtype=np.float64)
        _, w_hat = self._mixed_inputs(np.atleast_2d(np.asarray(X, float)))
        kp = self.sketch_dim
        u_hat, du_hat = self._weight_spectra_and_grads(theta)
        v = w_hat @ u_hat.conj().T / kp  # (N, I)
        n = v.shape[0]
        dmat = du_hat.transpose(1, 0, 2).reshape(self.n_angles, -1)  # (P, I*K')
        w_conj = w_hat.conj()
        raw = np.empty((n, self.n_heads))
        grad = np.empty((n, self.n_heads, self.n_angles))
        for c, obs in enumerate(self.observables):
            bv = v @ obs.matrix.T  # (N, I)
            raw[:, c] = np.einsum("ni,ni->n", v.conj(), bv).real
            # 2 Re <dv|B|v> with dv expanded through Parseval
            m = (bv[:, :, None] * w_conj[:, None, :]).reshape(n, -1)
            grad[:, c, :] = (2.0 / kp) * (m @ dmat.T).real
        return raw, grad

    def predict(self, X):
        """Predictions with the stored (a, b, theta).

        One observable: identity output map, returns (N,).  Several:
        softmax over the per-observable affine readouts, returns (N, C).
        """
        from .optimize import softmax

        raw = self.raw_outputs(self.theta, np.atleast_2d(np.asarray(X, float)))
        logits = self.a * raw + self.b
        if self.n_heads == 1:
            return logits[:, 0]
        return softmax(logits)

    # ---- persistence ----------------------------------------------------

    def to_json(self):
        doc = {
            "model": "qcll",
            "qubits_per_dim": list(self.encoding.qubits_per_dim),
            "n_angles": self.n_angles,
            "n_outputs": self.n_outputs,
            "sketch_dim": self.sketch_dim,
            "variant": self.variant,
            "seed": self.seed,
            "observables": [
                {"re": obs.matrix.real.tolist(), "im": obs.matrix.imag.tolist()}
                for obs in self.observables
            ],
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "theta": self.theta.tolist(),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("model") != "qcll":
            raise ValueError("not a serialized sketch model")
        obs = [
            Observable(matrix=np.asarray(o["re"]) + 1j * np.asarray(o["im"]))
            for o in doc["observables"]
        ]
        model = cls(
            encoding=EncodingSpec(tuple(doc["qubits_per_dim"])),
            n_angles=doc["n_angles"],
            n_outputs=doc["n_outputs"],
            sketch_dim=doc["sketch_dim"],
            variant=doc["variant"],
            observables=obs,
            seed=doc["seed"],
        )
        model.set_params(doc["a"], doc["b"], doc["theta"])
        return model
