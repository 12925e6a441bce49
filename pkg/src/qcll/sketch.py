"""Count-sketch matrices and the FFT-based tensor-sketch algorithm.

A count sketch compresses a K-dimensional vector into ``sketch_dim``
dimensions with a sparse sign projection: column k carries a single +-1
entry in a uniformly chosen row.  Inner products between sketches are
unbiased estimates of the original inner products, with variance bounded
by (dot^2 + |a|^2 |b|^2) / sketch_dim.

``tensor_sketch`` computes the count sketch of a Kronecker product of
factors without ever materializing the product: it sketches each factor,
then circularly convolves the per-factor sketches via FFT.
``combined_sketch`` builds the equivalent explicit sketch of the full
product space and exists as an exact oracle for testing.
"""

from dataclasses import dataclass, field

import numpy as np

from .spectral import fft, ifft

__all__ = [
    "CountSketch",
    "FactorList",
    "estimate_inner",
    "tensor_sketch",
    "combined_sketch",
]

MAX_ORACLE_DIM = 1 << 24


@dataclass(frozen=True)
class CountSketch:
    """One sampled sketch matrix: row table h, sign table s (both length K).

    Tables use 0-based row indices.  Immutable after sampling.
    """

    h: np.ndarray
    s: np.ndarray
    sketch_dim: int

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.intp)
        s = np.asarray(self.s, dtype=np.float64)
        if h.shape != s.shape or h.ndim != 1 or h.size < 1:
            raise ValueError("h and s must be equal-length 1-D tables")
        if self.sketch_dim < 1:
            raise ValueError("sketch_dim must be >= 1")
        if h.min() < 0 or h.max() >= self.sketch_dim:
            raise ValueError("row indices out of range")
        if not np.all(np.abs(s) == 1.0):
            raise ValueError("sign table entries must be +-1")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "s", s)
        self.h.setflags(write=False)
        self.s.setflags(write=False)

    @property
    def input_dim(self):
        return self.h.size

    @classmethod
    def sample(cls, input_dim, sketch_dim, rng):
        """Draw h uniform on rows and s uniform on {+1,-1}, independently."""
        if input_dim < 1 or sketch_dim < 1:
            raise ValueError("dimensions must be >= 1")
        h = rng.integers(0, sketch_dim, size=input_dim)
        s = rng.choice([-1.0, 1.0], size=input_dim)
        return cls(h=h, s=s, sketch_dim=sketch_dim)

    def apply(self, v):
        """Sketch a length-K vector in O(K) without materializing the matrix.

        Also accepts a batch of shape (N, K); returns (N, sketch_dim).
        """
        v = np.asarray(v, dtype=np.complex128)
        batched = v.ndim == 2
        if v.shape[-1] != self.input_dim:
            raise ValueError(
                f"vector length {v.shape[-1]} != input_dim {self.input_dim}"
            )
        if not batched:
            v = v[None, :]
        out = np.zeros((v.shape[0], self.sketch_dim), dtype=np.complex128)
        np.add.at(out.T, self.h, (self.s * v).T)
        return out if batched else out[0]

    def dense(self):
        """Explicit sketch matrix per the defining one-nonzero-per-column rule."""
        m = np.zeros((self.sketch_dim, self.input_dim))
        m[self.h, np.arange(self.input_dim)] = self.s
        return m


def estimate_inner(a, b):
    """Conjugate-linear inner product of two sketches, conj(a) . b."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return np.vdot(a, b)


@dataclass(frozen=True)
class FactorList:
    """Ordered factors of a Kronecker product with per-factor sketches."""

    vectors: list = field(default_factory=list)
    sketches: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.vectors) != len(self.sketches) or not self.vectors:
            raise ValueError("need one sketch per factor, at least one factor")
        widths = {c.sketch_dim for c in self.sketches}
        if len(widths) != 1:
            raise ValueError(f"sketch widths differ across factors: {widths}")
        for v, c in zip(self.vectors, self.sketches):
            if len(v) != c.input_dim:
                raise ValueError("factor length does not match its sketch")

    @property
    def sketch_dim(self):
        return self.sketches[0].sketch_dim

    @property
    def product_dim(self):
        d = 1
        for v in self.vectors:
            d *= len(v)
        return d


def tensor_sketch(f: FactorList):
    """Count sketch of the Kronecker product of f's factors.

    Computed as ifft(prod_q fft(C_q v_q)); O(K' * sum(D_q)) sketching plus
    O(Q * K' log K') transform work, independent of the product dimension.
    """
    spectra = [fft(c.apply(v)) for v, c in zip(f.vectors, f.sketches)]
    prod = spectra[0]
    for s in spectra[1:]:
        prod = prod * s
    return ifft(prod)


def combined_sketch(f: FactorList):
    """Explicit sketch of the full product space; exact oracle for
    ``tensor_sketch``.

    Rows add modulo the sketch width, signs multiply; flat indices follow
    the Kronecker convention (first factor most significant).
    """
    if f.product_dim > MAX_ORACLE_DIM:
        raise ValueError(
            f"product dimension {f.product_dim} exceeds oracle cap {MAX_ORACLE_DIM}"
        )
    kp = f.sketch_dim
    h = np.zeros(1, dtype=np.intp)
    s = np.ones(1)
    for c in f.sketches:
        h = (h[:, None] + c.h[None, :]).reshape(-1) % kp
        s = (s[:, None] * c.s[None, :]).reshape(-1)
    return CountSketch(h=h, s=s, sketch_dim=kp)
