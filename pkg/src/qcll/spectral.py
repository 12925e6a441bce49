"""Discrete Fourier transforms and circular convolution.

The tensor-sketch algorithm needs exact FFTs at arbitrary lengths (the
default sketch width 100 is not a power of two).  Power-of-two lengths use
an iterative radix-2 Cooley-Tukey transform; other lengths go through
Bluestein's chirp transform, which reduces to padded power-of-two FFTs.
All transforms accept arrays of shape (..., n) and operate on the last
axis.  Convention: forward transform unnormalized, inverse carries 1/n, so
the convolution theorem holds without extra scale factors.

``dft_naive`` is the O(n^2) textbook definition kept as a test oracle.
"""

from functools import lru_cache

import numpy as np

__all__ = ["dft_naive", "fft", "ifft", "circular_convolve"]


def _as_complex(v):
    a = np.asarray(v, dtype=np.complex128)
    if a.ndim == 0 or a.shape[-1] < 1:
        raise ValueError("input must have length >= 1 along the last axis")
    if not np.all(np.isfinite(a)):
        raise ValueError("input contains non-finite entries")
    return a


def dft_naive(v):
    """Direct O(n^2) DFT: out[k] = sum_j v[j] exp(-2*pi*i*j*k/n)."""
    a = _as_complex(v)
    n = a.shape[-1]
    j = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(j, j) / n)
    return a @ w.T


@lru_cache(maxsize=None)
def _bit_reversal(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


@lru_cache(maxsize=None)
def _twiddles(half):
    return np.exp(-2j * np.pi * np.arange(half) / (2 * half))


def _fft_pow2(a):
    """Iterative radix-2 decimation-in-time; a.shape[-1] is a power of two."""
    n = a.shape[-1]
    if n == 1:
        return a.copy()
    lead = a.shape[:-1]
    x = np.ascontiguousarray(a[..., _bit_reversal(n)]).reshape(-1, n)
    nbatch = x.shape[0]
    half = 1
    while half < n:
        w = _twiddles(half)
        x = x.reshape(nbatch, n // (2 * half), 2, half)
        even = x[:, :, 0, :]
        odd = x[:, :, 1, :] * w
        out = np.empty((nbatch, n // (2 * half), 2 * half), dtype=np.complex128)
        np.add(even, odd, out=out[:, :, :half])
        np.subtract(even, odd, out=out[:, :, half:])
        x = out
        half *= 2
    return x.reshape(lead + (n,))


@lru_cache(maxsize=None)
def _bluestein_tables(n):
    # chirp c_k = exp(-i*pi*k^2/n); the length-L kernel is the padded FFT of
    # conj(c) extended symmetrically to negative indices
    k = np.arange(n)
    chirp = np.exp(-1j * np.pi * (k * k % (2 * n)) / n)
    L = 1 << (2 * n - 2).bit_length() if n > 1 else 1
    kernel = np.zeros(L, dtype=np.complex128)
    kernel[:n] = np.conj(chirp)
    kernel[L - n + 1:] = np.conj(chirp[1:][::-1])
    return chirp, _fft_pow2(kernel), L


def _fft_bluestein(a):
    n = a.shape[-1]
    chirp, kernel_hat, L = _bluestein_tables(n)
    buf = np.zeros(a.shape[:-1] + (L,), dtype=np.complex128)
    buf[..., :n] = a * chirp
    conv = _ifft_pow2(_fft_pow2(buf) * kernel_hat)
    return conv[..., :n] * chirp


def _ifft_pow2(a):
    return np.conj(_fft_pow2(np.conj(a))) / a.shape[-1]


def fft(v):
    """DFT of the last axis, exact at any length n >= 1."""
    a = _as_complex(v)
    n = a.shape[-1]
    if n & (n - 1) == 0:
        return _fft_pow2(a)
    return _fft_bluestein(a)


def ifft(v):
    """Inverse DFT of the last axis, including the 1/n normalization."""
    a = _as_complex(v)
    return np.conj(fft(np.conj(a))) / a.shape[-1]


def circular_convolve(a, b):
    """Circular convolution out[k] = sum_j a[j] * b[(k - j) mod n]."""
    x = _as_complex(a)
    y = _as_complex(b)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(
            f"length mismatch: {x.shape[-1]} vs {y.shape[-1]}"
        )
    return ifft(fft(x) * fft(y))
