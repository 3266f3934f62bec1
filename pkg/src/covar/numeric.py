"""Dense numeric helpers shared by every module.

Matrices are plain ``numpy.ndarray`` objects of dtype float64, with the batch
dimension along rows.  Random numbers come from :class:`RngStream`, a thin
wrapper around numpy's PCG64 bit generator.  PCG64 is platform independent,
and ``Generator.random`` maps each 64-bit output to ``(x >> 11) * 2**-53``, so
a seed fixes the uniform sequence bit-for-bit on every platform.  Gaussians
are built from those uniforms with the Box-Muller transform (two uniforms per
pair of normals, no rejection), which keeps draw counts predictable.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


class DimensionError(ValueError):
    """Raised when array shapes do not chain."""


def as_matrix(a, name="array"):
    """Return ``a`` as a 2-D float64 array (a 1-D input becomes one row)."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def logistic(x):
    """Numerically stable 1 / (1 + exp(-x)), scalar or elementwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


class RngStream:
    """Seeded, single-owner random stream (PCG64 + Box-Muller).

    Parallel consumers should each take ``stream.split(i)`` rather than share
    one stream.
    """

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def split(self, index):
        """Independent child stream seeded with ``seed XOR splitmix64(index)``."""
        return RngStream(self.seed ^ splitmix64(int(index) & MASK64))

    def uniform(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def gaussian(self, size=None):
        """Standard normal draws via Box-Muller; consumes 2*ceil(n/2) uniforms."""
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        m = (n + 1) // 2
        u = self._gen.random(2 * m)
        r = np.sqrt(-2.0 * np.log1p(-u[:m]))  # 1 - u lies in (0, 1]
        theta = 2.0 * np.pi * u[m:]
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        if size is None:
            return float(z[0])
        return z.reshape(shape)

    def draw(self, kind, n):
        if n < 0:
            raise ValueError("n must be non-negative")
        if kind == "uniform01":
            return self.uniform(n)
        if kind == "standard_gaussian":
            return self.gaussian(n)
        raise ValueError(f"unknown draw kind {kind!r}")

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n):
        return self._gen.permutation(n)


def rng_draw(stream, kind, n):
    return stream.draw(kind, n)
