"""Fourier-space fields on the unit torus [0,1)^d.

A field is stored by its Fourier coefficients c_n with

    f(x) = sum_n c_n exp(2*pi*i n.x),

so the zero mode is the spatial mean and Parseval holds without extra
factors (the torus has unit measure).  Leading axes of the coefficient
array index tensor components: a scalar has shape (N,)*d, a vector
(d,)+(N,)*d, a matrix (d,d)+(N,)*d.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SpectralField",
    "TimeField",
    "mode_grid",
    "wavevectors",
    "lq_norm",
    "mixed_norm",
    "sobolev_norm",
    "save_snapshot",
    "load_snapshot",
]


@lru_cache(maxsize=32)
def _modes_1d(N: int) -> np.ndarray:
    return np.fft.fftfreq(N, d=1.0 / N).astype(np.int64)


@lru_cache(maxsize=32)
def mode_grid(d: int, N: int) -> np.ndarray:
    """Integer mode vectors, shape (d,) + (N,)*d in fft layout."""
    axes = np.meshgrid(*([_modes_1d(N)] * d), indexing="ij")
    return np.stack(axes, axis=0)


def wavevectors(d: int, N: int) -> np.ndarray:
    """2*pi*n, the symbol of the gradient (up to a factor i)."""
    return 2.0 * np.pi * mode_grid(d, N)


def _nyquist_mask(d: int, N: int) -> np.ndarray:
    """True on modes with any |n_j| == N/2 (kept zero for clean symmetry)."""
    modes = mode_grid(d, N)
    return np.any(np.abs(modes) >= N // 2, axis=0) if N % 2 == 0 else np.zeros((N,) * d, bool)


class SpectralField:
    """Band-limited real field on [0,1)^d held as Fourier coefficients."""

    __slots__ = ("d", "N", "coef")

    def __init__(self, d: int, N: int, coef: np.ndarray):
        if coef.shape[-d:] != (N,) * d:
            raise ValueError(f"coefficient array shape {coef.shape} inconsistent with d={d}, N={N}")
        self.d = int(d)
        self.N = int(N)
        self.coef = np.asarray(coef, dtype=np.complex128)

    # -- constructors ---------------------------------------------------
    @classmethod
    def zeros(cls, d: int, N: int, rank: int = 0) -> "SpectralField":
        return cls(d, N, np.zeros((d,) * rank + (N,) * d, dtype=np.complex128))

    @classmethod
    def from_values(cls, d: int, N: int, values: np.ndarray) -> "SpectralField":
        """Build from samples on the uniform grid x_j = j/N (trig interpolant).

        Nyquist rows are dropped so every field is symmetric under n -> -n.
        """
        values = np.asarray(values, dtype=np.float64)
        axes = tuple(range(values.ndim - d, values.ndim))
        coef = np.fft.fftn(values, axes=axes) / N**d
        coef[..., _nyquist_mask(d, N)] = 0.0
        return cls(d, N, coef)

    @classmethod
    def from_function(cls, d: int, N: int, fn: Callable[..., np.ndarray]) -> "SpectralField":
        """Sample fn(x_0, ..., x_{d-1}) on the grid; fn must broadcast."""
        grids = np.meshgrid(*([np.arange(N) / N] * d), indexing="ij")
        return cls.from_values(d, N, np.asarray(fn(*grids), dtype=np.float64))

    # -- basic structure ------------------------------------------------
    @property
    def rank(self) -> int:
        return self.coef.ndim - self.d

    @property
    def comp_shape(self) -> tuple:
        return self.coef.shape[: self.rank]

    def copy(self) -> "SpectralField":
        return SpectralField(self.d, self.N, self.coef.copy())

    def mean(self) -> np.ndarray:
        """Spatial mean (zero Fourier mode), real part per component."""
        out = self.coef[(Ellipsis,) + (0,) * self.d]
        return np.real(out)

    def component(self, *idx: int) -> "SpectralField":
        return SpectralField(self.d, self.N, self.coef[idx])

    # -- evaluation -----------------------------------------------------
    def values(self, M: int | None = None) -> np.ndarray:
        """Real-space samples on the uniform M^d grid (default M=N)."""
        M = self.N if M is None else int(M)
        coef = self.coef if M == self.N else self._resample_coef(M)
        axes = tuple(range(coef.ndim - self.d, coef.ndim))
        return np.real(np.fft.ifftn(coef, axes=axes)) * M**self.d

    def _resample_coef(self, M: int) -> np.ndarray:
        """Embed (M>N) or crop (M<N) coefficients; Nyquist rows stay zero."""
        d, N = self.d, self.N
        K = min(N, M)
        h = K // 2 - 1 if K % 2 == 0 else (K - 1) // 2  # largest kept |mode|
        m = np.arange(-h, h + 1)
        out = np.zeros(self.comp_shape + (M,) * d, dtype=np.complex128)
        src = np.ix_(*([m % N] * d))
        dst = np.ix_(*([m % M] * d))
        out[(Ellipsis,) + dst] = self.coef[(Ellipsis,) + src]
        return out

    def resample(self, M: int) -> "SpectralField":
        return SpectralField(self.d, M, self._resample_coef(M))

    def dilate(self, sigma: int) -> "SpectralField":
        """Index dilation n -> sigma*n, i.e. x -> f(sigma x), exact in Fourier."""
        sigma = int(sigma)
        if sigma == 1:
            return self.copy()
        d, N = self.d, self.N
        flat = self.coef.reshape(self.comp_shape + (-1,))
        mag = np.max(np.abs(flat), axis=tuple(range(self.rank))) if self.rank else np.abs(flat)
        support = np.flatnonzero(mag > 1e-300)
        modes = mode_grid(d, N).reshape(d, -1)[:, support]
        if modes.size and np.max(np.abs(modes)) * sigma > N // 2 - 1:
            raise ValueError(f"dilation by {sigma} pushes modes outside the band of N={N}")
        out = np.zeros_like(self.coef).reshape(self.comp_shape + (-1,))
        new_idx = np.ravel_multi_index(tuple((sigma * modes) % N), (N,) * d)
        out[..., new_idx] = flat[..., support]
        return SpectralField(d, N, out.reshape(self.coef.shape))

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.d, self.N, self.coef + other.coef)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.d, self.N, self.coef - other.coef)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.d, self.N, self.coef * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.d, self.N, self.coef / scalar)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.d, self.N, -self.coef)


# ---------------------------------------------------------------------------
# norms


def lq_norm(f: SpectralField, q: float, oversample: int = 2) -> float:
    """Spatial L^q norm; tensor components are combined pointwise (Frobenius).

    Quadrature is the plain grid mean on an oversampled grid, which is exact
    for q=2 on band-limited fields and spectrally accurate otherwise.
    """
    if q == 2 and f.rank <= 2:
        return float(np.sqrt(np.sum(np.abs(f.coef) ** 2)))
    v = f.values(oversample * f.N)
    mag = np.sqrt(np.sum(v * v, axis=tuple(range(f.rank)))) if f.rank else np.abs(v)
    if np.isinf(q):
        return float(np.max(mag))
    return float(np.mean(mag**q) ** (1.0 / q))


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    w = np.zeros_like(nodes)
    if len(nodes) > 1:
        dx = np.diff(nodes)
        w[:-1] += 0.5 * dx
        w[1:] += 0.5 * dx
    return w


@dataclass
class TimeField:
    """Time-sampled field with quadrature weights and optional closures.

    `evaluator`/`devaluator`, when given, return the field and its exact time
    derivative at arbitrary t; otherwise cubic interpolation of coefficients
    and 4th-order central differences on the sample grid are used.
    """

    nodes: np.ndarray
    fields: list
    weights: np.ndarray | None = None
    evaluator: Callable[[float], SpectralField] | None = None
    devaluator: Callable[[float], SpectralField] | None = None
    dfields: list | None = None
    _interp: object = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.float64)
        if self.weights is None:
            self.weights = _trapezoid_weights(self.nodes)
        else:
            self.weights = np.asarray(self.weights, dtype=np.float64)

    @classmethod
    def from_evaluator(cls, nodes, evaluator, devaluator=None) -> "TimeField":
        nodes = np.asarray(nodes, dtype=np.float64)
        return cls(nodes, [evaluator(float(t)) for t in nodes],
                   evaluator=evaluator, devaluator=devaluator)

    @property
    def d(self) -> int:
        return self.fields[0].d

    @property
    def N(self) -> int:
        return self.fields[0].N

    def _spline(self):
        if self._interp is None:
            data = np.stack([f.coef for f in self.fields], axis=0)
            if self.dfields is not None:
                from scipy.interpolate import CubicHermiteSpline

                ddata = np.stack([f.coef for f in self.dfields], axis=0)
                self._interp = CubicHermiteSpline(self.nodes, data, ddata, axis=0)
            else:
                from scipy.interpolate import CubicSpline

                self._interp = CubicSpline(self.nodes, data, axis=0)
        return self._interp

    def at(self, t: float) -> SpectralField:
        if self.evaluator is not None:
            return self.evaluator(float(t))
        i = np.searchsorted(self.nodes, t)
        if i < len(self.nodes) and abs(self.nodes[i] - t) < 1e-14:
            return self.fields[i]
        f0 = self.fields[0]
        return SpectralField(f0.d, f0.N, self._spline()(t))

    def dt_at(self, t: float) -> SpectralField:
        """Time derivative: exact closure if available, else 4th-order FD."""
        if self.devaluator is not None:
            return self.devaluator(float(t))
        if self.evaluator is not None:
            h = self._fd_step()
            c = (8.0 * (self.evaluator(t + h).coef - self.evaluator(t - h).coef)
                 - (self.evaluator(t + 2 * h).coef - self.evaluator(t - 2 * h).coef)) / (12.0 * h)
            f0 = self.fields[0]
            return SpectralField(f0.d, f0.N, c)
        if self.dfields is not None:
            i = np.searchsorted(self.nodes, t)
            if i < len(self.nodes) and abs(self.nodes[i] - t) < 1e-14:
                return self.dfields[i]
        f0 = self.fields[0]
        return SpectralField(f0.d, f0.N, self._spline()(t, 1))

    def _fd_step(self) -> float:
        span = self.nodes[-1] - self.nodes[0] if len(self.nodes) > 1 else 1.0
        return max(1e-7, 1e-3 * span / max(len(self.nodes), 4))

    def map(self, fn: Callable[[SpectralField], SpectralField]) -> "TimeField":
        return TimeField(self.nodes.copy(), [fn(f) for f in self.fields],
                         self.weights.copy())


def mixed_norm(tf: TimeField, p: float, q: float, oversample: int = 2) -> float:
    """L^p in time of the spatial L^q norm, using the stored quadrature."""
    vals = np.array([lq_norm(f, q, oversample) for f in tf.fields])
    if np.isinf(p):
        return float(np.max(vals))
    return float(np.sum(tf.weights * vals**p) ** (1.0 / p))


def sobolev_norm(f: SpectralField, s: float) -> float:
    """H^s norm: sqrt(sum over modes of (1+|2 pi n|^2)^s |c_n|^2)."""
    k2 = np.sum(wavevectors(f.d, f.N) ** 2, axis=0)
    w = (1.0 + k2) ** s
    return float(np.sqrt(np.sum(w * np.abs(f.coef) ** 2)))


# ---------------------------------------------------------------------------
# snapshot format: magic 'CIFD', little-endian f64 payload

_MAGIC = b"CIFD"
_VERSION = 1


def save_snapshot(path: str, tf: TimeField, symmetric: bool = False) -> None:
    """Write a time-sampled field as physical grid samples (row-major f64)."""
    f0 = tf.fields[0]
    n_nodes = len(tf.nodes)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<6I", _VERSION, f0.d, f0.N, f0.rank,
                             1 if symmetric else 0, n_nodes))
        fh.write(np.asarray(tf.nodes, "<f8").tobytes())
        fh.write(np.asarray(tf.weights, "<f8").tobytes())
        for f in tf.fields:
            fh.write(np.ascontiguousarray(f.values(), dtype="<f8").tobytes())


def load_snapshot(path: str) -> TimeField:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a field snapshot (bad magic)")
        version, d, N, rank, _sym, n_nodes = struct.unpack("<6I", fh.read(24))
        if version != _VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        nodes = np.frombuffer(fh.read(8 * n_nodes), "<f8").copy()
        weights = np.frombuffer(fh.read(8 * n_nodes), "<f8").copy()
        shape = (d,) * rank + (N,) * d
        count = int(np.prod(shape))
        fields = []
        for _ in range(n_nodes):
            vals = np.frombuffer(fh.read(8 * count), "<f8").reshape(shape)
            fields.append(SpectralField.from_values(d, N, vals))
    return TimeField(nodes, fields, weights)
