"""Fourier-basis wavepackets and the probability matrices built on them.

A wavepacket on the reference channel is a coefficient vector C_n (n = -N..N)
with alpha_g1(t) = T_b^-1/2 sum_n C_n exp(i w_n t).  Every probability of
interest is a quadratic form C^dag P(t) C.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import ConfigurationError, SystemParams

KINDS = ("emission", "cavity", "spontaneous", "excited", "total")


@dataclass(frozen=True)
class Kind:
    """Which probability a matrix represents.

    ``channel`` is 1-based and only meaningful for emission and cavity kinds.
    """

    name: str
    channel: int | None = None

    def __post_init__(self):
        if self.name not in KINDS:
            raise ValueError(f"unknown probability kind {self.name!r}")
        if self.name in ("emission", "cavity"):
            if self.channel is None or self.channel < 1:
                raise ValueError(f"{self.name} needs a channel index >= 1")
        elif self.channel is not None:
            raise ValueError(f"{self.name} takes no channel index")

    @classmethod
    def parse(cls, text: "str | Kind") -> "Kind":
        """Parse short names: kappa1, g2, gamma, e, total."""
        if isinstance(text, Kind):
            return text
        s = text.strip().lower()
        for prefix, name in (("kappa", "emission"), ("emission", "emission"),
                             ("cavity", "cavity"), ("g", "cavity")):
            if s.startswith(prefix) and s[len(prefix):].isdigit():
                return cls(name, int(s[len(prefix):]))
        aliases = {"gamma": "spontaneous", "spontaneous": "spontaneous",
                   "e": "excited", "excited": "excited",
                   "total": "total", "u_bar": "total", "total_non_initial": "total"}
        if s in aliases:
            return cls(aliases[s])
        raise ValueError(f"cannot parse probability kind {text!r}")

    def __str__(self):
        short = {"emission": "kappa", "cavity": "g", "spontaneous": "gamma",
                 "excited": "e", "total": "total"}[self.name]
        return f"{short}{self.channel}" if self.channel else short


@dataclass(frozen=True)
class FourierBasis:
    T: float
    T_b: float
    N: int

    def __post_init__(self):
        if not self.T > 0:
            raise ConfigurationError("extraction time must be positive")
        if not self.T_b > self.T:
            raise ConfigurationError(f"basis period {self.T_b} must exceed T={self.T}")
        if self.N < 1:
            raise ConfigurationError("need at least one positive frequency")

    @property
    def size(self) -> int:
        return 2 * self.N + 1

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.N, self.N + 1)

    @property
    def omega(self) -> np.ndarray:
        return 2 * np.pi * self.n / self.T_b

    @property
    def omega_max(self) -> float:
        return 2 * np.pi * self.N / self.T_b


@dataclass(frozen=True)
class FourierVector:
    coefficients: np.ndarray
    basis: FourierBasis

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.basis.size,):
            raise ValueError(f"expected {self.basis.size} coefficients, got {c.shape}")
        object.__setattr__(self, "coefficients", c)


def default_size(T: float, params: SystemParams, margin: float = 1.25) -> tuple[float, int]:
    """Default (T_b, N): T_b = 1.25 T and N from the detuning condition."""
    T_b = margin * T
    d_max = max(abs(d) for d in params.deltas)
    N = min(64, math.ceil(d_max * T_b / (2 * math.pi)) + 32)
    return T_b, max(N, 32)


def build_basis(T: float, T_b: float, N: int, params: SystemParams | None = None) -> FourierBasis:
    basis = FourierBasis(T, T_b, N)
    if params is not None:
        if N < params.n_channels:
            raise ConfigurationError("basis must have more frequencies than channels")
        d_max = max(abs(d) for d in params.deltas)
        if basis.omega_max <= d_max:
            raise ConfigurationError(
                f"omega_max={basis.omega_max:.4g} must exceed the largest detuning {d_max:.4g}"
            )
    return basis


def conversion_factors(basis: FourierBasis, params: SystemParams) -> np.ndarray:
    """f_n^(1->j) for every channel: array of shape (n_channels, 2N+1)."""
    w = basis.omega
    k = params.kappa
    ref = params.channels[0]
    rows = [
        (ch.g / ref.g) * (k + 1j * (w + ref.delta)) / (k + 1j * (w + ch.delta))
        for ch in params.channels
    ]
    return np.array(rows)


def conversion_factor(basis: FourierBasis, params: SystemParams, j: int, n: int) -> complex:
    if not 1 <= j <= params.n_channels:
        raise IndexError(f"channel {j} outside 1..{params.n_channels}")
    if not -basis.N <= n <= basis.N:
        raise IndexError(f"frequency index {n} outside +-{basis.N}")
    return complex(conversion_factors(basis, params)[j - 1, n + basis.N])


def kernel_matrix(basis: FourierBasis, t: float) -> np.ndarray:
    """V[n', n](t) = T_b^-1 int_0^t exp(i (w_n - w_n') s) ds, closed form."""
    w = basis.omega
    d = w[None, :] - w[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        off = 2.0 / (basis.T_b * d) * np.sin(0.5 * d * t) * np.exp(0.5j * d * t)
    return np.where(d == 0, t / basis.T_b, off)


def _excited_bracket(basis: FourierBasis, params: SystemParams) -> np.ndarray:
    w = basis.omega
    k = params.kappa
    d1 = params.channels[0].delta
    wn = w[None, :]
    wp = w[:, None]
    return k * k + d1 * d1 + 1j * k * (wn - wp) + d1 * (wn + wp) + wn * wp


def probability_matrix(basis: FourierBasis, params: SystemParams, kind, t: float) -> np.ndarray:
    """Dense Hermitian matrix P with C^dag P C equal to the requested probability at t."""
    kind = Kind.parse(kind)
    if not 0 <= t <= basis.T_b * (1 + 1e-12):
        raise ValueError(f"time {t} outside [0, T_b]")
    f = conversion_factors(basis, params)
    w = basis.omega
    g1 = params.channels[0].g
    if kind.name == "total":
        total = probability_matrix(basis, params, Kind("spontaneous"), t)
        total = total + probability_matrix(basis, params, Kind("excited"), t)
        for j in range(1, params.n_channels + 1):
            total = total + probability_matrix(basis, params, Kind("emission", j), t)
            total = total + probability_matrix(basis, params, Kind("cavity", j), t)
        return total
    if kind.name in ("emission", "cavity"):
        if kind.channel > params.n_channels:
            raise IndexError(f"channel {kind.channel} outside 1..{params.n_channels}")
        fj = f[kind.channel - 1]
        if kind.name == "emission":
            core = 2 * params.kappa * kernel_matrix(basis, t)
        else:
            core = np.exp(1j * (w[None, :] - w[:, None]) * t) / basis.T_b
        return fj.conj()[:, None] * core * fj[None, :]
    bracket = _excited_bracket(basis, params)
    if kind.name == "spontaneous":
        return 2 * params.gamma / g1 ** 2 * bracket * kernel_matrix(basis, t)
    phase = np.exp(1j * (w[None, :] - w[:, None]) * t)
    return bracket * phase / (g1 ** 2 * basis.T_b)


def synthesize_time_domain(v, params: SystemParams, j: int, times, order: int = 0,
                           basis: FourierBasis | None = None) -> np.ndarray:
    """alpha_gj(t) (or its ``order``-th time derivative) on ``times``."""
    if isinstance(v, FourierVector):
        basis, c = v.basis, v.coefficients
    else:
        if basis is None:
            raise ValueError("a basis is required for raw coefficient arrays")
        c = np.asarray(v, dtype=complex)
    if not 1 <= j <= params.n_channels:
        raise IndexError(f"channel {j} outside 1..{params.n_channels}")
    t = np.asarray(times, dtype=float)
    w = basis.omega
    cj = conversion_factors(basis, params)[j - 1] * c * (1j * w) ** order
    return np.exp(1j * np.multiply.outer(t, w)) @ cj / math.sqrt(basis.T_b)


def synthesize_excited(c, basis: FourierBasis, params: SystemParams, times) -> np.ndarray:
    """alpha_e(t) implied by the reference-channel wavepacket."""
    w = basis.omega
    k = params.kappa
    d1 = params.channels[0].delta
    ce = -(k + 1j * (w + d1)) * np.asarray(c) / params.channels[0].g
    t = np.asarray(times, dtype=float)
    return np.exp(1j * np.multiply.outer(t, w)) @ ce / math.sqrt(basis.T_b)


class SpectralModel:
    """Cached probability matrices and fast expectations on a fixed time grid.

    ``times`` is the grid that matrices are keyed on (by index).  The
    expectation path is exact: integrals of |alpha|^2 are evaluated from the
    autocorrelation of the coefficients, costing O(n^2 + K n) rather than
    K dense quadratic forms.
    """

    def __init__(self, basis: FourierBasis, params: SystemParams, times: Iterable[float]):
        self.basis = basis
        self.params = params
        self.times = np.asarray(list(times), dtype=float)
        self.f = conversion_factors(basis, params)
        w = basis.omega
        N = basis.N
        self._lag_integral, self._lag_phase = self._lag_tables(self.times)
        self._excited_factor = -(params.kappa + 1j * (w + params.channels[0].delta)) / params.channels[0].g
        self._lag_index = np.arange(basis.size)[None, :] - np.arange(basis.size)[:, None] + 2 * N
        self._bracket = _excited_bracket(basis, params)
        self._cache: dict[tuple[Kind, int], np.ndarray] = {}
        self._lock = threading.Lock()

    def _lag_tables(self, times):
        """Per-lag integrals T_b^-1 int_0^t e^{i w_k s} ds and phases e^{i w_k t}/T_b."""
        N = self.basis.N
        k = np.arange(-2 * N, 2 * N + 1)
        wk = 2 * np.pi * k / self.basis.T_b
        t = np.asarray(times, dtype=float)[:, None]
        phase = np.exp(1j * wk * t)
        with np.errstate(invalid="ignore", divide="ignore"):
            integ = (phase - 1.0) / (1j * wk)
        integ[:, 2 * N] = t[:, 0]
        return integ / self.basis.T_b, phase / self.basis.T_b

    def matrix(self, kind, index: int) -> np.ndarray:
        kind = Kind.parse(kind)
        key = (kind, index)
        with self._lock:
            m = self._cache.get(key)
        if m is None:
            m = probability_matrix(self.basis, self.params, kind, float(self.times[index]))
            with self._lock:
                self._cache[key] = m
        return m

    def weighted_total(self, weights) -> np.ndarray:
        """sum_t w_t P_total(t_t), built from lag sums in O(K n + n^2).

        Every matrix depends on (n', n) through the lag n - n' times fixed
        elementwise factors, so only the per-lag weighted sums are needed.
        """
        w = np.asarray(weights, dtype=float)
        p = self.params
        toep_int = (w @ self._lag_integral)[self._lag_index]
        toep_pt = (w @ self._lag_phase)[self._lag_index]
        fsum = np.zeros_like(toep_int)
        for fj in self.f:
            fsum += np.outer(fj.conj(), fj)
        g1 = p.channels[0].g
        out = fsum * (2 * p.kappa * toep_int + toep_pt)
        out += self._bracket * (2 * p.gamma * toep_int + toep_pt) / g1 ** 2
        return out

    def _expectations(self, c, lag_integral, lag_phase) -> dict[Kind, np.ndarray]:
        c = np.asarray(c, dtype=complex)
        p = self.params
        out: dict[Kind, np.ndarray] = {}

        def integral(x):
            # r_k = sum_n conj(x_n) x_{n+k}, k = -2N..2N
            return (lag_integral @ np.correlate(x, x, mode="full")).real

        def value(x):
            return (lag_phase @ np.correlate(x, x, mode="full")).real

        for j in range(1, p.n_channels + 1):
            cj = self.f[j - 1] * c
            out[Kind("emission", j)] = 2 * p.kappa * integral(cj)
            out[Kind("cavity", j)] = value(cj)
        ce = self._excited_factor * c
        out[Kind("spontaneous")] = 2 * p.gamma * integral(ce)
        out[Kind("excited")] = value(ce)
        out[Kind("total")] = sum(out.values())
        return out

    def expectations(self, c) -> dict[Kind, np.ndarray]:
        """Every elementary probability on the grid for coefficient vector ``c``."""
        return self._expectations(c, self._lag_integral, self._lag_phase)

    def expectations_at(self, c, times) -> dict[Kind, np.ndarray]:
        """Same as ``expectations`` at arbitrary times in [0, T_b] (not cached)."""
        return self._expectations(c, *self._lag_tables(times))

    def expectation(self, c, kind) -> np.ndarray:
        return self.expectations(c)[Kind.parse(kind)]
