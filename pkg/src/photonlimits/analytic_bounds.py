"""Closed-form finite-time extraction bounds for a single-channel Lambda system.

The optimal wavepacket under the relaxed end-time constraint is
alpha_g = A sin(w_m t); the upper bound is 1/(1+m) with
m = ((w_m/kappa)^2 + 1)/(2C).  The lower bound keeps that shape but scales it
so the true constraint (total non-initial probability <= 1 at all times) holds.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .model import SystemParams, cooperativity

SCAN_POINTS = 10_000
GRID_POINTS = 10_000
SMALL_T = 1e-6


class NumericalFailure(RuntimeError):
    pass


class ResolutionWarning(UserWarning):
    pass


class ResolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class AnalyticBoundResult:
    omega_m: float
    m: float
    q: float
    A_upper: float
    scale_lower: float
    P_upper: float
    P_lower: float
    T: float
    t_peak: float | None = None

    @property
    def A_lower(self) -> float:
        return self.A_upper * self.scale_lower


def restriction_residual(omega, params: SystemParams, T: float):
    """cos(2wT) - w sin(2wT)/(kappa(1+C)) - 1; zero at admissible frequencies."""
    C = cooperativity(params)
    w = np.asarray(omega, dtype=float)
    x = 2 * w * T
    return np.cos(x) - 2 * w / (2 * params.kappa * (1 + C)) * np.sin(x) - 1.0


def solve_omega_m(params: SystemParams, T: float) -> float:
    """Smallest nontrivial root of the restriction equation in (0, pi/T)."""
    params.require_lambda("solve_omega_m")
    if not T > 0:
        raise ValueError("T must be positive")
    C = cooperativity(params)
    if params.kappa * T < SMALL_T:
        # w T -> pi/2 from above; cot(delta) = b x with b = 1/(kappa T (1+C))
        b = 1.0 / (params.kappa * T * (1 + C))
        return (math.pi / 2 + 2.0 / (b * math.pi)) / T
    b = 1.0 / (params.kappa * T * (1 + C))
    hi_end = math.pi / T
    grid = np.linspace(0.0, hi_end, SCAN_POINTS + 1)[1:]

    # LHS - 1 = -2 sin(wT) (sin(wT) + b wT cos(wT)); sin(wT) > 0 on the open
    # interval, so the second factor carries the sign without the rounding
    # trouble of LHS - 1 next to the root at w = pi/T
    def factor(w):
        x = w * T
        return np.sin(x) + b * x * np.cos(x)

    h = factor(grid)
    h[-1] = -b * math.pi  # exact value at w = pi/T
    idx = np.flatnonzero((h[:-1] > 0) & (h[1:] <= 0))
    if idx.size == 0:
        r = restriction_residual(grid, params, T)
        trace = ", ".join(f"{w:.4g}:{v:.2e}" for w, v in zip(grid[::1000], r[::1000]))
        raise NumericalFailure(f"no root of the restriction equation in (0, pi/T); residuals {trace}")
    lo, hi = float(grid[idx[0]]), float(grid[idx[0] + 1])
    # bisect to adjacent floats (well past 1e-14 relative width): the slope
    # of the residual grows like w T, so a looser stop can leave it above 1e-12
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = factor(mid)
        if f_mid == 0:
            lo = hi = mid
            break
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
    cands = [lo, hi, math.nextafter(lo, 0.0), math.nextafter(hi, math.inf)]
    w = min(cands, key=lambda x: abs(float(restriction_residual(x, params, T))))
    if not w < hi_end:
        raise NumericalFailure("root collapsed onto w = pi/T")
    return w


def shape_quotient(params: SystemParams, omega: float) -> float:
    C = cooperativity(params)
    return ((omega / params.kappa) ** 2 + 1) / (2 * C)


def unit_probabilities(params: SystemParams, omega: float, t) -> dict[str, np.ndarray]:
    """Closed-form probabilities of alpha_g = sin(omega t) (unit amplitude)."""
    k, g = params.kappa, params.g[0]
    C = cooperativity(params)
    t = np.asarray(t, dtype=float)
    s2 = np.sin(2 * omega * t) / (2 * omega)
    P_k = k * t - k * s2
    P_g = np.sin(omega * t) ** 2
    P_gam = P_k / (2 * C) + P_g / C + (omega / k) ** 2 / (2 * C) * (k * t + k * s2)
    P_e = (omega / g * np.cos(omega * t) + k / g * np.sin(omega * t)) ** 2
    return {"P_kappa": P_k, "P_g": P_g, "P_gamma": P_gam, "P_e": P_e}


def upper_bound(params: SystemParams, T: float) -> AnalyticBoundResult:
    params.require_lambda("upper_bound")
    w = solve_omega_m(params, T)
    m = shape_quotient(params, w)
    u = unit_probabilities(params, w, T)
    A2 = 1.0 / (u["P_kappa"] + u["P_g"] + u["P_gamma"])
    return AnalyticBoundResult(
        omega_m=w, m=m, q=m, A_upper=float(math.sqrt(A2)), scale_lower=1.0,
        P_upper=1.0 / (1.0 + m), P_lower=float("nan"), T=T,
    )


def _total(params, w, t):
    u = unit_probabilities(params, w, t)
    return u["P_kappa"] + u["P_g"] + u["P_gamma"] + u["P_e"]


def _golden_max(f, a, b, tol=1e-12, max_iter=200):
    inv_phi = (math.sqrt(5) - 1) / 2
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def lower_bound(params: SystemParams, T: float, grid=None, strict: bool = False) -> AnalyticBoundResult:
    """Upper-bound shape rescaled so the total non-initial probability peaks at 1."""
    res = upper_bound(params, T)
    w = res.omega_m
    t = np.linspace(0.0, T, GRID_POINTS + 1) if grid is None else np.asarray(grid, dtype=float)
    total = _total(params, w, t)
    i = int(np.argmax(total))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]
    t_peak, peak = _golden_max(lambda s: float(_total(params, w, s)), lo, hi)
    if total[i] >= peak:
        t_peak, peak = float(t[i]), float(total[i])
    if peak > total[i] * (1 + 1e-6):
        msg = (f"time grid of {len(t)} points misses the total-probability peak by "
               f"{peak / total[i] - 1:.2e} (relative)")
        if strict:
            raise ResolutionError(msg)
        warnings.warn(msg, ResolutionWarning, stacklevel=2)
    at_T = 1.0 / res.A_upper ** 2
    scale = math.sqrt(at_T / peak)
    P_kT = float(unit_probabilities(params, w, T)["P_kappa"])
    return replace(res, scale_lower=min(scale, 1.0), P_lower=P_kT / peak, t_peak=t_peak)


def bound_trajectories(params: SystemParams, result: AnalyticBoundResult, times,
                       which: str = "upper") -> dict[str, np.ndarray]:
    """Probabilities over ``times`` for the upper- or lower-bound amplitude."""
    t = np.asarray(times, dtype=float)
    if np.any(t < 0) or np.any(t > result.T * (1 + 1e-12)):
        raise ValueError("trajectory times must lie in [0, T]")
    A = result.A_upper if which == "upper" else result.A_lower
    u = unit_probabilities(params, result.omega_m, t)
    return {k: A * A * v for k, v in u.items()}


def bound_wavepacket(result: AnalyticBoundResult, times, which: str = "lower", order: int = 0):
    """alpha_g(t) = A sin(w t) and its time derivatives."""
    A = result.A_upper if which == "upper" else result.A_lower
    w = result.omega_m
    t = np.asarray(times, dtype=float)
    phase = (np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x))[order % 4]
    return A * w ** order * phase(w * t)


def _sinhc_minus_one_over_sq(y):
    """(sinh(y)/y - 1)/y^2, stable near 0."""
    if abs(y) < 1e-2:
        y2 = y * y
        return 1 / 6 + y2 / 120 + y2 * y2 / 5040
    return (math.sinh(y) / y - 1) / (y * y)


def _sinhc(y):
    return 1.0 if y == 0 else math.sinh(y) / y


def hyperbolic_m(params: SystemParams, T: float, q: float) -> float:
    """Shape quotient of the hyperbolic-sine stationary shape (exists only for q < 1/2C)."""
    params.require_lambda("hyperbolic_m")
    C = cooperativity(params)
    if not 2 * C * q - 1 < 0:
        raise ValueError(f"hyperbolic branch requires q < 1/(2C) = {1 / (2 * C)}")
    if not T > 0:
        raise ValueError("T must be positive")
    k, g, gam = params.kappa, params.g[0], params.gamma
    s = k * math.sqrt(1 - 2 * C * q)
    y = 2 * s * T
    if s * T > 1:
        # multiply through by exp(-2 s T) to stay finite for long windows
        E = math.exp(-y)
        num = (1 + 1 / C) * (1 - E) ** 2 / 4 + gam * s * s / (g * g) * ((1 - E * E) / (4 * s) + T * E)
        den = k * ((1 - E * E) / (4 * s) - T * E)
        return 1 / (2 * C) + num / den
    # every term carries a factor s^2, divided out for stability as s -> 0
    num = (1 + 1 / C) * T * T * _sinhc(s * T) ** 2 + gam / (g * g) * (T * _sinhc(y) + T)
    den = k * 4 * T ** 3 * _sinhc_minus_one_over_sq(y)
    return 1 / (2 * C) + num / den
