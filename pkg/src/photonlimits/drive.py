"""Driving pulses that produce a prescribed output wavepacket.

Given alpha_g1(t) the cavity equation fixes alpha_e, and the excited-state
equation fixes the product Omega alpha_u = -D / g_1 with

    D = k~ g~ a + (k~ + g~) a' + a'' + g_1 sum_j g_j alpha_gj,
    k~ = kappa + i Delta_g1,  g~ = gamma + i Delta_e,  a = alpha_g1.

The remaining unknown is alpha_u, which obeys

    alpha_u' = -i Delta_u alpha_u + conj(D) alpha_e / (g_1 conj(alpha_u)).

That equation is integrated (RK4) instead of the equivalent first-order ODE
for Omega itself, which has a removable 0/0 wherever the drive has a zero.
Omega then follows algebraically.  ``omega_ode_residual`` checks the result
against the Omega equation directly.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.interpolate import PchipInterpolator

from .analytic_bounds import AnalyticBoundResult, bound_wavepacket
from .dynamics import DriveContext, integrate
from .model import SystemParams
from .projection import ProjectionData
from .spectral import FourierBasis, SpectralModel, synthesize_time_domain

DENSITY = 4
SMALL_CHI = 0.01
UNDERFLOW = 1e-12
LOWPASS_TOL = 1e-3


class ReconstructionError(RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class SmallMarginWarning(UserWarning):
    pass


# -- wavepackets -----------------------------------------------------------
class Wavepacket:
    """alpha_gj(t) and time derivatives; subclasses implement ``derivative``."""

    n_channels = 1

    def derivative(self, j: int, times, order: int = 0) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, factor: float) -> "ScaledWavepacket":
        return ScaledWavepacket(self, factor)


@dataclass
class ScaledWavepacket(Wavepacket):
    base: Wavepacket
    factor: float

    @property
    def n_channels(self):
        return self.base.n_channels

    def derivative(self, j, times, order=0):
        return self.factor * self.base.derivative(j, times, order)


@dataclass
class SineWavepacket(Wavepacket):
    """The analytic bound shape A sin(w t) on a single channel."""

    result: AnalyticBoundResult
    which: str = "lower"

    def derivative(self, j, times, order=0):
        if j != 1:
            raise IndexError("the bound wavepacket has a single channel")
        return bound_wavepacket(self.result, times, self.which, order).astype(complex)


@dataclass
class FourierWavepacket(Wavepacket):
    coefficients: np.ndarray
    basis: FourierBasis
    params: SystemParams

    @property
    def n_channels(self):
        return self.params.n_channels

    def derivative(self, j, times, order=0):
        return synthesize_time_domain(self.coefficients, self.params, j, times, order, self.basis)

    def peak_total(self) -> float:
        """Worst-case total non-initial probability over [0, T] (dense grid)."""
        b = self.basis
        n = max(4097, int(16 * b.omega_max * b.T / math.pi) + 1)
        model = SpectralModel(b, self.params, np.linspace(0.0, b.T, n))
        return float(model.expectation(self.coefficients, "total").max())

    def lowpassed(self, n_cut: int, proj: ProjectionData) -> tuple["FourierWavepacket", float]:
        """Drop |n| > n_cut and restore initial vacancy.

        The result is rescaled to the original worst-case total, so it obeys
        the same conservation bound; returns it with its relative L2 change.
        """
        c = np.asarray(self.coefficients, dtype=complex)
        kept = np.where(np.abs(self.basis.n) <= n_cut, c, 0.0)
        Q = proj.Q
        kept = Q @ (Q.conj().T @ kept)
        out = FourierWavepacket(kept, self.basis, self.params)
        peak = out.peak_total()
        if not peak > 0:
            return out, 1.0
        out.coefficients = kept * math.sqrt(self.peak_total() / peak)
        delta = float(np.linalg.norm(out.coefficients - c) / np.linalg.norm(c))
        return out, delta

    def smoothed(self, proj: ProjectionData, tol: float = LOWPASS_TOL):
        """Low-pass at the smallest cutoff whose relative L2 change is <= tol.

        Returns (packet, n_cut, delta).
        """
        for n_cut in range(self.params.n_channels, self.basis.N + 1):
            packet, delta = self.lowpassed(n_cut, proj)
            if delta <= tol:
                return packet, n_cut, delta
        return self, self.basis.N, 0.0


# -- reconstruction ---------------------------------------------------------
@dataclass
class DrivePulse:
    times: np.ndarray
    Omega: np.ndarray
    alpha_u: np.ndarray
    alpha_e: np.ndarray
    theta_0: float
    chi: float
    initial_excited_amplitude: complex
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not np.all(np.isfinite(self.Omega)):
            raise ReconstructionError("drive is not finite")

    def interpolator(self):
        """Monotone cubic interpolation of Re and Im Omega (vectorized)."""
        re = PchipInterpolator(self.times, self.Omega.real)
        im = PchipInterpolator(self.times, self.Omega.imag)
        return lambda t: re(t) + 1j * im(t)

    def to_csv(self, path, digits: int = 12):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "re_Omega", "im_Omega"])
            for t, o in zip(self.times, self.Omega):
                w.writerow([f"{t:.{digits}g}", f"{o.real:.{digits}g}", f"{o.imag:.{digits}g}"])


def _amplitudes(wp: Wavepacket, params: SystemParams, ctx: DriveContext, times, orders=3):
    """alpha_g1 derivatives 0..orders, sum_j g_j alpha_gj (and derivative), alpha_e."""
    g = params.g
    a = [np.asarray(wp.derivative(1, times, k), dtype=complex) for k in range(orders + 1)]
    coupled = sum(g[j] * wp.derivative(j + 1, times, 0) for j in range(wp.n_channels))
    coupled_dot = sum(g[j] * wp.derivative(j + 1, times, 1) for j in range(wp.n_channels))
    k1 = params.kappa + 1j * params.deltas[0]
    alpha_e = -(a[1] + k1 * a[0]) / g[0]
    return a, np.asarray(coupled, dtype=complex), np.asarray(coupled_dot, dtype=complex), alpha_e


def drive_numerator(wp: Wavepacket, params: SystemParams, ctx: DriveContext, times):
    """(D, dD/dt, alpha_e) on ``times``; Omega alpha_u = -D / g_1."""
    a, cs, cs_dot, alpha_e = _amplitudes(wp, params, ctx, times)
    k1 = params.kappa + 1j * params.deltas[0]
    ge = params.gamma + 1j * ctx.Delta_e
    g1 = params.g[0]
    D = k1 * ge * a[0] + (k1 + ge) * a[1] + a[2] + g1 * cs
    D_dot = k1 * ge * a[1] + (k1 + ge) * a[2] + a[3] + g1 * cs_dot
    return D, D_dot, alpha_e


def initial_state(wp: Wavepacket, params: SystemParams, ctx: DriveContext):
    """(alpha_u(0), alpha_e(0)) with alpha_u(0) = sqrt(1 - |alpha_e(0)|^2) e^{i theta_0}."""
    ae0 = complex(-wp.derivative(1, [0.0], 1)[0] / params.g[0])
    rest = 1.0 - abs(ae0) ** 2
    if rest <= UNDERFLOW:
        raise ReconstructionError("wavepacket needs the whole population in |e> at t=0", 0.0)
    return math.sqrt(rest) * complex(math.cos(ctx.theta_0), math.sin(ctx.theta_0)), ae0


def _check_population(wp: Wavepacket, params: SystemParams, times, alpha_e):
    """Raise where the prescribed wavepacket would need more than the whole population."""
    ag = [wp.derivative(j + 1, times, 0) for j in range(wp.n_channels)]
    flux = 2 * params.gamma * np.abs(alpha_e) ** 2
    held = np.abs(alpha_e) ** 2
    for a in ag:
        flux = flux + 2 * params.kappa * np.abs(a) ** 2
        held = held + np.abs(a) ** 2
    nonu = held + _cumulative(flux, times)
    over = np.flatnonzero(nonu > 1.0 - UNDERFLOW)
    if over.size:
        t = float(times[over[0]])
        raise ReconstructionError(
            f"wavepacket needs more than the whole population by t={t:.6g}", t)


@njit(cache=True)
def _rk4_ground(au0, dt, D, ae, g1, d_u, floor):
    """RK4 for alpha_u' = -i d_u alpha_u + conj(D) ae / (g1 conj(alpha_u)).

    D and ae are sampled at every half step; returns (alpha_u, failure index).
    """
    steps = (D.shape[0] - 1) // 2
    out = np.empty(steps + 1, dtype=np.complex128)
    out[0] = au0
    y = au0
    for i in range(steps):
        ys = y
        ks = np.empty(4, dtype=np.complex128)
        for s in range(4):
            idx = 2 * i + (0 if s == 0 else (2 if s == 3 else 1))
            if abs(ys) < floor:
                return out, i
            ks[s] = -1j * d_u * ys + np.conj(D[idx]) * ae[idx] / (g1 * np.conj(ys))
            if s < 2:
                ys = y + 0.5 * dt * ks[s]
            elif s == 2:
                ys = y + dt * ks[s]
        y = y + dt / 6 * (ks[0] + 2 * ks[1] + 2 * ks[2] + ks[3])
        out[i + 1] = y
    return out, -1


def reconstruct_drive(wavepacket: Wavepacket, params: SystemParams, ctx: DriveContext,
                      grid, density: int = DENSITY, scale_by_margin: bool = True) -> DrivePulse:
    """Drive realizing (1 - chi) x ``wavepacket`` on a uniform ``grid``.

    The alpha_u equation is stepped on a grid ``density`` times finer than
    ``grid``; the returned pulse lives on that fine grid.
    """
    t = np.asarray(grid, dtype=float)
    h = np.diff(t)
    if t.ndim != 1 or len(t) < 2 or not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("reconstruction grid must be uniform with at least two points")
    if ctx.chi < SMALL_CHI:
        warnings.warn(f"chi={ctx.chi} leaves little margin; the drive may diverge near T",
                      SmallMarginWarning, stacklevel=2)
    wp = wavepacket.scaled(1.0 - ctx.chi) if scale_by_margin else wavepacket
    fine = np.linspace(t[0], t[-1], density * (len(t) - 1) + 1)
    half = np.linspace(t[0], t[-1], 2 * (len(fine) - 1) + 1)
    D, _, alpha_e = drive_numerator(wp, params, ctx, half)
    au0, ae0 = initial_state(wp, params, ctx)
    _check_population(wp, params, half, alpha_e)
    dt = fine[1] - fine[0]
    alpha_u, fail = _rk4_ground(au0, dt, D, alpha_e, complex(params.g[0]),
                                float(ctx.Delta_u), UNDERFLOW)
    if fail >= 0:
        raise ReconstructionError(
            f"|alpha_u| underflowed at t={fine[fail]:.6g}; increase chi", float(fine[fail]))
    Omega = -D[::2] / (params.g[0] * alpha_u)
    return DrivePulse(fine, Omega, alpha_u, alpha_e[::2], ctx.theta_0, ctx.chi, ae0)


def reconstruct_drive_real(wavepacket: Wavepacket, params: SystemParams, ctx: DriveContext,
                           grid, density: int = DENSITY) -> DrivePulse:
    """Cross-check path for real Lambda systems without detunings.

    alpha_u = +-sqrt(1 - P_nonu(t)) from the accumulated probabilities; the
    sign starts positive and flips only where |alpha_u| passes through a
    minimum below 1e-6, keeping alpha_u continuous.
    """
    params.require_lambda("reconstruct_drive_real")
    if any(d != 0 for d in params.deltas) or ctx.Delta_e or ctx.Delta_u or ctx.theta_0:
        raise ValueError("the real-amplitude path needs zero detunings and theta_0 = 0")
    t = np.asarray(grid, dtype=float)
    fine = np.linspace(t[0], t[-1], density * (len(t) - 1) + 1)
    wp = wavepacket.scaled(1.0 - ctx.chi)
    D, _, alpha_e = drive_numerator(wp, params, ctx, fine)
    a = wp.derivative(1, fine, 0)
    flux_g = 2 * params.kappa * np.abs(a) ** 2
    flux_e = 2 * params.gamma * np.abs(alpha_e) ** 2
    emitted = _cumulative(flux_g + flux_e, fine)
    nonu = np.abs(a) ** 2 + np.abs(alpha_e) ** 2 + emitted
    mag = np.sqrt(np.clip(1.0 - nonu, 0.0, None))
    sign = np.ones_like(mag)
    notes = []
    for i in range(1, len(mag) - 1):
        if mag[i] < 1e-6 and mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1]:
            sign[i + 1:] *= -1
            notes.append(f"sign flip of alpha_u at t={fine[i]:.6g}")
    alpha_u = sign * mag
    if np.any(mag < UNDERFLOW):
        i = int(np.argmax(mag < UNDERFLOW))
        raise ReconstructionError(f"|alpha_u| underflowed at t={fine[i]:.6g}", float(fine[i]))
    Omega = -D / (params.g[0] * alpha_u)
    return DrivePulse(fine, Omega.astype(complex), alpha_u.astype(complex), alpha_e,
                      0.0, ctx.chi, complex(alpha_e[0]), notes)


def _cumulative(y, t):
    """Cumulative Simpson-like integral (trapezoid with end correction is enough here)."""
    out = np.zeros_like(t)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def omega_ode_rhs(Omega, D, D_dot, a, a_dot, params: SystemParams, ctx: DriveContext):
    """Right side R of  Omega' D = R  (the drive equation in Omega form)."""
    k1 = params.kappa + 1j * params.deltas[0]
    return Omega * (D_dot + 1j * ctx.Delta_u * D) + np.abs(Omega) ** 2 * Omega * (k1 * a + a_dot)


def omega_ode_residual(pulse: DrivePulse, wavepacket: Wavepacket, params: SystemParams,
                       ctx: DriveContext) -> float:
    """max |Omega' D - R| / max |R| with Omega' by central differences."""
    wp = wavepacket.scaled(1.0 - pulse.chi)
    t = pulse.times
    D, D_dot, _ = drive_numerator(wp, params, ctx, t)
    a = wp.derivative(1, t, 0)
    a_dot = wp.derivative(1, t, 1)
    R = omega_ode_rhs(pulse.Omega, D, D_dot, a, a_dot, params, ctx)
    dO = np.gradient(pulse.Omega, t, edge_order=2)
    lhs = dO * D
    sl = slice(2, -2)
    scale = np.max(np.abs(R[sl]))
    return float(np.max(np.abs(lhs[sl] - R[sl])) / scale) if scale > 0 else 0.0


# -- verification -------------------------------------------------------------
@dataclass
class DriveReport:
    algebraic_residual: float
    dynamic_l2_error: float
    simulated_emission: float
    target_emission: float
    imag_fraction: float
    max_abs_omega: float
    conservation_drift: float

    def passes(self, tol: float = 0.01) -> bool:
        return self.dynamic_l2_error < tol


def verify_drive(pulse: DrivePulse, params: SystemParams, ctx: DriveContext,
                 wavepacket: Wavepacket) -> DriveReport:
    """Algebraic and dynamic consistency of ``pulse`` with (1 - chi) x wavepacket.

    The dynamic check integrates the equations of motion with a step twice
    the pulse step, so every RK4 stage lands on a pulse sample.
    """
    wp = wavepacket.scaled(1.0 - pulse.chi)
    t = pulse.times
    target = wp.derivative(1, t, 0)
    _, cs, _, alpha_e = _amplitudes(wp, params, ctx, t, orders=1)
    ge = params.gamma + 1j * ctx.Delta_e
    ae_dot = np.gradient(alpha_e, t, edge_order=2)
    rhs = ae_dot + ge * alpha_e - cs
    lhs = pulse.Omega * pulse.alpha_u
    scale = float(np.max(np.abs(rhs)))
    alg = float(np.max(np.abs(lhs - rhs)) / scale) if scale > 0 else float(np.max(np.abs(lhs)))

    sim_ctx = DriveContext(Omega=pulse.interpolator(), Delta_u=ctx.Delta_u,
                           Delta_e=ctx.Delta_e, theta_0=ctx.theta_0, chi=ctx.chi)
    coarse = t[::2] if (len(t) - 1) % 2 == 0 else t
    ae0 = pulse.initial_excited_amplitude
    au0 = pulse.alpha_u[0]
    traj = integrate(params, sim_ctx, (au0, ae0), coarse, drift_tol=np.inf)
    drift = float(np.max(np.abs(traj.total_probability() - traj.total_probability()[0])))
    sim = traj.alpha_g[:, 0]
    ref = target[:: (len(t) - 1) // (len(coarse) - 1)]
    norm = float(np.sqrt(np.trapezoid(np.abs(ref) ** 2, coarse)))
    diff = float(np.sqrt(np.trapezoid(np.abs(sim - ref) ** 2, coarse)))
    err = diff / norm if norm > 0 else diff
    emitted_target = 2 * params.kappa * float(np.trapezoid(np.abs(ref) ** 2, coarse))
    top = float(np.max(np.abs(pulse.Omega)))
    imag = float(np.max(np.abs(pulse.Omega.imag)) / top) if top > 0 else 0.0
    return DriveReport(alg, err, float(traj.P_kappa[-1, 0]), emitted_target, imag, top, drift)
