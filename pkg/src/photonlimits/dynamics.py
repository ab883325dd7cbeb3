"""Time-domain integration of the non-Hermitian equations of motion.

State: alpha_u, alpha_e, alpha_gj (one per channel).  The emitted
probabilities P_kappa_j = 2 kappa int |alpha_gj|^2 and P_gamma = 2 gamma int
|alpha_e|^2 are integrated alongside with the same fixed-step RK4 scheme, so
the norm lost by the amplitudes is accounted for exactly up to truncation error.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .model import SystemParams

DEFAULT_STEPS = 10_000


class AccuracyError(RuntimeError):
    pass


@dataclass(frozen=True)
class DriveContext:
    Omega: Callable[[float], complex] | None = None
    Delta_u: float = 0.0
    Delta_e: float = 0.0
    theta_0: float = 0.0
    chi: float = 0.05

    def __post_init__(self):
        if not 0 < self.chi < 1:
            raise ValueError(f"chi must lie in (0, 1), got {self.chi}")
        if not 0 <= self.theta_0 < 2 * np.pi:
            raise ValueError(f"theta_0 must lie in [0, 2 pi), got {self.theta_0}")

    def drive(self, t: float) -> complex:
        return 0j if self.Omega is None else complex(self.Omega(t))


@dataclass
class Trajectory:
    times: np.ndarray
    alpha_u: np.ndarray
    alpha_e: np.ndarray
    alpha_g: np.ndarray  # (len(times), n_channels)
    P_kappa: np.ndarray  # (len(times), n_channels)
    P_gamma: np.ndarray

    @property
    def populations(self) -> dict[str, np.ndarray]:
        out = {"P_u": np.abs(self.alpha_u) ** 2, "P_e": np.abs(self.alpha_e) ** 2}
        for j in range(self.alpha_g.shape[1]):
            out[f"P_g{j + 1}"] = np.abs(self.alpha_g[:, j]) ** 2
            out[f"P_kappa{j + 1}"] = self.P_kappa[:, j]
        out["P_gamma"] = self.P_gamma
        return out

    def total_probability(self) -> np.ndarray:
        amp = np.abs(self.alpha_u) ** 2 + np.abs(self.alpha_e) ** 2
        amp = amp + np.sum(np.abs(self.alpha_g) ** 2, axis=1)
        return amp + self.P_kappa.sum(axis=1) + self.P_gamma

    def to_csv(self, path, digits: int = 12):
        pops = self.populations
        names = ["t", "re_alpha_u", "im_alpha_u", "re_alpha_e", "im_alpha_e"]
        for j in range(self.alpha_g.shape[1]):
            names += [f"re_alpha_g{j + 1}", f"im_alpha_g{j + 1}"]
        names += list(pops)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for i, t in enumerate(self.times):
                row = [t, self.alpha_u[i].real, self.alpha_u[i].imag,
                       self.alpha_e[i].real, self.alpha_e[i].imag]
                for j in range(self.alpha_g.shape[1]):
                    row += [self.alpha_g[i, j].real, self.alpha_g[i, j].imag]
                row += [pops[k][i] for k in pops]
                w.writerow([f"{x:.{digits}g}" for x in row])


def uniform_grid(T: float, steps: int = DEFAULT_STEPS) -> np.ndarray:
    return np.linspace(0.0, T, steps + 1)


def resolved_grid(params: SystemParams, T: float, min_steps: int = DEFAULT_STEPS,
                  points_per_rate: float = 40.0) -> np.ndarray:
    """Uniform grid with at least ``min_steps`` steps and dt <= 1/(40 fastest rate)."""
    rates = [params.kappa, params.gamma, *map(abs, params.g), *map(abs, params.deltas)]
    steps = max(min_steps, int(np.ceil(T * max(rates) * points_per_rate)))
    return uniform_grid(T, steps)


@njit(cache=True)
def _rk4(y0, dt, steps, om, lam_g, g, lam_e, d_u, kappa, gamma):
    """Fixed-step RK4; ``om`` holds the drive at t_0, t_0 + dt/2, t_1, ... ."""
    J = g.shape[0]
    n = y0.shape[0]
    out = np.empty((steps + 1, n), dtype=np.complex128)
    out[0] = y0
    y = y0.copy()
    k = np.empty((4, n), dtype=np.complex128)
    tmp = np.empty(n, dtype=np.complex128)
    for i in range(steps):
        for s in range(4):
            if s == 0:
                tmp[:] = y
                o = om[2 * i]
            elif s == 3:
                for m in range(n):
                    tmp[m] = y[m] + dt * k[2, m]
                o = om[2 * i + 2]
            else:
                for m in range(n):
                    tmp[m] = y[m] + 0.5 * dt * k[s - 1, m]
                o = om[2 * i + 1]
            au = tmp[0]
            ae = tmp[1]
            k[s, 0] = -d_u * au - np.conj(o) * ae
            acc = -lam_e * ae + o * au
            for j in range(J):
                acc += g[j] * tmp[2 + j]
                k[s, 2 + j] = -lam_g[j] * tmp[2 + j] - g[j] * ae
                k[s, 2 + J + j] = 2 * kappa * (tmp[2 + j].real ** 2 + tmp[2 + j].imag ** 2)
            k[s, 1] = acc
            k[s, 2 + 2 * J] = 2 * gamma * (ae.real ** 2 + ae.imag ** 2)
        for m in range(n):
            y[m] = y[m] + dt / 6 * (k[0, m] + 2 * k[1, m] + 2 * k[2, m] + k[3, m])
        out[i + 1] = y
    return out


def sample_drive(ctx: DriveContext, t0: float, dt: float, steps: int) -> np.ndarray:
    """Drive at every RK4 stage time t0 + m dt/2, m = 0..2 steps.

    Vectorized callables are evaluated in one call; anything else point by point.
    """
    ts = t0 + 0.5 * dt * np.arange(2 * steps + 1)
    if ctx.Omega is None:
        return np.zeros_like(ts, dtype=complex)
    try:
        om = np.asarray(ctx.Omega(ts), dtype=complex)
        if om.shape == ts.shape:
            return om
    except Exception:
        pass
    return np.array([ctx.drive(t) for t in ts], dtype=complex)


def integrate(params: SystemParams, ctx: DriveContext, initial, grid,
              drift_tol: float = 1e-6) -> Trajectory:
    """Classical RK4 on a uniform grid.

    ``initial`` is (alpha_u, alpha_e) or (alpha_u, alpha_e, [alpha_g...]).
    """
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or len(t) < 2:
        raise ValueError("grid needs at least two times")
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("integration grid must be uniform")
    J = params.n_channels
    au0, ae0, *rest = initial
    ag0 = np.zeros(J, dtype=complex) if not rest else np.asarray(rest[0], dtype=complex)
    y = np.zeros(3 + 2 * J, dtype=complex)
    y[0], y[1], y[2:2 + J] = au0, ae0, ag0
    norm0 = abs(au0) ** 2 + abs(ae0) ** 2 + float(np.sum(np.abs(ag0) ** 2))
    if norm0 > 1 + 1e-12:
        raise ValueError(f"initial state has total probability {norm0} > 1")

    dt = float(h[0])
    steps = len(t) - 1
    om = sample_drive(ctx, float(t[0]), dt, steps)
    if not np.all(np.isfinite(om)):
        raise ValueError("drive is not finite on the integration grid")
    out = _rk4(y, dt, steps, om,
               params.kappa + 1j * np.asarray(params.deltas, dtype=float),
               np.asarray(params.g, dtype=complex), complex(params.gamma + 1j * ctx.Delta_e),
               complex(1j * ctx.Delta_u), float(params.kappa), float(params.gamma))

    traj = Trajectory(
        times=t,
        alpha_u=out[:, 0],
        alpha_e=out[:, 1],
        alpha_g=out[:, 2:2 + J],
        P_kappa=out[:, 2 + J:2 + 2 * J].real,
        P_gamma=out[:, 2 + 2 * J].real,
    )
    with np.errstate(over="ignore", invalid="ignore"):
        drift = float(np.max(np.abs(traj.total_probability() - norm0)))
    if not drift <= drift_tol:  # also catches a diverged (nan) integration
        raise AccuracyError(
            f"probability drift {drift:.2e} exceeds {drift_tol:.0e}; use a finer grid"
        )
    return traj


def instant_excitation(params: SystemParams, grid) -> Trajectory:
    """All population placed in |e,0> at t = 0, no drive."""
    return integrate(params, DriveContext(), (0.0, 1.0), grid)


def linear_drive(params: SystemParams, rate: float, grid, Delta_u: float = 0.0,
                 Delta_e: float = 0.0) -> Trajectory:
    """Start in |u,0> and ramp the drive as Omega(t) = rate * t."""
    ctx = DriveContext(Omega=lambda s: rate * s, Delta_u=Delta_u, Delta_e=Delta_e)
    return integrate(params, ctx, (1.0, 0.0), grid)
