"""System parameters and the scalar figures of merit derived from them.

All rates share one angular-frequency unit; times are in its inverse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


class ConfigurationError(ValueError):
    """Raised for invalid or unsupported parameter sets."""


@dataclass(frozen=True)
class CavityChannel:
    """One occupied-cavity state |g_j, 1_j>."""

    g: float
    delta: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not math.isfinite(self.g) or self.g == 0.0:
            raise ConfigurationError(f"coupling must be finite and nonzero, got {self.g}")
        if not math.isfinite(self.delta):
            raise ConfigurationError(f"detuning must be finite, got {self.delta}")


@dataclass(frozen=True)
class SystemParams:
    kappa: float
    gamma: float
    channels: tuple[CavityChannel, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ConfigurationError(f"kappa must be positive, got {self.kappa}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if not self.channels:
            raise ConfigurationError("at least one cavity channel is required")

    @classmethod
    def lambda_system(cls, kappa: float, gamma: float, g: float) -> "SystemParams":
        return cls(kappa, gamma, (CavityChannel(g),))

    @classmethod
    def from_cooperativity(cls, kappa: float, g: float, C: float = 1.0) -> "SystemParams":
        """Lambda system with gamma chosen so that g^2/(2 kappa gamma) = C."""
        return cls.lambda_system(kappa, g * g / (2.0 * kappa * C), g)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def g(self) -> tuple[float, ...]:
        return tuple(c.g for c in self.channels)

    @property
    def deltas(self) -> tuple[float, ...]:
        return tuple(c.delta for c in self.channels)

    def with_deltas(self, deltas: Sequence[float]) -> "SystemParams":
        if len(deltas) != self.n_channels:
            raise ConfigurationError("one detuning per channel is required")
        chans = tuple(
            CavityChannel(c.g, float(d), c.label) for c, d in zip(self.channels, deltas)
        )
        return SystemParams(self.kappa, self.gamma, chans)

    def centered(self) -> "SystemParams":
        """Shift detunings so their coupling-weighted mean is zero."""
        w = [c.g ** 2 for c in self.channels]
        mean = sum(wi * c.delta for wi, c in zip(w, self.channels)) / sum(w)
        return self.with_deltas([c.delta - mean for c in self.channels])

    def require_lambda(self, what: str = "this operation"):
        if self.n_channels != 1:
            raise ConfigurationError(
                f"{what} is defined for a single cavity channel, got {self.n_channels}"
            )


@dataclass(frozen=True)
class DerivedQuantities:
    C: float
    C_j: tuple[float, ...]
    t_crit: float | None
    P_adiabatic: float | None
    P_instant: float | None
    g_eff: float


def cooperativity(params: SystemParams, j: int = 1) -> float:
    """g_j^2 / (2 kappa gamma) for the 1-based channel index ``j``."""
    if not 1 <= j <= params.n_channels:
        raise IndexError(f"channel index {j} outside 1..{params.n_channels}")
    g = params.channels[j - 1].g
    return g * g / (2.0 * params.kappa * params.gamma)


def effective_coupling(params: SystemParams) -> float:
    return math.sqrt(sum(g * g for g in params.g))


def critical_time(params: SystemParams) -> float:
    params.require_lambda("critical_time")
    g = params.g[0]
    return max(params.kappa / (g * g), 1.0 / params.kappa)


def adiabatic_limit(params: SystemParams) -> float:
    params.require_lambda("adiabatic_limit")
    C = cooperativity(params)
    return 2 * C / (2 * C + 1)


def instant_excitation_limit(params: SystemParams) -> float:
    params.require_lambda("instant_excitation_limit")
    k, gm = params.kappa, params.gamma
    return k / (k + gm) * adiabatic_limit(params)


def degenerate_product_limit(params: SystemParams) -> float:
    """Infinite-time optimum of P_k1 * P_k2 when both channels are degenerate."""
    if params.n_channels != 2:
        raise ConfigurationError("the product limit needs exactly two channels")
    g1, g2 = params.g
    ge2 = g1 * g1 + g2 * g2
    kg = params.kappa * params.gamma
    return g1 * g1 * g2 * g2 / ge2 ** 2 * (ge2 / (ge2 + kg)) ** 2


def separated_product_limit(params: SystemParams) -> float:
    """Infinite-time optimum of P_k1 * P_k2 for channels whose spectra do not overlap."""
    if params.n_channels != 2:
        raise ConfigurationError("the product limit needs exactly two channels")
    a = 2 * cooperativity(params, 1)
    b = 2 * cooperativity(params, 2)
    return a * b / (4 * (a + 1) * (b + 1))


def derived(params: SystemParams) -> DerivedQuantities:
    cj = tuple(cooperativity(params, j) for j in range(1, params.n_channels + 1))
    single = params.n_channels == 1
    return DerivedQuantities(
        C=cj[0] if single else sum(cj),
        C_j=cj,
        t_crit=critical_time(params) if single else None,
        P_adiabatic=adiabatic_limit(params) if single else None,
        P_instant=instant_excitation_limit(params) if single else None,
        g_eff=effective_coupling(params),
    )
