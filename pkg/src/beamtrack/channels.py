"""Ground-truth channel generation for the three dynamics classes, plus the
in-main-lobe initial-estimate model.

Scenario kinds: quasi-static Rician gain with a fixed arrival; fast Rayleigh
gain redrawn each cycle with a fixed arrival; Gauss-Markov gain with a
reflected random walk over the arrival angles.  The per-element pattern
attenuates the path gain into the equivalent gain actually observed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .arrays import (Aoa, ArrayConfig, PatternConfig, aoa_from_dpv,
                     dpv_from_aoa, element_gain)
from .signal import ChannelParams, OffsetSet, build_ebm, observe
from .trackers import bootstrap_gain

AOA_REGIONS = {
    "central": ((-np.pi / 6, np.pi / 6), (np.pi / 3, 2 * np.pi / 3)),
    "edge": ((np.pi / 3, np.pi / 2), (5 * np.pi / 6, np.pi)),
}


@dataclass(frozen=True)
class QuasiStatic:
    """Fixed arrival and fixed Rician path gain (unit mean power)."""

    rician_k_db: float = 15.0


@dataclass(frozen=True)
class DynamicI:
    """Fixed arrival, Rayleigh path gain redrawn independently per cycle."""

    sigma_beta_c_sq: float = 1.0

    def __post_init__(self):
        if self.sigma_beta_c_sq <= 0:
            raise ValueError("gain variance must be positive")


@dataclass(frozen=True)
class DynamicII:
    """Gauss-Markov path gain plus a reflected random walk over the angles.

    ``delta_a`` is the per-cycle angular step deviation in radians; the walk
    reflects at the configured angle ranges (defaults: the arrival region).
    """

    rho: float = 0.995
    delta_a: float = np.deg2rad(0.3)
    theta_range: Optional[tuple] = None
    phi_range: Optional[tuple] = None

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must be in (0, 1]")
        if self.delta_a <= 0:
            raise ValueError("delta_a must be positive")


ScenarioKind = Union[QuasiStatic, DynamicI, DynamicII]


@dataclass(frozen=True)
class ScenarioConfig:
    kind: ScenarioKind
    aoa_region: Union[str, tuple] = "central"
    pattern: PatternConfig = PatternConfig()

    def ranges(self):
        if isinstance(self.aoa_region, str):
            try:
                return AOA_REGIONS[self.aoa_region]
            except KeyError:
                raise ValueError(f"unknown arrival region {self.aoa_region!r}")
        (t_lo, t_hi), (p_lo, p_hi) = self.aoa_region
        return (float(t_lo), float(t_hi)), (float(p_lo), float(p_hi))


@dataclass
class ChannelState:
    """Ground truth for one trial at one cycle: arrival angle, its direction
    coordinates, the path gain, and the pattern-weighted equivalent gain."""

    aoa: Aoa
    x: np.ndarray
    beta_c: complex
    beta_eff: complex
    ecc_index: int = 0

    @property
    def params(self) -> ChannelParams:
        return ChannelParams.from_parts(self.beta_eff, self.x)


def _cn(rng: np.random.Generator, var: float = 1.0) -> complex:
    z = rng.standard_normal(2)
    return complex(z[0], z[1]) * np.sqrt(var / 2.0)


def _draw_gain(kind: ScenarioKind, rng: np.random.Generator) -> complex:
    if isinstance(kind, QuasiStatic):
        kappa = 10.0 ** (kind.rician_k_db / 10.0)
        los = np.sqrt(kappa / (kappa + 1.0)) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        return complex(los + _cn(rng, 1.0 / (kappa + 1.0)))
    if isinstance(kind, DynamicI):
        return _cn(rng, kind.sigma_beta_c_sq)
    return _cn(rng, 1.0)  # Gauss-Markov stationary start


def init_channel(sc: ScenarioConfig, cfg: ArrayConfig,
                 rng: np.random.Generator) -> ChannelState:
    """Uniform arrival over the scenario's angle region plus a gain draw."""
    (t_lo, t_hi), (p_lo, p_hi) = sc.ranges()
    aoa = Aoa(float(rng.uniform(t_lo, t_hi)), float(rng.uniform(p_lo, p_hi)))
    beta_c = _draw_gain(sc.kind, rng)
    x = dpv_from_aoa(cfg, aoa).as_array()
    eta = element_gain(sc.pattern, aoa)
    return ChannelState(aoa, x, beta_c, eta * beta_c)


def _reflect(value: float, lo: float, hi: float) -> float:
    # fold back into [lo, hi]; per-cycle steps are far smaller than the range
    for _ in range(8):
        if value > hi:
            value = 2 * hi - value
        elif value < lo:
            value = 2 * lo - value
        else:
            break
    return float(np.clip(value, lo, hi))


def evolve(state: ChannelState, sc: ScenarioConfig, cfg: ArrayConfig,
           rng: np.random.Generator) -> ChannelState:
    """Per-cycle channel transition; identity for the quasi-static kind."""
    kind = sc.kind
    if isinstance(kind, QuasiStatic):
        return state
    if isinstance(kind, DynamicI):
        beta_c = _cn(rng, kind.sigma_beta_c_sq)
        eta = element_gain(sc.pattern, state.aoa)
        return ChannelState(state.aoa, state.x, beta_c, eta * beta_c,
                            state.ecc_index + 1)
    (t_lo, t_hi), (p_lo, p_hi) = sc.ranges()
    t_rng = kind.theta_range or (t_lo, t_hi)
    p_rng = kind.phi_range or (p_lo, p_hi)
    theta = _reflect(state.aoa.theta + rng.normal(0.0, kind.delta_a), *t_rng)
    phi = _reflect(state.aoa.phi + rng.normal(0.0, kind.delta_a), *p_rng)
    aoa = Aoa(theta, phi)
    beta_c = complex(kind.rho * state.beta_c + _cn(rng, 1.0 - kind.rho**2))
    x = dpv_from_aoa(cfg, aoa).as_array()
    eta = element_gain(sc.pattern, aoa)
    return ChannelState(aoa, x, beta_c, eta * beta_c, state.ecc_index + 1)


def initial_estimate(state: ChannelState, cfg: ArrayConfig,
                     rng: np.random.Generator, halfwidth: float = 0.5,
                     offsets: Optional[OffsetSet] = None) -> ChannelParams:
    """In-main-lobe initial estimate: the direction is uniform within
    +-halfwidth of the truth per coordinate; the gain comes from a bootstrap
    least-squares fit over one extra probing cycle when ``offsets`` are
    given (otherwise zero).
    """
    if not 0 <= halfwidth < 1:
        raise ValueError("halfwidth must lie in [0, 1)")
    x0 = state.x + rng.uniform(-halfwidth, halfwidth, 2)
    beta0 = 0.0 + 0.0j
    if offsets is not None:
        ebm = build_ebm(cfg, x0, offsets)
        y0 = observe(cfg, state.params, ebm, rng)
        beta0 = bootstrap_gain(cfg, ebm, x0, y0)
    return ChannelParams.from_parts(beta0, x0)


def estimated_gain_variance(sc: ScenarioConfig, cfg: ArrayConfig, x_hat,
                            sigma_beta_c_sq: float) -> float:
    """Equivalent-gain variance inferred from the pattern at the current
    direction estimate (clamped to the physical cone)."""
    aoa = aoa_from_dpv(cfg, x_hat, clamp=True)
    eta = element_gain(sc.pattern, aoa)
    return float(eta**2 * sigma_beta_c_sq)
