"""Model parameters and the Hartree-Fock energy surface of the LMG model.

Energies are in units of the level splitting ``epsilon`` and times in
``hbar/epsilon``. The coupling is given through the dimensionless
``chi = V (N - 1) / epsilon``; the bare interaction ``V`` is derived.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ModelParams:
    n_particles: int
    chi: float
    epsilon: float = 1.0

    def __post_init__(self):
        if isinstance(self.n_particles, bool) or int(self.n_particles) != self.n_particles:
            raise ConfigError(f"n_particles must be an integer, got {self.n_particles!r}")
        object.__setattr__(self, "n_particles", int(self.n_particles))
        if self.n_particles < 2:
            raise ConfigError(f"n_particles must be >= 2, got {self.n_particles}")
        if not math.isfinite(self.chi):
            raise ConfigError(f"chi must be finite, got {self.chi!r}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.chi < 0:
            warnings.warn(
                f"chi={self.chi} < 0 is outside the validated regime", stacklevel=3
            )

    @property
    def interaction(self) -> float:
        """Bare two-body strength V."""
        return self.chi * self.epsilon / (self.n_particles - 1)

    @property
    def j(self) -> float:
        return self.n_particles / 2

    @classmethod
    def from_interaction(cls, n_particles, interaction, epsilon=1.0):
        return cls(n_particles, interaction * (n_particles - 1) / epsilon, epsilon)


@dataclass(frozen=True)
class HfPoint:
    alpha: float
    phi: float
    energy: float


def hf_energy(alpha, phi, params: ModelParams):
    """HF energy of the product state rotated by (alpha, phi).

    Works elementwise on arrays.
    """
    n, eps, chi = params.n_particles, params.epsilon, params.chi
    s2a = np.sin(2 * alpha)
    e = -(eps * n / 2) * (np.cos(2 * alpha) + (chi / 2) * s2a * s2a * np.cos(2 * phi))
    return float(e) if np.ndim(e) == 0 else e


def hf_minimize(params: ModelParams) -> HfPoint:
    """Global minimum of the HF energy with alpha, phi in [0, pi/2].

    Uses the closed-form stationarity condition cos(2 alpha) = 1/|chi| above
    threshold. A negative chi is absorbed by phi = pi/2, which flips the sign
    of cos(2 phi).
    """
    chi = params.chi
    phi = 0.0 if chi >= 0 else math.pi / 2
    strength = abs(chi)
    alpha = 0.0 if strength <= 1 else 0.5 * math.acos(1 / strength)
    return HfPoint(alpha, phi, hf_energy(alpha, phi, params))


def hf_minimum_energy(params: ModelParams) -> float:
    strength = abs(params.chi)
    if strength <= 1:
        return -params.epsilon * params.n_particles / 2
    return -(params.epsilon * params.n_particles / 4) * (strength + 1 / strength)


def landscape_scan(params, alpha_min, alpha_max, n_points, phi=0.0):
    """HF energy on a uniform alpha grid (endpoints included) at fixed phi."""
    if int(n_points) != n_points or n_points < 2:
        raise ConfigError(f"n_points must be an integer >= 2, got {n_points!r}")
    if not alpha_min < alpha_max:
        raise ConfigError(f"need alpha_min < alpha_max, got [{alpha_min}, {alpha_max}]")
    alphas = np.linspace(alpha_min, alpha_max, int(n_points))
    energies = hf_energy(alphas, phi, params)
    return [HfPoint(float(a), float(phi), float(e)) for a, e in zip(alphas, energies)]
