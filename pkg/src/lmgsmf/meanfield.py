"""Mean-field (TDHF) equations of motion for the scaled quasi-spin j = <J>/N.

The integrators are vectorised: a state is a tuple ``(jx, jy, jz)`` of equal
shape arrays, so one call advances any number of independent trajectories
with bitwise the same arithmetic as advancing each one alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, IntegrationError
from .model import ModelParams

SCHEMES = ("rk2", "rk4")
# relative slack when deciding that a time sits on the step grid
ALIGN_TOL = 1e-9

SADDLE = (0.0, 0.0, -0.5)


class SpinVector(NamedTuple):
    jx: float
    jy: float
    jz: float


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "rk2"
    dt: float = 0.01
    t_end: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", str(self.scheme).lower())
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose one of {', '.join(SCHEMES)}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ConfigError(f"t_end must be >= 0, got {self.t_end!r}")

    @property
    def n_steps(self) -> int:
        ratio = self.t_end / self.dt
        k = round(ratio)
        if abs(ratio - k) <= ALIGN_TOL * max(1.0, ratio):
            return int(k)
        return math.ceil(ratio)

    def step_time(self, k: int) -> float:
        return self.t_end if k >= self.n_steps else k * self.dt

    def step_index(self, t: float, strict: bool = True) -> int:
        """Index of the grid point at time ``t``.

        With ``strict`` the time must sit on the grid (a multiple of dt or
        t_end itself); otherwise the nearest grid point is returned.
        """
        if not -ALIGN_TOL <= t <= self.t_end * (1 + ALIGN_TOL) + ALIGN_TOL:
            raise ConfigError(f"sample time {t} outside [0, {self.t_end}]")
        n = self.n_steps
        if abs(t - self.t_end) <= ALIGN_TOL * max(1.0, self.t_end):
            return n
        ratio = t / self.dt
        k = min(round(ratio), n)
        if strict and abs(ratio - k) > ALIGN_TOL * max(1.0, ratio):
            raise ConfigError(
                f"sample time {t} is not a multiple of dt={self.dt}; choose an aligned output interval"
            )
        return int(k)


def mf_rhs(j, params: ModelParams):
    """Time derivative of (jx, jy, jz); accepts scalars or arrays."""
    jx, jy, jz = j
    eps, chi = params.epsilon, params.chi
    return (
        eps * jy * (2 * chi * jz - 1),
        eps * jx * (2 * chi * jz + 1),
        -4 * eps * chi * jx * jy,
    )


def mf_conserved(j, params: ModelParams):
    """(spin length squared, energy per particle in units of epsilon)."""
    jx, jy, jz = j
    length_sq = jx * jx + jy * jy + jz * jz
    energy = params.epsilon * (jz - params.chi * (jx * jx - jy * jy))
    return length_sq, energy


def tdhf_dispersions(j, n_particles):
    """Quantal variances of J_i in the product state with scaled spin j."""
    return tuple(n_particles * (0.25 - c * c) for c in j)


def _heun(y, h, f):
    k1 = f(y)
    k2 = f(tuple(a + h * b for a, b in zip(y, k1)))
    return tuple(a + (h / 2) * (b + c) for a, b, c in zip(y, k1, k2))


def _rk4(y, h, f):
    k1 = f(y)
    k2 = f(tuple(a + (h / 2) * b for a, b in zip(y, k1)))
    k3 = f(tuple(a + (h / 2) * b for a, b in zip(y, k2)))
    k4 = f(tuple(a + h * b for a, b in zip(y, k3)))
    return tuple(
        a + (h / 6) * (b1 + 2 * b2 + 2 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
    )


_STEPPERS = {"rk2": _heun, "rk4": _rk4}


def propagate(j0, params: ModelParams, cfg: IntegratorConfig, sample_steps, on_sample):
    """Advance ``j0`` over the step grid, calling ``on_sample(i, state)``.

    ``sample_steps`` is a sorted sequence of grid indices; ``on_sample`` is
    invoked with the position ``i`` in that sequence each time the state
    reaches the corresponding grid point.
    """
    step = _STEPPERS[cfg.scheme]
    f = lambda y: mf_rhs(y, params)  # noqa: E731
    y = tuple(np.asarray(c, dtype=float) for c in j0)
    n = cfg.n_steps
    sample_steps = list(sample_steps)
    if sample_steps != sorted(sample_steps):
        raise ConfigError("sample times must be sorted")
    i = 0
    while i < len(sample_steps) and sample_steps[i] == 0:
        on_sample(i, y)
        i += 1
    last = sample_steps[-1] if sample_steps else 0
    for k in range(min(n, last)):
        h = cfg.dt if k + 1 < n else cfg.t_end - k * cfg.dt
        with np.errstate(over="ignore", invalid="ignore"):
            y = step(y, h, f)
        finite = np.isfinite(y[0]) & np.isfinite(y[1]) & np.isfinite(y[2])
        if not finite.all():
            err = IntegrationError(
                f"non-finite mean-field state at step {k + 1} (t={cfg.step_time(k + 1):g})",
                step=k + 1,
            )
            err.position = int(np.flatnonzero(~finite.ravel())[0])
            raise err
        while i < len(sample_steps) and sample_steps[i] == k + 1:
            on_sample(i, y)
            i += 1
    return y


def integrate_trajectory(j0, params: ModelParams, cfg: IntegratorConfig, sample_times):
    """Single trajectory; returns ``[(t, SpinVector), ...]`` at the sample times.

    Sample times off the step grid are snapped to the nearest grid point.
    """
    times = [float(t) for t in sample_times]
    steps = [cfg.step_index(t, strict=False) for t in times]
    out = [None] * len(times)

    def record(i, y):
        out[i] = (times[i], SpinVector(*(float(c) for c in y)))

    propagate(SpinVector(*j0), params, cfg, steps, record)
    return out


def trajectory_array(j0, params, cfg, sample_times):
    """Vectorised variant: ``j0`` components may be arrays; returns (T, 3, ...)."""
    steps = [cfg.step_index(float(t), strict=False) for t in sample_times]
    shape = np.broadcast(*[np.asarray(c) for c in j0]).shape
    out = np.empty((len(steps), 3) + shape)

    def record(i, y):
        for c in range(3):
            out[i, c] = y[c]

    propagate(tuple(np.broadcast_to(np.asarray(c, float), shape) for c in j0), params, cfg, steps, record)
    return out


@dataclass(frozen=True)
class TdhfSeries:
    """One deterministic mean-field run in particle units.

    Dispersions are those of the product state itself, N (1/4 - j_i^2), which
    stay at (N/4, N/4, 0) for the saddle.
    """

    params: ModelParams
    times: np.ndarray
    mean_J: np.ndarray  # (T, 3)
    var_J: np.ndarray  # (T, 3)
    energy: np.ndarray  # (T,)

    def rows(self):
        return [
            {"t": float(t), "Jx": m[0], "Jy": m[1], "Jz": m[2],
             "var_x": v[0], "var_y": v[1], "var_z": v[2], "energy": float(e)}
            for t, m, v, e in zip(self.times, self.mean_J.tolist(), self.var_J.tolist(), self.energy)
        ]


def tdhf_timeseries(params: ModelParams, cfg: IntegratorConfig, sample_times, j0=SADDLE) -> TdhfSeries:
    traj = integrate_trajectory(j0, params, cfg, sample_times)
    j = np.array([v for _, v in traj])
    n = params.n_particles
    return TdhfSeries(
        params=params,
        times=np.array([t for t, _ in traj]),
        mean_J=n * j,
        var_J=np.array([tdhf_dispersions(v, n) for v in j]),
        energy=n * mf_conserved(j.T, params)[1],
    )
