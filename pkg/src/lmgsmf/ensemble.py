"""Stochastic mean-field ensembles.

Each trajectory starts from the saddle ``(0, 0, -1/2)`` with Gaussian
fluctuations of variance ``1/(4N)`` in jx and jy, then follows the ordinary
mean-field flow. Ensemble means and dispersions are

    J_i = N * mean(j_i),    Delta_i^2 = N^2 * (mean(j_i^2) - mean(j_i)^2)

with population (1/M) moments.

Reproducibility: trajectory ``k`` draws its two uniforms from a SplitMix64
counter stream keyed by the master seed, then applies Box-Muller. Trajectories
are processed in fixed blocks of ``BLOCK_SIZE`` and the block partial sums are
merged in block order with Neumaier summation, so the result does not depend
on how many worker processes computed the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, IntegrationError
from .meanfield import SADDLE, IntegratorConfig, SpinVector, mf_conserved, propagate
from .model import ModelParams

BLOCK_SIZE = 8192
DEFAULT_TRAJECTORIES = 100_000

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _splitmix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _stream_key(master_seed: int) -> np.uint64:
    if isinstance(master_seed, bool) or int(master_seed) != master_seed or master_seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {master_seed!r}")
    return _splitmix64(np.uint64(int(master_seed) & _MASK64))[()]


def counter_uniforms(master_seed: int, counters):
    """Uniforms in (0, 1] at positions ``counters`` of the seed's stream."""
    key = _stream_key(master_seed)
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = _splitmix64(key + (c + np.uint64(1)) * _GOLDEN)
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


@dataclass(frozen=True)
class TrajectoryStream:
    """Random stream of one trajectory: two uniforms per trajectory index."""

    master_seed: int
    index: int

    def uniforms(self):
        u = counter_uniforms(self.master_seed, [2 * self.index, 2 * self.index + 1])
        return float(u[0]), float(u[1])


def box_muller(u1, u2):
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    return r * np.cos(theta), r * np.sin(theta)


@dataclass(frozen=True)
class SamplingSpec:
    n_particles: int

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ConfigError(f"n_particles must be a positive integer, got {self.n_particles!r}")

    @property
    def sigma(self) -> float:
        return math.sqrt(1 / (4 * self.n_particles))

    jz0 = SADDLE[2]


def sample_initial(spec: SamplingSpec, stream: TrajectoryStream) -> SpinVector:
    gx, gy = box_muller(*stream.uniforms())
    return SpinVector(float(spec.sigma * gx), float(spec.sigma * gy), spec.jz0)


def sample_block(spec: SamplingSpec, master_seed: int, indices, antithetic=False):
    """Initial (jx, jy, jz) arrays for the given trajectory indices.

    With ``antithetic`` trajectory ``2k + 1`` is the (-jx, -jy) mirror of
    trajectory ``2k``, which itself uses the stream of index ``k``.
    """
    indices = np.asarray(indices, dtype=np.int64)
    base = indices // 2 if antithetic else indices
    base = base.astype(np.uint64)
    u1 = counter_uniforms(master_seed, 2 * base)
    u2 = counter_uniforms(master_seed, 2 * base + np.uint64(1))
    gx, gy = box_muller(u1, u2)
    jx, jy = spec.sigma * gx, spec.sigma * gy
    if antithetic:
        sign = np.where(indices % 2 == 1, -1.0, 1.0)
        jx, jy = sign * jx, sign * jy
    return jx, jy, np.full(indices.shape, spec.jz0)


@dataclass(frozen=True)
class EnsembleConfig:
    integrator: IntegratorConfig
    sample_times: tuple
    n_trajectories: int = DEFAULT_TRAJECTORIES
    master_seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if int(self.n_trajectories) != self.n_trajectories or self.n_trajectories < 2:
            raise ConfigError(f"need at least 2 trajectories, got {self.n_trajectories!r}")
        if self.antithetic and self.n_trajectories % 2:
            raise ConfigError("antithetic sampling needs an even number of trajectories")
        _stream_key(self.master_seed)
        times = tuple(float(t) for t in self.sample_times)
        if not times:
            raise ConfigError("no sample times given")
        if list(times) != sorted(times):
            raise ConfigError("sample times must be sorted")
        for t in times:
            self.integrator.step_index(t, strict=True)
        object.__setattr__(self, "sample_times", times)
        object.__setattr__(self, "n_trajectories", int(self.n_trajectories))

    @property
    def sample_steps(self):
        return [self.integrator.step_index(t) for t in self.sample_times]


@dataclass(frozen=True)
class EnsembleStats:
    time: float
    mean_J: tuple
    var_J: tuple
    n_trajectories: int
    mean_energy: float


# columns of a moment table: d_x, d_y, d_z, d_x^2, d_y^2, d_z^2, e
_N_MOMENTS = 7


def _moment_terms(j, shift, energy, pair=False):
    """Per-trajectory moment terms, summed over the trajectory axis."""
    d = [j[c] - shift[c] for c in range(3)]
    terms = d + [x * x for x in d] + [energy]
    if pair:
        # adding mirror partners first makes the odd moments cancel exactly
        terms = [t[0::2] + t[1::2] for t in terms]
    return np.array([np.sum(t) for t in terms])


def _neumaier(parts):
    """Compensated sum of equal-shape arrays, in the given order."""
    total = np.zeros_like(parts[0])
    comp = np.zeros_like(parts[0])
    for x in parts:
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp += np.where(big, (total - t) + x, (x - t) + total)
        total = t
    return total + comp


def _finalize(time, sums, count, shift, n_particles):
    mean_d = sums[0:3] / count
    second = sums[3:6] / count
    var = np.maximum(second - mean_d * mean_d, 0.0) * n_particles**2
    mean = (mean_d + np.asarray(shift)) * n_particles
    return EnsembleStats(
        float(time),
        tuple(mean.tolist()),
        tuple(var.tolist()),
        int(count),
        float(n_particles * sums[6] / count),
    )


def ensemble_stats(samples, n_particles, time=0.0, params: ModelParams | None = None) -> EnsembleStats:
    """Means and dispersions of one ensemble snapshot.

    ``samples`` is a sequence of SpinVectors or an (M, 3) array. The energy
    column is only meaningful when ``params`` is supplied.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ConfigError(f"samples must have shape (M, 3), got {arr.shape}")
    if arr.shape[0] < 2:
        raise ConfigError("dispersions need at least 2 samples")
    j = arr.T
    shift = tuple(arr[0])
    energy = mf_conserved(j, params)[1] if params is not None else np.zeros(arr.shape[0])
    sums = _moment_terms(j, shift, energy)
    return _finalize(time, sums, arr.shape[0], shift, n_particles)


def _run_block(params: ModelParams, cfg: EnsembleConfig, start: int, stop: int):
    """Moment table (S, 7) and worst conservation drift for one block."""
    indices = np.arange(start, stop)
    j0 = sample_block(SamplingSpec(params.n_particles), cfg.master_seed, indices, cfg.antithetic)
    length0, energy0 = mf_conserved(j0, params)
    table = np.empty((len(cfg.sample_times), _N_MOMENTS))
    drift = np.zeros(2)

    def record(i, y):
        length, energy = mf_conserved(y, params)
        drift[0] = max(drift[0], float(np.max(np.abs(length - length0))))
        drift[1] = max(drift[1], float(np.max(np.abs(energy - energy0))))
        table[i] = _moment_terms(y, SADDLE, energy, pair=cfg.antithetic)

    try:
        propagate(j0, params, cfg.integrator, cfg.sample_steps, record)
    except IntegrationError as exc:
        traj = start + (exc.position or 0)
        raise IntegrationError(
            f"{exc} in trajectory {traj} (seed {cfg.master_seed}, antithetic={cfg.antithetic})",
            step=exc.step,
            trajectory=traj,
            seed=cfg.master_seed,
        ) from exc
    return table, drift


def _run_block_args(args):
    return _run_block(*args)


def _blocks(m):
    return [(s, min(s + BLOCK_SIZE, m)) for s in range(0, m, BLOCK_SIZE)]


@dataclass(frozen=True)
class EnsembleRun:
    params: ModelParams
    config: EnsembleConfig
    times: np.ndarray
    mean_J: np.ndarray  # (T, 3)
    var_J: np.ndarray  # (T, 3)
    mean_energy: np.ndarray  # (T,) total energy N * mean(e)
    max_drift: tuple = field(default=(0.0, 0.0))  # (spin length^2, energy per particle)

    def stats(self) -> list[EnsembleStats]:
        m = self.config.n_trajectories
        return [
            EnsembleStats(float(t), tuple(mj.tolist()), tuple(v.tolist()), m, float(e))
            for t, mj, v, e in zip(self.times, self.mean_J, self.var_J, self.mean_energy)
        ]

    def rows(self):
        return [
            {"t": float(t), "Jx": mj[0], "Jy": mj[1], "Jz": mj[2],
             "var_x": v[0], "var_y": v[1], "var_z": v[2], "energy": float(e)}
            for t, mj, v, e in zip(self.times, self.mean_J.tolist(), self.var_J.tolist(), self.mean_energy)
        ]


def run_ensemble(params: ModelParams, cfg: EnsembleConfig, workers: int = 1) -> EnsembleRun:
    """Integrate all trajectories and reduce them to per-time statistics."""
    if int(workers) != workers or workers < 1:
        raise ConfigError(f"workers must be a positive integer, got {workers!r}")
    jobs = [(params, cfg, a, b) for a, b in _blocks(cfg.n_trajectories)]
    if workers == 1 or len(jobs) == 1:
        results = [_run_block(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_block_args, jobs))
    sums = _neumaier([table for table, _ in results])
    drift = np.max([d for _, d in results], axis=0)
    stats = [
        _finalize(t, row, cfg.n_trajectories, SADDLE, params.n_particles)
        for t, row in zip(cfg.sample_times, sums)
    ]
    return EnsembleRun(
        params=params,
        config=cfg,
        times=np.array(cfg.sample_times),
        mean_J=np.array([s.mean_J for s in stats]),
        var_J=np.array([s.var_J for s in stats]),
        mean_energy=np.array([s.mean_energy for s in stats]),
        max_drift=(float(drift[0]), float(drift[1])),
    )
