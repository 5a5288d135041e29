"""Exact quantal dynamics inside the j = N/2 quasi-spin multiplet.

States are amplitude vectors over |j, m> with m = -j, ..., +j in increasing
order, so index 0 is the fully polarised state |j, -j>. Propagation is
spectral (dense eigendecomposition), which carries no time-step error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, EigensolverError
from .model import ModelParams

NORM_TOL = 1e-12
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class SpinMultipletBasis:
    n_particles: int

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ConfigError(f"n_particles must be a positive integer, got {self.n_particles!r}")

    @property
    def j(self) -> float:
        return self.n_particles / 2

    @property
    def dim(self) -> int:
        return self.n_particles + 1

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(self.dim) - self.j


class SpinMatrices(NamedTuple):
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray


@dataclass(frozen=True)
class QuantumState:
    basis: SpinMultipletBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise ConfigError(f"expected {self.basis.dim} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @classmethod
    def lowest_weight(cls, basis):
        """The state |j, -j> with every particle in the lower level."""
        amps = np.zeros(basis.dim, dtype=complex)
        amps[0] = 1.0
        return cls(basis, amps)


@dataclass(frozen=True)
class ExactObservables:
    time: float
    mean_J: tuple
    var_J: tuple
    energy: float


def _raising(basis):
    m = basis.m_values[:-1]
    j = basis.j
    # <m+1|J+|m> sits on the first subdiagonal with increasing-m ordering
    return np.diag(np.sqrt(j * (j + 1) - m * (m + 1)), k=-1)


def build_spin_matrices(basis: SpinMultipletBasis) -> SpinMatrices:
    jp = _raising(basis)
    jm = jp.T
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    jz = np.diag(basis.m_values)
    return SpinMatrices(jx, jy, jz)


def build_hamiltonian(params: ModelParams, basis: SpinMultipletBasis) -> np.ndarray:
    """Real symmetric H = eps Jz - (V/2)(J+^2 + J-^2)."""
    if basis.n_particles != params.n_particles:
        raise ConfigError(
            f"basis has N={basis.n_particles} but params have N={params.n_particles}"
        )
    jp = _raising(basis)
    jp2 = jp @ jp
    return params.epsilon * np.diag(basis.m_values) - (params.interaction / 2) * (jp2 + jp2.T)


class Spectrum(NamedTuple):
    energies: np.ndarray
    vectors: np.ndarray


def diagonalize(h) -> Spectrum:
    h = np.asarray(h)
    try:
        energies, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigendecomposition did not converge: {exc}") from exc
    scale = max(np.linalg.norm(h, 2), 1.0)
    residual = np.linalg.norm(h @ vectors - vectors * energies, axis=0).max()
    if not residual <= RESIDUAL_TOL * scale:
        raise EigensolverError(
            f"eigenpair residual {residual:.3e} exceeds {RESIDUAL_TOL:g} * ||H|| = {RESIDUAL_TOL * scale:.3e}"
        )
    return Spectrum(energies, vectors)


def _parity_sectors(h):
    """Index sets of the even/odd m-sectors if ``h`` never couples them."""
    dim = h.shape[0]
    idx = np.arange(dim)
    odd_offset = (np.subtract.outer(idx, idx) % 2).astype(bool)
    if dim > 1 and not np.any(h[odd_offset]):
        return [idx[0::2], idx[1::2]]
    return [idx]


def spectral_blocks(h, parity_blocks=None):
    """Eigendecomposition of ``h``, split by m-parity when possible.

    ``parity_blocks=None`` splits whenever the matrix structure allows it,
    which keeps an unpopulated sector exactly empty during propagation.
    """
    h = np.asarray(h)
    if parity_blocks is False:
        sectors = [np.arange(h.shape[0])]
    else:
        sectors = _parity_sectors(h)
        if parity_blocks and len(sectors) == 1:
            raise ConfigError("Hamiltonian couples opposite m-parities; cannot split")
    return [(sec, diagonalize(h[np.ix_(sec, sec)])) for sec in sectors]


def _propagate(amplitudes, blocks, times):
    """Amplitudes at each time as a (len(times), dim) array."""
    times = np.asarray(times, dtype=float)
    amplitudes = np.asarray(amplitudes)
    psi = np.zeros((len(times), len(amplitudes)), dtype=complex)
    for sector, (energies, vectors) in blocks:
        coeffs = vectors.conj().T @ amplitudes[sector]
        phases = np.exp(-1j * np.outer(times, energies))
        psi[:, sector] = (phases * coeffs) @ vectors.T
    return psi


def evolve_exact(state0: QuantumState, h, times, parity_blocks=None) -> list[QuantumState]:
    """Spectral propagation of ``state0``; no time-step error."""
    if abs(state0.norm - 1) > NORM_TOL:
        raise ConfigError(f"initial state norm {state0.norm!r} is not 1")
    if not np.allclose(h, np.asarray(h).conj().T, rtol=0, atol=1e-14):
        raise ConfigError("Hamiltonian is not Hermitian")
    psi = _propagate(state0.amplitudes, spectral_blocks(h, parity_blocks), times)
    out = []
    for t, amps in zip(times, psi):
        if t == 0:
            out.append(state0)
        else:
            out.append(QuantumState(state0.basis, amps))
    return out


def _squared_spin_matrices(basis):
    """Jx^2, Jy^2, Jz^2 assembled so that their diagonals are exact.

    {J+, J-} = 2 (J^2 - Jz^2) is diagonal with exactly representable entries;
    only the m <-> m+-2 elements carry square-root rounding.
    """
    jp = _raising(basis)
    jp2 = jp @ jp
    m = basis.m_values
    anti = np.diag(2 * (basis.j * (basis.j + 1) - m * m))
    return ((jp2 + jp2.T + anti) / 4, (anti - jp2 - jp2.T) / 4, np.diag(m * m))


def _expect(psi, op):
    return np.einsum("tm,tm->t", psi.conj(), psi @ op.T).real


def _moments(psi, matrices, h, squares=None):
    """Means, variances and energy for a stack of states psi[t, m]."""
    if squares is None:
        squares = [op @ op for op in matrices]
    means, variances = [], []
    for op, op2 in zip(matrices, squares):
        mean = _expect(psi, op)
        means.append(mean)
        variances.append(_expect(psi, op2) - mean**2)
    energy = _expect(psi, np.asarray(h))
    return np.stack(means, axis=1), np.stack(variances, axis=1), energy


def exact_observables(state: QuantumState, jx, jy, jz, h, time=0.0) -> ExactObservables:
    means, variances, energy = _moments(state.amplitudes[None, :], (jx, jy, jz), h)
    return ExactObservables(
        float(time), tuple(means[0].tolist()), tuple(variances[0].tolist()), float(energy[0])
    )


@dataclass(frozen=True)
class ExactSeries:
    """Observables of an exact run on a time grid, stored column-wise."""

    params: ModelParams
    times: np.ndarray
    mean_J: np.ndarray  # (T, 3)
    var_J: np.ndarray  # (T, 3)
    energy: np.ndarray  # (T,)
    norm: np.ndarray  # (T,)
    casimir: np.ndarray  # (T,) <Jx^2 + Jy^2 + Jz^2>

    def observables(self) -> list[ExactObservables]:
        return [
            ExactObservables(float(t), tuple(m.tolist()), tuple(v.tolist()), float(e))
            for t, m, v, e in zip(self.times, self.mean_J, self.var_J, self.energy)
        ]

    def rows(self):
        return [
            {"t": t, "Jx": o.mean_J[0], "Jy": o.mean_J[1], "Jz": o.mean_J[2],
             "var_x": o.var_J[0], "var_y": o.var_J[1], "var_z": o.var_J[2],
             "energy": o.energy}
            for t, o in zip(self.times.tolist(), self.observables())
        ]


def exact_timeseries(params: ModelParams, times, state0: QuantumState | None = None) -> ExactSeries:
    """Evolve |j, -j> (or ``state0``) and record observables at ``times``."""
    basis = SpinMultipletBasis(params.n_particles)
    mats = build_spin_matrices(basis)
    h = build_hamiltonian(params, basis)
    state0 = state0 or QuantumState.lowest_weight(basis)
    times = np.asarray(times, dtype=float)
    psi = _propagate(state0.amplitudes, spectral_blocks(h), times)
    psi[times == 0] = state0.amplitudes
    means, variances, energy = _moments(psi, mats, h, _squared_spin_matrices(basis))
    second = variances + means**2
    return ExactSeries(
        params=params,
        times=times,
        mean_J=means,
        var_J=variances,
        energy=energy,
        norm=np.linalg.norm(psi, axis=1),
        casimir=second.sum(axis=1),
    )


def two_level_jz(params: ModelParams, times):
    """Closed-form <Jz>(t) for N = 2 starting from |1, -1>."""
    if params.n_particles != 2:
        raise ConfigError("two-level formula holds only for N = 2")
    eps, v = params.epsilon, params.interaction
    omega = np.hypot(eps, v)
    return -(eps**2 + v**2 * np.cos(2 * omega * np.asarray(times))) / omega**2
