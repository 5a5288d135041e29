"""Fast self-checks of the solvers' invariants, run by ``lmg-smf verify``."""

from __future__ import annotations

import math

import numpy as np

from .ensemble import EnsembleConfig, run_ensemble
from .exact import (
    SpinMultipletBasis,
    build_hamiltonian,
    build_spin_matrices,
    exact_timeseries,
    two_level_jz,
)
from .meanfield import SADDLE, IntegratorConfig, mf_conserved, mf_rhs, trajectory_array
from .model import ModelParams, hf_minimize

PRESETS = (0.5, 1.8, 5.0)


def _check_hf_threshold():
    worst = 0.0
    for chi in (0.25, 0.5, 0.99, 1.01, 1.8, 5.0, 50.0):
        pt = hf_minimize(ModelParams(40, chi))
        worst = max(worst, pt.alpha if chi <= 1 else abs(math.cos(2 * pt.alpha) - 1 / chi))
    return worst < 1e-10, f"worst angle error {worst:.2e}"


def _check_commutator():
    worst = 0.0
    for n in (1, 2, 7, 40):
        jx, jy, jz = build_spin_matrices(SpinMultipletBasis(n))
        worst = max(worst, np.abs(jx @ jy - jy @ jx - 1j * jz).max())
    return worst < 1e-12, f"max |[Jx,Jy] - iJz| = {worst:.2e}"


def _check_two_level():
    t = np.linspace(0, 20, 401)
    worst = 0.0
    for chi in (0.5, 2.0, 10.0):
        p = ModelParams(2, chi)
        worst = max(worst, np.abs(exact_timeseries(p, t).mean_J[:, 2] - two_level_jz(p, t)).max())
    return worst < 1e-10, f"max deviation {worst:.2e}"


def _check_exact_invariants():
    t = np.linspace(0, 50, 501)
    norm = energy = parity = casimir = 0.0
    for chi in PRESETS:
        s = exact_timeseries(ModelParams(40, chi), t)
        norm = max(norm, np.abs(s.norm - 1).max())
        energy = max(energy, np.abs(s.energy - s.energy[0]).max())
        parity = max(parity, np.abs(s.mean_J[:, :2]).max())
        casimir = max(casimir, np.abs(s.casimir - 20 * 21).max())
    ok = norm < 1e-12 and energy < 1e-10 and parity < 1e-10 and casimir < 1e-10
    return ok, f"norm {norm:.1e}, energy {energy:.1e}, <Jx>,<Jy> {parity:.1e}, casimir {casimir:.1e}"


def _check_saddle():
    cfg = IntegratorConfig("rk2", 0.01, 50.0)
    traj = trajectory_array(SADDLE, ModelParams(40, 5.0), cfg, np.arange(0, 50.5, 0.5))
    dev = np.abs(traj - np.array(SADDLE)).max()
    return dev < 1e-14, f"max deviation from saddle {dev:.1e}"


def _check_mf_conservation():
    rng = np.random.default_rng(7)
    v = rng.normal(size=(3, 20))
    v /= 2 * np.linalg.norm(v, axis=0)
    worst = 0.0
    for chi in PRESETS:
        p = ModelParams(40, chi)
        out = trajectory_array(tuple(v), p, IntegratorConfig("rk4", 1e-3, 10.0), [10.0])[0]
        a0, e0 = mf_conserved(tuple(v), p)
        a1, e1 = mf_conserved(tuple(out), p)
        worst = max(worst, np.abs(a1 - a0).max(), np.abs(e1 - e0).max())
    return worst < 1e-8, f"worst drift {worst:.1e} (rk4, dt=1e-3, t=10)"


def _check_flow_symmetry():
    rng = np.random.default_rng(3)
    j = tuple(rng.uniform(-0.5, 0.5, size=(3, 100)))
    p = ModelParams(40, 1.8)
    a = mf_rhs((-j[0], -j[1], j[2]), p)
    b = mf_rhs(j, p)
    dev = max(np.abs(a[0] + b[0]).max(), np.abs(a[1] + b[1]).max(), np.abs(a[2] - b[2]).max())
    return dev <= 1e-14, f"max asymmetry {dev:.1e}"


def _check_ensemble():
    p = ModelParams(40, 1.8)
    cfg = EnsembleConfig(IntegratorConfig("rk2", 0.01, 1.0), (0.0, 1.0), 20_000, 11)
    run = run_ensemble(p, cfg)
    again = run_ensemble(p, cfg)
    same = np.array_equal(run.mean_J, again.mean_J) and np.array_equal(run.var_J, again.var_J)
    t0 = run.stats()[0]
    ok = (
        same
        and t0.mean_J[2] == -20.0
        and t0.var_J[2] == 0.0
        and all(abs(v - 10) < 0.5 for v in t0.var_J[:2])
    )
    return ok, f"t=0 dispersions {tuple(round(v, 3) for v in t0.var_J)}, reproducible={same}"


def _check_hamiltonian_structure():
    h = build_hamiltonian(ModelParams(40, 5.0), SpinMultipletBasis(40))
    offsets = np.subtract.outer(np.arange(41), np.arange(41))
    stray = np.abs(h[(offsets != 0) & (np.abs(offsets) != 2)]).max()
    return stray == 0 and np.array_equal(h, h.T), f"entries off diagonals 0, +-2: {stray:.1e}"


CHECKS = {
    "hf threshold": _check_hf_threshold,
    "spin commutator": _check_commutator,
    "hamiltonian band structure": _check_hamiltonian_structure,
    "two-level oracle": _check_two_level,
    "exact invariants": _check_exact_invariants,
    "saddle stationarity": _check_saddle,
    "mean-field conservation": _check_mf_conservation,
    "flow symmetry": _check_flow_symmetry,
    "ensemble moments/determinism": _check_ensemble,
}


def run_checks():
    """Yield ``(name, passed, detail)`` for every check."""
    for name, check in CHECKS.items():
        ok, detail = check()
        yield name, bool(ok), detail
