import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from lmgsmf import ConfigError, IntegrationError, ModelParams
from lmgsmf.meanfield import (
    SADDLE,
    IntegratorConfig,
    SpinVector,
    integrate_trajectory,
    mf_conserved,
    mf_rhs,
    tdhf_dispersions,
    tdhf_timeseries,
    trajectory_array,
)

comp = st.floats(-1, 1, allow_nan=False)


def symbolic_flow():
    """Right-hand side as the literal matrix-vector product of the flow matrix."""
    jx, jy, jz, chi, eps = sp.symbols("jx jy jz chi epsilon", real=True)
    m = sp.Matrix([
        [0, -1 + chi * jz, chi * jy],
        [1 + chi * jz, 0, chi * jx],
        [-2 * chi * jy, -2 * chi * jx, 0],
    ])
    return (jx, jy, jz, chi, eps), eps * m * sp.Matrix([jx, jy, jz])


def larmor(j0, t, eps=1.0):
    z = (j0[0] + 1j * j0[1]) * np.exp(1j * eps * t)
    return z.real, z.imag


def test_rhs_matches_matrix_product_symbolically():
    (jx, jy, jz, chi, eps), flow = symbolic_flow()
    p_sym = type("P", (), {"epsilon": eps, "chi": chi})
    ours = mf_rhs((jx, jy, jz), p_sym)
    for a, b in zip(ours, flow):
        assert sp.simplify(sp.expand(a - b)) == 0


def test_conserved_quantities_have_zero_derivative_symbolically():
    (jx, jy, jz, chi, eps), flow = symbolic_flow()
    p_sym = type("P", (), {"epsilon": eps, "chi": chi})
    for q in mf_conserved((jx, jy, jz), p_sym):
        dq = sum(sp.diff(q, v) * f for v, f in zip((jx, jy, jz), flow))
        assert sp.simplify(sp.expand(dq)) == 0


@pytest.mark.parametrize("chi", [0.0, 0.5, 1.8, 5.0, 1e6])
def test_saddle_is_exact_equilibrium(chi):
    assert mf_rhs(SADDLE, ModelParams(40, chi)) == (0.0, 0.0, 0.0)


def test_rhs_examples():
    assert mf_rhs((0.3, -0.2, 0.1), ModelParams(40, 0.0)) == pytest.approx((0.2, 0.3, 0.0))
    assert mf_rhs((0.1, 0.0, -0.4), ModelParams(40, 5.0)) == pytest.approx((0.0, -0.3, 0.0), abs=1e-15)


def test_rhs_scales_with_epsilon():
    j = (0.2, -0.1, -0.3)
    a = mf_rhs(j, ModelParams(40, 1.8, epsilon=2.5))
    b = mf_rhs(j, ModelParams(40, 1.8))
    assert a == pytest.approx(tuple(2.5 * x for x in b), rel=1e-15)


@given(comp, comp, comp, st.floats(-10, 10))
def test_flow_symmetry(jx, jy, jz, chi):
    p = ModelParams(40, abs(chi))
    a = mf_rhs((-jx, -jy, jz), p)
    b = mf_rhs((jx, jy, jz), p)
    assert abs(a[0] + b[0]) <= 1e-14 and abs(a[1] + b[1]) <= 1e-14 and abs(a[2] - b[2]) <= 1e-14


def test_conserved_examples():
    assert mf_conserved((0.0, 0.0, -0.5), ModelParams(40, 1.0)) == (0.25, -0.5)
    assert mf_conserved((0.5, 0.0, 0.0), ModelParams(40, 2.0)) == (0.25, -0.5)


def test_tdhf_dispersions_at_saddle():
    assert tdhf_dispersions(SADDLE, 40) == (10.0, 10.0, 0.0)


class TestIntegratorConfig:
    def test_steps_land_on_t_end(self):
        cfg = IntegratorConfig("rk2", 0.01, 0.035)
        assert cfg.n_steps == 4
        assert cfg.step_time(4) == 0.035
        assert IntegratorConfig("rk2", 0.01, 50.0).n_steps == 5000
        assert IntegratorConfig("rk4", 0.1, 0.3).n_steps == 3

    def test_alignment(self):
        cfg = IntegratorConfig("rk2", 0.01, 1.0)
        assert cfg.step_index(0.3) == 30
        assert cfg.step_index(1.0) == 100
        with pytest.raises(ConfigError, match="not a multiple"):
            cfg.step_index(0.305)
        assert cfg.step_index(0.304, strict=False) == 30
        with pytest.raises(ConfigError, match="outside"):
            cfg.step_index(1.5)

    @pytest.mark.parametrize("kwargs", [dict(scheme="euler"), dict(dt=0.0), dict(dt=-1), dict(t_end=-1.0)])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            IntegratorConfig(**kwargs)


@pytest.mark.parametrize("scheme", ["rk2", "rk4"])
@pytest.mark.parametrize("chi", [0.5, 1.8, 5.0])
def test_saddle_trajectory_is_constant(scheme, chi):
    out = integrate_trajectory(SADDLE, ModelParams(40, chi), IntegratorConfig(scheme, 0.01, 50.0), [0.0, 25.0, 50.0])
    assert [v for _, v in out] == [SpinVector(0.0, 0.0, -0.5)] * 3


def test_larmor_precession_rk4():
    j0 = (0.12, -0.05, -0.5)
    cfg = IntegratorConfig("rk4", 1e-3, 10.0)
    out = integrate_trajectory(j0, ModelParams(40, 0.0), cfg, [10.0])
    t, j = out[0]
    x, y = larmor(j0, t)
    assert abs(j.jx - x) <= 1e-9 and abs(j.jy - y) <= 1e-9 and j.jz == -0.5


def test_sample_times_are_hit_exactly():
    j0 = (0.1, 0.0, -0.5)
    cfg = IntegratorConfig("rk2", 0.01, 1.0)
    out = integrate_trajectory(j0, ModelParams(40, 0.0), cfg, [0.0, 0.5, 1.0])
    assert [t for t, _ in out] == [0.0, 0.5, 1.0]
    assert out[0][1] == SpinVector(*j0)
    # the first half of a run equals a run stopped half way
    half = integrate_trajectory(j0, ModelParams(40, 0.0), IntegratorConfig("rk2", 0.01, 0.5), [0.5])
    assert half[0][1] == out[1][1]


def test_supercritical_departure_from_saddle():
    cfg = IntegratorConfig("rk4", 1e-3, 20.0)
    times = np.arange(0, 20.01, 0.05)
    traj = trajectory_array((1e-3, 0.0, -0.5), ModelParams(40, 5.0), cfg, times)
    assert np.abs(traj[:, 2] + 0.5).max() > 0.1


@pytest.mark.parametrize("chi", [0.5, 1.8, 5.0])
def test_conservation_rk4(chi):
    rng = np.random.default_rng(int(chi * 10))
    v = rng.normal(size=(3, 16))
    v /= 2 * np.linalg.norm(v, axis=0)
    p = ModelParams(40, chi)
    end = trajectory_array(tuple(v), p, IntegratorConfig("rk4", 1e-3, 20.0), [20.0])[0]
    for a, b in zip(mf_conserved(tuple(v), p), mf_conserved(tuple(end), p)):
        assert np.abs(a - b).max() < 1e-8


def test_vectorised_matches_single_trajectory_bitwise():
    rng = np.random.default_rng(5)
    v = rng.normal(scale=0.05, size=(3, 7))
    v[2] = -0.5
    p = ModelParams(40, 1.8)
    cfg = IntegratorConfig("rk2", 0.01, 2.0)
    batch = trajectory_array(tuple(v), p, cfg, [2.0])[0]
    for k in range(7):
        single = integrate_trajectory(tuple(v[:, k]), p, cfg, [2.0])[0][1]
        assert tuple(batch[:, k]) == tuple(single)


def global_error(scheme, dt, t_end=10.0):
    j0 = (0.3, 0.1, -0.2)
    out = integrate_trajectory(j0, ModelParams(40, 0.0), IntegratorConfig(scheme, dt, t_end), [t_end])
    x, y = larmor(j0, t_end)
    j = out[0][1]
    return math.hypot(j.jx - x, j.jy - y)


@pytest.mark.parametrize("scheme, dt, order", [("rk2", 0.02, 2), ("rk4", 0.1, 4)])
def test_convergence_order(scheme, dt, order):
    measured = math.log2(global_error(scheme, dt) / global_error(scheme, dt / 2))
    assert abs(measured - order) <= 0.2


def finite_difference_jacobian(p, h=1e-6):
    jac = np.zeros((3, 3))
    for k in range(3):
        up, dn = list(SADDLE), list(SADDLE)
        up[k] += h
        dn[k] -= h
        jac[:, k] = (np.array(mf_rhs(up, p)) - np.array(mf_rhs(dn, p))) / (2 * h)
    return jac


@pytest.mark.parametrize("chi", [0.0, 0.5, 0.9, 1.1, 1.8, 5.0])
def test_linear_stability_threshold(chi):
    ev = np.linalg.eigvals(finite_difference_jacobian(ModelParams(40, chi)))
    if chi < 1:
        assert np.abs(ev.real).max() < 1e-8
        assert np.abs(ev.imag).max() == pytest.approx(math.sqrt(1 - chi**2), rel=1e-6)
    else:
        assert ev.real.max() == pytest.approx(math.sqrt(chi**2 - 1), rel=1e-6)


@pytest.mark.parametrize("chi, grows", [(0.5, False), (5.0, True)])
def test_tiny_perturbation_growth(chi, grows):
    traj = trajectory_array((1e-8, 0.0, -0.5), ModelParams(40, chi), IntegratorConfig("rk4", 1e-2, 5.0),
                            np.arange(0, 5.01, 0.1))
    amp = np.hypot(traj[:, 0], traj[:, 1]).max()
    assert (amp > 1e-6) == grows


def test_non_finite_state_aborts_with_step():
    with pytest.raises(IntegrationError) as info:
        integrate_trajectory((np.inf, 0.0, -0.5), ModelParams(40, 1.0), IntegratorConfig("rk2", 0.01, 1.0), [1.0])
    assert info.value.step == 1 and "step 1" in str(info.value)


def test_tdhf_series_constant_at_saddle():
    s = tdhf_timeseries(ModelParams(40, 5.0), IntegratorConfig("rk2", 0.01, 50.0), np.arange(0, 501) * 0.1)
    assert np.all(s.mean_J == [0.0, 0.0, -20.0])
    assert np.all(s.var_J == [10.0, 10.0, 0.0])
    assert np.all(s.energy == -20.0)
