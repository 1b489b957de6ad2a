import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import ellipk

from torus_atlas.action_angle import (
    ChartSpec,
    action_angle_data,
    action_J,
    frequency_jacobian,
    frequency_map,
    integrable_embedding,
    nondegeneracy_scan,
    periods,
    translate_on_torus,
    values_from_actions,
)
from torus_atlas.errors import DomainError
from torus_atlas.fibration import reduced_roots
from torus_atlas.freqverify import turning_point
from torus_atlas.geometry import HamiltonianSpec, integrate
from torus_atlas.kam import invariance_residual

# 30-digit mpmath quadratures of the defining integrals, frozen
J_00 = 0.53935260118837935
T_02_05 = 4.2286810479215839
THETA_02_05 = 3.7221517396368764
J_02_05 = 0.74605394364710503


def elliptic_period(I, E):
    """T = 2 sqrt(2) K(m) / sqrt(z3 - z1), m = (z2 - z1) / (z3 - z1)."""
    z1, z2, z3 = reduced_roots((I, E)).roots
    return 2.0 * np.sqrt(2.0) * ellipk((z2 - z1) / (z3 - z1)) / np.sqrt(z3 - z1)


def test_frozen_quadrature_values():
    assert action_J((0.0, 0.0)) == pytest.approx(J_00, abs=1e-12)
    d = action_angle_data((0.2, 0.5))
    assert d.T == pytest.approx(T_02_05, rel=1e-12)
    assert d.theta == pytest.approx(THETA_02_05, rel=1e-12)
    assert d.J == pytest.approx(J_02_05, rel=1e-12)


def test_planar_period_is_half_pendulum_period():
    T = periods((0.0, 0.0))[0]
    assert T == pytest.approx(2.0 * ellipk(0.5), abs=1e-6)
    assert T == pytest.approx(3.70815, abs=1e-5)
    w = frequency_map((0.0, 0.0))
    assert w[0] == pytest.approx(2.0 * np.pi / 3.70815, abs=1e-5)
    assert w[1] == pytest.approx(np.pi / T, rel=1e-12)


@pytest.mark.parametrize("v", [(0.1, -0.5), (0.3, 0.2), (0.7, 1.3), (-0.4, 0.6), (0.05, 1.5)])
def test_period_against_elliptic_oracle(v):
    assert periods(v)[0] == pytest.approx(elliptic_period(*v), rel=1e-12)


def test_harmonic_limit():
    d = action_angle_data((0.0, -1.0 + 1e-7))
    assert d.T == pytest.approx(np.pi, abs=1e-6)
    assert d.theta == pytest.approx(np.pi, abs=1e-6)
    w = frequency_map((0.0, -1.0 + 1e-7))
    assert np.allclose(w, (2.0, 1.0), atol=1e-6)


def test_action_vanishes_at_stable_equilibrium():
    assert action_J((0.0, -1.0 + 1e-8)) < 1e-7


def test_singular_values_rejected():
    for v in [(0.0, 1.0), (0.0, -1.0), (1.0, -1.0)]:
        with pytest.raises(DomainError):
            action_angle_data(v)


def test_trajectory_timing_oracle():
    """z-minima spacing gives T, azimuth advance between minima gives theta."""
    spec = HamiltonianSpec()
    tr = integrate(turning_point((0.2, 0.5)), spec, 20.0, 1e-3)
    p3 = tr.states[:, 5]
    idx = np.where((p3[:-1] < 0) & (p3[1:] >= 0))[0]
    times, phis = [], []
    for i in idx:
        s = tr.states[i]
        g = lambda tau: integrate(s, spec, tau, tau).states[-1, 5] if tau > 0 else s[5]
        tau = brentq(g, 0.0, 1e-3, xtol=1e-15)
        x = integrate(s, spec, tau, tau).states[-1]
        times.append(tr.times[i] + tau)
        phis.append(np.arctan2(x[1], x[0]))
    T = np.diff(times)
    adv = np.mod(np.diff(np.unwrap(phis)), 2 * np.pi)
    T_q, theta_q, _ = periods((0.2, 0.5))
    assert np.max(np.abs(T / T_q - 1)) < 1e-6
    assert np.max(np.abs(adv / theta_q - 1)) < 1e-6


@pytest.mark.parametrize("v", [(0.2, 0.5), (0.4, 0.0), (-0.3, 0.9), (0.6, 1.8)])
def test_action_period_duality(v):
    h = 1e-5
    I, E = v
    d = action_angle_data(v)
    dJ_dE = (action_J((I, E + h)) - action_J((I, E - h))) / (2 * h)
    dJ_dI = (action_J((I + h, E)) - action_J((I - h, E))) / (2 * h)
    assert dJ_dE == pytest.approx(d.T / (2 * np.pi), abs=1e-8)
    assert dJ_dI == pytest.approx(-d.theta_lift / (2 * np.pi), abs=1e-8)


def test_theta_lift_branch():
    assert np.pi < action_angle_data((0.2, 0.5)).theta_lift < 2 * np.pi
    assert -2 * np.pi < action_angle_data((-0.2, 0.5)).theta_lift < -np.pi


def test_values_from_actions_roundtrip():
    J = action_J((0.3, 0.4))
    v = values_from_actions(0.3, J, 0.2)
    assert v.E == pytest.approx(0.4, abs=1e-12)


def test_jacobian_richardson_consistent():
    rng = np.random.default_rng(3)
    for _ in range(3):
        v = (rng.uniform(0.1, 0.5), rng.uniform(-0.3, 0.7))
        a, _ = frequency_jacobian(v, 1e-3)
        b, _ = frequency_jacobian(v, 5e-4)
        rich = b + (b - a) / 3.0
        assert np.max(np.abs(b - rich)) < 1e-6
        assert abs(np.linalg.det(b)) > 0


def test_determinant_self_check():
    jac, _ = frequency_jacobian((0.2, 0.5))
    dup = np.vstack([jac[0], jac[0]])
    assert np.linalg.det(dup) == 0.0
    assert abs(np.linalg.det(jac)) > 0


def test_nondegeneracy_scan_small():
    scan = nondegeneracy_scan((0.1, 0.4), (0.0, 0.6), (4, 4))
    assert scan.min_abs_det > 0
    assert scan.det.shape == (4, 4)


def test_nondegeneracy_scan_flags_singular_points():
    with pytest.raises(DomainError):
        nondegeneracy_scan((0.05, 0.6), (-0.5, 0.8), (4, 4))
    scan = nondegeneracy_scan((0.05, 0.6), (-0.5, 0.8), (4, 4), skip_singular=True)
    assert len(scan.skipped) > 0
    assert np.isnan(scan.det).sum() == len(scan.skipped)


def test_chart_validation():
    ChartSpec(1, (0.15, 0.35), (0.3, 0.7)).validate()
    with pytest.raises(DomainError):
        ChartSpec(1, (-0.1, 0.1), (0.8, 1.2)).validate()
    with pytest.raises(ValueError):
        ChartSpec(1, (0.3, 0.1), (0.3, 0.7))


def test_integrable_embedding():
    v = (0.2, 0.5)
    K = integrable_embedding(v, 64)
    z1 = reduced_roots(v).z1
    x = K.evaluate(np.zeros(2))
    assert x[2] == pytest.approx(z1, abs=1e-12)
    assert abs(np.arctan2(x[1], x[0])) < 1e-12
    assert invariance_residual(K, K.omega) <= 1e-8
    assert np.allclose(K.omega, frequency_map(v), rtol=1e-8)


def test_translate_on_torus():
    K = integrable_embedding((0.2, 0.5), 32)
    assert np.array_equal(translate_on_torus(K, (0.0, 0.0)).coeffs, K.coeffs)
    back = translate_on_torus(translate_on_torus(K, (0.3, -1.1)), (-0.3, 1.1))
    assert np.max(np.abs(back.coeffs - K.coeffs)) < 1e-10
    th = np.array([[0.4, 2.0], [5.0, 1.0]])
    Kc = translate_on_torus(K, (np.pi, 0.0))
    assert np.allclose(Kc.evaluate(th), K.evaluate(th + [np.pi, 0.0]), atol=1e-12)
    # Hermitian symmetry of the coefficients of a real map
    c = Kc.coeffs
    flip = np.roll(c[:, ::-1, ::-1], 1, axis=(1, 2))
    assert np.max(np.abs(c - np.conj(flip))) < 1e-10
