import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torus_atlas.errors import InvalidPointError
from torus_atlas.geometry import (
    HamiltonianSpec,
    angular_momentum,
    check_point,
    hamiltonian,
    integrate,
    integrate_many,
    perturbation,
    project,
    rattle_step,
    step,
    vector_field,
)

GENERIC = project(np.array([0.6, 0.3, -0.5, 0.1, 0.9, -0.2]))


def test_hamiltonian_at_equilibria():
    assert hamiltonian([0, 0, -1, 0, 0, 0]) == -1.0
    assert hamiltonian([0, 0, 1, 0, 0, 0]) == 1.0
    assert hamiltonian([1, 0, 0, 0, 1, 0]) == 0.5


def test_perturbations_by_substitution():
    x = np.array([0.6, 0.0, 0.8, 0.0, 1.0, 0.0])
    assert perturbation(x, 1) == pytest.approx(0.6)
    assert perturbation(x, 2) == pytest.approx(0.48)
    assert perturbation(x, 3) == pytest.approx(0.4)
    spec = HamiltonianSpec(0.1, 2)
    assert hamiltonian(x, spec) == pytest.approx(0.5 + 0.8 + 0.1 * 0.48)


def test_constraint_violation_rejected():
    with pytest.raises(InvalidPointError):
        check_point([1.0, 0.1, 0.0, 0.0, 0.0, 0.0])
    with pytest.raises(InvalidPointError):
        check_point([1.0, 0.0, 0.0, 0.5, 0.0, 0.0])
    with pytest.raises(InvalidPointError):
        check_point([1.0, 0.0, 0.0])


def test_unknown_perturbation_rejected():
    with pytest.raises(ValueError):
        HamiltonianSpec(0.1, 9)
    with pytest.raises(ValueError):
        HamiltonianSpec(-1e-3, 1)


@pytest.mark.parametrize("z", [-1.0, 1.0])
def test_equilibria_are_fixed(z):
    x = np.array([0, 0, z, 0, 0, 0], dtype=float)
    assert np.all(vector_field(x) == 0.0)
    tr = integrate(x, HamiltonianSpec(), 5.0, 1e-2)
    assert np.max(np.abs(tr.states - x)) < 1e-15


def test_field_is_tangent_and_conserves_energy():
    # directional derivative of H along the field vanishes
    v = vector_field(GENERIC)
    d = 1e-6
    dE = (hamiltonian(project(GENERIC + d * v), tol=1e-6)
          - hamiltonian(project(GENERIC - d * v), tol=1e-6)) / (2 * d)
    assert abs(dE) < 1e-8
    q, p = GENERIC[:3], GENERIC[3:]
    assert abs(q @ v[:3]) < 1e-14
    # d/dt <q, p> = |p|^2 + <q, pdot> = 0
    assert abs(p @ v[:3] + q @ v[3:]) < 1e-13


def test_field_matches_trajectory_derivative():
    spec = HamiltonianSpec(0.05, 3)
    h = 1e-4
    fd = (step(GENERIC, h, spec) - step(GENERIC, -h, spec)) / (2 * h)
    assert np.allclose(fd, vector_field(GENERIC, spec), atol=1e-7)


def test_energy_and_momentum_conservation():
    tr = integrate(GENERIC, HamiltonianSpec(), 100.0, 1e-3, sample_every=100)
    E = hamiltonian(tr.states)
    I = angular_momentum(tr.states)
    assert np.max(np.abs(E - E[0])) <= 1e-9
    assert np.max(np.abs(I - I[0])) <= 1e-9


def test_matches_finer_reference():
    spec = HamiltonianSpec(1e-2, 1)
    a = integrate(GENERIC, spec, 10.0, 1e-2).states[-1]
    b = integrate(GENERIC, spec, 10.0, 1e-3).states[-1]
    assert np.max(np.abs(a - b)) < 1e-8


def test_convergence_order_at_least_two():
    spec = HamiltonianSpec(0.1, 2)
    ref = integrate(GENERIC, spec, 4.0, 1e-3).states[-1]
    errs = [np.max(np.abs(integrate(GENERIC, spec, 4.0, h).states[-1] - ref))
            for h in (0.2, 0.1)]
    assert np.log2(errs[0] / errs[1]) > 2.0


def test_rattle_step_reversible():
    spec = HamiltonianSpec(0.1, 1)
    for h in (1e-2, 1e-3):
        back = rattle_step(rattle_step(GENERIC, h, spec), -h, spec)
        assert np.max(np.abs(back - GENERIC)) < 1e-12
        back = step(step(GENERIC, h, spec), -h, spec)
        assert np.max(np.abs(back - GENERIC)) < 1e-12


def test_constraints_preserved():
    tr = integrate(GENERIC, HamiltonianSpec(1e-2, 3), 20.0, 1e-2)
    check_point(tr.states, tol=1e-12)


def test_integrate_many_matches_single():
    x2 = project(np.array([0.1, -0.7, 0.2, 0.5, 0.1, 0.3]))
    spec = HamiltonianSpec(1e-3, 1)
    t, s = integrate_many(np.stack([GENERIC, x2]), spec, 2.0, 1e-2, sample_every=5)
    tr = integrate(x2, spec, 2.0, 1e-2, sample_every=5)
    assert np.array_equal(t, tr.times)
    assert np.array_equal(s[1], tr.states)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_projection_lands_on_constraint_set(raw):
    x = np.array(raw)
    if np.linalg.norm(x[:3]) < 1e-3:
        return
    y = project(x)
    check_point(y, tol=1e-13)
    assert np.allclose(project(y), y, atol=1e-15)
