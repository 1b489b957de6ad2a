import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from torus_atlas.fibration import (
    ValueClass,
    boundary_point,
    classify,
    cubic,
    em_map,
    lower_energy,
    reduced_roots,
)
from torus_atlas.geometry import project


def test_em_map_examples():
    assert tuple(em_map([0, 0, -1, 0, 0, 0])) == (0.0, -1.0)
    assert tuple(em_map([0, 0, 1, 0, 0, 0])) == (0.0, 1.0)
    assert tuple(em_map([1, 0, 0, 0, 1, 0])) == (1.0, 0.5)


@pytest.mark.parametrize("v, cls", [
    ((0.0, 1.0), ValueClass.FOCUS_FOCUS),
    ((0.0, -1.0), ValueClass.STABLE_EQUILIBRIUM),
    ((0.0, 0.0), ValueClass.REGULAR),
    ((0.2, 0.5), ValueClass.REGULAR),
    ((1.0, -0.5), ValueClass.EXTERIOR),
    ((0.0, -1.5), ValueClass.EXTERIOR),
])
def test_classify_examples(v, cls):
    assert classify(v) is cls


def test_boundary_example_value():
    b = boundary_point(-1.0 / np.sqrt(2.0))
    assert b.I == pytest.approx(0.59460, abs=5e-6)
    assert b.E == pytest.approx(-0.35355, abs=5e-6)
    assert classify(b) is ValueClass.BOUNDARY_CURVE
    # the printed rounding lies 4e-6 off the curve, outside the default tolerance
    assert classify((0.59460, -0.35355), tol=1e-5) is ValueClass.BOUNDARY_CURVE


@pytest.mark.parametrize("zs", [-0.9, -0.7, -0.3, -0.05])
def test_boundary_has_double_root(zs):
    b = boundary_point(zs)
    assert abs(cubic(zs, b.I, b.E)) < 1e-14
    dcubic = -2.0 * (1.0 - zs * zs) - 4.0 * zs * (b.E - zs)
    assert abs(dcubic) < 1e-14
    assert lower_energy(b.I)[0] == pytest.approx(b.E, abs=1e-14)


def test_lower_energy_stable_for_tiny_momentum():
    e, zs = lower_energy(1e-17)
    assert e == pytest.approx(-1.0, abs=1e-12)
    assert lower_energy(0.0) == (-1.0, -1.0)


@pytest.mark.parametrize("v, roots", [
    ((0.0, 0.0), (-1.0, 0.0, 1.0)),
    ((0.0, 0.5), (-1.0, 0.5, 1.0)),
])
def test_roots_trivial(v, roots):
    assert np.allclose(reduced_roots(v).roots, roots, atol=1e-14)


def test_roots_bisection_oracle():
    r = reduced_roots((0.2, 0.5))
    assert -1 < r.z1 < r.z2 < 1 < r.z3
    f = lambda z: cubic(z, 0.2, 0.5)
    ref = [brentq(f, -1.0, 0.0, xtol=1e-15), brentq(f, 0.0, 0.99, xtol=1e-15),
           brentq(f, 1.0, 2.0, xtol=1e-15)]
    assert np.allclose(r.roots, ref, atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.4, 1.4), st.floats(0.01, 2.5))
def test_roots_against_numpy(I, dE):
    E = lower_energy(I)[0] + dE
    if classify((I, E)) is not ValueClass.REGULAR:
        return
    r = reduced_roots((I, E))
    ref = np.sort(np.roots([2.0, -2.0 * E, -2.0, 2.0 * E - I * I]).real)
    assert np.allclose(r.roots, ref, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_image_of_phase_points_is_not_exterior(raw):
    x = np.array(raw)
    if np.linalg.norm(x[:3]) < 1e-2:
        return
    assert classify(em_map(project(x)), tol=1e-9) is not ValueClass.EXTERIOR


def test_cubic_sign_convention():
    # positive between the two physical roots, where the motion lives
    r = reduced_roots((0.2, 0.5))
    assert cubic(0.5 * (r.z1 + r.z2), 0.2, 0.5) > 0
    assert cubic(1.0, 0.2, 0.5) == pytest.approx(-0.04)
