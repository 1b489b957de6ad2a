import numpy as np
import pytest

from torus_atlas.action_angle import integrable_embedding
from torus_atlas.geometry import HamiltonianSpec, project, vector_field
from torus_atlas.torus import (
    TorusEmbedding,
    angle_grid,
    canonical_field,
    canonical_hamiltonian,
    canonical_jacobian,
    cartesian_to_stereographic,
    stereographic_to_cartesian,
    wavenumbers,
)


def random_points(n, seed=0):
    rng = np.random.default_rng(seed)
    x = project(rng.normal(size=(n, 6)))
    return x[x[:, 2] < 0.9]


def test_wavenumbers_zero_nyquist():
    k = wavenumbers(8)
    assert list(k) == [0, 1, 2, 3, 0, -3, -2, -1]


def test_stereographic_roundtrip():
    x = random_points(50)
    assert np.allclose(stereographic_to_cartesian(cartesian_to_stereographic(x)), x, atol=1e-12)


@pytest.mark.parametrize("eps, pid", [(0.0, 1), (0.1, 1), (0.1, 2), (0.1, 3)])
def test_canonical_coordinates_agree_with_cartesian(eps, pid):
    from torus_atlas.geometry import hamiltonian
    spec = HamiltonianSpec(eps, pid)
    x = random_points(30, 1)
    y = cartesian_to_stereographic(x)
    assert np.allclose(canonical_hamiltonian(y, eps, pid), hamiltonian(x, spec), atol=1e-12)
    # pushforward of the canonical field equals the constrained field
    h = 1e-6
    dy = canonical_field(y, eps, pid)
    dx = (stereographic_to_cartesian(y + h * dy) - stereographic_to_cartesian(y - h * dy)) / (2 * h)
    assert np.allclose(dx, vector_field(x, spec), atol=1e-7)


def test_canonical_jacobian_matches_differences():
    y = cartesian_to_stereographic(random_points(5, 2))
    J = canonical_jacobian(y, 0.1, 3)
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (canonical_field(y + e, 0.1, 3) - canonical_field(y - e, 0.1, 3)) / (2 * h)
        assert np.allclose(J[..., j], fd, atol=1e-7)


def test_grid_roundtrip_and_evaluation():
    N = 16
    t1, t2 = angle_grid(N)
    vals = np.stack([np.cos(t1) + 0.1 * np.sin(2 * t2 - t1)] * 6, axis=-1)
    K = TorusEmbedding.from_grid(vals, (1.0, 0.5))
    assert np.allclose(K.grid_values(), vals, atol=1e-14)
    th = np.array([[0.3, 1.7]])
    assert np.allclose(K.evaluate(th)[0, 0], np.cos(0.3) + 0.1 * np.sin(3.4 - 0.3), atol=1e-14)
    jac = K.evaluate_jacobian(th)[0, 0]
    assert np.allclose(jac, [-np.sin(0.3) - 0.1 * np.cos(3.1), 0.2 * np.cos(3.1)], atol=1e-13)
    # omega = (1, 0.5) annihilates the 2 t2 - t1 mode
    assert np.allclose(K.derivative()[..., 0], -np.sin(t1), atol=1e-13)


def test_tail_small_for_smooth_torus():
    K = integrable_embedding((0.2, 0.5), 64)
    assert K.tail() < 1e-10
