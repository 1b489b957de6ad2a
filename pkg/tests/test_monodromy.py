import numpy as np
import pytest

from torus_atlas.action_angle import action_angle_data
from torus_atlas.errors import DomainError, RefinementError
from torus_atlas.freqverify import turning_point
from torus_atlas.geometry import HamiltonianSpec, integrate
from torus_atlas.monodromy import (
    LoopPath,
    continue_rotation,
    monodromy_matrix,
    winding_number,
)

AROUND = LoopPath.circle((0.0, 1.0), 0.3, 64)
AWAY = LoopPath.circle((0.3, 0.0), 0.2, 32)


def test_positive_loop():
    rep = monodromy_matrix(AROUND)
    assert rep.delta_theta == pytest.approx(2 * np.pi, abs=1e-6)
    assert rep.matrix.tolist() == [[1, 1], [0, 1]]
    assert rep.winding == 1


def test_reversed_loop():
    rep = monodromy_matrix(AROUND.reversed())
    assert rep.delta_theta == pytest.approx(-2 * np.pi, abs=1e-6)
    assert rep.matrix.tolist() == [[1, -1], [0, 1]]


def test_contractible_loop_is_identity():
    rep = monodromy_matrix(AWAY)
    assert abs(rep.delta_theta) < 1e-9
    assert rep.matrix.tolist() == [[1, 0], [0, 1]]
    assert winding_number(AWAY) == 0


def test_two_turns_and_concatenation():
    two = monodromy_matrix(LoopPath.circle((0.0, 1.0), 0.3, 128, turns=2))
    assert two.matrix.tolist() == [[1, 2], [0, 1]]
    cat = monodromy_matrix(AROUND.concatenate(AROUND))
    one = monodromy_matrix(AROUND).matrix
    assert np.array_equal(cat.matrix, one @ one)
    side = LoopPath.circle((0.45, 1.0), 0.15, 32, start=np.pi)
    assert monodromy_matrix(side).matrix.tolist() == [[1, 0], [0, 1]]
    mixed = monodromy_matrix(AROUND.concatenate(side.reversed()))
    assert mixed.matrix.tolist() == [[1, 1], [0, 1]]


def test_polygon_loop_is_homotopy_invariant():
    square = LoopPath.polygon([(0.4, 0.6), (0.4, 1.4), (-0.4, 1.4), (-0.4, 0.6)])
    assert winding_number(square) == 1
    assert monodromy_matrix(square).matrix.tolist() == [[1, 1], [0, 1]]


def test_loop_through_singular_set_rejected():
    with pytest.raises(DomainError):
        continue_rotation(LoopPath.polygon([(0.3, 1.0), (-0.3, 1.0), (0.0, 1.3)]))
    with pytest.raises(DomainError):
        continue_rotation(LoopPath.circle((0.0, -1.0), 0.1, 16))


def test_concatenation_needs_common_base_point():
    with pytest.raises(ValueError):
        AROUND.concatenate(AWAY)


def test_refinement_budget():
    with pytest.raises(RefinementError):
        continue_rotation(AROUND, budget=10)


def test_trajectory_rotation_oracle():
    """Azimuth advance per z-period, measured on trajectories at 8 loop points,
    lifted by integer-jump detection, reproduces Delta Theta = 2 pi."""
    spec = HamiltonianSpec()
    pts = LoopPath.circle((0.0, 1.0), 0.3, 8, start=np.pi / 8).vertices[:-1]
    measured = []
    for v in pts:
        T = action_angle_data(tuple(v)).T
        n = int(round(T / 1e-3))
        tr = integrate(turning_point(v), spec, n * (T / n), T / n)
        phi = np.unwrap(np.arctan2(tr.states[:, 1], tr.states[:, 0]))
        measured.append(phi[-1] - phi[0])
        assert np.mod(phi[-1] - phi[0], 2 * np.pi) == pytest.approx(
            action_angle_data(tuple(v)).theta, abs=1e-6)
    measured = np.array(measured + [measured[0]])
    jumps = np.diff(measured)
    wrapped = (jumps + np.pi) % (2 * np.pi) - np.pi
    total = float(np.sum(wrapped))
    assert np.max(np.abs(wrapped)) < np.pi / 2
    assert total == pytest.approx(2 * np.pi, abs=1e-6)
    ref = continue_rotation(AROUND)
    assert ref.delta_theta == pytest.approx(2 * np.pi, abs=1e-6)
