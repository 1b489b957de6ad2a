"""Global KAM atlas for the perturbed spherical pendulum.

Subpackages cover the constrained geometry and integrator, the
energy-momentum fibration, action-angle data, Diophantine frequency sets,
monodromy, local KAM conjugacies, their global gluing and trajectory
frequency verification.
"""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .geometry import HamiltonianSpec, Trajectory, integrate, integrate_many  # noqa: F401
from .fibration import ValueClass, classify, em_map, boundary_point  # noqa: F401
from .action_angle import ChartSpec, action_angle_data, frequency_map, frequency_jacobian  # noqa: F401
from .diophantine import DiophantineParams, FrequencyDomain, is_diophantine, measure_estimate  # noqa: F401
from .monodromy import LoopPath, monodromy_matrix  # noqa: F401
from .kam import KamConfig, LocalConjugacy, solve_invariance, validate_torus  # noqa: F401
from .glue import GlobalConjugacy, build_partition, glue, verify_global_conjugacy  # noqa: F401
from .freqverify import extract_frequencies, trajectory_frequencies  # noqa: F401
