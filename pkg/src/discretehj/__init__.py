"""Discrete Hamilton-Jacobi theory, Riccati and Bellman recursions, Galerkin control Hamiltonians.

The subpackages follow the mathematics bottom-up:

``core``      phase points, discrete Hamiltonians and Lagrangians, Newton solver
``dmech``     discrete Hamilton's equations, Legendre transforms, action sums
``linhj``     quadratic Hamiltonians, Riccati recurrence, Lagrangian affine spaces
``dhj``       discrete Hamilton-Jacobi residuals, implicit maps, Jacobi's solution
``docp``      discrete optimal control, grid Bellman recursion, costates
``galerkin``  Galerkin discrete control Hamiltonians and the Heisenberg benchmark
``cli``       the ``discretehj`` command-line driver
"""

__version__ = "0.1.0"

from .core import (
    DiscreteHamiltonianLeft,
    DiscreteHamiltonianRight,
    DiscreteLagrangian,
    GeneratingFunction,
    GeneratingFunctionSequence,
    NewtonConfig,
    PhasePoint,
    newton_solve,
)
from .dmech import Trajectory, integrate
from .exceptions import (
    BoundaryWarning,
    ConvergenceError,
    DegeneracyError,
    DiscreteHJError,
    EvaluationError,
    GridEscapeError,
    NonConcavityWarning,
    PrecisionError,
    RiccatiBreakdownError,
    SingularJacobianError,
    SingularMatrixError,
    TransversalityError,
)
from .linhj import (
    LagrangianAffineSpace,
    LinearHamiltonianMap,
    QuadraticGeneratingFunction,
    QuadraticLeftHamiltonian,
)
from .dhj import HJSolutionTable, jacobi_solution
from .docp import BellmanSolver, DiscreteOCP, GridSpec, LQProblem, bellman_backward
from .galerkin import ControlSystem, GalerkinTableau, heisenberg_system

__all__ = [
    "__version__",
    "BellmanSolver",
    "BoundaryWarning",
    "ControlSystem",
    "ConvergenceError",
    "DegeneracyError",
    "DiscreteHJError",
    "DiscreteHamiltonianLeft",
    "DiscreteHamiltonianRight",
    "DiscreteLagrangian",
    "DiscreteOCP",
    "EvaluationError",
    "GalerkinTableau",
    "GeneratingFunction",
    "GeneratingFunctionSequence",
    "GridEscapeError",
    "GridSpec",
    "HJSolutionTable",
    "LQProblem",
    "LagrangianAffineSpace",
    "LinearHamiltonianMap",
    "NewtonConfig",
    "NonConcavityWarning",
    "PhasePoint",
    "PrecisionError",
    "QuadraticGeneratingFunction",
    "QuadraticLeftHamiltonian",
    "RiccatiBreakdownError",
    "SingularJacobianError",
    "SingularMatrixError",
    "Trajectory",
    "TransversalityError",
    "bellman_backward",
    "heisenberg_system",
    "integrate",
    "jacobi_solution",
    "newton_solve",
]
