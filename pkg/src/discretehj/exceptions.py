"""Exception and warning classes raised across the toolkit."""

from __future__ import annotations

import numpy as np


class DiscreteHJError(Exception):
    """Base class for all errors raised by :mod:`discretehj`."""


class EvaluationError(DiscreteHJError, ValueError):
    """A user function returned a non-finite value.

    ``coordinate`` is the index of the perturbed coordinate when the failure
    happened inside a finite-difference stencil, else ``None``.
    """

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class ConvergenceError(DiscreteHJError, ArithmeticError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message, *, x=None, residual_norm=None, iterations=None,
                 index=None):
        super().__init__(message)
        self.x = None if x is None else np.array(x, dtype=float)
        self.residual_norm = residual_norm
        self.iterations = iterations
        self.index = index

    def at(self, context, index=None):
        """Return a copy of this error with ``context`` prepended to the message."""
        err = type(self)(f"{context}: {self}", x=self.x,
                         residual_norm=self.residual_norm,
                         iterations=self.iterations,
                         index=self.index if index is None else index)
        return err


class SingularJacobianError(ConvergenceError):
    """Newton stopped because the Jacobian was numerically singular."""


class SingularMatrixError(DiscreteHJError, np.linalg.LinAlgError):
    """A matrix that must be inverted is singular or too ill-conditioned."""


class RiccatiBreakdownError(SingularMatrixError):
    """The Riccati recurrence hit a singular intermediate matrix."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TransversalityError(SingularMatrixError):
    """A Lagrangian space is not a graph over the configuration space."""


class DegeneracyError(DiscreteHJError, ValueError):
    """A subspace basis lost rank."""


class GridEscapeError(DiscreteHJError, ValueError):
    """A state left the value grid by more than the allowed margin."""

    def __init__(self, message, stage=None, node=None):
        super().__init__(message)
        self.stage = stage
        self.node = node


class PrecisionError(DiscreteHJError, ArithmeticError):
    """Two quadrature rules of different order disagree."""


class NonConcavityWarning(RuntimeWarning):
    """The control Hamiltonian is not strictly concave at the returned control."""


class BoundaryWarning(RuntimeWarning):
    """A derivative had to fall back to a one-sided stencil near a grid edge."""
