"""Shared domain types, finite-difference derivatives and the Newton solver.

Every implicit equation in the toolkit (discrete Hamilton's equations, the
implicit maps of the discrete Hamilton-Jacobi equation, Galerkin internal
stages) is solved with :func:`newton_solve`.  Partial derivatives of user
functions default to central finite differences (:func:`fd_gradient`) and can
be replaced by analytic callbacks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._validation import as_vector, readonly
from .exceptions import ConvergenceError, EvaluationError, SingularJacobianError

__all__ = [
    "NewtonConfig",
    "PhasePoint",
    "DiscreteHamiltonianRight",
    "DiscreteHamiltonianLeft",
    "DiscreteLagrangian",
    "GeneratingFunction",
    "GeneratingFunctionSequence",
    "fd_gradient",
    "fd_jacobian",
    "newton_solve",
    "symplectic_form",
]

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class NewtonConfig:
    """Tolerances shared by the Newton solver and the finite-difference stencils.

    Parameters
    ----------
    abs_tol : float
        Absolute tolerance on the infinity norm of the residual.
    max_iter : int
        Maximum number of Newton iterations.
    fd_step_scale : float
        Relative finite-difference step; the step for coordinate ``i`` is
        ``fd_step_scale * max(1, |x_i|)`` rounded to a power of two.
    max_halvings : int
        Step halvings tried when a full Newton step does not reduce the residual.
    max_condition : float
        Jacobians with a larger condition number are treated as singular.
    """

    abs_tol: float = 1e-12
    max_iter: int = 50
    fd_step_scale: float = _EPS ** (1.0 / 3.0)
    max_halvings: int = 30
    max_condition: float = 1e14

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.fd_step_scale > 0:
            raise ValueError("fd_step_scale must be positive")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be non-negative")


DEFAULT_CONFIG = NewtonConfig()


def _resolve(cfg):
    return DEFAULT_CONFIG if cfg is None else cfg


def symplectic_form(n):
    """Canonical symplectic matrix ``[[0, I], [-I, 0]]`` of size ``2n``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


@dataclass(frozen=True)
class PhasePoint:
    """A configuration/momentum pair ``(q, p)``; both vectors have length ``n``."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = as_vector(self.q, "q")
        p = as_vector(self.p, "p", n=q.size)
        object.__setattr__(self, "q", readonly(q))
        object.__setattr__(self, "p", readonly(p))

    @property
    def n(self):
        return self.q.size

    @property
    def z(self):
        """The point as a single vector ``(q, p)`` of length ``2n``."""
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_z(cls, z):
        z = as_vector(z, "z")
        if z.size % 2:
            raise ValueError("phase vector must have even length")
        n = z.size // 2
        return cls(z[:n], z[n:])

    def __eq__(self, other):
        if not isinstance(other, PhasePoint):
            return NotImplemented
        return np.array_equal(self.q, other.q) and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash((self.q.tobytes(), self.p.tobytes()))


def _power_of_two_step(xi, scale):
    # A power-of-two step keeps x +/- h exactly representable, so affine
    # functions are differentiated without cancellation error.
    h = scale * max(1.0, abs(xi))
    return 2.0 ** round(math.log2(h))


def _scalar(f, x, coordinate=None):
    val = f(x)
    try:
        val = float(np.asarray(val, dtype=float).reshape(()))
    except (TypeError, ValueError):
        raise EvaluationError(f"function must return a scalar, got {val!r}",
                              coordinate) from None
    if not math.isfinite(val):
        where = "" if coordinate is None else f" (perturbing coordinate {coordinate})"
        raise EvaluationError(f"non-finite function value at x={x}{where}",
                              coordinate)
    return val


def fd_gradient(f, x, cfg=None):
    """Central-difference gradient of a scalar function.

    Parameters
    ----------
    f : callable
        Scalar function of a vector.
    x : array_like
        Evaluation point.
    cfg : NewtonConfig, optional
        Supplies ``fd_step_scale``.

    Returns
    -------
    numpy.ndarray
        The gradient, same length as ``x``.

    Raises
    ------
    EvaluationError
        If ``f`` is not finite on the stencil; ``coordinate`` names the
        perturbed coordinate.
    """
    cfg = _resolve(cfg)
    x = as_vector(x, "x")
    grad = np.empty_like(x)
    for i in range(x.size):
        h = _power_of_two_step(x[i], cfg.fd_step_scale)
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (_scalar(f, xp, i) - _scalar(f, xm, i)) / (xp[i] - xm[i])
    return grad


def _vector_value(F, x, coordinate=None):
    val = np.atleast_1d(np.asarray(F(x), dtype=float))
    if val.ndim != 1:
        raise EvaluationError(f"function must return a vector, got shape {val.shape}",
                              coordinate)
    if not np.all(np.isfinite(val)):
        where = "" if coordinate is None else f" (perturbing coordinate {coordinate})"
        raise EvaluationError(f"non-finite function value at x={x}{where}",
                              coordinate)
    return val


def fd_jacobian(F, x, cfg=None, rel_step=None):
    """Central-difference Jacobian of a vector function, shape ``(len(F(x)), len(x))``.

    ``rel_step`` overrides ``cfg.fd_step_scale`` for the relative step.
    """
    cfg = _resolve(cfg)
    scale = cfg.fd_step_scale if rel_step is None else rel_step
    x = as_vector(x, "x")
    cols = []
    for i in range(x.size):
        h = _power_of_two_step(x[i], scale)
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((_vector_value(F, xp, i) - _vector_value(F, xm, i)) / (xp[i] - xm[i]))
    return np.column_stack(cols) if cols else np.zeros((0, 0))


def newton_solve(residual, x0, cfg=None, jacobian=None, full_output=False):
    """Solve ``residual(x) = 0`` by damped Newton iteration.

    The Jacobian comes from ``jacobian(x)`` when given, otherwise from
    :func:`fd_jacobian`.  A step that does not decrease the residual norm is
    halved up to ``cfg.max_halvings`` times.

    Parameters
    ----------
    residual : callable
        Vector function of a vector, square system.
    x0 : array_like
        Initial guess.
    cfg : NewtonConfig, optional
    jacobian : callable, optional
        Analytic Jacobian.
    full_output : bool
        Also return the number of iterations taken.

    Returns
    -------
    x : numpy.ndarray
        A point with ``max|residual(x)| <= cfg.abs_tol``.
    iterations : int
        Only when ``full_output`` is true.

    Raises
    ------
    SingularJacobianError
        The Jacobian condition number exceeds ``cfg.max_condition``.
    ConvergenceError
        ``cfg.max_iter`` was exceeded or the residual stopped decreasing.
    """
    cfg = _resolve(cfg)
    x = as_vector(x0, "x0").copy()
    r = _vector_value(residual, x)
    if r.size != x.size:
        raise ValueError(f"residual has length {r.size} but x has length {x.size}")
    norm = float(np.max(np.abs(r))) if r.size else 0.0
    iterations = 0
    while norm > cfg.abs_tol:
        if iterations >= cfg.max_iter:
            raise ConvergenceError(
                f"Newton did not converge in {cfg.max_iter} iterations "
                f"(residual {norm:.3e})",
                x=x, residual_norm=norm, iterations=iterations)
        J = np.atleast_2d(jacobian(x) if jacobian is not None
                          else fd_jacobian(residual, x, cfg))
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > cfg.max_condition:
            raise SingularJacobianError(
                f"singular Jacobian (condition estimate {cond:.3e}) at x={x}",
                x=x, residual_norm=norm, iterations=iterations)
        dx = np.linalg.solve(J, -r)
        t = 1.0
        for _ in range(cfg.max_halvings + 1):
            x_new = x + t * dx
            try:
                r_new = _vector_value(residual, x_new)
            except EvaluationError:
                t *= 0.5
                continue
            norm_new = float(np.max(np.abs(r_new)))
            if norm_new < norm:
                break
            t *= 0.5
        else:
            raise ConvergenceError(
                f"Newton stalled at residual {norm:.3e} after {iterations} iterations",
                x=x, residual_norm=norm, iterations=iterations)
        x, r, norm = x_new, r_new, norm_new
        iterations += 1
    if full_output:
        return x, iterations
    return x


def _partial(fn, a, b, n):
    val = _vector_value(lambda ab: fn(*ab), (a, b))
    if val.size != n:
        raise ValueError(f"partial derivative has length {val.size}, expected {n}")
    return val


class _TwoArgFunction:
    """Scalar function of two vectors with optional analytic partials."""

    _arg_names = ("x", "y")

    def __init__(self, value, d1=None, d2=None):
        if not callable(value):
            raise TypeError("value must be callable")
        self.value = value
        self.d1 = d1
        self.d2 = d2

    def __call__(self, a, b):
        a = as_vector(a, self._arg_names[0])
        b = as_vector(b, self._arg_names[1])
        return _scalar(lambda ab: self.value(*ab), (a, b))

    def D1(self, a, b, cfg=None):
        """Partial derivative with respect to the first argument."""
        a = as_vector(a, self._arg_names[0])
        b = as_vector(b, self._arg_names[1])
        if self.d1 is not None:
            return _partial(self.d1, a, b, a.size)
        return fd_gradient(lambda x: self.value(x, b), a, cfg)

    def D2(self, a, b, cfg=None):
        """Partial derivative with respect to the second argument."""
        a = as_vector(a, self._arg_names[0])
        b = as_vector(b, self._arg_names[1])
        if self.d2 is not None:
            return _partial(self.d2, a, b, b.size)
        return fd_gradient(lambda y: self.value(a, y), b, cfg)

    def partial_defect(self, samples, cfg=None):
        """Largest ``|analytic - fd| / (1 + |analytic|)`` over ``samples``.

        ``samples`` is an iterable of argument pairs.  Returns 0 when no
        analytic partial is attached.
        """
        worst = 0.0
        for a, b in samples:
            a = as_vector(a)
            b = as_vector(b)
            if self.d1 is not None:
                exact = self.D1(a, b)
                approx = fd_gradient(lambda x: self.value(x, b), a, cfg)
                worst = max(worst, np.max(np.abs(exact - approx)) / (1 + np.max(np.abs(exact))))
            if self.d2 is not None:
                exact = self.D2(a, b)
                approx = fd_gradient(lambda y: self.value(a, y), b, cfg)
                worst = max(worst, np.max(np.abs(exact - approx)) / (1 + np.max(np.abs(exact))))
        return float(worst)


class DiscreteHamiltonianRight(_TwoArgFunction):
    """Right discrete Hamiltonian ``H(q_k, p_{k+1})``, a type-two generating function.

    ``d1`` and ``d2`` are optional analytic partials in ``q_k`` and ``p_{k+1}``.
    """

    _arg_names = ("q", "p_next")


class DiscreteHamiltonianLeft(_TwoArgFunction):
    """Left discrete Hamiltonian ``H(p_k, q_{k+1})``, a type-three generating function."""

    _arg_names = ("p", "q_next")


class DiscreteLagrangian(_TwoArgFunction):
    """Discrete Lagrangian ``L(q_k, q_{k+1})``."""

    _arg_names = ("q", "q_next")


class GeneratingFunction:
    """A scalar function of ``q`` with an optional analytic gradient."""

    def __init__(self, value, gradient=None):
        if not callable(value):
            raise TypeError("value must be callable")
        self._value = value
        self._gradient = gradient

    def __call__(self, q):
        q = as_vector(q, "q")
        return _scalar(self._value, q)

    def gradient(self, q, cfg=None):
        q = as_vector(q, "q")
        if self._gradient is not None:
            return as_vector(self._gradient(q), "gradient", n=q.size)
        return fd_gradient(self._value, q, cfg)


class GeneratingFunctionSequence:
    """The sequence ``S^0, ..., S^N`` of a discrete Hamilton-Jacobi solution.

    Entries are callables of ``q``; an entry may expose ``gradient(q)``,
    otherwise finite differences are used.
    """

    def __init__(self, entries: Sequence[Callable]):
        entries = list(entries)
        if not entries:
            raise ValueError("a generating function sequence needs at least one entry")
        for k, entry in enumerate(entries):
            if not callable(entry):
                raise TypeError(f"entry {k} is not callable")
        self.entries = entries

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    @property
    def N(self):
        return len(self.entries) - 1

    def _entry(self, k):
        if not 0 <= k < len(self.entries):
            raise IndexError(f"generating function index {k} outside 0..{self.N}")
        return self.entries[k]

    def value(self, k, q):
        q = as_vector(q, "q")
        return _scalar(self._entry(k), q)

    def gradient(self, k, q, cfg=None):
        q = as_vector(q, "q")
        entry = self._entry(k)
        grad = getattr(entry, "gradient", None)
        if grad is not None:
            return as_vector(grad(q), "gradient", n=q.size)
        return fd_gradient(entry, q, cfg)

    def gradient_defect(self, points, cfg=None):
        """Largest relative gap between attached gradients and finite differences.

        ``points`` maps each index ``k`` to an iterable of evaluation points.
        """
        worst = 0.0
        for k, qs in points.items():
            entry = self._entry(k)
            if getattr(entry, "gradient", None) is None:
                continue
            for q in qs:
                exact = self.gradient(k, q)
                approx = fd_gradient(entry, q, cfg)
                worst = max(worst, np.max(np.abs(exact - approx)) / (1 + np.max(np.abs(exact))))
        return float(worst)
