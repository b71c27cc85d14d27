"""Discrete Hamilton-Jacobi equations: residuals, implicit maps and Jacobi's solution.

A sequence ``S^0, ..., S^N`` solves the right discrete Hamilton-Jacobi equation
when

    S^{k+1}(q') - S^k(q) - DS^{k+1}(q').q' + H+(q, DS^{k+1}(q')) = 0

with ``q' = f+_k(q)`` the solution of ``q' = D2 H+(q, DS^{k+1}(q'))``.  The
left and Lagrangian-side variants are analogous.  Solutions produce discrete
trajectories through ``p_k = DS^k(q_k)``, and conversely the action sums along
a trajectory (Jacobi's solution) solve the equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_vector
from .core import (
    DiscreteHamiltonianLeft,
    DiscreteHamiltonianRight,
    DiscreteLagrangian,
    GeneratingFunctionSequence,
    PhasePoint,
    fd_jacobian,
    newton_solve,
)
from .dmech import Trajectory, action_sum_right, integrate
from .exceptions import ConvergenceError, SingularMatrixError

__all__ = [
    "HJSolutionTable",
    "rdhj_residual",
    "ldhj_residual",
    "solve_f_plus",
    "solve_f_minus",
    "solve_f_lagrangian",
    "lagrangian_dhj_residual",
    "jacobi_solution",
    "jacobi_action",
    "jacobi_action_gradient",
    "hj_generate_trajectory",
]


def rdhj_residual(S: GeneratingFunctionSequence, H: DiscreteHamiltonianRight, k, q, q_next,
                  cfg=None):
    """Residual of the right discrete Hamilton-Jacobi equation at ``(q, q_next)``.

    Returns ``S^{k+1}(q') - S^k(q) - DS^{k+1}(q').q' + H(q, DS^{k+1}(q'))``.
    """
    q = as_vector(q, "q")
    q_next = as_vector(q_next, "q_next", q.size)
    p_next = S.gradient(k + 1, q_next, cfg)
    return (S.value(k + 1, q_next) - S.value(k, q) - float(p_next @ q_next)
            + H(q, p_next))


def ldhj_residual(S: GeneratingFunctionSequence, H: DiscreteHamiltonianLeft, k, q, q_next,
                  cfg=None):
    """Residual of the left discrete Hamilton-Jacobi equation at ``(q, q_next)``.

    Returns ``S^{k+1}(q') - S^k(q) + DS^k(q).q + H(DS^k(q), q')``.
    """
    q = as_vector(q, "q")
    q_next = as_vector(q_next, "q_next", q.size)
    p = S.gradient(k, q, cfg)
    return S.value(k + 1, q_next) - S.value(k, q) + float(p @ q) + H(p, q_next)


def solve_f_plus(S: GeneratingFunctionSequence, H: DiscreteHamiltonianRight, k, q, guess=None,
                 cfg=None):
    """Solve ``q' = D2 H(q, DS^{k+1}(q'))`` for ``q'`` by Newton iteration.

    The unknown appears inside ``DS^{k+1}``, so ``S`` is treated as given
    data and the fixed point is solved numerically from ``guess`` (default
    ``q``).

    Raises
    ------
    SingularJacobianError
        When the fixed-point equation is degenerate, e.g. ``H = q.p + p^2/2``
        with ``S^{k+1} = q^2/2``.
    ConvergenceError
        On any other Newton failure.
    """
    q = as_vector(q, "q")
    x0 = q if guess is None else as_vector(guess, "guess", q.size)

    def residual(qn):
        return qn - H.D2(q, S.gradient(k + 1, qn, cfg), cfg)

    try:
        return newton_solve(residual, x0, cfg)
    except ConvergenceError as err:
        raise err.at(f"f+ at step {k}", index=k) from err


def _f_minus_residual(S, H, k, cfg):
    def residual(q, qn):
        return q + H.D1(S.gradient(k, q, cfg), qn, cfg)
    return residual


def solve_f_minus(S: GeneratingFunctionSequence, H: DiscreteHamiltonianLeft, k, q, guess=None,
                  cfg=None):
    """Solve ``q = -D1 H(DS^k(q), q')`` for ``q'`` by Newton iteration."""
    q = as_vector(q, "q")
    x0 = q if guess is None else as_vector(guess, "guess", q.size)
    residual = _f_minus_residual(S, H, k, cfg)
    try:
        return newton_solve(lambda qn: residual(q, qn), x0, cfg)
    except ConvergenceError as err:
        raise err.at(f"f- at step {k}", index=k) from err


def _f_minus_jacobian(S, H, k, q, q_next, cfg):
    # implicit function theorem on R(q, q') = q + D1 H(DS^k(q), q') = 0
    residual = _f_minus_residual(S, H, k, cfg)
    Rq = fd_jacobian(lambda x: residual(x, q_next), q, cfg)
    Rqn = fd_jacobian(lambda x: residual(q, x), q_next, cfg)
    return -np.linalg.solve(Rqn, Rq)


def solve_f_lagrangian(L: DiscreteLagrangian, S: GeneratingFunctionSequence, k, q, guess=None,
                       cfg=None):
    """Solve ``-D1 L(q, q') = DS^k(q)`` for ``q'`` (inverse left Legendre transform)."""
    q = as_vector(q, "q")
    p = S.gradient(k, q, cfg)
    x0 = q if guess is None else as_vector(guess, "guess", q.size)
    try:
        return newton_solve(lambda qn: -L.D1(q, qn, cfg) - p, x0, cfg)
    except ConvergenceError as err:
        raise err.at(f"Legendre inversion at step {k}", index=k) from err


def lagrangian_dhj_residual(L: DiscreteLagrangian, S: GeneratingFunctionSequence, k, q,
                            guess=None, cfg=None):
    """``S^{k+1}(f(q)) - S^k(q) - L(q, f(q))`` with ``f`` from :func:`solve_f_lagrangian`."""
    q = as_vector(q, "q")
    qn = solve_f_lagrangian(L, S, k, q, guess, cfg)
    return S.value(k + 1, qn) - S.value(k, q) - L(q, qn)


class _TableEntry:
    """First-order extension of a tabulated value: ``v + p.(x - q)``."""

    def __init__(self, value, q, p):
        self.value = float(value)
        self.q = q
        self.p = p

    def __call__(self, x):
        return self.value + float(self.p @ (np.asarray(x, dtype=float) - self.q))

    def gradient(self, x):
        return self.p.copy()


@dataclass(frozen=True)
class HJSolutionTable:
    """Values ``S^k(q_k)`` and momenta ``DS^k(q_k)`` along a trajectory.

    Attributes
    ----------
    values : numpy.ndarray
        Shape ``(N+1,)``.
    momenta : numpy.ndarray
        Shape ``(N+1, n)``.
    trajectory : Trajectory
    """

    values: np.ndarray
    momenta: np.ndarray
    trajectory: Trajectory

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        momenta = np.atleast_2d(np.asarray(self.momenta, dtype=float))
        if values.shape != (len(self.trajectory),):
            raise ValueError("values must have one entry per trajectory point")
        if momenta.shape != (len(self.trajectory), self.trajectory.n):
            raise ValueError("momenta must have shape (N+1, n)")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(momenta))):
            raise ValueError("table entries must be finite")
        values.setflags(write=False)
        momenta.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "momenta", momenta)

    @property
    def N(self):
        return len(self.values) - 1

    def as_sequence(self):
        """The table as a :class:`GeneratingFunctionSequence`.

        Entry ``k`` is exact at ``q_k`` with gradient ``p_k`` and is extended
        off the node to first order.
        """
        q = self.trajectory.q
        return GeneratingFunctionSequence(
            [_TableEntry(v, q[k], self.momenta[k]) for k, v in enumerate(self.values)])

    def right_residual(self, H: DiscreteHamiltonianRight, cfg=None):
        """Largest violation of ``q_{k+1} = D2 H(q_k, p_{k+1})``, ``p_k = D1 H(q_k, p_{k+1})``
        with the tabulated momenta."""
        q = self.trajectory.q
        worst = 0.0
        for k in range(self.N):
            p1 = self.momenta[k + 1]
            worst = max(worst,
                        float(np.max(np.abs(q[k + 1] - H.D2(q[k], p1, cfg)))),
                        float(np.max(np.abs(self.momenta[k] - H.D1(q[k], p1, cfg)))))
        return worst


def jacobi_solution(H: DiscreteHamiltonianRight, z0: PhasePoint, N: int, cfg=None):
    """Jacobi's solution: action sums along the trajectory through ``z0``.

    Integrates ``N`` steps, tabulates ``S^k(q_k)`` from
    :func:`~discretehj.dmech.action_sum_right` and records ``p_k``.  The
    stored momenta are then checked against the discrete Hamilton's equations.

    Raises
    ------
    ConvergenceError
        If a step fails (``index`` is the step) or the stored table violates
        the equations by more than ``1e-8``.
    """
    traj = integrate(H, z0, N, cfg)
    table = HJSolutionTable(np.array(action_sum_right(H, traj)), traj.p, traj)
    defect = table.right_residual(H, cfg)
    if defect > 1e-8:
        raise ConvergenceError(f"Jacobi table violates the momentum relation ({defect:.3e})",
                               residual_norm=defect)
    return table


def jacobi_action(H: DiscreteHamiltonianRight, q0, k, q_end, p_guess=None, cfg=None):
    """Action sum of the ``k``-step trajectory from ``q0`` to ``q_end``.

    This is Jacobi's ``S^k`` evaluated away from a single reference
    trajectory: the initial momentum is found by shooting.

    Returns
    -------
    value : float
    p0 : numpy.ndarray
        The initial momentum of the connecting trajectory.
    """
    q0 = as_vector(q0, "q0")
    q_end = as_vector(q_end, "q_end", q0.size)
    if k < 1:
        raise ValueError("k must be at least 1")
    x0 = np.zeros_like(q0) if p_guess is None else as_vector(p_guess, "p_guess", q0.size)

    def endpoint(p0):
        return integrate(H, PhasePoint(q0, p0), k, cfg)

    try:
        p0 = newton_solve(lambda p0: endpoint(p0)[k].q - q_end, x0, cfg)
    except ConvergenceError as err:
        raise err.at("shooting for the Jacobi action") from err
    return action_sum_right(H, endpoint(p0))[-1], p0


def jacobi_action_gradient(H: DiscreteHamiltonianRight, q0, k, q_end, p_guess=None, cfg=None,
                           rel_step=1e-3):
    """Gradient of :func:`jacobi_action` in ``q_end`` by a fourth-order central stencil.

    The action is itself the output of a Newton solve, so a wide stencil
    keeps the solver tolerance from dominating the derivative.
    """
    q_end = as_vector(q_end, "q_end")
    _, p0 = jacobi_action(H, q0, k, q_end, p_guess, cfg)
    grad = np.empty_like(q_end)
    for i in range(q_end.size):
        h = 2.0 ** round(np.log2(rel_step * max(1.0, abs(q_end[i]))))
        vals = []
        for m in (-2, -1, 1, 2):
            x = q_end.copy()
            x[i] += m * h
            vals.append(jacobi_action(H, q0, k, x, p0, cfg)[0])
        grad[i] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
    return grad


def hj_generate_trajectory(S: GeneratingFunctionSequence, H, c0, N: int, cfg=None):
    """Generate a discrete trajectory from a solution of the discrete Hamilton-Jacobi equation.

    Parameters
    ----------
    S : GeneratingFunctionSequence
        A solution of the right or left equation for ``H``, with at least
        ``N + 1`` entries.
    H : DiscreteHamiltonianRight or DiscreteHamiltonianLeft
    c0 : array_like
        Initial configuration.
    N : int
    cfg : NewtonConfig, optional

    Returns
    -------
    Trajectory
        Points ``(c_k, DS^k(c_k))`` with ``c_{k+1} = f+-_k(c_k)``.

    Raises
    ------
    SingularMatrixError
        Left variant only: ``Df-_k`` is singular (condition estimate >= 1e12).
    ConvergenceError
        A step solve failed; ``index`` is the step.
    """
    c = as_vector(c0, "c0")
    if N < 0:
        raise ValueError("N must be non-negative")
    if len(S) < N + 1:
        raise ValueError(f"S has {len(S)} entries, need {N + 1}")
    if isinstance(H, DiscreteHamiltonianRight):
        right = True
    elif isinstance(H, DiscreteHamiltonianLeft):
        right = False
    else:
        raise TypeError("H must be a DiscreteHamiltonianRight or DiscreteHamiltonianLeft")
    points = [PhasePoint(c, S.gradient(0, c, cfg))]
    for k in range(N):
        if right:
            c_next = solve_f_plus(S, H, k, c, cfg=cfg)
        else:
            c_next = solve_f_minus(S, H, k, c, cfg=cfg)
            cond = np.linalg.cond(_f_minus_jacobian(S, H, k, c, c_next, cfg))
            if not np.isfinite(cond) or cond >= 1e12:
                raise SingularMatrixError(
                    f"Df- is singular at step {k} (condition estimate {cond:.3e})")
        c = c_next
        points.append(PhasePoint(c, S.gradient(k + 1, c, cfg)))
    return Trajectory(tuple(points))
