"""Discrete mechanics: Legendre transforms, discrete Hamilton's equations, action sums."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_vector
from .core import (
    DiscreteHamiltonianLeft,
    DiscreteHamiltonianRight,
    DiscreteLagrangian,
    PhasePoint,
    fd_jacobian,
    newton_solve,
    symplectic_form,
)
from .exceptions import ConvergenceError

__all__ = [
    "Trajectory",
    "step_right",
    "step_left",
    "legendre_right",
    "legendre_left",
    "del_residual",
    "action_sum_right",
    "action_sum_left",
    "integrate",
    "symplecticity_defect",
    "discrete_hamiltonian_map",
    "right_hamiltonian_from_lagrangian",
    "left_hamiltonian_from_lagrangian",
    "right_equations_residual",
    "left_equations_residual",
]


@dataclass(frozen=True)
class Trajectory:
    """Phase points ``(q_k, p_k)`` for ``k = 0..N``."""

    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("a trajectory needs at least one point")
        n = pts[0].n
        if any(pt.n != n for pt in pts):
            raise ValueError("all trajectory points must share one dimension")
        object.__setattr__(self, "points", pts)

    @property
    def step_count(self):
        return len(self.points) - 1

    N = step_count

    @property
    def n(self):
        return self.points[0].n

    @property
    def q(self):
        """Configurations stacked as an ``(N+1, n)`` array."""
        return np.array([pt.q for pt in self.points])

    @property
    def p(self):
        return np.array([pt.p for pt in self.points])

    def __len__(self):
        return len(self.points)

    def __getitem__(self, k):
        return self.points[k]

    def __iter__(self):
        return iter(self.points)


def step_right(H: DiscreteHamiltonianRight, z: PhasePoint, guess=None, cfg=None):
    """One step of the right discrete Hamilton's equations.

    Solves ``p_k = D1 H(q_k, p_{k+1})`` for ``p_{k+1}`` by Newton starting from
    ``guess`` (default ``p_k``), then sets ``q_{k+1} = D2 H(q_k, p_{k+1})``.
    """
    q, p = z.q, z.p
    x0 = p if guess is None else as_vector(guess, "guess", n=p.size)
    try:
        p1 = newton_solve(lambda pn: H.D1(q, pn, cfg) - p, x0, cfg)
    except ConvergenceError as err:
        raise err.at("right step") from err
    return PhasePoint(H.D2(q, p1, cfg), p1)


def step_left(H: DiscreteHamiltonianLeft, z: PhasePoint, guess=None, cfg=None):
    """One step of the left discrete Hamilton's equations.

    Solves ``q_k = -D1 H(p_k, q_{k+1})`` for ``q_{k+1}`` and sets
    ``p_{k+1} = -D2 H(p_k, q_{k+1})``.
    """
    q, p = z.q, z.p
    x0 = q if guess is None else as_vector(guess, "guess", n=q.size)
    try:
        q1 = newton_solve(lambda qn: -H.D1(p, qn, cfg) - q, x0, cfg)
    except ConvergenceError as err:
        raise err.at("left step") from err
    return PhasePoint(q1, -H.D2(p, q1, cfg))


def legendre_right(L: DiscreteLagrangian, q, q_next):
    """Right discrete Legendre transform ``(q, q') -> (q', D2 L(q, q'))``."""
    q_next = as_vector(q_next, "q_next")
    return PhasePoint(q_next, L.D2(q, q_next))


def legendre_left(L: DiscreteLagrangian, q, q_next):
    """Left discrete Legendre transform ``(q, q') -> (q, -D1 L(q, q'))``."""
    q = as_vector(q, "q")
    return PhasePoint(q, -L.D1(q, q_next))


def del_residual(L: DiscreteLagrangian, q_prev, q, q_next):
    """Discrete Euler-Lagrange residual ``D2 L(q_prev, q) + D1 L(q, q_next)``."""
    return L.D2(q_prev, q) + L.D1(q, q_next)


def action_sum_right(H: DiscreteHamiltonianRight, t: Trajectory):
    """Partial action sums ``S^k`` written with the right discrete Hamiltonian.

    ``S^0 = 0`` and ``S^{k+1} = S^k + p_{k+1}.q_{k+1} - H(q_k, p_{k+1})``.
    """
    sums = [0.0]
    for a, b in zip(t.points[:-1], t.points[1:]):
        sums.append(sums[-1] + float(b.p @ b.q) - H(a.q, b.p))
    return sums


def action_sum_left(H: DiscreteHamiltonianLeft, t: Trajectory):
    """Partial action sums written with the left discrete Hamiltonian."""
    sums = [0.0]
    for a, b in zip(t.points[:-1], t.points[1:]):
        sums.append(sums[-1] - float(a.p @ a.q) - H(a.p, b.q))
    return sums


def integrate(H, z0: PhasePoint, N: int, cfg=None):
    """Iterate the discrete Hamiltonian map ``N`` times from ``z0``.

    ``H`` is a right or a left discrete Hamiltonian; each Newton solve is
    warm-started from the previous converged value.

    Raises
    ------
    ConvergenceError
        With ``index`` set to the failing step ``k``.
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    if isinstance(H, DiscreteHamiltonianRight):
        stepper = step_right
    elif isinstance(H, DiscreteHamiltonianLeft):
        stepper = step_left
    else:
        raise TypeError("H must be a DiscreteHamiltonianRight or DiscreteHamiltonianLeft")
    points = [z0]
    for k in range(N):
        try:
            points.append(stepper(H, points[-1], cfg=cfg))
        except ConvergenceError as err:
            raise err.at(f"step {k}", index=k) from err
    return Trajectory(tuple(points))


def symplecticity_defect(step_map, z: PhasePoint, cfg=None, rel_step=1e-6):
    """``max|J^T Omega J - Omega|`` for the finite-difference Jacobian ``J`` of ``step_map`` at ``z``."""
    def flat(v):
        return step_map(PhasePoint.from_z(v)).z

    J = fd_jacobian(flat, z.z, cfg, rel_step=rel_step)
    omega = symplectic_form(z.n)
    return float(np.max(np.abs(J.T @ omega @ J - omega)))


def discrete_hamiltonian_map(L: DiscreteLagrangian, z: PhasePoint, guess=None, cfg=None):
    """Apply ``FL+ o (FL-)^{-1}`` to ``z``: solve ``p = -D1 L(q, q')`` then transform right."""
    q, p = z.q, z.p
    x0 = q if guess is None else as_vector(guess, "guess", n=q.size)
    try:
        q1 = newton_solve(lambda qn: -L.D1(q, qn, cfg) - p, x0, cfg)
    except ConvergenceError as err:
        raise err.at("inverse left Legendre transform") from err
    return legendre_right(L, q, q1)


def right_hamiltonian_from_lagrangian(L: DiscreteLagrangian, cfg=None):
    """Right discrete Hamiltonian ``H(q, p') = p'.q' - L(q, q')`` with ``p' = D2 L(q, q')``.

    ``q'`` is found by Newton from ``q``.  The partials follow from the
    envelope relations ``D1 H = -D1 L(q, q')`` and ``D2 H = q'``.
    """
    def solve(q, p1):
        try:
            return newton_solve(lambda qn: L.D2(q, qn, cfg) - p1, q, cfg)
        except ConvergenceError as err:
            raise err.at("right Legendre inversion") from err

    def value(q, p1):
        q1 = solve(q, p1)
        return float(p1 @ q1) - L(q, q1)

    return DiscreteHamiltonianRight(
        value,
        d1=lambda q, p1: -L.D1(q, solve(q, p1), cfg),
        d2=lambda q, p1: solve(q, p1),
    )


def left_hamiltonian_from_lagrangian(L: DiscreteLagrangian, cfg=None):
    """Left discrete Hamiltonian ``H(p, q') = -p.q - L(q, q')`` with ``p = -D1 L(q, q')``."""
    def solve(p, q1):
        try:
            return newton_solve(lambda qq: -L.D1(qq, q1, cfg) - p, q1, cfg)
        except ConvergenceError as err:
            raise err.at("left Legendre inversion") from err

    def value(p, q1):
        q = solve(p, q1)
        return -float(p @ q) - L(q, q1)

    return DiscreteHamiltonianLeft(
        value,
        d1=lambda p, q1: -solve(p, q1),
        d2=lambda p, q1: -L.D2(solve(p, q1), q1, cfg),
    )


def right_equations_residual(H: DiscreteHamiltonianRight, t: Trajectory, cfg=None):
    """Largest violation of the right discrete Hamilton's equations along ``t``."""
    worst = 0.0
    for a, b in zip(t.points[:-1], t.points[1:]):
        worst = max(worst,
                    np.max(np.abs(b.q - H.D2(a.q, b.p, cfg))),
                    np.max(np.abs(a.p - H.D1(a.q, b.p, cfg))))
    return float(worst)


def left_equations_residual(H: DiscreteHamiltonianLeft, t: Trajectory, cfg=None):
    """Largest violation of the left discrete Hamilton's equations along ``t``."""
    worst = 0.0
    for a, b in zip(t.points[:-1], t.points[1:]):
        worst = max(worst,
                    np.max(np.abs(a.q + H.D1(a.p, b.q, cfg))),
                    np.max(np.abs(b.p + H.D2(a.p, b.q, cfg))))
    return float(worst)
