"""Galerkin discrete control Hamiltonians with internal-stage controls.

On one step of length ``h`` the velocity is expanded as
``sum_j w^j psi_j(tau)``, so the internal states are

    Q^i = q0 + h sum_j A_ij w^j,      A_ij = int_0^{c_i} psi_j,

and the velocities solve ``sum_j M_ij w^j = f(Q^i, U^i)`` with
``M_ij = psi_j(c_i)``.  Then

    f_d = q0 + h sum_i B_i w^i,       B_i = int_0^1 psi_i,
    C_d = h sum_i b_i C(Q^i, U^i).

Everything below is batched: ``q0`` may carry leading axes, and ``U`` has
shape ``(..., s, m)``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ._validation import as_vector, readonly
from .core import NewtonConfig, _resolve
from .docp import DiscreteOCP
from .exceptions import ConvergenceError, PrecisionError

__all__ = [
    "GalerkinTableau",
    "ControlSystem",
    "StageState",
    "build_tableau",
    "euler_tableau",
    "stormer_verlet_tableau",
    "solve_internal_velocities",
    "discrete_dynamics",
    "discrete_cost",
    "galerkin_control_hamiltonian",
    "solve_internal_momenta",
    "momentum_stationarity_residual",
    "build_docp",
    "heisenberg_system",
    "heisenberg_fd_closed_form",
    "open_loop_flow",
    "heisenberg_reference",
    "step_errors",
]


@dataclass(frozen=True, eq=False)
class GalerkinTableau:
    """Basis functions, quadrature rule and the derived coefficients ``A``, ``B``, ``M``."""

    psi: tuple
    b: np.ndarray
    c: np.ndarray
    A: np.ndarray
    B: np.ndarray
    M: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        s = len(self.psi)
        if s < 1:
            raise ValueError("a tableau needs at least one stage")
        b = as_vector(self.b, "b", s)
        c = as_vector(self.c, "c", s)
        if np.any(b == 0):
            raise ValueError("all quadrature weights b_i must be nonzero")
        A = np.asarray(self.A, dtype=float).reshape(s, s)
        B = as_vector(self.B, "B", s)
        M = np.asarray(self.M, dtype=float).reshape(s, s)
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > 1e12:
            raise ValueError("stage matrix M is singular")
        for k, v in (("b", b), ("c", c), ("A", A), ("B", B), ("M", M)):
            object.__setattr__(self, k, readonly(v))
        object.__setattr__(self, "psi", tuple(self.psi))

    @property
    def s(self):
        return len(self.psi)


def _gauss(f, a, b, npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    t = 0.5 * (b - a) * x + 0.5 * (b + a)
    return 0.5 * (b - a) * float(np.sum(w * np.array([f(ti) for ti in t])))


def _integral(f, upper, npts=20, tol=1e-10):
    if upper == 0:
        return 0.0
    lo = _gauss(f, 0.0, upper, npts)
    hi = _gauss(f, 0.0, upper, 2 * npts)
    if abs(lo - hi) > tol:
        raise PrecisionError(
            f"{npts}- and {2 * npts}-point Gauss-Legendre rules differ by {abs(lo - hi):.3e}")
    return hi


def build_tableau(psi: Sequence[Callable], b, c, integrals=None, quad_points=20, name="custom"):
    """Build a :class:`GalerkinTableau` from basis functions and a quadrature rule.

    Parameters
    ----------
    psi : sequence of callables
        Basis functions on ``[0, 1]``.
    b, c : array_like
        Quadrature weights and nodes, one per stage.
    integrals : sequence of callables, optional
        Antiderivatives ``Psi_j`` with ``Psi_j(0) = 0``; when given, ``A`` and
        ``B`` are evaluated from them instead of by quadrature.
    quad_points : int
        Gauss-Legendre points; the result is compared against twice as many.

    Raises
    ------
    PrecisionError
        If the two quadrature rules disagree by more than ``1e-10``.
    """
    psi = tuple(psi)
    s = len(psi)
    b = as_vector(b, "b", s)
    c = as_vector(c, "c", s)
    if np.any((c < 0) | (c > 1)):
        raise ValueError("quadrature nodes must lie in [0, 1]")
    if integrals is not None:
        if len(integrals) != s:
            raise ValueError("need one antiderivative per basis function")
        A = np.array([[integrals[j](ci) for j in range(s)] for ci in c])
        B = np.array([integrals[j](1.0) for j in range(s)])
    else:
        A = np.array([[_integral(psi[j], ci, quad_points) for j in range(s)] for ci in c])
        B = np.array([_integral(psi[j], 1.0, quad_points) for j in range(s)])
    M = np.array([[psi[j](ci) for j in range(s)] for ci in c])
    return GalerkinTableau(psi, b, c, A, B, M, name)


def euler_tableau():
    """``s = 1``, ``psi = 1``, ``b = 1``, ``c = 0``: forward Euler."""
    return GalerkinTableau((lambda t: 1.0,), [1.0], [0.0], [[0.0]], [1.0], [[1.0]], "euler")


def stormer_verlet_tableau():
    """``s = 2``, ``psi = (1, cos(pi tau))``, ``b = (1/2, 1/2)``, ``c = (0, 1)``.

    The coefficients are stored exactly; evaluating ``sin(pi)/pi`` in floating
    point would leave a ``1e-17`` residue in ``B_2``.
    """
    return GalerkinTableau(
        (lambda t: 1.0, lambda t: math.cos(math.pi * t)),
        [0.5, 0.5], [0.0, 1.0],
        [[0.0, 0.0], [1.0, 0.0]], [1.0, 0.0], [[1.0, 1.0], [1.0, -1.0]],
        "stormer_verlet")


TABLEAUS = {"euler": euler_tableau, "stormer_verlet": stormer_verlet_tableau}


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """Continuous-time dynamics ``f(q, u)`` and running cost ``C(q, u)``.

    With ``vectorized=True`` both accept leading batch axes.
    """

    f: Callable
    C: Callable
    n: int
    m: int
    vectorized: bool = False

    def dynamics(self, q, u):
        if self.vectorized:
            return np.asarray(self.f(q, u), dtype=float)
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        lead = np.broadcast_shapes(q.shape[:-1], u.shape[:-1])
        q = np.broadcast_to(q, lead + (self.n,))
        u = np.broadcast_to(u, lead + (self.m,))
        out = np.empty(lead + (self.n,))
        for i in np.ndindex(*lead):
            out[i] = self.f(q[i], u[i])
        return out

    def cost(self, q, u):
        if self.vectorized:
            return np.asarray(self.C(q, u), dtype=float)
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        lead = np.broadcast_shapes(q.shape[:-1], u.shape[:-1])
        q = np.broadcast_to(q, lead + (self.n,))
        u = np.broadcast_to(u, lead + (self.m,))
        out = np.empty(lead)
        for i in np.ndindex(*lead):
            out[i] = self.C(q[i], u[i])
        return out


@dataclass(frozen=True)
class StageState:
    """Internal velocities ``w``, states ``Q`` and controls ``U`` of one step.

    ``w`` and ``Q`` have shape ``(..., s, n)``; ``U`` has shape ``(..., s, m)``.
    ``P`` holds internal momenta when they were requested.
    """

    w: np.ndarray
    Q: np.ndarray
    U: np.ndarray
    P: Optional[np.ndarray] = None


def _stages(tab, q0, w, h):
    return q0[..., None, :] + h * np.einsum("ij,...jn->...in", tab.A, w)


def _w_residual(sys, tab, q0, U, h, w):
    Q = _stages(tab, q0, w, h)
    return np.einsum("ij,...jn->...in", tab.M, w) - sys.dynamics(Q, U)


def _solve_M(tab, rhs):
    return np.linalg.solve(tab.M, rhs)


def _broadcast_inputs(sys, tab, q0, U):
    q0 = np.asarray(q0, dtype=float)
    U = np.asarray(U, dtype=float)
    if U.shape[-2:] != (tab.s, sys.m):
        U = U.reshape(U.shape[:-1] + (tab.s, sys.m))
    lead = np.broadcast_shapes(q0.shape[:-1], U.shape[:-2])
    q0 = np.broadcast_to(q0, lead + (sys.n,)).copy()
    U = np.broadcast_to(U, lead + (tab.s, sys.m)).copy()
    return q0, U


def _newton_w(sys, tab, q0, U, h, w, cfg, tol):
    """Newton on the stage equations over a flat batch; returns ``(w, ok, norm)``."""
    B, s, n = w.shape
    dim = s * n
    r = _w_residual(sys, tab, q0, U, h, w).reshape(B, dim)
    norm = np.max(np.abs(r), axis=-1)
    active = norm > tol
    for _ in range(cfg.max_iter):
        if not np.any(active):
            break
        ia = np.nonzero(active)[0]
        flat = w[ia].reshape(-1, dim)
        qa, Ua = q0[ia], U[ia]
        J = np.empty((ia.size, dim, dim))
        for c in range(dim):
            step = 2.0 ** np.round(np.log2(cfg.fd_step_scale * np.maximum(1.0, np.abs(flat[:, c]))))
            wp = flat.copy()
            wm = flat.copy()
            wp[:, c] += step
            wm[:, c] -= step
            rp = _w_residual(sys, tab, qa, Ua, h, wp.reshape(-1, s, n)).reshape(-1, dim)
            rm = _w_residual(sys, tab, qa, Ua, h, wm.reshape(-1, s, n)).reshape(-1, dim)
            J[:, :, c] = (rp - rm) / (2 * step[:, None])
        finite = np.all(np.isfinite(J), axis=(1, 2))
        J[~finite] = np.eye(dim)
        cond = np.linalg.cond(J)
        singular = ~finite | ~np.isfinite(cond) | (cond > cfg.max_condition)
        J[singular] = np.eye(dim)
        dx = np.linalg.solve(J, -np.nan_to_num(r[ia])[..., None])[..., 0]
        t = np.ones(ia.size)
        improved = np.zeros(ia.size, dtype=bool)
        improved_or_dead = singular.copy()
        for _ in range(cfg.max_halvings + 1):
            pend = np.nonzero(~improved_or_dead)[0]
            if pend.size == 0:
                break
            trial = flat[pend] + t[pend, None] * dx[pend]
            rt = _w_residual(sys, tab, qa[pend], Ua[pend], h,
                             trial.reshape(-1, s, n)).reshape(-1, dim)
            tn = np.max(np.abs(rt), axis=-1)
            ok = np.isfinite(tn) & (tn < norm[ia[pend]])
            acc = pend[ok]
            w[ia[acc]] = trial[ok].reshape(-1, s, n)
            r[ia[acc]] = rt[ok]
            norm[ia[acc]] = tn[ok]
            improved[acc] = True
            improved_or_dead[acc] = True
            t[pend[~ok]] *= 0.5
        active[ia[~improved]] = False
        active[ia] &= norm[ia] > tol
    return w, norm <= tol, norm


def solve_internal_velocities(sys: ControlSystem, tab: GalerkinTableau, q0, U, h,
                              cfg: NewtonConfig = None, tol=1e-12):
    """Solve ``sum_j M_ij w^j = f(Q^i(w), U^i)`` for the internal velocities.

    The seed is ``M^{-1} (f(q0, U^i))_i``, exact when ``A = 0``.  Newton runs
    from the seed; elements where it fails get ten Picard sweeps
    ``w <- M^{-1} f(Q(w), U)`` and a second Newton attempt.

    Raises
    ------
    ConvergenceError
        With the largest residual of every stage in the message.
    """
    cfg = _resolve(cfg)
    q0, U = _broadcast_inputs(sys, tab, q0, U)
    lead = q0.shape[:-1]
    s, n, m = tab.s, sys.n, sys.m
    qf = q0.reshape(-1, n)
    Uf = U.reshape(-1, s, m)
    f0 = sys.dynamics(np.broadcast_to(qf[:, None, :], (qf.shape[0], s, n)), Uf)
    w = _solve_M(tab, f0)
    if np.any(tab.A != 0):
        w, ok, norm = _newton_w(sys, tab, qf, Uf, h, w, cfg, tol)
        if not np.all(ok):
            bad = np.nonzero(~ok)[0]
            wb = _solve_M(tab, f0[bad])
            with np.errstate(all="ignore"):
                for _ in range(10):
                    wb = _solve_M(tab, sys.dynamics(_stages(tab, qf[bad], wb, h), Uf[bad]))
            if not np.all(np.isfinite(wb)):
                wb = w[bad]
            wb, okb, nb = _newton_w(sys, tab, qf[bad], Uf[bad], h, wb, cfg, tol)
            w[bad] = wb
            if not np.all(okb):
                stage_res = np.max(np.abs(_w_residual(sys, tab, qf[bad], Uf[bad], h, wb)), axis=-1)
                raise ConvergenceError(
                    "internal-stage solve failed; worst residual per stage "
                    f"{np.max(stage_res, axis=0)}",
                    residual_norm=float(np.max(nb)))
    Q = _stages(tab, qf, w, h)
    return StageState(w.reshape(lead + (s, n)), Q.reshape(lead + (s, n)), U)


def discrete_dynamics(sys, tab, q0, U, h, cfg=None, state: StageState = None):
    """``f_d = q0 + h sum_i B_i w^i``."""
    q0a = np.asarray(q0, dtype=float)
    st = state or solve_internal_velocities(sys, tab, q0a, U, h, cfg)
    q0b = np.broadcast_to(q0a, st.w.shape[:-2] + (sys.n,))
    return q0b + h * np.einsum("i,...in->...n", tab.B, st.w)


def discrete_cost(sys, tab, q0, U, h, cfg=None, state: StageState = None):
    """``C_d = h sum_i b_i C(Q^i, U^i)``."""
    st = state or solve_internal_velocities(sys, tab, q0, U, h, cfg)
    return h * np.einsum("i,...i->...", tab.b, sys.cost(st.Q, st.U))


def galerkin_control_hamiltonian(sys, tab, q0, p1, U, h, cfg=None, assembly="fd"):
    """Galerkin discrete control Hamiltonian ``p1.f_d - C_d``.

    ``assembly="fd"`` evaluates ``f_d`` and ``C_d`` and combines them;
    ``assembly="stages"`` evaluates the stage functional
    ``p1.(q0 + h sum B_j w^j) - h sum_i b_i [P^i.(sum_j M_ij w^j - f(Q^i, U^i)) + C(Q^i, U^i)]``
    at the solved ``w`` with ``P^i = p1``, where the bracketed constraint
    term vanishes.
    """
    st = solve_internal_velocities(sys, tab, q0, U, h, cfg)
    p1 = np.asarray(p1, dtype=float)
    if assembly == "fd":
        fd = discrete_dynamics(sys, tab, q0, U, h, state=st)
        return np.einsum("...n,...n->...", p1, fd) - discrete_cost(sys, tab, q0, U, h, state=st)
    if assembly != "stages":
        raise ValueError("assembly must be 'fd' or 'stages'")
    P = np.broadcast_to(p1[..., None, :], st.w.shape)
    return _stage_functional(sys, tab, np.asarray(q0, dtype=float), p1, st.w, P, st.U, h)


def _stage_functional(sys, tab, q0, p1, w, P, U, h):
    Q = _stages(tab, q0, w, h)
    q1 = q0 + h * np.einsum("i,...in->...n", tab.B, w)
    constraint = np.einsum("ij,...jn->...in", tab.M, w) - sys.dynamics(Q, U)
    inner = np.einsum("...in,...in->...i", P, constraint) + sys.cost(Q, U)
    return np.einsum("...n,...n->...", p1, q1) - h * np.einsum("i,...i->...", tab.b, inner)


_FD_SCALE = np.finfo(float).eps ** (1 / 3)


def _fd_jac_q(fn, Q, n):
    """Jacobian of a stage function in its state argument, per stage, shape ``(s, k, n)``."""
    cols = []
    for c in range(n):
        step = 2.0 ** np.round(np.log2(_FD_SCALE * np.maximum(1.0, np.abs(Q[:, c]))))
        Qp = Q.copy()
        Qm = Q.copy()
        Qp[:, c] += step
        Qm[:, c] -= step
        diff = (np.atleast_2d(fn(Qp).T).T - np.atleast_2d(fn(Qm).T).T)
        cols.append(diff.reshape(Q.shape[0], -1) / (2 * step[:, None]))
    return np.stack(cols, axis=-1)


def solve_internal_momenta(sys, tab, q0, p1, U, h, cfg=None):
    """Internal momenta ``P^i`` making the stage functional stationary in ``w``.

    Solves the linear system
    ``sum_i b_i (M_ij P^i - h A_ij (D_q f(Q^i)^T P^i - D_q C(Q^i))) = B_j p1``
    for a single step (``q0`` of shape ``(n,)``).
    """
    q0 = as_vector(q0, "q0", sys.n)
    p1 = as_vector(p1, "p1", sys.n)
    st = solve_internal_velocities(sys, tab, q0, U, h, cfg)
    s, n = tab.s, sys.n
    Q, Uv = st.Q, st.U
    Df = _fd_jac_q(lambda X: sys.dynamics(X, Uv), Q, n)
    dC = _fd_jac_q(lambda X: sys.cost(X, Uv), Q, n)[:, 0, :]
    lhs = np.zeros((s * n, s * n))
    rhs = np.zeros(s * n)
    for j in range(s):
        rhs[j * n:(j + 1) * n] = tab.B[j] * p1
        for i in range(s):
            block = tab.b[i] * (tab.M[i, j] * np.eye(n) - h * tab.A[i, j] * Df[i].T)
            lhs[j * n:(j + 1) * n, i * n:(i + 1) * n] = block
            rhs[j * n:(j + 1) * n] -= tab.b[i] * h * tab.A[i, j] * dC[i]
    P = np.linalg.solve(lhs, rhs).reshape(s, n)
    return StageState(st.w, st.Q, st.U, P)


def momentum_stationarity_residual(sys, tab, q0, p1, U, h, w, P):
    """Gradient in ``w`` of the stage functional, from the closed-form expression.

    ``h B_j p1 - h sum_i b_i [M_ij P^i - h A_ij (D_q f(Q^i)^T P^i - D_q C(Q^i))]``,
    shape ``(s, n)``.
    """
    q0 = as_vector(q0, "q0", sys.n)
    p1 = as_vector(p1, "p1", sys.n)
    w = np.asarray(w, dtype=float)
    P = np.asarray(P, dtype=float)
    U = np.asarray(U, dtype=float).reshape(tab.s, sys.m)
    Q = _stages(tab, q0, w, h)
    Df = _fd_jac_q(lambda X: sys.dynamics(X, U), Q, sys.n)
    dC = _fd_jac_q(lambda X: sys.cost(X, U), Q, sys.n)[:, 0, :]
    out = np.empty((tab.s, sys.n))
    for j in range(tab.s):
        acc = h * tab.B[j] * p1
        for i in range(tab.s):
            Dh = Df[i].T @ P[i] - dC[i]
            acc = acc - h * tab.b[i] * (tab.M[i, j] * P[i] - h * tab.A[i, j] * Dh)
        out[j] = acc
    return out


class _StageCache(threading.local):
    key = None
    state = None


def build_docp(sys: ControlSystem, tab: GalerkinTableau, h, N, control_box, q0=None,
               q_final=None, cfg=None):
    """Discrete optimal control problem with stacked internal-stage controls.

    The control is ``(U^1, ..., U^s)`` of dimension ``s m``.  ``control_box``
    has shape ``(m, 2)`` (repeated for every stage) or ``(s m, 2)``.  The
    returned problem is vectorized; the stage solve is shared between
    ``f_d`` and ``C_d`` calls on the same inputs.
    """
    box = np.atleast_2d(np.asarray(control_box, dtype=float))
    if box.shape[0] == sys.m:
        box = np.tile(box, (tab.s, 1))
    if box.shape != (tab.s * sys.m, 2):
        raise ValueError(f"control_box must have shape ({sys.m}, 2) or ({tab.s * sys.m}, 2)")
    cache = _StageCache()

    def state(q, u):
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        if (cache.key is not None and cache.key[0].shape == q.shape
                and cache.key[1].shape == u.shape and np.array_equal(cache.key[0], q)
                and np.array_equal(cache.key[1], u)):
            return cache.state
        st = solve_internal_velocities(sys, tab, q, u.reshape(u.shape[:-1] + (tab.s, sys.m)),
                                       h, cfg)
        cache.key = (q.copy(), u.copy())
        cache.state = st
        return st

    def f_d(q, u):
        return discrete_dynamics(sys, tab, q, None, h, state=state(q, u))

    def C_d(q, u):
        return discrete_cost(sys, tab, q, None, h, state=state(q, u))

    return DiscreteOCP(f_d, C_d, N, box, q0=q0, n=sys.n, q_final=q_final, vectorized=True)


def heisenberg_system():
    """``f = (u, v, u y - v x)``, ``C = (u^2 + v^2)/2``, vectorized."""
    def f(q, u):
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        x, y = q[..., 0], q[..., 1]
        a, b = u[..., 0], u[..., 1]
        a, b, x, y = np.broadcast_arrays(a, b, x, y)
        return np.stack([a, b, a * y - b * x], axis=-1)

    def C(q, u):
        u = np.asarray(u, dtype=float)
        c = 0.5 * np.einsum("...i,...i->...", u, u)
        return np.broadcast_to(c, np.broadcast_shapes(np.shape(q)[:-1], c.shape))

    return ControlSystem(f, C, 3, 2, vectorized=True)


def heisenberg_fd_closed_form(q, U1, U2, h, literal=False):
    """Closed-form one-step map of the ``s = 2`` tableau for the Heisenberg system.

    ``z`` advances by ``h[(u1+u2)/2 y - (v1+v2)/2 x] + h^2 (u2 v1 - u1 v2)/4``.
    With ``literal=True`` the last term carries a single factor of ``h``,
    as in the commonly quoted form of this map; that variant does not agree
    with the Galerkin construction and is kept for reference only.
    """
    x, y, z = as_vector(q, "q", 3)
    u1, v1 = as_vector(U1, "U1", 2)
    u2, v2 = as_vector(U2, "U2", 2)
    ubar = 0.5 * (u1 + u2)
    vbar = 0.5 * (v1 + v2)
    cross = (u2 * v1 - u1 * v2) / 4
    coupling = cross if literal else h * cross
    return np.array([x + h * ubar, y + h * vbar, z + h * (ubar * y - vbar * x + coupling)])


def open_loop_flow(sys, tab, q0, control, h, steps, cfg=None, t0=0.0):
    """Iterate ``f_d`` with stage controls ``U^i = control(t_k + c_i h)``.

    Returns the states, shape ``(steps+1, n)``.
    """
    q = as_vector(q0, "q0", sys.n)
    out = [q]
    for k in range(steps):
        t = t0 + k * h
        U = np.array([as_vector(control(t + ci * h), "u", sys.m) for ci in tab.c])
        q = discrete_dynamics(sys, tab, q, U, h, cfg)
        out.append(q)
    return np.array(out)


def heisenberg_reference(q0, control, T, rtol=1e-13, atol=1e-13):
    """High-accuracy Heisenberg flow at time ``T`` under an open-loop control (DOP853)."""
    from scipy.integrate import solve_ivp

    sys = heisenberg_system()
    sol = solve_ivp(lambda t, q: sys.dynamics(q, np.asarray(control(t), dtype=float)),
                    (0.0, T), as_vector(q0, "q0", 3), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise ConvergenceError(f"reference integration failed: {sol.message}")
    return sol.y[:, -1]


def step_errors(tab, q0, control, hs, T=None, kind="global", cfg=None):
    """Errors of the Galerkin flow of the Heisenberg system against the reference.

    ``kind="global"`` integrates to ``T`` with ``T/h`` steps per ``h`` (each
    ``T/h`` must be an integer); ``kind="local"`` takes one step of each ``h``.
    """
    sys = heisenberg_system()
    errors = []
    for h in hs:
        if kind == "global":
            steps = int(round(T / h))
            if not math.isclose(steps * h, T, rel_tol=1e-12):
                raise ValueError("T must be an integer multiple of every step size")
        elif kind == "local":
            steps = 1
        else:
            raise ValueError("kind must be 'global' or 'local'")
        approx = open_loop_flow(sys, tab, q0, control, h, steps, cfg)[-1]
        ref = heisenberg_reference(q0, control, steps * h)
        errors.append(float(np.max(np.abs(approx - ref))))
    return errors
