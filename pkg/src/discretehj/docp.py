"""Discrete optimal control: control Hamiltonian, Bellman recursion, costates.

The cost-to-go ``J^k`` of a discrete optimal control problem satisfies the
Bellman equation

    J^k(q) = min_u [J^{k+1}(f_d(q, u)) + C_d(q, u)],

which is the right discrete Hamilton-Jacobi equation for ``S^k = S* - J^k``
and the right discrete Hamiltonian ``H(q, p) = max_u [p.f_d(q, u) - C_d(q, u)]``.
Value tables live on rectangular grids and are interpolated between nodes.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import NdBSpline, RegularGridInterpolator, make_interp_spline
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_square, as_vector, readonly, symmetrize
from .core import DiscreteHamiltonianRight
from .exceptions import BoundaryWarning, GridEscapeError, NonConcavityWarning
from .linhj import QuadraticGeneratingFunction

__all__ = [
    "DiscreteOCP",
    "LQProblem",
    "GridSpec",
    "ValueGrid",
    "Policy",
    "BellmanConfig",
    "BellmanSolver",
    "control_hamiltonian",
    "maximize_control",
    "control_right_hamiltonian",
    "pontryagin_residual",
    "bellman_backward",
    "costate_from_value",
    "rollout",
    "lq_value_analytic",
    "lq_optimal_solution",
    "sign_bridge",
    "terminal_penalty",
]


def _batched(fn, out_scalar):
    """Lift ``fn(q, u)`` on single vectors to arrays with arbitrary leading axes."""
    def wrapped(q, u):
        q = np.asarray(q, dtype=float)
        u = np.asarray(u, dtype=float)
        lead = np.broadcast_shapes(q.shape[:-1], u.shape[:-1])
        q = np.broadcast_to(q, lead + q.shape[-1:])
        u = np.broadcast_to(u, lead + u.shape[-1:])
        out = [np.asarray(fn(q[i], u[i]), dtype=float) for i in np.ndindex(*lead)]
        if out_scalar:
            return np.array([float(o) for o in out]).reshape(lead)
        return np.array(out).reshape(lead + (-1,))
    return wrapped


@dataclass(frozen=True, eq=False)
class DiscreteOCP:
    """A discrete optimal control problem.

    Parameters
    ----------
    f_d : callable
        Discrete dynamics ``f_d(q, u) -> q_next``.
    C_d : callable
        Stage cost ``C_d(q, u) -> float``.
    N : int
        Horizon, at least 1.
    control_box : array_like, shape (m, 2)
        Lower and upper bound per control coordinate.
    q0 : array_like, optional
        Initial state.
    n : int, optional
        State dimension; inferred from ``q0`` when omitted.
    q_final : array_like, optional
        Target terminal state.  Grid recursions replace the terminal
        constraint by a quadratic penalty (see :class:`BellmanConfig`).
    vectorized : bool
        ``f_d`` and ``C_d`` accept arrays with leading batch axes.
    """

    f_d: Callable
    C_d: Callable
    N: int
    control_box: np.ndarray
    q0: Optional[np.ndarray] = None
    n: Optional[int] = None
    q_final: Optional[np.ndarray] = None
    vectorized: bool = False

    def __post_init__(self):
        if not (callable(self.f_d) and callable(self.C_d)):
            raise TypeError("f_d and C_d must be callable")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be an integer >= 1")
        box = np.atleast_2d(np.asarray(self.control_box, dtype=float))
        if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] < 1:
            raise ValueError("control_box must have shape (m, 2)")
        if not np.all(np.isfinite(box)) or np.any(box[:, 0] > box[:, 1]):
            raise ValueError("control_box must be finite with lower <= upper")
        object.__setattr__(self, "control_box", readonly(box))
        object.__setattr__(self, "N", int(self.N))
        n = self.n
        if self.q0 is not None:
            q0 = as_vector(self.q0, "q0", n)
            object.__setattr__(self, "q0", readonly(q0))
            n = q0.size
        if n is None:
            raise ValueError("state dimension unknown: pass q0 or n")
        object.__setattr__(self, "n", int(n))
        if self.q_final is not None:
            object.__setattr__(self, "q_final", readonly(as_vector(self.q_final, "q_final", n)))

    @property
    def m(self):
        return self.control_box.shape[0]

    @property
    def lower(self):
        return self.control_box[:, 0]

    @property
    def upper(self):
        return self.control_box[:, 1]

    def dynamics(self, q, u):
        """``f_d`` on arrays with leading batch axes."""
        if self.vectorized:
            return np.asarray(self.f_d(q, u), dtype=float)
        return _batched(self.f_d, False)(q, u)

    def cost(self, q, u):
        """``C_d`` on arrays with leading batch axes."""
        if self.vectorized:
            return np.asarray(self.C_d(q, u), dtype=float)
        return _batched(self.C_d, True)(q, u)

    def with_cost_scale(self, lam):
        """The same problem with ``C_d`` multiplied by ``lam``."""
        C = self.C_d
        return DiscreteOCP(self.f_d, lambda q, u: lam * np.asarray(C(q, u)), self.N,
                           self.control_box, self.q0, self.n, self.q_final, self.vectorized)


@dataclass(frozen=True, eq=False)
class LQProblem:
    """Affine dynamics ``A q + B u + d`` with stage cost ``(q'Qq + u'Ru)/2``."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    d: Optional[np.ndarray] = None

    def __post_init__(self):
        A = as_square(self.A, "A")
        n = A.shape[0]
        B = as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows")
        m = B.shape[1]
        Q = as_square(self.Q, "Q", n)
        R = as_square(self.R, "R", m)
        if np.max(np.abs(Q - Q.T)) > 1e-12 * max(1.0, np.max(np.abs(Q))):
            raise ValueError("Q must be symmetric")
        if np.max(np.abs(R - R.T)) > 1e-12 * max(1.0, np.max(np.abs(R))):
            raise ValueError("R must be symmetric")
        Q = symmetrize(Q)
        R = symmetrize(R)
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12 * max(1.0, np.max(np.abs(Q))):
            raise ValueError("stage cost is not convex: Q is not positive semidefinite")
        if np.min(np.linalg.eigvalsh(R)) <= 0:
            raise ValueError("stage cost is not strictly convex in u: R is not positive definite")
        d = np.zeros(n) if self.d is None else as_vector(self.d, "d", n)
        for name, val in (("A", A), ("B", B), ("Q", Q), ("R", R), ("d", d)):
            object.__setattr__(self, name, readonly(val))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    def f_d(self, q, u):
        return (np.einsum("ij,...j->...i", self.A, q) + np.einsum("ij,...j->...i", self.B, u)
                + self.d)

    def C_d(self, q, u):
        return 0.5 * (np.einsum("...i,ij,...j->...", q, self.Q, q)
                      + np.einsum("...i,ij,...j->...", u, self.R, u))

    def to_ocp(self, N, control_box, q0=None, q_final=None):
        return DiscreteOCP(self.f_d, self.C_d, N, control_box, q0=q0, n=self.n,
                           q_final=q_final, vectorized=True)

    def right_hamiltonian(self):
        """``max_u [p.(Aq + Bu + d) - C_d(q, u)]`` in closed form, ``u* = R^{-1} B^T p``."""
        A, B, Q, R, d = self.A, self.B, self.Q, self.R, self.d

        def ustar(p):
            return np.linalg.solve(R, B.T @ p)

        def value(q, p):
            u = ustar(p)
            return float(p @ (A @ q + B @ u + d) - 0.5 * (q @ Q @ q + u @ R @ u))

        return DiscreteHamiltonianRight(
            value,
            d1=lambda q, p: A.T @ p - Q @ q,
            d2=lambda q, p: A @ q + B @ ustar(p) + d,
        )


def control_hamiltonian(ocp: DiscreteOCP, q, p, u):
    """``p.f_d(q, u) - C_d(q, u)``."""
    q = as_vector(q, "q", ocp.n)
    p = as_vector(p, "p", ocp.n)
    u = as_vector(u, "u", ocp.m)
    return float(p @ ocp.dynamics(q, u) - ocp.cost(q, u))


@dataclass(frozen=True)
class BellmanConfig:
    """Numerical settings of the control search and the grid recursion.

    Parameters
    ----------
    scan_points : int
        Coarse-scan points per control axis.
    refine : bool
        Polish the scan winner by projected Newton.
    max_refine : int
        Newton iterations of the polish.
    fd_rel_step : float
        Relative finite-difference step in ``u``.
    order : {"linear", "cubic"}
        Value interpolation.
    escape_margin : float
        Allowed overshoot of a successor state beyond the grid, as a
        fraction of the axis range.
    terminal_weight : float
        Weight ``mu`` of the penalty ``mu |q - q_final|^2`` used when the
        problem declares ``q_final`` and no terminal value is given.
        ``0`` means a free terminal state.
    n_jobs : int
        Worker threads for node sweeps; ``0`` uses every core.
    chunk_size : int
        Upper bound on ``nodes x candidates`` evaluated in one call.
    """

    scan_points: int = 17
    refine: bool = True
    max_refine: int = 30
    fd_rel_step: float = 1e-4
    order: str = "linear"
    escape_margin: float = 0.1
    terminal_weight: float = 1e3
    n_jobs: int = 1
    chunk_size: int = 200_000

    def __post_init__(self):
        if self.scan_points < 1:
            raise ValueError("scan_points must be >= 1")
        if self.order not in ("linear", "cubic"):
            raise ValueError("order must be 'linear' or 'cubic'")
        if self.escape_margin < 0 or self.terminal_weight < 0:
            raise ValueError("escape_margin and terminal_weight must be non-negative")
        if self.n_jobs < 0:
            raise ValueError("n_jobs must be >= 0")
        if not self.fd_rel_step > 0:
            raise ValueError("fd_rel_step must be positive")


DEFAULT_BELLMAN = BellmanConfig()


def _pow2(x):
    return 2.0 ** np.round(np.log2(x))


def _candidates(lower, upper, points):
    # ordered so that argmax's first hit is the smallest-norm, then
    # lexicographically smallest, maximizer
    axes = [np.linspace(lo, hi, points) if hi > lo else np.array([lo])
            for lo, hi in zip(lower, upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    keys = tuple(grid[:, i] for i in reversed(range(grid.shape[1])))
    order = np.lexsort(keys + (np.einsum("ij,ij->i", grid, grid),))
    return grid[order]


def _stencil(m):
    offsets = [np.zeros(m)]
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        offsets += [e, -e]
    for i in range(m):
        for j in range(i + 1, m):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                e = np.zeros(m)
                e[i], e[j] = si, sj
                offsets.append(e)
    return np.array(offsets)


def _derivatives(vals, m, delta):
    v0 = vals[:, 0]
    g = np.empty((vals.shape[0], m))
    H = np.empty((vals.shape[0], m, m))
    for i in range(m):
        vp, vm = vals[:, 1 + 2 * i], vals[:, 2 + 2 * i]
        g[:, i] = (vp - vm) / (2 * delta[i])
        H[:, i, i] = (vp - 2 * v0 + vm) / delta[i] ** 2
    col = 1 + 2 * m
    for i in range(m):
        for j in range(i + 1, m):
            pp, pm, mp, mm = vals[:, col:col + 4].T
            H[:, i, j] = H[:, j, i] = (pp - pm - mp + mm) / (4 * delta[i] * delta[j])
            col += 4
    return g, H


def _maximize_batch(objective, B, lower, upper, cfg):
    """Maximize ``objective`` over the box for ``B`` independent problems.

    ``objective(U)`` maps controls of shape ``(B', K, m)`` to values
    ``(B', K)`` where ``B'`` indexes a subset of the problems given by the
    second argument.  Returns ``(u, value, nonconcave)``.
    """
    m = lower.size
    idx_all = np.arange(B)
    cand = _candidates(lower, upper, cfg.scan_points)
    vals = objective(np.broadcast_to(cand, (B,) + cand.shape), idx_all)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    pick = np.argmax(vals, axis=1)
    u = cand[pick].copy()
    best = vals[idx_all, pick]
    flag = np.zeros(B, dtype=bool)
    if not cfg.refine:
        return u, best, flag
    span = upper - lower
    free_axis = span > 0
    if not np.any(free_axis):
        return u, best, flag
    delta = _pow2(cfg.fd_rel_step * np.maximum(1.0, span))
    offsets = _stencil(m) * delta
    active = np.isfinite(best)
    for _ in range(cfg.max_refine):
        ia = np.nonzero(active)[0]
        if ia.size == 0:
            break
        ua = u[ia]
        sv = objective(ua[:, None, :] + offsets[None], ia)
        g, H = _derivatives(sv, m, delta)
        fixed = ((ua <= lower) & (g < 0)) | ((ua >= upper) & (g > 0)) | ~free_axis
        g = np.where(fixed, 0.0, g)
        H = np.where(fixed[:, :, None] | fixed[:, None, :], 0.0, H)
        diag = np.arange(m)
        H[:, diag, diag] = np.where(fixed, -1.0, H[:, diag, diag])
        scale = np.maximum(np.max(np.abs(H), axis=(1, 2)), 1e-300)
        concave = np.linalg.eigvalsh(H)[:, -1] < -1e-10 * scale
        bad = ~concave & np.all(np.isfinite(sv), axis=1)
        flag[ia[bad]] = True
        active[ia[~concave]] = False
        ok = concave
        if not np.any(ok):
            continue
        ib = ia[ok]
        d = np.linalg.solve(H[ok], -g[ok][..., None])[..., 0]
        t = np.ones(ib.size)
        pending = np.ones(ib.size, dtype=bool)
        accepted = np.zeros(ib.size, dtype=bool)
        for _ in range(20):
            if not np.any(pending):
                break
            ip = np.nonzero(pending)[0]
            trial = np.clip(u[ib[ip]] + t[ip, None] * d[ip], lower, upper)
            tv = objective(trial[:, None, :], ib[ip])[:, 0]
            good = tv >= best[ib[ip]]
            acc = ip[good]
            step = np.max(np.abs(trial[good] - u[ib[acc]]) / np.maximum(1.0, span), axis=1) \
                if acc.size else np.zeros(0)
            u[ib[acc]] = trial[good]
            best[ib[acc]] = tv[good]
            accepted[acc] = True
            # converged once the accepted step is negligible
            done = step <= 1e-12
            active[ib[acc[done]]] = False
            pending[acc] = False
            t[ip[~good]] *= 0.5
        active[ib[~accepted]] = False
    return u, best, flag


def maximize_control(ocp: DiscreteOCP, q, p, cfg: BellmanConfig = None, full_output=False):
    """Control maximizing ``p.f_d(q, u) - C_d(q, u)`` over the control box.

    A coarse scan with ``cfg.scan_points`` points per axis picks a seed
    (ties go to the smallest ``|u|``, then lexicographic order) that is then
    polished by a projected Newton iteration on ``D_u H = 0``.  If the
    Hessian in ``u`` is not negative definite at the seed, the scan value is
    returned and a :class:`NonConcavityWarning` is issued.

    Returns
    -------
    u : numpy.ndarray
    nonconcave : bool
        Only when ``full_output`` is true.
    """
    cfg = DEFAULT_BELLMAN if cfg is None else cfg
    q = as_vector(q, "q", ocp.n)
    p = as_vector(p, "p", ocp.n)

    def objective(U, idx):
        qb = np.broadcast_to(q, U.shape[:-1] + (ocp.n,))
        return ocp.dynamics(qb, U) @ p - ocp.cost(qb, U)

    u, _, flag = _maximize_batch(objective, 1, ocp.lower, ocp.upper, cfg)
    if flag[0]:
        warnings.warn("control Hamiltonian is not strictly concave at the returned control",
                      NonConcavityWarning, stacklevel=2)
    if full_output:
        return u[0], bool(flag[0])
    return u[0]


def _fd_jac(fn, x, step_scale=6.0554544523933395e-06):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = _pow2(step_scale * max(1.0, abs(x[i])))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((np.atleast_1d(fn(xp)) - np.atleast_1d(fn(xm))) / (2 * h))
    return np.column_stack(cols)


def control_right_hamiltonian(ocp: DiscreteOCP, cfg: BellmanConfig = None):
    """``H(q, p) = max_u [p.f_d(q, u) - C_d(q, u)]`` as a right discrete Hamiltonian.

    Partials follow from the envelope theorem: ``D1 H = D1 f_d^T p - D1 C_d``
    and ``D2 H = f_d(q, u*)`` at the maximizer ``u*``.
    """
    def ustar(q, p):
        return maximize_control(ocp, q, p, cfg)

    def d1(q, p):
        u = ustar(q, p)
        Jf = _fd_jac(lambda x: ocp.dynamics(x, u), q)
        gC = _fd_jac(lambda x: ocp.cost(x, u), q)[0]
        return Jf.T @ p - gC

    return DiscreteHamiltonianRight(
        lambda q, p: control_hamiltonian(ocp, q, p, ustar(q, p)),
        d1=d1,
        d2=lambda q, p: ocp.dynamics(q, ustar(q, p)),
    )


def pontryagin_residual(ocp: DiscreteOCP, states, controls, costates):
    """Largest violation of the discrete maximum principle along a trajectory.

    Checks ``q_{k+1} = f_d(q_k, u_k)``, ``p_k = D1 f_d^T p_{k+1} - D1 C_d``
    and the projected stationarity ``u_k = clip(u_k + D_u H)`` for
    ``k = 0..K-1``.

    Parameters
    ----------
    states : array_like, shape (K+1, n)
    controls : array_like, shape (K, m)
    costates : array_like, shape (K+1, n)
    """
    X = np.atleast_2d(np.asarray(states, dtype=float))
    U = np.atleast_2d(np.asarray(controls, dtype=float))
    P = np.atleast_2d(np.asarray(costates, dtype=float))
    K = U.shape[0]
    if X.shape != (K + 1, ocp.n) or P.shape != (K + 1, ocp.n) or U.shape[1] != ocp.m:
        raise ValueError("need K+1 states, K controls and K+1 costates of matching dimension")
    worst = 0.0
    for k in range(K):
        q, u, p1 = X[k], U[k], P[k + 1]
        worst = max(worst, np.max(np.abs(X[k + 1] - ocp.dynamics(q, u))))
        Jq = _fd_jac(lambda x: ocp.dynamics(x, u), q)
        gq = _fd_jac(lambda x: ocp.cost(x, u), q)[0]
        worst = max(worst, np.max(np.abs(P[k] - (Jq.T @ p1 - gq))))
        Ju = _fd_jac(lambda v: ocp.dynamics(q, v), u)
        gu = _fd_jac(lambda v: ocp.cost(q, v), u)[0]
        grad = Ju.T @ p1 - gu
        worst = max(worst, np.max(np.abs(u - np.clip(u + grad, ocp.lower, ocp.upper))))
    return float(worst)


@dataclass(frozen=True, eq=False)
class GridSpec:
    """A rectangular state grid: per-axis bounds and node counts."""

    lower: np.ndarray
    upper: np.ndarray
    points: tuple

    def __post_init__(self):
        lo = as_vector(self.lower, "lower")
        hi = as_vector(self.upper, "upper", lo.size)
        pts = tuple(int(p) for p in np.atleast_1d(self.points))
        if len(pts) == 1 and lo.size > 1:
            pts = pts * lo.size
        if len(pts) != lo.size:
            raise ValueError("points must give one count per axis")
        if np.any(hi <= lo):
            raise ValueError("grid upper bounds must exceed lower bounds")
        if min(pts) < 2:
            raise ValueError("each grid axis needs at least 2 points")
        object.__setattr__(self, "lower", readonly(lo))
        object.__setattr__(self, "upper", readonly(hi))
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.lower.size

    @property
    def shape(self):
        return self.points

    @property
    def spacing(self):
        return (self.upper - self.lower) / (np.array(self.points) - 1)

    def axes(self):
        return [np.linspace(lo, hi, p) for lo, hi, p in zip(self.lower, self.upper, self.points)]

    def nodes(self):
        """All nodes in C order, shape ``(prod(points), n)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.n)

    def clamp(self, q):
        return np.clip(q, self.lower, self.upper)

    def escape(self, q):
        """Overshoot beyond the grid as a fraction of each axis range (max over axes)."""
        span = self.upper - self.lower
        over = np.maximum(np.maximum(self.lower - q, q - self.upper), 0.0) / span
        return np.max(over, axis=-1)


class _Interpolant:
    """Clamped multilinear or cubic (not-a-knot tensor spline) interpolation."""

    def __init__(self, grid: GridSpec, values, order="linear"):
        self.grid = grid
        values = np.asarray(values, dtype=float)
        axes = grid.axes()
        if order == "linear":
            self._f = RegularGridInterpolator(axes, values, method="linear")
        else:
            if min(grid.points) < 4:
                raise ValueError("cubic interpolation needs at least 4 points per axis")
            c = values
            knots = []
            for ax, x in enumerate(axes):
                spl = make_interp_spline(x, c, k=3, axis=ax)
                c = np.moveaxis(spl.c, 0, ax)
                knots.append(spl.t)
            self._f = NdBSpline(tuple(knots), c, 3)

    def __call__(self, q):
        """Values at the rows of ``q``, shape ``(k,)``."""
        q = self.grid.clamp(np.asarray(q, dtype=float).reshape(-1, self.grid.n))
        return np.asarray(self._f(q), dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class ValueGrid:
    """Cost-to-go tables ``J^0..J^N`` on a grid, shape ``(N+1,) + grid.shape``."""

    grid: GridSpec
    tables: np.ndarray
    order: str = "linear"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        tables = np.asarray(self.tables, dtype=float)
        if tables.ndim != self.grid.n + 1 or tables.shape[1:] != self.grid.shape:
            raise ValueError("tables must have shape (N+1,) + grid.shape")
        if not np.all(np.isfinite(tables)):
            raise ValueError("value tables must be finite")
        object.__setattr__(self, "tables", readonly(tables))

    @property
    def N(self):
        return self.tables.shape[0] - 1

    def interpolant(self, k):
        if k not in self._cache:
            self._cache[k] = _Interpolant(self.grid, self.tables[k], self.order)
        return self._cache[k]

    def __call__(self, k, q):
        """Interpolated ``J^k`` at ``q`` (any leading batch axes)."""
        q = np.asarray(q, dtype=float)
        out = self.interpolant(k)(q.reshape(-1, self.grid.n))
        return out.reshape(q.shape[:-1]) if q.ndim > 1 else float(out[0])

    def gradient(self, k, q, warn=True):
        """Central difference of the interpolant with step half a grid spacing.

        Near an edge the stencil becomes one-sided and a
        :class:`BoundaryWarning` is issued.
        """
        q = as_vector(q, "q", self.grid.n)
        step = self.grid.spacing / 2
        f = self.interpolant(k)
        g = np.empty(self.grid.n)
        for i in range(self.grid.n):
            e = np.zeros(self.grid.n)
            e[i] = step[i]
            lo_ok = q[i] - step[i] >= self.grid.lower[i]
            hi_ok = q[i] + step[i] <= self.grid.upper[i]
            if lo_ok and hi_ok:
                g[i] = (f(q + e)[0] - f(q - e)[0]) / (2 * step[i])
            else:
                if warn:
                    warnings.warn(f"one-sided difference on axis {i} near the grid edge",
                                  BoundaryWarning, stacklevel=2)
                if hi_ok:
                    g[i] = (-3 * f(q)[0] + 4 * f(q + e)[0] - f(q + 2 * e)[0]) / (2 * step[i])
                else:
                    g[i] = (3 * f(q)[0] - 4 * f(q - e)[0] + f(q - 2 * e)[0]) / (2 * step[i])
        return g


@dataclass(frozen=True, eq=False)
class Policy:
    """Minimizer tables ``u*_0..u*_{N-1}``, shape ``(N,) + grid.shape + (m,)``."""

    grid: GridSpec
    tables: np.ndarray
    control_box: np.ndarray

    def __post_init__(self):
        tables = np.asarray(self.tables, dtype=float)
        box = np.asarray(self.control_box, dtype=float)
        if tables.shape[1:-1] != self.grid.shape or tables.shape[-1] != box.shape[0]:
            raise ValueError("tables must have shape (N,) + grid.shape + (m,)")
        if np.any(tables < box[:, 0] - 1e-12) or np.any(tables > box[:, 1] + 1e-12):
            raise ValueError("policy tables leave the control box")
        object.__setattr__(self, "tables", readonly(tables))
        object.__setattr__(self, "control_box", readonly(box))

    @property
    def N(self):
        return self.tables.shape[0]

    def __call__(self, k, q):
        """Multilinear interpolation of ``u*_k`` at ``q``, clipped to the box."""
        q = self.grid.clamp(as_vector(q, "q", self.grid.n))
        f = RegularGridInterpolator(self.grid.axes(), self.tables[k], method="linear")
        return np.clip(f(q[None])[0], self.control_box[:, 0], self.control_box[:, 1])


def terminal_penalty(q_final, mu=1e3):
    """``mu |q - q_final|^2`` accepting batch axes."""
    q_final = as_vector(q_final, "q_final")

    def J(q):
        dq = np.asarray(q, dtype=float) - q_final
        return mu * np.einsum("...i,...i->...", dq, dq)
    J.vectorized = True
    return J


def _terminal_values(terminal, nodes):
    if isinstance(terminal, QuadraticGeneratingFunction):
        return (0.5 * np.einsum("ni,ij,nj->n", nodes, terminal.A, nodes)
                + nodes @ terminal.b + terminal.c)
    if getattr(terminal, "vectorized", False):
        return np.asarray(terminal(nodes), dtype=float).reshape(-1)
    return np.array([float(terminal(x)) for x in nodes])


def _resolve_jobs(n_jobs):
    return (os.cpu_count() or 1) if n_jobs == 0 else n_jobs


def bellman_backward(ocp: DiscreteOCP, grid: GridSpec, terminal=None, cfg: BellmanConfig = None):
    """Backward Bellman recursion on a grid.

    For ``k = N-1, ..., 0`` and every node ``q``,
    ``J^k(q) = min_u [J^{k+1}(f_d(q, u)) + C_d(q, u)]`` with ``J^{k+1}``
    interpolated (clamped) between nodes.  Nodes within one stage are
    independent and may be split across threads.

    Parameters
    ----------
    ocp : DiscreteOCP
    grid : GridSpec
    terminal : callable or QuadraticGeneratingFunction, optional
        ``J^N``.  Defaults to the penalty ``mu |q - q_final|^2`` when the
        problem declares ``q_final``, else zero.
    cfg : BellmanConfig, optional

    Returns
    -------
    values : ValueGrid
    policy : Policy

    Raises
    ------
    GridEscapeError
        A minimizing successor leaves the grid by more than
        ``cfg.escape_margin`` of an axis range.
    """
    cfg = DEFAULT_BELLMAN if cfg is None else cfg
    if grid.n != ocp.n:
        raise ValueError(f"grid has {grid.n} axes but the state has dimension {ocp.n}")
    nodes = grid.nodes()
    P = nodes.shape[0]
    if terminal is None:
        if ocp.q_final is not None and cfg.terminal_weight > 0:
            terminal = terminal_penalty(ocp.q_final, cfg.terminal_weight)
        else:
            terminal = lambda q: 0.0  # noqa: E731
    JN = _terminal_values(terminal, nodes)
    if not np.all(np.isfinite(JN)):
        raise ValueError("terminal values must be finite on the grid")
    tables = np.empty((ocp.N + 1, P))
    policy = np.empty((ocp.N, P, ocp.m))
    tables[ocp.N] = JN
    K = len(_candidates(ocp.lower, ocp.upper, cfg.scan_points))
    chunk = max(1, cfg.chunk_size // max(K, 1))
    chunks = [np.arange(s, min(s + chunk, P)) for s in range(0, P, chunk)]
    nonconcave = 0
    for k in range(ocp.N - 1, -1, -1):
        interp = _Interpolant(grid, tables[k + 1].reshape(grid.shape), cfg.order)

        def solve_chunk(idx, interp=interp):
            qs = nodes[idx]

            def objective(U, sub):
                qb = np.broadcast_to(qs[sub][:, None, :], U.shape[:-1] + (ocp.n,))
                nxt = ocp.dynamics(qb, U)
                J = interp(nxt.reshape(-1, ocp.n)).reshape(nxt.shape[:-1])
                return -(J + ocp.cost(qb, U))

            return _maximize_batch(objective, idx.size, ocp.lower, ocp.upper, cfg)

        jobs = _resolve_jobs(cfg.n_jobs)
        if jobs > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(solve_chunk, chunks))
        else:
            results = [solve_chunk(idx) for idx in chunks]
        for idx, (u, best, flag) in zip(chunks, results):
            tables[k, idx] = -best
            policy[k, idx] = u
            nonconcave += int(np.sum(flag))
        succ = ocp.dynamics(nodes, policy[k])
        esc = grid.escape(succ)
        worst = int(np.argmax(esc))
        if esc[worst] > cfg.escape_margin:
            raise GridEscapeError(
                f"stage {k}, node {worst} (q={nodes[worst]}): optimal successor "
                f"{succ[worst]} leaves the grid by {esc[worst]:.1%} of the axis range",
                stage=k, node=worst)
        if not np.all(np.isfinite(tables[k])):
            raise GridEscapeError(f"stage {k}: non-finite values", stage=k)
    if nonconcave:
        warnings.warn(f"{nonconcave} node updates had a non-concave control Hamiltonian",
                      NonConcavityWarning, stacklevel=2)
    values = ValueGrid(grid, tables.reshape((ocp.N + 1,) + grid.shape), cfg.order)
    pol = Policy(grid, policy.reshape((ocp.N,) + grid.shape + (ocp.m,)), ocp.control_box)
    return values, pol


def costate_from_value(values: ValueGrid, traj, start=0):
    """Costates ``p_k = -DJ^k(c_k)`` from interpolated value tables.

    ``traj`` holds ``c_start, c_{start+1}, ...``; the stage index follows
    the row index.
    """
    traj = np.atleast_2d(np.asarray(traj, dtype=float))
    return np.array([-values.gradient(start + k, c) for k, c in enumerate(traj)])


def rollout(ocp: DiscreteOCP, policy, q0, N=None, grid: GridSpec = None, escape_margin=0.1):
    """Simulate ``q_{k+1} = f_d(q_k, u_k)`` under a policy.

    Parameters
    ----------
    policy : Policy or callable
        A :class:`Policy` or a feedback ``policy(k, q) -> u``.
    q0 : array_like
    N : int, optional
        Number of steps; defaults to the problem horizon.
    grid : GridSpec, optional
        Domain for the escape check; defaults to the grid of a
        :class:`Policy`.

    Returns
    -------
    states : numpy.ndarray, shape (N+1, n)
    controls : numpy.ndarray, shape (N, m)
    cost : float
        ``sum_k C_d(q_k, u_k)``.
    """
    N = ocp.N if N is None else int(N)
    q = as_vector(q0, "q0", ocp.n)
    if grid is None and isinstance(policy, Policy):
        grid = policy.grid
    states = [q]
    controls = []
    cost = 0.0
    for k in range(N):
        if grid is not None and grid.escape(q) > escape_margin:
            raise GridEscapeError(f"rollout left the grid at step {k} (q={q})", stage=k)
        u = as_vector(policy(k, q), "u", ocp.m)
        cost += float(ocp.cost(q, u))
        q = np.asarray(ocp.dynamics(q, u), dtype=float)
        states.append(q)
        controls.append(u)
    return np.array(states), np.array(controls).reshape(N, ocp.m), cost


def lq_value_analytic(lq: LQProblem, N, terminal: QuadraticGeneratingFunction = None):
    """Exact cost-to-go ``J^0..J^N`` of an unconstrained LQ problem.

    Each ``J^k(q) = q'P_k q/2 + b_k'q + c_k`` is returned as a
    :class:`~discretehj.linhj.QuadraticGeneratingFunction` holding
    ``(P_k, b_k, c_k)``.  With ``G = R + B'PB``:

        P' = Q + A'PA - A'PB G^{-1} B'PA
        b' = A'b~ - A'PB G^{-1} B'b~,       b~ = b + P d
        c' = c~ - b~'B G^{-1} B'b~ / 2,      c~ = c + d'Pd/2 + b'd
    """
    if N < 0:
        raise ValueError("N must be non-negative")
    if terminal is None:
        terminal = QuadraticGeneratingFunction.zero(lq.n)
    A, B, Q, R, d = lq.A, lq.B, lq.Q, lq.R, lq.d
    out = [terminal]
    for _ in range(N):
        J = out[0]
        P, b, c = J.A, J.b, J.c
        bt = b + P @ d
        ct = c + 0.5 * d @ P @ d + b @ d
        G = R + B.T @ P @ B
        PA = P @ A
        K = np.linalg.solve(G, B.T @ PA)
        kb = np.linalg.solve(G, B.T @ bt)
        P_new = Q + A.T @ PA - PA.T @ B @ K
        b_new = A.T @ bt - PA.T @ B @ kb
        c_new = ct - 0.5 * bt @ B @ kb
        out.insert(0, QuadraticGeneratingFunction(P_new, b_new, c_new))
    return out


def lq_optimal_solution(lq: LQProblem, values, q0):
    """Optimal states, controls and costates ``p_k = -DJ^k(q_k)`` from analytic values.

    ``u_k = -G^{-1} B'(P_{k+1}(A q_k + d) + b_{k+1})``.
    """
    q = as_vector(q0, "q0", lq.n)
    N = len(values) - 1
    states, controls = [q], []
    for k in range(N):
        J1 = values[k + 1]
        G = lq.R + lq.B.T @ J1.A @ lq.B
        u = -np.linalg.solve(G, lq.B.T @ (J1.A @ (lq.A @ q + lq.d) + J1.b))
        q = lq.f_d(q, u)
        states.append(q)
        controls.append(u)
    costates = [-values[k].gradient(x) for k, x in enumerate(states)]
    return np.array(states), np.array(controls).reshape(N, lq.m), np.array(costates)


def sign_bridge(J, S_star):
    """``S^k = S* - J^k``: cost-to-go to Hamilton-Jacobi generating function.

    ``J`` is a :class:`QuadraticGeneratingFunction` (returned as one) or a
    callable.
    """
    if isinstance(J, QuadraticGeneratingFunction):
        return J.scaled(-1.0, S_star)
    return lambda q: S_star - J(q)


class BellmanSolver(BaseEstimator):
    """Grid dynamic programming as a fitted object.

    Parameters mirror :class:`GridSpec` and :class:`BellmanConfig`.  ``fit``
    takes a :class:`DiscreteOCP` and stores ``values_`` and ``policy_``.

    Examples
    --------
    >>> lq = LQProblem([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    >>> solver = BellmanSolver(lower=[-1], upper=[1], points=41, control_bounds=[[-2, 2]])
    >>> solver.fit(lq.to_ocp(1, [[-2, 2]]), terminal=QuadraticGeneratingFunction([[1.0]], [0.0]))
    BellmanSolver(control_bounds=[[-2, 2]], lower=[-1], points=41, upper=[1])
    >>> round(solver.value(0, [1.0]), 6)
    0.75
    """

    def __init__(self, lower=(-1.0,), upper=(1.0,), points=21, control_bounds=None,
                 order="linear", scan_points=17, terminal_weight=1e3, n_jobs=1):
        self.lower = lower
        self.upper = upper
        self.points = points
        self.control_bounds = control_bounds
        self.order = order
        self.scan_points = scan_points
        self.terminal_weight = terminal_weight
        self.n_jobs = n_jobs

    def _config(self):
        return BellmanConfig(scan_points=self.scan_points, order=self.order,
                             terminal_weight=self.terminal_weight, n_jobs=self.n_jobs)

    def fit(self, ocp: DiscreteOCP, terminal=None):
        grid = GridSpec(self.lower, self.upper, self.points)
        if self.control_bounds is not None:
            ocp = DiscreteOCP(ocp.f_d, ocp.C_d, ocp.N, self.control_bounds, ocp.q0, ocp.n,
                              ocp.q_final, ocp.vectorized)
        self.values_, self.policy_ = bellman_backward(ocp, grid, terminal, self._config())
        self.ocp_ = ocp
        return self

    def value(self, k, q):
        check_is_fitted(self, "values_")
        return self.values_(k, np.asarray(q, dtype=float))

    def predict(self, X, stage=0):
        """Feedback controls ``u*_stage`` at the rows of ``X``."""
        check_is_fitted(self, "policy_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.policy_(stage, x) for x in X])

    def rollout(self, q0=None):
        check_is_fitted(self, "policy_")
        q0 = self.ocp_.q0 if q0 is None else q0
        return rollout(self.ocp_, self.policy_, q0)
