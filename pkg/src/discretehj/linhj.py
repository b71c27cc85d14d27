"""Discrete linear Hamiltonian systems and the discrete Riccati recurrence.

A quadratic left discrete Hamiltonian

    H(p, q') = p^T M^{-1} p / 2 + p^T L q' + q'^T K q' / 2

generates the linear symplectic map ``z_{k+1} = A z_k``.  Quadratic solutions
``S^k(q) = q^T A_k q / 2 + b_k^T q + c_k`` of the left discrete
Hamilton-Jacobi equation evolve by the Riccati recurrence, which is checked
here against the geometric picture: the graph of ``dS^k`` is a Lagrangian
affine space carried forward by the linear map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_matrix, as_square, as_vector, check_symmetric, readonly, symmetrize
from .core import (
    DiscreteHamiltonianLeft,
    DiscreteHamiltonianRight,
    DiscreteLagrangian,
    GeneratingFunctionSequence,
    symplectic_form,
)
from .exceptions import (
    DegeneracyError,
    RiccatiBreakdownError,
    SingularMatrixError,
    TransversalityError,
)

__all__ = [
    "QuadraticLeftHamiltonian",
    "QuadraticGeneratingFunction",
    "LinearHamiltonianMap",
    "LagrangianAffineSpace",
    "step_matrix",
    "riccati_step",
    "riccati_fractional_step",
    "riccati_sequence",
    "f_minus_linear",
    "propagate_affine",
    "extract_generating",
    "is_lagrangian",
]

_COND_LIMIT = 1e12


def _check_invertible(a, name, error=SingularMatrixError):
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond >= _COND_LIMIT:
        raise error(f"{name} is singular (condition estimate {cond:.3e})")


@dataclass(frozen=True, eq=False)
class QuadraticLeftHamiltonian:
    """Coefficients ``(M, K, L)`` of a quadratic left discrete Hamiltonian."""

    M: np.ndarray
    K: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        M = as_square(self.M, "M")
        n = M.shape[0]
        K = as_square(self.K, "K", n)
        L = as_square(self.L, "L", n)
        check_symmetric(M, "M")
        check_symmetric(K, "K")
        _check_invertible(M, "M")
        _check_invertible(L, "L")
        object.__setattr__(self, "M", readonly(symmetrize(M)))
        object.__setattr__(self, "K", readonly(symmetrize(K)))
        object.__setattr__(self, "L", readonly(L))

    @property
    def n(self):
        return self.M.shape[0]

    def __call__(self, p, q_next):
        p = as_vector(p, "p", self.n)
        q_next = as_vector(q_next, "q_next", self.n)
        return float(0.5 * p @ np.linalg.solve(self.M, p) + p @ self.L @ q_next
                     + 0.5 * q_next @ self.K @ q_next)

    def left_hamiltonian(self):
        """The Hamiltonian as a :class:`DiscreteHamiltonianLeft` with analytic partials."""
        M, K, L = self.M, self.K, self.L
        return DiscreteHamiltonianLeft(
            self.__call__,
            d1=lambda p, q1: np.linalg.solve(M, p) + L @ q1,
            d2=lambda p, q1: L.T @ p + K @ q1,
        )

    def lagrangian(self):
        """The discrete Lagrangian ``(q + Lq')^T M (q + Lq') / 2 - q'^T K q' / 2``.

        Obtained from the left Hamiltonian by the inverse left Legendre transform.
        """
        M, K, L = self.M, self.K, self.L

        def value(q, q1):
            r = q + L @ q1
            return float(0.5 * r @ M @ r - 0.5 * q1 @ K @ q1)

        return DiscreteLagrangian(
            value,
            d1=lambda q, q1: M @ (q + L @ q1),
            d2=lambda q, q1: L.T @ M @ (q + L @ q1) - K @ q1,
        )

    def right_hamiltonian(self):
        """The right discrete Hamiltonian of the same map.

        Requires ``L^T M L - K`` to be invertible, which makes the right
        Legendre transform of the Lagrangian solvable for ``q'``.
        """
        M, K, L = self.M, self.K, self.L
        G = L.T @ M @ L - K
        _check_invertible(G, "L^T M L - K")
        lag = self.lagrangian()

        def next_q(q, p1):
            return np.linalg.solve(G, p1 - L.T @ M @ q)

        def value(q, p1):
            q1 = next_q(q, p1)
            return float(p1 @ q1) - lag(q, q1)

        return DiscreteHamiltonianRight(
            value,
            d1=lambda q, p1: -M @ (q + L @ next_q(q, p1)),
            d2=next_q,
        )

    def step_matrix(self):
        return step_matrix(self)


@dataclass(frozen=True, eq=False)
class QuadraticGeneratingFunction:
    """``S(q) = q^T A q / 2 + b^T q + c`` with ``A`` symmetrized on construction."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        A = as_square(self.A, "A")
        b = as_vector(self.b, "b", A.shape[0])
        object.__setattr__(self, "A", readonly(symmetrize(A)))
        object.__setattr__(self, "b", readonly(b))
        object.__setattr__(self, "c", float(self.c))

    @property
    def n(self):
        return self.A.shape[0]

    def __call__(self, q):
        q = as_vector(q, "q", self.n)
        return float(0.5 * q @ self.A @ q + self.b @ q + self.c)

    def gradient(self, q):
        q = as_vector(q, "q", self.n)
        return self.A @ q + self.b

    def scaled(self, factor, offset=0.0):
        """``factor * S + offset`` as a new quadratic."""
        return QuadraticGeneratingFunction(factor * self.A, factor * self.b,
                                           factor * self.c + offset)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, n)), np.zeros(n), 0.0)


@dataclass(frozen=True, eq=False)
class LinearHamiltonianMap:
    """A ``2n x 2n`` symplectic matrix acting on ``(q, p)``."""

    matrix: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        A = as_square(self.matrix, "matrix")
        if A.shape[0] % 2:
            raise ValueError("a linear Hamiltonian map must have even dimension")
        object.__setattr__(self, "matrix", readonly(A))
        defect = self.symplectic_defect()
        # defect scales like |A|^2 under rounding
        if defect > self.tol * max(1.0, np.max(np.abs(A)) ** 2):
            raise ValueError(f"matrix is not symplectic (defect {defect:.3e})")

    @property
    def n(self):
        return self.matrix.shape[0] // 2

    def symplectic_defect(self):
        J = symplectic_form(self.n)
        A = self.matrix
        return float(np.max(np.abs(A.T @ J @ A - J)))

    def blocks(self):
        n = self.n
        A = self.matrix
        return A[:n, :n], A[:n, n:], A[n:, :n], A[n:, n:]

    def __matmul__(self, z):
        return self.matrix @ z


def step_matrix(H: QuadraticLeftHamiltonian):
    """Block matrix of the map generated by a quadratic left discrete Hamiltonian.

    Returns ``[[-L^{-1}, -L^{-1} M^{-1}], [K L^{-1}, K L^{-1} M^{-1} - L^T]]``.
    """
    n = H.n
    eye = np.eye(n)
    Linv = np.linalg.solve(H.L, eye)
    LinvMinv = np.linalg.solve(H.L, np.linalg.solve(H.M, eye))
    top = np.hstack([-Linv, -LinvMinv])
    bottom = np.hstack([H.K @ Linv, H.K @ LinvMinv - H.L.T])
    return LinearHamiltonianMap(np.vstack([top, bottom]))


def riccati_step(S: QuadraticGeneratingFunction, H: QuadraticLeftHamiltonian, index=None):
    """Advance ``(A_k, b_k, c_k)`` one step of the discrete Riccati recurrence.

    Parameters
    ----------
    S : QuadraticGeneratingFunction
        Coefficients at step ``k``.
    H : QuadraticLeftHamiltonian
    index : int, optional
        Step index reported in a breakdown error.

    Returns
    -------
    QuadraticGeneratingFunction
        ``A' = L^T (I + A M^{-1})^{-1} A L - K``,
        ``b' = -L^T (I + A M^{-1})^{-1} b``,
        ``c' = c - b^T (M + A)^{-1} b / 2``, with ``A'`` symmetrized.

    Raises
    ------
    RiccatiBreakdownError
        If ``I + A M^{-1}`` or ``M + A`` is singular.
    """
    A, b, c = S.A, S.b, S.c
    M, K, L = H.M, H.K, H.L
    where = "" if index is None else f" at step {index}"
    X = np.eye(H.n) + np.linalg.solve(M, A.T).T
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond >= _COND_LIMIT:
        raise RiccatiBreakdownError(f"I + A M^-1 is singular{where}", index)
    MA = M + A
    cond = np.linalg.cond(MA)
    if not np.isfinite(cond) or cond >= _COND_LIMIT:
        raise RiccatiBreakdownError(f"M + A is singular{where}", index)
    A_next = L.T @ np.linalg.solve(X, A @ L) - K
    b_next = -L.T @ np.linalg.solve(X, b)
    c_next = c - 0.5 * b @ np.linalg.solve(MA, b)
    return QuadraticGeneratingFunction(A_next, b_next, c_next)


def riccati_fractional_step(A, H: QuadraticLeftHamiltonian):
    """Riccati update written with the blocks of the step matrix.

    Returns ``(C + D A)(A11 + B A)^{-1}`` where ``[[A11, B], [C, D]]`` is
    :func:`step_matrix` of ``H``; the result is not symmetrized.
    """
    A = as_square(A, "A", H.n)
    A11, B, C, D = step_matrix(H).blocks()
    num = C + D @ A
    den = A11 + B @ A
    cond = np.linalg.cond(den)
    if not np.isfinite(cond) or cond >= _COND_LIMIT:
        raise RiccatiBreakdownError("denominator -L^-1 - L^-1 M^-1 A is singular")
    return np.linalg.solve(den.T, num.T).T


def riccati_sequence(S0: QuadraticGeneratingFunction, H: QuadraticLeftHamiltonian, N: int):
    """``[S^0, ..., S^N]`` by repeated :func:`riccati_step`."""
    seq = [S0]
    for k in range(N):
        seq.append(riccati_step(seq[-1], H, index=k))
    return seq


def riccati_generating_sequence(S0, H, N):
    """The Riccati iterates wrapped as a :class:`GeneratingFunctionSequence`."""
    return GeneratingFunctionSequence(riccati_sequence(S0, H, N))


def f_minus_linear(S: QuadraticGeneratingFunction, H: QuadraticLeftHamiltonian, q):
    """Closed form of the left implicit map: ``-L^{-1}(I + M^{-1} A) q - L^{-1} M^{-1} b``."""
    q = as_vector(q, "q", H.n)
    return -np.linalg.solve(H.L, q + np.linalg.solve(H.M, S.A @ q + S.b))


def is_lagrangian(basis):
    """Defect of the column span of ``basis`` from being a Lagrangian subspace.

    Returns the largest pairwise symplectic product ``|v_i^T Omega v_j|`` plus
    the rank deficiency plus the mismatch between the number of columns and
    half the ambient dimension; zero means Lagrangian.
    """
    V = as_matrix(basis, "basis")
    if V.shape[0] % 2:
        raise ValueError("basis must live in an even-dimensional space")
    n = V.shape[0] // 2
    k = V.shape[1]
    omega = symplectic_form(n)
    iso = float(np.max(np.abs(V.T @ omega @ V))) if k else 0.0
    rank = np.linalg.matrix_rank(V) if k else 0
    return iso + float(min(k, n) - min(rank, n)) + float(abs(k - n))


@dataclass(frozen=True, eq=False)
class LagrangianAffineSpace:
    """The affine space ``base + span(basis)`` in ``Q + Q*``.

    ``basis`` is ``2n x n`` with isotropic columns of full rank.
    """

    base: np.ndarray
    basis: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        base = as_vector(self.base, "base")
        if base.size % 2:
            raise ValueError("base point must have even length")
        n = base.size // 2
        V = as_matrix(self.basis, "basis", (2 * n, n))
        if np.linalg.matrix_rank(V) < n:
            raise DegeneracyError("basis does not have full rank")
        omega = symplectic_form(n)
        # isotropy measured on an orthonormal basis of the span
        Qb = np.linalg.qr(V)[0]
        iso = float(np.max(np.abs(Qb.T @ omega @ Qb)))
        if iso > self.tol:
            raise ValueError(f"basis span is not isotropic (defect {iso:.3e})")
        object.__setattr__(self, "base", readonly(base))
        object.__setattr__(self, "basis", readonly(V))

    @property
    def n(self):
        return self.base.size // 2

    @classmethod
    def graph(cls, S: QuadraticGeneratingFunction):
        """Graph of ``dS``: points ``(q, A q + b)``."""
        n = S.n
        base = np.concatenate([np.zeros(n), S.b])
        basis = np.linalg.qr(np.vstack([np.eye(n), S.A]))[0]
        return cls(base, basis)


def propagate_affine(space: LagrangianAffineSpace, phi: LinearHamiltonianMap):
    """Image of a Lagrangian affine space under a linear symplectic map.

    The image basis is re-orthonormalized.

    Raises
    ------
    DegeneracyError
        If the mapped basis loses rank.
    """
    mat = phi.matrix
    V = mat @ space.basis
    sv = np.linalg.svd(V, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise DegeneracyError("mapped basis lost rank")
    return LagrangianAffineSpace(mat @ space.base, np.linalg.qr(V)[0])


def extract_generating(space: LagrangianAffineSpace):
    """Quadratic generating function whose differential has ``space`` as its graph.

    ``A = Y X^{-1}`` for the basis blocks ``[X; Y]``, ``b = p0 - A q0`` for the
    base point ``(q0, p0)``, and the free additive constant is set to 0.

    Raises
    ------
    TransversalityError
        If the space is not transversal to the momentum fibre.
    """
    n = space.n
    X = space.basis[:n]
    Y = space.basis[n:]
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise TransversalityError(
            f"space is not a graph over configurations (condition {cond:.3e})")
    A = symmetrize(np.linalg.solve(X.T, Y.T).T)
    q0, p0 = space.base[:n], space.base[n:]
    return QuadraticGeneratingFunction(A, p0 - A @ q0, 0.0)
