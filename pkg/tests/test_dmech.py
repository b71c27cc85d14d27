import numpy as np
import pytest

from discretehj.core import (
    DiscreteHamiltonianLeft,
    DiscreteHamiltonianRight,
    DiscreteLagrangian,
    NewtonConfig,
    PhasePoint,
)
from discretehj.dmech import (
    Trajectory,
    action_sum_left,
    action_sum_right,
    del_residual,
    discrete_hamiltonian_map,
    integrate,
    left_equations_residual,
    legendre_left,
    legendre_right,
    right_equations_residual,
    right_hamiltonian_from_lagrangian,
    step_left,
    step_right,
    symplecticity_defect,
)
from discretehj.exceptions import ConvergenceError
from discretehj.linhj import QuadraticLeftHamiltonian
from discretehj.systems import BUILTIN_HAMILTONIANS, builtin_hamiltonian, free_particle

from conftest import random_quadratic_system

IDENTITY_RIGHT = DiscreteHamiltonianRight(lambda q, p: float(q @ p))
IDENTITY_LEFT = DiscreteHamiltonianLeft(lambda p, q1: -float(p @ q1))
SHEAR_RIGHT = DiscreteHamiltonianRight(lambda q, p: float(q @ p + 0.5 * p @ p))
FREE_L = DiscreteLagrangian(lambda q, q1: 0.5 * float((q1 - q) @ (q1 - q)))
ZERO_L = DiscreteLagrangian(lambda q, q1: 0.0)
BILINEAR_L = DiscreteLagrangian(lambda q, q1: float(q @ q1))


def _pp(q, p):
    return PhasePoint(np.atleast_1d(float(q)), np.atleast_1d(float(p)))


def _close(z, q, p, tol=1e-10):
    return np.allclose(z.q, q, atol=tol) and np.allclose(z.p, p, atol=tol)


def test_step_right_identity():
    assert _close(step_right(IDENTITY_RIGHT, _pp(1, 2)), 1, 2)


def test_step_right_shear():
    assert _close(step_right(SHEAR_RIGHT, _pp(1, 2)), 3, 2)


def test_step_left_shear_from_quadratic():
    H = QuadraticLeftHamiltonian([[1.0]], [[0.0]], [[-1.0]]).left_hamiltonian()
    assert _close(step_left(H, _pp(1, 2)), 3, 2)


def test_step_left_identity():
    # value-only Hamiltonians sit on a finite-difference noise floor near 1e-11
    cfg = NewtonConfig(abs_tol=1e-10)
    assert _close(step_left(IDENTITY_LEFT, _pp(0.7, -1.3), cfg=cfg), 0.7, -1.3)


def test_step_left_rotation_example():
    H = QuadraticLeftHamiltonian([[1.0]], [[1.0]], [[1.0]]).left_hamiltonian()
    assert _close(step_left(H, _pp(1, 0)), -1, 1)


def test_converted_quadratic_system_matches_matrix(rng):
    qdh = random_quadratic_system(rng, 2)
    Hr = qdh.right_hamiltonian()
    A = qdh.step_matrix().matrix
    z = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
    assert np.max(np.abs(step_right(Hr, z).z - A @ z.z)) <= 1e-10


def test_step_error_carries_context():
    H = DiscreteHamiltonianRight(lambda q, p: float(q @ np.exp(p)))
    with pytest.raises(ConvergenceError) as info:
        integrate(H, _pp(0.0, -1.0), 3)
    assert info.value.index == 0
    assert "right step" in str(info.value)


@pytest.mark.parametrize("L, q, q1, expected", [
    (FREE_L, 0.0, 1.0, (1.0, 1.0)),
    (ZERO_L, 0.4, -2.0, (-2.0, 0.0)),
    (BILINEAR_L, 2.0, 3.0, (3.0, 2.0)),
])
def test_legendre_right(L, q, q1, expected):
    assert _close(legendre_right(L, [q], [q1]), *expected, tol=1e-9)


@pytest.mark.parametrize("L, q, q1, expected", [
    (FREE_L, 0.0, 1.0, (0.0, 1.0)),
    (ZERO_L, 0.4, -2.0, (0.4, 0.0)),
    (BILINEAR_L, 2.0, 3.0, (2.0, -3.0)),
])
def test_legendre_left(L, q, q1, expected):
    assert _close(legendre_left(L, [q], [q1]), *expected, tol=1e-9)


def test_del_uniform_motion():
    assert abs(del_residual(FREE_L, [0.0], [1.0], [2.0])[0]) <= 1e-10


def test_del_sign_by_brute_force_variation():
    r = del_residual(FREE_L, [0.0], [1.0], [3.0])[0]
    assert r == pytest.approx(-1.0, abs=1e-9)

    # derivative of the two-term action in the middle point
    def action(x):
        return FREE_L([0.0], [x]) + FREE_L([x], [3.0])
    eps = 1e-5
    assert r == pytest.approx((action(1 + eps) - action(1 - eps)) / (2 * eps), abs=1e-8)


def _pendulum_lagrangian(h=0.1):
    return DiscreteLagrangian(
        lambda q, q1: float(0.5 * (q1 - q) @ (q1 - q) / h + h * np.sum(np.cos(q))))


def test_momentum_matching_along_lagrangian_trajectory(rng):
    L = _pendulum_lagrangian()
    H = right_hamiltonian_from_lagrangian(L)
    traj = integrate(H, PhasePoint(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)), 6)
    q = traj.q
    worst = max(np.max(np.abs(del_residual(L, q[k - 1], q[k], q[k + 1])))
                for k in range(1, 6))
    assert worst <= 1e-10


def test_generating_function_consistency(rng):
    L = _pendulum_lagrangian()
    H = right_hamiltonian_from_lagrangian(L)
    for _ in range(5):
        q, q1 = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        stepped = step_right(H, legendre_left(L, q, q1))
        target = legendre_right(L, q, q1)
        assert np.max(np.abs(stepped.z - target.z)) <= 1e-9
        assert np.max(np.abs(discrete_hamiltonian_map(L, legendre_left(L, q, q1)).z
                             - target.z)) <= 1e-9


def test_action_sum_examples():
    const = Trajectory((_pp(1, 2),))
    assert action_sum_right(SHEAR_RIGHT, const) == [0.0]
    assert action_sum_left(IDENTITY_LEFT, const) == [0.0]
    ident = Trajectory((_pp(1, 2), _pp(1, 2)))
    assert action_sum_right(IDENTITY_RIGHT, ident)[1] == pytest.approx(0.0)
    assert action_sum_left(IDENTITY_LEFT, ident)[1] == pytest.approx(0.0)
    shear = integrate(SHEAR_RIGHT, _pp(1, 2), 1)
    assert action_sum_right(SHEAR_RIGHT, shear)[1] == pytest.approx(2.0, abs=1e-10)


def test_action_sums_left_and_right_agree(rng):
    qdh = random_quadratic_system(rng, 3)
    traj = integrate(qdh.left_hamiltonian(), PhasePoint(rng.standard_normal(3),
                                                        rng.standard_normal(3)), 8)
    left = action_sum_left(qdh.left_hamiltonian(), traj)
    right = action_sum_right(qdh.right_hamiltonian(), traj)
    assert np.max(np.abs(np.subtract(left, right))) <= 1e-10
    L = qdh.lagrangian()
    q = traj.q
    direct = np.cumsum([0.0] + [L(q[k], q[k + 1]) for k in range(8)])
    assert np.max(np.abs(direct - left)) <= 1e-10


def test_integrate_examples():
    H = QuadraticLeftHamiltonian([[1.0]], [[0.0]], [[-1.0]]).left_hamiltonian()
    assert len(integrate(H, _pp(1, 2), 0)) == 1
    traj = integrate(H, _pp(1, 2), 3)
    assert np.allclose(traj.q[:, 0], [1, 3, 5, 7], atol=1e-12)
    assert np.allclose(traj.p[:, 0], 2, atol=1e-12)
    assert left_equations_residual(H, traj) <= 1e-10


def test_integrate_matches_matrix_power(rng):
    qdh = random_quadratic_system(rng, 2)
    A = qdh.step_matrix().matrix
    z0 = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
    traj = integrate(qdh.left_hamiltonian(), z0, 10)
    for k, z in enumerate(traj):
        assert np.max(np.abs(z.z - np.linalg.matrix_power(A, k) @ z0.z)) <= 1e-9


def test_symplecticity_defect_examples():
    z = _pp(0.3, -0.2)
    assert symplecticity_defect(lambda w: w, z) == 0.0
    S = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert symplecticity_defect(lambda w: PhasePoint.from_z(S @ w.z), z) == 0.0
    squash = np.array([[2.0, 0.0], [0.0, 2.0]])
    assert symplecticity_defect(lambda w: PhasePoint.from_z(squash @ w.z), z) > 1.0


@pytest.mark.parametrize("name", sorted(BUILTIN_HAMILTONIANS))
def test_builtin_steps_are_symplectic(name, rng):
    H, n = builtin_hamiltonian(name, 0.1)
    worst = 0.0
    for _ in range(20):
        z = PhasePoint(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n))
        worst = max(worst, symplecticity_defect(lambda w: step_right(H, w), z))
    assert worst <= 1e-6


def test_right_equations_residual_free_particle():
    H = free_particle(0.5)
    traj = integrate(H, PhasePoint([0.0, 1.0], [1.0, -1.0]), 4)
    assert right_equations_residual(H, traj) <= 1e-12
    assert np.allclose(traj.q[-1], [2.0, -1.0])


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(())
    with pytest.raises(ValueError):
        Trajectory((_pp(1, 2), PhasePoint([1.0, 2.0], [0.0, 0.0])))
    with pytest.raises(ValueError):
        integrate(SHEAR_RIGHT, _pp(1, 2), -1)
