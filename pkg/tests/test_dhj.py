import numpy as np
import pytest

from discretehj.core import (
    DiscreteHamiltonianLeft,
    DiscreteHamiltonianRight,
    DiscreteLagrangian,
    GeneratingFunction,
    GeneratingFunctionSequence,
    NewtonConfig,
    PhasePoint,
)
from discretehj.dhj import (
    HJSolutionTable,
    hj_generate_trajectory,
    jacobi_action,
    jacobi_action_gradient,
    jacobi_solution,
    lagrangian_dhj_residual,
    ldhj_residual,
    rdhj_residual,
    solve_f_lagrangian,
    solve_f_minus,
    solve_f_plus,
)
from discretehj.dmech import integrate, left_equations_residual, right_equations_residual
from discretehj.exceptions import SingularJacobianError, SingularMatrixError
from discretehj.linhj import (
    QuadraticGeneratingFunction,
    QuadraticLeftHamiltonian,
    f_minus_linear,
    riccati_sequence,
)
from discretehj.systems import builtin_hamiltonian, free_particle

from conftest import well_conditioned_instance

IDENTITY_RIGHT = DiscreteHamiltonianRight(lambda q, p: float(q @ p),
                                          d1=lambda q, p: p.copy(), d2=lambda q, p: q.copy())
IDENTITY_LEFT = DiscreteHamiltonianLeft(lambda p, q1: -float(p @ q1),
                                        d1=lambda p, q1: -q1, d2=lambda p, q1: -p)
FREE_L = DiscreteLagrangian(lambda q, q1: 0.5 * float((q1 - q) @ (q1 - q)),
                            d1=lambda q, q1: q - q1, d2=lambda q, q1: q1 - q)


def zero_sequence(n, N):
    return GeneratingFunctionSequence([QuadraticGeneratingFunction.zero(n)] * (N + 1))


def riccati_data(rng, n, N=10):
    H, seq = well_conditioned_instance(rng, n, steps=N)
    return H, seq, GeneratingFunctionSequence(seq)


def test_identity_residuals_vanish(rng):
    S = zero_sequence(2, 1)
    q = rng.standard_normal(2)
    assert rdhj_residual(S, IDENTITY_RIGHT, 0, q, q) == 0.0
    assert ldhj_residual(S, IDENTITY_LEFT, 0, q, q) == 0.0


def test_identity_implicit_maps(rng):
    S = GeneratingFunctionSequence([QuadraticGeneratingFunction(np.eye(2), [1.0, 0.0])] * 2)
    q = rng.standard_normal(2)
    assert np.allclose(solve_f_plus(S, IDENTITY_RIGHT, 0, q), q, atol=1e-12)
    assert np.allclose(solve_f_minus(S, IDENTITY_LEFT, 0, q), q, atol=1e-12)
    value_only = DiscreteHamiltonianLeft(lambda p, q1: -float(p @ q1))
    got = solve_f_minus(S, value_only, 0, q, cfg=NewtonConfig(abs_tol=1e-10))
    assert np.allclose(got, q, atol=1e-10)


def test_f_plus_degenerate_fixed_point():
    H = DiscreteHamiltonianRight(lambda q, p: float(q @ p + 0.5 * p @ p))
    S = GeneratingFunctionSequence([QuadraticGeneratingFunction.zero(1),
                                    QuadraticGeneratingFunction([[1.0]], [0.0])])
    with pytest.raises(SingularJacobianError):
        solve_f_plus(S, H, 0, [1.0])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_riccati_solutions_satisfy_both_equations(rng, n):
    H, seq, S = riccati_data(rng, n)
    Hl, Hr = H.left_hamiltonian(), H.right_hamiltonian()
    worst_l = worst_r = 0.0
    for k in range(10):
        for _ in range(5):
            q = rng.standard_normal(n)
            q1 = f_minus_linear(seq[k], H, q)
            worst_l = max(worst_l, abs(ldhj_residual(S, Hl, k, q, q1)))
            worst_r = max(worst_r, abs(rdhj_residual(S, Hr, k, q, q1)))
    assert worst_l <= 1e-9
    assert worst_r <= 1e-9


def test_scalar_rdhj_fifty_points(rng):
    H, seq, S = riccati_data(rng, 1, N=1)
    Hr = H.right_hamiltonian()
    qs = rng.uniform(-3, 3, 50)
    res = [rdhj_residual(S, Hr, 0, [q], f_minus_linear(seq[0], H, [q])) for q in qs]
    assert np.max(np.abs(res)) <= 1e-9


def test_implicit_maps_match_closed_form(rng):
    for n in (1, 2, 3):
        H, seq, S = riccati_data(rng, n, N=3)
        q = rng.standard_normal(n)
        closed = f_minus_linear(seq[1], H, q)
        assert np.max(np.abs(solve_f_minus(S, H.left_hamiltonian(), 1, q) - closed)) <= 1e-10
        assert np.max(np.abs(solve_f_plus(S, H.right_hamiltonian(), 1, q) - closed)) <= 1e-9


def test_f_minus_hand_assembled_linear_solve(rng):
    H = QuadraticLeftHamiltonian([[2.0, 0.3], [0.3, 1.0]], [[0.1, 0.0], [0.0, -0.2]],
                                 [[-1.0, 0.4], [0.1, -1.2]])
    A = np.array([[0.5, 0.1], [0.1, -0.3]])
    b = np.array([0.2, -0.7])
    S = GeneratingFunctionSequence([QuadraticGeneratingFunction(A, b)] * 2)
    q = rng.standard_normal(2)
    # q = -(M^{-1}(A q + b) + L q')
    oracle = np.linalg.solve(H.L, -q - np.linalg.solve(H.M, A @ q + b))
    assert np.max(np.abs(solve_f_minus(S, H.left_hamiltonian(), 0, q) - oracle)) <= 1e-10


def test_jacobi_solution_examples():
    H = free_particle(1.0)
    table = jacobi_solution(H, PhasePoint([1.0], [2.0]), 0)
    assert table.N == 0 and table.values[0] == 0.0
    table = jacobi_solution(H, PhasePoint([1.0], [2.0]), 3)
    assert np.array_equal(table.momenta, table.trajectory.p)
    # S^k = k p^2 / 2 for uniform motion with unit step
    assert np.allclose(table.values, [0.0, 2.0, 4.0, 6.0], atol=1e-12)


@pytest.mark.parametrize("name", ["harmonic_oscillator", "pendulum", "henon_heiles"])
def test_jacobi_property(rng, name):
    H, n = builtin_hamiltonian(name, 0.1)
    for _ in range(3):
        table = jacobi_solution(H, PhasePoint(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)), 20)
        S = table.as_sequence()
        q = table.trajectory.q
        res = [abs(rdhj_residual(S, H, k, q[k], q[k + 1])) for k in range(20)]
        assert max(res) <= 1e-9


def test_jacobi_table_matches_riccati(rng):
    H, _, _ = riccati_data(rng, 2, N=1)
    Hr = H.right_hamiltonian()
    q0, p0 = rng.standard_normal(2), rng.standard_normal(2)
    table = jacobi_solution(Hr, PhasePoint(q0, p0), 8)
    seq = riccati_sequence(QuadraticGeneratingFunction(np.zeros((2, 2)), p0, -p0 @ q0), H, 8)
    q = table.trajectory.q
    assert np.max(np.abs(table.values - [seq[k](q[k]) for k in range(9)])) <= 1e-8
    assert np.max(np.abs(table.momenta - [seq[k].gradient(q[k]) for k in range(9)])) <= 1e-8


def test_momentum_consistency_of_jacobi_action(rng):
    H, n = builtin_hamiltonian("pendulum", 0.1)
    z0 = PhasePoint(rng.uniform(-1, 1, n), rng.uniform(-1, 1, n))
    table = jacobi_solution(H, z0, 6)
    q = table.trajectory.q
    for k in (1, 3, 6):
        value, p0 = jacobi_action(H, z0.q, k, q[k], p_guess=z0.p)
        assert value == pytest.approx(table.values[k], abs=1e-10)
        assert np.allclose(p0, z0.p, atol=1e-10)
        grad = jacobi_action_gradient(H, z0.q, k, q[k], p_guess=z0.p)
        assert np.max(np.abs(grad - table.momenta[k])) <= 1e-8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hj_round_trip_left(rng, n):
    H, seq, S = riccati_data(rng, n)
    Hl = H.left_hamiltonian()
    c0 = rng.standard_normal(n)
    traj = hj_generate_trajectory(S, Hl, c0, 10)
    assert left_equations_residual(Hl, traj) <= 1e-9
    direct = integrate(Hl, PhasePoint(c0, seq[0].gradient(c0)), 10)
    assert np.max(np.abs(traj.q - direct.q)) <= 1e-9
    assert np.max(np.abs(traj.p - direct.p)) <= 1e-9


def test_hj_round_trip_right(rng):
    H, seq, S = riccati_data(rng, 2)
    Hr = H.right_hamiltonian()
    c0 = rng.standard_normal(2)
    traj = hj_generate_trajectory(S, Hr, c0, 10)
    assert right_equations_residual(Hr, traj) <= 1e-9


def test_hj_generate_zero_steps(rng):
    H, seq, S = riccati_data(rng, 2, N=1)
    c0 = rng.standard_normal(2)
    traj = hj_generate_trajectory(S, H.left_hamiltonian(), c0, 0)
    assert len(traj) == 1
    assert np.allclose(traj[0].p, seq[0].gradient(c0))


def test_hj_generate_detects_singular_f_minus():
    H = QuadraticLeftHamiltonian([[1.0]], [[0.0]], [[-1.0]])
    # A = -M collapses f- to a constant map
    S = GeneratingFunctionSequence([QuadraticGeneratingFunction([[-1.0]], [0.5]),
                                    QuadraticGeneratingFunction.zero(1)])
    with pytest.raises(SingularMatrixError):
        hj_generate_trajectory(S, H.left_hamiltonian(), [0.3], 1)


def test_lagrangian_side_quadratic(rng):
    H, seq, S = riccati_data(rng, 2, N=4)
    L = H.lagrangian()
    Hl = H.left_hamiltonian()
    for k in range(4):
        q = rng.standard_normal(2)
        assert abs(lagrangian_dhj_residual(L, S, k, q)) <= 1e-8
        assert np.max(np.abs(solve_f_lagrangian(L, S, k, q) - solve_f_minus(S, Hl, k, q))) <= 1e-9


def test_lagrangian_side_free_particle():
    H = free_particle(1.0)
    entries = [GeneratingFunction(lambda q, k=k: float(q @ q) / (2 * (k + 1)),
                                  gradient=lambda q, k=k: q / (k + 1)) for k in range(5)]
    S = GeneratingFunctionSequence(entries)
    for k in range(4):
        for x in (-1.3, 0.4, 2.0):
            # brute-force oracle: the action of the (k+1)-step path from the origin
            assert S.value(k, [x]) == pytest.approx(jacobi_action(H, [0.0], k + 1, [x])[0],
                                                    abs=1e-10)
            assert abs(lagrangian_dhj_residual(FREE_L, S, k, [x])) <= 1e-9


def test_table_validation():
    traj = integrate(free_particle(1.0), PhasePoint([0.0], [1.0]), 2)
    with pytest.raises(ValueError):
        HJSolutionTable(np.zeros(2), traj.p, traj)
    with pytest.raises(ValueError):
        HJSolutionTable(np.array([0.0, np.nan, 1.0]), traj.p, traj)
    seq = HJSolutionTable(np.zeros(3), traj.p, traj).as_sequence()
    assert seq.N == 2
    assert np.allclose(seq.gradient(1, [5.0]), traj.p[1])
