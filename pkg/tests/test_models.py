import numpy as np
import pytest
import scipy.linalg

from edslab import (
    DataTrajectory,
    EvaluationError,
    build_model,
    build_report,
    kkt_residual,
    solve_equality_nlp,
)
from edslab.certify import scan_uniform_controllability, smallest_eigenvalue
from edslab.kkt import linearize
from edslab.models import (
    DOUBLE_INTEGRATOR_A,
    DOUBLE_INTEGRATOR_B,
    QuadrotorParams,
    SteadyState,
    build_ti_costs,
    constant_trajectory,
    lq_chain,
    quadrotor_continuous_rhs,
    quadrotor_hover_state,
    quadrotor_rhs_jacobians,
    quadrotor_trim,
    rk4_step_jacobians,
    solve_steady_state,
    time_invariant_problem,
)


class TestQuadrotorRHS:
    def test_hover_equilibrium_exact(self):
        qp = QuadrotorParams()
        rhs = quadrotor_continuous_rhs(quadrotor_hover_state(qp), quadrotor_trim(qp), qp)
        assert np.abs(rhs).max() <= 1e-14

    def test_free_fall(self):
        qp = QuadrotorParams()
        rhs = quadrotor_continuous_rhs(np.zeros(9), np.zeros(4), qp)
        expected = np.zeros(9)
        expected[5] = -qp.g
        assert rhs == pytest.approx(expected)

    def test_roll_rate_decoupled_when_b_zero(self):
        qp = QuadrotorParams(b=0.0)
        base = quadrotor_continuous_rhs(np.zeros(9), quadrotor_trim(qp), qp)
        bumped = quadrotor_continuous_rhs(np.zeros(9), quadrotor_trim(qp) + np.array([0, 0.5, 0, 0]), qp)
        assert bumped == pytest.approx(base)

    def test_attitude_singularity_guarded(self):
        qp = QuadrotorParams()
        x = np.zeros(9)
        x[7] = np.pi / 2
        with pytest.raises(EvaluationError):
            quadrotor_continuous_rhs(x, quadrotor_trim(qp), qp)


class TestQuadrotorProblem:
    def test_cost_diagonal_exact(self):
        from edslab.models import quadrotor_cost_weights

        Q, R, Qf = quadrotor_cost_weights(QuadrotorParams(q=0.3))
        assert np.diag(Q) == pytest.approx([1, 1, 1, 0.3, 0.3, 0.3, 1, 1, 1])
        assert Q == pytest.approx(np.diag(np.diag(Q)))
        assert R == pytest.approx(np.eye(4))
        assert Qf == pytest.approx(np.eye(9))

    def test_q_zero_zeroes_rows_4_to_6(self):
        from edslab.models import quadrotor_cost_weights

        Q, _, _ = quadrotor_cost_weights(QuadrotorParams(q=0.0))
        assert np.all(Q[3:6, :] == 0.0)
        assert np.all(Q[:, 3:6] == 0.0)

    def test_hover_start_yields_hover_solution(self):
        b = build_model("quadrotor", {"N": 6})
        res = solve_equality_nlp(b.problem, b.base_data, w0=b.warm_start)
        hover = quadrotor_hover_state(QuadrotorParams(N=6))
        for i in range(7):
            assert res.trajectory.x(i) == pytest.approx(hover, abs=1e-9)
        for i in range(6):
            assert np.abs(res.trajectory.u(i)).max() <= 1e-9
            assert np.abs(res.trajectory.lam(i)).max() <= 1e-9

    def test_rk4_matches_exponential_at_hover(self):
        # the hover linearization is nilpotent (pure integrator chains), so
        # one RK4 step reproduces the exponential exactly, well inside the
        # O(dt^5) budget
        qp = QuadrotorParams()
        hover, trim = quadrotor_hover_state(qp), quadrotor_trim(qp)
        Ac, _ = quadrotor_rhs_jacobians(hover, trim, qp)
        assert np.linalg.norm(np.linalg.matrix_power(Ac, 3)) == 0.0
        rhs = lambda x, u: quadrotor_continuous_rhs(x, u, qp)
        jac = lambda x, u: quadrotor_rhs_jacobians(x, u, qp)
        for dt in (0.1, 0.05):
            Ad, _ = rk4_step_jacobians(rhs, jac, hover, trim, dt)
            assert np.linalg.norm(Ad - scipy.linalg.expm(dt * Ac)) <= 1e-12

    def test_rk4_step_error_ratio_on_generic_system(self):
        # fourth-order one-step error: halving dt divides the defect by ~2^5
        rng = np.random.default_rng(3)
        M = rng.standard_normal((4, 4))
        rhs = lambda x, u: M @ x
        jac = lambda x, u: (M, np.zeros((4, 1)))
        errs = {}
        for dt in (0.1, 0.05):
            Ad, _ = rk4_step_jacobians(rhs, jac, np.zeros(4), np.zeros(1), dt)
            errs[dt] = np.linalg.norm(Ad - scipy.linalg.expm(dt * M))
        ratio = errs[0.1] / errs[0.05]
        assert 20.0 <= ratio <= 45.0

    def test_knob_monotonicity(self):
        gammas, betas = [], []
        for knob in (0.0, 0.5, 1.0):
            bq = build_model("quadrotor", {"q": knob, "b": 1.0, "N": 8, "dt": 0.2})
            res = solve_equality_nlp(bq.problem, bq.base_data, w0=bq.warm_start)
            rep = build_report(bq.problem, res.trajectory, bq.base_data, 3, 3)
            gammas.append(rep.obs.minimum)
            bb = build_model("quadrotor", {"q": 1.0, "b": knob, "N": 8, "dt": 0.2})
            res = solve_equality_nlp(bb.problem, bb.base_data, w0=bb.warm_start)
            blocks = linearize(bb.problem, res.trajectory, bb.base_data)
            betas.append(scan_uniform_controllability(blocks, 3).minimum)
        assert gammas[0] <= gammas[1] + 1e-12 <= gammas[2] + 2e-12
        assert betas[0] <= betas[1] + 1e-12 <= betas[2] + 2e-12


class TestLQFactories:
    def test_seed_determinism_byte_identical(self):
        a = lq_chain(3, 2, 5, seed=123)
        b = lq_chain(3, 2, 5, seed=123)
        Aa, Ba, _ = a.oracles.dynamics_jac(0, np.zeros(3), np.zeros(2), np.zeros(3))
        Ab, Bb, _ = b.oracles.dynamics_jac(0, np.zeros(3), np.zeros(2), np.zeros(3))
        assert Aa.tobytes() == Ab.tobytes()
        assert Ba.tobytes() == Bb.tobytes()

    def test_no_inputs_uncontrollable(self):
        p = lq_chain(2, 0, 5, seed=1)
        traj, data = __import__("conftest").random_point(p, seed=0)
        blocks = linearize(p, traj, data)
        assert scan_uniform_controllability(blocks, 2).minimum == pytest.approx(0.0)

    def test_double_integrator_gramian_hand_value(self):
        b = build_model("double_integrator", {"N": 6})
        res = solve_equality_nlp(b.problem, b.base_data, w0=b.warm_start)
        blocks = linearize(b.problem, res.trajectory, b.base_data)
        from edslab.certify import controllability_matrix

        C = controllability_matrix(blocks, 0, 1)
        assert C == pytest.approx(np.array([[1.0, 0.0], [1.0, 1.0]]))
        assert smallest_eigenvalue(C @ C.T) == pytest.approx((3 - np.sqrt(5)) / 2, rel=1e-12)


class TestSteadyState:
    def test_scalar_origin(self):
        ss = solve_steady_state(
            lambda x, u, d: float(x @ x + u @ u),
            lambda x, u, d: 0.5 * x + u,
            d_s=np.zeros(0),
            x0=np.array([0.3]),
            u0=np.array([-0.2]),
        )
        assert ss.x == pytest.approx([0.0], abs=1e-10)
        assert ss.u == pytest.approx([0.0], abs=1e-10)
        assert ss.lam == pytest.approx([0.0], abs=1e-10)

    def test_quadrotor_hover_steady_state(self):
        qp = QuadrotorParams(N=4)
        b = build_model("quadrotor", {"N": 4})
        p = b.problem
        hover = quadrotor_hover_state(qp)
        ss = solve_steady_state(
            lambda x, u, d: p.oracles.stage_cost(0, x, u, d),
            lambda x, u, d: p.oracles.dynamics(0, x, u, d),
            d_s=hover,
            x0=hover,
            u0=np.zeros(4),
            cost_grad=lambda x, u, d: p.oracles.stage_cost_grad(0, x, u, d),
            dyn_jac=lambda x, u, d: p.oracles.dynamics_jac(0, x, u, d),
        )
        # deviation controls: raw input is the gravity trim, multipliers vanish
        assert ss.x == pytest.approx(hover, abs=1e-9)
        assert ss.u + quadrotor_trim(qp) == pytest.approx([qp.g, 0, 0, 0], abs=1e-9)
        assert np.abs(ss.lam).max() <= 1e-9

    def test_linear_system_matches_dense_solve(self):
        A = np.array([[0.5, 0.1], [0.0, 0.8]])
        B = np.array([[0.0], [1.0]])
        d = np.array([1.0, 1.0])
        ss = solve_steady_state(
            lambda x, u, dd: float((x - dd) @ (x - dd) + u @ u),
            lambda x, u, dd: A @ x + B @ u,
            d_s=d,
            x0=np.zeros(2),
            u0=np.zeros(1),
        )
        # stationarity of [2(x-d) - lam + A^T lam; 2u + B^T lam; -(x - Ax - Bu)]
        n = 2 + 1 + 2
        K = np.zeros((n, n))
        K[:2, :2] = 2 * np.eye(2)
        K[2, 2] = 2.0
        K[:2, 3:] = (A - np.eye(2)).T
        K[2, 3:] = B.T
        K[3:, :2] = A - np.eye(2)
        K[3:, 2] = B[:, 0]
        rhs = np.concatenate([2 * d, [0.0], np.zeros(2)])
        sol = np.linalg.solve(K, rhs)
        assert np.concatenate([ss.x, ss.u, ss.lam]) == pytest.approx(sol, abs=1e-9)


class TestTICosts:
    def _double_integrator_ss(self, d=np.array([1.0, 0.5])):
        return solve_steady_state(
            lambda x, u, dd: float((x - dd) @ (x - dd) + u @ u),
            lambda x, u, dd: DOUBLE_INTEGRATOR_A @ x + DOUBLE_INTEGRATOR_B @ u,
            d_s=d,
            x0=np.zeros(2),
            u0=np.zeros(1),
        ), d

    def test_identity_T_kills_initial_term(self):
        ss, _ = self._double_integrator_ss()
        ti = build_ti_costs(ss, np.eye(2), np.eye(2))
        assert np.abs(ti.lam_b).max() == 0.0
        assert ti.lam_init == pytest.approx(ss.lam)

    def test_zero_multiplier_degenerate_case(self):
        ss = SteadyState(x=np.array([1.0, 0.0]), u=np.zeros(1), lam=np.zeros(2), residual=0.0)
        ti = build_ti_costs(ss, np.eye(2), np.eye(2))
        assert np.abs(ti.lam_b).max() == 0.0
        assert np.abs(ti.lam_init).max() == 0.0
        assert ti.ell_b(np.array([2.0, 3.0]), None) == 0.0
        assert ti.ell_f(ss.x, None) == pytest.approx(0.0)

    def test_coordinate_projector_hand_values(self):
        ss = SteadyState(x=np.zeros(2), u=np.zeros(1), lam=np.array([0.7, -1.2]), residual=0.0)
        ti = build_ti_costs(ss, np.eye(2), np.array([[1.0, 0.0]]))
        assert ti.lam_b == pytest.approx([0.0, 1.2])
        assert ti.lam_init == pytest.approx([0.7])

    def test_range_condition_holds_by_construction(self):
        # the initial-cost slope is built so lam_b + lam always lands in the
        # row space of T; the solve must report a tiny residual for random T
        rng = np.random.default_rng(17)
        for _ in range(10):
            n_x = int(rng.integers(2, 5))
            n_0 = int(rng.integers(0, n_x + 1))
            ss = SteadyState(
                x=rng.standard_normal(n_x),
                u=rng.standard_normal(1),
                lam=rng.standard_normal(n_x),
                residual=0.0,
            )
            T = rng.standard_normal((n_0, n_x))
            ti = build_ti_costs(ss, np.eye(n_x), T)
            gap = np.abs(T.T @ ti.lam_init - (ti.lam_b + ss.lam)).max() if n_0 else 0.0
            assert gap <= 1e-9

    def test_steady_trajectory_stationary_all_horizons(self):
        ss, d = self._double_integrator_ss()
        ti = build_ti_costs(ss, np.eye(2), np.eye(2))
        ss.lam_init = ti.lam_init
        for N in (5, 20, 60):
            prob = time_invariant_problem(
                lambda x, u, dd: float((x - dd) @ (x - dd) + u @ u),
                lambda x, u, dd: DOUBLE_INTEGRATOR_A @ x + DOUBLE_INTEGRATOR_B @ u,
                ti, np.eye(2), N, n_u=1, n_d=2,
            )
            traj = constant_trajectory(prob.dims, ss)
            data = DataTrajectory(prob.dims, [np.eye(2) @ ss.x] + [d] * (N + 1))
            assert np.abs(kkt_residual(prob, traj, data)).max() <= 1e-8

    def test_partial_T_trajectory_stationary(self):
        A = np.array([[0.5, 0.1], [0.0, 0.8]])
        B = np.array([[0.0], [1.0]])
        d = np.array([1.0, 1.0])
        ss = solve_steady_state(
            lambda x, u, dd: float((x - dd) @ (x - dd) + u @ u),
            lambda x, u, dd: A @ x + B @ u,
            d_s=d, x0=np.zeros(2), u0=np.zeros(1),
        )
        T = np.array([[1.0, 0.0]])
        ti = build_ti_costs(ss, np.eye(2), T)
        assert np.abs(ti.lam_b).max() > 0  # genuinely exercises the projector
        ss.lam_init = ti.lam_init
        for N in (5, 20):
            prob = time_invariant_problem(
                lambda x, u, dd: float((x - dd) @ (x - dd) + u @ u),
                lambda x, u, dd: A @ x + B @ u,
                ti, T, N, n_u=1, n_d=2,
            )
            traj = constant_trajectory(prob.dims, ss)
            data = DataTrajectory(prob.dims, [T @ ss.x] + [d] * (N + 1))
            assert np.abs(kkt_residual(prob, traj, data)).max() <= 1e-8
