"""Model zoo: quadrotor motion planning, LQ test chains, and steady-state
tooling for the time-invariant setting.

Every preset is addressable by name through `build_model`; builders return a
ModelBundle carrying the problem, its base data, and a warm start inside the
convergence basin.  Constructors are pure and the generated problems
immutable, so bundles are safe to share.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import diff
from .errors import ConfigurationError, EvaluationError, NonconvergenceError, RangeConditionError
from .problem import (
    Array,
    DataTrajectory,
    Dimensions,
    DOProblem,
    PrimalDualTrajectory,
    StageOracles,
)


@dataclass(frozen=True)
class ModelBundle:
    name: str
    problem: DOProblem
    base_data: DataTrajectory
    warm_start: PrimalDualTrajectory
    description: str = ""


# ---------------------------------------------------------------------------
# generic RK4 helpers


def rk4_step(rhs: Callable, x: Array, u: Array, dt: float) -> Array:
    k1 = rhs(x, u)
    k2 = rhs(x + 0.5 * dt * k1, u)
    k3 = rhs(x + 0.5 * dt * k2, u)
    k4 = rhs(x + dt * k3, u)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_jacobians(rhs: Callable, rhs_jac: Callable, x: Array, u: Array, dt: float):
    """Exact Jacobians of one RK4 step by the chain rule; `rhs_jac` returns
    (d rhs / dx, d rhs / du) at a point."""
    n = x.size
    k1 = rhs(x, u)
    x2 = x + 0.5 * dt * k1
    k2 = rhs(x2, u)
    x3 = x + 0.5 * dt * k2
    k3 = rhs(x3, u)
    x4 = x + dt * k3
    A1, B1 = rhs_jac(x, u)
    A2, B2 = rhs_jac(x2, u)
    A3, B3 = rhs_jac(x3, u)
    A4, B4 = rhs_jac(x4, u)
    K1x, K1u = A1, B1
    K2x = A2 @ (np.eye(n) + 0.5 * dt * K1x)
    K2u = A2 @ (0.5 * dt * K1u) + B2
    K3x = A3 @ (np.eye(n) + 0.5 * dt * K2x)
    K3u = A3 @ (0.5 * dt * K2u) + B3
    K4x = A4 @ (np.eye(n) + dt * K3x)
    K4u = A4 @ (dt * K3u) + B4
    Ad = np.eye(n) + (dt / 6.0) * (K1x + 2.0 * K2x + 2.0 * K3x + K4x)
    Bd = (dt / 6.0) * (K1u + 2.0 * K2u + 2.0 * K3u + K4u)
    return Ad, Bd


# ---------------------------------------------------------------------------
# quadrotor


@dataclass(frozen=True)
class QuadrotorParams:
    """Knobs of the quadrotor preset.

    `q` weights the (Ydot, Z, Zdot) entries of the state cost and controls
    how much of the state the cost can see; `b` scales every roll-rate term
    in the attitude kinematics and controls how strongly that channel
    actuates the vehicle.  Thrust in the optimization problem is
    parameterized as an offset from the gravity-compensating trim, so
    hovering at the reference costs nothing and is a stationary point.
    """

    q: float = 1.0
    b: float = 1.0
    g: float = 9.81
    dt: float = 0.1
    N: int = 60
    altitude: float = 0.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")
        if self.N < 2:
            raise ConfigurationError("quadrotor horizon must be >= 2")
        if self.q < 0 or self.b < 0:
            raise ConfigurationError("q and b must be nonnegative")


N_X_QUAD = 9
N_U_QUAD = 4


def quadrotor_continuous_rhs(x: Array, u: Array, params: QuadrotorParams) -> Array:
    """Time derivative of (X, Xdot, Y, Ydot, Z, Zdot, gamma, beta, alpha)
    under raw controls (a, wX, wY, wZ): second-order translational dynamics
    driven by total thrust through the attitude angles, plus attitude
    kinematics with the roll-rate terms scaled by b."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    a, wx, wy, wz = u
    gam, bet, alp = x[6], x[7], x[8]
    cg, sg = math.cos(gam), math.sin(gam)
    cb, sb = math.cos(bet), math.sin(bet)
    ca, sa = math.cos(alp), math.sin(alp)
    if abs(cb) < 1e-9:
        raise EvaluationError("attitude singularity: cos(beta) vanished")
    return np.array(
        [
            x[1],
            a * (cg * sb * ca + sg * sa),
            x[3],
            a * (cg * sb * sa - sg * ca),
            x[5],
            a * cg * cb - params.g,
            (params.b * wx * cg + wy * sg) / cb,
            -params.b * wx * sg + wy * cg,
            params.b * wx * cg * (sb / cb) + wy * sg * (sb / cb) + wz,
        ]
    )


def quadrotor_rhs_jacobians(x: Array, u: Array, params: QuadrotorParams):
    """Analytic derivatives of the continuous dynamics in state and raw
    controls."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    a, wx, wy, _ = u
    gam, bet, alp = x[6], x[7], x[8]
    cg, sg = math.cos(gam), math.sin(gam)
    cb, sb = math.cos(bet), math.sin(bet)
    ca, sa = math.cos(alp), math.sin(alp)
    if abs(cb) < 1e-9:
        raise EvaluationError("attitude singularity: cos(beta) vanished")
    tb = sb / cb
    b = params.b
    A = np.zeros((N_X_QUAD, N_X_QUAD))
    B = np.zeros((N_X_QUAD, N_U_QUAD))
    A[0, 1] = 1.0
    A[2, 3] = 1.0
    A[4, 5] = 1.0
    # Xddot = a (cg sb ca + sg sa)
    A[1, 6] = a * (-sg * sb * ca + cg * sa)
    A[1, 7] = a * cg * cb * ca
    A[1, 8] = a * (-cg * sb * sa + sg * ca)
    B[1, 0] = cg * sb * ca + sg * sa
    # Yddot = a (cg sb sa - sg ca)
    A[3, 6] = a * (-sg * sb * sa - cg * ca)
    A[3, 7] = a * cg * cb * sa
    A[3, 8] = a * (cg * sb * ca + sg * sa)
    B[3, 0] = cg * sb * sa - sg * ca
    # Zddot = a cg cb - g
    A[5, 6] = -a * sg * cb
    A[5, 7] = -a * cg * sb
    B[5, 0] = cg * cb
    # gammadot = (b wx cg + wy sg) / cb
    A[6, 6] = (-b * wx * sg + wy * cg) / cb
    A[6, 7] = (b * wx * cg + wy * sg) * sb / cb**2
    B[6, 1] = b * cg / cb
    B[6, 2] = sg / cb
    # betadot = -b wx sg + wy cg
    A[7, 6] = -b * wx * cg - wy * sg
    B[7, 1] = -b * sg
    B[7, 2] = cg
    # alphadot = b wx cg tb + wy sg tb + wz
    A[8, 6] = -b * wx * sg * tb + wy * cg * tb
    A[8, 7] = (b * wx * cg + wy * sg) / cb**2
    B[8, 1] = b * cg * tb
    B[8, 2] = sg * tb
    B[8, 3] = 1.0
    return A, B


def quadrotor_hover_state(params: QuadrotorParams) -> Array:
    x = np.zeros(N_X_QUAD)
    x[4] = params.altitude
    return x


def quadrotor_trim(params: QuadrotorParams) -> Array:
    return np.array([params.g, 0.0, 0.0, 0.0])


def quadrotor_cost_weights(params: QuadrotorParams):
    q = params.q
    Q = np.diag([1.0, 1.0, 1.0, q, q, q, 1.0, 1.0, 1.0])
    R = np.eye(N_U_QUAD)
    Qf = np.eye(N_X_QUAD)
    return Q, R, Qf


def quadrotor_problem(params: QuadrotorParams):
    """The tracking problem built from the quadrotor: quadratic state
    deviation plus control effort per stage, quadratic terminal deviation,
    identity initial-state map, and one RK4 step of the continuous dynamics
    as the stage mapping.  Controls are trim offsets.

    Returns (problem, base data); the base data put the reference and the
    initial state at hover, so the hover trajectory with zero multipliers is
    the base solution.
    """
    Q, R, Qf = quadrotor_cost_weights(params)
    trim = quadrotor_trim(params)
    dt = params.dt

    def rhs(x, u_raw):
        return quadrotor_continuous_rhs(x, u_raw, params)

    def rhs_jac(x, u_raw):
        return quadrotor_rhs_jacobians(x, u_raw, params)

    def dynamics(i, x, u, d):
        return rk4_step(rhs, x, u + trim, dt)

    def dynamics_jac(i, x, u, d):
        A, B = rk4_step_jacobians(rhs, rhs_jac, x, u + trim, dt)
        return A, B, np.zeros((N_X_QUAD, d.size))

    def stage_cost(i, x, u, d):
        e = x - d
        return float(e @ Q @ e + u @ R @ u)

    def stage_cost_grad(i, x, u, d):
        return 2.0 * Q @ (x - d), 2.0 * R @ u

    def stage_cost_hess(i, x, u, d):
        return 2.0 * Q, np.zeros((N_X_QUAD, N_U_QUAD)), 2.0 * R, -2.0 * Q, np.zeros((N_U_QUAD, N_X_QUAD))

    def terminal_cost(x, d):
        e = x - d
        return float(e @ Qf @ e)

    def terminal_cost_grad(x, d):
        return 2.0 * Qf @ (x - d)

    def terminal_cost_hess(x, d):
        return 2.0 * Qf, -2.0 * Qf

    dims = Dimensions.uniform(params.N, N_X_QUAD, N_U_QUAD, N_X_QUAD, N_X_QUAD)
    oracles = StageOracles(
        stage_cost=stage_cost,
        dynamics=dynamics,
        terminal_cost=terminal_cost,
        stage_cost_grad=stage_cost_grad,
        stage_cost_hess=stage_cost_hess,
        terminal_cost_grad=terminal_cost_grad,
        terminal_cost_hess=terminal_cost_hess,
        dynamics_jac=dynamics_jac,
    )
    problem = DOProblem(dims=dims, oracles=oracles, T=np.eye(N_X_QUAD))
    hover = quadrotor_hover_state(params)
    data = DataTrajectory(dims, [hover.copy() for _ in range(params.N + 2)])
    return problem, data


# ---------------------------------------------------------------------------
# LQ problems


def make_lq_problem(
    A: Array,
    B: Array,
    Q: Array,
    R: Array,
    Qf: Array,
    T: Array | None,
    N: int,
    track_reference: bool = True,
) -> DOProblem:
    """Linear dynamics with quadratic costs.  With `track_reference` the
    stage and terminal costs penalize (x - d); otherwise the data enter only
    through the initial constraint and every stage has empty data."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n_x = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n_x, -1)
    n_u = B.shape[1]
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.asarray(R, dtype=float).reshape(n_u, n_u)
    Qf = np.atleast_2d(np.asarray(Qf, dtype=float))
    T = np.eye(n_x) if T is None else np.atleast_2d(np.asarray(T, dtype=float))
    n_0 = T.shape[0]
    n_d = n_x if track_reference else 0
    dims = Dimensions(N, n_x, n_u, (n_0,) + (n_d,) * (N + 1), n_0)

    def stage_cost(i, x, u, d):
        e = x - d if track_reference else x
        return float(e @ Q @ e + u @ R @ u)

    def stage_cost_grad(i, x, u, d):
        e = x - d if track_reference else x
        return 2.0 * Q @ e, 2.0 * R @ u

    def stage_cost_hess(i, x, u, d):
        E = -2.0 * Q if track_reference else np.zeros((n_x, 0))
        return 2.0 * Q, np.zeros((n_x, n_u)), 2.0 * R, E, np.zeros((n_u, n_d))

    def terminal_cost(x, d):
        e = x - d if track_reference else x
        return float(e @ Qf @ e)

    def terminal_cost_grad(x, d):
        e = x - d if track_reference else x
        return 2.0 * Qf @ e

    def terminal_cost_hess(x, d):
        E = -2.0 * Qf if track_reference else np.zeros((n_x, 0))
        return 2.0 * Qf, E

    def dynamics(i, x, u, d):
        return A @ x + B @ u

    def dynamics_jac(i, x, u, d):
        return A, B, np.zeros((n_x, d.size))

    def dynamics_hess_vec(i, x, u, d, lam):
        return (
            np.zeros((n_x, n_x)),
            np.zeros((n_x, n_u)),
            np.zeros((n_u, n_u)),
            np.zeros((n_x, d.size)),
            np.zeros((n_u, d.size)),
        )

    oracles = StageOracles(
        stage_cost=stage_cost,
        dynamics=dynamics,
        terminal_cost=terminal_cost,
        stage_cost_grad=stage_cost_grad,
        stage_cost_hess=stage_cost_hess,
        terminal_cost_grad=terminal_cost_grad,
        terminal_cost_hess=terminal_cost_hess,
        dynamics_jac=dynamics_jac,
        dynamics_hess_vec=dynamics_hess_vec,
    )
    return DOProblem(dims=dims, oracles=oracles, T=T)


def lq_chain(
    n_x: int,
    n_u: int,
    N: int,
    stability: float = 0.9,
    seed: int = 0,
    Q: Array | None = None,
    R: Array | None = None,
) -> DOProblem:
    """Seeded random time-invariant LQ problem; A is rescaled to the
    requested spectral radius, Q and R default to identity.  Deterministic
    per seed."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_x, n_x))
    radius = float(np.max(np.abs(np.linalg.eigvals(A))))
    if radius > 0:
        A *= stability / radius
    B = rng.standard_normal((n_x, n_u)) if n_u > 0 else np.zeros((n_x, 0))
    Q = np.eye(n_x) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.eye(n_u) if R is None else np.asarray(R, dtype=float).reshape(n_u, n_u)
    return make_lq_problem(A, B, Q, R, Q.copy(), np.eye(n_x), N, track_reference=True)


DOUBLE_INTEGRATOR_A = np.array([[1.0, 1.0], [0.0, 1.0]])
DOUBLE_INTEGRATOR_B = np.array([[0.0], [1.0]])


def double_integrator(N: int = 20) -> DOProblem:
    return make_lq_problem(
        DOUBLE_INTEGRATOR_A,
        DOUBLE_INTEGRATOR_B,
        np.eye(2),
        np.eye(1),
        np.eye(2),
        np.eye(2),
        N,
        track_reference=True,
    )


def scalar_oracle() -> DOProblem:
    """Hand-solvable single-stage problem: minimize x_0^2 + u_0^2 + x_1^2
    subject to x_0 = d_{-1} and x_1 = x_0 + u_0.  At d_{-1} = 1 the solution
    is (x_0, u_0, x_1) = (1, -0.5, 0.5) with multipliers (3, 1) under this
    package's sign convention."""
    return make_lq_problem(
        np.array([[1.0]]),
        np.array([[1.0]]),
        np.eye(1),
        np.eye(1),
        np.eye(1),
        np.array([[1.0]]),
        1,
        track_reference=False,
    )


# ---------------------------------------------------------------------------
# steady state and time-invariant cost construction


@dataclass
class SteadyState:
    """Primal-dual solution of `min cost(x, u; d) s.t. x = f(x, u; d)`.
    `lam_init` is filled by `build_ti_costs` once an initial-state map is
    chosen."""

    x: Array
    u: Array
    lam: Array
    residual: float
    lam_init: Array | None = None


def solve_steady_state(
    stage_cost: Callable,
    dynamics: Callable,
    d_s: Array,
    x0: Array,
    u0: Array,
    lam0: Array | None = None,
    *,
    cost_grad: Callable | None = None,
    dyn_jac: Callable | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> SteadyState:
    """Newton on the steady-state first-order conditions.  `stage_cost` and
    `dynamics` take (x, u, d); optional analytic derivatives follow the
    conventions of StageOracles without the stage index.  The result is
    horizon independent by construction."""
    d_s = np.atleast_1d(np.asarray(d_s, dtype=float))
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    u = np.atleast_1d(np.asarray(u0, dtype=float)).copy()
    n_x, n_u = x.size, u.size
    lam = np.zeros(n_x) if lam0 is None else np.atleast_1d(np.asarray(lam0, dtype=float)).copy()

    def split(t):
        return t[:n_x], t[n_x : n_x + n_u]

    def grads(xx, uu):
        if cost_grad is not None:
            gx, gu = cost_grad(xx, uu, d_s)
            return np.asarray(gx, dtype=float), np.asarray(gu, dtype=float)
        g = diff.gradient(lambda t: stage_cost(*split(t), d_s), np.concatenate([xx, uu]))
        return g[:n_x], g[n_x:]

    def jacs(xx, uu):
        if dyn_jac is not None:
            A, B = dyn_jac(xx, uu, d_s)[:2]
            return np.asarray(A, dtype=float), np.asarray(B, dtype=float)
        J = diff.jacobian(lambda t: dynamics(*split(t), d_s), np.concatenate([xx, uu]))
        return J[:, :n_x], J[:, n_x:]

    def residual(xx, uu, ll):
        gx, gu = grads(xx, uu)
        A, B = jacs(xx, uu)
        f = np.asarray(dynamics(xx, uu, d_s), dtype=float)
        # Lagrangian cost - lam @ (x - f): stationarity and feasibility
        return np.concatenate([gx - ll + A.T @ ll, gu + B.T @ ll, -(xx - f)])

    def grad_z(t):
        xx, uu = split(t)
        gx, gu = grads(xx, uu)
        A, B = jacs(xx, uu)
        return np.concatenate([gx - lam + A.T @ lam, gu + B.T @ lam])

    for _ in range(max_iter):
        r = residual(x, u, lam)
        rnorm = float(np.abs(r).max())
        if rnorm <= tol:
            return SteadyState(x=x, u=u, lam=lam, residual=rnorm)
        W = diff.hessian_via_gradient(grad_z, np.arange(n_x + n_u), np.concatenate([x, u]))
        W = 0.5 * (W + W.T)
        A, B = jacs(x, u)
        Jss = np.hstack([np.eye(n_x) - A, -B])
        n = n_x + n_u + n_x
        K = np.zeros((n, n))
        K[: n_x + n_u, : n_x + n_u] = W
        K[: n_x + n_u, n_x + n_u :] = -Jss.T
        K[n_x + n_u :, : n_x + n_u] = -Jss
        try:
            step = np.linalg.solve(K, -r)
        except np.linalg.LinAlgError as exc:
            raise NonconvergenceError(f"singular steady-state KKT system: {exc}") from exc
        x = x + step[:n_x]
        u = u + step[n_x : n_x + n_u]
        lam = lam + step[n_x + n_u :]
    r = residual(x, u, lam)
    raise NonconvergenceError(
        f"steady-state Newton did not reach tol {tol:g} (residual {float(np.abs(r).max()):.3e})"
    )


@dataclass(frozen=True)
class TICosts:
    """Initial and terminal cost oracles built around a steady state, plus
    the initial-constraint multiplier that makes the constant steady-state
    trajectory stationary for every horizon length."""

    ell_b: Callable  # (x, d) -> float
    ell_f: Callable  # (x, d) -> float
    lam_b: Array  # gradient of ell_b
    Q_f: Array  # Hessian of ell_f (2 Q)
    lam_init: Array


def build_ti_costs(ss: SteadyState, Q: Array, T: Array) -> TICosts:
    """Construct the initial regularization `-((I - T^+ T) lam) @ x` and the
    terminal cost `(x - x_s) @ Q @ (x - x_s) + lam @ x`, then solve
    T^T lam_init = lam_b + lam (via the pseudoinverse, with a consistency
    check).  With T = I the initial term vanishes identically."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n_x = ss.x.size
    T = np.asarray(T, dtype=float).reshape(-1, n_x)
    if T.shape[0] > 0:
        proj = np.linalg.pinv(T) @ T
    else:
        proj = np.zeros((n_x, n_x))
    lam_b = -(np.eye(n_x) - proj) @ ss.lam
    rhs = lam_b + ss.lam
    lam_init = np.linalg.pinv(T.T) @ rhs if T.shape[0] > 0 else np.zeros(0)
    gap = float(np.abs(T.T @ lam_init - rhs).max()) if n_x else 0.0
    if gap > 1e-8 * max(1.0, float(np.abs(rhs).max())):
        raise RangeConditionError(
            f"lam_b + lam is not in the range of T^T (residual {gap:.3e})"
        )
    x_s = ss.x.copy()
    lam_s = ss.lam.copy()
    lam_b_c = lam_b.copy()

    def ell_b(x, d):
        return float(lam_b_c @ x)

    def ell_f(x, d):
        e = x - x_s
        return float(e @ Q @ e + lam_s @ x)

    return TICosts(ell_b=ell_b, ell_f=ell_f, lam_b=lam_b, Q_f=2.0 * Q, lam_init=lam_init)


def time_invariant_problem(
    stage_cost: Callable,
    dynamics: Callable,
    ti: TICosts,
    T: Array,
    N: int,
    n_u: int,
    n_d: int,
) -> DOProblem:
    """Assemble the horizon problem for a time-invariant system: the stage
    cost picks up `ell_b` at stage 0 and the terminal cost is `ell_f`."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    n_x = T.shape[1]

    def cost(i, x, u, d):
        value = float(stage_cost(x, u, d))
        if i == 0:
            value += ti.ell_b(x, d)
        return value

    def dyn(i, x, u, d):
        return dynamics(x, u, d)

    def terminal(x, d):
        return ti.ell_f(x, d)

    dims = Dimensions(N, n_x, n_u, (T.shape[0],) + (n_d,) * (N + 1), T.shape[0])
    oracles = StageOracles(stage_cost=cost, dynamics=dyn, terminal_cost=terminal)
    return DOProblem(dims=dims, oracles=oracles, T=T)


def constant_trajectory(dims: Dimensions, ss: SteadyState) -> PrimalDualTrajectory:
    """Replicate the steady state along the horizon: states and multipliers
    constant, `lam_init` on the initial constraint."""
    if ss.lam_init is None and dims.n_0 > 0:
        raise ConfigurationError("steady state has no initial-constraint multiplier")
    lam_init = np.zeros(dims.n_0) if dims.n_0 == 0 else np.asarray(ss.lam_init, dtype=float)
    return PrimalDualTrajectory(
        dims,
        [ss.x.copy() for _ in range(dims.N + 1)],
        [ss.u.copy() for _ in range(dims.N)],
        [lam_init] + [ss.lam.copy() for _ in range(dims.N)],
    )


# ---------------------------------------------------------------------------
# registry


def _bundle_quadrotor(params: dict) -> ModelBundle:
    qp = QuadrotorParams(**params)
    problem, data = quadrotor_problem(qp)
    warm = PrimalDualTrajectory(
        problem.dims,
        [quadrotor_hover_state(qp) for _ in range(qp.N + 1)],
        [np.zeros(N_U_QUAD) for _ in range(qp.N)],
        [np.zeros(N_X_QUAD)] + [np.zeros(N_X_QUAD) for _ in range(qp.N)],
    )
    return ModelBundle(
        name="quadrotor",
        problem=problem,
        base_data=data,
        warm_start=warm,
        description="9-state quadrotor tracking with observability knob q and controllability knob b",
    )


def _bundle_lq_chain(params: dict) -> ModelBundle:
    defaults = {"n_x": 3, "n_u": 2, "N": 40, "stability": 0.9, "seed": 0}
    defaults.update(params)
    x0_scale = float(defaults.pop("x0_scale", 1.0))
    problem = lq_chain(**defaults)
    dims = problem.dims
    x0 = np.zeros(dims.n_x)
    x0[0] = x0_scale
    data = DataTrajectory(dims, [x0] + [np.zeros(dims.n_x) for _ in range(dims.N + 1)])
    return ModelBundle(
        name="lq_chain",
        problem=problem,
        base_data=data,
        warm_start=PrimalDualTrajectory.zeros(dims),
        description="seeded random time-invariant LQ tracking chain",
    )


def _bundle_double_integrator(params: dict) -> ModelBundle:
    N = int(params.get("N", 20))
    problem = double_integrator(N)
    dims = problem.dims
    x0 = np.asarray(params.get("x0", [1.0, 0.0]), dtype=float)
    data = DataTrajectory(dims, [x0] + [np.zeros(2) for _ in range(N + 1)])
    return ModelBundle(
        name="double_integrator",
        problem=problem,
        base_data=data,
        warm_start=PrimalDualTrajectory.zeros(dims),
        description="position/velocity chain with single force input",
    )


def _bundle_scalar_oracle(params: dict) -> ModelBundle:
    problem = scalar_oracle()
    dims = problem.dims
    data = DataTrajectory(dims, [np.array([1.0]), np.zeros(0), np.zeros(0)])
    return ModelBundle(
        name="scalar_oracle",
        problem=problem,
        base_data=data,
        warm_start=PrimalDualTrajectory.zeros(dims),
        description="hand-solvable single-stage problem used as a golden oracle",
    )


MODEL_BUILDERS = {
    "quadrotor": _bundle_quadrotor,
    "lq_chain": _bundle_lq_chain,
    "double_integrator": _bundle_double_integrator,
    "scalar_oracle": _bundle_scalar_oracle,
}


def list_models():
    out = []
    for name in sorted(MODEL_BUILDERS):
        bundle_doc = {
            "quadrotor": "9-state quadrotor tracking; knobs q (cost visibility) and b (roll authority)",
            "lq_chain": "seeded random time-invariant LQ tracking chain",
            "double_integrator": "position/velocity chain with single force input",
            "scalar_oracle": "hand-solvable single-stage golden problem",
        }[name]
        out.append((name, bundle_doc))
    return out


def build_model(name: str, params: dict | None = None) -> ModelBundle:
    if name not in MODEL_BUILDERS:
        known = ", ".join(sorted(MODEL_BUILDERS))
        raise ConfigurationError(f"unknown model '{name}' (known: {known})")
    try:
        return MODEL_BUILDERS[name](dict(params or {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for model '{name}': {exc}") from exc
