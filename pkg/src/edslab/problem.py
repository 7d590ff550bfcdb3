"""Horizon-N equality-constrained dynamic optimization problems.

A problem couples states x_i (i = 0..N) and controls u_i (i = 0..N-1)
through stage costs, a terminal cost, dynamics equality constraints
x_{i+1} = f_i(x_i, u_i; d_i), and an optional initial-state constraint
T x_0 = d_{-1}.  Every stage carries a data vector d_i; the stage -1 data
is the right-hand side of the initial constraint.  Receding-horizon control
problems use T = I, estimation-style problems drop the initial constraint
entirely (n_0 = 0, empty T).

Multiplier bookkeeping: lam(-1) multiplies the initial constraint, lam(i)
multiplies x_{i+1} = f_i.  x_{-1}, u_{-1}, u_N, lam(N) are empty vectors by
convention, so the per-stage primal-dual block w(i) = [x_i; u_i; lam_i]
degenerates to lam(-1) at the front of the horizon and to x_N at the back.

Sign convention: the Lagrangian is `objective - lam @ c` where c stacks the
constraint residuals [T x_0 - d_{-1}; x_1 - f_0; ...; x_N - f_{N-1}].  Its
gradient in the primal-dual variables is exactly the KKT residual assembled
in the kkt module, and the recorded dual values of golden problems follow
this choice.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray


def _as_vector(value, n: int, what: str) -> Array:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1 or arr.shape != (n,):
        raise ConfigurationError(f"{what}: expected a vector of length {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Dimensions:
    """Problem sizes.

    `n_d` holds the data size of every stage from -1 to N (N + 2 entries);
    read it through `nd(i)` with stage numbers.  The stage -1 data size must
    equal n_0, the row count of the initial-state map.
    """

    N: int
    n_x: int
    n_u: int
    n_d: tuple
    n_0: int

    def __post_init__(self):
        if self.N < 1:
            raise ConfigurationError("horizon N must be >= 1")
        if self.n_x < 1:
            raise ConfigurationError("state size n_x must be >= 1")
        if self.n_u < 0:
            raise ConfigurationError("control size n_u must be >= 0")
        if not 0 <= self.n_0 <= self.n_x:
            raise ConfigurationError("n_0 must lie in [0, n_x]")
        object.__setattr__(self, "n_d", tuple(int(k) for k in self.n_d))
        if len(self.n_d) != self.N + 2:
            raise ConfigurationError(f"n_d must list stages -1..N ({self.N + 2} entries)")
        if any(k < 0 for k in self.n_d):
            raise ConfigurationError("data sizes must be nonnegative")
        if self.n_d[0] != self.n_0:
            raise ConfigurationError("data size at stage -1 must equal n_0")

    @classmethod
    def uniform(cls, N: int, n_x: int, n_u: int, n_d: int, n_0: int) -> "Dimensions":
        """Same data size at every stage 0..N; stage -1 gets n_0."""
        return cls(N, n_x, n_u, (n_0,) + (n_d,) * (N + 1), n_0)

    def nd(self, i: int) -> int:
        if not -1 <= i <= self.N:
            raise ConfigurationError(f"stage {i} outside [-1, {self.N}]")
        return self.n_d[i + 1]

    @property
    def n_z(self) -> int:
        return self.n_x + self.n_u

    @property
    def n_primal(self) -> int:
        return (self.N + 1) * self.n_x + self.N * self.n_u

    @property
    def n_dual(self) -> int:
        return self.n_0 + self.N * self.n_x


@dataclass(frozen=True)
class StageOracles:
    """Callables defining the problem.

    Required:
      stage_cost(i, x, u, d) -> float          i in [0, N-1]
      dynamics(i, x, u, d)   -> array(n_x)     i in [0, N-1]
      terminal_cost(x, d)    -> float

    Optional analytic derivatives; finite differences fill any gap:
      stage_cost_grad(i, x, u, d)  -> (g_x, g_u)
      stage_cost_hess(i, x, u, d)  -> (Q_xx, S_xu, R_uu, E_xd, F_ud)
      terminal_cost_grad(x, d)     -> g_x
      terminal_cost_hess(x, d)     -> (Q_xx, E_xd)
      dynamics_jac(i, x, u, d)     -> (A, B, G)   derivatives in x, u, d
      dynamics_hess_vec(i, x, u, d, lam) -> (H_xx, H_xu, H_uu, H_xd, H_ud)
          second-derivative blocks of lam @ dynamics

    All maps must be twice continuously differentiable on the evaluation
    domain.
    """

    stage_cost: Callable
    dynamics: Callable
    terminal_cost: Callable
    stage_cost_grad: Callable | None = None
    stage_cost_hess: Callable | None = None
    terminal_cost_grad: Callable | None = None
    terminal_cost_hess: Callable | None = None
    dynamics_jac: Callable | None = None
    dynamics_hess_vec: Callable | None = None


@dataclass(frozen=True)
class DOProblem:
    """Immutable problem description: sizes, oracles, initial-state map.

    Instances are safe to share across threads; evaluation does not mutate
    them.  T must have full row rank whenever n_0 > 0 (checked numerically
    at construction).
    """

    dims: Dimensions
    oracles: StageOracles
    T: Array

    def __post_init__(self):
        T = np.asarray(self.T, dtype=float)
        if self.dims.n_0 == 0:
            T = T.reshape(0, self.dims.n_x)
        else:
            T = np.atleast_2d(T)
        if T.shape != (self.dims.n_0, self.dims.n_x):
            raise ConfigurationError(
                f"T must be {self.dims.n_0} x {self.dims.n_x}, got {T.shape}"
            )
        object.__setattr__(self, "T", T)
        if self.dims.n_0 > 0:
            smin = np.linalg.svd(T, compute_uv=False)[-1]
            if smin <= 1e-10 * max(1.0, float(np.abs(T).max())):
                raise ConfigurationError("initial-state map T must have full row rank")


class DataTrajectory:
    """Stage data d_{-1}, d_0, ..., d_N.  Index with stage numbers:
    `data[-1]` is the initial-constraint right-hand side."""

    def __init__(self, dims: Dimensions, vectors: Sequence):
        if len(vectors) != dims.N + 2:
            raise ConfigurationError(f"expected {dims.N + 2} data vectors, got {len(vectors)}")
        self.dims = dims
        self._d = [
            _as_vector(v, dims.nd(i - 1), f"d[{i - 1}]") for i, v in enumerate(vectors)
        ]

    @classmethod
    def zeros(cls, dims: Dimensions) -> "DataTrajectory":
        return cls(dims, [np.zeros(dims.nd(i)) for i in range(-1, dims.N + 1)])

    def _index(self, stage: int) -> int:
        if not -1 <= stage <= self.dims.N:
            raise ConfigurationError(f"stage {stage} outside [-1, {self.dims.N}]")
        return stage + 1

    def __getitem__(self, stage: int) -> Array:
        return self._d[self._index(stage)]

    def copy(self) -> "DataTrajectory":
        return DataTrajectory(self.dims, [v.copy() for v in self._d])

    def perturbed(self, stage: int, delta) -> "DataTrajectory":
        """New trajectory with `delta` added to the data at one stage."""
        out = self.copy()
        k = self._index(stage)
        out._d[k] = out._d[k] + _as_vector(delta, self.dims.nd(stage), f"delta at stage {stage}")
        return out

    def stacked(self) -> Array:
        return np.concatenate(self._d) if self._d else np.zeros(0)


class PrimalDualTrajectory:
    """Primal states/controls and constraint multipliers along the horizon.

    Accessors use stage numbers: `x(i)` for i in [0, N], `u(i)` for i in
    [0, N-1], `lam(i)` for i in [-1, N-1].  `w(i)` stacks [x_i; u_i; lam_i]
    with the empty-vector convention at the ends, so w(-1) = lam(-1) and
    w(N) = x(N).
    """

    def __init__(self, dims: Dimensions, xs: Sequence, us: Sequence, lams: Sequence):
        if len(xs) != dims.N + 1 or len(us) != dims.N or len(lams) != dims.N + 1:
            raise ConfigurationError("trajectory stage counts do not match the horizon")
        self.dims = dims
        self.xs = [_as_vector(v, dims.n_x, f"x[{i}]") for i, v in enumerate(xs)]
        self.us = [_as_vector(v, dims.n_u, f"u[{i}]") for i, v in enumerate(us)]
        self.lams = [
            _as_vector(v, dims.n_0 if i == 0 else dims.n_x, f"lam[{i - 1}]")
            for i, v in enumerate(lams)
        ]

    @classmethod
    def zeros(cls, dims: Dimensions) -> "PrimalDualTrajectory":
        return cls(
            dims,
            [np.zeros(dims.n_x) for _ in range(dims.N + 1)],
            [np.zeros(dims.n_u) for _ in range(dims.N)],
            [np.zeros(dims.n_0)] + [np.zeros(dims.n_x) for _ in range(dims.N)],
        )

    @classmethod
    def from_stacked(cls, dims: Dimensions, z: Array, lam: Array) -> "PrimalDualTrajectory":
        """Rebuild from the stacked primal [x_0; u_0; ...; x_N] and stacked
        dual [lam_{-1}; lam_0; ...; lam_{N-1}] vectors."""
        z = _as_vector(z, dims.n_primal, "stacked primal")
        lam = _as_vector(lam, dims.n_dual, "stacked dual")
        xs, us, lams = [], [], [lam[: dims.n_0]]
        for i in range(dims.N):
            base = i * dims.n_z
            xs.append(z[base : base + dims.n_x])
            us.append(z[base + dims.n_x : base + dims.n_z])
            lams.append(lam[dims.n_0 + i * dims.n_x : dims.n_0 + (i + 1) * dims.n_x])
        xs.append(z[dims.N * dims.n_z :])
        return cls(dims, xs, us, lams)

    def x(self, i: int) -> Array:
        return self.xs[i]

    def u(self, i: int) -> Array:
        return self.us[i]

    def lam(self, i: int) -> Array:
        if not -1 <= i <= self.dims.N - 1:
            raise ConfigurationError(f"multiplier stage {i} outside [-1, {self.dims.N - 1}]")
        return self.lams[i + 1]

    def w(self, i: int) -> Array:
        parts = []
        if 0 <= i <= self.dims.N:
            parts.append(self.xs[i])
        if 0 <= i < self.dims.N:
            parts.append(self.us[i])
        if -1 <= i < self.dims.N:
            parts.append(self.lam(i))
        if not parts:
            raise ConfigurationError(f"stage {i} outside [-1, {self.dims.N}]")
        return np.concatenate(parts)

    def stacked_primal(self) -> Array:
        parts = []
        for i in range(self.dims.N):
            parts.append(self.xs[i])
            parts.append(self.us[i])
        parts.append(self.xs[self.dims.N])
        return np.concatenate(parts)

    def stacked_dual(self) -> Array:
        return np.concatenate(self.lams)

    def copy(self) -> "PrimalDualTrajectory":
        return PrimalDualTrajectory(
            self.dims,
            [v.copy() for v in self.xs],
            [v.copy() for v in self.us],
            [v.copy() for v in self.lams],
        )


def check_dimensions(p: DOProblem, traj=None, data=None):
    """Raise ConfigurationError when trajectories were built for other sizes."""
    if traj is not None and traj.dims != p.dims:
        raise ConfigurationError("trajectory dimensions do not match the problem")
    if data is not None and data.dims != p.dims:
        raise ConfigurationError("data dimensions do not match the problem")


def evaluate_objective(p: DOProblem, traj: PrimalDualTrajectory, data: DataTrajectory) -> float:
    """Sum of stage costs plus the terminal cost (multipliers ignored)."""
    check_dimensions(p, traj, data)
    total = 0.0
    for i in range(p.dims.N):
        total += float(p.oracles.stage_cost(i, traj.x(i), traj.u(i), data[i]))
    total += float(p.oracles.terminal_cost(traj.x(p.dims.N), data[p.dims.N]))
    return total


def evaluate_constraints(p: DOProblem, traj: PrimalDualTrajectory, data: DataTrajectory) -> Array:
    """Stacked residual [T x_0 - d_{-1}; x_1 - f_0; ...; x_N - f_{N-1}].

    Block i occupies the rows of the constraint multiplied by lam(i); the
    leading block is absent when n_0 = 0.
    """
    check_dimensions(p, traj, data)
    parts = []
    if p.dims.n_0 > 0:
        parts.append(p.T @ traj.x(0) - data[-1])
    for i in range(p.dims.N):
        fi = _as_vector(
            p.oracles.dynamics(i, traj.x(i), traj.u(i), data[i]), p.dims.n_x, f"f[{i}]"
        )
        parts.append(traj.x(i + 1) - fi)
    return np.concatenate(parts)


def evaluate_lagrangian(p: DOProblem, traj: PrimalDualTrajectory, data: DataTrajectory) -> float:
    """Objective minus `lam @ c`; its gradient in the primal-dual variables
    equals the KKT residual assembled in the kkt module."""
    check_dimensions(p, traj, data)
    obj = evaluate_objective(p, traj, data)
    c = evaluate_constraints(p, traj, data)
    return obj - float(traj.stacked_dual() @ c)
