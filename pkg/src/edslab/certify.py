"""Regularity and system-theoretic certificates.

Every modulus is a measured eigenvalue or singular value on a densely
assembled matrix: the constraint-qualification modulus is the smallest
eigenvalue of J J^T, the second-order modulus is the smallest eigenvalue of
the reduced Hessian Z^T H Z, and the coupling modulus is the spectral norm
of the Lagrangian's full mixed second derivative in (primal-dual, data)
variables.  Windowed controllability/observability Gramians supply the
system-theoretic side; the point of the window scans is that their minima
stay bounded away from zero independently of the horizon length exactly
when the underlying property is uniform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, RegularityError
from .kkt import StageBlocks, assemble_hessian, assemble_jacobian, assemble_mixed_hessian, linearize
from .problem import Array, DataTrajectory, DOProblem, PrimalDualTrajectory

# Measured moduli at or below this are reported as certificate failures.
POSITIVITY_TOL = 1e-9


def smallest_eigenvalue(M: Array) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] == 0:
        return math.inf
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def state_transition(A_seq, a: int, b: int) -> Array:
    """Product A_b A_{b-1} ... A_a for a <= b; identity when a > b."""
    n = A_seq[0].shape[0] if A_seq else 0
    P = np.eye(n)
    for k in range(a, b + 1):
        P = A_seq[k] @ P
    return P


# ---------------------------------------------------------------------------
# windowed Gramians on raw sequences


def controllability_matrix_seq(A_seq, B_seq, i: int, j: int) -> Array:
    """[A_{i+1:j} B_i, A_{i+2:j} B_{i+1}, ..., A_j B_{j-1}, B_j]."""
    if not 0 <= i <= j <= len(B_seq) - 1:
        raise ConfigurationError(f"window [{i}, {j}] out of range")
    cols = []
    for k in range(i, j + 1):
        cols.append(state_transition(A_seq, k + 1, j) @ B_seq[k])
    return np.hstack(cols)


def observability_matrix_seq(A_seq, Q_seq, i: int, j: int) -> Array:
    """Stack [Q_j A_{i:j-1}; ...; Q_{i+1} A_i; Q_i] top-down."""
    if not 0 <= i <= j <= len(Q_seq) - 1:
        raise ConfigurationError(f"window [{i}, {j}] out of range")
    rows = []
    for m in range(j, i - 1, -1):
        rows.append(Q_seq[m] @ state_transition(A_seq, i, m - 1))
    return np.vstack(rows)


@dataclass
class WindowScan:
    """Per-window moduli for one window length; windows start at
    i = 0, 1, ..., covering the stage range."""

    window_length: int
    values: list = field(default_factory=list)

    @property
    def minimum(self) -> float:
        return min(self.values) if self.values else math.inf


def scan_controllability_seq(A_seq, B_seq, window: int) -> WindowScan:
    M = len(B_seq)
    if not 0 <= window <= M - 1:
        raise ConfigurationError(f"window length {window} out of range [0, {M - 1}]")
    scan = WindowScan(window_length=window)
    for i in range(M - window):
        C = controllability_matrix_seq(A_seq, B_seq, i, i + window)
        scan.values.append(smallest_eigenvalue(C @ C.T))
    return scan


def scan_observability_seq(A_seq, Q_seq, window: int) -> WindowScan:
    M = len(Q_seq)
    if not 0 <= window <= M - 1:
        raise ConfigurationError(f"window length {window} out of range [0, {M - 1}]")
    scan = WindowScan(window_length=window)
    for i in range(M - window):
        O = observability_matrix_seq(A_seq, Q_seq, i, i + window)
        scan.values.append(smallest_eigenvalue(O.T @ O))
    return scan


# ---------------------------------------------------------------------------
# StageBlocks front ends


def controllability_matrix(blocks: StageBlocks, i: int, j: int) -> Array:
    return controllability_matrix_seq(blocks.A, blocks.B, i, j)


def observability_matrix(blocks: StageBlocks, i: int, j: int) -> Array:
    """Q indices may run to the terminal stage N; A is needed only to j-1."""
    if not 0 <= i <= j <= blocks.dims.N:
        raise ConfigurationError(f"window [{i}, {j}] out of range")
    return observability_matrix_seq(blocks.A, blocks.Q, i, j)


def scan_uniform_controllability(blocks: StageBlocks, window: int) -> WindowScan:
    """Minimum of the smallest Gramian eigenvalue over all forward windows
    of exactly the given length inside [0, N-1].  Checking only
    minimal-length windows suffices: enlarging a window adds columns, so the
    Gramian is monotone nondecreasing in the window length."""
    return scan_controllability_seq(blocks.A, blocks.B, window)


def scan_uniform_observability(blocks: StageBlocks, window: int) -> WindowScan:
    """Observability counterpart of `scan_uniform_controllability`; windows
    stay inside [0, N-1]."""
    return scan_observability_seq(blocks.A, blocks.Q[: blocks.dims.N], window)


def dual_sequences(A_seq, B_seq):
    """Reverse both sequences and transpose every matrix: controllability of
    (A, B) equals observability of the result."""
    return [a.T.copy() for a in reversed(A_seq)], [b.T.copy() for b in reversed(B_seq)]


def duality_check(blocks: StageBlocks, window: int, rel_tol: float = 1e-9):
    """Compare the controllability scan of (A, B) against the observability
    scan of the reversed, transposed sequences.  Returns (agree, max
    per-window discrepancy); agreement is judged on the window minima at
    relative tolerance."""
    ctrl = scan_controllability_seq(blocks.A, blocks.B, window)
    A_dual, Q_dual = dual_sequences(blocks.A, blocks.B)
    obs = scan_observability_seq(A_dual, Q_dual, window)
    M = len(blocks.B)
    disc = 0.0
    for i, v in enumerate(ctrl.values):
        # window [i, i+w] reflects onto the dual window starting at M-1-(i+w)
        v_dual = obs.values[M - 1 - (i + window)]
        disc = max(disc, abs(v - v_dual))
    agree = abs(ctrl.minimum - obs.minimum) <= rel_tol * max(1.0, abs(ctrl.minimum))
    return agree, disc


# ---------------------------------------------------------------------------
# NLP regularity moduli


def licq_modulus(J: Array) -> float:
    """Smallest eigenvalue of J J^T, via the singular values of J."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if J.shape[0] == 0:
        return math.inf
    if J.shape[0] > J.shape[1]:
        return 0.0
    s = np.linalg.svd(J, compute_uv=False)
    return float(s[-1] ** 2)


def sosc_modulus(H: Array, J: Array) -> float:
    """Smallest eigenvalue of Z^T H Z for an orthonormal null-space basis Z
    of J (basis-independent).  Returns +inf when the null space is trivial
    (second-order condition vacuous); raises RegularityError when J is rank
    deficient, in which case `licq_modulus` is the meaningful diagnostic."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if J.shape[0] == 0:
        Z = np.eye(J.shape[1] if J.shape[1] else H.shape[0])
    else:
        U, s, Vt = np.linalg.svd(J)
        tol = max(J.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        rank = int(np.sum(s > tol))
        if rank < J.shape[0]:
            raise RegularityError(
                "constraint Jacobian is rank deficient; check licq_modulus first"
            )
        Z = Vt[rank:].T
    if Z.shape[1] == 0:
        return math.inf
    return smallest_eigenvalue(Z.T @ H @ Z)


def mixed_hessian_norm(blocks: StageBlocks) -> float:
    """Spectral norm of the assembled mixed second derivative of the
    Lagrangian in (primal-dual, data) variables."""
    M = assemble_mixed_hessian(blocks)
    if min(M.shape) == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def blh_modulus(p: DOProblem, traj: PrimalDualTrajectory, data: DataTrajectory) -> float:
    """Observed bound on the Lagrangian's mixed second derivatives at one
    point: linearize, assemble, take the spectral norm."""
    return mixed_hessian_norm(linearize(p, traj, data))


def blh_bound_from_K(K: float) -> float:
    """Worst-case coupling norm implied by a uniform block-norm bound K:
    4 * max(4K, 1)."""
    if K < 0:
        raise ConfigurationError("block-norm bound K must be nonnegative")
    return 4.0 * max(4.0 * K, 1.0)


def max_block_norm(blocks: StageBlocks) -> float:
    """Largest spectral norm over every stage block and T."""
    out = 0.0
    groups = [blocks.Q, blocks.R, blocks.S, blocks.E, blocks.F, blocks.A, blocks.B, blocks.G]
    for group in groups:
        for M in group:
            if M.size:
                out = max(out, float(np.linalg.norm(M, 2)))
    if blocks.T.size:
        out = max(out, float(np.linalg.norm(blocks.T, 2)))
    return out


# ---------------------------------------------------------------------------
# full report


@dataclass
class CertificateReport:
    """Measured moduli plus pass/fail flags for the sufficient conditions of
    the system-theoretic route to exponential decay.

    `gamma` is +inf (with `sosc_vacuous`) when the constraint null space is
    trivial and None when the Jacobian is rank deficient; failures are
    report entries, never exceptions.
    """

    beta: float
    gamma: float | None
    sosc_vacuous: bool
    L_observed: float
    L_bound_from_K: float
    K: float
    r: float
    delta: float | None
    ctrl: WindowScan
    obs: WindowScan
    flags: dict
    pos_tol: float = POSITIVITY_TOL

    @property
    def licq_ok(self) -> bool:
        return self.beta > self.pos_tol

    @property
    def sosc_ok(self) -> bool:
        return self.gamma is not None and (self.sosc_vacuous or self.gamma > self.pos_tol)

    @property
    def corollary_ok(self) -> bool:
        return all(self.flags.values())

    def _items(self):
        yield "beta", self.beta
        yield "gamma", self.gamma
        yield "sosc_vacuous", self.sosc_vacuous
        yield "licq_ok", self.licq_ok
        yield "sosc_ok", self.sosc_ok
        yield "L_observed", self.L_observed
        yield "L_bound_from_K", self.L_bound_from_K
        yield "K", self.K
        yield "r", self.r
        yield "delta", self.delta
        yield "ctrl_window", self.ctrl.window_length
        yield "ctrl_modulus", self.ctrl.minimum
        yield "obs_window", self.obs.window_length
        yield "obs_modulus", self.obs.minimum
        for name in sorted(self.flags):
            yield f"flag_{name}", self.flags[name]
        yield "corollary_ok", self.corollary_ok

    def to_text(self) -> str:
        lines = []
        for key, value in self._items():
            lines.append(f"{key} {_fmt_value(value)}")
        return "\n".join(lines) + "\n"

    def to_csv_rows(self):
        return [(key, _fmt_value(value)) for key, value in self._items()]


def _fmt_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def build_report(
    p: DOProblem,
    traj: PrimalDualTrajectory,
    data: DataTrajectory,
    window_ctrl: int,
    window_obs: int,
    *,
    pos_tol: float = POSITIVITY_TOL,
    s_zero_tol: float = 1e-8,
    q_psd_tol: float = 1e-8,
) -> CertificateReport:
    """Populate every certificate at a converged primal-dual point."""
    blocks = linearize(p, traj, data)
    J = assemble_jacobian(blocks)
    H = assemble_hessian(blocks)
    beta = licq_modulus(J)
    try:
        gamma = sosc_modulus(H, J)
    except RegularityError:
        gamma = None
    vacuous = gamma is not None and math.isinf(gamma)
    L_observed = mixed_hessian_norm(blocks)
    K = max_block_norm(blocks)
    r = math.inf
    if p.dims.n_u > 0:
        r = min(smallest_eigenvalue(R) for R in blocks.R)
    delta = None
    if p.dims.n_0 > 0:
        delta = smallest_eigenvalue(blocks.T @ blocks.T.T)
    ctrl = scan_uniform_controllability(blocks, window_ctrl)
    obs = scan_uniform_observability(blocks, window_obs)
    s_max = max((float(np.abs(S).max()) if S.size else 0.0) for S in blocks.S) if blocks.S else 0.0
    q_min = min(smallest_eigenvalue(Q) for Q in blocks.Q)
    flags = {
        "k_bounded": bool(np.isfinite(K)),
        "delta_positive": True if delta is None else delta > pos_tol,
        "ctrl_uniform": ctrl.minimum > pos_tol,
        "q_psd": q_min >= -q_psd_tol,
        "s_zero": s_max <= s_zero_tol,
        "r_positive": (r > pos_tol) if math.isfinite(r) else True,
        "obs_uniform": obs.minimum > pos_tol,
    }
    return CertificateReport(
        beta=beta,
        gamma=gamma,
        sosc_vacuous=vacuous,
        L_observed=L_observed,
        L_bound_from_K=blh_bound_from_K(K),
        K=K,
        r=r,
        delta=delta,
        ctrl=ctrl,
        obs=obs,
        flags=flags,
        pos_tol=pos_tol,
    )
