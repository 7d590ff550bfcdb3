"""Perturbation experiments and decay-envelope fitting.

One experiment perturbs the data at a single stage j, re-solves warm-started
from the base solution, and records the stage-wise deviation norms
s_i = ||w_i(perturbed) - w_i(base)|| over i = -1..N.  Profiles pooled over
stages and replicates are fitted with an exponential envelope
s_i <= Upsilon * rho^{|i-j|} * ||perturbation||, either by least squares on
the log (reported with r^2) or as the minimal upper envelope sharing the
least-squares decay rate.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FitError, NonconvergenceError
from .kkt import SolveOptions, solve_equality_nlp
from .problem import (
    Array,
    DataTrajectory,
    DOProblem,
    PrimalDualTrajectory,
    _as_vector,
)

# Entries this far below a profile's peak are solver noise; fitting the log
# of noise would corrupt the decay rate, so fits and bound checks skip them.
FLOOR_ABS = 1e-12
FLOOR_REL = 1e-9


@dataclass(frozen=True)
class PerturbationSpec:
    """A single-stage data perturbation: all other stages are untouched."""

    stage: int
    delta: Array

    def __post_init__(self):
        object.__setattr__(self, "delta", np.atleast_1d(np.asarray(self.delta, dtype=float)))

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.delta))


@dataclass
class SensitivityProfile:
    """Stage-wise deviation norms for one perturbation experiment; `s` holds
    stages -1..N, read through `deviation(i)`."""

    stage: int
    s: Array
    magnitude: float
    converged: bool
    replicate: int = 0
    seed: tuple | None = None

    def deviation(self, i: int) -> float:
        return float(self.s[i + 1])

    @property
    def n_stages(self) -> int:
        return self.s.size

    def stage_range(self):
        return range(-1, self.s.size - 1)

    def floor(self) -> float:
        peak = float(self.s.max()) if self.s.size else 0.0
        return max(FLOOR_ABS, FLOOR_REL * peak)


def stage_deviations(
    a: PrimalDualTrajectory, b: PrimalDualTrajectory, primal_only: bool = False
) -> Array:
    """Euclidean norm of w_i(a) - w_i(b) for every stage -1..N; with
    `primal_only` the multiplier blocks are dropped (plotting parity with
    state/control trajectories)."""
    if a.dims != b.dims:
        raise ConfigurationError("trajectories have mismatched dimensions")
    N = a.dims.N
    out = np.zeros(N + 2)
    for i in range(-1, N + 1):
        diff_parts = []
        if 0 <= i <= N:
            diff_parts.append(a.x(i) - b.x(i))
        if 0 <= i < N:
            diff_parts.append(a.u(i) - b.u(i))
        if not primal_only and -1 <= i < N:
            diff_parts.append(a.lam(i) - b.lam(i))
        stacked = np.concatenate(diff_parts) if diff_parts else np.zeros(0)
        out[i + 1] = float(np.linalg.norm(stacked))
    return out


def random_perturbation(n: int, magnitude: float, rng: np.random.Generator) -> Array:
    """Uniform direction on the sphere scaled to the requested magnitude."""
    if n < 1:
        raise ConfigurationError("cannot perturb empty stage data")
    v = rng.standard_normal(n)
    norm = float(np.linalg.norm(v))
    while norm == 0.0:
        v = rng.standard_normal(n)
        norm = float(np.linalg.norm(v))
    return (magnitude / norm) * v


def run_perturbation_experiment(
    p: DOProblem,
    d_star: DataTrajectory,
    w_star: PrimalDualTrajectory,
    spec: PerturbationSpec,
    opts: SolveOptions | None = None,
    primal_only: bool = False,
) -> SensitivityProfile:
    """Solve the problem with the data perturbed at one stage, warm-started
    from the base solution, and record stage-wise deviations.  A
    nonconverged solve yields a profile flagged converged=False (computed
    from the last iterate) which fits exclude."""
    delta = _as_vector(spec.delta, p.dims.nd(spec.stage), f"perturbation at stage {spec.stage}")
    d_pert = d_star.perturbed(spec.stage, delta)
    converged = True
    try:
        result = solve_equality_nlp(p, d_pert, w0=w_star, opts=opts)
        w_pert = result.trajectory
    except NonconvergenceError as exc:
        converged = False
        w_pert = exc.result.trajectory
    s = stage_deviations(w_pert, w_star, primal_only=primal_only)
    return SensitivityProfile(
        stage=spec.stage,
        s=s,
        magnitude=float(np.linalg.norm(delta)),
        converged=converged,
    )


def run_experiments(
    p: DOProblem,
    d_star: DataTrajectory,
    w_star: PrimalDualTrajectory,
    stages,
    replicates: int,
    magnitude: float,
    seed: int,
    opts: SolveOptions | None = None,
    threads: int | None = None,
    primal_only: bool = False,
):
    """Batch of seeded experiments over (stage, replicate) pairs.  Each pair
    draws its direction from an independently derived generator, so results
    are identical whatever the worker-pool size; profiles come back sorted
    by (stage, replicate) with their derivation seeds recorded."""
    if replicates < 1:
        raise ConfigurationError("replicates must be >= 1")
    tasks = []
    for j in stages:
        if not -1 <= j <= p.dims.N:
            raise ConfigurationError(f"perturbation stage {j} outside [-1, {p.dims.N}]")
        if p.dims.nd(j) == 0:
            raise ConfigurationError(f"stage {j} has empty data; nothing to perturb")
        for rep in range(replicates):
            tasks.append((j, rep))

    def one(task):
        j, rep = task
        rng = np.random.default_rng([seed, j + 1, rep])
        delta = random_perturbation(p.dims.nd(j), magnitude, rng)
        profile = run_perturbation_experiment(
            p, d_star, w_star, PerturbationSpec(j, delta), opts=opts, primal_only=primal_only
        )
        profile.replicate = rep
        profile.seed = (seed, j, rep)
        return profile

    if threads is None:
        threads = int(os.environ.get("EDSLAB_THREADS", "1"))
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            profiles = list(pool.map(one, tasks))
    else:
        profiles = [one(t) for t in tasks]
    profiles.sort(key=lambda pr: (pr.stage, pr.replicate))
    return profiles


# ---------------------------------------------------------------------------
# envelope fitting


@dataclass
class DecayFit:
    """Exponential envelope s_i ~ upsilon * rho^{|i-j|} * magnitude.

    `mode` is "ls" (log least squares, reported with r^2) or "envelope"
    (same decay rate, upsilon inflated minimally so no fitted point exceeds
    the bound).  `clamped` marks a fitted rate above one that was clipped;
    `floor` records the largest noise floor used when selecting points.
    """

    upsilon: float
    rho: float
    r2: float
    floor: float
    mode: str
    clamped: bool
    n_points: int

    @property
    def no_decay(self) -> bool:
        return self.rho >= 1.0 - 1e-12


def _pooled_points(profiles):
    dists, logs, floors = [], [], []
    for prof in profiles:
        if not prof.converged:
            continue
        if prof.magnitude <= 0.0:
            continue
        floor = prof.floor()
        floors.append(floor)
        for i in prof.stage_range():
            si = prof.deviation(i)
            if si > floor:
                dists.append(abs(i - prof.stage))
                logs.append(math.log(si / prof.magnitude))
    return np.asarray(dists, dtype=float), np.asarray(logs), (max(floors) if floors else FLOOR_ABS)


def fit_decay(profiles, mode: str = "ls") -> DecayFit:
    """Least-squares line through (|i - j|, log(s_i / magnitude)) pooled
    over converged profiles, entries above the noise floor only."""
    if mode not in ("ls", "envelope"):
        raise ConfigurationError(f"unknown fit mode '{mode}'")
    dists, logs, floor = _pooled_points(profiles)
    if dists.size < 3:
        raise FitError(f"need at least 3 points above the noise floor, have {dists.size}")
    if np.ptp(dists) == 0.0:
        raise FitError("all usable points share one distance; cannot fit a rate")
    slope, intercept = np.polyfit(dists, logs, 1)
    pred = slope * dists + intercept
    ss_res = float(np.sum((logs - pred) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    rho = math.exp(slope)
    clamped = rho > 1.0
    if clamped:
        rho = 1.0
    upsilon = math.exp(intercept)
    if mode == "envelope":
        log_rho = math.log(rho) if rho < 1.0 else 0.0
        upsilon = float(np.exp(np.max(logs - dists * log_rho)))
    return DecayFit(
        upsilon=upsilon,
        rho=rho,
        r2=r2,
        floor=floor,
        mode=mode,
        clamped=clamped,
        n_points=int(dists.size),
    )


@dataclass
class BoundCheck:
    slack: float
    n_checked: int
    violations: int
    worst_ratio: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def verify_eds_bound(profiles, fit: DecayFit, slack: float = 1.0) -> BoundCheck:
    """Check s_i <= slack * upsilon * rho^{|i-j|} * magnitude at every stage
    of every converged profile above the noise floor; single-stage
    perturbations collapse the general stage sum to this one term."""
    n_checked = 0
    violations = 0
    worst = 0.0
    for prof in profiles:
        if not prof.converged or prof.magnitude <= 0.0:
            continue
        floor = prof.floor()
        for i in prof.stage_range():
            si = prof.deviation(i)
            if si <= floor:
                continue
            bound = slack * fit.upsilon * fit.rho ** abs(i - prof.stage) * prof.magnitude
            ratio = si / bound
            n_checked += 1
            worst = max(worst, ratio)
            if ratio > 1.0 + 1e-12:
                violations += 1
    return BoundCheck(slack=slack, n_checked=n_checked, violations=violations, worst_ratio=worst)


@dataclass
class DecayContrast:
    rho_a: float
    rho_b: float
    margin: float

    @property
    def separated(self) -> bool:
        return self.rho_a + self.margin < self.rho_b


def decay_contrast(fit_a: DecayFit, fit_b: DecayFit, margin: float = 0.05) -> DecayContrast:
    """Is case A's decay rate decisively faster (smaller) than case B's?"""
    return DecayContrast(rho_a=fit_a.rho, rho_b=fit_b.rho, margin=margin)
