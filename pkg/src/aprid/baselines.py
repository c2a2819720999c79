"""Baseline stochastic solvers for constrained problems.

Three non-adaptive (or differently adaptive) methods sharing the constrained
problem protocol and checkpoint conventions of the main solver:

* ``msa_run``: projected stochastic subgradient on the Lagrangian with a
  multiplier ascent clipped into ``[0, z_cap]^M``.
* ``csa_run``: cooperative switching between objective and constraint
  subgradient steps, driven by a per-step estimate of the aggregate
  violation; emits two candidate trajectories (average over the steps whose
  estimate cleared the tolerance, and average over all steps).
* ``pdsg_adp_run``: a primal-dual method on the classical augmented
  Lagrangian (penalty one) with a diagonal step scaling accumulated from
  normalized gradient energy; needs exact per-constraint values, so it only
  runs on finite-sum style problems.

All baselines use the constant ``scale/sqrt(horizon)`` parameterization and
plain step-weighted ergodic averaging.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError
from .oracles import (constraint_step_direction, estimate_constraint_value,
                      sample_lagrangian_subgradient)
from .results import CheckpointRecord, RunResult
from .rng import eval_seed, training_rng
from .schedules import ErgodicAverager
from .solvers import _initial_x, _resolve_checkpoints

__all__ = [
    "MsaParams",
    "CsaParams",
    "PdsgAdpParams",
    "msa_run",
    "csa_run",
    "pdsg_adp_run",
]


def _check_positive(**kwargs):
    for name, v in kwargs.items():
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v!r}")


@dataclass
class MsaParams:
    """Mirror-descent stochastic approximation: steps alpha/sqrt(horizon)
    and rho/sqrt(horizon), multipliers kept inside [0, z_cap]^M."""

    horizon: int
    alpha: float = 10.0
    rho: float = 1.0
    z_cap: float = 1e3

    def __post_init__(self):
        _check_positive(horizon=self.horizon, alpha=self.alpha, rho=self.rho, z_cap=self.z_cap)


@dataclass
class CsaParams:
    """Switching subgradient parameters: step gamma/sqrt(horizon), switching
    tolerance eta_tol, averaging start index s (1-based), and the batch size
    of the per-step violation estimate (None: use batches.jg)."""

    horizon: int
    gamma: float = 10.0
    eta_tol: float = 0.04
    s: int = 1
    jg: int | None = None

    def __post_init__(self):
        _check_positive(horizon=self.horizon, gamma=self.gamma)
        if self.eta_tol < 0:
            raise ValueError(f"eta_tol must be non-negative, got {self.eta_tol!r}")
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"averaging start index must be a positive integer, got {self.s!r}")


@dataclass
class PdsgAdpParams:
    """Augmented-Lagrangian primal-dual parameters: steps alpha/sqrt(horizon)
    and rho/sqrt(horizon); eta_scale weights the accumulated diagonal scaling
    (zero turns the x-update into plain projected SGD)."""

    horizon: int
    alpha: float = 20.0
    rho: float = math.sqrt(10.0)
    eta_scale: float = 0.1
    divergence_cap: float = 1e8

    def __post_init__(self):
        _check_positive(horizon=self.horizon, alpha=self.alpha, rho=self.rho,
                        divergence_cap=self.divergence_cap)
        if self.eta_scale < 0:
            raise ValueError(f"eta_scale must be non-negative, got {self.eta_scale!r}")


def _eval_record(problem, x_bar, k, wall, seed, f0_ref, lane=0):
    ev = problem.evaluate_full(x_bar, seed=eval_seed(seed, k, lane))
    err = abs(ev.objective - f0_ref) if f0_ref is not None else float("nan")
    return CheckpointRecord(iteration=k, wall_s=wall, obj_err=err,
                            viol_avg=ev.viol_avg, viol_max=ev.viol_max,
                            objective=ev.objective)


def msa_run(problem, params, batches, seed, checkpoints=None, f0_ref=None,
            timing="algo") -> RunResult:
    """Projected stochastic subgradient with capped multiplier ascent."""
    if timing not in ("algo", "total"):
        raise ValueError(f"timing must be 'algo' or 'total', got {timing!r}")
    horizon = int(params.horizon)
    alpha = params.alpha / math.sqrt(horizon)
    rho = params.rho / math.sqrt(horizon)
    cps = _resolve_checkpoints(checkpoints, horizon)
    cpset = set(cps)
    box = problem.box
    x = _initial_x(box)
    z = np.zeros(problem.num_constraints)
    avg_x = ErgodicAverager(0.0)
    rng = training_rng(seed)
    records = []
    wall = 0.0
    for k in range(1, horizon + 1):
        tic = time.perf_counter()
        sample = sample_lagrangian_subgradient(problem, x, z, batches, rng)
        avg_x.push(x, alpha)
        x = box.project(x - alpha * sample.u)
        if sample.w_support is None:
            z = np.clip(z + rho * sample.w, 0.0, params.z_cap)
        else:
            s = sample.w_support
            z[s] = np.clip(z[s] + rho * sample.w[s], 0.0, params.z_cap)
        if not np.all(np.isfinite(x)):
            raise DivergenceError("non-finite iterate", iteration=k, partial_records=records)
        wall += time.perf_counter() - tic
        if k in cpset:
            x_bar = avg_x.finalize()
            tic = time.perf_counter()
            rec = _eval_record(problem, x_bar, k, wall, seed, f0_ref)
            if timing == "total":
                wall += time.perf_counter() - tic
                rec.wall_s = wall
            records.append(rec)
    return RunResult(algorithm="msa", seed=seed, records=records,
                     x_bar=avg_x.finalize(), z_bar=z.copy(), wall_total=wall)


def csa_run(problem, params, batches, seed, checkpoints=None, f0_ref=None,
            timing="algo"):
    """Switching subgradient method; returns a pair of RunResults.

    Each step estimates the aggregate violation with a ``jg``-sample batch;
    an estimate within ``eta_tol`` triggers an objective subgradient step,
    anything larger a constraint subgradient step. The first returned
    trajectory averages only the steps (from index ``s`` on) whose estimate
    cleared the tolerance; its checkpoints carry flag ``csa1_absent`` with
    NaN metrics while that set is still empty. The second averages all
    steps.
    """
    if timing not in ("algo", "total"):
        raise ValueError(f"timing must be 'algo' or 'total', got {timing!r}")
    horizon = int(params.horizon)
    gamma = params.gamma / math.sqrt(horizon)
    jg = params.jg if params.jg is not None else batches.jg
    cps = _resolve_checkpoints(checkpoints, horizon)
    cpset = set(cps)
    box = problem.box
    x = _initial_x(box)
    avg_cleared = ErgodicAverager(0.0)
    avg_all = ErgodicAverager(0.0)
    rng = training_rng(seed)
    records1, records2 = [], []
    wall = 0.0
    for k in range(1, horizon + 1):
        tic = time.perf_counter()
        ghat = estimate_constraint_value(problem, x, jg, rng)
        if not math.isfinite(ghat):
            raise DivergenceError("non-finite violation estimate",
                                  iteration=k, partial_records=records2)
        avg_all.push(x, gamma)
        if ghat <= params.eta_tol:
            if k >= params.s:
                avg_cleared.push(x, gamma)
            direction = problem.sample_objective_grad(x, batches.j0, rng)
        else:
            direction = constraint_step_direction(problem, x, batches.j1, rng)
        x = box.project(x - gamma * direction)
        if not np.all(np.isfinite(x)):
            raise DivergenceError("non-finite iterate", iteration=k, partial_records=records2)
        wall += time.perf_counter() - tic
        if k in cpset:
            tic = time.perf_counter()
            if avg_cleared.count > 0:
                rec1 = _eval_record(problem, avg_cleared.finalize(), k, wall, seed, f0_ref, lane=1)
            else:
                rec1 = CheckpointRecord(iteration=k, wall_s=wall, flags="csa1_absent")
            rec2 = _eval_record(problem, avg_all.finalize(), k, wall, seed, f0_ref)
            if timing == "total":
                wall += time.perf_counter() - tic
                rec1.wall_s = wall
                rec2.wall_s = wall
            records1.append(rec1)
            records2.append(rec2)
    xb1 = avg_cleared.finalize() if avg_cleared.count > 0 else None
    res1 = RunResult(algorithm="csa1", seed=seed, records=records1,
                     x_bar=xb1, wall_total=wall)
    res2 = RunResult(algorithm="csa2", seed=seed, records=records2,
                     x_bar=avg_all.finalize(), wall_total=wall)
    return res1, res2


def pdsg_adp_run(problem, params, batches, seed, checkpoints=None, f0_ref=None,
                 timing="algo") -> RunResult:
    """Primal-dual subgradient on the augmented Lagrangian (penalty one).

    Per step, over a sampled constraint subset S (scaled by M/|S|):

        u   = u0 + (M/|S|) sum_{j in S} [z_j + f_j(x)]_+ grad f_j(x)
        w_j = (M/|S|) max(f_j(x), -z_j)            on S, zero elsewhere
        v   = eta_scale * sqrt( sum_t u_t^2 / max(1, ||u_t||)^2 )
        x  <- proj_box( x - u / (v + 1/alpha) ),   z_S <- z_S + rho w_S

    The multiplier update is deliberately unclamped. The constraint values
    multiplying the gradients must be exact (a noisy value times a noisy
    gradient is biased), so the problem must expose
    ``sample_constraint_block_exact``.
    """
    if timing not in ("algo", "total"):
        raise ValueError(f"timing must be 'algo' or 'total', got {timing!r}")
    if not hasattr(problem, "sample_constraint_block_exact"):
        raise ValueError(
            f"pdsg_adp needs exact per-constraint values, which problem kind "
            f"{problem.kind!r} cannot provide (finite-sum families can)"
        )
    horizon = int(params.horizon)
    alpha = params.alpha / math.sqrt(horizon)
    rho = params.rho / math.sqrt(horizon)
    cps = _resolve_checkpoints(checkpoints, horizon)
    cpset = set(cps)
    box = problem.box
    num = problem.num_constraints
    x = _initial_x(box)
    z = np.zeros(num)
    accum = np.zeros(box.dim)
    avg_x = ErgodicAverager(0.0)
    rng = training_rng(seed)
    records = []
    wall = 0.0
    for k in range(1, horizon + 1):
        tic = time.perf_counter()
        u0 = problem.sample_objective_grad(x, batches.j0, rng)
        support, values, grads = problem.sample_constraint_block_exact(x, batches.j1, rng)
        scale = num / len(support)
        weights = np.maximum(z[support] + values, 0.0)
        u = u0 + scale * (weights @ grads)
        gam = max(1.0, float(np.linalg.norm(u)))
        accum += (u * u) / (gam * gam)
        v = params.eta_scale * np.sqrt(accum)
        avg_x.push(x, alpha)
        x = box.project(x - u / (v + 1.0 / alpha))
        z[support] = z[support] + rho * scale * np.maximum(values, -z[support])
        znorm = float(np.linalg.norm(z))
        if not np.all(np.isfinite(x)) or znorm > params.divergence_cap:
            raise DivergenceError(f"iterate diverged (multiplier norm {znorm:.3e})",
                                  iteration=k, partial_records=records)
        wall += time.perf_counter() - tic
        if k in cpset:
            x_bar = avg_x.finalize()
            tic = time.perf_counter()
            rec = _eval_record(problem, x_bar, k, wall, seed, f0_ref)
            if timing == "total":
                wall += time.perf_counter() - tic
                rec.wall_s = wall
            records.append(rec)
    return RunResult(algorithm="pdsg_adp", seed=seed, records=records,
                     x_bar=avg_x.finalize(), z_bar=z.copy(), wall_total=wall)
