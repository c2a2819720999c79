"""Adaptive primal-dual stochastic solvers.

Two state machines live here. The constrained solver runs adaptive
momentum/second-moment primal updates against a multiplier ascent with the
coupled dual step schedule:

    m_k    = beta1 m_{k-1} + (1 - beta1) u_k           (raw gradient)
    uhat_k = u_k / max(1, ||u_k|| / theta)             (norm clip)
    v_k    = beta2 v_{k-1} + (1 - beta2) uhat_k^2      (clipped gradient)
    vhat_k = max(vhat_{k-1}, v_k)                      (coordinate-wise)
    x_{k+1} = proj_{X, sqrt(vhat_k)} ( x_k - alpha_k m_k / sqrt(vhat_k) )
    z_{k+1} = [ z_k + rho_k w_k ]_+

with the 0/0 = 0 convention for untouched coordinates. The momentum uses the
raw gradient while the second moment uses the clipped one; the clip bounds
every vhat coordinate by theta^2. The minimax solver applies the same
adaptive scaling blockwise to a descent step in x and an ascent step in z,
both projected onto their boxes.

Solvers report the ergodic averages of their iterates, weighted by
``sum_{k=j}^t alpha_k beta1^(k-j)``, via streaming averagers.
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .kernels import clip_gradient, project_box_weighted
from .oracles import sample_lagrangian_subgradient, sample_minimax_subgradient
from .results import CheckpointRecord, RunResult, log_spaced_checkpoints
from .rng import eval_seed, training_rng
from .schedules import ErgodicAverager, StepSchedule

__all__ = [
    "SolverParams",
    "PrimalState",
    "DualState",
    "MinimaxState",
    "aprid_step",
    "aprid_run",
    "apriad_step",
    "apriad_run",
    "primal_dual_gap",
]


@dataclass
class SolverParams:
    """Hyper-parameters shared by the adaptive solvers.

    The momentum weight ``beta1`` must match the schedule's, since the dual
    step recursion and the ergodic averaging weights are derived from it.
    ``adaptive=False`` freezes the second-moment scaling at one (every
    coordinate steps with plain alpha_k), which with ``beta1 = 0`` reduces
    the solvers to projected stochastic gradient descent/ascent.
    """

    schedule: StepSchedule
    beta1: float = 0.9
    beta2: float = 0.99
    theta: float = 10.0
    z_init: np.ndarray | None = None
    adaptive: bool = True
    divergence_cap: float = 1e8

    def __post_init__(self):
        if not 0 <= self.beta1 < 1:
            raise ValueError(f"beta1 must lie in [0, 1), got {self.beta1!r}")
        if not 0 < self.beta2 < 1:
            raise ValueError(f"beta2 must lie in (0, 1), got {self.beta2!r}")
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta!r}")
        if not self.divergence_cap > 0:
            raise ValueError(f"divergence_cap must be positive, got {self.divergence_cap!r}")
        if abs(self.schedule.beta1 - self.beta1) > 0:
            raise ValueError(
                f"schedule beta1={self.schedule.beta1} differs from solver "
                f"beta1={self.beta1}; both recursions must share the weight"
            )

    @property
    def horizon(self) -> int:
        return self.schedule.horizon

    @classmethod
    def constant(cls, horizon, alpha=10.0, rho=1.0, beta1=0.9, **kwargs):
        return cls(StepSchedule.constant(alpha, rho, horizon, beta1), beta1=beta1, **kwargs)

    @classmethod
    def sqrt_log(cls, horizon, alpha=10.0, rho=1.0, beta1=0.9, **kwargs):
        return cls(StepSchedule.sqrt_log(alpha, rho, horizon, beta1), beta1=beta1, **kwargs)

    @classmethod
    def sqrt(cls, horizon, alpha=1.0, rho=1.0, beta1=0.9, **kwargs):
        return cls(StepSchedule.sqrt(alpha, rho, horizon, beta1), beta1=beta1, **kwargs)


@dataclass
class PrimalState:
    """Primal iterate with momentum and second-moment accumulators."""

    x: np.ndarray
    m: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray

    @classmethod
    def fresh(cls, x0):
        x0 = np.asarray(x0, dtype=float).copy()
        return cls(x=x0, m=np.zeros_like(x0), v=np.zeros_like(x0), v_hat=np.zeros_like(x0))


@dataclass
class DualState:
    """Multiplier iterate (non-negative orthant)."""

    z: np.ndarray

    @classmethod
    def fresh(cls, num_constraints):
        return cls(z=np.zeros(int(num_constraints)))


def _scaled_direction(m, v_hat):
    # 0/0 = 0: coordinates never touched by gradient energy do not move.
    root = np.sqrt(v_hat)
    direction = np.zeros_like(m)
    np.divide(m, root, out=direction, where=root > 0)
    return root, direction


def aprid_step(pstate, dstate, sample, alpha_k, rho_k, params, box):
    """One primal-dual update in place; returns the updated states."""
    b1, b2 = params.beta1, params.beta2
    u = sample.u
    pstate.m = b1 * pstate.m + (1.0 - b1) * u
    if params.adaptive:
        u_hat = clip_gradient(u, params.theta)
        pstate.v = b2 * pstate.v + (1.0 - b2) * (u_hat * u_hat)
        pstate.v_hat = np.maximum(pstate.v_hat, pstate.v)
        root, direction = _scaled_direction(pstate.m, pstate.v_hat)
    else:
        root = np.ones_like(pstate.m)
        direction = pstate.m
    pstate.x = project_box_weighted(pstate.x - alpha_k * direction, box, root)
    if sample.w_support is None:
        dstate.z = np.maximum(dstate.z + rho_k * sample.w, 0.0)
    else:
        s = sample.w_support
        dstate.z[s] = np.maximum(dstate.z[s] + rho_k * sample.w[s], 0.0)
    if not np.all(np.isfinite(dstate.z)):
        raise DivergenceError("non-finite multiplier after update")
    return pstate, dstate


def _resolve_checkpoints(checkpoints, horizon):
    if checkpoints is None:
        return log_spaced_checkpoints(horizon)
    cps = sorted(set(int(c) for c in checkpoints))
    if not cps:
        raise ValueError("checkpoint list is empty")
    if cps[0] < 1 or cps[-1] > horizon:
        raise ValueError(f"checkpoints must lie in [1, {horizon}], got {cps[0]}..{cps[-1]}")
    return cps


def _initial_x(box):
    return box.project(np.zeros(box.dim))


def _initial_z(params, num_constraints):
    if params.z_init is None:
        return np.zeros(num_constraints)
    z = np.asarray(params.z_init, dtype=float).copy()
    if z.shape != (num_constraints,):
        raise ValueError(f"z_init shape {z.shape} does not match {num_constraints} constraints")
    if np.any(z < 0):
        raise ValueError("z_init must be non-negative")
    return z


def aprid_run(problem, params, batches, seed, checkpoints=None, f0_ref=None,
              timing="algo") -> RunResult:
    """Full adaptive primal-dual run on a constrained problem.

    Evaluates the ergodic average at each checkpoint on a fresh evaluation
    stream derived from ``seed``; with ``timing='algo'`` (default) that
    evaluation cost is excluded from ``wall_s``.

    Raises DivergenceError (carrying the completed checkpoint records) when
    the multiplier norm passes ``params.divergence_cap`` or any iterate goes
    non-finite.
    """
    if timing not in ("algo", "total"):
        raise ValueError(f"timing must be 'algo' or 'total', got {timing!r}")
    schedule = params.schedule.fresh()
    horizon = schedule.horizon
    cps = _resolve_checkpoints(checkpoints, horizon)
    cpset = set(cps)
    pstate = PrimalState.fresh(_initial_x(problem.box))
    dstate = DualState(z=_initial_z(params, problem.num_constraints))
    avg_x = ErgodicAverager(params.beta1)
    avg_z = ErgodicAverager(params.beta1)
    rng = training_rng(seed)
    records = []
    wall = 0.0
    for k in range(1, horizon + 1):
        tic = time.perf_counter()
        alpha_k, rho_k = schedule.next()
        sample = sample_lagrangian_subgradient(problem, pstate.x, dstate.z, batches, rng)
        avg_x.push(pstate.x, alpha_k)
        avg_z.push(dstate.z, alpha_k)
        try:
            aprid_step(pstate, dstate, sample, alpha_k, rho_k, params, problem.box)
        except DivergenceError as exc:
            exc.iteration = k
            exc.partial_records = records
            raise
        znorm = float(np.linalg.norm(dstate.z))
        if znorm > params.divergence_cap:
            raise DivergenceError(
                f"multiplier norm {znorm:.3e} exceeded divergence cap at step {k}",
                iteration=k, partial_records=records,
            )
        wall += time.perf_counter() - tic
        if k in cpset:
            x_bar = avg_x.finalize()
            tic = time.perf_counter()
            ev = problem.evaluate_full(x_bar, seed=eval_seed(seed, k))
            if timing == "total":
                wall += time.perf_counter() - tic
            err = abs(ev.objective - f0_ref) if f0_ref is not None else float("nan")
            records.append(CheckpointRecord(
                iteration=k, wall_s=wall, obj_err=err,
                viol_avg=ev.viol_avg, viol_max=ev.viol_max,
                objective=ev.objective,
            ))
    return RunResult(
        algorithm="aprid", seed=seed, records=records,
        x_bar=avg_x.finalize(), z_bar=avg_z.finalize(), wall_total=wall,
    )


# ---------------------------------------------------------------------------
# minimax variant


@dataclass
class MinimaxState:
    """Joint saddle iterate; momentum and second moments are stacked over
    the (x, z) blocks so the adaptive scaling is applied blockwise."""

    x: np.ndarray
    z: np.ndarray
    m: np.ndarray
    v: np.ndarray
    v_hat: np.ndarray

    @classmethod
    def fresh(cls, x0, z0):
        x0 = np.asarray(x0, dtype=float).copy()
        z0 = np.asarray(z0, dtype=float).copy()
        joint = np.zeros(x0.size + z0.size)
        return cls(x=x0, z=z0, m=joint.copy(), v=joint.copy(), v_hat=joint.copy())


def apriad_step(state, sample, alpha_k, rho_k, params, box_x, box_z):
    """One adaptive descent-ascent update in place; returns the state."""
    b1, b2 = params.beta1, params.beta2
    n = state.x.size
    g = np.concatenate([sample.u, sample.w])
    state.m = b1 * state.m + (1.0 - b1) * g
    if params.adaptive:
        # each block is clipped to theta separately
        g_hat = np.concatenate([
            clip_gradient(sample.u, params.theta),
            clip_gradient(sample.w, params.theta),
        ])
        state.v = b2 * state.v + (1.0 - b2) * (g_hat * g_hat)
        state.v_hat = np.maximum(state.v_hat, state.v)
        root, direction = _scaled_direction(state.m, state.v_hat)
    else:
        root = np.ones_like(state.m)
        direction = state.m
    state.x = project_box_weighted(state.x - alpha_k * direction[:n], box_x, root[:n])
    state.z = project_box_weighted(state.z + rho_k * direction[n:], box_z, root[n:])
    return state


def apriad_run(problem, params, seed, checkpoints=None, timing="algo") -> RunResult:
    """Adaptive descent-ascent on a saddle problem.

    Only the ``constant`` and ``sqrt`` schedule kinds keep the primal and
    dual steps proportional, which the analysis of this variant assumes; a
    schedule with a drifting alpha/rho ratio is accepted with a warning.
    Checkpoints record the exact primal-dual gap of the averaged pair.
    """
    if timing not in ("algo", "total"):
        raise ValueError(f"timing must be 'algo' or 'total', got {timing!r}")
    schedule = params.schedule.fresh()
    ratios = schedule.alpha_sequence() / schedule.rho_sequence()
    if ratios.max() - ratios.min() > 1e-9 * abs(ratios[0]):
        warnings.warn(
            f"schedule kind {schedule.kind!r} does not keep alpha_k/rho_k constant; "
            "the minimax solver's guarantees assume proportional steps",
            stacklevel=2,
        )
    horizon = schedule.horizon
    cps = _resolve_checkpoints(checkpoints, horizon)
    cpset = set(cps)
    state = MinimaxState.fresh(_initial_x(problem.box_x), _initial_x(problem.box_z))
    avg_x = ErgodicAverager(params.beta1)
    avg_z = ErgodicAverager(params.beta1)
    rng = training_rng(seed)
    records = []
    wall = 0.0
    for k in range(1, horizon + 1):
        tic = time.perf_counter()
        alpha_k, rho_k = schedule.next()
        sample = sample_minimax_subgradient(problem, state.x, state.z, rng)
        avg_x.push(state.x, alpha_k)
        avg_z.push(state.z, alpha_k)
        apriad_step(state, sample, alpha_k, rho_k, params, problem.box_x, problem.box_z)
        if not (np.all(np.isfinite(state.m)) and np.all(np.isfinite(state.v))):
            raise DivergenceError("non-finite accumulator state",
                                  iteration=k, partial_records=records)
        wall += time.perf_counter() - tic
        if k in cpset:
            tic = time.perf_counter()
            gap = primal_dual_gap(problem, avg_x.finalize(), avg_z.finalize())
            if timing == "total":
                wall += time.perf_counter() - tic
            records.append(CheckpointRecord(iteration=k, wall_s=wall, gap=gap))
    return RunResult(
        algorithm="apriad", seed=seed, records=records,
        x_bar=avg_x.finalize(), z_bar=avg_z.finalize(), wall_total=wall,
    )


def primal_dual_gap(problem, x_bar, z_bar) -> float:
    """Exact saddle gap ``max_z L(x_bar, z) - min_x L(x, z_bar)``.

    Needs a problem with exact inner maximization/minimization (bilinear
    objectives over boxes qualify); anything else cannot report this metric
    and raises.
    """
    if not hasattr(problem, "gap"):
        raise NotImplementedError(
            f"problem kind {getattr(problem, 'kind', '?')!r} has no exact inner "
            "solver; the primal-dual gap is unavailable"
        )
    return float(problem.gap(x_bar, z_bar))
