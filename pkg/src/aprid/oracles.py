"""Stochastic first-order oracles over Problem objects.

All solvers talk to problems exclusively through the functions here. A
problem (duck-typed; see ``aprid.problems``) exposes raw per-draw samples;
this layer assembles them into unbiased estimates of

* the primal Lagrangian subgradient  u ~ d/dx [ f0(x) + z . f(x) ],
* the constraint values              w ~ f(x),

with the ``M/|S|`` importance reweighting whenever only a subset ``S`` of the
``M`` constraints is sampled, and of the aggregate violation used by the
switching baseline.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BatchSizes",
    "GradSample",
    "sample_lagrangian_subgradient",
    "estimate_constraint_value",
    "constraint_step_direction",
    "sample_minimax_subgradient",
]


@dataclass(frozen=True)
class BatchSizes:
    """Per-iteration draw counts: objective (j0), constraint-gradient (j1),
    constraint-value (jg, the switching estimate)."""

    j0: int = 10
    j1: int = 10
    jg: int = 100

    def __post_init__(self):
        for name in ("j0", "j1", "jg"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"batch size {name} must be a positive integer, got {v!r}")


@dataclass
class GradSample:
    """One oracle draw.

    ``u`` is the primal estimate (dim n). ``w`` is the dual-side estimate
    (dim M); when ``w_support`` is present only those coordinates were
    sampled and every coordinate outside it is exactly zero.
    """

    u: np.ndarray
    w: np.ndarray
    w_support: np.ndarray | None = field(default=None)


def sample_lagrangian_subgradient(problem, x, z, batches, rng) -> GradSample:
    """Unbiased stochastic subgradient of the Lagrangian at ``(x, z)``.

    Draws ``batches.j0`` objective samples and ``batches.j1`` constraint
    samples (a subset ``S`` of constraint indices for finite families), then
    assembles

        u = u0 + (M/|S|) * sum_{j in S} z_j * uhat_j,
        w_j = (M/|S|) * (batched estimate of f_j(x))   for j in S, else 0.

    The reweighting keeps both estimates unbiased under uniform subsampling.
    """
    z = np.asarray(z, dtype=float)
    m = problem.num_constraints
    if z.shape != (m,):
        raise ValueError(f"multiplier shape {z.shape} does not match {m} constraints")
    u0 = problem.sample_objective_grad(x, batches.j0, rng)
    support, values, grads = problem.sample_constraint_block(x, batches.j1, rng)
    support = np.asarray(support, dtype=int)
    scale = m / support.size
    u = u0 + scale * (z[support] @ grads)
    w = np.zeros(m)
    w[support] = scale * np.asarray(values, dtype=float)
    w_support = support if support.size < m else None
    return GradSample(u=u, w=w, w_support=w_support)


def estimate_constraint_value(problem, x, jg, rng) -> float:
    """Unbiased estimate of the aggregate constraint value at ``x``.

    Single-constraint problems return a batched estimate of the constraint
    function itself (which may be negative); families of ``M`` constraints
    return ``(M/jg) * sum_{j in S} [f_j(x)]_+`` over a sampled index set.
    """
    if jg < 1:
        raise ValueError(f"jg must be a positive integer, got {jg!r}")
    return float(problem.constraint_value_estimate(x, jg, rng))


def constraint_step_direction(problem, x, j1, rng) -> np.ndarray:
    """Stochastic subgradient of the aggregate constraint at ``x``.

    Single-constraint problems return the batched constraint subgradient;
    families return ``(M/|S|) * sum_{j in S} 1{fhat_j > 0} grad f_j(x)``
    (a zero estimate contributes nothing, matching the subdifferential of
    the positive part at a tie).
    """
    support, values, grads = problem.sample_constraint_block(x, j1, rng)
    scale = problem.num_constraints / len(support)
    if problem.num_constraints == 1:
        return scale * np.asarray(grads, dtype=float)[0]
    active = (np.asarray(values, dtype=float) > 0).astype(float)
    return scale * (active @ grads)


def sample_minimax_subgradient(problem, x, z, rng) -> GradSample:
    """Noisy gradient pair for a saddle problem: ``u`` for the minimization
    block, ``w`` for the maximization block (no subsampling support)."""
    u, w = problem.sample_grads(x, z, rng)
    return GradSample(u=np.asarray(u, dtype=float), w=np.asarray(w, dtype=float), w_support=None)
