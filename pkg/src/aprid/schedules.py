"""Primal/dual step-size schedules and the streaming ergodic averager.

A schedule emits, for ``k = 1..horizon``, a primal step ``alpha_k`` and a dual
step ``rho_k``. The dual step is coupled to the primal sequence through the
recursion

    eta_k = (eta_{k-1} - alpha_{k-1}) / beta1,
    rho_k = rho_{k-1} / (beta1 + alpha_{k-1} / eta_k),        k >= 2,

seeded with ``eta_1 = alpha_1 / (1 - beta1)`` for constant steps (where the
recursion is stationary and ``rho_k`` stays exactly ``rho_1``) and with the
finite sum ``eta_1 = sum_i alpha_i beta1^(i-1)`` otherwise. The recursion is
evaluated here through the algebraically identical tail sums

    eta_k = sum_{i=k}^{horizon} alpha_i beta1^(i-k),

accumulated backwards, because the forward form divides accumulated rounding
error by ``beta1`` at every step and turns to noise after a few hundred
iterations. Within the horizon every ``eta_k`` is a sum of positive terms, so
the recursion's division stays well defined; stepping past the horizon is the
state where it would not be, and raises.
"""

import numpy as np

from .errors import ScheduleExhaustedError

__all__ = ["StepSchedule", "ErgodicAverager"]


def _tail_sums(alphas, beta1):
    # eta_k = alpha_k + beta1 * eta_{k+1}, accumulated from the horizon down.
    etas = np.empty_like(alphas)
    acc = 0.0
    for i in range(alphas.size - 1, -1, -1):
        acc = alphas[i] + beta1 * acc
        etas[i] = acc
    return etas


def _recursion_rhos(alphas, etas, rho1, beta1):
    rhos = np.empty_like(alphas)
    rhos[0] = rho1
    for i in range(1, alphas.size):
        rhos[i] = rhos[i - 1] / (beta1 + alphas[i - 1] / etas[i])
    return rhos


class StepSchedule:
    """Precomputed (alpha_k, rho_k) sequence with a step cursor.

    Instances are single-use state machines: ``next()`` emits the pair for
    the current ``step_index`` and advances; asking for more steps than
    ``horizon`` raises. ``fresh()`` returns a rewound copy so one parameter
    object can drive many runs.

    Construct through the classmethods:

    * ``constant(alpha, rho, horizon, beta1)``:
      ``alpha_k = alpha/sqrt(horizon)``, ``rho_k = rho/sqrt(horizon)``.
    * ``sqrt_log(alpha, rho, horizon, beta1)``:
      ``alpha_k = alpha / (sqrt(k+1) log(k+1))``, ``rho_1 = rho/(sqrt(2) log 2)``
      and the recursion above for later ``rho_k``.
    * ``sqrt(alpha, rho, horizon, beta1)`` (minimax solver):
      ``alpha_k = alpha/sqrt(k+1)`` and ``rho_k = rho/sqrt(k+1)`` directly,
      proportional steps with no recursion.
    * ``from_sequence(alphas, rho1, beta1)``: any positive non-increasing
      primal sequence, dual steps from the recursion.
    """

    KINDS = ("constant", "sqrt_log", "sqrt", "custom")

    def __init__(self, kind, beta1, alphas, rhos, etas):
        if kind not in self.KINDS:
            raise ValueError(f"unknown schedule kind {kind!r}")
        beta1 = _check_beta1(beta1)
        alphas = _check_alphas(alphas)
        if np.any(etas <= 0):
            raise ValueError("dual-step recursion seed must stay positive")
        self.kind = kind
        self.beta1 = beta1
        self._alphas = alphas
        self._rhos = np.asarray(rhos, dtype=float)
        self._etas = np.asarray(etas, dtype=float)
        self.step_index = 1

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, alpha, rho, horizon, beta1):
        horizon = _check_horizon(horizon)
        _check_scales(alpha, rho)
        beta1 = _check_beta1(beta1)
        a = float(alpha) / np.sqrt(horizon)
        r = float(rho) / np.sqrt(horizon)
        alphas = np.full(horizon, a)
        rhos = np.full(horizon, r)
        # Stationary point of the recursion: eta_k = alpha/(1-beta1) for all k.
        etas = np.full(horizon, a / (1.0 - beta1))
        return cls("constant", beta1, alphas, rhos, etas)

    @classmethod
    def sqrt_log(cls, alpha, rho, horizon, beta1):
        horizon = _check_horizon(horizon)
        _check_scales(alpha, rho)
        beta1 = _check_beta1(beta1)
        k = np.arange(1, horizon + 1, dtype=float)
        alphas = float(alpha) / (np.sqrt(k + 1.0) * np.log(k + 1.0))
        etas = _tail_sums(alphas, beta1)
        rho1 = float(rho) / (np.sqrt(2.0) * np.log(2.0))
        rhos = _recursion_rhos(alphas, etas, rho1, beta1)
        return cls("sqrt_log", beta1, alphas, rhos, etas)

    @classmethod
    def sqrt(cls, alpha, rho, horizon, beta1):
        horizon = _check_horizon(horizon)
        _check_scales(alpha, rho)
        beta1 = _check_beta1(beta1)
        k = np.arange(1, horizon + 1, dtype=float)
        alphas = float(alpha) / np.sqrt(k + 1.0)
        rhos = float(rho) / np.sqrt(k + 1.0)
        etas = _tail_sums(alphas, beta1)
        return cls("sqrt", beta1, alphas, rhos, etas)

    @classmethod
    def from_sequence(cls, alphas, rho1, beta1):
        alphas = _check_alphas(alphas)
        beta1 = _check_beta1(beta1)
        if not rho1 > 0:
            raise ValueError(f"rho1 must be positive, got {rho1!r}")
        etas = _tail_sums(alphas, beta1)
        rhos = _recursion_rhos(alphas, etas, float(rho1), beta1)
        return cls("custom", beta1, alphas, rhos, etas)

    # -- state machine ----------------------------------------------------

    @property
    def horizon(self) -> int:
        return self._alphas.size

    @property
    def eta_current(self) -> float:
        """eta at the step the next ``next()`` call will emit."""
        self._check_live()
        return float(self._etas[self.step_index - 1])

    @property
    def rho_current(self) -> float:
        self._check_live()
        return float(self._rhos[self.step_index - 1])

    @property
    def alpha_current(self) -> float:
        self._check_live()
        return float(self._alphas[self.step_index - 1])

    def next(self):
        """Emit ``(alpha_k, rho_k)`` for the current step and advance."""
        self._check_live()
        i = self.step_index - 1
        self.step_index += 1
        return float(self._alphas[i]), float(self._rhos[i])

    def _check_live(self):
        if self.step_index > self.horizon:
            raise ScheduleExhaustedError(
                f"schedule of horizon {self.horizon} has no step {self.step_index}"
            )

    def fresh(self):
        """A rewound copy sharing the precomputed sequences."""
        twin = object.__new__(StepSchedule)
        twin.kind = self.kind
        twin.beta1 = self.beta1
        twin._alphas = self._alphas
        twin._rhos = self._rhos
        twin._etas = self._etas
        twin.step_index = 1
        return twin

    # Copies of the full sequences, mainly for tests and reports.

    def alpha_sequence(self):
        return self._alphas.copy()

    def rho_sequence(self):
        return self._rhos.copy()

    def eta_sequence(self):
        return self._etas.copy()

    def __repr__(self):
        return (
            f"StepSchedule(kind={self.kind!r}, horizon={self.horizon}, "
            f"beta1={self.beta1}, step_index={self.step_index})"
        )


def _check_horizon(horizon):
    if int(horizon) != horizon or horizon < 1:
        raise ValueError(f"horizon must be a positive integer, got {horizon!r}")
    return int(horizon)


def _check_beta1(beta1):
    if not 0 <= beta1 < 1:
        raise ValueError(f"beta1 must lie in [0, 1), got {beta1!r}")
    return float(beta1)


def _check_alphas(alphas):
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim != 1 or alphas.size == 0:
        raise ValueError("schedule needs a non-empty 1-d step sequence")
    if np.any(alphas <= 0) or not np.all(np.isfinite(alphas)):
        raise ValueError("primal steps must be positive and finite")
    if np.any(np.diff(alphas) > 0):
        raise ValueError("primal step sequence must be non-increasing")
    return alphas


def _check_scales(alpha, rho):
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")


class ErgodicAverager:
    """Streaming weighted average with geometrically fading inner weights.

    After pushing ``(x_1, alpha_1), ..., (x_t, alpha_t)`` the average is

        xbar_t = sum_j ( sum_{k=j}^t alpha_k beta1^(k-j) ) x_j
                 / sum_j ( sum_{k=j}^t alpha_k beta1^(k-j) ),

    maintained in O(dim) per push: the inner sums over k shift by one power
    of beta1 whenever t grows, so a running geometric accumulator of the
    iterates (``geo_vec``, with scalar counterpart ``geo_scalar``) folds the
    double sum into single updates. With ``beta1 = 0`` this degenerates to
    the plain alpha-weighted running average.

    ``finalize`` is non-destructive: pushing may continue afterwards, which
    is how solvers report every checkpoint from one accumulator.
    """

    def __init__(self, beta1):
        if not 0 <= beta1 < 1:
            raise ValueError(f"beta1 must lie in [0, 1), got {beta1!r}")
        self.beta1 = float(beta1)
        self.weighted_sum = None
        self.geo_vec = None
        self.normalizer = 0.0
        self.geo_scalar = 0.0
        self.count = 0

    def push(self, x, alpha):
        if not alpha > 0:
            raise ValueError(f"step weight must be positive, got {alpha!r}")
        x = np.asarray(x, dtype=float)
        if self.weighted_sum is None:
            self.weighted_sum = np.zeros_like(x)
            self.geo_vec = np.zeros_like(x)
        elif x.shape != self.geo_vec.shape:
            raise ValueError(f"iterate shape changed: {self.geo_vec.shape} -> {x.shape}")
        self.geo_vec *= self.beta1
        self.geo_vec += x
        self.geo_scalar = self.beta1 * self.geo_scalar + 1.0
        self.weighted_sum += alpha * self.geo_vec
        self.normalizer += alpha * self.geo_scalar
        self.count += 1

    def finalize(self):
        if self.count == 0:
            raise ValueError("cannot average before any iterate was pushed")
        return self.weighted_sum / self.normalizer
