"""The incremental cross-entropy optimizer (algorithm id: ce2nd).

One objective evaluation per iteration drives four coupled stochastic
recursions sharing a single step-size sequence:

* ``gamma``       -- tracks the (1-rho)-quantile of H under the current
                     sampling mixture via the subgradient of the pinball loss;
* ``xi0``,``xi1`` -- track the weighted elite mean and the weighted elite
                     second moment (the two ratios the batch method estimates
                     by sample averages);
* ``gamma_prev``  -- re-estimates the previous model's quantile from extra
                     draws so the two thresholds stay comparable;
* ``tcmp``        -- a geometric average of +/-1 comparison outcomes; the
                     model parameters move only when it clears the confidence
                     ceiling, which certifies that the current threshold has
                     overtaken the previous model's.

Elite weights are exp(r*(h - shift)) with shift the running maximum of all
observed values.  The shift leaves the tracker fixed points untouched (both
are ratios of weighted expectations) while keeping exp() in range for
objectives whose scale would otherwise overflow it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gaussian import GaussianParams, RngState
from .objectives import ObjectiveFunction
from .trace import TraceRecord

Array = np.ndarray

_NEG_INF = float("-inf")
_ONE_INSIDE = math.nextafter(1.0, 0.0)


class DivergenceError(RuntimeError):
    """Raised when an update produces a non-finite state or an overflowing weight.

    Carries the last consistent state snapshot; a too-aggressive weight
    exponent is the documented way to get here.
    """

    def __init__(self, message: str, state: Optional["Ce2ndState"] = None):
        super().__init__(message)
        self.state = state


# ---------------------------------------------------------------------------
# Schedules


@dataclass(frozen=True)
class Schedule:
    """One tunable sequence: a constant or a power decay.

    ``kind`` is "constant" (use ``value`` everywhere) or "power"
    (``base**-value`` with the base clamped to >= 1; which base applies --
    the iteration count or the last model-update index -- is decided by the
    owning slot).  ``initial`` is only read by the mixing-weight slot, for
    the stretch before the first model update defines an update index.
    """

    kind: str
    value: float
    initial: float = 0.1

    def __post_init__(self):
        if self.kind not in ("constant", "power"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @staticmethod
    def constant(value: float) -> "Schedule":
        return Schedule("constant", float(value))

    @staticmethod
    def power(exponent: float, initial: float = 0.1) -> "Schedule":
        return Schedule("power", float(exponent), float(initial))

    def at(self, base: int) -> float:
        if self.kind == "constant":
            return self.value
        return max(base, 1) ** (-self.value)


@dataclass
class Schedules:
    """Every tunable of the incremental optimizer.

    rho        quantile parameter in (0,1)
    eps1       confidence ceiling; 1.0 is accepted as "never update"
    r          weight exponent, > 0
    beta       step-size sequence (shared by all recursions)
    c          comparison gain installed at each model update
    lam        mixing weight toward the initial distribution
    k_gamma    gain >= 1 multiplying the quantile increments
    q          initial covariance scale (sigma0 = q I)
    projection clamp thresholds into [H_l - 1, H_u + 1] when bounds exist
    beta_index "iteration" or "update": which counter a power beta decays in
    """

    rho: float
    eps1: float
    r: float
    beta: Schedule
    c: Schedule
    lam: Schedule
    k_gamma: float = 1.0
    q: float = 1.0
    projection: bool = True
    beta_index: str = "iteration"

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0,1), got {self.rho}")
        if not 0.0 < self.eps1 <= 1.0:
            raise ValueError(f"eps1 must be in (0,1], got {self.eps1}")
        if not self.r > 0.0:
            raise ValueError(f"r must be positive, got {self.r}")
        if not self.k_gamma >= 1.0:
            raise ValueError(f"k_gamma must be >= 1, got {self.k_gamma}")
        if not self.q > 0.0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.beta_index not in ("iteration", "update"):
            raise ValueError(f"beta_index must be 'iteration' or 'update', got {self.beta_index}")
        if self.beta.kind == "constant" and not self.beta.value > 0:
            raise ValueError("constant beta must be positive")
        if self.beta.kind == "power" and not self.beta.value > 0:
            raise ValueError("power beta needs a positive exponent")
        if self.c.kind == "constant" and not 0.0 < self.c.value < 1.0:
            raise ValueError(f"c must be in (0,1), got {self.c.value}")
        if self.lam.kind == "constant" and not 0.0 <= self.lam.value < 1.0:
            raise ValueError(f"lambda must be in [0,1), got {self.lam.value}")
        if self.lam.kind == "power" and not 0.0 <= self.lam.initial < 1.0:
            raise ValueError(f"initial lambda must be in [0,1), got {self.lam.initial}")

    def beta_at(self, t: int, t_last_update: int) -> float:
        base = t if self.beta_index == "iteration" else max(t_last_update, 1)
        return self.beta.at(base)

    def c_at(self, t: int) -> float:
        return self.c.at(t)

    def lam_at(self, n_updates: int, t_last_update: int) -> float:
        if self.lam.kind == "constant":
            return self.lam.value
        if n_updates == 0:
            return self.lam.initial
        # capped by the configured initial value so the weight stays in [0,1)
        return min(self.lam.initial, self.lam.at(t_last_update))

    def validate(self) -> None:
        """Emit the step-size caveat the square-summability condition implies.

        Several published parameterizations use constant steps; they are
        accepted, with a warning, since the fixed points are unchanged and
        only the asymptotic averaging argument needs the decaying family.
        """
        ok = self.beta.kind == "power" and 0.5 < self.beta.value <= 1.0
        if not ok:
            warnings.warn(
                "step-size schedule is not of the t^-a family with a in (0.5, 1]; "
                "divergent-sum/square-summable conditions are not guaranteed",
                UserWarning,
                stacklevel=2,
            )


# ---------------------------------------------------------------------------
# Elementary update rules


def s_weight(h: float, r: float, shift: float = _NEG_INF) -> float:
    """Elite weight exp(r*(h - shift)).

    ``shift`` is the running maximum of observed values; the first
    observation (shift still -inf) defines the scale and weighs 1.  Raises
    OverflowError when a new value exceeds the shift by enough to overflow,
    which signals an r too large for the objective's scale.
    """
    if shift == _NEG_INF:
        return 1.0
    try:
        return math.exp(r * (h - shift))
    except OverflowError:
        raise OverflowError(
            f"weight exp({r} * ({h} - {shift})) overflows; r is too large for this objective"
        ) from None


def delta_gamma(h: float, gamma: float, rho: float) -> float:
    """Pinball-loss subgradient driving the quantile tracker.

    Ties (h == gamma) fire both indicators, a valid subdifferential pick.
    """
    if h > gamma:
        return -(1.0 - rho)
    if h < gamma:
        return rho
    return 2.0 * rho - 1.0


def g0(h: float, gamma: float, r: float, shift: float = _NEG_INF) -> float:
    """Weighted elite indicator S(h) * I{h >= gamma}."""
    return s_weight(h, r, shift) if h >= gamma else 0.0


def g1(h: float, x, gamma: float, r: float, shift: float = _NEG_INF) -> Array:
    """First-moment integrand g0 * x."""
    return g0(h, gamma, r, shift) * np.asarray(x, dtype=float)


def g2(h: float, x, gamma: float, mu, r: float, shift: float = _NEG_INF) -> Array:
    """Second-moment integrand g0 * (x - mu)(x - mu)^T."""
    d = np.asarray(x, dtype=float) - np.asarray(mu, dtype=float)
    return g0(h, gamma, r, shift) * np.outer(d, d)


def update_tcmp(tcmp: float, c: float, gamma_gt: bool) -> float:
    """One comparison step: (1-c)*tcmp + c*(+1 or -1), kept inside (-1, 1).

    The convex combination stays in the open interval in exact arithmetic;
    rounding can land exactly on +/-1 after a long one-sided streak, so the
    result is nudged back to the nearest interior float.
    """
    v = tcmp + c * ((1.0 if gamma_gt else -1.0) - tcmp)
    if v >= 1.0:
        return _ONE_INSIDE
    if v <= -1.0:
        return -_ONE_INSIDE
    return v


# ---------------------------------------------------------------------------
# State machine


@dataclass
class Ce2ndState:
    """Everything the recursion carries between iterations."""

    theta: GaussianParams
    theta0: GaussianParams
    rng: RngState
    c: float
    gamma: float = 0.0
    gamma_prev: float = _NEG_INF
    xi0: Array = field(default=None)  # type: ignore[assignment]
    xi1: Array = field(default=None)  # type: ignore[assignment]
    tcmp: float = 0.0
    theta_prev: Optional[GaussianParams] = None
    t: int = 0
    n_updates: int = 0
    t_last_update: int = 0
    shift: float = _NEG_INF

    def __post_init__(self):
        m = self.theta.m
        if self.xi0 is None:
            self.xi0 = np.zeros(m)
        if self.xi1 is None:
            self.xi1 = np.zeros((m, m))


def init_state(
    theta0: GaussianParams,
    schedules: Schedules,
    rng: RngState,
    theta: Optional[GaussianParams] = None,
) -> Ce2ndState:
    """Fresh state: zero trackers, previous model unset, c = c_0."""
    return Ce2ndState(
        theta=theta if theta is not None else theta0,
        theta0=theta0,
        rng=rng,
        c=schedules.c_at(1),
    )


def _mixture_draw(params: GaussianParams, theta0: GaussianParams, lam: float, rng: RngState) -> Array:
    # one uniform (always consumed, so the stream layout is lam-independent),
    # then m standard normals
    p = theta0 if rng.uniform() < lam else params
    return p.mu + p.factor() @ rng.standard_normal(p.m)


def step(state: Ce2ndState, objective: ObjectiveFunction, schedules: Schedules) -> Ce2ndState:
    """Advance the recursion by one iteration (mutates and returns ``state``).

    Draws one point from the current mixture (plus one from the previous
    model's mixture once it exists), then updates gamma, xi0, xi1, the
    previous-threshold tracker, the comparison variable, and -- when the
    comparison clears the ceiling -- the model itself.
    """
    t_next = state.t + 1
    beta = schedules.beta_at(t_next, state.t_last_update)
    lam = schedules.lam_at(state.n_updates, state.t_last_update)
    rho = schedules.rho
    kb = schedules.k_gamma * beta

    clamp_lo = clamp_hi = None
    if schedules.projection:
        if objective.lower_value is not None:
            clamp_lo = objective.lower_value - 1.0
        if objective.upper_value is not None:
            clamp_hi = objective.upper_value + 1.0

    x = _mixture_draw(state.theta, state.theta0, lam, state.rng)
    h = objective.evaluate(x)
    try:
        w = s_weight(h, schedules.r, state.shift)
    except OverflowError as exc:
        raise DivergenceError(str(exc), state) from None
    if h > state.shift:
        state.shift = h

    gamma_old = state.gamma
    gamma_new = gamma_old - kb * delta_gamma(h, gamma_old, rho)
    if clamp_lo is not None and gamma_new < clamp_lo:
        gamma_new = clamp_lo
    if clamp_hi is not None and gamma_new > clamp_hi:
        gamma_new = clamp_hi

    # Moment trackers use the pre-update threshold and center; a miss of the
    # elite indicator contributes an exactly-zero increment.
    xi0_prev = state.xi0
    xi1_prev = state.xi1
    if h >= gamma_old:
        bw = beta * w
        d = x - xi0_prev
        state.xi0 = xi0_prev + bw * d
        state.xi1 = xi1_prev + bw * (np.outer(d, d) - xi1_prev)

    gamma_prev_new = state.gamma_prev
    if state.theta_prev is not None:
        xp = _mixture_draw(state.theta_prev, state.theta0, lam, state.rng)
        hp = objective.evaluate(xp)
        if hp > state.shift:
            state.shift = hp
        gamma_prev_new = gamma_prev_new - kb * delta_gamma(hp, gamma_prev_new, rho)
        if clamp_lo is not None and gamma_prev_new < clamp_lo:
            gamma_prev_new = clamp_lo
        if clamp_hi is not None and gamma_prev_new > clamp_hi:
            gamma_prev_new = clamp_hi

    tcmp_new = update_tcmp(state.tcmp, state.c, gamma_new > gamma_prev_new)

    if tcmp_new > schedules.eps1:
        # Install the pre-iteration model as "previous", move the model toward
        # the pre-iteration trackers, and start a fresh comparison.
        theta_old = state.theta
        state.theta_prev = theta_old
        gamma_prev_new = gamma_old
        sym = (xi1_prev + xi1_prev.T) / 2.0
        try:
            state.theta = GaussianParams(
                theta_old.mu + beta * (xi0_prev - theta_old.mu),
                theta_old.sigma + beta * (sym - theta_old.sigma),
            )
        except ValueError as exc:
            raise DivergenceError(f"model update produced non-finite parameters: {exc}", state) from None
        tcmp_new = 0.0
        state.n_updates += 1
        state.t_last_update = t_next
        state.c = schedules.c_at(t_next)

    state.gamma = gamma_new
    state.gamma_prev = gamma_prev_new
    state.tcmp = tcmp_new
    state.t = t_next

    if not (math.isfinite(gamma_new) and np.isfinite(state.xi0).all() and np.isfinite(state.xi1).all()):
        raise DivergenceError(f"non-finite tracker state at t={t_next}", state)
    return state


# ---------------------------------------------------------------------------
# Driver


@dataclass
class RunResult:
    records: list
    state: Ce2ndState
    reason: str  # "max_evals" | "max_updates" | "degenerate" | "diverged"
    error: Optional[str] = None

    @property
    def diverged(self) -> bool:
        return self.reason == "diverged"


def _record(state: Ce2ndState, objective: ObjectiveFunction) -> TraceRecord:
    mu = state.theta.mu
    h_mu = objective.evaluate_unmetered(mu) if np.isfinite(mu).all() else float("nan")
    return TraceRecord(
        t=state.t,
        n_evals=objective.n_evals,
        n_updates=state.n_updates,
        H_of_mu=h_mu,
        gamma=state.gamma,
        gamma_prev=state.gamma_prev,
        tcmp=state.tcmp,
        sigma_trace=float(np.trace(state.theta.sigma)),
    )


def run(
    objective: ObjectiveFunction,
    schedules: Schedules,
    theta0: GaussianParams,
    rng: RngState,
    max_evals: int,
    max_updates: Optional[int] = None,
    stride: int = 1,
    degeneracy_eps: float = 1e-12,
) -> RunResult:
    """Iterate ``step`` until a stopping rule fires.

    Stops on the evaluation budget, the model-update budget, covariance
    degeneracy (largest |entry| below ``degeneracy_eps``), or divergence;
    divergence preserves the partial trace.  One trace row is kept every
    ``stride`` iterations plus the final row.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    state = init_state(theta0, schedules, rng)
    records: list[TraceRecord] = []
    reason = "max_evals"
    error = None
    seen_updates = -1  # sigma only changes at model updates; recheck then
    while True:
        if objective.n_evals >= max_evals:
            reason = "max_evals"
            break
        if max_updates is not None and state.n_updates >= max_updates:
            reason = "max_updates"
            break
        try:
            step(state, objective, schedules)
        except DivergenceError as exc:
            reason = "diverged"
            error = str(exc)
            break
        if state.t % stride == 0:
            records.append(_record(state, objective))
        if state.n_updates != seen_updates:
            seen_updates = state.n_updates
            if np.abs(state.theta.sigma).max() < degeneracy_eps:
                reason = "degenerate"
                break
    if state.t > 0 and (not records or records[-1].t != state.t):
        records.append(_record(state, objective))
    return RunResult(records=records, state=state, reason=reason, error=error)
