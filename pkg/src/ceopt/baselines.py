"""Batch cross-entropy baselines: plain Monte-Carlo CE and its gradient variant.

Both draw a growing batch from the current Gaussian each iteration, take the
sample (1-rho)-quantile as the threshold, and refit the model from weighted
elite averages.  The plain method accepts a new threshold only when it beats
the incumbent by a margin eps; the gradient variant skips the margin test but
blends the refit with the previous model through a smoothing weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ce2nd import Schedule
from .gaussian import GaussianParams, RngState, sample_gaussian_batch
from .objectives import ObjectiveFunction
from .trace import TraceRecord

Array = np.ndarray


@dataclass
class MonteCarloConfig:
    """Tunables of the batch methods.

    n0     initial batch size
    eta    batch growth factor (N_{t+1} = ceil(eta * N_t))
    eps    acceptance margin for the threshold (plain method only)
    rho    quantile parameter
    r      weight exponent; 0 gives unit weights
    alpha  smoothing schedule (gradient variant only)
    """

    n0: int
    eta: float
    rho: float
    r: float
    eps: float = 0.0
    alpha: Optional[Schedule] = None

    def __post_init__(self):
        if self.n0 < 1:
            raise ValueError(f"n0 must be >= 1, got {self.n0}")
        if not self.eta >= 1.0:
            raise ValueError(f"eta must be >= 1, got {self.eta}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0,1), got {self.rho}")
        if self.r < 0.0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if self.eps < 0.0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.alpha is not None and self.alpha.kind == "constant" and not 0.0 < self.alpha.value <= 1.0:
            raise ValueError(f"alpha must be in (0,1], got {self.alpha.value}")


def sample_quantile(values, rho: float) -> float:
    """The ceil((1-rho)N)-th smallest value (1-based order statistic).

    Selection, not a full sort: only the needed order statistic is placed.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise ValueError("cannot take a quantile of an empty batch")
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must be in (0,1), got {rho}")
    k = math.ceil((1.0 - rho) * n)
    k = min(max(k, 1), n)
    return float(np.partition(values, k - 1)[k - 1])


def _elite_weights(hs: Array, gamma: float, r: float) -> Array:
    # per-batch shift by the max keeps exp() in range; the refit below is a
    # ratio, so any constant rescaling of the weights cancels
    w = np.exp(r * (hs - hs.max()))
    w[hs < gamma] = 0.0
    return w


def _weighted_refit(xs: Array, w: Array) -> tuple[Array, Array]:
    total = w.sum()
    mu = (w @ xs) / total
    d = xs - mu
    sigma = (d.T * w) @ d / total
    return mu, sigma


def mcce_iteration(
    theta: GaussianParams,
    gamma_star: float,
    n_t: int,
    cfg: MonteCarloConfig,
    objective: ObjectiveFunction,
    rng: RngState,
) -> tuple[GaussianParams, float, dict]:
    """One batch iteration of the plain method.

    Draws n_t points, computes the batch quantile, accepts it into the
    incumbent threshold only if it clears gamma_star + eps, then refits both
    moments from the same batch.  An empty elite set (every weight zero, which
    the margin rule can produce) leaves the model unchanged.
    """
    xs = sample_gaussian_batch(theta, rng, n_t)
    hs = objective.evaluate_batch(xs)
    gamma_batch = sample_quantile(hs, cfg.rho)
    if gamma_batch >= gamma_star + cfg.eps:
        gamma_star = gamma_batch
    w = _elite_weights(hs, gamma_star, cfg.r)
    stats = {"gamma_batch": gamma_batch, "n": n_t, "elite": int(np.count_nonzero(w))}
    if not w.any():
        return theta, gamma_star, stats
    mu, sigma = _weighted_refit(xs, w)
    return GaussianParams(mu, sigma), gamma_star, stats


def gmcce_iteration(
    theta: GaussianParams,
    t: int,
    n_t: int,
    cfg: MonteCarloConfig,
    objective: ObjectiveFunction,
    rng: RngState,
) -> tuple[GaussianParams, dict]:
    """One batch iteration of the gradient variant.

    Uses the raw batch quantile (no acceptance margin) and blends: the new
    mean is the smoothed elite mean, and the new covariance smooths the elite
    scatter about that new mean against the old covariance inflated by the
    mean displacement.
    """
    if cfg.alpha is None:
        raise ValueError("gmcce needs an alpha schedule")
    xs = sample_gaussian_batch(theta, rng, n_t)
    hs = objective.evaluate_batch(xs)
    gamma = sample_quantile(hs, cfg.rho)
    w = _elite_weights(hs, gamma, cfg.r)
    stats = {"gamma_batch": gamma, "n": n_t, "elite": int(np.count_nonzero(w))}
    if not w.any():
        return theta, stats
    alpha = cfg.alpha.at(max(t, 1)) if cfg.alpha.kind == "power" else cfg.alpha.value
    total = w.sum()
    elite_mean = (w @ xs) / total
    mu_new = alpha * elite_mean + (1.0 - alpha) * theta.mu
    d = xs - mu_new
    elite_scatter = (d.T * w) @ d / total
    drift = np.outer(theta.mu - mu_new, theta.mu - mu_new)
    sigma_new = alpha * elite_scatter + (1.0 - alpha) * (theta.sigma + drift)
    return GaussianParams(mu_new, sigma_new), stats


@dataclass
class BatchRunResult:
    records: list
    theta: GaussianParams
    reason: str

    @property
    def diverged(self) -> bool:
        return self.reason == "diverged"


def run_batch(
    algorithm: str,
    objective: ObjectiveFunction,
    cfg: MonteCarloConfig,
    theta0: GaussianParams,
    rng: RngState,
    max_evals: int,
    stride: int = 1,
    degeneracy_eps: float = 1e-12,
) -> BatchRunResult:
    """Drive mcce or gmcce until the evaluation budget or degeneracy.

    Evaluations consumed at iteration t equal the batch size N_t exactly;
    the threshold column records the threshold the update actually used
    (the incumbent for mcce, the batch quantile for gmcce).
    """
    if algorithm not in ("mcce", "gmcce"):
        raise ValueError(f"unknown batch algorithm {algorithm!r}")
    theta = theta0
    gamma_star = float("-inf")
    gamma_used = float("nan")
    n_t = cfg.n0
    t = 0
    records: list[TraceRecord] = []
    reason = "max_evals"

    def record():
        mu = theta.mu
        h_mu = objective.evaluate_unmetered(mu) if np.isfinite(mu).all() else float("nan")
        records.append(
            TraceRecord(
                t=t,
                n_evals=objective.n_evals,
                n_updates=t,
                H_of_mu=h_mu,
                gamma=gamma_used,
                gamma_prev=None,
                tcmp=None,
                sigma_trace=float(np.trace(theta.sigma)),
            )
        )

    while objective.n_evals < max_evals:
        try:
            if algorithm == "mcce":
                theta, gamma_star, stats = mcce_iteration(theta, gamma_star, n_t, cfg, objective, rng)
                gamma_used = gamma_star
            else:
                theta, stats = gmcce_iteration(theta, t, n_t, cfg, objective, rng)
                gamma_used = stats["gamma_batch"]
        except (ValueError, FloatingPointError):
            reason = "diverged"
            break
        t += 1
        if t % stride == 0:
            record()
        if np.abs(theta.sigma).max() < degeneracy_eps:
            reason = "degenerate"
            break
        n_t = math.ceil(cfg.eta * n_t)
    if t > 0 and (not records or records[-1].t != t):
        record()
    return BatchRunResult(records=records, theta=theta, reason=reason)
