"""Brute-force reference computations used by tests and the acceptance suite.

Everything here is deliberately independent of the recursion code: quantiles
come from a quadrature-discretized distribution, tracker fixed points from
plain Monte-Carlo averages, and the idealized batch update from exact
expectations on a grid.  The quadrature oracles are one-dimensional; the
properties they check are dimension-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gaussian import GaussianParams, RngState
from .objectives import ObjectiveFunction

Array = np.ndarray


class OracleError(RuntimeError):
    """A reference computation could not certify its own accuracy."""


@dataclass
class Grid1D:
    """Composite-Simpson nodes and weights on [lo, hi].

    ``n`` is bumped to the next odd count when needed (Simpson works on an
    even number of intervals); weights are positive and sum to (hi - lo).
    """

    lo: float
    hi: float
    n: int = 20001
    nodes: Array = field(init=False, repr=False)
    weights: Array = field(init=False, repr=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.n < 3:
            raise ValueError(f"need at least 3 nodes, got {self.n}")
        if self.n % 2 == 0:
            self.n += 1
        self.nodes = np.linspace(self.lo, self.hi, self.n)
        h = (self.hi - self.lo) / (self.n - 1)
        w = np.full(self.n, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        self.weights = w * (h / 3.0)

    @staticmethod
    def for_params(params: GaussianParams, half_width_sigmas: float = 8.0, n: int = 20001) -> "Grid1D":
        if params.m != 1:
            raise ValueError("quadrature grids are one-dimensional")
        var = float(params.sigma[0, 0])
        if not var > 0:
            raise ValueError("quadrature needs a strictly positive variance")
        sd = math.sqrt(var)
        mu = float(params.mu[0])
        return Grid1D(mu - half_width_sigmas * sd, mu + half_width_sigmas * sd, n)


def psi_loss(h: float, gamma: float, rho: float) -> float:
    """Pinball loss whose expectation the quantile minimizes.

    Nonnegative, zero exactly at h == gamma.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must be in (0,1), got {rho}")
    out = 0.0
    if h >= gamma:
        out += (1.0 - rho) * (h - gamma)
    if h <= gamma:
        out += rho * (gamma - h)
    return out


def _normal_pdf(x: Array, mu: float, var: float) -> Array:
    return np.exp(-0.5 * (x - mu) ** 2 / var) / math.sqrt(2.0 * math.pi * var)


def _h_on_nodes(objective: ObjectiveFunction, nodes: Array) -> Array:
    return objective.evaluate_batch(nodes[:, None])


@dataclass
class _DiscreteH:
    """The distribution of H(X) discretized on quadrature nodes."""

    nodes: Array
    hs: Array
    masses: Array  # unnormalized

    def levels(self):
        """Distinct H values (ascending) with their aggregated masses."""
        uniq, inverse = np.unique(self.hs, return_inverse=True)
        mass = np.zeros(uniq.size)
        np.add.at(mass, inverse, self.masses)
        return uniq, mass


def _measure(objective: ObjectiveFunction, params: GaussianParams, grid: Grid1D) -> _DiscreteH:
    hs = _h_on_nodes(objective, grid.nodes)
    masses = grid.weights * _normal_pdf(grid.nodes, float(params.mu[0]), float(params.sigma[0, 0]))
    return _DiscreteH(grid.nodes, hs, masses)


def _mixture_measure(
    objective: ObjectiveFunction,
    params: GaussianParams,
    lam: float,
    theta0: Optional[GaussianParams],
    n_nodes: int,
) -> _DiscreteH:
    # each component integrated on its own grid, then combined with the
    # mixture weights
    cur = _measure(objective, params, Grid1D.for_params(params, n=n_nodes))
    if lam == 0.0 or theta0 is None:
        return cur
    init = _measure(objective, theta0, Grid1D.for_params(theta0, n=n_nodes))
    return _DiscreteH(
        np.concatenate([cur.nodes, init.nodes]),
        np.concatenate([cur.hs, init.hs]),
        np.concatenate([(1.0 - lam) * cur.masses, lam * init.masses]),
    )


def _direct_quantile(levels: Array, mass: Array, rho: float) -> float:
    # sup{l : P(H >= l) >= rho} over the discrete distribution
    tail = np.cumsum(mass[::-1])[::-1]
    ok = tail >= rho * mass.sum()
    return float(levels[np.nonzero(ok)[0][-1]])


def _argmin_quantile(levels: Array, mass: Array, rho: float) -> float:
    # expected pinball loss at every candidate threshold, via prefix sums
    mh = levels * mass
    head = np.cumsum(mass)
    headh = np.cumsum(mh)
    tail = np.cumsum(mass[::-1])[::-1]
    tailh = np.cumsum(mh[::-1])[::-1]
    loss = (1.0 - rho) * (tailh - levels * tail) + rho * (levels * head - headh)
    best = loss.min()
    near = np.nonzero(loss <= best + 1e-12 * max(abs(best), 1.0))[0]
    return float(levels[near[-1]])


def direct_quantile_on_grid(
    objective: ObjectiveFunction, params: GaussianParams, rho: float, grid: Optional[Grid1D] = None
) -> float:
    """The sup-definition (1-rho)-quantile of H(X) on a quadrature grid."""
    if grid is None:
        grid = Grid1D.for_params(params)
    levels, mass = _measure(objective, params, grid).levels()
    return _direct_quantile(levels, mass, rho)


def quantile_by_minimization(
    objective: ObjectiveFunction,
    params: GaussianParams,
    rho: float,
    grid: Optional[Grid1D] = None,
    max_refinements: int = 2,
) -> float:
    """The threshold minimizing the expected pinball loss on a grid.

    Cross-checked against the direct sup-definition quantile of the same
    discretized distribution; on disagreement beyond one distinct-value gap
    the grid resolution doubles, and a persistent gap raises OracleError.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must be in (0,1), got {rho}")
    if grid is None:
        grid = Grid1D.for_params(params)
    for attempt in range(max_refinements + 1):
        levels, mass = _measure(objective, params, grid).levels()
        gamma_min = _argmin_quantile(levels, mass, rho)
        gamma_dir = _direct_quantile(levels, mass, rho)
        k = int(np.searchsorted(levels, gamma_dir))
        gaps = np.diff(levels[max(k - 2, 0) : k + 3])
        tol = float(gaps.max()) if gaps.size else 0.0
        if abs(gamma_min - gamma_dir) <= tol + 1e-12:
            return gamma_min
        grid = Grid1D(grid.lo, grid.hi, 2 * grid.n - 1)
    raise OracleError(
        f"quantile duality check failed beyond tolerance (minimization {gamma_min}, "
        f"direct {gamma_dir}); grid too coarse"
    )


def ideal_ce_step_1d(
    theta: GaussianParams,
    objective: ObjectiveFunction,
    rho: float,
    r: float,
    lam: float = 0.0,
    theta0: Optional[GaussianParams] = None,
    n_nodes: int = 20001,
) -> tuple[GaussianParams, float]:
    """One exact-expectation update of the idealized batch method.

    Computes the mixture quantile gamma on the grid, then the two weighted
    moment ratios by quadrature (the covariance ratio is centered on the new
    mean).  Returns the new parameters together with the threshold used.
    Raises OracleError when the elite weight mass vanishes.
    """
    if theta.m != 1:
        raise ValueError("the idealized update oracle is one-dimensional")
    if lam > 0.0 and theta0 is None:
        raise ValueError("a mixture needs theta0")
    dist = _mixture_measure(objective, theta, lam, theta0, n_nodes)
    levels, mass = dist.levels()
    gamma = _direct_quantile(levels, mass, rho)
    shift = float(dist.hs.max())
    w = dist.masses * np.exp(r * (dist.hs - shift)) * (dist.hs >= gamma)
    denom = float(w.sum())
    if not denom > 1e-300:
        raise OracleError("elite weight mass vanished; threshold above sampled support")
    x = dist.nodes
    mu = float((w * x).sum() / denom)
    var = float((w * (x - mu) ** 2).sum() / denom)
    return GaussianParams([mu], [[var]]), float(gamma)


@dataclass
class FixedPointEstimate:
    """Monte-Carlo estimate of the tracker fixed points with standard errors."""

    xi0: Array
    xi1: Array
    se_xi0: Array
    se_xi1: Array
    n_samples: int
    elite_fraction: float


def _ratio_se(numer_terms: Array, denom_terms: Array, ratio) -> Array:
    # delta method for mean(a)/mean(b): sd(a - R b) / (sqrt(n) * mean(b))
    n = denom_terms.shape[0]
    resid = numer_terms - np.multiply.outer(denom_terms, ratio)
    return resid.std(axis=0, ddof=1) / (math.sqrt(n) * denom_terms.mean())


def fixed_point_oracle(
    objective: ObjectiveFunction,
    theta: GaussianParams,
    theta0: Optional[GaussianParams],
    lam: float,
    gamma: float,
    r: float,
    rng: RngState,
    n_samples: int = 200_000,
    shift: Optional[float] = None,
) -> FixedPointEstimate:
    """Monte-Carlo targets the two moment trackers should settle on.

    Samples the mixture, applies the weighted elite indicator at the frozen
    threshold, and reports E[g1]/E[g0] and E[g2]/E[g0] (the latter centered
    on the former) with delta-method standard errors.  ``shift`` defaults to
    the sample maximum; any fixed value changes nothing but the weight scale.
    """
    if n_samples < 1000:
        raise ValueError("too few samples for a usable oracle")
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must be in [0,1), got {lam}")
    if lam > 0.0 and theta0 is None:
        raise ValueError("a mixture needs theta0")
    m = theta.m
    pick = rng.uniforms(n_samples) < lam
    z = rng.standard_normals((n_samples, m))
    xs = theta.mu + z @ theta.factor().T
    if lam > 0.0:
        xs0 = theta0.mu + z @ theta0.factor().T
        xs = np.where(pick[:, None], xs0, xs)
    hs = objective.evaluate_batch(xs)
    if shift is None:
        shift = float(hs.max())
    w = np.exp(r * (hs - shift))
    w[hs < gamma] = 0.0
    if not w.any():
        raise OracleError("all elite weights are zero at this threshold")
    wbar = w.mean()
    xi0 = (w @ xs) / (w.sum())
    se0 = _ratio_se(w[:, None] * xs, w, xi0)
    d = xs - xi0
    outer_terms = w[:, None, None] * (d[:, :, None] * d[:, None, :])
    xi1 = outer_terms.mean(axis=0) / wbar
    se1 = _ratio_se(outer_terms.reshape(n_samples, -1), w, xi1.reshape(-1)).reshape(m, m)
    return FixedPointEstimate(
        xi0=xi0,
        xi1=xi1,
        se_xi0=se0,
        se_xi1=se1,
        n_samples=n_samples,
        elite_fraction=float(np.count_nonzero(w)) / n_samples,
    )
