"""Gaussian search model: parameters, robust factorization, mixture sampling.

Sampling goes through a cached square-root factor of the covariance so that a
model that is reused for many draws (the common case: the optimizer updates it
only occasionally) pays for one factorization.  Covariances produced by the
moment trackers can be transiently indefinite; the factorization repairs them
instead of aborting (Cholesky with escalating jitter, then an eigenvalue clamp).
"""

from __future__ import annotations

from typing import Optional

import numpy as np

Array = np.ndarray


class RngState:
    """Deterministic random stream keyed by (seed, stream).

    Wraps a counter-based 64-bit Philox generator with the key set to the
    (seed, stream) pair, so replication k of an experiment owns stream k and
    the full sequence is reproducible from the config alone.  Consumption
    order is part of the contract: a mixture draw consumes one uniform (the
    branch pick) followed by m standard normals.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def standard_normal(self, n: int) -> Array:
        return self._gen.standard_normal(n)

    def uniform(self) -> float:
        return float(self._gen.random())

    def uniforms(self, n: int) -> Array:
        return self._gen.random(n)

    def standard_normals(self, shape) -> Array:
        return self._gen.standard_normal(shape)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, stream={self.stream})"


class GaussianParams:
    """Mean vector and covariance matrix of the search distribution.

    Treated as an immutable value: optimizers build a new instance at every
    model update.  The stored covariance is the symmetrized input.
    """

    __slots__ = ("mu", "sigma", "_factor")

    def __init__(self, mu, sigma):
        mu = np.array(mu, dtype=float).reshape(-1)
        sigma = np.array(sigma, dtype=float)
        if sigma.shape != (mu.size, mu.size):
            raise ValueError(f"covariance shape {sigma.shape} does not match mean size {mu.size}")
        if not (np.isfinite(mu).all() and np.isfinite(sigma).all()):
            raise ValueError("non-finite entries in Gaussian parameters")
        self.mu = mu
        self.sigma = (sigma + sigma.T) / 2.0
        self._factor: Optional[Array] = None

    @property
    def m(self) -> int:
        return self.mu.size

    def factor(self) -> Array:
        """A matrix L with L L^T ~= sigma, cached after the first call.

        Tries Cholesky first; on failure adds diagonal jitter of
        1e-10 * trace/m, escalating tenfold up to three times; as a last
        resort clamps negative eigenvalues to zero.  The all-zero covariance
        (the degenerate limit model) yields the zero factor.
        """
        if self._factor is not None:
            return self._factor
        s = self.sigma
        if not s.any():
            self._factor = np.zeros_like(s)
            return self._factor
        base = 1e-10 * np.trace(s) / self.m
        jitters = [0.0] + ([base, 10 * base, 100 * base] if base > 0 else [])
        eye = np.eye(self.m)
        for jit in jitters:
            try:
                self._factor = np.linalg.cholesky(s + jit * eye)
                return self._factor
            except np.linalg.LinAlgError:
                continue
        w, v = np.linalg.eigh(s)
        self._factor = v * np.sqrt(np.clip(w, 0.0, None))
        return self._factor

    def __repr__(self) -> str:
        return f"GaussianParams(m={self.m}, tr_sigma={np.trace(self.sigma):.6g})"


class MixtureModel:
    """Convex mixture of the current model with the fixed initial model.

    Draws come from the current distribution with probability (1 - lam) and
    from the initial one otherwise, which keeps every point of the search
    space reachable as long as the initial covariance is full rank.
    """

    __slots__ = ("current", "initial", "lam")

    def __init__(self, current: GaussianParams, initial: GaussianParams, lam: float):
        if not 0.0 <= lam < 1.0:
            raise ValueError(f"mixing weight must be in [0, 1), got {lam}")
        if lam > 0.0:
            try:
                np.linalg.cholesky(initial.sigma)  # full support needs strict PD
            except np.linalg.LinAlgError:
                raise ValueError(
                    "the initial covariance must be strictly positive definite "
                    "when the mixture weight is positive"
                ) from None
        self.current = current
        self.initial = initial
        self.lam = float(lam)


def sample_gaussian(params: GaussianParams, rng: RngState) -> Array:
    """One draw mu + L z with z ~ N(0, I); consumes m normals."""
    z = rng.standard_normal(params.m)
    return params.mu + params.factor() @ z


def sample_gaussian_batch(params: GaussianParams, rng: RngState, n: int) -> Array:
    """n IID draws as an (n, m) array; consumes n*m normals row-wise."""
    z = rng.standard_normals((n, params.m))
    return params.mu + z @ params.factor().T


def sample_mixture(model: MixtureModel, rng: RngState) -> tuple[Array, bool]:
    """One mixture draw; returns the point and whether the initial branch fired.

    Always consumes the branch uniform first (even at lam = 0) so the stream
    layout does not depend on the mixing weight.
    """
    from_initial = rng.uniform() < model.lam
    x = sample_gaussian(model.initial if from_initial else model.current, rng)
    return x, from_initial


def log_density(params: GaussianParams, x) -> float:
    """log f(x) for the Gaussian density; requires strictly PD covariance."""
    x = np.asarray(x, dtype=float).reshape(-1)
    chol = np.linalg.cholesky(params.sigma)  # LinAlgError on singular input
    u = np.linalg.solve(chol, x - params.mu)
    return float(
        -0.5 * params.m * np.log(2.0 * np.pi) - np.log(np.diag(chol)).sum() - 0.5 * u @ u
    )
