"""Incremental cross-entropy optimization for continuous black-box maximization.

The package provides:

* :mod:`ceopt.objectives` -- the evaluation-counted objective interface and
  the ten benchmark functions plus the piecewise-linear spike example;
* :mod:`ceopt.gaussian` -- Gaussian model parameters, robust factorization,
  seeded sampling, and the exploration mixture;
* :mod:`ceopt.ce2nd` -- the one-sample-per-iteration stochastic-approximation
  optimizer with quantile tracking and gated model updates;
* :mod:`ceopt.baselines` -- the batch Monte-Carlo method and its
  gradient-smoothed variant;
* :mod:`ceopt.oracles` -- brute-force reference computations for tests;
* :mod:`ceopt.harness` -- config files, replicated runs, traces, comparisons.
"""

from .baselines import MonteCarloConfig, gmcce_iteration, mcce_iteration, run_batch, sample_quantile
from .ce2nd import (
    Ce2ndState,
    DivergenceError,
    Schedule,
    Schedules,
    delta_gamma,
    g0,
    g1,
    g2,
    init_state,
    run,
    s_weight,
    step,
    update_tcmp,
)
from .gaussian import GaussianParams, MixtureModel, RngState, log_density, sample_gaussian, sample_mixture
from .harness import RunConfig, compare, load_config, run_experiment
from .objectives import (
    BENCHMARK_NAMES,
    ObjectiveFunction,
    make_benchmark,
    make_objective,
    make_triangle_example,
)
from .oracles import (
    FixedPointEstimate,
    Grid1D,
    OracleError,
    fixed_point_oracle,
    ideal_ce_step_1d,
    psi_loss,
    quantile_by_minimization,
)
from .trace import TRACE_COLUMNS, TraceRecord

__version__ = "0.1.0"
