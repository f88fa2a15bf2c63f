"""Gibbs variational inference for the Gaussian mean model.

The representation is restricted to q(theta) = N(mean, exp(log_std)**2) and
the functional

    F = KL(q || prior) - beta * sum_i E_q[log N(x_i; theta, obs_var)]

is minimised by fixed-step gradient descent. The family contains the power
posterior, so the optimum coincides with gaussian_power and F(optimum) = -log Z.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from src.inference.families.gaussian import GaussianMeanModel
from src.pib.errors import BetaOutOfRange, Divergence, InvalidSetting

logger = logging.getLogger("pib.gibbs")

DEFAULT_STEP_SIZE = 0.05
DEFAULT_MAX_ITERS = 100_000
DEFAULT_TOL = 1e-9
DIVERGENCE_PATIENCE = 100

TRACE_FIELDS = ["iteration", "mean", "log_std", "objective", "grad_norm"]


@dataclass(frozen=True)
class GaussianVariationalParams:
    mean: float
    log_std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.log_std)):
            raise InvalidSetting(f"variational parameters must be finite, got ({self.mean}, {self.log_std})")

    @property
    def std(self) -> float:
        return math.exp(self.log_std)

    @property
    def variance(self) -> float:
        return math.exp(2.0 * self.log_std)

    @classmethod
    def from_moments(cls, mean: float, variance: float) -> "GaussianVariationalParams":
        return cls(float(mean), 0.5 * math.log(variance))

    def as_array(self) -> np.ndarray:
        return np.array([self.mean, self.log_std], dtype=np.float64)


@dataclass(frozen=True)
class GibbsObjectiveSpec:
    model: GaussianMeanModel
    beta: float

    def __post_init__(self):
        if not math.isfinite(self.beta) or self.beta < 0:
            raise BetaOutOfRange(f"beta must be a finite value >= 0, got {self.beta}")


@dataclass
class GibbsResult:
    """Outcome of gibbs_optimize.

    Attributes:
        params (GaussianVariationalParams): Final parameters.
        trace (List[Dict[str, float]]): One row per recorded iteration, keyed by TRACE_FIELDS.
        iterations (int): Number of descent steps taken.
        converged (bool): Whether the gradient norm fell below tol.
    """

    params: GaussianVariationalParams
    trace: List[Dict[str, float]] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def prior_kl(params: GaussianVariationalParams, model: GaussianMeanModel) -> float:
    s2, v0 = params.variance, model.prior_var
    return 0.5 * (s2 / v0 + (params.mean - model.prior_mean) ** 2 / v0 - 1.0 + math.log(v0) - 2.0 * params.log_std)


def expected_data_energy(params: GaussianVariationalParams, model: GaussianMeanModel, noise_var: float = 0.0) -> float:
    """-sum_i E[log N(x_i'; theta, obs_var)] with theta ~ q and x_i' = x_i + N(0, noise_var).

    Uses E[(x' - theta)**2] = (x - mean)**2 + s**2 + noise_var.
    """
    squared = math.fsum((model.data - params.mean) ** 2)
    return model.n * 0.5 * math.log(2.0 * math.pi * model.obs_var) + (
        squared + model.n * (params.variance + noise_var)
    ) / (2.0 * model.obs_var)


def gibbs_objective(params: GaussianVariationalParams, spec: GibbsObjectiveSpec) -> float:
    value = prior_kl(params, spec.model)
    if spec.beta > 0:
        value += spec.beta * expected_data_energy(params, spec.model)
    return value


def gibbs_gradient(params: GaussianVariationalParams, spec: GibbsObjectiveSpec) -> Tuple[float, float]:
    """Analytic (dF/d mean, dF/d log_std)."""
    model, beta = spec.model, spec.beta
    s2 = params.variance
    d_mean = (params.mean - model.prior_mean) / model.prior_var + beta * (
        model.n * params.mean - model.sum_x
    ) / model.obs_var
    d_log_std = s2 / model.prior_var - 1.0 + beta * model.n * s2 / model.obs_var
    return d_mean, d_log_std


def finite_difference_gradient(
    params: GaussianVariationalParams, spec: GibbsObjectiveSpec, h: float = 1e-6
) -> Tuple[float, float]:
    """Central differences of gibbs_objective with step h on each coordinate."""
    if not h > 0:
        raise InvalidSetting(f"finite-difference step must be positive, got {h}")
    x0 = params.as_array()
    grad = np.zeros(2)
    for j in range(2):
        x = x0.copy()
        x[j] = x0[j] + h
        f_plus = gibbs_objective(GaussianVariationalParams(*x), spec)
        x[j] = x0[j] - h
        f_minus = gibbs_objective(GaussianVariationalParams(*x), spec)
        grad[j] = (f_plus - f_minus) / (2.0 * h)
    return float(grad[0]), float(grad[1])


def stable_step_size(
    spec: GibbsObjectiveSpec, init: GaussianVariationalParams, default: float = DEFAULT_STEP_SIZE
) -> float:
    """Largest step not exceeding `default` that keeps fixed-step descent stable from `init`."""
    precision = 1.0 / spec.model.prior_var + spec.beta * spec.model.n / spec.model.obs_var
    curvature = max(1.0, init.variance) * 2.0 * precision
    return min(default, 0.5 / curvature)


def gibbs_optimize(
    spec: GibbsObjectiveSpec,
    init: GaussianVariationalParams = GaussianVariationalParams(0.0, 0.0),
    step_size: float = DEFAULT_STEP_SIZE,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> GibbsResult:
    """Fixed-step gradient descent on gibbs_objective.

    Args:
        spec (GibbsObjectiveSpec): Model and inverse temperature.
        init (GaussianVariationalParams): Starting point.
        step_size (float): Descent step, > 0.
        max_iters (int): Step budget.
        tol (float): Stop once the gradient norm is below this value.

    Returns:
        GibbsResult: Final parameters and the full descent trace.

    Raises:
        InvalidSetting: If step_size or max_iters is not positive.
        Divergence: If the objective rises for DIVERGENCE_PATIENCE consecutive
            steps or stops being finite.
    """
    if not step_size > 0:
        raise InvalidSetting(f"step size must be positive, got {step_size}")
    if max_iters < 1:
        raise InvalidSetting(f"max_iters must be >= 1, got {max_iters}")

    params = init
    objective = gibbs_objective(params, spec)
    result = GibbsResult(params=params)
    increases = 0

    for iteration in range(max_iters + 1):
        d_mean, d_log_std = gibbs_gradient(params, spec)
        grad_norm = math.hypot(d_mean, d_log_std)
        result.trace.append(
            {
                "iteration": iteration,
                "mean": params.mean,
                "log_std": params.log_std,
                "objective": objective,
                "grad_norm": grad_norm,
            }
        )
        if grad_norm < tol:
            result.converged = True
            break
        if iteration == max_iters:
            break

        mean = params.mean - step_size * d_mean
        log_std = params.log_std - step_size * d_log_std
        if not (math.isfinite(mean) and math.isfinite(log_std)):
            raise Divergence(f"parameters left the finite range at iteration {iteration + 1} (step {step_size})")
        params = GaussianVariationalParams(mean, log_std)
        new_objective = gibbs_objective(params, spec)
        if not math.isfinite(new_objective):
            raise Divergence(f"objective became {new_objective} at iteration {iteration + 1} (step {step_size})")

        increases = increases + 1 if new_objective > objective else 0
        if increases >= DIVERGENCE_PATIENCE:
            raise Divergence(
                f"objective increased for {increases} consecutive steps (step {step_size}); try a smaller step"
            )
        objective = new_objective

    result.params = params
    result.iterations = int(result.trace[-1]["iteration"])
    if result.converged:
        logger.debug("Gibbs VI converged after %d steps (objective %.12g)", result.iterations, objective)
    else:
        logger.warning(
            "Gibbs VI stopped after %d steps with gradient norm %.3g (tol %.3g)",
            result.iterations, result.trace[-1]["grad_norm"], tol,
        )
    return result
