"""Centered Gaussian data augmentation against a Gaussian likelihood.

For x' = x + eps, eps ~ N(0, noise_std**2), Jensen's inequality on the concave
log-likelihood gives E[log q(x'|theta)] <= log q(x|theta); here the gap is
exactly -noise_std**2 / (2 obs_var).
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from src.inference.gibbs import GaussianVariationalParams, GibbsObjectiveSpec, prior_kl, expected_data_energy
from src.pib.errors import InvalidSetting

logger = logging.getLogger("pib.augmentation")

DEFAULT_MC_SAMPLES = 100_000


@dataclass(frozen=True)
class AugmentationSpec:
    noise_std: float
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.noise_std) and self.noise_std >= 0):
            raise InvalidSetting(f"noise_std must be finite and >= 0, got {self.noise_std}")
        if self.mc_samples < 1:
            raise InvalidSetting(f"mc_samples must be >= 1, got {self.mc_samples}")


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    standard_error: float

    def within(self, target: float, n_se: float = 4.0) -> bool:
        return abs(self.estimate - target) <= n_se * self.standard_error


def _check_obs_var(obs_var: float) -> None:
    if not obs_var > 0:
        raise InvalidSetting(f"obs_var must be positive, got {obs_var}")


def augmentation_gap_analytic(x: float, theta: float, obs_var: float, spec: AugmentationSpec) -> float:
    _check_obs_var(obs_var)
    return -spec.noise_std ** 2 / (2.0 * obs_var)


def augmentation_gap_mc(x: float, theta: float, obs_var: float, spec: AugmentationSpec) -> MonteCarloEstimate:
    """Seeded Monte Carlo estimate of E[log q(x'|theta)] - log q(x|theta).

    Raises:
        InvalidSetting: If obs_var <= 0 or fewer than two samples are requested.
    """
    _check_obs_var(obs_var)
    if spec.mc_samples < 2:
        raise InvalidSetting(f"Monte Carlo needs at least 2 samples, got {spec.mc_samples}")
    rng = np.random.default_rng(spec.seed)
    scale = math.sqrt(obs_var)
    augmented = x + spec.noise_std * rng.standard_normal(spec.mc_samples)
    diffs = norm.logpdf(augmented, loc=theta, scale=scale) - norm.logpdf(x, loc=theta, scale=scale)
    standard_error = float(np.std(diffs, ddof=1) / math.sqrt(spec.mc_samples))
    logger.debug("MC augmentation gap over %d samples: %.6g (se %.3g)", spec.mc_samples, diffs.mean(), standard_error)
    return MonteCarloEstimate(float(diffs.mean()), standard_error)


def augmented_gibbs_objective(
    params: GaussianVariationalParams, spec: GibbsObjectiveSpec, aug: AugmentationSpec
) -> float:
    """Gibbs objective with every data term replaced by its expectation under the augmentation."""
    value = prior_kl(params, spec.model)
    if spec.beta > 0:
        value += spec.beta * expected_data_energy(params, spec.model, noise_var=aug.noise_std ** 2)
    return value
