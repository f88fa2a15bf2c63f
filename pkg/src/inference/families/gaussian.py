import math
from typing import Dict, Sequence, Tuple

import numpy as np

from src.inference.base import PowerPosterior, PowerPosteriorFamily
from src.pib.errors import InvalidSetting, MLEUndefined


class GaussianMeanModel(PowerPosteriorFamily):
    """
    Gaussian prior over the mean of Gaussian observations with known variance.

    In precision form the power posterior has
    precision 1/prior_var + beta*n/obs_var and
    mean (prior_mean/prior_var + beta*sum(x)/obs_var) / precision.

    Args:
        prior_mean (float): Prior mean of theta.
        prior_var (float): Prior variance of theta, > 0.
        obs_var (float): Known observation variance, > 0.
        data (Sequence[float]): Observations.
    """

    name = "gaussian"

    def __init__(self, prior_mean: float, prior_var: float, obs_var: float, data: Sequence[float]) -> None:
        if not (prior_var > 0 and obs_var > 0):
            raise InvalidSetting(f"variances must be positive, got prior_var={prior_var}, obs_var={obs_var}")
        self.prior_mean = float(prior_mean)
        self.prior_var = float(prior_var)
        self.obs_var = float(obs_var)
        self.data = np.asarray(data, dtype=np.float64).ravel()
        if not np.all(np.isfinite(self.data)):
            raise InvalidSetting("observations must be finite")

    @property
    def n(self) -> int:
        return self.data.size

    @property
    def sum_x(self) -> float:
        return math.fsum(self.data)

    @property
    def sum_x2(self) -> float:
        return math.fsum(self.data ** 2)

    def prior_params(self) -> Dict[str, float]:
        return {"mean": self.prior_mean, "var": self.prior_var}

    def _tempered_params(self, beta: float) -> Dict[str, float]:
        precision = 1.0 / self.prior_var + beta * self.n / self.obs_var
        mean = (self.prior_mean / self.prior_var + beta * self.sum_x / self.obs_var) / precision
        return {"mean": mean, "var": 1.0 / precision}

    def _standard_bayes_params(self) -> Dict[str, float]:
        precision = 1.0 / self.prior_var + self.n / self.obs_var
        mean = (self.prior_mean / self.prior_var + self.sum_x / self.obs_var) / precision
        return {"mean": mean, "var": 1.0 / precision}

    def _log_partition(self, beta: float) -> float:
        # Exponent of prior * likelihood**beta is -precision/2 theta**2 + linear theta + offset.
        precision = 1.0 / self.prior_var + beta * self.n / self.obs_var
        linear = self.prior_mean / self.prior_var + beta * self.sum_x / self.obs_var
        offset = (
            -0.5 * math.log(2.0 * math.pi * self.prior_var)
            - self.prior_mean ** 2 / (2.0 * self.prior_var)
            - 0.5 * beta * self.n * math.log(2.0 * math.pi * self.obs_var)
            - beta * self.sum_x2 / (2.0 * self.obs_var)
        )
        return offset + linear ** 2 / (2.0 * precision) + 0.5 * math.log(2.0 * math.pi / precision)

    def moments(self, params: Dict[str, float]) -> Tuple[float, float]:
        return params["mean"], params["var"]

    def mle(self) -> float:
        if self.n == 0:
            raise MLEUndefined("no observations: the sample mean is undefined")
        return self.sum_x / self.n

    def replicated(self, times: int) -> "GaussianMeanModel":
        return GaussianMeanModel(self.prior_mean, self.prior_var, self.obs_var, np.tile(self.data, times))

    def with_prior(self, posterior: PowerPosterior) -> "GaussianMeanModel":
        return GaussianMeanModel(posterior.params["mean"], posterior.params["var"], self.obs_var, self.data)

    def __str__(self) -> str:
        return (
            f"GaussianMeanModel(prior_mean={self.prior_mean}, prior_var={self.prior_var}, "
            f"obs_var={self.obs_var}, n={self.n})"
        )


def gaussian_power(model: GaussianMeanModel, beta: float) -> PowerPosterior:
    return model.power_posterior(beta)
