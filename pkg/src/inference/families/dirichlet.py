from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from src.inference.base import PowerPosterior, PowerPosteriorFamily
from src.pib.errors import DimensionMismatch, InvalidSetting, MLEUndefined


def _log_multivariate_beta(alphas: np.ndarray) -> float:
    return float(gammaln(alphas).sum() - gammaln(alphas.sum()))


class DirichletCategoricalModel(PowerPosteriorFamily):
    """
    Dirichlet prior over categorical probabilities with per-category counts.

    Power posterior: Dirichlet(alphas + beta * counts);
    log Z = log B(alphas + beta * counts) - log B(alphas).

    Args:
        prior_alphas (Sequence[float]): Positive concentration per category.
        counts (Sequence[int]): Non-negative observation count per category.
    """

    name = "dirichlet_categorical"

    def __init__(self, prior_alphas: Sequence[float], counts: Sequence[int]) -> None:
        self.prior_alphas = np.asarray(prior_alphas, dtype=np.float64)
        self.counts = np.asarray(counts, dtype=np.float64)
        if self.prior_alphas.ndim != 1 or self.prior_alphas.size < 2:
            raise InvalidSetting(f"need at least 2 categories, got alphas {self.prior_alphas.tolist()}")
        if self.counts.shape != self.prior_alphas.shape:
            raise DimensionMismatch(
                f"{self.counts.size} counts for {self.prior_alphas.size} categories"
            )
        if np.any(self.prior_alphas <= 0):
            raise InvalidSetting(f"Dirichlet concentrations must be positive, got {self.prior_alphas.tolist()}")
        if np.any(self.counts < 0):
            raise InvalidSetting(f"counts must be non-negative, got {self.counts.tolist()}")

    def prior_params(self) -> Dict[str, np.ndarray]:
        return {"alphas": self.prior_alphas.copy()}

    def _tempered_params(self, beta: float) -> Dict[str, np.ndarray]:
        return {"alphas": self.prior_alphas + beta * self.counts}

    def _standard_bayes_params(self) -> Dict[str, np.ndarray]:
        return {"alphas": self.prior_alphas + self.counts}

    def _log_partition(self, beta: float) -> float:
        return _log_multivariate_beta(self._tempered_params(beta)["alphas"]) - _log_multivariate_beta(
            self.prior_alphas
        )

    def moments(self, params: Dict[str, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        alphas = params["alphas"]
        total = alphas.sum()
        return alphas / total, alphas * (total - alphas) / (total ** 2 * (total + 1.0))

    def mle(self) -> np.ndarray:
        n = self.counts.sum()
        if n == 0:
            raise MLEUndefined("no observations: category proportions are undefined")
        return self.counts / n

    def replicated(self, times: int) -> "DirichletCategoricalModel":
        return DirichletCategoricalModel(self.prior_alphas, self.counts * times)

    def with_prior(self, posterior: PowerPosterior) -> "DirichletCategoricalModel":
        return DirichletCategoricalModel(posterior.params["alphas"], self.counts)

    def __str__(self) -> str:
        return f"DirichletCategoricalModel(alphas={self.prior_alphas.tolist()}, counts={self.counts.tolist()})"


def dirichlet_categorical_power(model: DirichletCategoricalModel, beta: float) -> PowerPosterior:
    return model.power_posterior(beta)
