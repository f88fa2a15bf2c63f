from typing import Dict, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import betaln, xlog1py, xlogy

from src.inference.base import PowerPosterior, PowerPosteriorFamily
from src.pib.errors import BetaOutOfRange, InvalidSetting, MLEUndefined


class BetaBernoulliModel(PowerPosteriorFamily):
    """
    Beta prior over a Bernoulli success probability with k successes in n trials.

    The power posterior is Beta(a + beta*k, b + beta*(n - k)) and
    log Z = log B(a + beta*k, b + beta*(n - k)) - log B(a, b).

    Args:
        prior_a (float): First Beta shape parameter, > 0.
        prior_b (float): Second Beta shape parameter, > 0.
        k (int): Number of successes, 0 <= k <= n.
        n (int): Number of trials.

    Example:
        >>> BetaBernoulliModel(1, 1, k=3, n=4).power_posterior(0.5).params
        {'a': 2.5, 'b': 1.5}
    """

    name = "beta_bernoulli"

    def __init__(self, prior_a: float, prior_b: float, k: int, n: int) -> None:
        if not (prior_a > 0 and prior_b > 0):
            raise InvalidSetting(f"Beta prior parameters must be positive, got ({prior_a}, {prior_b})")
        if not (0 <= k <= n):
            raise InvalidSetting(f"success count must satisfy 0 <= k <= n, got k={k}, n={n}")
        self.prior_a = float(prior_a)
        self.prior_b = float(prior_b)
        self.k = int(k)
        self.n = int(n)

    def prior_params(self) -> Dict[str, float]:
        return {"a": self.prior_a, "b": self.prior_b}

    def _tempered_params(self, beta: float) -> Dict[str, float]:
        return {"a": self.prior_a + beta * self.k, "b": self.prior_b + beta * (self.n - self.k)}

    def _standard_bayes_params(self) -> Dict[str, float]:
        return {"a": self.prior_a + self.k, "b": self.prior_b + (self.n - self.k)}

    def _log_partition(self, beta: float) -> float:
        params = self._tempered_params(beta)
        return float(betaln(params["a"], params["b"]) - betaln(self.prior_a, self.prior_b))

    def moments(self, params: Dict[str, float]) -> Tuple[float, float]:
        a, b = params["a"], params["b"]
        total = a + b
        return a / total, a * b / (total ** 2 * (total + 1.0))

    def mle(self) -> float:
        if self.n == 0:
            raise MLEUndefined("no trials: the Bernoulli MLE k/n is undefined")
        return self.k / self.n

    def replicated(self, times: int) -> "BetaBernoulliModel":
        return BetaBernoulliModel(self.prior_a, self.prior_b, self.k * times, self.n * times)

    def with_prior(self, posterior: PowerPosterior) -> "BetaBernoulliModel":
        return BetaBernoulliModel(posterior.params["a"], posterior.params["b"], self.k, self.n)

    def __str__(self) -> str:
        return f"BetaBernoulliModel(a={self.prior_a}, b={self.prior_b}, k={self.k}, n={self.n})"


def beta_bernoulli_power(model: BetaBernoulliModel, beta: float) -> PowerPosterior:
    return model.power_posterior(beta)


def partition_quadrature(model: BetaBernoulliModel, beta: float, points: int = 100_001) -> float:
    """Trapezoid estimate of Z = integral over [0, 1] of Beta(theta; a, b) theta**(beta k) (1-theta)**(beta (n-k))."""
    if beta < 0:
        raise BetaOutOfRange(f"beta must be >= 0, got {beta}")
    theta = np.linspace(0.0, 1.0, points)
    log_integrand = (
        xlogy(model.prior_a - 1.0 + beta * model.k, theta)
        + xlog1py(model.prior_b - 1.0 + beta * (model.n - model.k), -theta)
        - betaln(model.prior_a, model.prior_b)
    )
    return float(trapezoid(np.exp(log_integrand), theta))
