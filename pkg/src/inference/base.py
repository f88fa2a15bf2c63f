import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.pib.errors import BetaOutOfRange, InvalidGrid

logger = logging.getLogger("pib.inference")

# Schedules must probe all three limits of the tempered posterior.
SMALL_BETA = 1e-6
LARGE_BETA = 1e4

# Probes used when a caller only asks for the limits.
SMALL_BETA_PROBE = 1e-9
LARGE_BETA_PROBE = 1e6

# The prior distance grows like beta and the MLE residuals shrink like 1/beta.
# Tolerances follow those rates: 1e-6, 1e-5 and 1e-6 at the probes above.
PRIOR_DISTANCE_RATE = 1e3
MLE_MEAN_SCALE = 10.0
MLE_VARIANCE_SCALE = 1.0
MONOTONE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class PowerPosterior:
    """Tempered posterior q(theta) [prod_i q(x_i|theta)]**beta / Z of a conjugate family.

    Attributes:
        family (str): Family tag ("beta_bernoulli", "gaussian", "dirichlet_categorical").
        beta (float): Inverse temperature the posterior was computed at.
        params (Dict[str, np.ndarray]): Posterior parameters, in family order.
        log_partition (float): log Z = log of the integral of q(theta) prod_i q(x_i|theta)**beta.
        mean (np.ndarray): Posterior mean of theta.
        variance (np.ndarray): Posterior variance of theta (per component).
    """

    family: str
    beta: float
    params: Dict[str, np.ndarray]
    log_partition: float
    mean: np.ndarray
    variance: np.ndarray

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([np.atleast_1d(v) for v in self.params.values()]).astype(np.float64)


class PowerPosteriorFamily(ABC):
    """
    Abstract base class for conjugate models with a closed-form power posterior.

    The power posterior multiplies the data sufficient statistics by beta and
    leaves the prior untouched: beta = 0 returns the prior, beta = 1 the
    ordinary Bayes posterior, and large beta concentrates on the maximum
    likelihood estimate.

    Note:
        Concrete families implement parameter updates, moments, the log
        partition function and the MLE; everything else is shared.
    """

    name: str = ""

    @abstractmethod
    def prior_params(self) -> Dict[str, np.ndarray]:
        """Prior parameters keyed by name."""
        pass

    @abstractmethod
    def _tempered_params(self, beta: float) -> Dict[str, np.ndarray]:
        """Posterior parameters with the data statistics scaled by beta."""
        pass

    @abstractmethod
    def _standard_bayes_params(self) -> Dict[str, np.ndarray]:
        """Untempered conjugate update, written out without beta."""
        pass

    @abstractmethod
    def _log_partition(self, beta: float) -> float:
        pass

    @abstractmethod
    def moments(self, params: Dict[str, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and variance of theta under the given parameters."""
        pass

    @abstractmethod
    def mle(self) -> np.ndarray:
        """Maximum likelihood estimate of the quantity the posterior mean estimates.

        Raises:
            MLEUndefined: If there is no data.
        """
        pass

    @abstractmethod
    def replicated(self, times: int) -> "PowerPosteriorFamily":
        """Same prior, dataset repeated `times` times."""
        pass

    @abstractmethod
    def with_prior(self, posterior: PowerPosterior) -> "PowerPosteriorFamily":
        """Same data, prior replaced by the parameters of `posterior`."""
        pass

    def _posterior(self, beta: float, params: Dict[str, np.ndarray], log_partition: float) -> PowerPosterior:
        mean, variance = self.moments(params)
        return PowerPosterior(
            family=self.name,
            beta=beta,
            params=params,
            log_partition=log_partition,
            mean=np.atleast_1d(mean).astype(np.float64),
            variance=np.atleast_1d(variance).astype(np.float64),
        )

    def power_posterior(self, beta: float) -> PowerPosterior:
        """Closed-form tempered posterior and its log partition function.

        Raises:
            BetaOutOfRange: If beta is negative or not finite.
        """
        if not math.isfinite(beta) or beta < 0:
            raise BetaOutOfRange(f"beta must be a finite value >= 0, got {beta}")
        return self._posterior(beta, self._tempered_params(beta), self._log_partition(beta))

    def bayes_posterior(self) -> PowerPosterior:
        """Ordinary Bayes posterior computed by the untempered update."""
        return self._posterior(1.0, self._standard_bayes_params(), self._log_partition(1.0))

    def prior(self) -> PowerPosterior:
        return self._posterior(0.0, self.prior_params(), 0.0)


@dataclass(frozen=True)
class LimitRow:
    beta: float
    posterior: PowerPosterior
    prior_distance: float
    mle_distance: float


@dataclass(frozen=True)
class LimitCheck:
    check: str
    passed: bool
    value: float


@dataclass(frozen=True)
class LimitReport:
    family: str
    rows: Tuple[LimitRow, ...]
    checks: Tuple[LimitCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _validate_schedule(schedule: Sequence[float]) -> List[float]:
    grid = sorted(float(b) for b in schedule)
    if not grid:
        raise InvalidGrid("beta schedule is empty")
    if any(not math.isfinite(b) or b < 0 for b in grid):
        raise BetaOutOfRange(f"beta schedule must be finite and non-negative, got {grid}")
    if grid[0] > SMALL_BETA or 1.0 not in grid or grid[-1] < LARGE_BETA:
        raise InvalidGrid(
            f"beta schedule must include a value <= {SMALL_BETA:g}, exactly 1 and a value >= {LARGE_BETA:g}"
        )
    return grid


def _monotone(values: Sequence[float], increasing: bool) -> bool:
    pairs = zip(values, values[1:])
    if increasing:
        return all(after >= before * (1.0 - MONOTONE_RTOL) for before, after in pairs)
    return all(after <= before * (1.0 + MONOTONE_RTOL) for before, after in pairs)


def limit_diagnostics(model: PowerPosteriorFamily, schedule: Sequence[float]) -> LimitReport:
    """Executable check of the beta -> 0, beta = 1 and beta -> infinity limits.

    Raises:
        InvalidGrid: If the schedule misses one of the three regimes.
        MLEUndefined: If the model has no data.
    """
    grid = _validate_schedule(schedule)
    prior_vector = model.prior().parameter_vector()
    mle = np.atleast_1d(model.mle()).astype(np.float64)

    rows = []
    for beta in grid:
        posterior = model.power_posterior(beta)
        rows.append(
            LimitRow(
                beta=beta,
                posterior=posterior,
                prior_distance=float(np.max(np.abs(posterior.parameter_vector() - prior_vector))),
                mle_distance=float(np.max(np.abs(posterior.mean - mle))),
            )
        )

    small, large = rows[0], rows[-1]
    head = [row for row in rows if row.beta <= 1.0]
    tail = [row for row in rows if row.beta >= 1.0]
    tail_variance = [float(np.max(row.posterior.variance)) for row in tail]
    tempered_one = model.power_posterior(1.0).parameter_vector()
    bayes_gap = float(np.max(np.abs(tempered_one - model.bayes_posterior().parameter_vector())))

    prior_tol = PRIOR_DISTANCE_RATE * small.beta
    mean_tol = MLE_MEAN_SCALE / large.beta
    variance_tol = MLE_VARIANCE_SCALE / large.beta
    checks = (
        LimitCheck(
            "prior_limit",
            small.prior_distance <= prior_tol and _monotone([row.prior_distance for row in head], increasing=True),
            small.prior_distance,
        ),
        LimitCheck("bayes_at_one", bayes_gap == 0.0, bayes_gap),
        LimitCheck(
            "mle_mean_limit",
            large.mle_distance <= mean_tol and _monotone([row.mle_distance for row in tail], increasing=False),
            large.mle_distance,
        ),
        LimitCheck(
            "mle_variance_limit",
            tail_variance[-1] <= variance_tol and _monotone(tail_variance, increasing=False),
            tail_variance[-1],
        ),
    )
    tolerances = {
        "prior_limit": prior_tol, "bayes_at_one": 0.0, "mle_mean_limit": mean_tol, "mle_variance_limit": variance_tol,
    }
    for check in checks:
        if not check.passed:
            logger.warning(
                "%s limit check '%s' failed (value %.3g, tolerance %.3g, or not monotone along the schedule)",
                model.name, check.check, check.value, tolerances[check.check],
            )
    return LimitReport(family=model.name, rows=tuple(rows), checks=checks)
