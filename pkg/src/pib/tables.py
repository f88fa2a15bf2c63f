from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.pib.errors import (
    DimensionMismatch,
    EmptyAlphabet,
    InvalidDistribution,
    NegativeProbability,
    NotNormalized,
)

# Inputs may be off by float noise; everything built here sums to 1 within OUTPUT_TOL.
INPUT_TOL = 1e-9
OUTPUT_TOL = 1e-12


def as_distribution(values, name: str, tol: float = INPUT_TOL, ndim: Optional[int] = None) -> np.ndarray:
    """Validates a probability table and renormalises it along the last axis.

    Args:
        values: Array-like table; the last axis holds the distribution(s).
        name: Name used in error messages.
        tol: Largest accepted deviation of a row sum from 1.
        ndim: Required number of dimensions, if any.

    Returns:
        A read-only float64 array whose rows sum to 1.

    Raises:
        DimensionMismatch: If `ndim` is given and does not match.
        EmptyAlphabet: If the last axis is empty.
        InvalidDistribution: If an entry is not finite.
        NegativeProbability: If an entry is negative.
        NotNormalized: If a row sum deviates from 1 by `tol` or more.
    """
    arr = np.array(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must have {ndim} dimension(s), got shape {arr.shape}")
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise EmptyAlphabet(f"{name} has an empty alphabet")
    if not np.all(np.isfinite(arr)):
        raise InvalidDistribution(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise NegativeProbability(f"{name} contains negative entries (min {arr.min():.3g})")
    sums = arr.sum(axis=-1, keepdims=True)
    deviation = float(np.max(np.abs(sums - 1.0)))
    if deviation >= tol:
        raise NotNormalized(f"{name} deviates from unit mass by {deviation:.3g} (tolerance {tol:g})")
    arr = arr / sums
    arr.setflags(write=False)
    return arr


def _relabel_last_axis(arr: np.ndarray, permutation: Sequence[int]) -> np.ndarray:
    perm = np.asarray(permutation, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(arr.shape[-1])):
        raise DimensionMismatch(f"{perm.tolist()} is not a permutation of {arr.shape[-1]} labels")
    out = np.empty_like(arr)
    out[..., perm] = arr
    return out


def _relabel_first_axis(arr: np.ndarray, permutation: Sequence[int]) -> np.ndarray:
    return np.moveaxis(_relabel_last_axis(np.moveaxis(arr, 0, -1), permutation), -1, 0)


@dataclass(frozen=True, eq=False)
class Channel:
    """A representation p(theta | x_P): one row over the theta alphabet per past dataset."""

    rows: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", as_distribution(self.rows, "channel rows", ndim=2))

    @property
    def n_datasets(self) -> int:
        return self.rows.shape[0]

    @property
    def k_theta(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def identity(cls, n_datasets: int) -> "Channel":
        return cls(np.eye(n_datasets))

    @classmethod
    def constant(cls, n_datasets: int, k_theta: int, theta: int = 0) -> "Channel":
        rows = np.zeros((n_datasets, k_theta))
        rows[:, theta] = 1.0
        return cls(rows)

    @classmethod
    def uniform(cls, n_datasets: int, k_theta: int) -> "Channel":
        return cls(np.full((n_datasets, k_theta), 1.0 / k_theta))

    @classmethod
    def deterministic(cls, assignment: Sequence[int], k_theta: int) -> "Channel":
        """Channel sending past dataset i to theta = assignment[i] with certainty."""
        assignment = np.asarray(assignment, dtype=np.int64)
        rows = np.zeros((assignment.size, k_theta))
        rows[np.arange(assignment.size), assignment] = 1.0
        return cls(rows)

    @classmethod
    def random(cls, n_datasets: int, k_theta: int, rng: np.random.Generator) -> "Channel":
        """Rows drawn from a symmetric Dirichlet(1)."""
        return cls(rng.dirichlet(np.ones(k_theta), size=n_datasets))

    def relabeled(self, permutation: Sequence[int]) -> "Channel":
        """Moves the mass of label t to label permutation[t]."""
        return Channel(_relabel_last_axis(self.rows, permutation))


@dataclass(frozen=True, eq=False)
class PriorTable:
    """Variational marginal q(theta)."""

    q_theta: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "q_theta", as_distribution(self.q_theta, "prior q(theta)", ndim=1))

    @property
    def k_theta(self) -> int:
        return self.q_theta.size

    @classmethod
    def uniform(cls, k_theta: int) -> "PriorTable":
        return cls(np.full(k_theta, 1.0 / k_theta))

    @classmethod
    def random(cls, k_theta: int, rng: np.random.Generator) -> "PriorTable":
        return cls(rng.dirichlet(np.ones(k_theta)))

    def relabeled(self, permutation: Sequence[int]) -> "PriorTable":
        return PriorTable(_relabel_last_axis(self.q_theta, permutation))


@dataclass(frozen=True, eq=False)
class LikelihoodTable:
    """Per-theta single-draw likelihood q(x | theta), shape (K_theta, K_x)."""

    q_x_given_theta: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "q_x_given_theta", as_distribution(self.q_x_given_theta, "likelihood q(x|theta)", ndim=2)
        )

    @property
    def k_theta(self) -> int:
        return self.q_x_given_theta.shape[0]

    @property
    def k_x(self) -> int:
        return self.q_x_given_theta.shape[1]

    @classmethod
    def uniform(cls, k_theta: int, k_x: int) -> "LikelihoodTable":
        return cls(np.full((k_theta, k_x), 1.0 / k_x))

    @classmethod
    def random(cls, k_theta: int, k_x: int, rng: np.random.Generator) -> "LikelihoodTable":
        return cls(rng.dirichlet(np.ones(k_x), size=k_theta))

    def relabeled(self, permutation: Sequence[int]) -> "LikelihoodTable":
        return LikelihoodTable(_relabel_first_axis(self.q_x_given_theta, permutation))


@dataclass(frozen=True, eq=False)
class ConditionalPrior:
    """Future-conditioned prior q(theta | x_F), shape (number of future datasets, K_theta)."""

    q_theta_given_future: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "q_theta_given_future",
            as_distribution(self.q_theta_given_future, "conditional prior q(theta|x_F)", ndim=2),
        )

    @classmethod
    def from_prior(cls, prior: PriorTable, n_futures: int) -> "ConditionalPrior":
        """Ignores x_F: every row equals the unconditional prior."""
        return cls(np.tile(prior.q_theta, (n_futures, 1)))
