import logging
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple, Union

import numpy as np

from src.pib.errors import DimensionMismatch, EmptyAlphabet, SizeCapExceeded, UnknownWorld, ZeroProbabilityDataset
from src.pib.tables import OUTPUT_TOL, as_distribution

logger = logging.getLogger("pib.world")

DEFAULT_SIZE_CAP = 10 ** 7

BUILTIN_WORLDS: Dict[str, Tuple[list, list]] = {
    "w1": ([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]]),
    "w2": (
        [0.5, 0.3, 0.2],
        [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.2, 0.3, 0.5]],
    ),
}


@dataclass(frozen=True, eq=False)
class World:
    """A finite data-generating process: a prior over phi and p(x | phi) per phi.

    Attributes:
        phi_prior (np.ndarray): Probability table over the phi alphabet, shape (K_phi,).
        obs_given_phi (np.ndarray): One table over the x alphabet per phi, shape (K_phi, K_x).
    """

    phi_prior: np.ndarray
    obs_given_phi: np.ndarray

    def __post_init__(self) -> None:
        phi_prior = as_distribution(self.phi_prior, "phi_prior", ndim=1)
        obs = as_distribution(self.obs_given_phi, "obs_given_phi", ndim=2)
        if obs.shape[0] != phi_prior.size:
            raise DimensionMismatch(
                f"obs_given_phi has {obs.shape[0]} rows but phi_prior has {phi_prior.size} entries"
            )
        if obs.shape[1] < 2:
            raise EmptyAlphabet(f"x alphabet needs at least 2 symbols, got {obs.shape[1]}")
        object.__setattr__(self, "phi_prior", phi_prior)
        object.__setattr__(self, "obs_given_phi", obs)

    @property
    def k_phi(self) -> int:
        return self.phi_prior.size

    @property
    def k_x(self) -> int:
        return self.obs_given_phi.shape[1]


@dataclass(frozen=True)
class DatasetIndex:
    """An ordered dataset of x-alphabet symbols."""

    draws: Tuple[int, ...]

    def index(self, k_x: int) -> int:
        return dataset_index(self.draws, k_x)


def build_world(phi_prior, obs_given_phi) -> World:
    """Validates the tables and returns a World.

    Raises:
        NegativeProbability: If any entry is negative.
        NotNormalized: If any table deviates from unit mass by 1e-9 or more.
        EmptyAlphabet: If the phi alphabet is empty or the x alphabet has fewer than 2 symbols.
        DimensionMismatch: If the tables disagree on the phi alphabet.
    """
    world = World(phi_prior, obs_given_phi)
    logger.debug("Built world with K_phi=%d, K_x=%d", world.k_phi, world.k_x)
    return world


def builtin_world(name: str) -> World:
    """Returns one of the named fixture worlds ("w1", "w2")."""
    try:
        phi_prior, obs = BUILTIN_WORLDS[name.lower()]
    except KeyError:
        raise UnknownWorld(f"Unknown world '{name}'. Valid options: {', '.join(sorted(BUILTIN_WORLDS))}") from None
    return build_world(phi_prior, obs)


def enumerate_datasets(k_x: int, n: int) -> np.ndarray:
    """All K_x**n ordered datasets of length n in lexicographic order (first draw most significant)."""
    return np.indices((k_x,) * n).reshape(n, -1).T


def dataset_index(draws: Sequence[int], k_x: int) -> int:
    """Position of an ordered dataset in the lexicographic enumeration."""
    draws = tuple(int(d) for d in draws)
    if not draws:
        raise DimensionMismatch("a dataset needs at least one draw")
    if any(d < 0 or d >= k_x for d in draws):
        raise DimensionMismatch(f"dataset {draws} has symbols outside the alphabet of size {k_x}")
    return int(np.ravel_multi_index(draws, (k_x,) * len(draws)))


def dataset_counts(k_x: int, n: int) -> np.ndarray:
    """Per-symbol counts for every dataset of length n, shape (K_x**n, K_x)."""
    datasets = enumerate_datasets(k_x, n)
    return (datasets[:, :, None] == np.arange(k_x)).sum(axis=1)


def dataset_likelihood(world: World, n: int) -> np.ndarray:
    """p(dataset | phi) for every dataset of length n, shape (K_phi, K_x**n).

    Computed from symbol counts so that permuted datasets get bit-identical values.
    """
    counts = dataset_counts(world.k_x, n)
    return np.prod(world.obs_given_phi[:, None, :] ** counts[None, :, :], axis=2)


@dataclass(frozen=True, eq=False)
class JointModel:
    """Exact joint table p(phi, x_P, x_F), shape (K_phi, K_x**N, K_x**M)."""

    world: World
    n_past: int
    n_future: int
    joint: np.ndarray

    @property
    def k_x(self) -> int:
        return self.world.k_x

    @property
    def n_past_datasets(self) -> int:
        return self.joint.shape[1]

    @property
    def n_future_datasets(self) -> int:
        return self.joint.shape[2]

    def past_future(self) -> np.ndarray:
        """p(x_P, x_F)."""
        return self.joint.sum(axis=0)

    def past_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=(0, 2))

    def future_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=(0, 1))

    def phi_past(self) -> np.ndarray:
        """p(phi, x_P)."""
        return self.joint.sum(axis=2)

    def phi_future(self) -> np.ndarray:
        """p(phi, x_F)."""
        return self.joint.sum(axis=1)

    def past_datasets(self) -> np.ndarray:
        return enumerate_datasets(self.k_x, self.n_past)

    def future_datasets(self) -> np.ndarray:
        return enumerate_datasets(self.k_x, self.n_future)


def joint_model(world: World, n_past: int, n_future: int, size_cap: int = DEFAULT_SIZE_CAP) -> JointModel:
    """Materialises p(phi) * prod_i p(x_i | phi) over past and future datasets.

    Raises:
        DimensionMismatch: If n_past or n_future is smaller than 1.
        SizeCapExceeded: If K_phi * K_x**(N+M) exceeds `size_cap`.
    """
    if n_past < 1 or n_future < 1:
        raise DimensionMismatch(f"n_past and n_future must be >= 1, got {n_past} and {n_future}")
    cells = world.k_phi * world.k_x ** (n_past + n_future)
    if cells > size_cap:
        raise SizeCapExceeded(f"joint table would have {cells} cells, cap is {size_cap}")

    past = dataset_likelihood(world, n_past)
    future = dataset_likelihood(world, n_future)
    joint = world.phi_prior[:, None, None] * past[:, :, None] * future[:, None, :]
    joint.setflags(write=False)

    total = float(joint.sum())
    if abs(total - 1.0) > OUTPUT_TOL:
        logger.warning("Joint table mass is %.17g (N=%d, M=%d)", total, n_past, n_future)
    logger.debug("Materialised joint with %d cells (N=%d, M=%d)", cells, n_past, n_future)
    return JointModel(world=world, n_past=n_past, n_future=n_future, joint=joint)


def predictive(joint: JointModel, x_past: Union[DatasetIndex, Sequence[int]]) -> np.ndarray:
    """p(x_F | x_P) over all future datasets.

    Raises:
        ZeroProbabilityDataset: If p(x_P) is zero.
        DimensionMismatch: If the dataset length differs from N.
    """
    draws = x_past.draws if isinstance(x_past, DatasetIndex) else tuple(x_past)
    if len(draws) != joint.n_past:
        raise DimensionMismatch(f"past dataset has {len(draws)} draws, joint expects {joint.n_past}")
    row = joint.past_future()[dataset_index(draws, joint.k_x)]
    mass = row.sum()
    if mass <= 0.0:
        raise ZeroProbabilityDataset(f"p(x_P={draws}) is zero")
    return row / mass
