"""Predictive information bottleneck over finite worlds.

The exact objective is I(theta;X_P|X_F) - beta * I(theta;X_P). Channels are
optimised with a self-consistent (Blahut-Arimoto style) iteration on
x = x_P, y = x_F with effective trade-off 1 / (1 - beta).
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, rel_entr, xlogy

from src.pib.errors import (
    BetaOutOfRange,
    DimensionMismatch,
    InvalidGrid,
    InvalidSetting,
    NonConvergence,
    SupportViolation,
)
from src.pib.infotheory import (
    ChannelJoint,
    channel_joint,
    conditional_mutual_information,
    entropy,
    kl_divergence,
    mutual_information,
)
from src.pib.tables import Channel, ConditionalPrior, LikelihoodTable, PriorTable
from src.pib.world import JointModel, dataset_counts

logger = logging.getLogger("pib.solver")

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 10_000
DEFAULT_RESTARTS = 8
REWRITE_TOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Settings for ba_solve.

    Attributes:
        beta (float): Trade-off multiplier; ba_solve requires 0 <= beta < 1.
        k_theta (int): Size of the representation alphabet.
        restarts (int): Number of Dirichlet(1) initialisations; restart r is seeded with seed + r.
        max_iters (int): Iteration budget per restart.
        tol (float): Convergence threshold on the change of the objective.
        seed (int): Base seed.
        require_convergence (bool): Raise NonConvergence instead of warning when the best
            restart exhausts max_iters.
    """

    beta: float
    k_theta: int = 2
    restarts: int = DEFAULT_RESTARTS
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    seed: int = 0
    require_convergence: bool = False

    def __post_init__(self) -> None:
        if not math.isfinite(self.beta) or self.beta < 0:
            raise BetaOutOfRange(f"beta must be a finite value >= 0, got {self.beta}")
        if self.k_theta < 1:
            raise InvalidSetting(f"k_theta must be at least 1, got {self.k_theta}")
        if self.restarts < 1:
            raise InvalidSetting(f"restarts must be at least 1, got {self.restarts}")
        if self.max_iters < 1:
            raise InvalidSetting(f"max_iters must be at least 1, got {self.max_iters}")
        if not self.tol > 0:
            raise InvalidSetting(f"tol must be positive, got {self.tol}")

    def with_beta(self, beta: float) -> "SolverConfig":
        return replace(self, beta=beta)


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    restarts_used: int
    objective: float
    converged: bool
    restart_objectives: Tuple[float, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class SolveResult:
    channel: Channel
    diagnostics: SolverDiagnostics


@dataclass(frozen=True)
class _RestartOutcome:
    rows: np.ndarray
    objective: float
    iterations: int
    converged: bool


def exact_pib_objective(cj: ChannelJoint, beta: float) -> float:
    """I(theta;X_P|X_F) - beta * I(theta;X_P), in nats."""
    mi_tp = mutual_information(cj.past_theta())
    cmi = conditional_mutual_information(cj.past_future_theta(), axis=1)
    value = cmi - beta * mi_tp
    rewritten = (1.0 - beta) * mi_tp - mutual_information(cj.future_theta())
    if abs(value - rewritten) > REWRITE_TOL:
        logger.warning("PIB objective %.15g disagrees with its rewrite %.15g", value, rewritten)
    return value


def _fast_mi(p2: np.ndarray) -> float:
    return float(rel_entr(p2, np.outer(p2.sum(axis=1), p2.sum(axis=0))).sum())


class PIBSolver:
    """Self-consistent iteration for the unconstrained PIB objective on one JointModel.

    Each update sets p(theta) to the channel marginal, p(x_F|theta) to
    sum_{x_P} p(x_F|x_P) p(x_P|theta), and every row to
    p(theta|x_P) ~ p(theta) exp(-KL(p(x_F|x_P) || p(x_F|theta)) / (1 - beta)).

    Args:
        joint (JointModel): The world to solve on.
        cfg (SolverConfig): Settings; cfg.beta must lie in [0, 1).

    Attributes:
        stats (Dict): Diagnostics of the last solve: iterations, restarts_used,
            objective, converged, restart_objectives.
    """

    def __init__(self, joint: JointModel, cfg: SolverConfig) -> None:
        if cfg.beta >= 1.0:
            raise BetaOutOfRange(f"ba_solve requires beta in [0, 1), got {cfg.beta}")
        self.joint = joint
        self.cfg = cfg
        self._gamma = 1.0 / (1.0 - cfg.beta)
        past_future = joint.past_future()
        self._p_past = past_future.sum(axis=1)
        future = joint.future_marginal()
        with np.errstate(divide="ignore", invalid="ignore"):
            conditional = past_future / self._p_past[:, None]
        # Rows of impossible datasets carry no weight; any distribution will do.
        conditional[self._p_past == 0] = future
        self._future_given_past = conditional
        self._neg_entropy = xlogy(conditional, conditional).sum(axis=1)
        self.stats: Dict = {
            "iterations": 0,
            "restarts_used": 0,
            "objective": float("nan"),
            "converged": False,
            "restart_objectives": (),
        }

    def _future_given_theta(self, rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        weighted = rows * self._p_past[:, None]
        p_theta = weighted.sum(axis=0)
        future_theta = weighted.T @ self._future_given_past
        with np.errstate(divide="ignore", invalid="ignore"):
            future_given_theta = future_theta / p_theta[:, None]
        future_given_theta[p_theta == 0] = self.joint.future_marginal()
        return p_theta, future_given_theta

    def _kl_matrix(self, future_given_theta: np.ndarray) -> np.ndarray:
        """KL(p(x_F|x_P) || p(x_F|theta)) for every (x_P, theta)."""
        support = future_given_theta > 0
        with np.errstate(divide="ignore"):
            log_q = np.where(support, np.log(future_given_theta), 0.0)
        cross = self._future_given_past @ log_q.T
        kl = self._neg_entropy[:, None] - cross
        unreachable = ((self._future_given_past > 0).astype(np.float64) @ (~support).T.astype(np.float64)) > 0
        kl[unreachable] = np.inf
        return kl

    def _update(self, rows: np.ndarray) -> np.ndarray:
        p_theta, future_given_theta = self._future_given_theta(rows)
        kl = self._kl_matrix(future_given_theta)
        row_min = kl.min(axis=1)
        row_min = np.where(np.isfinite(row_min), row_min, 0.0)
        with np.errstate(divide="ignore"):
            log_w = np.log(p_theta)[None, :] - self._gamma * (kl - row_min[:, None])
        norm = logsumexp(log_w, axis=1, keepdims=True)
        dead = ~np.isfinite(norm[:, 0])
        new_rows = np.exp(log_w - np.where(np.isfinite(norm), norm, 0.0))
        # Rows whose every weight underflowed keep their previous value.
        new_rows[dead] = rows[dead]
        return new_rows

    def _objective(self, rows: np.ndarray) -> float:
        """(1 - beta) I(theta;X_P) - I(theta;X_F), the rewrite of the exact objective."""
        past_theta = rows * self._p_past[:, None]
        theta_future = past_theta.T @ self._future_given_past
        return (1.0 - self.cfg.beta) * _fast_mi(past_theta) - _fast_mi(theta_future)

    def step(self, channel: Channel) -> Channel:
        """Applies one self-consistent update to `channel`."""
        if channel.n_datasets != self.joint.n_past_datasets:
            raise DimensionMismatch(
                f"channel has {channel.n_datasets} rows, joint has {self.joint.n_past_datasets} past datasets"
            )
        return Channel(self._update(np.array(channel.rows)))

    def iterate(self, rows: np.ndarray) -> Tuple[np.ndarray, int, bool]:
        """Runs updates from `rows` until the objective changes by less than tol."""
        previous = self._objective(rows)
        for iteration in range(1, self.cfg.max_iters + 1):
            rows = self._update(rows)
            current = self._objective(rows)
            if abs(previous - current) < self.cfg.tol:
                return rows, iteration, True
            previous = current
        return rows, self.cfg.max_iters, False

    def _run_restart(self, restart: int) -> _RestartOutcome:
        rng = np.random.default_rng(self.cfg.seed + restart)
        init = rng.dirichlet(np.ones(self.cfg.k_theta), size=self.joint.n_past_datasets)
        rows, iterations, converged = self.iterate(init)
        channel = Channel(rows)
        objective = exact_pib_objective(channel_joint(self.joint, channel), self.cfg.beta)
        logger.debug(
            "beta=%g restart %d: objective %.12g after %d iterations%s",
            self.cfg.beta, restart, objective, iterations, "" if converged else " (not converged)",
        )
        return _RestartOutcome(rows=channel.rows, objective=objective, iterations=iterations, converged=converged)

    def solve(self, threads: int = 1) -> SolveResult:
        """Best channel over all restarts; ties go to the lowest restart index."""
        restarts = range(self.cfg.restarts)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                outcomes = list(executor.map(self._run_restart, restarts))
        else:
            outcomes = [self._run_restart(r) for r in restarts]

        best = outcomes[0]
        for outcome in outcomes[1:]:
            if outcome.objective < best.objective:
                best = outcome

        diagnostics = SolverDiagnostics(
            iterations=best.iterations,
            restarts_used=len(outcomes),
            objective=best.objective,
            converged=best.converged,
            restart_objectives=tuple(o.objective for o in outcomes),
        )
        if not best.converged:
            if self.cfg.require_convergence:
                raise NonConvergence(
                    f"beta={self.cfg.beta}: best restart did not converge within {self.cfg.max_iters} iterations"
                )
            logger.warning(
                "beta=%g: best restart did not converge within %d iterations", self.cfg.beta, self.cfg.max_iters
            )
        self.stats = asdict(diagnostics)
        return SolveResult(channel=Channel(best.rows), diagnostics=diagnostics)

    def get_stats(self) -> Dict:
        return self.stats


def ba_solve(joint: JointModel, cfg: SolverConfig, threads: int = 1) -> SolveResult:
    """Minimises the exact PIB objective over channels with K_theta outputs.

    Raises:
        BetaOutOfRange: If cfg.beta >= 1.
    """
    return PIBSolver(joint, cfg).solve(threads=threads)


def deterministic_channels(n_datasets: int, k_theta: int) -> Iterator[Channel]:
    """Every deterministic channel from n_datasets inputs to k_theta labels."""
    for assignment in itertools.product(range(k_theta), repeat=n_datasets):
        yield Channel.deterministic(assignment, k_theta)


def _check_theta_size(cj: ChannelJoint, k_theta: int, name: str) -> None:
    if k_theta != cj.k_theta:
        raise DimensionMismatch(f"{name} has {k_theta} theta labels, channel has {cj.k_theta}")


def _expected_symbol_counts(cj: ChannelJoint) -> np.ndarray:
    """W[theta, x] = sum_{x_P} p(x_P, theta) * #{i : x_i = x}."""
    counts = dataset_counts(cj.model.k_x, cj.model.n_past)
    return cj.past_theta().T @ counts


def _prior_term(cj: ChannelJoint, prior: PriorTable) -> float:
    """<log p(theta|x_P) / q(theta)>."""
    _check_theta_size(cj, prior.k_theta, "prior")
    past_theta = cj.past_theta()
    p_theta = past_theta.sum(axis=0)
    if np.any((p_theta > 0) & (prior.q_theta == 0)):
        raise SupportViolation("prior q(theta) vanishes where the channel marginal has mass")
    return float(xlogy(past_theta, cj.channel.rows).sum() - xlogy(p_theta, prior.q_theta).sum())


def _likelihood_term(cj: ChannelJoint, lik: LikelihoodTable) -> float:
    """sum_i <log q(x_i | theta)>."""
    _check_theta_size(cj, lik.k_theta, "likelihood")
    if lik.k_x != cj.model.k_x:
        raise DimensionMismatch(f"likelihood has {lik.k_x} symbols, world has {cj.model.k_x}")
    weights = _expected_symbol_counts(cj)
    if np.any((weights > 0) & (lik.q_x_given_theta == 0)):
        raise SupportViolation("likelihood q(x|theta) vanishes on an observed (x, theta) pair")
    return float(xlogy(weights, lik.q_x_given_theta).sum())


def variational_objective(cj: ChannelJoint, prior: PriorTable, lik: LikelihoodTable, beta: float) -> float:
    """<log p(theta|x_P)/q(theta)> - beta * (sum_i <log q(x_i|theta)> + H(X_P)).

    H(X_P) is folded in so the value upper-bounds exact_pib_objective directly.

    Raises:
        SupportViolation: If a variational table vanishes where the expectation has mass.
    """
    return _prior_term(cj, prior) - beta * (_likelihood_term(cj, lik) + entropy(cj.past_marginal()))


@dataclass(frozen=True)
class BoundGap:
    """variational - exact, split into its three non-negative parts."""

    prior_gap: float
    future_information: float
    likelihood_gap: float
    total: float


def bound_gap_decomposition(cj: ChannelJoint, prior: PriorTable, lik: LikelihoodTable, beta: float) -> BoundGap:
    """KL(p(theta)||q(theta)) + I(theta;X_F) + beta * (I(theta;X_P) - H(X_P) - sum_i <log q(x_i|theta)>)."""
    mi_tp = mutual_information(cj.past_theta())
    likelihood_gap = beta * (mi_tp - entropy(cj.past_marginal()) - _likelihood_term(cj, lik))
    return BoundGap(
        prior_gap=kl_divergence(cj.theta_marginal(), prior.q_theta),
        future_information=mutual_information(cj.future_theta()),
        likelihood_gap=likelihood_gap,
        total=variational_objective(cj, prior, lik, beta) - exact_pib_objective(cj, beta),
    )


def optimal_prior(cj: ChannelJoint) -> PriorTable:
    """The aggregate marginal p(theta) = sum_{x_P} p(x_P) p(theta|x_P)."""
    return PriorTable(cj.theta_marginal())


def optimal_factorized_likelihood(cj: ChannelJoint) -> LikelihoodTable:
    """q*(x|theta) = (1/N) sum_i p(x_i = x | theta); rows of zero-mass theta are uniform."""
    weights = _expected_symbol_counts(cj)
    mass = weights.sum(axis=1, keepdims=True)
    k_x = weights.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        rows = np.where(mass > 0, weights / mass, 1.0 / k_x)
    return LikelihoodTable(rows)


def conditional_prior_bound(cj: ChannelJoint, cp: ConditionalPrior) -> float:
    """<log p(theta|x_P) / q(theta|x_F)>, an upper bound on I(theta;X_P|X_F).

    Raises:
        SupportViolation: If q(theta|x_F) vanishes where p(x_F, theta) has mass.
    """
    table = cp.q_theta_given_future
    if table.shape != (cj.model.n_future_datasets, cj.k_theta):
        raise DimensionMismatch(
            f"conditional prior has shape {table.shape}, "
            f"expected ({cj.model.n_future_datasets}, {cj.k_theta})"
        )
    pft = cj.past_future_theta()
    future_theta = pft.sum(axis=0)
    if np.any((future_theta > 0) & (table == 0)):
        raise SupportViolation("conditional prior vanishes where p(x_F, theta) has mass")
    return float(xlogy(pft, cj.channel.rows[:, None, :]).sum() - xlogy(future_theta, table).sum())


def mixture_conditional_prior(cj: ChannelJoint, q_past_given_future) -> ConditionalPrior:
    """q(theta|x_F) = sum_{x_P'} p(theta|x_P') q(x_P'|x_F) for a variational dataset density.

    Args:
        cj: The channel joint whose channel is reused.
        q_past_given_future: Table of shape (number of future datasets, number of past datasets).
    """
    density = np.asarray(q_past_given_future, dtype=np.float64)
    expected = (cj.model.n_future_datasets, cj.model.n_past_datasets)
    if density.shape != expected:
        raise DimensionMismatch(f"dataset density has shape {density.shape}, expected {expected}")
    return ConditionalPrior(density @ cj.channel.rows)


def exact_mixture_prior(cj: ChannelJoint) -> ConditionalPrior:
    """The mixture with q(x_P'|x_F) = p(x_P'|x_F), which makes the bound tight."""
    future_past = cj.model.past_future().T
    mass = future_past.sum(axis=1, keepdims=True)
    n_past = future_past.shape[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(mass > 0, future_past / mass, 1.0 / n_past)
    return mixture_conditional_prior(cj, density)


def _boltzmann_log_weights(joint: JointModel, prior: PriorTable, lik: LikelihoodTable, beta: float) -> np.ndarray:
    if beta < 0:
        raise BetaOutOfRange(f"beta must be >= 0, got {beta}")
    if lik.k_theta != prior.k_theta:
        raise DimensionMismatch(f"prior has {prior.k_theta} labels, likelihood has {lik.k_theta}")
    if lik.k_x != joint.k_x:
        raise DimensionMismatch(f"likelihood has {lik.k_x} symbols, world has {joint.k_x}")
    with np.errstate(divide="ignore"):
        log_w = np.tile(np.log(prior.q_theta), (joint.n_past_datasets, 1))
    if beta > 0:
        counts = dataset_counts(joint.k_x, joint.n_past).astype(np.float64)
        support = lik.q_x_given_theta > 0
        with np.errstate(divide="ignore"):
            log_lik = np.where(support, np.log(lik.q_x_given_theta), 0.0)
        log_w = log_w + beta * (counts @ log_lik.T)
        log_w[(counts @ (~support).T.astype(np.float64)) > 0] = -np.inf
    return log_w


def boltzmann_log_partition(joint: JointModel, prior: PriorTable, lik: LikelihoodTable, beta: float) -> np.ndarray:
    """log Z(x_P) = log sum_theta q(theta) prod_i q(x_i|theta)**beta for every past dataset."""
    return logsumexp(_boltzmann_log_weights(joint, prior, lik, beta), axis=1)


def boltzmann_channel(joint: JointModel, prior: PriorTable, lik: LikelihoodTable, beta: float) -> Channel:
    """The generalized Boltzmann channel p(theta|x_P) ~ q(theta) prod_i q(x_i|theta)**beta.

    Raises:
        SupportViolation: If some past dataset has zero weight under every theta.
    """
    log_w = _boltzmann_log_weights(joint, prior, lik, beta)
    log_z = logsumexp(log_w, axis=1, keepdims=True)
    if not np.all(np.isfinite(log_z)):
        raise SupportViolation("some past dataset is impossible under every (prior, likelihood) pair")
    return Channel(np.exp(log_w - log_z))


@dataclass(frozen=True)
class EmpiricalBayesResult:
    prior: PriorTable
    channel: Channel
    trace: Tuple[float, ...]
    iterations: int
    converged: bool


def empirical_bayes(
    joint: JointModel,
    lik: LikelihoodTable,
    prior0: Optional[PriorTable] = None,
    beta: float = 1.0,
    max_iters: int = 1000,
    tol: float = 1e-12,
) -> EmpiricalBayesResult:
    """Optimises the prior for a fixed likelihood and unrestricted channel.

    Alternates channel <- boltzmann_channel(prior) and prior <- optimal_prior;
    both are exact coordinate minimisations of variational_objective, so the
    trace never increases.
    """
    prior = prior0 if prior0 is not None else PriorTable.uniform(lik.k_theta)
    trace: List[float] = []
    channel = boltzmann_channel(joint, prior, lik, beta)
    converged = False
    iteration = 0
    for iteration in range(1, max_iters + 1):
        cj = channel_joint(joint, channel)
        prior = optimal_prior(cj)
        trace.append(variational_objective(cj, prior, lik, beta))
        channel = boltzmann_channel(joint, prior, lik, beta)
        if len(trace) > 1 and abs(trace[-2] - trace[-1]) < tol:
            converged = True
            break
    logger.debug("Empirical Bayes: %d iterations, objective %.12g", iteration, trace[-1])
    return EmpiricalBayesResult(
        prior=prior, channel=channel, trace=tuple(trace), iterations=iteration, converged=converged
    )


@dataclass(frozen=True)
class CurveRecord:
    """One point of the information curve (nats)."""

    beta: float
    mi_theta_past: float
    mi_theta_future: float
    cmi_theta_past_given_future: float
    exact_objective: float
    variational_objective: float
    restarts_used: int
    iterations: int


CURVE_FIELDS: Tuple[str, ...] = tuple(CurveRecord.__dataclass_fields__)


def validate_beta_grid(betas: Sequence[float], upper: Optional[float] = 1.0) -> List[float]:
    """Checks that a grid is non-empty, strictly increasing and inside [0, upper)."""
    grid = [float(b) for b in betas]
    if not grid:
        raise InvalidGrid("beta grid is empty")
    for b in grid:
        if not math.isfinite(b) or b < 0 or (upper is not None and b >= upper):
            raise BetaOutOfRange(f"beta {b} is outside [0, {upper})")
    if any(b >= a for b, a in zip(grid, grid[1:])):
        raise InvalidGrid(f"beta grid must be strictly increasing, got {grid}")
    return grid


def _curve_point(joint: JointModel, cfg: SolverConfig) -> CurveRecord:
    result = ba_solve(joint, cfg)
    cj = channel_joint(joint, result.channel)
    mi_tp = mutual_information(cj.past_theta())
    return CurveRecord(
        beta=cfg.beta,
        mi_theta_past=mi_tp,
        mi_theta_future=mutual_information(cj.future_theta()),
        cmi_theta_past_given_future=conditional_mutual_information(cj.past_future_theta(), axis=1),
        exact_objective=exact_pib_objective(cj, cfg.beta),
        variational_objective=variational_objective(
            cj, optimal_prior(cj), optimal_factorized_likelihood(cj), cfg.beta
        ),
        restarts_used=result.diagnostics.restarts_used,
        iterations=result.diagnostics.iterations,
    )


def information_curve(
    joint: JointModel, betas: Sequence[float], cfg: SolverConfig, threads: int = 1
) -> List[CurveRecord]:
    """Solves every beta of the grid independently; records come back in beta order."""
    grid = validate_beta_grid(betas)
    configs = [cfg.with_beta(b) for b in grid]
    logger.info("Tracing information curve over %d beta values (threads=%d)", len(grid), threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(lambda c: _curve_point(joint, c), configs))
    return [_curve_point(joint, c) for c in configs]
