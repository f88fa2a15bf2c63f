"""Invariant suite behind `pib verify`.

Every check is seeded from one base seed and returns a CheckResult whose
`worst` field is the largest violation margin seen (0 or negative is clean
for one-sided checks).
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from src.inference.augmentation import (
    AugmentationSpec,
    augmentation_gap_analytic,
    augmentation_gap_mc,
    augmented_gibbs_objective,
)
from src.inference.base import limit_diagnostics
from src.inference.families import (
    BetaBernoulliModel,
    DirichletCategoricalModel,
    GaussianMeanModel,
    gaussian_power,
    partition_quadrature,
)
from src.inference.gibbs import (
    GaussianVariationalParams,
    GibbsObjectiveSpec,
    finite_difference_gradient,
    gibbs_gradient,
    gibbs_objective,
    gibbs_optimize,
    stable_step_size,
)
from src.pib.infotheory import channel_joint, markov_identity_residual, mutual_information, predictive_information
from src.pib.solver import (
    SolverConfig,
    ba_solve,
    conditional_prior_bound,
    deterministic_channels,
    exact_mixture_prior,
    exact_pib_objective,
    information_curve,
    optimal_factorized_likelihood,
    optimal_prior,
    variational_objective,
)
from src.pib.tables import Channel, LikelihoodTable, PriorTable
from src.pib.world import builtin_world, joint_model

logger = logging.getLogger("pib.verify")

DEFAULT_SEED = 7
CHECK_FIELDS = ["check", "passed", "worst"]


@dataclass(frozen=True)
class CheckResult:
    check: str
    passed: bool
    worst: float


def check_markov_identity(seed: int, threads: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_residual = worst_cmi = 0.0
    for name in ("w1", "w2"):
        world = builtin_world(name)
        for n_past in (1, 2):
            for n_future in (1, 2):
                joint = joint_model(world, n_past, n_future)
                for _ in range(100):
                    report = markov_identity_residual(
                        channel_joint(joint, Channel.random(joint.n_past_datasets, 3, rng))
                    )
                    worst_residual = max(worst_residual, report.residual)
                    worst_cmi = max(worst_cmi, report.cmi_future_given_past)
    passed = worst_residual < 1e-10 and worst_cmi < 1e-12
    return CheckResult("markov_identity", passed, max(worst_residual, worst_cmi))


def check_variational_bound(seed: int, threads: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    joint = joint_model(builtin_world("w1"), 2, 1)
    k_theta = 2
    worst_violation = -math.inf
    optimal_beaten = False
    for _ in range(200):
        cj = channel_joint(joint, Channel.random(joint.n_past_datasets, k_theta, rng))
        beta = float(rng.uniform(0.0, 2.0))
        exact = exact_pib_objective(cj, beta)
        prior = PriorTable.random(k_theta, rng)
        lik = LikelihoodTable.random(k_theta, joint.k_x, rng)
        worst_violation = max(worst_violation, exact - variational_objective(cj, prior, lik, beta))

        best_gap = variational_objective(cj, optimal_prior(cj), optimal_factorized_likelihood(cj), beta) - exact
        for _ in range(10):
            competitor = variational_objective(
                cj, PriorTable.random(k_theta, rng), LikelihoodTable.random(k_theta, joint.k_x, rng), beta
            ) - exact
            if best_gap > competitor + 1e-12:
                optimal_beaten = True
    return CheckResult("variational_bound", worst_violation <= 1e-10 and not optimal_beaten, worst_violation)


def check_conditional_prior(seed: int, threads: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    joint = joint_model(builtin_world("w1"), 1, 1)
    channels = [Channel.identity(joint.n_past_datasets)]
    channels += [Channel.random(joint.n_past_datasets, 2, rng) for _ in range(20)]
    worst = 0.0
    for channel in channels:
        cj = channel_joint(joint, channel)
        report = markov_identity_residual(cj)
        worst = max(worst, abs(conditional_prior_bound(cj, exact_mixture_prior(cj)) - report.cmi_past_given_future))
    return CheckResult("conditional_prior_tightness", worst < 1e-10, worst)


def check_conjugate_limits(seed: int, threads: int = 1) -> CheckResult:
    schedule = [1e-9, 0.5, 1.0, 2.0, 1e6]
    models = [
        BetaBernoulliModel(1.0, 1.0, k=3, n=4),
        GaussianMeanModel(0.0, 1.0, 1.0, [1.0, 3.0]),
        DirichletCategoricalModel([1.0, 1.0, 1.0], [2, 3, 5]),
    ]
    passed = True
    worst = 0.0
    for model in models:
        report = limit_diagnostics(model, schedule)
        passed = passed and report.passed
        worst = max([worst] + [c.value for c in report.checks])
    bayes = models[0].power_posterior(1.0).params
    passed = passed and bayes["a"] == 4.0 and bayes["b"] == 2.0
    return CheckResult("conjugate_limits", passed, worst)


def _gibbs_datasets(seed: int) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.normal(1.0, 1.5, size=int(rng.integers(1, 9))) for _ in range(5)]


def check_gibbs_oracle(seed: int, threads: int = 1) -> CheckResult:
    worst = 0.0
    passed = True
    for data in _gibbs_datasets(seed):
        model = GaussianMeanModel(0.0, 1.0, 1.0, data)
        for beta in (0.0, 0.5, 1.0, 2.0, 10.0):
            spec = GibbsObjectiveSpec(model, beta)
            init = GaussianVariationalParams(0.0, 0.0)
            result = gibbs_optimize(spec, init, step_size=stable_step_size(spec, init))
            oracle = gaussian_power(model, beta)
            mean_err = abs(result.params.mean - oracle.params["mean"])
            var_err = abs(result.params.variance - oracle.params["var"])
            obj_err = abs(gibbs_objective(result.params, spec) + oracle.log_partition)
            passed = passed and mean_err < 1e-6 and var_err < 1e-6 and obj_err < 1e-8
            worst = max(worst, mean_err, var_err, obj_err)
    return CheckResult("gibbs_oracle", passed, worst)


def check_gibbs_gradient(seed: int, threads: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    # worst is the largest excess over the tolerance max(1e-5 * |analytic|, 1e-8).
    worst = -math.inf
    for _ in range(100):
        data = rng.normal(0.0, 1.0, size=int(rng.integers(1, 9)))
        spec = GibbsObjectiveSpec(GaussianMeanModel(0.0, 1.0, 1.0, data), float(rng.uniform(0.0, 2.0)))
        params = GaussianVariationalParams(float(rng.uniform(-2.0, 2.0)), float(rng.uniform(-1.0, 0.5)))
        for analytic, numeric in zip(gibbs_gradient(params, spec), finite_difference_gradient(params, spec, 1e-6)):
            worst = max(worst, abs(analytic - numeric) - max(1e-5 * abs(analytic), 1e-8))
    return CheckResult("gibbs_gradient", worst <= 0.0, worst)


def check_solver_endpoints(seed: int, threads: int = 1) -> CheckResult:
    joint = joint_model(builtin_world("w1"), 1, 1)
    cfg = SolverConfig(beta=0.0, k_theta=2, restarts=8, seed=seed)

    low = channel_joint(joint, ba_solve(joint, cfg, threads).channel)
    mi_low = mutual_information(low.past_theta())

    high = channel_joint(joint, ba_solve(joint, cfg.with_beta(0.99), threads).channel)
    ceiling = predictive_information(joint)
    mi_high = mutual_information(high.future_theta())

    mid = ba_solve(joint, cfg.with_beta(0.5), threads)
    brute = min(
        exact_pib_objective(channel_joint(joint, c), 0.5) for c in deterministic_channels(joint.n_past_datasets, 2)
    )
    excess = mid.diagnostics.objective - brute

    curve = information_curve(joint, [round(0.1 * i, 12) for i in range(1, 10)], cfg, threads)
    drops = [a.mi_theta_future - b.mi_theta_future for a, b in zip(curve, curve[1:])]
    worst_drop = max(drops)

    passed = mi_low < 1e-9 and mi_high >= 0.99 * ceiling and excess <= 1e-9 and worst_drop <= 1e-6
    logger.debug(
        "Solver endpoints: I_tp(0)=%.3g I_tf(0.99)=%.6g/%.6g excess(0.5)=%.3g worst drop=%.3g",
        mi_low, mi_high, ceiling, excess, worst_drop,
    )
    return CheckResult("solver_endpoints", passed, max(mi_low, excess, worst_drop))


def check_augmentation(seed: int, threads: int = 1) -> CheckResult:
    spec = AugmentationSpec(noise_std=0.5, mc_samples=100_000, seed=seed)
    analytic = augmentation_gap_analytic(0.3, -0.2, 1.0, spec)
    mc = augmentation_gap_mc(0.3, -0.2, 1.0, spec)

    model = GaussianMeanModel(0.0, 1.0, 1.0, [1.0, 3.0])
    gibbs_spec = GibbsObjectiveSpec(model, 1.0)
    params = GaussianVariationalParams.from_moments(4.0 / 3.0, 1.0 / 3.0)
    clean = gibbs_objective(params, gibbs_spec)
    augmented = augmented_gibbs_objective(params, gibbs_spec, spec)
    excess_err = abs((augmented - clean) - gibbs_spec.beta * model.n * spec.noise_std ** 2 / 2.0)
    chain = augmented >= clean - 1e-10 and clean >= -gaussian_power(model, 1.0).log_partition - 1e-10

    passed = analytic == -0.125 and mc.within(analytic) and excess_err < 1e-10 and chain
    return CheckResult("augmentation_bound", passed, max(abs(mc.estimate - analytic), excess_err))


def check_partition_quadrature(seed: int, threads: int = 1) -> CheckResult:
    model = BetaBernoulliModel(1.0, 1.0, k=3, n=4)
    worst = 0.0
    for beta in (0.5, 1.0, 2.0):
        closed = math.exp(model.power_posterior(beta).log_partition)
        worst = max(worst, abs(partition_quadrature(model, beta) - closed))
    return CheckResult("partition_quadrature", worst < 1e-8, worst)


def check_curve_determinism(seed: int, threads: int = 1) -> CheckResult:
    from src.cli import emit_csv

    joint = joint_model(builtin_world("w1"), 1, 1)
    grid = [round(0.1 * i, 12) for i in range(1, 10)]
    cfg = SolverConfig(beta=0.0, seed=seed)
    serial = emit_csv(information_curve(joint, grid, cfg, threads=1))
    pooled = emit_csv(information_curve(joint, grid, cfg, threads=8))
    return CheckResult("curve_determinism", serial == pooled, 0.0 if serial == pooled else 1.0)


CHECKS: Tuple[Callable[[int, int], CheckResult], ...] = (
    check_markov_identity,
    check_variational_bound,
    check_conditional_prior,
    check_conjugate_limits,
    check_gibbs_oracle,
    check_gibbs_gradient,
    check_solver_endpoints,
    check_augmentation,
    check_partition_quadrature,
    check_curve_determinism,
)


def run_verification(seed: int = DEFAULT_SEED, threads: int = 1) -> List[CheckResult]:
    """Runs every check in CHECKS and logs a pass/fail summary."""
    results = []
    for check in CHECKS:
        start = time.perf_counter()
        result = check(seed, threads)
        logger.info(
            "%-28s %s (worst %.3g, %.2fs)",
            result.check, "PASS" if result.passed else "FAIL", result.worst, time.perf_counter() - start,
        )
        results.append(result)
    failed = sum(not r.passed for r in results)
    logger.info("%d/%d checks passed", len(results) - failed, len(results))
    return results
