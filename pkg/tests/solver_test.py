import math

import numpy as np
import pytest

from src.pib.errors import (
    BetaOutOfRange,
    DimensionMismatch,
    InvalidGrid,
    InvalidSetting,
    NonConvergence,
    SupportViolation,
)
from src.pib.infotheory import channel_joint, mutual_information
from src.pib.solver import (
    CURVE_FIELDS,
    PIBSolver,
    SolverConfig,
    ba_solve,
    bound_gap_decomposition,
    boltzmann_channel,
    boltzmann_log_partition,
    conditional_prior_bound,
    deterministic_channels,
    empirical_bayes,
    exact_mixture_prior,
    exact_pib_objective,
    information_curve,
    optimal_factorized_likelihood,
    optimal_prior,
    validate_beta_grid,
    variational_objective,
)
from src.pib.tables import Channel, ConditionalPrior, LikelihoodTable, PriorTable
from src.pib.world import builtin_world, joint_model

LN2 = math.log(2)


@pytest.fixture
def w1_joint():
    return joint_model(builtin_world("w1"), 1, 1)


@pytest.fixture
def identity_cj(w1_joint):
    return channel_joint(w1_joint, Channel.identity(2))


@pytest.fixture
def constant_cj(w1_joint):
    return channel_joint(w1_joint, Channel.constant(2, 2))


def test_exact_objective_identity(identity_cj):
    """Test the exact objective of the identity channel at beta 0 and 0.5"""
    assert exact_pib_objective(identity_cj, 0.5) == pytest.approx(0.124820, abs=1e-6)
    assert exact_pib_objective(identity_cj, 0.0) == pytest.approx(0.471393, abs=1e-6)


def test_exact_objective_constant(constant_cj):
    """Test that a constant channel scores 0 at any beta"""
    for beta in (0.0, 0.5, 3.0):
        assert exact_pib_objective(constant_cj, beta) == pytest.approx(0.0, abs=1e-15)


def test_exact_objective_rewrite():
    """Test CMI - beta*I_tp = (1-beta)*I_tp - I_tf on random channels"""
    joint = joint_model(builtin_world("w2"), 2, 1)
    rng = np.random.default_rng(1)
    for _ in range(20):
        cj = channel_joint(joint, Channel.random(joint.n_past_datasets, 3, rng))
        beta = float(rng.uniform(0.0, 2.0))
        rewrite = (1 - beta) * mutual_information(cj.past_theta()) - mutual_information(cj.future_theta())
        assert exact_pib_objective(cj, beta) == pytest.approx(rewrite, abs=1e-10)


def test_solver_config_validation():
    """Test that nonsensical solver settings are rejected"""
    with pytest.raises(BetaOutOfRange):
        SolverConfig(beta=-0.1)
    with pytest.raises(InvalidSetting, match="restarts"):
        SolverConfig(beta=0.5, restarts=0)
    with pytest.raises(InvalidSetting, match="tol"):
        SolverConfig(beta=0.5, tol=0.0)


def test_ba_solve_rejects_beta_one(w1_joint):
    """Test that the solver is restricted to beta < 1"""
    with pytest.raises(BetaOutOfRange, match="beta"):
        ba_solve(w1_joint, SolverConfig(beta=1.0))


def test_ba_solve_beta_zero(w1_joint):
    """Test that beta 0 compresses everything away"""
    result = ba_solve(w1_joint, SolverConfig(beta=0.0, seed=7))
    cj = channel_joint(w1_joint, result.channel)
    assert mutual_information(cj.past_theta()) < 1e-9
    assert result.diagnostics.objective < 1e-9
    assert result.diagnostics.restarts_used == 8


def test_ba_solve_near_one(w1_joint):
    """Test that beta 0.99 recovers almost all predictive information"""
    result = ba_solve(w1_joint, SolverConfig(beta=0.99, seed=7))
    cj = channel_joint(w1_joint, result.channel)
    assert mutual_information(cj.future_theta()) >= 0.99 * 0.221754


def test_ba_solve_beats_deterministic_channels(w1_joint):
    """Test the solver against brute force over the 4 deterministic channels"""
    result = ba_solve(w1_joint, SolverConfig(beta=0.5, seed=7))
    brute = min(exact_pib_objective(channel_joint(w1_joint, c), 0.5) for c in deterministic_channels(2, 2))
    assert result.diagnostics.objective <= brute + 1e-9


def test_deterministic_channels_count():
    """Test that every assignment is enumerated once"""
    channels = list(deterministic_channels(3, 2))
    assert len(channels) == 8
    assert len({tuple(c.rows.argmax(axis=1)) for c in channels}) == 8


def test_ba_solve_threads_match_serial():
    """Test that pooled restarts return the identical channel"""
    joint = joint_model(builtin_world("w2"), 2, 1)
    cfg = SolverConfig(beta=0.7, k_theta=3, seed=3)
    serial = ba_solve(joint, cfg, threads=1)
    pooled = ba_solve(joint, cfg, threads=4)
    np.testing.assert_array_equal(serial.channel.rows, pooled.channel.rows)
    assert serial.diagnostics == pooled.diagnostics


def test_step_at_fixed_point():
    """Test that one more update barely moves a converged channel"""
    joint = joint_model(builtin_world("w1"), 1, 1)
    cfg = SolverConfig(beta=0.9, seed=2)
    solver = PIBSolver(joint, cfg)
    result = solver.solve()
    assert result.diagnostics.converged
    before = exact_pib_objective(channel_joint(joint, result.channel), cfg.beta)
    after = exact_pib_objective(channel_joint(joint, solver.step(result.channel)), cfg.beta)
    assert abs(after - before) < 10 * cfg.tol
    assert solver.get_stats()["objective"] == result.diagnostics.objective


def test_step_rejects_wrong_channel(w1_joint):
    """Test that step checks the channel shape"""
    with pytest.raises(DimensionMismatch):
        PIBSolver(w1_joint, SolverConfig(beta=0.5)).step(Channel.identity(3))


def test_require_convergence(w1_joint):
    """Test that an exhausted budget is fatal only on request"""
    lenient = ba_solve(w1_joint, SolverConfig(beta=0.9, max_iters=1, restarts=1))
    assert not lenient.diagnostics.converged
    with pytest.raises(NonConvergence, match="did not converge"):
        ba_solve(w1_joint, SolverConfig(beta=0.9, max_iters=1, restarts=1, require_convergence=True))


def test_variational_identity_channel(identity_cj):
    """Test the variational objective of the identity channel at beta 1"""
    prior = optimal_prior(identity_cj)
    lik = optimal_factorized_likelihood(identity_cj)
    # The likelihood term is tight for N=1, leaving a gap of exactly I(theta;X_F).
    assert variational_objective(identity_cj, prior, lik, 1.0) == pytest.approx(0.0, abs=1e-12)
    gap = bound_gap_decomposition(identity_cj, prior, lik, 1.0)
    assert gap.total == pytest.approx(0.221754, abs=1e-6)
    assert gap.prior_gap == pytest.approx(0.0, abs=1e-15)
    assert gap.likelihood_gap == pytest.approx(0.0, abs=1e-12)


def test_variational_constant_channel(constant_cj):
    """Test that the bound is 0 for a constant channel with a matching point-mass prior"""
    prior = PriorTable(np.array([1.0, 0.0]))
    lik = LikelihoodTable.uniform(2, 2)
    assert variational_objective(constant_cj, prior, lik, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_variational_support_violation(identity_cj):
    """Test that a prior missing channel mass is rejected"""
    with pytest.raises(SupportViolation):
        variational_objective(identity_cj, PriorTable(np.array([1.0, 0.0])), LikelihoodTable.uniform(2, 2), 0.5)


def test_variational_bound_random():
    """Test variational >= exact on seeded random triples"""
    joint = joint_model(builtin_world("w1"), 2, 1)
    rng = np.random.default_rng(42)
    for _ in range(200):
        cj = channel_joint(joint, Channel.random(joint.n_past_datasets, 2, rng))
        prior = PriorTable.random(2, rng)
        lik = LikelihoodTable.random(2, 2, rng)
        beta = float(rng.uniform(0.0, 2.0))
        gap = bound_gap_decomposition(cj, prior, lik, beta)
        assert gap.total >= -1e-10
        assert gap.likelihood_gap >= -1e-10
        assert gap.total == pytest.approx(gap.prior_gap + gap.future_information + gap.likelihood_gap, abs=1e-10)


def test_variational_relabeling_invariance():
    """Test that permuting theta labels everywhere leaves both objectives unchanged"""
    joint = joint_model(builtin_world("w2"), 1, 2)
    rng = np.random.default_rng(9)
    channel = Channel.random(joint.n_past_datasets, 3, rng)
    prior = PriorTable.random(3, rng)
    lik = LikelihoodTable.random(3, 3, rng)
    perm = [1, 2, 0]
    cj = channel_joint(joint, channel)
    cj_perm = channel_joint(joint, channel.relabeled(perm))
    assert exact_pib_objective(cj_perm, 0.4) == pytest.approx(exact_pib_objective(cj, 0.4), abs=1e-13)
    assert variational_objective(cj_perm, prior.relabeled(perm), lik.relabeled(perm), 0.4) == pytest.approx(
        variational_objective(cj, prior, lik, 0.4), abs=1e-12
    )


def test_optimal_prior(identity_cj, constant_cj):
    """Test the aggregate marginal on the identity and constant channels"""
    np.testing.assert_allclose(optimal_prior(identity_cj).q_theta, [0.5, 0.5], atol=1e-15)
    np.testing.assert_array_equal(optimal_prior(constant_cj).q_theta, [1.0, 0.0])


def test_optimal_prior_beats_uniform():
    """Test that the aggregate marginal never loses to the uniform prior"""
    joint = joint_model(builtin_world("w2"), 2, 1)
    rng = np.random.default_rng(4)
    lik = LikelihoodTable.uniform(3, 3)
    for _ in range(20):
        cj = channel_joint(joint, Channel.random(joint.n_past_datasets, 3, rng))
        assert variational_objective(cj, optimal_prior(cj), lik, 0.0) <= (
            variational_objective(cj, PriorTable.uniform(3), lik, 0.0) + 1e-12
        )
        assert variational_objective(cj, optimal_prior(cj), lik, 0.0) == pytest.approx(
            mutual_information(cj.past_theta()), abs=1e-12
        )


def test_optimal_factorized_likelihood(identity_cj, constant_cj):
    """Test q* on the identity and constant channels"""
    np.testing.assert_allclose(optimal_factorized_likelihood(identity_cj).q_x_given_theta, np.eye(2), atol=1e-15)
    lik = optimal_factorized_likelihood(constant_cj).q_x_given_theta
    np.testing.assert_allclose(lik[0], [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(lik[1], [0.5, 0.5], atol=1e-15)


def test_optimal_factorized_likelihood_unbeaten():
    """Test that random likelihoods never beat q* at beta 1"""
    joint = joint_model(builtin_world("w1"), 2, 1)
    rng = np.random.default_rng(8)
    for _ in range(50):
        cj = channel_joint(joint, Channel.random(joint.n_past_datasets, 2, rng))
        prior = optimal_prior(cj)
        best = variational_objective(cj, prior, optimal_factorized_likelihood(cj), 1.0)
        for _ in range(5):
            assert best <= variational_objective(cj, prior, LikelihoodTable.random(2, 2, rng), 1.0) + 1e-12


def test_conditional_prior_exact_mixture(identity_cj):
    """Test that the exact mixture makes the conditional bound tight"""
    assert conditional_prior_bound(identity_cj, exact_mixture_prior(identity_cj)) == pytest.approx(0.471393, abs=1e-6)


def test_conditional_prior_from_marginal(identity_cj):
    """Test that an x_F-blind conditional prior reduces to I(theta;X_P)"""
    cp = ConditionalPrior.from_prior(optimal_prior(identity_cj), 2)
    assert conditional_prior_bound(identity_cj, cp) == pytest.approx(LN2, abs=1e-12)


def test_conditional_prior_constant_channel(constant_cj):
    """Test that a constant channel scores 0 when q(theta|x_F) sits on its label, and more otherwise"""
    assert conditional_prior_bound(constant_cj, ConditionalPrior(np.array([[1.0, 0.0], [1.0, 0.0]]))) == 0.0
    loose = conditional_prior_bound(constant_cj, ConditionalPrior(np.array([[0.3, 0.7], [0.6, 0.4]])))
    assert loose == pytest.approx(-(0.5 * math.log(0.3) + 0.5 * math.log(0.6)), abs=1e-12)


def test_conditional_prior_support_violation(identity_cj):
    """Test that a conditional prior missing mass is rejected"""
    with pytest.raises(SupportViolation):
        conditional_prior_bound(identity_cj, ConditionalPrior(np.array([[1.0, 0.0], [1.0, 0.0]])))


def test_boltzmann_channel_beta_zero(w1_joint):
    """Test that beta 0 returns the prior on every row"""
    prior = PriorTable(np.array([0.3, 0.7]))
    channel = boltzmann_channel(w1_joint, prior, LikelihoodTable.random(2, 2, np.random.default_rng(0)), 0.0)
    np.testing.assert_allclose(channel.rows, [[0.3, 0.7], [0.3, 0.7]], atol=1e-15)


def test_boltzmann_channel_is_bayes_posterior():
    """Test that beta 1 with the true tables gives the posterior over phi"""
    world = builtin_world("w2")
    joint = joint_model(world, 2, 1)
    prior = PriorTable(world.phi_prior)
    lik = LikelihoodTable(world.obs_given_phi)
    posterior = joint.phi_past().T / joint.past_marginal()[:, None]
    np.testing.assert_allclose(boltzmann_channel(joint, prior, lik, 1.0).rows, posterior, atol=1e-12)
    np.testing.assert_allclose(
        boltzmann_log_partition(joint, prior, lik, 1.0), np.log(joint.past_marginal()), atol=1e-12
    )


def test_boltzmann_channel_impossible_dataset(w1_joint):
    """Test that datasets impossible under every theta are rejected"""
    lik = LikelihoodTable(np.array([[1.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(SupportViolation):
        boltzmann_channel(w1_joint, PriorTable.uniform(2), lik, 1.0)


def test_empirical_bayes_monotone():
    """Test that the empirical Bayes trace never increases"""
    world = builtin_world("w1")
    joint = joint_model(world, 3, 1)
    result = empirical_bayes(joint, LikelihoodTable(world.obs_given_phi), PriorTable(np.array([0.9, 0.1])))
    assert result.converged
    assert all(b <= a + 1e-12 for a, b in zip(result.trace, result.trace[1:]))
    np.testing.assert_allclose(result.prior.q_theta, [0.5, 0.5], atol=1e-4)


def test_validate_beta_grid():
    """Test grid validation"""
    assert validate_beta_grid([0, 0.5]) == [0.0, 0.5]
    with pytest.raises(InvalidGrid, match="empty"):
        validate_beta_grid([])
    with pytest.raises(InvalidGrid, match="increasing"):
        validate_beta_grid([0.5, 0.5])
    with pytest.raises(BetaOutOfRange):
        validate_beta_grid([0.5, 1.0])


def test_information_curve(w1_joint):
    """Test curve records and monotone I(theta;X_F) over the grid"""
    records = information_curve(w1_joint, [0.0, 0.1, 0.5, 0.9, 0.99], SolverConfig(beta=0.0, seed=7))
    assert [r.beta for r in records] == [0.0, 0.1, 0.5, 0.9, 0.99]
    assert records[0].mi_theta_past < 1e-9
    assert records[0].mi_theta_future < 1e-9
    assert records[-1].mi_theta_future >= 0.99 * 0.221754
    assert all(b.mi_theta_future >= a.mi_theta_future - 1e-6 for a, b in zip(records, records[1:]))
    for r in records:
        assert r.variational_objective >= r.exact_objective - 1e-10
    assert CURVE_FIELDS[0] == "beta"
