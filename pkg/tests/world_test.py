import itertools

import numpy as np
import pytest

from src.pib.errors import (
    DimensionMismatch,
    EmptyAlphabet,
    NegativeProbability,
    NotNormalized,
    SizeCapExceeded,
    UnknownWorld,
    ZeroProbabilityDataset,
)
from src.pib.infotheory import mutual_information, past_phi_information, predictive_information
from src.pib.world import (
    DatasetIndex,
    build_world,
    builtin_world,
    dataset_counts,
    dataset_index,
    enumerate_datasets,
    joint_model,
    predictive,
)


@pytest.fixture
def w1():
    return builtin_world("w1")


@pytest.fixture
def coin_world():
    """One-phi world: a fair coin with nothing to learn."""
    return build_world([1.0], [[0.5, 0.5]])


def test_build_world_w1(w1):
    """Test that the canonical world has the documented tables"""
    assert w1.k_phi == 2
    assert w1.k_x == 2
    np.testing.assert_array_equal(w1.obs_given_phi, [[0.9, 0.1], [0.1, 0.9]])


def test_build_world_single_phi(coin_world):
    """Test the degenerate single-cause world"""
    assert coin_world.k_phi == 1
    assert coin_world.k_x == 2


def test_build_world_not_normalized():
    """Test that a prior off by 1e-4 is rejected"""
    with pytest.raises(NotNormalized, match="phi_prior"):
        build_world([0.5, 0.5001], [[0.9, 0.1], [0.1, 0.9]])


def test_build_world_renormalizes_small_deviation():
    """Test that float noise below 1e-9 is renormalised away"""
    world = build_world([0.5, 0.5 + 1e-12], [[0.9, 0.1], [0.1, 0.9]])
    assert world.phi_prior.sum() == pytest.approx(1.0, abs=1e-15)


def test_build_world_negative_probability():
    """Test that negative entries are rejected"""
    with pytest.raises(NegativeProbability):
        build_world([1.2, -0.2], [[0.9, 0.1], [0.1, 0.9]])


def test_build_world_small_alphabet():
    """Test that an x alphabet of one symbol is rejected"""
    with pytest.raises(EmptyAlphabet):
        build_world([1.0], [[1.0]])


def test_build_world_dimension_mismatch():
    """Test that the tables must agree on K_phi"""
    with pytest.raises(DimensionMismatch):
        build_world([0.5, 0.5], [[0.9, 0.1]])


def test_world_tables_are_read_only(w1):
    """Test that world tables cannot be mutated in place"""
    with pytest.raises(ValueError):
        w1.phi_prior[0] = 0.7


def test_builtin_world_unknown():
    """Test that unknown names raise a KeyError-compatible error"""
    with pytest.raises(UnknownWorld, match="w9"):
        builtin_world("w9")
    with pytest.raises(KeyError):
        builtin_world("w9")


def test_builtin_world_w2():
    """Test the three-symbol fixture world"""
    w2 = builtin_world("w2")
    assert (w2.k_phi, w2.k_x) == (3, 3)
    np.testing.assert_allclose(w2.obs_given_phi.sum(axis=1), 1.0)


def test_enumeration_order():
    """Test that datasets are enumerated lexicographically, first draw most significant"""
    datasets = enumerate_datasets(2, 3)
    assert datasets.shape == (8, 3)
    assert [tuple(d) for d in datasets] == list(itertools.product(range(2), repeat=3))
    assert dataset_index((1, 0, 1), 2) == 5
    assert DatasetIndex((2, 1)).index(3) == 7


def test_dataset_index_rejects_bad_symbols():
    """Test that out-of-alphabet draws are rejected"""
    with pytest.raises(DimensionMismatch):
        dataset_index((0, 2), 2)


def test_dataset_counts():
    """Test the per-symbol count table"""
    counts = dataset_counts(3, 2)
    assert counts.shape == (9, 3)
    np.testing.assert_array_equal(counts[dataset_index((2, 2), 3)], [0, 0, 2])
    np.testing.assert_array_equal(counts.sum(axis=1), 2)


def test_joint_model_w1_cells(w1):
    """Test hand-computed cells of the W1 joint"""
    joint = joint_model(w1, 1, 1)
    assert joint.joint.shape == (2, 2, 2)
    assert joint.joint[1, 1, 1] == pytest.approx(0.405, abs=1e-15)
    assert joint.past_future()[1, 1] == pytest.approx(0.41, abs=1e-15)
    assert joint.joint.sum() == pytest.approx(1.0, abs=1e-12)


def test_joint_model_reconstruction():
    """Test the joint against a direct product over every cell"""
    world = builtin_world("w2")
    joint = joint_model(world, 2, 1)
    for phi in range(world.k_phi):
        for i, past in enumerate(joint.past_datasets()):
            for j, future in enumerate(joint.future_datasets()):
                expected = world.phi_prior[phi] * np.prod(world.obs_given_phi[phi, np.concatenate([past, future])])
                assert joint.joint[phi, i, j] == pytest.approx(expected, abs=1e-14)


def test_joint_model_independent_coins(coin_world):
    """Test that a single-phi world yields independent fair coins"""
    joint = joint_model(coin_world, 2, 1)
    np.testing.assert_allclose(joint.joint, np.full((1, 4, 2), 1 / 8), atol=1e-15)


def test_joint_model_size_cap(w1):
    """Test the cell cap"""
    with pytest.raises(SizeCapExceeded, match="cap"):
        joint_model(w1, 10, 10, size_cap=1000)


def test_joint_model_needs_draws(w1):
    """Test that N and M must be positive"""
    with pytest.raises(DimensionMismatch):
        joint_model(w1, 0, 1)


def test_predictive_w1(w1):
    """Test p(x_F | x_P) on W1"""
    joint = joint_model(w1, 1, 1)
    assert predictive(joint, DatasetIndex((1,)))[1] == pytest.approx(0.82, abs=1e-12)
    assert predictive(joint, (0,))[0] == pytest.approx(0.82, abs=1e-12)


def test_predictive_matches_posterior_mixture(w1):
    """Test p(x_F | x_P) = sum_phi p(phi | x_P) p(x_F | phi)"""
    joint = joint_model(w1, 2, 2)
    x_past = (0, 1)
    idx = dataset_index(x_past, 2)
    posterior = joint.phi_past()[:, idx] / joint.phi_past()[:, idx].sum()
    future_given_phi = joint.phi_future() / joint.world.phi_prior[:, None]
    np.testing.assert_allclose(predictive(joint, x_past), posterior @ future_given_phi, atol=1e-12)


def test_predictive_single_phi(coin_world):
    """Test that nothing is learned in a single-cause world"""
    joint = joint_model(coin_world, 2, 2)
    np.testing.assert_allclose(predictive(joint, (1, 1)), 0.25, atol=1e-15)


def test_predictive_zero_probability():
    """Test that impossible pasts are rejected"""
    joint = joint_model(build_world([1.0], [[1.0, 0.0]]), 1, 1)
    with pytest.raises(ZeroProbabilityDataset):
        predictive(joint, (1,))


def test_predictive_wrong_length(w1):
    """Test that the past length must equal N"""
    with pytest.raises(DimensionMismatch):
        predictive(joint_model(w1, 2, 1), (0,))


def test_exchangeability():
    """Test that permuting past draws leaves p(x_P) and the predictive bit-identical"""
    joint = joint_model(builtin_world("w2"), 3, 1)
    marginal = joint.past_marginal()
    for draws in [(0, 1, 2), (2, 2, 1)]:
        reference = predictive(joint, draws)
        for perm in itertools.permutations(draws):
            assert marginal[dataset_index(perm, 3)] == marginal[dataset_index(draws, 3)]
            np.testing.assert_array_equal(predictive(joint, perm), reference)


def test_predictive_information_grows_with_future(w1):
    """Test I(X_P;X_F) is non-decreasing in M and bounded by I(X_P;phi)"""
    values = [predictive_information(joint_model(w1, 1, m)) for m in (1, 2, 3)]
    assert values[0] == pytest.approx(0.221754, abs=1e-6)
    assert values[0] <= values[1] + 1e-15 <= values[2] + 2e-15
    ceiling = past_phi_information(joint_model(w1, 1, 1))
    assert all(v <= ceiling + 1e-12 for v in values)
    assert ceiling == pytest.approx(mutual_information(joint_model(w1, 1, 3).phi_past()), abs=1e-15)
