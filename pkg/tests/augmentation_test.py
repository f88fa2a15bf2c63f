import numpy as np
import pytest

from src.inference.augmentation import (
    AugmentationSpec,
    augmentation_gap_analytic,
    augmentation_gap_mc,
    augmented_gibbs_objective,
)
from src.inference.families import GaussianMeanModel, gaussian_power
from src.inference.gibbs import GaussianVariationalParams, GibbsObjectiveSpec, gibbs_objective
from src.pib.errors import InvalidSetting


def test_spec_validation():
    """Test that negative noise and empty sample counts are rejected"""
    with pytest.raises(InvalidSetting, match="noise_std"):
        AugmentationSpec(noise_std=-0.1)
    with pytest.raises(InvalidSetting, match="mc_samples"):
        AugmentationSpec(noise_std=0.5, mc_samples=0)


def test_analytic_gap():
    """Test the closed-form gap and its independence of x and theta"""
    spec = AugmentationSpec(noise_std=0.5)
    assert augmentation_gap_analytic(0.3, -0.2, 1.0, spec) == -0.125
    for x, theta in [(0.0, 0.0), (5.0, -3.0), (-1.0, 2.5)]:
        assert augmentation_gap_analytic(x, theta, 1.0, spec) == -0.125
    assert augmentation_gap_analytic(0.3, -0.2, 1.0, AugmentationSpec(noise_std=0.0)) == 0.0


def test_analytic_gap_obs_var():
    """Test that obs_var must be positive"""
    with pytest.raises(InvalidSetting, match="obs_var"):
        augmentation_gap_analytic(0.0, 0.0, 0.0, AugmentationSpec(noise_std=0.5))


def test_jensen_direction():
    """Test that the gap is never positive"""
    rng = np.random.default_rng(0)
    for _ in range(100):
        spec = AugmentationSpec(noise_std=float(rng.uniform(0.0, 3.0)))
        gap = augmentation_gap_analytic(float(rng.normal()), float(rng.normal()), float(rng.uniform(0.1, 4.0)), spec)
        assert gap <= 1e-12


def test_mc_gap_matches_analytic():
    """Test the Monte Carlo estimate against -0.125"""
    spec = AugmentationSpec(noise_std=0.5, mc_samples=100_000, seed=7)
    mc = augmentation_gap_mc(0.3, -0.2, 1.0, spec)
    assert mc.within(-0.125)
    assert mc.standard_error > 0


def test_mc_gap_large_noise():
    """Test the Monte Carlo estimate against -2 for noise_std 2"""
    spec = AugmentationSpec(noise_std=2.0, mc_samples=100_000, seed=7)
    assert augmentation_gap_mc(0.3, -0.2, 1.0, spec).within(-2.0)


def test_mc_gap_without_noise():
    """Test that zero noise gives exactly 0 with zero standard error"""
    mc = augmentation_gap_mc(0.3, -0.2, 1.0, AugmentationSpec(noise_std=0.0, mc_samples=1000))
    assert mc.estimate == 0.0
    assert mc.standard_error == 0.0


def test_mc_gap_is_seeded():
    """Test that the same seed reproduces the estimate exactly"""
    spec = AugmentationSpec(noise_std=0.5, mc_samples=1000, seed=3)
    assert augmentation_gap_mc(1.0, 0.0, 1.0, spec) == augmentation_gap_mc(1.0, 0.0, 1.0, spec)


def test_mc_needs_two_samples():
    """Test that a standard error needs at least two samples"""
    with pytest.raises(InvalidSetting, match="2 samples"):
        augmentation_gap_mc(0.0, 0.0, 1.0, AugmentationSpec(noise_std=0.5, mc_samples=1))


@pytest.mark.parametrize("noise_std", [0.0, 0.5, 2.0])
def test_bound_chain(noise_std):
    """Test augmented >= clean >= -log Z with the exact excess"""
    model = GaussianMeanModel(0.0, 1.0, 1.0, [1.0, 3.0])
    spec = GibbsObjectiveSpec(model, 1.0)
    aug = AugmentationSpec(noise_std=noise_std)
    rng = np.random.default_rng(1)
    points = [GaussianVariationalParams.from_moments(4 / 3, 1 / 3)]
    points += [GaussianVariationalParams(float(rng.normal()), float(rng.uniform(-1, 0.5))) for _ in range(20)]
    floor = -gaussian_power(model, 1.0).log_partition
    for params in points:
        clean = gibbs_objective(params, spec)
        augmented = augmented_gibbs_objective(params, spec, aug)
        assert augmented >= clean - 1e-10
        assert clean >= floor - 1e-10
        assert augmented - clean == pytest.approx(spec.beta * model.n * noise_std ** 2 / 2.0, abs=1e-10)
