from .beta_bernoulli import BetaBernoulliModel, beta_bernoulli_power, partition_quadrature
from .dirichlet import DirichletCategoricalModel, dirichlet_categorical_power
from .gaussian import GaussianMeanModel, gaussian_power

FAMILIES = {
    BetaBernoulliModel.name: BetaBernoulliModel,
    GaussianMeanModel.name: GaussianMeanModel,
    DirichletCategoricalModel.name: DirichletCategoricalModel,
}

__all__ = [
    "BetaBernoulliModel",
    "DirichletCategoricalModel",
    "FAMILIES",
    "GaussianMeanModel",
    "beta_bernoulli_power",
    "dirichlet_categorical_power",
    "gaussian_power",
    "partition_quadrature",
]
