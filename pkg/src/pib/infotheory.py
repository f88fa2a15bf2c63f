"""Exact information quantities over finite probability tables.

All values are in nats; `to_bits` converts for reporting. Tables are
validated (finite, non-negative, unit mass within 1e-9) before use; 0 log 0
is taken as 0.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import entr, rel_entr

from src.pib.errors import DimensionMismatch, NumericalFailure, SupportViolation
from src.pib.tables import Channel, as_distribution
from src.pib.world import JointModel

logger = logging.getLogger("pib.infotheory")

# Information values within CLAMP_TOL of zero, on either side, are rounding noise.
CLAMP_TOL = 1e-12

LN2 = float(np.log(2.0))


def _as_joint(table, name: str, ndim: int) -> np.ndarray:
    arr = np.asarray(table, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must have {ndim} dimensions, got shape {arr.shape}")
    return as_distribution(arr.ravel(), name).reshape(arr.shape)


def _clamp(value: float, name: str) -> float:
    if abs(value) <= CLAMP_TOL:
        return 0.0
    if value > 0.0:
        return value
    raise NumericalFailure(f"{name} evaluated to {value:.3g} nats")


def to_bits(nats: float) -> float:
    return nats / LN2

def entropy(p) -> float:
    """Shannon entropy H(p) in nats."""
    arr = as_distribution(np.ravel(p), "distribution")
    return float(entr(arr).sum())


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats.

    Raises:
        SupportViolation: If q is zero where p has mass.
    """
    p = as_distribution(np.ravel(p), "p")
    q = as_distribution(np.ravel(q), "q")
    if p.shape != q.shape:
        raise DimensionMismatch(f"KL arguments differ in size: {p.size} vs {q.size}")
    if np.any((p > 0) & (q == 0)):
        raise SupportViolation("KL(p || q) is infinite: q vanishes where p has mass")
    return _clamp(float(rel_entr(p, q).sum()), "KL divergence")


def mutual_information(joint2) -> float:
    """I(X; Y) for a pairwise table p(x, y)."""
    p = _as_joint(joint2, "pairwise joint", 2)
    reference = np.outer(p.sum(axis=1), p.sum(axis=0))
    return _clamp(float(rel_entr(p, reference).sum()), "mutual information")


def conditional_mutual_information(joint3, axis: int = 2) -> float:
    """I(A; B | C) for a three-way table, conditioning on `axis`.

    The two remaining axes, in their original order, are A and B.
    """
    p = np.moveaxis(_as_joint(joint3, "three-way joint", 3), axis, -1)
    p_ac = p.sum(axis=1)
    p_bc = p.sum(axis=0)
    p_c = p.sum(axis=(0, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        reference = np.where(p_c > 0, p_ac[:, None, :] * p_bc[None, :, :] / p_c, 0.0)
    return _clamp(float(rel_entr(p, reference).sum()), "conditional mutual information")


@dataclass(frozen=True, eq=False)
class ChannelJoint:
    """Exact table p(phi, x_P, x_F, theta) induced by a JointModel and a Channel."""

    joint4: np.ndarray
    model: JointModel
    channel: Channel

    @property
    def k_theta(self) -> int:
        return self.joint4.shape[3]

    def past_future_theta(self) -> np.ndarray:
        return self.joint4.sum(axis=0)

    def past_theta(self) -> np.ndarray:
        return self.joint4.sum(axis=(0, 2))

    def future_theta(self) -> np.ndarray:
        return self.joint4.sum(axis=(0, 1))

    def phi_theta(self) -> np.ndarray:
        return self.joint4.sum(axis=(1, 2))

    def theta_marginal(self) -> np.ndarray:
        return self.joint4.sum(axis=(0, 1, 2))

    def past_marginal(self) -> np.ndarray:
        return self.model.past_marginal()


def channel_joint(joint: JointModel, channel: Channel) -> ChannelJoint:
    """Builds p(phi, x_P, x_F, theta) = p(phi, x_P, x_F) p(theta | x_P).

    Raises:
        DimensionMismatch: If the channel does not have one row per past dataset.
    """
    if channel.n_datasets != joint.n_past_datasets:
        raise DimensionMismatch(
            f"channel has {channel.n_datasets} rows, joint has {joint.n_past_datasets} past datasets"
        )
    joint4 = joint.joint[:, :, :, None] * channel.rows[None, :, None, :]
    joint4.setflags(write=False)
    return ChannelJoint(joint4=joint4, model=joint, channel=channel)


@dataclass(frozen=True)
class InformationSummary:
    """Every information quantity the bottleneck objective is built from (nats)."""

    mi_theta_past: float
    mi_theta_future: float
    cmi_past_given_future: float
    cmi_future_given_past: float
    mi_theta_past_future: float
    mi_theta_phi: float


def information_summary(cj: ChannelJoint) -> InformationSummary:
    pft = cj.past_future_theta()
    return InformationSummary(
        mi_theta_past=mutual_information(cj.past_theta()),
        mi_theta_future=mutual_information(cj.future_theta()),
        cmi_past_given_future=conditional_mutual_information(pft, axis=1),
        cmi_future_given_past=conditional_mutual_information(pft, axis=0),
        mi_theta_past_future=mutual_information(pft.reshape(-1, cj.k_theta)),
        mi_theta_phi=mutual_information(cj.phi_theta()),
    )


@dataclass(frozen=True)
class MarkovIdentityReport:
    residual: float
    mi_theta_future: float
    mi_theta_past: float
    cmi_past_given_future: float
    cmi_future_given_past: float


def markov_identity_residual(cj: ChannelJoint) -> MarkovIdentityReport:
    """|I(theta;X_F) - I(theta;X_P) + I(theta;X_P|X_F)|, with its components.

    Because theta depends on x_F only through x_P, the residual and
    I(theta;X_F|X_P) both vanish up to rounding. Callers assert on them.
    """
    mi_tf = mutual_information(cj.future_theta())
    mi_tp = mutual_information(cj.past_theta())
    pft = cj.past_future_theta()
    cmi_pf = conditional_mutual_information(pft, axis=1)
    cmi_fp = conditional_mutual_information(pft, axis=0)
    residual = abs(mi_tf - mi_tp + cmi_pf)
    if residual > 1e-10 or cmi_fp > 1e-12:
        logger.warning("Markov identity residual %.3g, I(theta;X_F|X_P)=%.3g", residual, cmi_fp)
    return MarkovIdentityReport(
        residual=residual,
        mi_theta_future=mi_tf,
        mi_theta_past=mi_tp,
        cmi_past_given_future=cmi_pf,
        cmi_future_given_past=cmi_fp,
    )


def predictive_information(joint: JointModel) -> float:
    """I(X_P; X_F)."""
    return mutual_information(joint.past_future())


def past_phi_information(joint: JointModel) -> float:
    """I(X_P; phi)."""
    return mutual_information(joint.phi_past())
