"""Epstein-Zin preferences and the certainty-equivalent aggregator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Preferences:
    """Discount factor, intertemporal elasticity ``psi`` and risk aversion ``gamma``."""

    beta: float = 0.985
    psi: float = 1.5
    gamma: float = 3.066

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise DomainError("beta must lie in (0, 1)")
        if self.psi <= 0 or self.psi == 1:
            raise DomainError("psi must be positive and different from 1")
        if self.gamma <= 0 or self.gamma == 1:
            raise DomainError("gamma must be positive and different from 1")

    @property
    def kappa(self) -> float:
        """``1 - 1/psi``: scale that makes ``kappa * V`` positive."""
        return 1.0 - 1.0 / self.psi

    @property
    def theta(self) -> float:
        """``(1 - gamma) / (1 - 1/psi)``: exponent of the certainty equivalent."""
        return (1.0 - self.gamma) / self.kappa

    def utility(self, c):
        c = np.asarray(c, dtype=float)
        return c ** self.kappa / self.kappa

    def marginal_utility(self, c):
        return np.asarray(c, dtype=float) ** (-1.0 / self.psi)


def ez_aggregate(values, probs, theta: float, kappa: float = 1.0):
    """Certainty equivalent of next-period values.

    ``G = (1/kappa) * (sum_k p_k (kappa V_k)^theta)^(1/theta)``; with
    ``kappa = 1`` and ``values`` already equal to ``kappa V`` this is the
    plain power mean.  The last axis of ``values`` indexes outcomes.

    Raises
    ------
    DomainError
        If a transformed value ``kappa * V`` is not positive or the
        probabilities do not sum to one.
    """
    w = kappa * np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    if np.any(w <= 0):
        raise DomainError("transformed values must be positive")
    if np.any(p < 0) or not np.allclose(p.sum(axis=-1), 1.0, atol=1e-12):
        raise DomainError("probabilities must be non-negative and sum to one")
    if theta == 1.0:
        return np.sum(p * w, axis=-1) / kappa
    return np.sum(p * w ** theta, axis=-1) ** (1.0 / theta) / kappa


def ez_aggregate_grad(values, grads, probs, theta: float, kappa: float):
    """Certainty equivalent and its gradient.

    Parameters
    ----------
    values : (..., K) outcome values ``V_k``
    grads : (..., K, n) gradients of ``V_k`` with respect to the next state
    probs : (..., K) outcome probabilities

    Returns
    -------
    G : (...)
    dG : (..., n)
        ``[E (kappa V)^theta]^(1/theta - 1) * E[(kappa V)^(theta - 1) dV]``.
    """
    w = kappa * values
    wt = w ** (theta - 1.0)
    mean = np.sum(probs * wt * w, axis=-1)
    g = mean ** (1.0 / theta) / kappa
    dg = mean[..., None] ** (1.0 / theta - 1.0) * np.sum((probs * wt)[..., None] * grads, axis=-2)
    return g, dg
