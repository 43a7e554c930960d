"""Distributions on finite outcome spaces, restricted away from the boundary.

All KL divergences are in nats; conversion to bits happens only at reporting
boundaries (CSV writers, bit-budget formulas).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SimplexDist:
    """A probability vector with entries bounded below by `lower_bound`."""

    probs: np.ndarray
    lower_bound: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 1 or len(p) < 2:
            raise InvalidInputError("a distribution needs a 1-d vector of >= 2 probabilities")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"probabilities sum to {p.sum()}, not 1")
        if self.lower_bound > 0 and p.min() < self.lower_bound - _SUM_TOL:
            raise InvalidInputError(
                f"min probability {p.min()} below declared lower bound {self.lower_bound}"
            )

    def __len__(self) -> int:
        return len(self.probs)


def kl(q: SimplexDist | np.ndarray, p: SimplexDist | np.ndarray) -> float:
    """KL(q || p) = sum q log(q/p) in nats; zero iff q == p."""
    qv = q.probs if isinstance(q, SimplexDist) else np.asarray(q, dtype=float)
    pv = p.probs if isinstance(p, SimplexDist) else np.asarray(p, dtype=float)
    if qv.shape != pv.shape:
        raise InvalidInputError("distributions live on different outcome spaces")
    if np.any(pv <= 0):
        raise InvalidInputError("second argument has a zero probability; KL is infinite")
    mask = qv > 0
    return float(np.sum(qv[mask] * np.log(qv[mask] / pv[mask])))


def kl_bernoulli(theta_q, theta_p):
    """Vectorized KL between Bernoulli(theta_q) and Bernoulli(theta_p), in nats."""
    tq = np.asarray(theta_q, dtype=float)
    tp = np.asarray(theta_p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(tq > 0, tq * np.log(tq / tp), 0.0)
        b = np.where(tq < 1, (1 - tq) * np.log((1 - tq) / (1 - tp)), 0.0)
    return a + b


def sample_restricted(rng: np.random.Generator, size: int, n_outcomes: int, lower_bound: float) -> np.ndarray:
    """Sample `size` distributions uniformly from the restricted simplex.

    Each row has min entry >= lower_bound; requires lower_bound * n_outcomes < 1.
    """
    if lower_bound * n_outcomes >= 1.0:
        raise InvalidInputError("lower bound too large for this outcome space")
    free = 1.0 - lower_bound * n_outcomes
    u = rng.dirichlet(np.ones(n_outcomes), size=size)
    return lower_bound + free * u
