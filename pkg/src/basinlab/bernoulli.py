"""A two-parameter Bernoulli family with a degenerate truth.

The model maps w = (w1, w2) in a box to Bernoulli(1/2 + w1*w2). The true
distribution is the uniform one, reached everywhere on the cross {w1*w2 = 0},
so the KL landscape has a product-type zero set: its sublevel volumes scale
like sqrt(eps) with a log(1/eps) enhancement (exponent 1/2, multiplicity 2).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .landscapes import Bounds, Landscape
from .simplex import SimplexDist, kl_bernoulli


class SingularBernoulli:
    """Bernoulli model p_w(1) = 1/2 + w1*w2 on a box inside the restricted simplex."""

    def __init__(self, bounds: Bounds | None = None, m_simplex: float = 0.2):
        bounds = bounds or Bounds.symmetric(2, 0.5)
        if bounds.dim != 2:
            raise InvalidInputError("this model has exactly two parameters")
        b = float(np.max(np.abs(np.concatenate([bounds.lo, bounds.hi]))))
        if 0.5 - b * b < m_simplex:
            raise InvalidInputError(
                f"bounds with |w| up to {b} violate the simplex lower bound {m_simplex}"
            )
        self.bounds = bounds
        self.m_simplex = float(m_simplex)
        self.n_outcomes = 2

    # -- parameter-to-distribution map ------------------------------------

    def prob_one(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return 0.5 + w[..., 0] * w[..., 1]

    def dist(self, w: np.ndarray) -> SimplexDist:
        t = float(self.prob_one(np.asarray(w, dtype=float)))
        return SimplexDist(np.array([1.0 - t, t]), lower_bound=self.m_simplex)

    @property
    def truth(self) -> SimplexDist:
        return SimplexDist(np.array([0.5, 0.5]), lower_bound=self.m_simplex)

    def image_interval(self) -> tuple[float, float]:
        """Range of p_w(1) over W; the corners of the box realize the extremes."""
        corners = np.array(
            [[lo1, lo2] for lo1 in (self.bounds.lo[0], self.bounds.hi[0])
             for lo2 in (self.bounds.lo[1], self.bounds.hi[1])]
        )
        vals = self.prob_one(corners)
        return float(vals.min()), float(vals.max())

    # -- KL geometry -------------------------------------------------------

    def kl_from(self, theta_q: float, w: np.ndarray) -> np.ndarray:
        """KL(q || p_w) for q = Bernoulli(theta_q), vectorized over w."""
        return kl_bernoulli(theta_q, self.prob_one(w))

    def kl_to(self, w: np.ndarray, theta_p: float) -> np.ndarray:
        """KL(p_w || p) for p = Bernoulli(theta_p), vectorized over w."""
        return kl_bernoulli(self.prob_one(w), theta_p)

    def kl_landscape(self) -> Landscape:
        """KL(truth || p_w) as a Landscape, ground truth (1/2, 2)."""

        def value(w):
            return kl_bernoulli(0.5, self.prob_one(w))

        def grad(w):
            w = np.asarray(w, dtype=float)
            t = self.prob_one(w)
            # d/dt KL(1/2 || Bernoulli(1/2+s)) at s = t - 1/2, with t = 1/2 + w1 w2
            s = t - 0.5
            dk_ds = 0.5 * (1.0 / (0.5 - s) - 1.0 / (0.5 + s))
            g = np.zeros_like(w)
            g[..., 0] = dk_ds * w[..., 1]
            g[..., 1] = dk_ds * w[..., 0]
            return g

        return Landscape(
            dim=2, bounds=self.bounds, value=value, grad=grad,
            true_lambda=0.5, true_multiplicity=2, name="singular-bernoulli-kl",
        )

    # -- sampling ----------------------------------------------------------

    def sample_counts(self, theta: float, n: int, rng: np.random.Generator) -> int:
        """Number of ones among n i.i.d. draws from Bernoulli(theta)."""
        return int(rng.binomial(n, theta))

    def mle_theta(self, ones: int, n: int) -> float:
        """Empirical frequency clamped into the model image."""
        lo, hi = self.image_interval()
        return float(np.clip(ones / n, lo, hi))
