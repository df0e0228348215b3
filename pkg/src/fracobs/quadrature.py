"""Composite Gauss-Legendre rules shared by the space and time integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError


@lru_cache(maxsize=32)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def composite_gauss(breaks, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the Gauss-Legendre rule of ``order`` on every panel of ``breaks``."""
    b = np.asarray(breaks, dtype=float)
    if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
        raise DomainError("panel breakpoints must be strictly increasing")
    x, w = _legendre(int(order))
    a, c = b[:-1, None], b[1:, None]
    nodes = 0.5 * (a + c) + 0.5 * (c - a) * x[None, :]
    weights = 0.5 * (c - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True)
class TimeQuadrature:
    """Composite Gauss-Legendre rule on ``[0, T]`` refined geometrically towards ``u = 0``.

    ``n_panels`` uniform panels cover ``[0, T]``; the first one is then split
    ``grading_levels`` times in halves, so the smallest panel has length
    ``T / n_panels / 2**grading_levels``.  Mode ``i`` of a fractional diffusion
    relaxes on the time scale ``|lambda_i|**(-1/q)``, which for twenty modes and
    small ``q`` is far below any uniform panel; the grading resolves it.
    """

    horizon: float
    n_panels: int = 64
    order: int = 8
    grading_levels: int = 33
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    breaks: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if self.n_panels < 1 or self.order < 1 or self.grading_levels < 0:
            raise DomainError("panel count and order must be positive, grading levels non-negative")
        h = self.horizon / self.n_panels
        fine = h * 0.5 ** np.arange(self.grading_levels, 0, -1)
        coarse = h * np.arange(1, self.n_panels + 1)
        coarse[-1] = self.horizon
        breaks = np.concatenate([[0.0], fine, coarse])
        x, w = composite_gauss(breaks, self.order)
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    @property
    def key(self) -> tuple:
        return (self.horizon, self.n_panels, self.order, self.grading_levels)

    def singular_weights(self, q: float) -> np.ndarray:
        """Weights for integrands ``u**(q-1) g(u)`` with smooth ``g``, on the same nodes.

        Panels away from the origin absorb the power into the weights; on the
        first panel the weights integrate the product with the degree
        ``order-1`` interpolant of ``g`` exactly (moments of ``u**(q-1)``).
        """
        w = self.weights * self.nodes ** (q - 1.0)
        eps = self.breaks[1]
        x0 = self.nodes[: self.order] / eps
        j = np.arange(self.order)
        vander = x0[None, :] ** j[:, None]
        moments = 1.0 / (j + q)
        w[: self.order] = np.linalg.solve(vander, moments) * eps**q
        return w
