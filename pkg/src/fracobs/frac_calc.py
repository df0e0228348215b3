"""Fractional integrals and Caputo derivatives on uniform time grids.

Riemann-Liouville integrals use product-trapezoidal weights (piecewise-linear
interpolant integrated exactly against the power kernel); Caputo derivatives
use the L1 scheme.  The right-sided operators are assembled from their own
weights, not by reflecting the left-sided ones, so the reflection identities
are a genuine check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GridMismatchError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform nodes ``t_k = k T / n_steps`` on ``[0, T]``."""

    horizon: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise DomainError(f"horizon must be positive, got {self.horizon!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"n_steps must be an integer >= 2, got {self.n_steps!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.horizon
        return t


@dataclass(frozen=True)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_steps + 1,):
            raise GridMismatchError(f"expected {self.grid.n_steps + 1} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("time series contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, f, grid: TimeGrid) -> TimeSeries:
        return cls(grid, np.asarray(f(grid.nodes), dtype=float) * np.ones(grid.n_steps + 1))


def reflect(f: TimeSeries) -> TimeSeries:
    """Time reversal ``g(t_k) = f(t_{n-k})``."""
    return TimeSeries(f.grid, f.values[::-1].copy())


def _rl_weights(q: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Toeplitz weights ``c_m`` and first-node weights ``a_k`` of the product trapezoidal rule.

    ``I^q f(t_k) = h^q / Gamma(q+2) * (a_k f_0 + sum_{j=1}^k c_{k-j} f_j)``.
    """
    m = np.arange(n + 1, dtype=float)
    p = q + 1.0
    c = np.empty(n + 1)
    c[0] = 1.0
    c[1:] = (m[1:] + 1.0) ** p - 2.0 * m[1:] ** p + (m[1:] - 1.0) ** p
    a = np.zeros(n + 1)
    a[1:] = (m[1:] - 1.0) ** p - (m[1:] - q - 1.0) * m[1:] ** q
    return c, a


def rl_integral_left(f: TimeSeries, q: float) -> TimeSeries:
    """Left Riemann-Liouville integral ``(0 I_t^q f)(t_k)``, exact for piecewise-linear ``f``."""
    q = _positive(q)
    n = f.grid.n_steps
    c, a = _rl_weights(q, n)
    v = f.values
    out = np.zeros(n + 1)
    out[1:] = a[1:] * v[0] + np.convolve(c, v[1:])[:n]
    return TimeSeries(f.grid, out * f.grid.dt**q / math.gamma(q + 2.0))


def rl_integral_right(f: TimeSeries, q: float) -> TimeSeries:
    """Right Riemann-Liouville integral ``(t I_T^q f)(t_k)`` with the mirrored kernel ``(s - t)^(q-1)``."""
    q = _positive(q)
    n = f.grid.n_steps
    c, a = _rl_weights(q, n)
    v = f.values
    out = np.zeros(n + 1)
    # I(t_k) = a_{n-k} f_n + sum_{j=k}^{n-1} c_{j-k} f_j
    corr = np.correlate(v[:n], c[:n], mode="full")[n - 1 :]
    out[:n] = a[n - np.arange(n)] * v[n] + corr[:n]
    return TimeSeries(f.grid, out * f.grid.dt**q / math.gamma(q + 2.0))


def _l1_weights(q: float, n: int) -> np.ndarray:
    m = np.arange(n, dtype=float)
    return (m + 1.0) ** (1.0 - q) - m ** (1.0 - q)


def caputo_left(f: TimeSeries, q: float) -> TimeSeries:
    """L1 discretisation of the left Caputo derivative.

    Node 0 carries 0 by convention (the defining integral is empty there).
    Truncation error is ``O(dt^(2-q))`` for twice-differentiable ``f``.
    """
    q = _caputo_order(q)
    n = f.grid.n_steps
    b = _l1_weights(q, n)
    d = np.diff(f.values)
    out = np.zeros(n + 1)
    # D(t_k) = sum_{j=0}^{k-1} b_{k-1-j} (f_{j+1} - f_j)
    out[1:] = np.convolve(b, d)[:n]
    return TimeSeries(f.grid, out / (f.grid.dt**q * math.gamma(2.0 - q)))


def caputo_right(f: TimeSeries, q: float) -> TimeSeries:
    """L1 discretisation of the right Caputo derivative; node ``n_steps`` carries 0."""
    q = _caputo_order(q)
    n = f.grid.n_steps
    b = _l1_weights(q, n)
    d = np.diff(f.values)
    out = np.zeros(n + 1)
    # D(t_k) = -sum_{j=k}^{n-1} b_{j-k} (f_{j+1} - f_j)
    out[:n] = -np.correlate(d, b, mode="full")[n - 1 :][:n]
    return TimeSeries(f.grid, out / (f.grid.dt**q * math.gamma(2.0 - q)))


def _positive(q: float) -> float:
    q = float(q)
    if not (math.isfinite(q) and q > 0.0):
        raise DomainError(f"integral order must be positive, got {q!r}")
    return q


def _caputo_order(q: float) -> float:
    q = float(getattr(q, "q", q))
    if not (0.0 < q < 1.0):
        raise DomainError(f"Caputo order must lie in (0, 1), got {q!r}")
    return q
