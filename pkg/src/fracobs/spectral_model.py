"""Dirichlet diffusion on [0, 1] in the sine eigenbasis.

States are truncated coefficient vectors in the L2-orthonormal basis
``phi_i(x) = sqrt(2) sin(i pi x)`` with eigenvalues ``lambda_i = -i^2 pi^2``.
The fractional solution operator acts diagonally:
``S_q(t) y = sum_i E_q(lambda_i t^q) <y, phi_i> phi_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, GridMismatchError
from .frac_calc import TimeGrid, TimeSeries, caputo_left
from .quadrature import composite_gauss
from .special_functions import ml_array, order_value

SQRT2 = math.sqrt(2.0)


def model_order(q) -> float:
    """Order accepted by the model: ``0 < q <= 1``, with ``q = 1`` the classical heat equation."""
    q = order_value(q, strict=False)
    if q > 1.0:
        raise DomainError(f"diffusion order must lie in (0, 1], got {q!r}")
    return q


@dataclass(frozen=True)
class SpectralBasis:
    """Truncated Dirichlet-Laplacian eigenbasis.

    By default the first ``n_modes`` modes; ``modes`` selects explicit mode
    numbers instead (e.g. ``(2,)`` for a single-mode model).
    """

    n_modes: int = 20
    modes: tuple[int, ...] | None = None
    indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.modes is None:
            if int(self.n_modes) != self.n_modes or self.n_modes < 1:
                raise DomainError(f"n_modes must be a positive integer, got {self.n_modes!r}")
            idx = np.arange(1, self.n_modes + 1)
        else:
            idx = np.asarray(sorted(set(int(m) for m in self.modes)), dtype=int)
            if idx.size == 0 or idx[0] < 1:
                raise DomainError("mode numbers must be positive")
            object.__setattr__(self, "modes", tuple(int(m) for m in idx))
            object.__setattr__(self, "n_modes", int(idx.size))
        object.__setattr__(self, "indices", idx)

    @property
    def eigenvalues(self) -> np.ndarray:
        return -((self.indices * math.pi) ** 2).astype(float)

    def phi(self, x) -> np.ndarray:
        """Eigenfunction values, shape ``(n_modes,) + shape(x)``."""
        x = np.asarray(x, dtype=float)
        k = self.indices.reshape((-1,) + (1,) * x.ndim)
        return SQRT2 * np.sin(k * math.pi * x[None, ...])


@dataclass(frozen=True)
class SpectralState:
    basis: SpectralBasis
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a = np.array(self.coefficients, dtype=float).reshape(-1)
        if a.shape != (self.basis.n_modes,):
            raise GridMismatchError(f"expected {self.basis.n_modes} coefficients, got {a.size}")
        if not np.all(np.isfinite(a)):
            raise DomainError("state coefficients must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)

    @classmethod
    def zero(cls, basis: SpectralBasis) -> SpectralState:
        return cls(basis, np.zeros(basis.n_modes))

    @classmethod
    def mode(cls, basis: SpectralBasis, i: int) -> SpectralState:
        a = np.zeros(basis.n_modes)
        hit = np.flatnonzero(basis.indices == i)
        if hit.size == 0:
            raise DomainError(f"mode {i} is not part of the basis")
        a[hit[0]] = 1.0
        return cls(basis, a)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform nodes ``x_m = m / M`` on [0, 1]; each cell carries a Gauss-Legendre panel."""

    n_cells: int = 64
    order: int = 8

    def __post_init__(self) -> None:
        if int(self.n_cells) != self.n_cells or self.n_cells < 16:
            raise DomainError(f"space grid needs at least 16 cells, got {self.n_cells!r}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_cells + 1)

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        return composite_gauss(self.nodes, self.order)


def project(f: Callable, basis: SpectralBasis, grid: SpaceGrid | None = None) -> SpectralState:
    """Coefficients ``<f, phi_i>`` by composite Gauss-Legendre quadrature."""
    x, w = (grid or SpaceGrid()).quadrature()
    fx = np.asarray(f(x), dtype=float) * np.ones_like(x)
    if not np.all(np.isfinite(fx)):
        raise DomainError("function to project is not finite on the quadrature nodes")
    return SpectralState(basis, basis.phi(x) @ (w * fx))


def evaluate(state: SpectralState, x) -> np.ndarray | float:
    """Field value ``sum_i a_i phi_i(x)``; exactly zero at the endpoints."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0.0) | (xa > 1.0)) or not np.all(np.isfinite(xa)):
        raise DomainError("evaluation points must lie in [0, 1]")
    v = np.tensordot(state.coefficients, state.basis.phi(xa), axes=1)
    v = np.where((xa == 0.0) | (xa == 1.0), 0.0, v)
    return float(v) if np.ndim(x) == 0 else v


def multipliers(q, basis: SpectralBasis, t) -> np.ndarray:
    """``E_q(lambda_i t^q)`` with shape ``(n_modes,) + shape(t)``."""
    q = model_order(q)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise DomainError("times must be non-negative")
    z = basis.eigenvalues.reshape((-1,) + (1,) * t.ndim) * t[None, ...] ** q
    return ml_array(q, z)


def propagate(y0: SpectralState, q, t: float) -> SpectralState:
    """``S_q(t) y0``; ``t = 0`` returns ``y0`` itself."""
    if not t >= 0.0:
        raise DomainError(f"time must be non-negative, got {t!r}")
    if t == 0.0:
        return y0
    return SpectralState(y0.basis, multipliers(q, y0.basis, float(t)) * y0.coefficients)


def adjoint_propagate(y0: SpectralState, q, t: float) -> SpectralState:
    """``S_q(t)^* y0``.  The Dirichlet Laplacian is self-adjoint, so this is ``propagate``."""
    return propagate(y0, q, t)


def trajectory(y0: SpectralState, q, t) -> np.ndarray:
    """Coefficients of ``S_q(t_k) y0`` for every time, shape ``(n_modes, len(t))``."""
    return multipliers(q, y0.basis, np.atleast_1d(t)) * y0.coefficients[:, None]


def residual_check(
    y0: SpectralState, q, tgrid: TimeGrid, x_probe: float, *, t_min: float | None = None
) -> float:
    """Largest ``|D^q y - A y|`` at ``x_probe`` over grid nodes with ``t >= t_min``.

    The Caputo derivative comes from the L1 scheme applied to the sampled mild
    solution.  The solution behaves like ``t^q`` near ``t = 0``, where the L1
    scheme has an O(1) local error, so nodes before ``t_min`` (default
    ``T / 10``) are excluded; away from that layer the residual decays like
    ``dt^min(2-q, 1+q)``.
    """
    if not 0.0 < x_probe < 1.0:
        raise DomainError("probe point must lie in (0, 1)")
    q = model_order(q)
    if t_min is None:
        t_min = 0.1 * tgrid.horizon
    t = tgrid.nodes
    coeffs = trajectory(y0, q, t)
    phi_b = y0.basis.phi(np.array(x_probe))
    y = phi_b @ coeffs
    ay = (phi_b * y0.basis.eigenvalues) @ coeffs
    d = caputo_left(TimeSeries(tgrid, y), q).values
    mask = (np.arange(t.size) > 0) & (t >= t_min)
    return float(np.max(np.abs(d - ay)[mask]))
