"""Sensors, measurement traces, and the subregion restriction/extension pair."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Literal

import numpy as np

from .errors import DomainError, GridMismatchError
from .frac_calc import TimeGrid, TimeSeries
from .quadrature import TimeQuadrature, composite_gauss
from .spectral_model import SpectralBasis, SpectralState, evaluate, model_order, multipliers
from .special_functions import ml_array

Convention = Literal["direct", "reversed"]


# --------------------------------------------------------------------------- sensors


@dataclass(frozen=True)
class SensorSpec:
    """A pointwise sensor at ``b`` or a zone sensor ``(D, f)`` with ``D = [d0, d1]``.

    ``profile`` defaults to ``f = 1``.  ``breakpoints`` lists interior points
    where ``f`` is not smooth (e.g. the knots of a tabulated profile) so the
    quadrature panels can align with them.
    """

    kind: Literal["pointwise", "zone"]
    b: float | None = None
    d0: float | None = None
    d1: float | None = None
    profile: Callable | None = field(default=None, compare=False)
    breakpoints: tuple[float, ...] = ()
    label: str = "uniform"

    def __post_init__(self) -> None:
        if self.kind == "pointwise":
            if self.b is None or not 0.0 < float(self.b) < 1.0:
                raise DomainError(f"pointwise sensor location must lie in (0, 1), got {self.b!r}")
        elif self.kind == "zone":
            if self.d0 is None or self.d1 is None or not 0.0 <= self.d0 < self.d1 <= 1.0:
                raise DomainError(f"zone support must satisfy 0 <= d0 < d1 <= 1, got {self.d0!r}, {self.d1!r}")
        else:
            raise DomainError(f"unknown sensor kind {self.kind!r}")

    @classmethod
    def pointwise(cls, b: float) -> SensorSpec:
        return cls("pointwise", b=float(b))

    @classmethod
    def zone(cls, d0: float, d1: float, profile: Callable | None = None, *, breakpoints=(), label=None) -> SensorSpec:
        return cls(
            "zone",
            d0=float(d0),
            d1=float(d1),
            profile=profile,
            breakpoints=tuple(float(p) for p in breakpoints),
            label=label or ("uniform" if profile is None else "custom"),
        )

    @classmethod
    def zone_table(cls, xs, fs) -> SensorSpec:
        """Zone sensor whose profile linearly interpolates the table ``(xs, fs)``."""
        xs = np.asarray(xs, dtype=float)
        fs = np.asarray(fs, dtype=float)
        if xs.ndim != 1 or xs.shape != fs.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise DomainError("profile table needs at least two strictly increasing abscissae")
        if not np.all(np.isfinite(fs)):
            raise DomainError("profile table values must be finite")
        return cls.zone(xs[0], xs[-1], lambda x: np.interp(x, xs, fs), breakpoints=xs[1:-1], label="custom-table")

    def describe(self) -> dict:
        if self.kind == "pointwise":
            return {"kind": "pointwise", "b": self.b}
        return {"kind": "zone", "d0": self.d0, "d1": self.d1, "profile": self.label}


def sensor_weights(sensor: SensorSpec, basis: SpectralBasis) -> np.ndarray:
    """Sensor response to each eigenfunction: ``phi_i(b)`` or ``<phi_i, f>_{L2(D)}``."""
    if sensor.kind == "pointwise":
        s = basis.phi(np.array(sensor.b))
        # sensors sitting on a nodal point of a mode: sin(i pi b) rounds to ~1e-16, not 0
        s[np.abs(s) <= 1e-13] = 0.0
        return s
    inner = [p for p in sensor.breakpoints if sensor.d0 < p < sensor.d1]
    knots = np.unique(np.concatenate([[sensor.d0, sensor.d1], inner]))
    # enough panels per knot interval to resolve the highest mode
    per = max(4, int(math.ceil(basis.indices.max() * (sensor.d1 - sensor.d0))))
    breaks = np.unique(np.concatenate([np.linspace(a, c, per + 1) for a, c in zip(knots[:-1], knots[1:])]))
    x, w = composite_gauss(breaks, 8)
    f = np.ones_like(x) if sensor.profile is None else np.asarray(sensor.profile(x), dtype=float) * np.ones_like(x)
    if not np.all(np.isfinite(f)):
        raise DomainError("sensor profile is not finite on its support")
    s = basis.phi(x) @ (w * f)
    s[np.abs(s) <= 1e-13 * np.sum(w * np.abs(f))] = 0.0
    return s


# ------------------------------------------------------------------------ subregion


@dataclass(frozen=True)
class Subregion:
    w0: float
    w1: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.w0 < self.w1 <= 1.0):
            raise DomainError(f"subregion must satisfy 0 <= w0 < w1 <= 1, got [{self.w0}, {self.w1}]")

    @property
    def measure(self) -> float:
        return self.w1 - self.w0

    def contains(self, other: Subregion) -> bool:
        return self.w0 <= other.w0 and other.w1 <= self.w1


@dataclass(frozen=True)
class OmegaGrid:
    """Quadrature grid on a subregion, and the parent grid on [0, 1] it sits in.

    ``kind="gauss"`` (default) places ``order`` Gauss-Legendre points on each of
    ``n_panels`` equal panels; ``kind="trapezoid"`` uses ``n_panels * order``
    equispaced nodes with trapezoidal weights.  Outside the subregion the
    parent grid continues with Gauss-Legendre panels, so zero extension and
    restriction are exact adjoints of each other.
    """

    omega: Subregion
    n_panels: int = 8
    order: int = 8
    kind: Literal["gauss", "trapezoid"] = "gauss"
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    parent_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    parent_weights: np.ndarray = field(init=False, repr=False, compare=False)
    inside: slice = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        w0, w1 = self.omega.w0, self.omega.w1
        if self.n_panels < 1 or self.order < 2:
            raise DomainError("omega grid needs at least one panel of order >= 2")
        if self.kind == "gauss":
            x, w = composite_gauss(np.linspace(w0, w1, self.n_panels + 1), self.order)
        elif self.kind == "trapezoid":
            n = self.n_panels * self.order
            x = np.linspace(w0, w1, n)
            w = np.full(n, (w1 - w0) / (n - 1))
            w[[0, -1]] *= 0.5
        else:
            raise DomainError(f"unknown omega grid kind {self.kind!r}")
        left = right = (np.empty(0), np.empty(0))
        h = (w1 - w0) / self.n_panels
        if w0 > 0.0:
            left = composite_gauss(np.linspace(0.0, w0, max(1, math.ceil(w0 / h)) + 1), self.order)
        if w1 < 1.0:
            right = composite_gauss(np.linspace(w1, 1.0, max(1, math.ceil((1.0 - w1) / h)) + 1), self.order)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "parent_nodes", np.concatenate([left[0], x, right[0]]))
        object.__setattr__(self, "parent_weights", np.concatenate([left[1], w, right[1]]))
        object.__setattr__(self, "inside", slice(left[0].size, left[0].size + x.size))

    @property
    def size(self) -> int:
        return self.nodes.size

    def inner(self, f, g) -> float:
        """``L2(omega)`` inner product of two grid functions."""
        return float(np.sum(self.weights * np.asarray(f) * np.asarray(g)))

    def norm(self, f) -> float:
        return math.sqrt(max(self.inner(f, f), 0.0))

    def describe(self) -> dict:
        return {"kind": self.kind, "n_panels": self.n_panels, "order": self.order}


def restrict(field_or_state, wgrid: OmegaGrid) -> np.ndarray:
    """``chi_omega``: values on the subregion grid.

    Accepts a :class:`SpectralState` (evaluated at the subregion nodes) or a
    function sampled on ``wgrid.parent_nodes``.
    """
    if isinstance(field_or_state, SpectralState):
        return np.asarray(evaluate(field_or_state, wgrid.nodes))
    v = np.asarray(field_or_state, dtype=float)
    if v.shape != wgrid.parent_nodes.shape:
        raise GridMismatchError(f"expected {wgrid.parent_nodes.size} parent-grid values, got shape {v.shape}")
    return v[wgrid.inside].copy()


def extend(g, wgrid: OmegaGrid) -> np.ndarray:
    """``chi_omega^*``: zero extension of a subregion grid function to the parent grid."""
    g = np.asarray(g, dtype=float)
    if g.shape != wgrid.nodes.shape:
        raise GridMismatchError(f"expected {wgrid.size} subregion values, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise DomainError("grid function must be finite")
    out = np.zeros(wgrid.parent_nodes.size)
    out[wgrid.inside] = g
    return out


def omega_projection(basis: SpectralBasis, wgrid: OmegaGrid) -> tuple[np.ndarray, np.ndarray]:
    """Matrices ``V`` (coefficients to subregion values) and ``W`` (subregion values to coefficients).

    ``W g = <chi_omega^* g, phi_i>`` and ``V a = chi_omega sum_i a_i phi_i``,
    so ``W = (V * weights)^T``.
    """
    V = basis.phi(wgrid.nodes).T
    W = (V * wgrid.weights[:, None]).T
    return V, W


# --------------------------------------------------------------------- time kernels


@lru_cache(maxsize=32)
def _kernel_cached(q: float, modes: tuple, tkey: tuple, beta: float) -> np.ndarray:
    basis = SpectralBasis(modes=modes)
    tq = TimeQuadrature(*tkey)
    z = basis.eigenvalues[:, None] * tq.nodes[None, :] ** q
    out = ml_array(q, z, beta)
    out.setflags(write=False)
    return out


def kernel_matrix(q, basis: SpectralBasis, tquad: TimeQuadrature, beta: float = 1.0) -> np.ndarray:
    """``E_{q,beta}(lambda_i u_k^q)`` on the quadrature nodes, shape ``(n_modes, n_nodes)``."""
    q = model_order(q)
    return _kernel_cached(q, tuple(int(i) for i in basis.indices), tquad.key, float(beta))


def time_gramian(q, basis: SpectralBasis, tquad: TimeQuadrature) -> np.ndarray:
    """``Q_ij = int_0^T E_q(lambda_i u^q) E_q(lambda_j u^q) du``."""
    E = kernel_matrix(q, basis, tquad)
    Q = (E * tquad.weights) @ E.T
    return 0.5 * (Q + Q.T)


# ------------------------------------------------------------------------- traces


@dataclass(frozen=True)
class MeasurementTrace:
    """Sensor output sampled at ``times`` in ``[0, T]``.

    ``convention="direct"`` stores ``z(t) = C y(t)``; ``"reversed"`` stores
    ``z(t) = C y(T - t)``.  Times are ascending.  Traces made on a
    :class:`TimeGrid` are uniform; traces made on a :class:`TimeQuadrature`
    carry the quadrature nodes, which is what the reconstruction integrates on.
    """

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    horizon: float
    convention: Convention
    modal_amplitudes: np.ndarray | None = field(default=None, repr=False, compare=False)
    noise_sigma: float = 0.0

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.convention not in ("direct", "reversed"):
            raise DomainError(f"unknown trace convention {self.convention!r}")
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise GridMismatchError("trace needs matching one-dimensional times and values")
        if np.any(np.diff(t) <= 0) or t[0] < 0.0 or t[-1] > self.horizon:
            raise DomainError("trace times must be strictly increasing inside [0, T]")
        if not np.all(np.isfinite(v)):
            raise DomainError("trace values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_series(cls, series: TimeSeries, convention: Convention) -> MeasurementTrace:
        return cls(series.grid.nodes, series.values, series.grid.horizon, convention)

    def series(self) -> TimeSeries:
        """The trace as a :class:`TimeSeries` (uniform traces only)."""
        n = self.times.size - 1
        grid = TimeGrid(self.horizon, n)
        if not np.allclose(self.times, grid.nodes, rtol=0.0, atol=1e-12 * self.horizon):
            raise GridMismatchError("trace is not sampled on a uniform grid")
        return TimeSeries(grid, self.values)

    def reflect(self) -> MeasurementTrace:
        """Switch convention: ``t -> T - t``."""
        other: Convention = "direct" if self.convention == "reversed" else "reversed"
        return MeasurementTrace(
            (self.horizon - self.times)[::-1],
            self.values[::-1],
            self.horizon,
            other,
            self.modal_amplitudes,
            self.noise_sigma,
        )

    def at(self, t) -> np.ndarray:
        """Values at ``t``: exact at sample times, linear interpolation in between."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0] - 1e-14 * self.horizon) or np.any(t > self.times[-1] + 1e-14 * self.horizon):
            raise DomainError("requested times fall outside the sampled range")
        return np.interp(t, self.times, self.values)

    def energy(self) -> float:
        """``int |z|^2 dt`` by the trapezoidal rule on the sample times."""
        return float(np.trapezoid(self.values**2, self.times))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "z"])
            for t, z in zip(self.times, self.values):
                w.writerow([f"{t:.17g}", f"{z:.17g}"])

    @classmethod
    def from_csv(cls, path, horizon: float, convention: Convention) -> MeasurementTrace:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 2:
            raise GridMismatchError("trace CSV must have the columns t,z")
        return cls(data[:, 0], data[:, 1], horizon, convention)


def sensor_signal(y0: SpectralState, q, sensor: SensorSpec, t) -> np.ndarray:
    """``C S_q(t) y0`` at physical times ``t``."""
    amp = sensor_weights(sensor, y0.basis) * y0.coefficients
    return amp @ multipliers(q, y0.basis, np.asarray(t, dtype=float))


def observe(
    y0: SpectralState,
    q,
    sensor: SensorSpec,
    tgrid: TimeGrid | TimeQuadrature | float,
    convention: Convention = "direct",
    *,
    noise_sigma: float = 0.0,
    seed: int | None = None,
) -> MeasurementTrace:
    """Sensor output of the mild solution started at ``y0``.

    On a :class:`TimeGrid` the samples sit on the grid nodes.  On a
    :class:`TimeQuadrature` the physical sampling instants are the quadrature
    nodes ``u_k``; a reversed trace then stores them at ``T - u_k``.  A bare
    horizon selects the default :class:`TimeQuadrature`.  Optional additive Gaussian noise of standard deviation ``noise_sigma`` is
    drawn from a generator seeded with ``seed``.
    """
    if convention not in ("direct", "reversed"):
        raise DomainError(f"unknown trace convention {convention!r}")
    if isinstance(tgrid, (int, float)):
        tgrid = TimeQuadrature(float(tgrid))
    T = tgrid.horizon
    if isinstance(tgrid, TimeGrid):
        times = tgrid.nodes
        phys = times if convention == "direct" else times[::-1]
    else:
        phys = tgrid.nodes
        times = phys if convention == "direct" else (T - phys)[::-1]
        phys = phys if convention == "direct" else phys[::-1]
    amp = sensor_weights(sensor, y0.basis) * y0.coefficients
    if np.any(amp != 0.0):
        values = amp @ multipliers(q, y0.basis, phys)
    else:
        values = np.zeros(phys.size)
    if noise_sigma:
        if noise_sigma < 0.0:
            raise DomainError("noise level must be non-negative")
        values = values + noise_sigma * np.random.default_rng(seed).standard_normal(values.size)
    return MeasurementTrace(times, values, T, convention, amp, float(noise_sigma))


def admissibility_constant(
    q,
    sensor: SensorSpec,
    tgrid: TimeGrid | TimeQuadrature | float,
    n_trials: int,
    basis: SpectralBasis | None = None,
    *,
    seed: int = 0,
) -> float:
    """Lower estimate of the best constant ``M`` in ``int_0^T |C S_q(s) y|^2 ds <= M |y|^2``.

    Maximum of the output energy over ``n_trials`` random unit states and the
    canonical basis states at the given truncation.  It is an estimate from
    below, not a proof of admissibility.
    """
    if n_trials < 1:
        raise DomainError("n_trials must be at least 1")
    basis = basis or SpectralBasis()
    T = tgrid if isinstance(tgrid, (int, float)) else tgrid.horizon
    if T == 0.0:
        return 0.0
    tq = tgrid if isinstance(tgrid, TimeQuadrature) else TimeQuadrature(float(T))
    s = sensor_weights(sensor, basis)
    G = np.outer(s, s) * time_gramian(q, basis, tq)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_trials, basis.n_modes))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    a = np.vstack([np.eye(basis.n_modes), a])
    return float(np.max(np.einsum("ki,ij,kj->k", a, G, a)))
