"""Constrained (enlarged) regional observability at finite truncation.

The output map restricted to the subregion, ``phi0 -> C S_q(.) chi_omega^* phi0``,
is represented by its Gramian on the subregion grid.  A state between the
envelopes ``alpha <= g <= beta`` is recoverable iff no nonzero element of the
Gramian's (numerical) kernel lies between the envelopes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import EigenFailure, GridMismatchError, DomainError
from .frac_calc import TimeGrid
from .quadrature import TimeQuadrature
from .sensing import (
    MeasurementTrace,
    OmegaGrid,
    SensorSpec,
    observe,
    omega_projection,
    restrict,
    sensor_weights,
    time_gramian,
)
from .spectral_model import SpectralBasis, SpectralState


@dataclass(frozen=True)
class ConstraintPair:
    """Envelopes ``alpha <= beta`` sampled on a subregion grid."""

    wgrid: OmegaGrid
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        if a.shape != self.wgrid.nodes.shape or b.shape != a.shape:
            raise GridMismatchError("envelopes must be sampled on the subregion grid")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DomainError("envelopes must be finite")
        if np.any(a > b):
            raise DomainError("lower envelope exceeds upper envelope")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def omega(self):
        return self.wgrid.omega

    @classmethod
    def absolute_band(cls, y0: SpectralState, wgrid: OmegaGrid, half_width: float = 0.5) -> ConstraintPair:
        """``alpha = |y0| - h``, ``beta = |y0| + h`` on the subregion."""
        v = np.abs(restrict(y0, wgrid))
        return cls(wgrid, v - half_width, v + half_width)


def membership(g, c: ConstraintPair, tol: float = 0.0) -> bool:
    """True iff ``alpha - tol <= g <= beta + tol`` at every subregion node."""
    g = np.asarray(g, dtype=float)
    if g.shape != c.alpha.shape:
        raise GridMismatchError(f"grid function has shape {g.shape}, envelopes {c.alpha.shape}")
    return bool(np.all(g >= c.alpha - tol) and np.all(g <= c.beta + tol))


# ------------------------------------------------------------------------- gramian


@dataclass(frozen=True)
class ObservabilityGramian:
    """Output-energy quadratic form on subregion grid functions.

    ``matrix = W^T G W`` with ``G = (s s^T) o Q`` the spectral Gramian, so
    ``g @ matrix @ g = int_0^T |C S_q(u) chi_omega^* g|^2 du``.
    """

    matrix: np.ndarray = field(repr=False)
    spectral: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    wgrid: OmegaGrid
    basis: SpectralBasis
    weights_s: np.ndarray = field(repr=False)

    @property
    def weights(self) -> np.ndarray:
        return self.wgrid.weights

    def energy(self, g) -> float:
        a = self.W @ np.asarray(g, dtype=float)
        return float(a @ self.spectral @ a)


def _tquad(tgrid) -> TimeQuadrature:
    if isinstance(tgrid, TimeQuadrature):
        return tgrid
    if isinstance(tgrid, TimeGrid):
        return TimeQuadrature(tgrid.horizon)
    return TimeQuadrature(float(tgrid))


def observability_gramian(
    q, sensor: SensorSpec, wgrid: OmegaGrid, tgrid, basis: SpectralBasis | None = None
) -> ObservabilityGramian:
    """Gramian of the regional output map on the subregion grid ``wgrid``.

    ``tgrid`` may be a :class:`TimeQuadrature`, a :class:`TimeGrid` (only its
    horizon is used) or the horizon itself.
    """
    basis = basis or SpectralBasis()
    tq = _tquad(tgrid)
    s = sensor_weights(sensor, basis)
    G = np.outer(s, s) * time_gramian(q, basis, tq)
    V, W = omega_projection(basis, wgrid)
    M = W.T @ G @ W
    M = 0.5 * (M + M.T)
    return ObservabilityGramian(M, G, V, W, wgrid, basis, s)


# ------------------------------------------------------------------------ decision


@dataclass
class ObservabilityReport:
    gramian_min_eig: float
    gramian_max_eig: float
    gramian_rank: int
    eig_tol: float
    kernel_basis: list[np.ndarray]
    e_observable: str
    margin: float
    method: str
    diagnostics: str
    image_meets_envelope: bool | None = None
    config_echo: dict = field(default_factory=dict)

    @property
    def kernel_dim(self) -> int:
        return len(self.kernel_basis)

    def to_dict(self) -> dict:
        return {
            "min_eig": self.gramian_min_eig,
            "max_eig": self.gramian_max_eig,
            "rank": self.gramian_rank,
            "kernel_dim": self.kernel_dim,
            "eig_tol": self.eig_tol,
            "e_observable": self.e_observable,
            "margin": self.margin,
            "method": self.method,
            "image_meets_envelope": self.image_meets_envelope,
            "diagnostics": self.diagnostics,
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _scaling_interval(v: np.ndarray, alpha: np.ndarray, beta: np.ndarray, tol: float):
    """Closed interval of scalars ``c`` with ``alpha <= c v <= beta``, or None."""
    lo, hi = -math.inf, math.inf
    big = np.abs(v) > tol
    if np.any(~big & ((alpha > tol) | (beta < -tol))):
        return None
    vb, ab, bb = v[big], alpha[big], beta[big]
    pos = vb > 0
    lows = np.where(pos, ab / vb, bb / vb)
    highs = np.where(pos, bb / vb, ab / vb)
    if lows.size:
        lo, hi = float(lows.max()), float(highs.min())
    if lo > hi + tol:
        return None
    return lo, hi


def _lp_distance(K: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> tuple[float | None, str]:
    """Smallest uniform widening ``t`` of the envelopes that lets some ``K c`` fit between them."""
    m, k = K.shape
    cost = np.zeros(k + 1)
    cost[-1] = 1.0
    ones = np.ones((m, 1))
    A = np.vstack([np.hstack([K, -ones]), np.hstack([-K, -ones])])
    b = np.concatenate([beta, -alpha])
    bounds = [(None, None)] * k + [(0.0, None)]
    res = linprog(cost, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        return None, res.message
    return float(res.fun), "optimal"


def _nonzero_cone_direction(K, alpha, beta, tol) -> bool | None:
    """When ``0`` lies between the envelopes: does a nonzero kernel element fit?

    Small multiples ``t d`` fit iff ``d`` is non-negative where ``alpha = 0`` and
    non-positive where ``beta = 0``.  The cone of such ``d`` is nontrivial iff
    some coordinate can be pushed away from zero inside the unit box.
    """
    lo_pin = np.abs(alpha) <= tol
    hi_pin = np.abs(beta) <= tol
    if not np.any(lo_pin | hi_pin):
        return True
    A = np.vstack([-K[lo_pin], K[hi_pin]])
    b = np.zeros(A.shape[0])
    k = K.shape[1]
    for j in range(k):
        for sgn in (1.0, -1.0):
            cost = np.zeros(k)
            cost[j] = -sgn
            res = linprog(cost, A_ub=A, b_ub=b, bounds=[(-1.0, 1.0)] * k, method="highs")
            if res.status != 0:
                return None
            if -res.fun > 1e-9:
                return True
    return False


def _sample_kernel(K, alpha, beta, tol, n=1000, seed=0) -> bool:
    """Random kernel directions; True as soon as one scaled direction fits (a certificate)."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        d = K @ rng.standard_normal(K.shape[1])
        iv = _scaling_interval(d, alpha, beta, tol)
        if iv is not None and (iv[1] > tol or iv[0] < -tol):
            return True
    return False


def decide_e_observability(
    gram,
    c: ConstraintPair,
    eig_tol: float | None = None,
    *,
    weights: np.ndarray | None = None,
    tol: float = 1e-10,
) -> ObservabilityReport:
    """Decide whether ``Ker`` of the regional output map meets the envelope set only at 0.

    ``gram`` is an :class:`ObservabilityGramian` or a symmetric matrix whose
    quadratic form is taken with the node ``weights`` (default: those of the
    constraint grid).  Eigenvalues are those of the operator on ``L2(omega)``,
    i.e. of ``D^{-1/2} M D^{-1/2}`` with ``D = diag(weights)``.

    * smallest eigenvalue above ``eig_tol`` (default ``1e-10 * largest``): trivial
      kernel, answer ``yes``;
    * one-dimensional kernel: exact interval test on the scalings of the
      kernel vector;
    * larger kernels: exact feasibility by linear programming.

    ``margin`` is the eigenvalue gap above ``eig_tol`` when the kernel is
    trivial, and otherwise the smallest uniform widening of the envelopes
    that would let a nonzero kernel element fit (0 when one already does).
    """
    M = gram.matrix if isinstance(gram, ObservabilityGramian) else np.asarray(gram, dtype=float)
    w = np.asarray(weights if weights is not None else c.wgrid.weights, dtype=float)
    if M.shape != (w.size, w.size) or w.size != c.alpha.size:
        raise GridMismatchError("Gramian, weights and envelopes disagree in size")
    if not np.all(np.isfinite(M)):
        raise EigenFailure("Gramian contains non-finite entries")
    r = 1.0 / np.sqrt(w)
    S = r[:, None] * M * r[None, :]
    try:
        lam, U = np.linalg.eigh(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    lmax = float(lam[-1]) if lam.size else 0.0
    if eig_tol is None:
        eig_tol = 1e-10 * max(lmax, 0.0)
    kernel_mask = lam <= eig_tol
    rank = int(np.sum(~kernel_mask))
    K = r[:, None] * U[:, kernel_mask]  # unit L2(omega) norm
    Rg = r[:, None] * U[:, ~kernel_mask]
    kernel = [K[:, j].copy() for j in range(K.shape[1])]
    alpha, beta = c.alpha, c.beta
    scale = max(1.0, float(np.max(np.abs(np.concatenate([alpha, beta])))))
    ftol = tol * scale

    image = None
    if Rg.shape[1]:
        t_img, _ = _lp_distance(Rg, alpha, beta)
        image = None if t_img is None else bool(t_img <= 1e-9 * scale)
    base = dict(
        gramian_min_eig=float(lam[0]),
        gramian_max_eig=lmax,
        gramian_rank=rank,
        eig_tol=float(eig_tol),
        kernel_basis=kernel,
        image_meets_envelope=image,
    )

    if not kernel:
        return ObservabilityReport(
            **base,
            e_observable="yes",
            margin=float(lam[0] - eig_tol),
            method="trivial-kernel",
            diagnostics=f"smallest eigenvalue {lam[0]:.3e} exceeds threshold {eig_tol:.3e}",
        )

    zero_inside = bool(np.all(alpha <= ftol) and np.all(beta >= -ftol))
    if len(kernel) == 1:
        iv = _scaling_interval(kernel[0], alpha, beta, ftol)
        nonzero = iv is not None and (iv[1] > ftol or iv[0] < -ftol)
        desc = "no feasible scaling" if iv is None else f"feasible scalings [{iv[0]:.6g}, {iv[1]:.6g}]"
        margin = 0.0
        if not nonzero and not zero_inside:
            t, _ = _lp_distance(K, alpha, beta)
            margin = float(t) if t is not None else 0.0
        return ObservabilityReport(
            **base,
            e_observable="no" if nonzero else "yes",
            margin=margin,
            method="interval",
            diagnostics=f"one-dimensional kernel; {desc}",
        )

    if zero_inside:
        hit = _nonzero_cone_direction(K, alpha, beta, ftol)
        if hit is None:
            found = _sample_kernel(K, alpha, beta, ftol)
            return ObservabilityReport(
                **base,
                e_observable="no" if found else "undetermined",
                margin=0.0,
                method="heuristic",
                diagnostics="linear program failed; random kernel directions (heuristic)",
            )
        return ObservabilityReport(
            **base,
            e_observable="no" if hit else "yes",
            margin=0.0,
            method="lp-cone",
            diagnostics=f"{len(kernel)}-dimensional kernel, zero lies between the envelopes",
        )

    t, msg = _lp_distance(K, alpha, beta)
    if t is None:
        found = _sample_kernel(K, alpha, beta, ftol)
        return ObservabilityReport(
            **base,
            e_observable="no" if found else "undetermined",
            margin=0.0,
            method="heuristic",
            diagnostics=f"linear program failed ({msg}); random kernel directions (heuristic)",
        )
    fits = t <= 1e-9 * scale
    return ObservabilityReport(
        **base,
        e_observable="no" if fits else "yes",
        margin=0.0 if fits else t,
        method="lp",
        diagnostics=f"{len(kernel)}-dimensional kernel; envelope distance {t:.3e}",
    )


def strategic_sensor(
    sensor: SensorSpec,
    q,
    wgrid: OmegaGrid,
    c: ConstraintPair,
    tgrid,
    basis: SpectralBasis | None = None,
    eig_tol: float | None = None,
) -> tuple[bool, ObservabilityReport]:
    """Whether ``sensor`` makes the system constrained-observable on the subregion."""
    gram = observability_gramian(q, sensor, wgrid, tgrid, basis)
    rep = decide_e_observability(gram, c, eig_tol)
    return rep.e_observable == "yes", rep


def regional_state(y0: SpectralState, wgrid: OmegaGrid) -> SpectralState:
    """Spectral coefficients of ``chi_omega^* chi_omega y0`` (quadrature on the subregion grid)."""
    _, W = omega_projection(y0.basis, wgrid)
    return SpectralState(y0.basis, W @ restrict(y0, wgrid))


def regional_output(
    y0: SpectralState, q, sensor: SensorSpec, wgrid: OmegaGrid, tgrid, convention="direct"
) -> MeasurementTrace:
    """Output of the zero-extended restriction of ``y0``.

    ``modal_amplitudes[i]`` of the returned trace is the coefficient of
    ``E_q(lambda_i t^q)`` in the output.
    """
    if wgrid.omega.w0 == 0.0 and wgrid.omega.w1 == 1.0:
        return observe(y0, q, sensor, tgrid, convention)
    return observe(regional_state(y0, wgrid), q, sensor, tgrid, convention)
