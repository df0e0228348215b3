"""Reconstruction of the initial state on a subregion by the Hilbert Uniqueness Method.

Candidates ``phi0`` are grid functions on the subregion.  The operator

    N phi0 = chi_omega sum_i [ sum_j G_ij <chi_omega^* phi0, phi_j> ] phi_i,
    G_ij   = s_i s_j int_0^T E_q(lambda_i u^q) E_q(lambda_j u^q) du,

is self-adjoint and positive semi-definite in the ``L2(omega)`` inner product,
and the measured output enters through

    b_i = s_i int_0^T E_q(lambda_i u^q) y_sensor(u) du.

With noiseless data, ``b = G a`` for the coefficients ``a`` of the regional
state, so ``N phi0 = chi_omega sum b_i phi_i`` recovers ``phi0 = chi_omega y0``.
Time integrals use a composite Gauss-Legendre rule graded towards ``u = 0``.
The right-hand side is exactly consistent with ``N`` only when the trace was
sampled at that rule's nodes; a trace on a uniform grid is interpolated
linearly, which leaves the fast initial transients of high modes unresolved
and, given how ill-conditioned ``N`` is, usually calls for regularisation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .enlarged_observability import (
    ConstraintPair,
    ObservabilityGramian,
    decide_e_observability,
    membership,
    observability_gramian,
)
from .errors import ConventionError, DomainError, MaxIterError, NotObservableError
from .quadrature import TimeQuadrature
from .sensing import MeasurementTrace, OmegaGrid, SensorSpec, kernel_matrix, sensor_weights
from .spectral_model import SpectralBasis, SpectralState, model_order


@dataclass(frozen=True)
class SolverSettings:
    """Iteration controls.

    ``tikhonov_eps=None`` means: no regularisation for noiseless traces and
    ``1e-8`` times the trace energy when the trace declares noise.
    ``method="cr"`` (conjugate residual) keeps the residual norm monotone on
    this badly conditioned operator; ``"cg"`` is plain conjugate gradients,
    whose residual may oscillate.
    """

    cg_tol: float = 1e-10
    cg_max_iter: int = 500
    tikhonov_eps: float | None = None
    method: Literal["cg", "cr"] = "cr"
    clip_to_envelope: bool = False

    def __post_init__(self) -> None:
        if not self.cg_tol > 0.0:
            raise DomainError("cg_tol must be positive")
        if int(self.cg_max_iter) != self.cg_max_iter or self.cg_max_iter < 1:
            raise DomainError("cg_max_iter must be a positive integer")
        if self.tikhonov_eps is not None and not self.tikhonov_eps >= 0.0:
            raise DomainError("tikhonov_eps must be non-negative")
        if self.method not in ("cg", "cr"):
            raise DomainError(f"unknown Krylov method {self.method!r}")


@dataclass(frozen=True)
class ReconstructionProblem:
    """One reconstruction instance.  Direct traces are reflected on construction."""

    q: float
    basis: SpectralBasis
    sensor: SensorSpec
    wgrid: OmegaGrid
    constraints: ConstraintPair
    trace: MeasurementTrace
    tquad: TimeQuadrature | None = None
    solver: SolverSettings = SolverSettings()
    truth: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", model_order(self.q))
        if self.trace.convention == "direct":
            object.__setattr__(self, "trace", self.trace.reflect())
        if self.tquad is None:
            object.__setattr__(self, "tquad", TimeQuadrature(self.trace.horizon))
        if not math.isclose(self.tquad.horizon, self.trace.horizon, rel_tol=1e-14):
            raise DomainError("trace horizon and time quadrature horizon differ")
        if self.constraints.wgrid is not self.wgrid and self.constraints.alpha.shape != self.wgrid.nodes.shape:
            raise DomainError("constraints live on a different subregion grid")
        if self.truth is not None:
            t = np.asarray(self.truth, dtype=float)
            if t.shape != self.wgrid.nodes.shape:
                raise DomainError("truth must be sampled on the subregion grid")
            object.__setattr__(self, "truth", t)

    @property
    def horizon(self) -> float:
        return self.trace.horizon

    @property
    def noisy(self) -> bool:
        return self.trace.noise_sigma > 0.0

    def gramian(self) -> ObservabilityGramian:
        return observability_gramian(self.q, self.sensor, self.wgrid, self.tquad, self.basis)

    def trace_energy(self) -> float:
        u = self.tquad.nodes
        z = self.trace.at(self.horizon - u)
        return float(np.sum(self.tquad.weights * z * z))

    def regularisation(self) -> float:
        eps = self.solver.tikhonov_eps
        if eps is None:
            return 1e-8 * self.trace_energy() if self.noisy else 0.0
        return float(eps)


@dataclass
class ReconstructionReport:
    phi0: np.ndarray
    nodes: np.ndarray
    residual_history: list[float]
    iterations: int
    converged: bool
    in_envelope: bool
    l2_error_vs_truth: float | None
    gramian_min_eig: float
    tikhonov_eps: float
    clipped: bool = False
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x": self.nodes.tolist(),
            "phi0": self.phi0.tolist(),
            "residuals": list(self.residual_history),
            "iterations": self.iterations,
            "converged": self.converged,
            "in_envelope": self.in_envelope,
            "l2_error": self.l2_error_vs_truth,
            "gramian_min_eig": self.gramian_min_eig,
            "tikhonov_eps": self.tikhonov_eps,
            "clipped": self.clipped,
            "config_echo": self.config_echo,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "phi0"])
            for x, v in zip(self.nodes, self.phi0):
                w.writerow([f"{x:.17g}", f"{v:.17g}"])


# ------------------------------------------------------------------------ operators


def rhs_coefficients(
    trace: MeasurementTrace, q, basis: SpectralBasis, sensor: SensorSpec, tquad: TimeQuadrature
) -> np.ndarray:
    """``b_i = s_i int_0^T E_q(lambda_i u^q) z(T - u) du`` for a reversed trace ``z``."""
    if trace.convention != "reversed":
        raise ConventionError("the right-hand side is assembled from a reversed trace")
    u = tquad.nodes
    z = trace.at(trace.horizon - u)
    E = kernel_matrix(q, basis, tquad)
    return sensor_weights(sensor, basis) * (E @ (tquad.weights * z))


def assemble_rhs(problem: ReconstructionProblem) -> np.ndarray:
    """Right-hand side of ``N phi0 = rhs`` on the subregion grid."""
    b = rhs_coefficients(problem.trace, problem.q, problem.basis, problem.sensor, problem.tquad)
    return problem.gramian().V @ b


def apply_N(phi0, problem: ReconstructionProblem, gram: ObservabilityGramian | None = None) -> np.ndarray:
    """``N phi0`` plus the Tikhonov term when regularisation is active."""
    gram = gram or problem.gramian()
    phi0 = np.asarray(phi0, dtype=float)
    out = gram.V @ (gram.spectral @ (gram.W @ phi0))
    eps = problem.regularisation()
    return out + eps * phi0 if eps else out


def seminorm_G(phi0, problem: ReconstructionProblem) -> float:
    """``( int_0^T |C S_q(u) chi_omega^* phi0|^2 du )^(1/2)``.

    Computed from the time samples of the output, not from the Gramian; its
    square equals the quadratic form ``<N phi0, phi0>`` up to quadrature error.
    """
    phi0 = np.asarray(phi0, dtype=float)
    gram = problem.gramian()
    a = gram.W @ phi0
    y = (gram.weights_s * a) @ kernel_matrix(problem.q, problem.basis, problem.tquad)
    return math.sqrt(float(np.sum(problem.tquad.weights * y * y)))


@dataclass(frozen=True)
class ThetaState:
    theta: SpectralState
    smoothed: SpectralState


def backward_theta_state(problem: ReconstructionProblem) -> ThetaState:
    """State of the backward adjoint system at ``t = 0`` and its ``(1-q)`` integral.

    ``theta_i = s_i int_0^T u^(q-1) E_{q,q}(lambda_i u^q) z(T - u) du`` uses
    weights that integrate the ``u^(q-1)`` singularity exactly on the first
    panel; the smoothed form uses the ``E_q`` kernel and coincides with the
    right-hand side coefficients.
    """
    q, basis, tq = problem.q, problem.basis, problem.tquad
    z = problem.trace.at(problem.horizon - tq.nodes)
    s = sensor_weights(problem.sensor, basis)
    Eqq = kernel_matrix(q, basis, tq, beta=q)
    theta = s * (Eqq @ (tq.singular_weights(q) * z))
    smooth = rhs_coefficients(problem.trace, q, basis, problem.sensor, tq)
    return ThetaState(SpectralState(basis, theta), SpectralState(basis, smooth))


# --------------------------------------------------------------------------- solver


def _krylov(apply, rhs, inner, tol, max_iter, method):
    """CG or conjugate residual in the inner product ``inner``; returns x, history, converged."""
    x = np.zeros_like(rhs)
    r = rhs.copy()
    bnorm = math.sqrt(inner(rhs, rhs))
    hist = [1.0]
    if bnorm == 0.0:
        return x, hist, True
    p = r.copy()
    if method == "cg":
        rr = inner(r, r)
        for _ in range(max_iter):
            Ap = apply(p)
            pAp = inner(p, Ap)
            if pAp <= 0.0:
                break
            a = rr / pAp
            x += a * p
            r -= a * Ap
            rr_new = inner(r, r)
            hist.append(math.sqrt(max(rr_new, 0.0)) / bnorm)
            if hist[-1] <= tol:
                return x, hist, True
            p = r + (rr_new / rr) * p
            rr = rr_new
        return x, hist, False
    Ar = apply(r)
    Ap = Ar.copy()
    rAr = inner(r, Ar)
    for _ in range(max_iter):
        ApAp = inner(Ap, Ap)
        if ApAp <= 0.0 or rAr <= 0.0:
            break
        a = rAr / ApAp
        x += a * p
        r -= a * Ap
        hist.append(math.sqrt(max(inner(r, r), 0.0)) / bnorm)
        if hist[-1] <= tol:
            return x, hist, True
        Ar = apply(r)
        rAr_new = inner(r, Ar)
        beta = rAr_new / rAr
        p = r + beta * p
        Ap = Ar + beta * Ap
        rAr = rAr_new
    return x, hist, False


def solve(problem: ReconstructionProblem, *, config_echo: dict | None = None) -> ReconstructionReport:
    """Solve ``N phi0 = rhs`` by a Krylov method in the ``L2(omega)`` inner product.

    The Gramian of a truncated fractional system is numerically singular even
    when the constrained problem is well posed, so the solvability check is
    the constrained-observability decision: without regularisation a ``no``
    raises :class:`NotObservableError`.  Krylov iterates stay in the range of
    ``N``, where consistent data has a solution.
    """
    gram = problem.gramian()
    eps = problem.regularisation()
    decision = decide_e_observability(gram, problem.constraints)
    if eps == 0.0 and (decision.e_observable == "no" or decision.gramian_rank == 0):
        raise NotObservableError(
            f"constrained observability fails ({decision.diagnostics}); enable Tikhonov regularisation"
        )
    w = problem.wgrid.weights

    def inner(f, g):
        return float(np.sum(w * f * g))

    rhs = gram.V @ rhs_coefficients(problem.trace, problem.q, problem.basis, problem.sensor, problem.tquad)
    settings = problem.solver
    phi, hist, ok = _krylov(
        lambda v: apply_N(v, problem, gram), rhs, inner, settings.cg_tol, settings.cg_max_iter, settings.method
    )
    clipped = False
    if settings.clip_to_envelope and not membership(phi, problem.constraints, 1e-12):
        phi = np.clip(phi, problem.constraints.alpha, problem.constraints.beta)
        clipped = True
    err = None
    if problem.truth is not None:
        tn = problem.wgrid.norm(problem.truth)
        d = problem.wgrid.norm(phi - problem.truth)
        err = d / tn if tn > 0.0 else d
    report = ReconstructionReport(
        phi0=phi,
        nodes=problem.wgrid.nodes.copy(),
        residual_history=hist,
        iterations=len(hist) - 1,
        converged=ok,
        in_envelope=membership(phi, problem.constraints, 1e-12),
        l2_error_vs_truth=err,
        gramian_min_eig=decision.gramian_min_eig,
        tikhonov_eps=eps,
        clipped=clipped,
        config_echo=config_echo or {},
    )
    if not ok:
        raise MaxIterError(
            f"relative residual {hist[-1]:.3e} above {settings.cg_tol:.1e} after {report.iterations} iterations",
            report=report,
        )
    return report
