"""Gamma, Mittag-Leffler functions on the real line, and the subordinator densities.

The Mittag-Leffler evaluator picks between three routes:

* ``series``: the defining power series summed in extended precision (mpmath),
  with the working precision raised by the size of the largest term so the
  cancellation on the negative axis does not eat the result;
* ``asymptotic``: for ``z < 0`` the algebraic expansion
  ``-sum_{k>=1} z**-k / Gamma(beta - q k)``, truncated at its smallest term.
  For ``1 <= q < 2`` the function also carries exponentially small terms of
  size ``|z|^((1-beta)/q) exp(|z|^(1/q) cos(pi/q)) / q`` which are not summed
  but added to the error estimate (for ``q = 1`` this is just ``exp(z)``);
* ``integral-fallback``: the completely-monotone Laplace representation of
  ``E_q(-x)`` (``beta == 1`` only), used when the series would need an
  unreasonable term count and as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import AccuracyError, ConvergenceError, DomainError, PoleError

Method = Literal["series", "asymptotic", "integral-fallback"]

EPS = np.finfo(float).eps

# Absolute size of the last series term kept before truncating.
_SERIES_TAIL = 1e-22
_SERIES_MAX_TERMS = 20000
# The asymptotic route is taken only when its own error estimate is below this.
_ASYMPTOTIC_SWITCH = 1e-15
_ASYMPTOTIC_MAX_TERMS = 400


@dataclass(frozen=True)
class FracOrder:
    """Fractional order ``q`` restricted to the open interval (0, 1)."""

    q: float

    def __post_init__(self) -> None:
        q = float(self.q)
        if not (math.isfinite(q) and 0.0 < q < 1.0):
            raise DomainError(f"fractional order must lie in (0, 1), got {self.q!r}")
        object.__setattr__(self, "q", q)

    def __float__(self) -> float:
        return self.q


def order_value(q: float | FracOrder, *, strict: bool = True) -> float:
    """Return ``q`` as a float, validating ``0 < q < 1`` when ``strict``."""
    if isinstance(q, FracOrder):
        return q.q
    if strict:
        return FracOrder(q).q
    q = float(q)
    if not (math.isfinite(q) and 0.0 < q < 2.0):
        raise DomainError(f"order must lie in (0, 2), got {q!r}")
    return q


@dataclass(frozen=True)
class MLFResult:
    value: float
    terms_used: int
    method: Method
    est_abs_error: float


# --------------------------------------------------------------------------- gamma


def gamma(x: float) -> float:
    """Euler's Gamma function.

    Delegates to :func:`math.gamma` (Lanczos with reflection below 1/2) and
    maps its failure modes onto :class:`PoleError` and :class:`OverflowError`.
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"gamma of non-finite argument {x!r}")
    if x <= 0.0 and x == math.floor(x):
        raise PoleError(f"Gamma has a pole at {x!r}")
    try:
        return math.gamma(x)
    except OverflowError:
        raise OverflowError(f"Gamma({x!r}) exceeds the floating-point range") from None


# -------------------------------------------------------------------------- series


@lru_cache(maxsize=64)
def _series_coefficients(q: float, beta: float, dps: int, n: int) -> tuple:
    with mpmath.workdps(dps):
        mq = mpmath.mpf(q)
        mb = mpmath.mpf(beta)
        return tuple(mpmath.rgamma(mq * k + mb) for k in range(n))


def _coefficients(q: float, beta: float, dps: int, n: int) -> tuple:
    # round the request up so nearby arguments share one cached table
    n_alloc = 64 * (n // 64 + 1)
    return _series_coefficients(q, beta, dps, n_alloc)[:n]


def _series_plan(q: float, beta: float, az: float) -> tuple[int, float, float]:
    """Number of terms, log of the largest term, and log of the last kept term."""
    logz = math.log(az)
    log_tail = math.log(_SERIES_TAIL)
    peak = -math.inf
    prev = math.inf
    for k in range(_SERIES_MAX_TERMS):
        lt = k * logz - math.lgamma(q * k + beta)
        peak = max(peak, lt)
        if k > 0 and lt < log_tail and lt < prev:
            return k + 1, peak, lt
        prev = lt
    raise AccuracyError(
        f"power series for E_{{{q},{beta}}} at |z|={az} needs more than {_SERIES_MAX_TERMS} terms"
    )


@lru_cache(maxsize=200_000)
def _series(q: float, beta: float, z: float) -> tuple[float, int, float]:
    n, log_peak, log_last = _series_plan(q, beta, abs(z))
    if z > 0 and log_peak > 705.0:
        raise OverflowError(f"E_{{{q},{beta}}}({z}) exceeds the floating-point range")
    digits = max(log_peak, 0.0) / math.log(10.0)
    dps = 10 * (int(digits + 25 + math.log10(n)) // 10 + 1)
    coeffs = _coefficients(q, beta, dps, n)
    with mpmath.workdps(dps):
        zz = mpmath.mpf(z)
        acc = mpmath.mpf(0)
        for c in reversed(coeffs):
            acc = acc * zz + c
        value = float(acc)
    # geometric tail of a series whose terms already decrease, plus final rounding
    err = 2.0 * math.exp(log_last) + abs(value) * EPS
    return value, n, err


# ---------------------------------------------------------------------- asymptotic


def _asymptotic_terms(q: float, beta: float, az: np.ndarray, kmax: int = _ASYMPTOTIC_MAX_TERMS):
    """Terms and magnitude envelopes of the negative-axis expansion, shape (nz, kmax)."""
    k = np.arange(1, kmax + 1, dtype=float)
    x = beta - q * k
    logz = np.log(az)[:, None]
    pos = x > 0
    # 1/Gamma(x) for x > 0 directly, otherwise Gamma(1-x) sin(pi x) / pi
    lg = np.where(pos, -special.gammaln(np.where(pos, x, 1.0)), special.gammaln(1.0 - x) - math.log(math.pi))
    # exact zeros at the poles of Gamma (integer q), where sin(pi x) only rounds to ~1e-16
    fac = np.where(pos, 1.0, np.where(x == np.round(x), 0.0, np.sin(math.pi * x)))
    # clip keeps exp finite; clipped entries are never the minimum envelope
    log_env = np.minimum(lg[None, :] - k[None, :] * logz, 700.0)
    sign = -((-1.0) ** k)
    terms = sign[None, :] * fac[None, :] * np.exp(log_env)
    return terms, np.exp(log_env)


def _asymptotic(q: float, beta: float, z: np.ndarray):
    """Vectorised asymptotic evaluation for ``z < 0``; returns value, terms used, error."""
    az = -np.asarray(z, dtype=float)
    terms, env = _asymptotic_terms(q, beta, az)
    # truncate just before the smallest envelope term
    kstar = np.argmin(env, axis=1)
    idx = np.arange(terms.shape[1])[None, :]
    keep = idx < kstar[:, None]
    vals = np.sum(np.where(keep, terms, 0.0), axis=1)
    absum = np.sum(np.where(keep, np.abs(terms), 0.0), axis=1)
    err = env[np.arange(len(az)), kstar] + 4.0 * EPS * absum
    if q >= 1.0:
        with np.errstate(over="ignore"):
            expo = (2.0 / q) * az ** ((1.0 - beta) / q) * np.exp(az ** (1.0 / q) * math.cos(math.pi / q))
        err = err + expo
    return vals, kstar, err


# ------------------------------------------------------------------------ integral


def _integral_ml(q: float, z: float) -> tuple[float, float]:
    """``E_q(z)`` for ``z < 0`` through its Laplace representation.

    ``E_q(-t^q) = int_0^inf exp(-r t) K(r) dr`` with the non-negative spectral
    density ``K(r) = sin(q pi) r^(q-1) / (pi (r^(2q) + 2 r^q cos(q pi) + 1))``.
    Substituting ``u = r^q`` removes the endpoint singularity:
    ``E_q(-x) = sin(q pi) / (q pi) int_0^inf exp(-(x u)^(1/q)) / (u^2 + 2 u cos(q pi) + 1) du``.
    """
    x = -z
    s, c = math.sin(q * math.pi), math.cos(q * math.pi)

    def kernel(u: float) -> float:
        return math.exp(-((x * u) ** (1.0 / q))) / (u * u + 2.0 * u * c + 1.0)

    # beyond (x u)^(1/q) = 800 the integrand is below exp(-800) times an integrable tail
    top = 800.0**q / x
    pts = sorted(p for p in {1.0 / x, 1.0} if p < top)
    edges = [0.0, *pts, top]
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(kernel, a, b, limit=200, epsabs=1e-16, epsrel=1e-13)
        total, err = total + v, err + e
    f = s / (q * math.pi)
    return f * total, f * err


# ---------------------------------------------------------------------- public API


def _check_args(q: float, beta: float, z: float) -> tuple[float, float, float]:
    q, beta, z = float(q), float(beta), float(z)
    if not (0.0 < q < 2.0):
        raise DomainError(f"Mittag-Leffler order must lie in (0, 2), got {q!r}")
    if not beta > 0.0:
        raise DomainError(f"second Mittag-Leffler parameter must be positive, got {beta!r}")
    if not math.isfinite(z):
        raise DomainError(f"Mittag-Leffler argument must be finite, got {z!r}")
    return q, beta, z


def mittag_leffler_two(
    q: float,
    beta: float,
    z: float,
    *,
    tol: float = 1e-10,
    method: Literal["auto", "series", "asymptotic", "integral-fallback"] = "auto",
) -> MLFResult:
    """Two-parameter Mittag-Leffler function ``E_{q,beta}(z)`` for real ``z``.

    Raises :class:`AccuracyError` if the selected route cannot certify ``tol``.
    """
    q, beta, z = _check_args(q, beta, z)
    if z == 0.0:
        return MLFResult(1.0 / gamma(beta), 1, "series", 0.0)

    asym_ok = z < 0.0
    if method == "asymptotic" or (method == "auto" and asym_ok):
        if not asym_ok:
            raise DomainError("the algebraic expansion holds only for z < 0")
        v, k, e = _asymptotic(q, beta, np.array([z]))
        res = MLFResult(float(v[0]), int(k[0]), "asymptotic", float(e[0]))
        if method == "asymptotic" or res.est_abs_error <= _ASYMPTOTIC_SWITCH:
            return _certify(res, tol)

    if method == "integral-fallback":
        if not (asym_ok and beta == 1.0 and q < 1.0):
            raise DomainError("the integral route covers beta = 1, 0 < q < 1, z < 0 only")
        v, e = _integral_ml(q, z)
        return _certify(MLFResult(v, 0, "integral-fallback", e), tol)

    try:
        v, n, e = _series(q, beta, z)
    except AccuracyError:
        if method == "auto" and asym_ok and beta == 1.0 and q < 1.0:
            v, e = _integral_ml(q, z)
            return _certify(MLFResult(v, 0, "integral-fallback", e), tol)
        raise
    return _certify(MLFResult(v, n, "series", e), tol)


def _certify(res: MLFResult, tol: float) -> MLFResult:
    if not (res.est_abs_error <= tol and math.isfinite(res.value)):
        raise AccuracyError(
            f"{res.method} evaluation reached only {res.est_abs_error:.3e} (requested {tol:.1e})"
        )
    return res


def mittag_leffler(q: float, z: float, *, tol: float = 1e-10, method="auto") -> MLFResult:
    """One-parameter Mittag-Leffler function ``E_q(z) = sum z^k / Gamma(q k + 1)``."""
    return mittag_leffler_two(q, 1.0, z, tol=tol, method=method)


def ml_array(q: float, z, beta: float = 1.0, *, tol: float = 1e-10) -> np.ndarray:
    """Vectorised ``E_{q,beta}`` values (no per-point metadata).

    Negative arguments go through the asymptotic route wherever it is accurate
    enough; the rest are summed as series one by one (memoised).
    """
    q, beta = float(q), float(beta)
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    out = np.empty_like(flat)
    todo = np.ones(flat.shape, dtype=bool)
    zero = flat == 0.0
    out[zero] = 1.0 / gamma(beta)
    todo &= ~zero
    if 0.0 < q < 2.0:
        neg = todo & (flat < 0.0)
        if np.any(neg):
            v, _, e = _asymptotic(q, beta, flat[neg])
            good = e <= _ASYMPTOTIC_SWITCH
            sel = np.flatnonzero(neg)[good]
            out[sel] = v[good]
            todo[sel] = False
    for i in np.flatnonzero(todo):
        out[i] = mittag_leffler_two(q, beta, flat[i], tol=tol).value
    return out.reshape(z.shape)


def crossover_band(q: float, beta: float = 1.0) -> tuple[float, float]:
    """Interval ``(Z1, Z0)`` of ``|z|`` over which both routes are accurate.

    ``Z1`` is where the asymptotic error estimate first drops below ``1e-8``,
    ``Z0`` where it drops below the switch threshold used by ``auto``.  The
    series is valid throughout, so the band is where the two must agree.
    """
    q, beta = float(q), float(beta)
    if not 0.0 < q < 1.0:
        raise DomainError("crossover only exists for 0 < q < 1")
    grid = np.geomspace(0.5, 1e4, 4000)
    _, _, err = _asymptotic(q, beta, -grid)
    z1 = grid[np.argmax(err <= 1e-8)]
    z0 = grid[np.argmax(err <= _ASYMPTOTIC_SWITCH)]
    return float(z1), float(z0)


# ------------------------------------------------------------------------ densities


# log of the absolute size of the last term kept by the extended-precision sum
_MAINARDI_TAIL = math.log(1e-24)


def _mainardi_plan(q: float, theta: float, max_terms: int):
    """Envelope logs ``log(theta^(-nq-1) Gamma(nq+1) / n!)`` until the series has converged."""
    logt = math.log(theta)
    logs = []
    prev = math.inf
    for n in range(1, max_terms + 1):
        le = -(n * q + 1.0) * logt + math.lgamma(n * q + 1.0) - math.lgamma(n + 1.0) - math.log(math.pi)
        logs.append(le)
        # past the peak, and small both against the largest term and in absolute size
        if le < prev and n > 1 and le < max(logs) + math.log(1e-17) and le < _MAINARDI_TAIL:
            break
        prev = le
    return logs


def _mainardi_double(q: float, theta: float, max_terms: int) -> tuple[float, float, float, int]:
    logt = math.log(theta)
    total = 0.0
    absum = 0.0
    last = 0.0
    for n in range(1, max_terms + 1):
        le = -(n * q + 1.0) * logt + math.lgamma(n * q + 1.0) - math.lgamma(n + 1.0) - math.log(math.pi)
        env = math.exp(le) if le < 700 else math.inf
        if not math.isfinite(env):
            raise ConvergenceError(f"Mainardi series overflows at theta={theta}")
        term = (1.0 if n % 2 else -1.0) * env * math.sin(n * math.pi * q)
        total += term
        absum += abs(term)
        last = env
        if n > 1 and env < prev_env and env <= 1e-14 * abs(total):
            return total, absum, env, n
        if n > 1 and env < prev_env and env < 1e-300:
            return total, absum, env, n
        prev_env = env
    raise ConvergenceError(
        f"Mainardi series did not converge in {max_terms} terms at theta={theta} (last term {last:.2e})"
    )


@lru_cache(maxsize=64)
def _mainardi_coefficients(q: float, dps: int, n: int) -> tuple:
    """Signed coefficients ``(-1)^(k-1) Gamma(k q + 1) sin(k pi q) / k!`` for ``k = 1..n``."""
    with mpmath.workdps(dps):
        mq = mpmath.mpf(q)
        return tuple(
            (1 if k % 2 else -1) * mpmath.gamma(k * mq + 1) * mpmath.sinpi(k * mq) / mpmath.factorial(k)
            for k in range(1, n + 1)
        )


def _mainardi_mp(q: float, theta: float, max_terms: int) -> float:
    logs = _mainardi_plan(q, theta, max_terms)
    if len(logs) >= max_terms:
        raise ConvergenceError(f"Mainardi series did not converge in {max_terms} terms at theta={theta}")
    digits = max(max(logs), 0.0) / math.log(10.0)
    dps = 10 * (int(digits + 25) // 10 + 1)
    coeffs = _mainardi_coefficients(q, dps, 64 * (len(logs) // 64 + 1))
    with mpmath.workdps(dps):
        # varpi(theta) = (1/(pi theta)) sum_k a_k x^k with x = theta^-q
        x = mpmath.mpf(theta) ** (-mpmath.mpf(q))
        acc = mpmath.mpf(0)
        for c in reversed(coeffs):
            acc = acc * x + c
        return float(acc * x / (mpmath.pi * theta))


def mainardi_density(
    q: float | FracOrder,
    theta: float,
    *,
    extended: bool = False,
    atol: float = 1e-12,
    max_terms: int = 500,
) -> float:
    """One-sided stable density ``varpi_q(theta)`` from its alternating series.

    The series converges for every ``theta > 0`` but cancels catastrophically as
    ``theta -> 0``.  In double precision (the default) the rounding error is
    bounded by ``4 eps sum|terms|``; when that exceeds ``atol`` a
    :class:`ConvergenceError` is raised instead of returning a wrong value.
    With ``extended=True`` the sum is carried in mpmath at a precision that
    covers the cancellation, and the term cap is raised tenfold.
    """
    q = order_value(q)
    theta = float(theta)
    if not theta > 0.0:
        raise DomainError(f"density argument must be positive, got {theta!r}")
    if extended:
        return _mainardi_mp(q, theta, 10 * max_terms)
    total, absum, _, _ = _mainardi_double(q, theta, max_terms)
    rounding = 4.0 * EPS * absum
    if rounding > atol:
        raise ConvergenceError(
            f"Mainardi series loses accuracy at theta={theta} (rounding bound {rounding:.1e}); "
            f"theta_min({q}) = {mainardi_theta_min(q, atol=atol):.4g}, use extended=True below it"
        )
    return total


@lru_cache(maxsize=256)
def mainardi_theta_min(q: float, atol: float = 1e-12) -> float:
    """Smallest ``theta`` at which the double-precision series meets ``atol``.

    Found by bisection on ``log theta`` of the rounding bound ``4 eps sum|terms|``,
    which is monotone in ``theta``.
    """
    q = order_value(q)

    def bad(t: float) -> bool:
        try:
            _, absum, _, _ = _mainardi_double(q, t, 5000)
        except ConvergenceError:
            return True
        return 4.0 * EPS * absum > atol

    lo, hi = -40.0, 5.0
    if not bad(math.exp(lo)):
        return math.exp(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if bad(math.exp(mid)):
            lo = mid
        else:
            hi = mid
    return math.exp(hi)


def xi_density(q: float | FracOrder, theta: float, *, extended: bool = False) -> float:
    """Probability density ``xi_q(theta) = theta^(-1-1/q) varpi_q(theta^(-1/q)) / q``.

    In double precision this raises :class:`ConvergenceError` wherever the
    series for ``varpi_q`` cannot be trusted.  With ``extended=True`` it falls
    back, in order, to the extended-precision series, then (far in the tail,
    where that series needs thousands of terms) to the saddle-point term when
    it is below ``1e-40``, and finally to :func:`wright_density`.
    """
    q = order_value(q)
    theta = float(theta)
    if not theta > 0.0:
        raise DomainError(f"density argument must be positive, got {theta!r}")
    s = theta ** (-1.0 / q)
    scale = theta ** (-1.0 - 1.0 / q) / q
    if not extended:
        return scale * mainardi_density(q, s)
    try:
        return scale * mainardi_density(q, s, extended=True)
    except ConvergenceError:
        far = _xi_saddle(q, theta)
        if far < 1e-40:
            return far
        return wright_density(q, theta)


@lru_cache(maxsize=64)
def _wright_coefficients(q: float, dps: int, n: int) -> tuple:
    """``(-1)^k / (k! Gamma(1 - q - k q))`` for ``k = 0..n-1``, via the reflection formula."""
    with mpmath.workdps(dps):
        mq = mpmath.mpf(q)
        return tuple(
            (-1) ** k * mpmath.gamma((k + 1) * mq) * mpmath.sinpi((k + 1) * mq) / (mpmath.pi * mpmath.factorial(k))
            for k in range(n)
        )


def wright_density(q: float | FracOrder, theta: float, *, max_terms: int = 20000) -> float:
    """``xi_q(theta)`` from the power series of the Wright function ``M_q`` in ``theta``.

    This is a second route to :func:`xi_density` that cancels at large ``theta``
    instead of small ``theta``; it is summed in mpmath at a precision that
    covers the largest term.
    """
    q = order_value(q)
    if not 0.0 < q < 1.0:
        raise DomainError(f"Wright series needs 0 < q < 1, got {q!r}")
    theta = float(theta)
    if theta < 0.0:
        raise DomainError(f"density argument must be non-negative, got {theta!r}")
    if theta == 0.0:
        return 1.0 / math.gamma(1.0 - q)
    logt = math.log(theta)
    peak, n = -math.inf, 0
    while True:
        le = n * logt - math.lgamma(n + 1.0) + math.lgamma((n + 1) * q) - math.log(math.pi)
        peak = max(peak, le)
        n += 1
        if n > max_terms:
            raise ConvergenceError(f"Wright series did not converge in {max_terms} terms at theta={theta}")
        if n > 2 and le < peak + math.log(1e-17) and le < _MAINARDI_TAIL:
            break
    dps = 10 * (int(max(peak, 0.0) / math.log(10.0) + 25) // 10 + 1)
    coeffs = _wright_coefficients(q, dps, 64 * (n // 64 + 1))
    with mpmath.workdps(dps):
        x = mpmath.mpf(theta)
        acc = mpmath.mpf(0)
        for c in reversed(coeffs):
            acc = acc * x + c
        return float(acc)


def _xi_saddle(q: float, theta: float) -> float:
    """Leading large-``theta`` term ``A Y^(q - 1/2) exp(-Y)`` with ``Y = (1-q)(q^q theta)^(1/(1-q))``."""
    y = (1.0 - q) * (q**q * theta) ** (1.0 / (1.0 - q))
    return y ** (q - 0.5) * math.exp(-y) / math.sqrt(2.0 * math.pi * (1.0 - q))


def _xi_auto(q: float, theta: float) -> float:
    try:
        return xi_density(q, theta)
    except ConvergenceError:
        return xi_density(q, theta, extended=True)


@dataclass(frozen=True)
class MomentResult:
    nu: float
    quadrature: float
    closed_form: float
    abs_diff: float
    quad_error: float
    upper_limit: float
    tail_estimate: float


def xi_moment(q: float | FracOrder, nu: float, *, tol: float = 1e-9) -> MomentResult:
    """``int_0^inf theta^nu xi_q(theta) dtheta`` by adaptive quadrature, next to ``Gamma(1+nu)/Gamma(1+q nu)``.

    The domain is cut at the first doubling ``Theta`` where
    ``Theta^(nu+1) xi_q(Theta) < 1e-18``.  Past the mode the integrand is
    decreasing, so ``tail_estimate = Theta^(nu+1) |xi_q(Theta)|`` bounds the
    mass on ``[Theta, 2 Theta]``; because ``xi_q`` decays like
    ``exp(-c theta^(1/(1-q)))`` that interval dominates everything beyond.
    Densities at large ``theta`` are evaluated in extended precision.
    """
    q = order_value(q)
    nu = float(nu)
    if nu < 0.0:
        raise DomainError(f"moment order must be non-negative, got {nu!r}")

    def integrand(t: float) -> float:
        if t <= 0.0:
            return 0.0
        return t**nu * _xi_auto(q, t)

    upper = 1.0
    while upper ** (nu + 1.0) * _xi_auto(q, upper) >= 1e-18:
        upper *= 2.0
        if upper > 1e4:
            raise ConvergenceError(f"xi_{q} tail does not decay for nu={nu}")

    knots = np.linspace(0.0, upper, 9)
    value, err = 0.0, 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        v, e = integrate.quad(integrand, a, b, limit=200, epsabs=1e-13, epsrel=1e-12)
        value, err = value + v, err + e
    tail = upper * integrand(upper)
    if err > tol:
        raise ConvergenceError(f"moment quadrature error {err:.2e} exceeds {tol:.1e}")
    closed = math.exp(math.lgamma(1.0 + nu) - math.lgamma(1.0 + q * nu))
    return MomentResult(nu, value, closed, abs(value - closed), err, upper, abs(tail))
