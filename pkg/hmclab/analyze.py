"""Closed-form contraction rates and Lyapunov certificates for the samplers.

Rates are reported as squared per-step factors: a chain contracts in W2 by
sqrt(rate) per iteration. Two measures are available. The Gram measure is the
spectral radius of A^T A, which bounds a single step in the Euclidean norm.
The asymptotic measure is the squared spectral radius of A itself, which
governs the decay over many steps and is what the accelerated parameter
choices are tuned for.
"""

import enum
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import cvxpy as cp
import numpy as np

from .errors import ParameterError
from .models import Interval, Spectrum, Target
from .sample import Variant, chebyshev_schedule, optimal_params

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 10_000
DEFAULT_CERT_GRID_POINTS = 1_000

# Rounding slack for the radicand b^2 - 4 eta^4
_RADICAND_FLOOR = -1e-12


class RateMeasure(str, enum.Enum):
    GRAM = 'gram'
    ASYMPTOTIC = 'asymptotic'


@dataclass(frozen=True)
class SpectralReport:
    sigma: float
    T: float
    eta: float
    b: float
    rho: float
    det: float
    per_step_w2_factor: float
    asymptotic_rate: float

    def to_dict(self) -> dict:
        return asdict(self)


def _gram_radius(sigma, T: float, eta: float):
    sigma = np.asarray(sigma, dtype=float)
    s2 = np.sin(np.sqrt(sigma) * T)**2
    c2 = 1.0 - s2
    b = s2 * eta**2 * (sigma + 1.0 / sigma) + c2 * (1.0 + eta**4)
    radicand = b**2 - 4.0 * eta**4
    if np.any(radicand < _RADICAND_FLOOR * np.maximum(b**2, 1.0)):
        logger.debug(f"Negative radicand {radicand.min()} clamped to zero")
    rho = 0.5 * (b + np.sqrt(np.maximum(radicand, 0.0)))
    return b, rho


def _asymptotic_radius(sigma, T: float, eta: float):
    """Spectral radius of A: trace cos(sqrt(sigma) T)(1 + eta^2), determinant eta^2."""
    trace = np.cos(np.sqrt(np.asarray(sigma, dtype=float)) * T) * (1.0 + eta**2)
    disc = trace**2 - 4.0 * eta**2
    real_roots = 0.5 * (np.abs(trace) + np.sqrt(np.maximum(disc, 0.0)))
    return np.where(disc >= 0, real_roots, eta)


def _check_inputs(T: float, eta: float) -> None:
    if not T > 0:
        raise ParameterError(f"integration time must be positive, got {T}")
    if not 0 <= eta < 1:
        raise ParameterError(f"eta must lie in [0, 1), got {eta}")


def spectral_radius(sigma: float, T: float, eta: float) -> SpectralReport:
    """Largest eigenvalue of A(sigma)^T A(sigma) in closed form."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    _check_inputs(T, eta)
    b, rho = _gram_radius(sigma, T, eta)
    b, rho = float(b), float(rho)
    return SpectralReport(
        sigma=float(sigma), T=float(T), eta=float(eta),
        b=b, rho=rho, det=float(eta**4),
        per_step_w2_factor=math.sqrt(rho),
        asymptotic_rate=float(_asymptotic_radius(sigma, T, eta)),
    )


SigmaSource = Union[Spectrum, Interval, Sequence[float], np.ndarray]


def sigma_points(source: SigmaSource, grid_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Eigenvalues to maximize over: a Spectrum's list, an Interval's grid, or a raw list."""
    if isinstance(source, Target):
        source = source.spectrum
    if isinstance(source, Spectrum):
        return source.sigma
    if isinstance(source, Interval):
        return source.grid(grid_points)
    values = np.asarray(source, dtype=float).ravel()
    if values.size == 0 or np.any(values <= 0):
        raise ParameterError("eigenvalues must be positive and nonempty")
    return values


def _bounds(source: SigmaSource) -> Interval:
    if isinstance(source, Target):
        source = source.spectrum
    if isinstance(source, (Spectrum, Interval)):
        return Interval(source.mu, source.L)
    values = sigma_points(source)
    return Interval(float(values.min()), float(values.max()))


def worst_case_rate(source: SigmaSource, T: float, eta: float,
                    grid_points: int = DEFAULT_GRID_POINTS, measure: str = 'gram') -> float:
    """Worst squared per-step contraction factor over the eigenvalues."""
    _check_inputs(T, eta)
    sigma = sigma_points(source, grid_points)
    if RateMeasure(measure) is RateMeasure.GRAM:
        return float(np.max(_gram_radius(sigma, T, eta)[1]))
    return float(np.max(_asymptotic_radius(sigma, T, eta))**2)


def iterations_to_accuracy(rate: float, eps: float) -> float:
    """Iterations K with sqrt(rate)^K <= eps."""
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    if rate >= 1:
        return math.inf
    if rate <= 0:
        return 1.0
    return 2.0 * math.log(1.0 / eps) / -math.log(rate)


def minimax_gap(mu: float, L: float, T: float) -> float:
    """|pi/2 - sqrt(mu) T| - |sqrt(L) T - pi/2|, zero at T = pi/(sqrt(L) + sqrt(mu))."""
    return abs(math.pi / 2 - math.sqrt(mu) * T) - abs(math.sqrt(L) * T - math.pi / 2)


def expected_cos2(sigma, lam):
    """E cos^2(sqrt(sigma) T) for T ~ Exp(mean lam)."""
    sigma = np.asarray(sigma, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(sigma <= 0) or np.any(lam < 0):
        raise ParameterError("expected_cos2 needs sigma > 0 and lam >= 0")
    value = 1.0 - 2.0 * lam**2 * sigma / (1.0 + 4.0 * lam**2 * sigma)
    return float(value) if value.ndim == 0 else value


def rhmc_expected_time(mu: float, L: float, lam: float, eps: float) -> float:
    """Expected total time of randomized HMC to reach W2 <= eps."""
    if not 0 < mu <= L:
        raise ParameterError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    if not lam > 0:
        raise ParameterError(f"lam must be positive, got {lam}")
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    return max(1.0 / (lam * s) + 4.0 * lam for s in (mu, L)) * math.log(1.0 / eps)


def optimal_rhmc_lambda(mu: float, L: float, eps: float = 1e-2, grid=None) -> float:
    """Grid minimizer of rhmc_expected_time over lam."""
    if grid is None:
        grid = np.geomspace(1e-3, 1e3, 60_001) / math.sqrt(mu)
    times = [rhmc_expected_time(mu, L, lam, eps) for lam in grid]
    return float(grid[int(np.argmin(times))])


def chebyshev_contraction(source: SigmaSource, K: int, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """max_sigma |prod_k cos(sqrt(sigma) T_k)| over the K Chebyshev durations."""
    bounds = _bounds(source)
    durations = chebyshev_schedule(bounds.mu, bounds.L, K)
    sigma = sigma_points(source, grid_points)
    products = np.prod(np.cos(np.sqrt(sigma)[:, None] * durations[None, :]), axis=1)
    return float(np.max(np.abs(products)))


def chebyshev_total_time(mu: float, L: float, K: int) -> float:
    return float(np.sum(chebyshev_schedule(mu, L, K)))


def predicted_cost(variant, mu: float, L: float, eps: float,
                   grid_points: int = DEFAULT_GRID_POINTS) -> dict:
    """Iterations and total time to predicted W2 <= eps with optimal parameters."""
    variant = Variant(variant)
    params = optimal_params(variant, mu, L, eps)
    interval = Interval(mu, L)
    if variant in (Variant.BASELINE, Variant.DAMPED):
        rate = worst_case_rate(interval, params['T'], params['eta'], grid_points, measure='asymptotic')
        iterations = iterations_to_accuracy(rate, eps)
        return {'rate': rate, 'iterations': iterations, 'total_time': iterations * params['T']}
    if variant is Variant.RHMC:
        rate = float(np.max(expected_cos2(interval.grid(grid_points), params['lam'])))
        return {'rate': rate, 'iterations': iterations_to_accuracy(rate, eps),
                'total_time': rhmc_expected_time(mu, L, params['lam'], eps)}
    if variant is Variant.CHEBYSHEV:
        K = params['cycle']
        contraction = chebyshev_contraction(interval, K, grid_points)
        return {'rate': contraction**(2.0 / K), 'iterations': float(K),
                'total_time': chebyshev_total_time(mu, L, K)}
    raise ParameterError(f"no closed-form cost for {variant.value}")


def dissipation(lambda_inv: float, eta: float) -> float:
    """Effective momentum dissipation lambda^-1 (1 - eta^2)."""
    if lambda_inv < 0:
        raise ParameterError(f"refresh rate must be nonnegative, got {lambda_inv}")
    if not 0 <= eta <= 1:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    return lambda_inv * (1.0 - eta**2)


class RateKind(str, enum.Enum):
    CONSTANT = 'constant'
    PROPORTIONAL = 'proportional'


@dataclass(frozen=True)
class RefreshRates:
    """Refresh rate lambda^-1 as a function of curvature: value or value * sigma."""
    kind: RateKind
    value: float

    def __post_init__(self):
        object.__setattr__(self, 'kind', RateKind(self.kind))
        if self.value < 0:
            raise ParameterError(f"refresh rates must be nonnegative, got {self.value}")

    @classmethod
    def constant(cls, value: float) -> 'RefreshRates':
        return cls(RateKind.CONSTANT, float(value))

    @classmethod
    def proportional(cls, factor: float) -> 'RefreshRates':
        return cls(RateKind.PROPORTIONAL, float(factor))

    @classmethod
    def coordinate(cls, mu: float) -> 'RefreshRates':
        """lambda_i^-1 = sigma_i / sqrt(mu)."""
        return cls.proportional(1.0 / math.sqrt(mu))

    def __call__(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        if self.kind is RateKind.CONSTANT:
            return np.full_like(sigma, self.value)
        return self.value * sigma

    def scaled(self, mu: float) -> 'RefreshRates':
        """Rates in units where mu = 1 (time measured in 1/sqrt(mu))."""
        if self.kind is RateKind.CONSTANT:
            return RefreshRates.constant(self.value / math.sqrt(mu))
        return RefreshRates.proportional(self.value * math.sqrt(mu))

    def to_dict(self) -> dict:
        return {'kind': self.kind.value, 'value': self.value}


class Metric(str, enum.Enum):
    FLAT = 'flat'         # A = [[a I, b I], [b I, c I]]
    HESSIAN = 'hessian'   # A = [[a Sigma, b I], [b I, c I]]


@dataclass(frozen=True)
class LyapunovCertificate:
    """Quadratic form ||y||_A^2 = a'|x|^2 + 2b x.v + c|v|^2 with contraction rate r."""
    a: float
    b: float
    c: float
    r: float
    eta: float
    rates: RefreshRates
    metric: Metric = Metric.FLAT

    def __post_init__(self):
        object.__setattr__(self, 'metric', Metric(self.metric))
        if self.r < 0:
            raise ParameterError(f"contraction rate must be nonnegative, got {self.r}")
        if not 0 <= self.eta < 1:
            raise ParameterError(f"eta must lie in [0, 1), got {self.eta}")

    def to_dict(self) -> dict:
        return {'a': self.a, 'b': self.b, 'c': self.c, 'r': self.r, 'eta': self.eta,
                'rates': self.rates.to_dict(), 'metric': self.metric.value}

    @classmethod
    def from_dict(cls, data: dict) -> 'LyapunovCertificate':
        rates = data['rates']
        return cls(float(data['a']), float(data['b']), float(data['c']), float(data['r']),
                   float(data.get('eta', 0.0)), RefreshRates(rates['kind'], float(rates['value'])),
                   data.get('metric', 'flat'))


@dataclass(frozen=True)
class CertificateCheck:
    feasible: bool
    margin: float
    worst_sigma: Optional[float] = None

    def to_dict(self) -> dict:
        return {'feasible': self.feasible, 'margin': self.margin, 'worst_sigma': self.worst_sigma}


def _condition_terms(cert: LyapunovCertificate, sigma: np.ndarray):
    lam_inv = cert.rates(sigma)
    a_eff = cert.a * sigma if cert.metric is Metric.HESSIAN else np.full_like(sigma, cert.a)
    r, b, c, eta = cert.r, cert.b, cert.c, cert.eta
    P = -2.0 * r * a_eff + 2.0 * b * sigma
    S = -2.0 * r * c + c * (1.0 - eta**2) * lam_inv - 2.0 * b
    Q = -2.0 * r * b + b * (1.0 - eta) * lam_inv - a_eff + c * sigma
    return a_eff, lam_inv, P, S, Q


def check_certificate(mu: float, L: float, cert: LyapunovCertificate,
                      grid_points: int = DEFAULT_CERT_GRID_POINTS, tol: float = 1e-12) -> CertificateCheck:
    """Evaluate the generator conditions S_t >= 2rA on a sigma grid of [mu, L].

    The margin is the smallest slack over the grid, each condition normalized
    by the scale of the coefficients that enter it.
    """
    sigma = Interval(mu, L).grid(grid_points)
    a_eff, lam_inv, P, S, Q = _condition_terms(cert, sigma)
    scale = (np.abs(a_eff) + abs(cert.b) + abs(cert.c)) * (1.0 + sigma + lam_inv + cert.r)
    scale = np.where(scale > 0, scale, 1.0)

    slacks = np.vstack([
        np.minimum(a_eff, cert.c) / scale,
        (a_eff * cert.c - cert.b**2) / scale**2,
        P / scale,
        S / scale,
        (P * S - Q**2) / scale**2,
    ])
    per_sigma = slacks.min(axis=0)
    worst = int(np.argmin(per_sigma))
    margin = float(per_sigma[worst])
    return CertificateCheck(feasible=margin >= -tol, margin=margin, worst_sigma=float(sigma[worst]))


class _CertificateProblem:
    """Max-margin SOCP in normalized units (mu = 1) for a fixed rate parameter r."""

    _DELTA = 1e-6

    def __init__(self, sigma: np.ndarray, lam_inv: np.ndarray, eta: float, metric: Metric):
        self.a = cp.Variable()
        self.b = cp.Variable()
        self.c = cp.Variable()
        self.m = cp.Variable()
        self.r = cp.Parameter(nonneg=True)
        a_eff = self.a * sigma if metric is Metric.HESSIAN else self.a * np.ones_like(sigma)
        P = -2 * self.r * a_eff + 2 * self.b * sigma
        S = -2 * self.r * self.c + self.c * ((1 - eta**2) * lam_inv) - 2 * self.b
        Q = -2 * self.r * self.b + self.b * ((1 - eta) * lam_inv) - a_eff + self.c * sigma
        constraints = [
            # [[P, Q], [Q, S]] - (m/2) I is PSD at every grid point
            cp.SOC(P + S - self.m, cp.vstack([2 * Q, P - S]), axis=0),
            # [[a_eff, b], [b, c]] - delta I is PSD
            cp.SOC(a_eff + self.c - 2 * self._DELTA, cp.vstack([2 * self.b * np.ones_like(sigma), a_eff - self.c]), axis=0),
            self.a + self.c == 1,
            self.m <= 1,
        ]
        self.problem = cp.Problem(cp.Maximize(self.m), constraints)

    def solve(self, r: float):
        """Return (a, b, c, margin) or None when the solver fails."""
        self.r.value = r
        try:
            self.problem.solve()
        except cp.error.SolverError as e:
            logger.warning(f"Certificate solve failed at r={r}: {e}")
            return None
        if self.problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            logger.debug(f"Certificate solve at r={r} ended with status {self.problem.status}")
            return None
        return float(self.a.value), float(self.b.value), float(self.c.value), float(self.m.value)


def search_certificate(mu: float, L: float, eta: float, rates: RefreshRates,
                       metric: str = 'flat', grid_points: int = DEFAULT_CERT_GRID_POINTS,
                       iterations: int = 40, feasibility_tol: float = 1e-6) -> LyapunovCertificate:
    """Largest certified contraction rate r by bisection, with (a, b, c) from an SOCP.

    The problem is solved in units where mu = 1, which removes the scale of
    the spectrum; feasibility is monotone in r. A zero-rate certificate is
    returned when no positive rate is certified.
    """
    if not 0 < mu <= L:
        raise ParameterError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    if not 0 <= eta < 1:
        raise ParameterError(f"eta must lie in [0, 1), got {eta}")
    metric = Metric(metric)
    sigma = Interval(1.0, L / mu).grid(grid_points)
    unit_rates = rates.scaled(mu)
    lam_inv = unit_rates(sigma)
    sqrt_mu = math.sqrt(mu)

    def to_certificate(solution, r_unit) -> LyapunovCertificate:
        a, b, c, _ = solution
        a_scale = mu if metric is Metric.FLAT else 1.0
        return LyapunovCertificate(a * a_scale, b * sqrt_mu, c, r_unit * sqrt_mu, eta, rates, metric)

    problem = _CertificateProblem(sigma, lam_inv, eta, metric)
    best = problem.solve(0.0)
    if best is None:
        best = (0.5, 0.0, 0.5, -math.inf)
    zero = to_certificate(best, 0.0)
    r_hi = 0.5 * float(np.min((1.0 - eta**2) * lam_inv))
    if r_hi <= 0 or best[3] < -feasibility_tol:
        logger.info(f"No positive contraction rate certified for mu={mu}, L={L}, rates={rates.to_dict()}")
        return zero

    lo, hi, best_r = 0.0, r_hi, 0.0
    for _ in range(int(iterations)):
        mid = 0.5 * (lo + hi)
        solution = problem.solve(mid)
        if solution is not None and solution[3] > feasibility_tol:
            lo, best, best_r = mid, solution, mid
        else:
            hi = mid
        logger.debug(f"Certificate bisection: r in [{lo}, {hi}]")

    # Step back into the interior until the grid check accepts the certificate
    r_unit = best_r
    for _ in range(50):
        if r_unit <= 0:
            break
        cert = to_certificate(best, r_unit)
        if check_certificate(mu, L, cert, grid_points).feasible:
            return cert
        r_unit *= 1.0 - 1e-3
        solution = problem.solve(r_unit)
        if solution is not None:
            best = solution
    logger.warning(f"Certificate polishing failed for mu={mu}, L={L}; returning r=0")
    return zero


def w2_prefactor(cert: LyapunovCertificate, mu: float, L: float) -> float:
    """Bound on |x_t - x'_t| / |x_0 - x'_0| at t = 0 for chains sharing v_0."""
    sigma = Interval(mu, L).grid(2)
    a_eff = cert.a * sigma if cert.metric is Metric.HESSIAN else np.full_like(sigma, cert.a)
    det = a_eff * cert.c - cert.b**2
    if np.any(det <= 0) or cert.c <= 0:
        return math.inf
    return float(np.sqrt(np.max(a_eff * cert.c / det)))


def time_to_accuracy(cert: LyapunovCertificate, eps: float, mu: float, L: float) -> float:
    """Time after which the certificate guarantees relative W2 contraction eps."""
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    if cert.r <= 0:
        return math.inf
    return math.log(w2_prefactor(cert, mu, L) / eps) / cert.r
