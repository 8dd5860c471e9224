"""Chain diagnostics: W2 between Gaussians, ESS, covariance error, couplings."""

import enum
import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import List, Sequence

import numpy as np
from scipy import signal

from .errors import ParameterError, UndefinedStatisticError
from .flow import exact_flow
from .integrate import velocity_verlet_step
from .models import PhaseState, Target
from .sample import ChainRecord, SamplerSpec, chain_streams, run_chain

logger = logging.getLogger(__name__)

# Coupled differences below this fraction of the state size are rounding noise
_COUPLING_FLOOR = 1e-9
COUPLING_BURN_IN = 10


class EssMethod(str, enum.Enum):
    GEYER = 'geyer'
    MONOTONE = 'monotone'
    FIXED_LAG = 'fixed-lag'


@dataclass(frozen=True)
class DiagnosticsReport:
    min_ess: float
    mean_ess: float
    cov_error: float
    w2_to_target: float
    empirical_rate: float

    def to_dict(self) -> dict:
        return asdict(self)


def w2_gaussians(mean1, var1, mean2, var2) -> float:
    """W2 between Gaussians with diagonal covariances."""
    mean1, mean2 = np.asarray(mean1, float), np.asarray(mean2, float)
    var1, var2 = np.asarray(var1, float), np.asarray(var2, float)
    if np.any(var1 <= 0) or np.any(var2 <= 0):
        raise UndefinedStatisticError("W2 between Gaussians needs positive variances")
    return float(math.sqrt(np.sum((mean1 - mean2)**2) + np.sum((np.sqrt(var1) - np.sqrt(var2))**2)))


def autocorrelation(series) -> np.ndarray:
    """Biased autocorrelation estimate at lags 0..n-1."""
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    centered = x - x.mean()
    acov = signal.fftconvolve(centered, centered[::-1], mode='full')[n - 1:] / n
    if acov[0] <= 0:
        raise UndefinedStatisticError("ESS is undefined for a constant series")
    return acov / acov[0]


def ess(series, method: str = 'geyer', max_lag: int = 200) -> float:
    """Effective sample size n / (1 + 2 sum_t rho_t), clamped to (0, n].

    The geyer method sums autocorrelation pairs rho_2k + rho_2k+1 until the
    first nonpositive pair; monotone additionally forces the pair sums to be
    nonincreasing; fixed-lag sums lags 1..max_lag.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ParameterError(f"ESS needs at least 10 draws, got {n}")
    rho = autocorrelation(x)
    method = EssMethod(method)

    if method is EssMethod.FIXED_LAG:
        tau = 1.0 + 2.0 * np.sum(rho[1:min(int(max_lag), n - 1) + 1])
    else:
        pairs = rho[:2 * (n // 2)].reshape(-1, 2).sum(axis=1)
        nonpositive = np.nonzero(pairs <= 0)[0]
        stop = nonpositive[0] if nonpositive.size else pairs.size
        pairs = pairs[:stop]
        if method is EssMethod.MONOTONE:
            pairs = np.minimum.accumulate(pairs)
        tau = -1.0 + 2.0 * np.sum(pairs)

    if tau <= 0:
        return float(n)
    return float(min(n / tau, n))


def cov_error(samples, spectrum) -> float:
    """||Cov(samples) - diag(1/sigma)||_F / ||diag(1/sigma)||_F."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < 2:
        raise ParameterError("covariance error needs at least 2 samples")
    sigma = getattr(spectrum, 'sigma', spectrum)
    truth = np.diag(1.0 / np.asarray(sigma, dtype=float))
    estimate = np.atleast_2d(np.cov(samples, rowvar=False))
    return float(np.linalg.norm(estimate - truth) / np.linalg.norm(truth))


def lag_one_rate(positions) -> float:
    """Largest absolute lag-1 autocorrelation across coordinates."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    rates = []
    for column in positions.T:
        try:
            rates.append(abs(autocorrelation(column)[1]))
        except UndefinedStatisticError:
            continue
    return float(max(rates)) if rates else float('nan')


def diagnose_chain(record: ChainRecord, target: Target, ess_method: str = 'geyer',
                   max_lag: int = 200) -> DiagnosticsReport:
    """Summaries of a single chain's recorded positions."""
    positions = record.positions
    values = np.array([ess(positions[:, i], ess_method, max_lag) for i in range(positions.shape[1])])
    var = positions.var(axis=0)
    w2 = w2_gaussians(positions.mean(axis=0), np.maximum(var, np.finfo(float).tiny),
                      np.zeros(target.d), 1.0 / target.sigma)
    return DiagnosticsReport(
        min_ess=float(values.min()),
        mean_ess=float(values.mean()),
        cov_error=cov_error(positions, target.spectrum),
        w2_to_target=w2,
        empirical_rate=lag_one_rate(positions),
    )


def ensemble_report(records: Sequence[ChainRecord], target: Target, ess_method: str = 'geyer',
                    max_lag: int = 200) -> DiagnosticsReport:
    """Averages of per-chain ESS; covariance and W2 from the last sample of every chain."""
    reports = [diagnose_chain(r, target, ess_method, max_lag) for r in records]
    last = np.array([r.positions[-1] for r in records])
    if last.shape[0] >= 2:
        var = last.var(axis=0)
        error = cov_error(last, target.spectrum)
        w2 = w2_gaussians(last.mean(axis=0), np.maximum(var, np.finfo(float).tiny),
                          np.zeros(target.d), 1.0 / target.sigma)
    else:
        error, w2 = reports[0].cov_error, reports[0].w2_to_target
    return DiagnosticsReport(
        min_ess=float(np.mean([r.min_ess for r in reports])),
        mean_ess=float(np.mean([r.mean_ess for r in reports])),
        cov_error=error,
        w2_to_target=w2,
        empirical_rate=float(np.mean([r.empirical_rate for r in reports])),
    )


@dataclass(frozen=True, eq=False)
class CoupledRun:
    """Norms of y_k - y'_k and of y_k for one synchronously coupled pair."""
    differences: np.ndarray
    magnitudes: np.ndarray
    times: np.ndarray

    def usable(self, start: int = 0) -> np.ndarray:
        """Indices from `start` until the difference drops into rounding noise."""
        above = self.differences > _COUPLING_FLOOR * (self.magnitudes + 1.0)
        stop = int(np.argmin(above)) if not above.all() else above.size
        return np.arange(start, max(start, stop))


def coupled_runs(target: Target, spec: SamplerSpec, steps: int, trials: int, seed: int = 0,
                 separation: float = 1.0) -> List[CoupledRun]:
    """Pairs of chains sharing every random input except the initial position.

    Both chains start from the same velocity; their positions differ by a
    random direction of length `separation`.
    """
    if not spec.exact or not target.is_quadratic:
        raise ParameterError("coupled runs need the exact engine and a quadratic target")
    runs = []
    for trial in range(int(trials)):
        trial_seed = seed + trial
        init = chain_streams(trial_seed).init
        x0 = init.standard_normal(target.d) / math.sqrt(target.smoothness)
        v0 = init.standard_normal(target.d)
        direction = init.standard_normal(target.d)
        x0p = x0 + separation * direction / np.linalg.norm(direction)

        paired = replace(spec, K=int(steps), seed=trial_seed)
        first = run_chain(target, paired, chain_streams(trial_seed), init=PhaseState(x0, v0),
                          record_velocities=True)
        second = run_chain(target, paired, chain_streams(trial_seed), init=PhaseState(x0p, v0),
                           record_velocities=True)
        delta = np.hstack([first.positions - second.positions, first.velocities - second.velocities])
        size = np.hstack([first.positions, first.velocities])
        if spec.sample_every is None:
            times = np.cumsum(first.jump_times)[:first.K]
        else:
            times = spec.sample_every * np.arange(1, first.K + 1)
        runs.append(CoupledRun(np.linalg.norm(delta, axis=1), np.linalg.norm(size, axis=1), times))
    return runs


def _log_slope(x, y) -> float:
    slope, _ = np.polyfit(x, np.log(y), 1)
    return float(slope)


def coupled_rate(target: Target, spec: SamplerSpec, steps: int = 200, trials: int = 4,
                 seed: int = 0, statistic: str = 'geometric', separation: float = 1.0) -> float:
    """Per-step decay factor of |y_k - y'_k| for synchronously coupled chains.

    geometric: exp of the log-linear slope from step 10 on, averaged over
    trials. mean-square: mean of the squared per-step ratios
    |y_k - y'_k|^2 / |y_k-1 - y'_k-1|^2, to compare with E cos^2.
    """
    spec = replace(spec, sample_every=None)
    runs = coupled_runs(target, spec, steps, trials, seed, separation)
    if statistic == 'mean-square':
        ratios = np.concatenate([squared_ratios(run) for run in runs])
        if ratios.size == 0:
            raise UndefinedStatisticError("coupled chains merged before any ratio was recorded")
        return float(ratios.mean())
    if statistic != 'geometric':
        raise ParameterError(f"unknown coupling statistic {statistic!r}")
    slopes = []
    for run in runs:
        idx = run.usable(COUPLING_BURN_IN)
        if idx.size < 2:
            continue
        slopes.append(_log_slope(idx, run.differences[idx]))
    if not slopes:
        raise UndefinedStatisticError("coupled chains merged before the fit window")
    return float(math.exp(np.mean(slopes)))


def squared_ratios(run: CoupledRun) -> np.ndarray:
    """|Delta_k|^2 / |Delta_k-1|^2 for every k whose previous difference is resolvable."""
    end = min(run.usable(0).size + 1, run.differences.size)
    d = run.differences[:end]
    return (d[1:] / d[:-1])**2


def coupled_contraction_exponent(target: Target, spec: SamplerSpec, horizon: float,
                                 trials: int = 4, seed: int = 0, resolution: int = 200) -> float:
    """Continuous-time decay exponent r of |y_t - y'_t| ~ exp(-r t)."""
    every = horizon / resolution
    spec = replace(spec, sample_every=every)
    runs = coupled_runs(target, spec, resolution, trials, seed)
    exponents = []
    for run in runs:
        idx = run.usable(0)
        if idx.size < 2:
            continue
        exponents.append(-_log_slope(run.times[idx], run.differences[idx]))
    if not exponents:
        raise UndefinedStatisticError("coupled chains merged before the first record")
    return float(np.mean(exponents))


def _coupled_flow(target: Target, x0, x0p, v0, T: float, substeps: int):
    """Flow both copies for time T: exactly for quadratics, else fine velocity Verlet."""
    state = PhaseState(np.vstack([x0, x0p]), np.vstack([v0, v0]))
    if target.is_quadratic:
        return exact_flow(target.spectrum, state, T)
    h = T / substeps
    for _ in range(int(substeps)):
        state = velocity_verlet_step(target, state, h)
    return state


def check_flow_inequalities(target: Target, x0, x0p, T: float, v0=None, eta: float = 1.0,
                            substeps: int = 10_000) -> np.ndarray:
    """Slack of the three contraction inequalities after one coupled flow of length T.

    With dx = x_T - x'_T, dv = v_T - v'_T and n = |x_0 - x'_0|^2 the slacks are
      (1 - mu/(16 L)) n - |dx|^2,
      eta^2 (L/4) n - |eta dv|^2,
      -eta mu/(2 sqrt(L)) n - <dx, eta dv>,
    each divided by n, where eta dv is the velocity difference after a partial
    refresh with shared noise. L is the target's smoothness bound.
    """
    mu, L = target.mu, target.smoothness
    if not 0 < T <= (1.0 + 1e-12) / (2.0 * math.sqrt(L)):
        raise ParameterError(f"T must lie in (0, 1/(2 sqrt(L))] = (0, {1 / (2 * math.sqrt(L)):.6g}], got {T}")
    x0, x0p = np.asarray(x0, float), np.asarray(x0p, float)
    n = float(np.sum((x0 - x0p)**2))
    if n == 0:
        return np.zeros(3)
    v0 = np.zeros_like(x0) if v0 is None else np.asarray(v0, float)
    out = _coupled_flow(target, x0, x0p, v0, T, substeps)
    dx = out.x[0] - out.x[1]
    dv = eta * (out.v[0] - out.v[1])
    return np.array([
        (1.0 - mu / (16.0 * L)) - np.sum(dx**2) / n,
        eta**2 * L / 4.0 - np.sum(dv**2) / n,
        -eta * mu / (2.0 * math.sqrt(L)) - np.dot(dx, dv) / n,
    ])
