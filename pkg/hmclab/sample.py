"""Ideal HMC samplers: damped, randomized-time, Chebyshev and coordinate clocks."""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ParameterError
from .flow import exact_flow
from .integrate import IntegratorSpec
from .models import PhaseState, Spectrum, Target

logger = logging.getLogger(__name__)


class Variant(str, enum.Enum):
    DAMPED = 'damped'
    RHMC = 'rhmc'
    CHEBYSHEV = 'chebyshev'
    COORDINATE = 'coordinate'
    BASELINE = 'baseline'


class DurationLaw(str, enum.Enum):
    EXPONENTIAL = 'exponential'
    CONSTANT = 'constant'


class InitLaw(str, enum.Enum):
    DEFAULT = 'default'        # x ~ N(0, I/L), v ~ N(0, I)
    STATIONARY = 'stationary'  # x ~ N(0, 1/sigma), v ~ N(0, I)


EXACT = 'exact'


@dataclass(frozen=True)
class SamplerSpec:
    """Variant tag plus its parameters.

    T is the integration time of damped/baseline, lam the mean duration of
    rhmc, rates the per-coordinate clock rates of coordinate and cycle the
    Chebyshev schedule length (defaults to K). When sample_every is set,
    positions are recorded every sample_every units of simulated time
    instead of once per iteration.
    """
    variant: Variant
    K: int
    eta: float = 0.0
    T: Optional[float] = None
    lam: Optional[float] = None
    rates: Optional[Tuple[float, ...]] = None
    cycle: Optional[int] = None
    seed: int = 0
    engine: Union[str, IntegratorSpec] = EXACT
    duration_law: DurationLaw = DurationLaw.EXPONENTIAL
    sample_every: Optional[float] = None
    init: InitLaw = InitLaw.DEFAULT

    def __post_init__(self):
        variant = Variant(self.variant)
        object.__setattr__(self, 'variant', variant)
        object.__setattr__(self, 'duration_law', DurationLaw(self.duration_law))
        object.__setattr__(self, 'init', InitLaw(self.init))
        if int(self.K) < 1:
            raise ParameterError(f"K must be a positive integer, got {self.K}")
        object.__setattr__(self, 'K', int(self.K))
        if not 0 <= self.eta <= 1:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.engine != EXACT and not isinstance(self.engine, IntegratorSpec):
            raise ParameterError(f"engine must be 'exact' or an IntegratorSpec, got {self.engine!r}")
        if self.sample_every is not None and not self.sample_every > 0:
            raise ParameterError(f"sample_every must be positive, got {self.sample_every}")

        if variant is Variant.BASELINE and self.eta != 0:
            raise ParameterError("baseline is damped HMC with eta = 0")
        if variant in (Variant.DAMPED, Variant.BASELINE) and not (self.T and self.T > 0):
            raise ParameterError(f"{variant.value} needs a positive integration time T")
        if variant is Variant.RHMC and not (self.lam and self.lam > 0):
            raise ParameterError("rhmc needs a positive mean duration lam")
        if variant is Variant.COORDINATE:
            if self.rates is None:
                raise ParameterError("coordinate needs per-coordinate rates")
            rates = tuple(float(r) for r in self.rates)
            if not rates or min(rates) <= 0:
                raise ParameterError(f"coordinate rates must be positive, got {rates}")
            object.__setattr__(self, 'rates', rates)
        if self.cycle is not None and int(self.cycle) < 1:
            raise ParameterError(f"cycle must be a positive integer, got {self.cycle}")

    @property
    def exact(self) -> bool:
        return self.engine == EXACT

    def to_dict(self) -> dict:
        return {
            'variant': self.variant.value,
            'K': self.K,
            'eta': self.eta,
            'T': self.T,
            'lam': self.lam,
            'rates': list(self.rates) if self.rates is not None else None,
            'cycle': self.cycle,
            'seed': self.seed,
            'engine': EXACT if self.exact else self.engine.to_dict(),
            'duration_law': self.duration_law.value,
            'sample_every': self.sample_every,
            'init': self.init.value,
        }


@dataclass(eq=False)
class ChainRecord:
    """Recorded positions of one chain together with its realized durations."""
    positions: np.ndarray
    jump_times: np.ndarray
    total_time: float
    seed: int
    final_state: Optional[PhaseState] = None
    velocities: Optional[np.ndarray] = None

    @property
    def K(self) -> int:
        return int(self.positions.shape[0])


@dataclass
class ChainStreams:
    """Independent generators for the random inputs of one chain.

    Two chains built from the same seed consume identical refresh, duration,
    clock and integrator noise, which is how synchronous couplings are run.
    """
    init: np.random.Generator
    refresh: np.random.Generator
    duration: np.random.Generator
    clock: np.random.Generator
    integrator: np.random.Generator


def chain_streams(seed: int) -> ChainStreams:
    """Counter-based substreams spawned from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(5)
    return ChainStreams(*(np.random.Generator(np.random.Philox(child)) for child in children))


def ou_refresh(v, eta: float, z):
    """Partial velocity refresh eta v + sqrt(1 - eta^2) z."""
    if not 0 <= eta <= 1:
        raise ParameterError(f"eta must lie in [0, 1], got {eta}")
    return eta * np.asarray(v) + math.sqrt(1.0 - eta**2) * np.asarray(z)


class _Recorder:
    """Collects K positions, per iteration or on a simulated-time clock."""

    def __init__(self, K: int, d: int, every: Optional[float], velocities: bool):
        self.positions = np.empty((K, d))
        self.velocities = np.empty((K, d)) if velocities else None
        self.every = every
        self.count = 0
        self.clock = 0.0

    @property
    def full(self) -> bool:
        return self.count >= self.positions.shape[0]

    def record(self, state: PhaseState) -> None:
        self.positions[self.count] = state.x
        if self.velocities is not None:
            self.velocities[self.count] = state.v
        self.count += 1


class _Chain:
    """Shared execution path of every variant."""

    def __init__(self, target: Target, spec: SamplerSpec, streams: ChainStreams,
                 init: Optional[PhaseState], record_velocities: bool):
        if spec.exact and not target.is_quadratic:
            raise ParameterError("the exact engine needs a quadratic target")
        if not spec.exact:
            spec.engine.check_stable(target.smoothness)
        self.target = target
        self.spec = spec
        self.streams = streams
        self.state = init if init is not None else initial_state(target, spec.init, streams.init)
        if self.state.d != target.d:
            raise ParameterError(f"initial state has dimension {self.state.d}, target has {target.d}")
        self.recorder = _Recorder(spec.K, target.d, spec.sample_every, record_velocities)
        self.jump_times: List[float] = []

    def _evolve(self, state: PhaseState, duration: float) -> PhaseState:
        if self.spec.exact:
            return exact_flow(self.target.spectrum, state, duration)
        return self.spec.engine.integrate(self.target, state, duration, rng=self.streams.integrator)

    def flow(self, duration: float) -> None:
        """Move along the dynamics, recording clock ticks that fall inside."""
        self.jump_times.append(duration)
        rec = self.recorder
        if rec.every is None or rec.full:
            self.state = self._evolve(self.state, duration)
            return
        remaining = duration
        while remaining > 0:
            gap = rec.every - rec.clock
            if rec.full or gap > remaining:
                self.state = self._evolve(self.state, remaining)
                rec.clock += remaining
                return
            self.state = self._evolve(self.state, gap)
            remaining -= gap
            rec.clock = 0.0
            rec.record(self.state)

    def refresh(self, eta: float) -> None:
        z = self.streams.refresh.standard_normal(self.target.d)
        self.state = self.state.with_velocity(ou_refresh(self.state.v, eta, z))

    def end_iteration(self) -> None:
        if self.recorder.every is None:
            self.recorder.record(self.state)

    def run(self, iteration: Callable[['_Chain'], None]) -> ChainRecord:
        while not self.recorder.full:
            iteration(self)
        jump_times = np.asarray(self.jump_times, dtype=float)
        return ChainRecord(
            positions=self.recorder.positions,
            jump_times=jump_times,
            total_time=float(jump_times.sum()),
            seed=self.spec.seed,
            final_state=self.state,
            velocities=self.recorder.velocities,
        )


def initial_state(target: Target, law: InitLaw, rng: np.random.Generator) -> PhaseState:
    """Draw (x0, v0) from the requested initial law."""
    law = InitLaw(law)
    if law is InitLaw.STATIONARY:
        x = target.sample_stationary(1, rng)[0]
    else:
        x = rng.standard_normal(target.d) / math.sqrt(target.smoothness)
    return PhaseState(x, rng.standard_normal(target.d))


def _resolve_streams(spec: SamplerSpec, rng: Optional[ChainStreams]) -> ChainStreams:
    return rng if rng is not None else chain_streams(spec.seed)


def run_damped(target: Target, spec: SamplerSpec, rng: Optional[ChainStreams] = None,
               init: Optional[PhaseState] = None, record_velocities: bool = False) -> ChainRecord:
    """Refresh-half, flow for T, refresh-half, K times."""
    if spec.variant not in (Variant.DAMPED, Variant.BASELINE):
        raise ParameterError(f"run_damped needs a damped or baseline spec, got {spec.variant.value}")

    def iteration(chain: _Chain) -> None:
        chain.refresh(spec.eta)
        chain.flow(spec.T)
        chain.refresh(spec.eta)
        chain.end_iteration()

    return _Chain(target, spec, _resolve_streams(spec, rng), init, record_velocities).run(iteration)


def run_rhmc(target: Target, spec: SamplerSpec, rng: Optional[ChainStreams] = None,
             init: Optional[PhaseState] = None, record_velocities: bool = False) -> ChainRecord:
    """Flow for T_k ~ Exp(mean lam) (or exactly lam), then refresh with eta."""
    if spec.variant is not Variant.RHMC:
        raise ParameterError(f"run_rhmc needs an rhmc spec, got {spec.variant.value}")
    streams = _resolve_streams(spec, rng)

    def iteration(chain: _Chain) -> None:
        if spec.duration_law is DurationLaw.EXPONENTIAL:
            duration = streams.duration.exponential(spec.lam)
        else:
            duration = spec.lam
        chain.flow(duration)
        chain.refresh(spec.eta)
        chain.end_iteration()

    return _Chain(target, spec, streams, init, record_velocities).run(iteration)


def chebyshev_schedule(mu: float, L: float, K: int) -> np.ndarray:
    """Durations pi/(2 sqrt(r_k)) for the K Chebyshev nodes r_k of [mu, L]."""
    if not 0 < mu <= L:
        raise ParameterError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    if int(K) < 1:
        raise ParameterError(f"schedule length must be positive, got {K}")
    k = np.arange(1, int(K) + 1)
    nodes = 0.5 * (L + mu) - 0.5 * (L - mu) * np.cos((k - 0.5) * np.pi / K)
    return np.pi / (2.0 * np.sqrt(nodes))


def run_chebyshev(target: Target, spec: SamplerSpec, rng: Optional[ChainStreams] = None,
                  init: Optional[PhaseState] = None, record_velocities: bool = False) -> ChainRecord:
    """Full refresh, then flow along a shuffled Chebyshev schedule.

    The schedule has length spec.cycle (default K) and is reshuffled at the
    start of every cycle. Only the last iterate carries the contraction
    guarantee; all positions are kept for diagnostics.
    """
    if spec.variant is not Variant.CHEBYSHEV:
        raise ParameterError(f"run_chebyshev needs a chebyshev spec, got {spec.variant.value}")
    streams = _resolve_streams(spec, rng)
    schedule = chebyshev_schedule(target.mu, target.spectrum.L, spec.cycle or spec.K)
    queue: List[float] = []

    def iteration(chain: _Chain) -> None:
        if not queue:
            queue.extend(schedule[streams.duration.permutation(schedule.size)])
        chain.refresh(0.0)
        chain.flow(queue.pop(0))
        chain.end_iteration()

    return _Chain(target, spec, streams, init, record_velocities).run(iteration)


def run_coordinate(target: Target, spec: SamplerSpec, rng: Optional[ChainStreams] = None,
                   init: Optional[PhaseState] = None, record_velocities: bool = False) -> ChainRecord:
    """Exponential race of per-coordinate clocks; a ring refreshes one velocity.

    One iteration is one event: flow for the waiting time, then refresh the
    velocity of the coordinate whose clock rang.
    """
    if spec.variant is not Variant.COORDINATE:
        raise ParameterError(f"run_coordinate needs a coordinate spec, got {spec.variant.value}")
    if not spec.exact:
        raise ParameterError("coordinate clocks run on the exact engine only")
    rates = np.asarray(spec.rates, dtype=float)
    if rates.size != target.d:
        raise ParameterError(f"expected {target.d} rates, got {rates.size}")
    streams = _resolve_streams(spec, rng)
    total = float(rates.sum())
    probs = rates / total
    c = math.sqrt(1.0 - spec.eta**2)

    def iteration(chain: _Chain) -> None:
        chain.flow(streams.duration.exponential(1.0 / total))
        i = streams.clock.choice(target.d, p=probs)
        z = streams.refresh.standard_normal(1)[0]
        v = chain.state.v.copy()
        v[i] = spec.eta * v[i] + c * z
        chain.state = chain.state.with_velocity(v)
        chain.end_iteration()

    return _Chain(target, spec, streams, init, record_velocities).run(iteration)


_RUNNERS = {
    Variant.DAMPED: run_damped,
    Variant.BASELINE: run_damped,
    Variant.RHMC: run_rhmc,
    Variant.CHEBYSHEV: run_chebyshev,
    Variant.COORDINATE: run_coordinate,
}


def run_chain(target: Target, spec: SamplerSpec, rng: Optional[ChainStreams] = None,
              init: Optional[PhaseState] = None, record_velocities: bool = False) -> ChainRecord:
    """Run the sampler named by spec.variant."""
    return _RUNNERS[spec.variant](target, spec, rng, init=init, record_velocities=record_velocities)


def run_chains(target: Target, spec: SamplerSpec, chains: int, workers: int = 1) -> List[ChainRecord]:
    """Independent chains with seeds spec.seed, spec.seed + 1, ...; order is by seed."""
    specs = [replace(spec, seed=spec.seed + c) for c in range(int(chains))]
    logger.debug(f"Running {len(specs)} {spec.variant.value} chains with {workers} workers")
    if workers <= 1:
        return [run_chain(target, s) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_chain(target, s), specs))


def optimal_params(variant, mu: float, L: float, eps: float = 1e-2,
                   sigma: Optional[Sequence[float]] = None) -> dict:
    """Parameters that achieve the accelerated rates for each variant."""
    variant = Variant(variant)
    if not mu > 0 or L < mu:
        raise ParameterError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    kappa = L / mu
    if variant is Variant.DAMPED:
        theta = math.pi / (1.0 + math.sqrt(kappa))
        # kappa = 1 makes the formula 0/0; no memory is needed there
        eta = 0.0 if math.isclose(kappa, 1.0) else (1.0 - math.sin(theta)) / math.cos(theta)
        return {'variant': variant.value, 'T': math.pi / (math.sqrt(L) + math.sqrt(mu)), 'eta': eta}
    if variant is Variant.BASELINE:
        return {'variant': variant.value, 'T': math.pi / (2.0 * math.sqrt(L)), 'eta': 0.0}
    if variant is Variant.RHMC:
        return {'variant': variant.value, 'lam': 1.0 / (2.0 * math.sqrt(mu)), 'eta': 0.0}
    if variant is Variant.CHEBYSHEV:
        if not 0 < eps < 1:
            raise ParameterError(f"eps must lie in (0, 1), got {eps}")
        cycle = math.ceil(math.sqrt(kappa) * math.log(1.0 / eps))
        # K is the schedule length; SamplerSpec holds it as cycle
        return {'variant': variant.value, 'K': cycle, 'cycle': cycle, 'eta': 0.0,
                'schedule': chebyshev_schedule(mu, L, cycle).tolist()}
    if sigma is None:
        raise ParameterError("coordinate rates need the eigenvalues")
    rates = np.asarray(sigma, dtype=float) / math.sqrt(mu)
    return {'variant': variant.value, 'rates': rates.tolist(), 'eta': 0.0}


def auto_spec(variant, spectrum: Spectrum, K: int, eps: float = 1e-2, seed: int = 0,
              **overrides) -> SamplerSpec:
    """SamplerSpec built from optimal_params for the given spectrum."""
    params = optimal_params(variant, spectrum.mu, spectrum.L, eps, sigma=spectrum.sigma)
    params.pop('schedule', None)
    params.pop('K', None)
    if 'rates' in params:
        params['rates'] = tuple(params['rates'])
    params.update(overrides)
    return SamplerSpec(K=K, seed=seed, **params)
