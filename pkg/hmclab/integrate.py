"""Numerical integrators for the Hamiltonian ODE.

Step functions operate on PhaseState objects whose leading axes may index
independent copies. The randomized kinds (smc, nested-smc, sym-smc) take the
evaluation offset tau explicitly or draw it from the caller's generator.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate as quadrature

from .errors import ParameterError, StabilityError
from .models import PhaseState, Spectrum, Target, gradient

logger = logging.getLogger(__name__)


class IntegratorKind(str, enum.Enum):
    VELOCITY_VERLET = 'velocity-verlet'
    POSITION_VERLET = 'position-verlet'
    SMC = 'smc'
    NESTED_SMC = 'nested-smc'
    SYM_SMC = 'sym-smc'

    @property
    def randomized(self) -> bool:
        return self in (IntegratorKind.SMC, IntegratorKind.NESTED_SMC, IntegratorKind.SYM_SMC)

    @property
    def verlet(self) -> bool:
        return self in (IntegratorKind.VELOCITY_VERLET, IntegratorKind.POSITION_VERLET)


# Fresh gradient evaluations per step; velocity Verlet reuses the last kick
GRADIENTS_PER_STEP = {
    IntegratorKind.VELOCITY_VERLET: 1,
    IntegratorKind.POSITION_VERLET: 1,
    IntegratorKind.SMC: 1,
    IntegratorKind.NESTED_SMC: 3,
    IntegratorKind.SYM_SMC: 2,
}


def _check_h(h: float) -> None:
    if not h > 0:
        raise ParameterError(f"stepsize must be positive, got {h}")


def _resolve_tau(state: PhaseState, h: float, tau, rng: Optional[np.random.Generator]):
    """Validated tau, drawn per copy from Unif(0, h) when not supplied."""
    if tau is None:
        if rng is None:
            raise ParameterError("randomized integrators need tau or a random generator")
        return rng.uniform(0.0, h, size=state.x.shape[:-1] + (1,))
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(tau > h):
        raise ParameterError(f"tau must lie in [0, {h}], got {tau}")
    if tau.ndim and tau.shape[-1] != 1:
        tau = tau[..., np.newaxis]
    return tau


def position_verlet_step(target, state: PhaseState, h: float) -> PhaseState:
    """Drift-kick-drift leapfrog."""
    _check_h(h)
    x_half = state.x + 0.5 * h * state.v
    v1 = state.v - h * gradient(target, x_half)
    return PhaseState(x_half + 0.5 * h * v1, v1)


def velocity_verlet_step(target, state: PhaseState, h: float) -> PhaseState:
    """Kick-drift-kick leapfrog."""
    _check_h(h)
    v_half = state.v - 0.5 * h * gradient(target, state.x)
    x1 = state.x + h * v_half
    return PhaseState(x1, v_half - 0.5 * h * gradient(target, x1))


def smc_step(target, state: PhaseState, h: float, tau=None,
             rng: Optional[np.random.Generator] = None) -> PhaseState:
    """Stratified Monte Carlo step with the force evaluated at x0 + tau v0."""
    _check_h(h)
    tau = _resolve_tau(state, h, tau, rng)
    force = gradient(target, state.x + tau * state.v)
    x1 = state.x + h * state.v - 0.5 * h**2 * force
    return PhaseState(x1, state.v - h * force)


def nested_smc_step(target, state: PhaseState, h: float, tau=None,
                    rng: Optional[np.random.Generator] = None) -> PhaseState:
    """sMC with the midpoint position refined by two nested Taylor updates."""
    _check_h(h)
    tau = _resolve_tau(state, h, tau, rng)
    x0, v0 = state.x, state.v
    x_tau = x0 + tau * v0 - 0.5 * tau**2 * gradient(target, x0)
    x_tau = x0 + tau * v0 - 0.5 * tau**2 * gradient(target, x_tau)
    force = gradient(target, x_tau)
    x1 = x0 + h * v0 - h * (h - tau) * force
    return PhaseState(x1, v0 - h * force)


def sym_smc_step(target, state: PhaseState, h: float, tau=None,
                 rng: Optional[np.random.Generator] = None) -> PhaseState:
    """Symmetrized sMC: half kicks at x0 + tau v0 and x1 - tau v_half.

    With tau = 0 this is velocity Verlet. The second kick's evaluation point
    is the mirror of the first under time reversal, which reproduces the
    quadratic propagator and extends it to general potentials.
    """
    _check_h(h)
    tau = _resolve_tau(state, h, tau, rng)
    v_half = state.v - 0.5 * h * gradient(target, state.x + tau * state.v)
    x1 = state.x + h * v_half
    return PhaseState(x1, v_half - 0.5 * h * gradient(target, x1 - tau * v_half))


_DETERMINISTIC: Dict[IntegratorKind, Callable] = {
    IntegratorKind.VELOCITY_VERLET: velocity_verlet_step,
    IntegratorKind.POSITION_VERLET: position_verlet_step,
}
_RANDOMIZED: Dict[IntegratorKind, Callable] = {
    IntegratorKind.SMC: smc_step,
    IntegratorKind.NESTED_SMC: nested_smc_step,
    IntegratorKind.SYM_SMC: sym_smc_step,
}


def step(kind, target, state: PhaseState, h: float, tau=None,
         rng: Optional[np.random.Generator] = None) -> PhaseState:
    """Dispatch one step of the given integrator kind."""
    kind = IntegratorKind(kind)
    if kind.randomized:
        return _RANDOMIZED[kind](target, state, h, tau=tau, rng=rng)
    return _DETERMINISTIC[kind](target, state, h)


@dataclass(frozen=True)
class IntegratorSpec:
    """Integrator kind, stepsize and step count, with an optional curvature bound.

    When L is given the Verlet kinds require h * sqrt(L) < 2.
    """
    kind: IntegratorKind
    h: float
    steps: int = 1
    L: Optional[float] = None

    def __post_init__(self):
        kind = IntegratorKind(self.kind)
        object.__setattr__(self, 'kind', kind)
        _check_h(self.h)
        if int(self.steps) < 1:
            raise ParameterError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, 'steps', int(self.steps))
        if self.L is not None:
            self.check_stable(self.L)

    @classmethod
    def for_target(cls, kind, h: float, target: Target, steps: int = 1) -> 'IntegratorSpec':
        return cls(kind, h, steps, target.smoothness)

    def check_stable(self, L: float) -> None:
        if self.kind.verlet and self.h * math.sqrt(L) >= 2:
            raise StabilityError(
                f"{self.kind.value} with h={self.h} is unstable for L={L} (h*sqrt(L) >= 2)"
            )

    def run(self, target, state: PhaseState, rng: Optional[np.random.Generator] = None) -> PhaseState:
        """Apply `steps` steps of size h."""
        for _ in range(self.steps):
            state = step(self.kind, target, state, self.h, rng=rng)
        return state

    def integrate(self, target, state: PhaseState, duration: float,
                  rng: Optional[np.random.Generator] = None) -> PhaseState:
        """Cover `duration` with the fewest equal steps no longer than h."""
        if duration < 0:
            raise ParameterError(f"duration must be nonnegative, got {duration}")
        n = math.ceil(duration / self.h)
        if n == 0:
            return state
        sub = duration / n
        for _ in range(n):
            state = step(self.kind, target, state, sub, rng=rng)
        return state

    def to_dict(self) -> dict:
        return {'kind': self.kind.value, 'h': self.h, 'steps': self.steps, 'L': self.L}


@dataclass(frozen=True, eq=False)
class Trajectory:
    positions: np.ndarray
    velocities: np.ndarray
    forces: np.ndarray  # gradient at each step's evaluation point


def trajectory(kind, target, state: PhaseState, h: float, steps: int, tau=None,
               rng: Optional[np.random.Generator] = None) -> Trajectory:
    """Record a velocity-Verlet or sMC trajectory with its force evaluations."""
    kind = IntegratorKind(kind)
    if kind not in (IntegratorKind.VELOCITY_VERLET, IntegratorKind.SMC):
        raise ParameterError(f"trajectories are recorded for velocity-verlet and smc, got {kind.value}")
    positions, velocities, forces = [state.x], [state.v], []
    for _ in range(int(steps)):
        if kind is IntegratorKind.SMC:
            offset = _resolve_tau(state, h, tau, rng)
            forces.append(gradient(target, state.x + offset * state.v))
            state = smc_step(target, state, h, tau=offset)
        else:
            forces.append(gradient(target, state.x))
            state = velocity_verlet_step(target, state, h)
        positions.append(state.x)
        velocities.append(state.v)
    return Trajectory(np.array(positions), np.array(velocities), np.array(forces))


def modified_spectrum(sigma, h: float):
    """Curvature of the shadow quadratic Hamiltonian conserved by velocity Verlet."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(h**2 * sigma >= 4):
        raise StabilityError(f"h^2 * sigma must be below 4, got h={h}, max sigma={sigma.max()}")
    result = sigma * (1.0 - h**2 * sigma / 4.0)
    return float(result) if result.ndim == 0 else result


def shadow_energy(target: Target, state: PhaseState, h: float,
                  kind=IntegratorKind.VELOCITY_VERLET):
    """Quadratic form exactly conserved by a Verlet kind on a quadratic target."""
    kind = IntegratorKind(kind)
    if not target.is_quadratic:
        raise ParameterError("shadow energies are defined for quadratic targets")
    sigma = target.sigma
    modified = modified_spectrum(sigma, h)
    if kind is IntegratorKind.VELOCITY_VERLET:
        weights = modified
    elif kind is IntegratorKind.POSITION_VERLET:
        weights = sigma**2 / modified
    else:
        raise ParameterError(f"no closed-form shadow energy for {kind.value}")
    return 0.5 * np.sum(weights * state.x**2, axis=-1) + 0.5 * np.sum(state.v**2, axis=-1)


def energy_gap(target: Target, state: PhaseState, h: float):
    """H - H~ for velocity Verlet, equal to (h^2/8) sum(sigma^2 x^2)."""
    return (0.5 * np.sum(target.sigma * state.x**2, axis=-1)
            - 0.5 * np.sum(modified_spectrum(target.sigma, h) * state.x**2, axis=-1))


def leapfrog_stepsize(L: float, d: int, eps: float) -> float:
    """Stepsize sqrt(eps)/(L d)^(1/4) targeting asymptotic W2 bias eps."""
    if not 0 < eps < math.sqrt(d / L):
        raise ParameterError(
            f"bias target eps={eps} is unachievable for L={L}, d={d} (need 0 < eps < {math.sqrt(d / L):.6g})"
        )
    return math.sqrt(eps) / (L * d) ** 0.25


def asymptotic_bias(L: float, d: int, h: float) -> float:
    """W2 bias of unadjusted position Verlet with full refresh, sqrt(d)(1/sqrt(L) - sqrt(1/L - h^2/4))."""
    if h**2 * L >= 4:
        raise StabilityError(f"h^2 * L must be below 4, got h={h}, L={L}")
    return math.sqrt(d) * (1.0 / math.sqrt(L) - math.sqrt(1.0 / L - h**2 / 4.0))


def gradient_evaluations(total_time: float, h: float, kind=IntegratorKind.VELOCITY_VERLET) -> int:
    """Gradient evaluations needed to integrate for total_time."""
    return math.ceil(total_time / h) * GRADIENTS_PER_STEP[IntegratorKind(kind)]


def _oscillator(sigma: float) -> Target:
    return Target(Spectrum(np.array([sigma]), sigma, sigma))


def propagator(kind, sigma: float, h: float, tau: Optional[float] = None) -> np.ndarray:
    """2x2 matrix of one step on the 1-D quadratic with curvature sigma."""
    kind = IntegratorKind(kind)
    basis = PhaseState(np.array([[1.0], [0.0]]), np.array([[0.0], [1.0]]))
    if kind.randomized:
        if tau is None:
            raise ParameterError(f"{kind.value} propagator needs tau")
        out = step(kind, _oscillator(sigma), basis, h, tau=np.full((2, 1), tau))
    else:
        out = step(kind, _oscillator(sigma), basis, h)
    return np.array([[out.x[0, 0], out.x[1, 0]], [out.v[0, 0], out.v[1, 0]]])


def _tau_average(kind: IntegratorKind, h: float, fn: Callable[[float], float]) -> float:
    if not kind.randomized:
        return fn(0.0)
    value, _ = quadrature.quad(fn, 0.0, h, epsabs=1e-15, epsrel=1e-13, limit=200)
    return value / h


def expected_variance(kind, sigma: float, h: float) -> float:
    """E_tau Var(x1) after one step from the stationary law N(0, 1/sigma) x N(0, 1)."""
    kind = IntegratorKind(kind)

    def variance(tau):
        M = propagator(kind, sigma, h, tau if kind.randomized else None)
        return M[0, 0]**2 / sigma + M[0, 1]**2

    return _tau_average(kind, h, variance)


def stationary_variance(kind, sigma: float, h: float) -> float:
    """x-variance of the invariant law of one step followed by a full velocity refresh."""
    kind = IntegratorKind(kind)

    def entry(i):
        def fn(tau):
            M = propagator(kind, sigma, h, tau if kind.randomized else None)
            return M[0, i]**2
        return _tau_average(kind, h, fn)

    a2, b2 = entry(0), entry(1)
    if a2 >= 1:
        raise StabilityError(f"{kind.value} with h={h} has no invariant law for sigma={sigma}")
    return b2 / (1.0 - a2)


def one_step_bias(kind, sigma: float, h: float) -> float:
    """|sqrt(E Var x1) - 1/sqrt(sigma)| from a stationary start."""
    return abs(math.sqrt(expected_variance(kind, sigma, h)) - 1.0 / math.sqrt(sigma))


def stationary_bias(kind, sigma: float, h: float) -> float:
    """W2 distance between the chain's invariant law and the target, per coordinate."""
    return abs(math.sqrt(stationary_variance(kind, sigma, h)) - 1.0 / math.sqrt(sigma))


def fitted_order(h_grid, values) -> float:
    """Slope of log(values) against log(h)."""
    slope, _ = np.polyfit(np.log(np.asarray(h_grid, float)), np.log(np.asarray(values, float)), 1)
    return float(slope)
