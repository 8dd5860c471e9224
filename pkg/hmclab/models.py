"""Targets, spectra and phase-space states."""

import enum
import logging
from dataclasses import dataclass
from typing import Any, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, ParameterError

logger = logging.getLogger(__name__)

# Relative slack when checking that eigenvalues sit inside their bounds
_BOUND_TOL = 1e-12


class Interval(NamedTuple):
    """Closed eigenvalue interval [mu, L]."""
    mu: float
    L: float

    @property
    def kappa(self) -> float:
        return self.L / self.mu

    def grid(self, points: int) -> np.ndarray:
        """Dense grid over the interval, endpoints included."""
        if self.mu == self.L or points < 2:
            return np.unique(np.array([self.mu, self.L], dtype=float))
        return np.linspace(self.mu, self.L, int(points))


class Spacing(str, enum.Enum):
    LINEAR = 'linear'
    LOG = 'log'


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues of a diagonal quadratic potential with their bounds."""
    sigma: np.ndarray
    mu: float
    L: float

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float).ravel()
        mu, L = float(self.mu), float(self.L)
        if sigma.size == 0:
            raise ParameterError("Spectrum needs at least one eigenvalue")
        if not mu > 0:
            raise ParameterError(f"mu must be positive, got {mu}")
        if L < mu:
            raise ParameterError(f"L must be at least mu, got mu={mu}, L={L}")
        if np.any(sigma < mu * (1 - _BOUND_TOL)) or np.any(sigma > L * (1 + _BOUND_TOL)):
            raise ParameterError(
                f"eigenvalues must lie in [{mu}, {L}], got range "
                f"[{sigma.min()}, {sigma.max()}]"
            )
        sigma.setflags(write=False)
        object.__setattr__(self, 'sigma', sigma)
        object.__setattr__(self, 'mu', mu)
        object.__setattr__(self, 'L', L)

    @classmethod
    def from_bounds(cls, d: int, mu: float, L: float, spacing: str = 'linear') -> 'Spectrum':
        """d eigenvalues spread over [mu, L], endpoints included."""
        d = int(d)
        if d < 1:
            raise ParameterError(f"dimension must be positive, got {d}")
        spacing = Spacing(spacing)
        if spacing is Spacing.LOG:
            if not mu > 0:
                raise ParameterError(f"mu must be positive, got {mu}")
            sigma = np.geomspace(mu, L, d)
        else:
            sigma = np.linspace(mu, L, d)
        # geomspace/linspace may round the endpoints
        sigma = np.clip(sigma, mu, L)
        return cls(sigma, mu, L)

    @classmethod
    def from_eigenvalues(cls, values: Sequence[float], mu: Optional[float] = None,
                         L: Optional[float] = None) -> 'Spectrum':
        """Spectrum from an explicit eigenvalue list; bounds default to its extremes."""
        sigma = np.asarray(values, dtype=float).ravel()
        if sigma.size == 0:
            raise ParameterError("Spectrum needs at least one eigenvalue")
        return cls(sigma,
                   float(sigma.min()) if mu is None else mu,
                   float(sigma.max()) if L is None else L)

    @classmethod
    def from_config(cls, spec: Mapping[str, Any]) -> 'Spectrum':
        """Build from {"eigenvalues": [...]} or {"d", "mu", "L", "spacing"}."""
        try:
            if 'eigenvalues' in spec:
                return cls.from_eigenvalues(spec['eigenvalues'], spec.get('mu'), spec.get('L'))
            return cls.from_bounds(spec['d'], spec['mu'], spec['L'], spec.get('spacing', 'linear'))
        except KeyError as e:
            logger.warning(f"Rejected target config without {e.args[0]!r}")
            raise ConfigError(f"target is missing key {e.args[0]!r}") from e
        except (TypeError, ValueError) as e:
            logger.warning(f"Rejected target config {dict(spec)!r}: {e}")
            raise ConfigError(f"invalid target config: {e}") from e

    @property
    def d(self) -> int:
        return int(self.sigma.size)

    @property
    def kappa(self) -> float:
        return self.L / self.mu

    @property
    def interval(self) -> Interval:
        return Interval(self.mu, self.L)

    def grid(self, points: int) -> np.ndarray:
        return self.interval.grid(points)

    @property
    def covariance(self) -> np.ndarray:
        """Diagonal of the target x-covariance, 1/sigma."""
        return 1.0 / self.sigma

    def to_dict(self) -> dict:
        return {'eigenvalues': self.sigma.tolist(), 'mu': self.mu, 'L': self.L}


class TargetKind(str, enum.Enum):
    QUADRATIC = 'quadratic'
    PERTURBED = 'perturbed-quadratic'


def _log_cosh(x):
    return np.logaddexp(x, -x) - np.log(2.0)


@dataclass(frozen=True, eq=False)
class Target:
    """Diagonal quadratic potential, optionally perturbed by eps * sum(log cosh x)."""
    spectrum: Spectrum
    kind: TargetKind = TargetKind.QUADRATIC
    eps: float = 0.0

    def __post_init__(self):
        kind = TargetKind(self.kind)
        eps = float(self.eps)
        if eps < 0:
            raise ParameterError(f"perturbation strength must be nonnegative, got {eps}")
        if kind is TargetKind.QUADRATIC and eps != 0:
            raise ParameterError("a quadratic target has eps = 0")
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'eps', eps)

    @classmethod
    def quadratic(cls, spectrum: Spectrum) -> 'Target':
        return cls(spectrum)

    @classmethod
    def perturbed(cls, spectrum: Spectrum, eps: float) -> 'Target':
        return cls(spectrum, TargetKind.PERTURBED, eps)

    @classmethod
    def from_config(cls, spec: Mapping[str, Any]) -> 'Target':
        spectrum = Spectrum.from_config(spec)
        try:
            return cls(spectrum, spec.get('kind', 'quadratic'), spec.get('eps', 0.0))
        except ValueError as e:
            raise ConfigError(f"invalid target config: {e}") from e

    @property
    def d(self) -> int:
        return self.spectrum.d

    @property
    def sigma(self) -> np.ndarray:
        return self.spectrum.sigma

    @property
    def mu(self) -> float:
        return self.spectrum.mu

    @property
    def smoothness(self) -> float:
        """Upper curvature bound, L + eps."""
        return self.spectrum.L + self.eps

    @property
    def is_quadratic(self) -> bool:
        return self.kind is TargetKind.QUADRATIC

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.d:
            raise DimensionError(f"expected trailing dimension {self.d}, got shape {x.shape}")
        return x

    def potential(self, x) -> np.ndarray:
        x = self._check(x)
        value = 0.5 * np.sum(self.sigma * x**2, axis=-1)
        if self.eps:
            value = value + self.eps * np.sum(_log_cosh(x), axis=-1)
        return value

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        grad = self.sigma * x
        if self.eps:
            grad = grad + self.eps * np.tanh(x)
        return grad

    def hessian_diagonal(self, x) -> np.ndarray:
        x = self._check(x)
        diag = np.broadcast_to(self.sigma, x.shape).copy()
        if self.eps:
            diag += self.eps / np.cosh(x)**2
        return diag

    def sample_stationary(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n exact draws from the x-marginal of a quadratic target."""
        if not self.is_quadratic:
            raise ParameterError("exact stationary draws need a quadratic target")
        return rng.standard_normal((int(n), self.d)) / np.sqrt(self.sigma)

    def to_dict(self) -> dict:
        data = self.spectrum.to_dict()
        data.update({'kind': self.kind.value, 'eps': self.eps})
        return data


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Position/velocity pair; leading axes index independent copies."""
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape:
            raise DimensionError(f"position shape {x.shape} and velocity shape {v.shape} differ")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'v', v)

    @property
    def d(self) -> int:
        return int(self.x.shape[-1])

    def flipped(self) -> 'PhaseState':
        return PhaseState(self.x, -self.v)

    def with_velocity(self, v) -> 'PhaseState':
        return PhaseState(self.x, v)


def gradient(target, x) -> np.ndarray:
    """Gradient of the potential at x."""
    return target.gradient(x)


def energy(target, state: PhaseState) -> float:
    """Hamiltonian f(x) + |v|^2 / 2."""
    return target.potential(state.x) + 0.5 * np.sum(state.v**2, axis=-1)
