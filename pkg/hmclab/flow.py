"""Exact Hamiltonian flow on quadratics and the per-coordinate damped-HMC blocks.

Every coordinate of a diagonal quadratic evolves independently, so the
d-dimensional transition of one damped-HMC iteration is a stack of 2x2
linear maps y -> A y + B G acting on y = (x_i, v_i).
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ParameterError
from .models import PhaseState

logger = logging.getLogger(__name__)

LinearMap = Tuple[np.ndarray, np.ndarray]


def _eigenvalues(spectrum) -> np.ndarray:
    """Accept a Spectrum, a Target or a raw eigenvalue array."""
    sigma = getattr(spectrum, 'sigma', spectrum)
    return np.asarray(sigma, dtype=float)


def rotate(sigma, x, v, t):
    """Rotate (x, v) in phase space for time t; t broadcasts against x."""
    omega = np.sqrt(sigma)
    c = np.cos(omega * t)
    s = np.sin(omega * t)
    return c * x + s * v / omega, -omega * s * x + c * v


def exact_flow(spectrum, state: PhaseState, t: float) -> PhaseState:
    """Flow of H(x, v) = sum(sigma x^2)/2 + |v|^2/2 for time t."""
    if np.any(np.asarray(t) < 0):
        raise ParameterError(f"flow time must be nonnegative, got {t}")
    x, v = rotate(_eigenvalues(spectrum), state.x, state.v, t)
    return PhaseState(x, v)


@dataclass(frozen=True, eq=False)
class TransitionBlock:
    """One damped-HMC iteration restricted to a coordinate: y+ = A y + B G."""
    A: np.ndarray
    B: np.ndarray
    sigma: float
    T: float
    eta: float

    @property
    def stationary_covariance(self) -> np.ndarray:
        return np.diag([1.0 / self.sigma, 1.0])

    @property
    def gram(self) -> np.ndarray:
        return self.A.T @ self.A

    def apply(self, y, g) -> np.ndarray:
        """Map stacked (..., 2) states with (..., 2) standard normals."""
        return np.asarray(y) @ self.A.T + np.asarray(g) @ self.B.T


def _check_eta(eta: float, upper_open: bool = True) -> None:
    if eta < 0 or eta > 1 or (upper_open and eta == 1):
        bound = '[0, 1)' if upper_open else '[0, 1]'
        raise ParameterError(f"eta must lie in {bound}, got {eta}")


def rotation_block(sigma: float, T: float) -> np.ndarray:
    """Matrix of the exact flow for time T on one coordinate."""
    omega = np.sqrt(sigma)
    c, s = np.cos(omega * T), np.sin(omega * T)
    return np.array([[c, s / omega], [-omega * s, c]])


def refresh_block(eta: float) -> LinearMap:
    """Half refresh v -> eta v + sqrt(1 - eta^2) z as a linear map."""
    _check_eta(eta, upper_open=False)
    return np.diag([1.0, eta]), np.array([[0.0], [np.sqrt(1.0 - eta**2)]])


def compose(*maps: LinearMap) -> LinearMap:
    """Compose affine-Gaussian maps, first argument applied first."""
    A, B = maps[0]
    for A_next, B_next in maps[1:]:
        A, B = A_next @ A, np.hstack([A_next @ B, B_next])
    return A, B


def transition_block(sigma: float, T: float, eta: float) -> TransitionBlock:
    """Refresh-half, flow for T, refresh-half, on a coordinate with curvature sigma."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if not T > 0:
        raise ParameterError(f"integration time must be positive, got {T}")
    _check_eta(eta)
    omega = np.sqrt(sigma)
    c, s = np.cos(omega * T), np.sin(omega * T)
    A = np.array([
        [c, eta * s / omega],
        [-eta * omega * s, eta**2 * c],
    ])
    B = np.sqrt(1.0 - eta**2) * np.array([
        [s / omega, 0.0],
        [eta * c, 1.0],
    ])
    return TransitionBlock(A, B, float(sigma), float(T), float(eta))


def propagate_moments(block: LinearMap, mean, cov) -> Tuple[np.ndarray, np.ndarray]:
    """Push a Gaussian law N(mean, cov) through y -> A y + B G."""
    A, B = block
    return A @ mean, A @ cov @ A.T + B @ B.T


def friction_rate(eta: float, T: float) -> float:
    """Friction gamma of the OU process whose time-T/2 refresh keeps a fraction eta."""
    _check_eta(eta, upper_open=False)
    if eta == 0:
        return float('inf')
    return 2.0 / T * np.log(1.0 / eta)


def eta_from_friction(gamma: float, T: float) -> float:
    """Inverse of friction_rate."""
    if gamma < 0:
        raise ParameterError(f"friction must be nonnegative, got {gamma}")
    return float(np.exp(-gamma * T / 2.0))
