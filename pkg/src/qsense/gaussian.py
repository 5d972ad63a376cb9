"""Covariance-matrix simulation of the SU(1,1) absorption experiment.

Conventions: hbar = 1, quadratures ordered ``(x1, p1, x2, p2, ...)`` with
``x = (a + a^dag)/sqrt(2)``, vacuum covariance ``I/2``. Transforms act on the
moments the way the matching unitaries in :mod:`qsense.fock` act on states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .errors import DomainError, InvalidInputError
from .fisher import DEFAULT_DIFF, DifferentiationConfig, error_propagation


def symplectic_form(modes):
    return linalg.block_diag(*[np.array([[0.0, 1.0], [-1.0, 0.0]])] * modes)


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1 or mean.size % 2 or cov.shape != (mean.size, mean.size):
            raise InvalidInputError("need a 2M mean vector and a 2M x 2M covariance")
        scale = max(1.0, np.max(np.abs(cov), initial=0.0))
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12 * scale:
            raise InvalidInputError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @property
    def modes(self):
        return self.mean.size // 2

    def symplectic_eigenvalues(self):
        """Moduli of the eigenvalues of ``i Omega sigma``, each listed once."""
        ev = np.abs(linalg.eigvals(1j * symplectic_form(self.modes) @ self.covariance))
        return np.sort(ev)[::2]

    def is_physical(self, tol=1e-10):
        return bool(np.all(self.symplectic_eigenvalues() >= 0.5 - tol))

    def mode_mean_photons(self, mode):
        i = 2 * mode
        block = self.covariance[i : i + 2, i : i + 2]
        d = self.mean[i : i + 2]
        return 0.5 * (np.trace(block) + d @ d) - 0.5


@dataclass(frozen=True)
class SymplecticTransform:
    matrix: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise InvalidInputError("symplectic matrix must be 2M x 2M")
        omega = symplectic_form(s.shape[0] // 2)
        if np.max(np.abs(s @ omega @ s.T - omega)) > 1e-10 * max(1.0, np.max(np.abs(s)) ** 2):
            raise InvalidInputError("matrix is not symplectic")
        object.__setattr__(self, "matrix", s)


def vacuum_state(modes) -> GaussianState:
    if modes < 1:
        raise InvalidInputError("need at least one mode")
    return GaussianState(np.zeros(2 * modes), 0.5 * np.eye(2 * modes))


def coherent_gaussian(alphas) -> GaussianState:
    """Product of coherent states with complex amplitudes ``alphas``."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=complex))
    mean = np.sqrt(2.0) * np.column_stack([alphas.real, alphas.imag]).ravel()
    return GaussianState(mean, 0.5 * np.eye(2 * alphas.size))


def two_mode_squeezer_transform(r, phi=0.0) -> SymplecticTransform:
    """Moment map of ``exp(xi a^dag b^dag - xi^* a b)``, ``xi = r e^{i phi}``.

    Heisenberg picture: ``a -> cosh(r) a + e^{i phi} sinh(r) b^dag``.
    """
    if not math.isfinite(r):
        raise InvalidInputError("squeezing must be finite")
    c, s = math.cosh(r), math.sinh(r)
    rot = np.array([[math.cos(phi), math.sin(phi)], [math.sin(phi), -math.cos(phi)]])
    eye = np.eye(2)
    return SymplecticTransform(np.block([[c * eye, s * rot], [s * rot, c * eye]]))


def beam_splitter_transform(transmissivity) -> SymplecticTransform:
    """Moment map of the mixer in :func:`qsense.fock.apply_beam_splitter`."""
    if not 0.0 <= transmissivity <= 1.0:
        raise DomainError(f"transmissivity {transmissivity!r} outside [0, 1]")
    c = math.sqrt(transmissivity)
    s = math.sqrt(1.0 - transmissivity)
    eye = np.eye(2)
    return SymplecticTransform(np.block([[c * eye, -s * eye], [s * eye, c * eye]]))


def apply_symplectic(state: GaussianState, s: SymplecticTransform) -> GaussianState:
    m = s.matrix
    if m.shape[0] != state.mean.size:
        raise InvalidInputError(
            f"transform acts on {m.shape[0] // 2} modes, state has {state.modes}"
        )
    return GaussianState(m @ state.mean, m @ state.covariance @ m.T)


def apply_loss_gaussian(state: GaussianState, gamma, mode=0) -> GaussianState:
    """Pure-loss channel: the target mode mixes with vacuum at transmissivity ``1 - gamma``."""
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma={gamma!r} outside [0, 1]")
    if not 0 <= mode < state.modes:
        raise InvalidInputError(f"mode {mode} invalid for a {state.modes}-mode state")
    scale = np.ones(2 * state.modes)
    scale[2 * mode : 2 * mode + 2] = math.sqrt(1.0 - gamma)
    cov = state.covariance * np.outer(scale, scale)
    cov[2 * mode : 2 * mode + 2, 2 * mode : 2 * mode + 2] += 0.5 * gamma * np.eye(2)
    return GaussianState(state.mean * scale, cov)


def photon_statistics_gaussian(state: GaussianState):
    """Mean and variance of the total photon number.

    With covariance ``sigma`` and mean ``d``:
    ``<N> = (tr sigma + |d|^2 - M) / 2`` and
    ``Var N = tr(sigma^2)/2 - M/4 + d^T sigma d``.
    """
    sigma, d, m = state.covariance, state.mean, state.modes
    mean = 0.5 * (np.trace(sigma) + d @ d - m)
    var = 0.5 * np.trace(sigma @ sigma) - 0.25 * m + d @ sigma @ d
    return float(mean), float(max(var, 0.0))


@dataclass(frozen=True)
class Su11Config:
    """SU(1,1) absorption setup.

    ``n_in`` is the mean photon number per mode after the first amplifier
    (``sinh^2 r``). Mode 0 is the probe arm that crosses the sample.
    """

    n_in: float
    gamma: float
    n_measurements: int = 1
    lossy_mode: int = 0

    def __post_init__(self):
        if not (self.n_in >= 0 and math.isfinite(self.n_in)):
            raise DomainError(f"n_in={self.n_in!r} must be finite and >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma={self.gamma!r} outside [0, 1]")
        if int(self.n_measurements) != self.n_measurements or self.n_measurements < 1:
            raise DomainError("n_measurements must be a positive integer")
        if self.lossy_mode not in (0, 1):
            raise InvalidInputError("lossy_mode must be 0 or 1")

    @property
    def r(self):
        return math.asinh(math.sqrt(self.n_in))


class Su11Output(NamedTuple):
    state: GaussianState
    mean: float
    sd: float


def su11_output_state(n_in, gamma, lossy_mode=0, phi=0.0) -> GaussianState:
    r = math.asinh(math.sqrt(n_in))
    state = apply_symplectic(vacuum_state(2), two_mode_squeezer_transform(r, phi))
    state = apply_loss_gaussian(state, gamma, lossy_mode)
    return apply_symplectic(state, two_mode_squeezer_transform(r, phi + math.pi))


def su11_pipeline(config: Su11Config) -> Su11Output:
    """Vacuum, squeeze, attenuate the probe arm, unsqueeze; count all output photons."""
    state = su11_output_state(config.n_in, config.gamma, config.lossy_mode)
    mean, var = photon_statistics_gaussian(state)
    return Su11Output(state, mean, math.sqrt(var))


def delta_gamma_eq8(config: Su11Config, cfg: DifferentiationConfig = DEFAULT_DIFF):
    """Error-propagation uncertainty of gamma from the output photon count.

    ``sd(N_out) / |d<N_out>/d gamma| / sqrt(n_measurements)``.
    """
    if not 0.0 < config.gamma < 1.0:
        raise DomainError("gamma must lie strictly inside (0, 1)")

    def stats_at(g):
        return photon_statistics_gaussian(su11_output_state(config.n_in, g, config.lossy_mode))

    single = error_propagation(
        lambda g: stats_at(g)[0],
        lambda g: math.sqrt(stats_at(g)[1]),
        config.gamma,
        cfg,
        domain=(0.0, 1.0),
    )
    return single / math.sqrt(config.n_measurements)
