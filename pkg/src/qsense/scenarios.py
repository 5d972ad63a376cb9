"""End-to-end phase and absorption estimation scenarios."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Iterable, Optional

import numpy as np
from scipy import stats

from . import fock
from .errors import DegenerateModelError, DomainError, InvalidInputError
from .fisher import ParametricModel, cramer_rao_bound, fisher_information
from .gaussian import Su11Config, delta_gamma_eq8

PROBES = ("coherent", "noon", "fock")
DEGENERATE_QFI = 1e-12


@dataclass(frozen=True)
class PhaseScenarioReport:
    probe: str
    mean_photons: float
    n_measurements: int
    qfi: float
    generator_sd: float
    delta_theta_bound: float
    limit_label: str


def build_phase_probe(probe, value):
    """Probe state and the number operator of the arm that carries the sample.

    ``value`` is the mean photon number for ``coherent`` and the photon number
    for ``noon`` and ``fock``.
    """
    if probe == "coherent":
        if value < 0:
            raise DomainError("mean photon number must be >= 0")
        state = fock.coherent_state(math.sqrt(value))
        return state, fock.number_operator(1, state.cutoff), float(value)
    if probe == "noon":
        n = _photon_count(value)
        state = fock.noon_state(n)
        return state, fock.number_operator(2, state.cutoff, mode=0), float(n)
    if probe == "fock":
        n = _photon_count(value, allow_zero=True)
        state = fock.fock_state(n, n)
        return state, fock.number_operator(1, state.cutoff), float(n)
    raise InvalidInputError(f"unknown probe {probe!r}; choose from {PROBES}")


def _photon_count(value, allow_zero=False):
    n = int(round(value))
    if n != value or n < (0 if allow_zero else 1):
        raise DomainError(f"photon number must be a {'non-negative' if allow_zero else 'positive'} integer, got {value!r}")
    return n


def run_mzi_phase(probe, value, n_measurements=1) -> PhaseScenarioReport:
    """Phase bound for a probe in the sample arm of a Mach-Zehnder interferometer."""
    state, generator, mean_photons = build_phase_probe(probe, value)
    qfi = fock.qfi_pure_variance(state, generator)
    try:
        bound = cramer_rao_bound(qfi, n_measurements).bound if qfi > DEGENERATE_QFI else None
    except DegenerateModelError:
        bound = None
    if bound is None:
        label, bound = "degenerate", math.inf
    else:
        label = "heisenberg" if probe == "noon" else "standard"
    return PhaseScenarioReport(
        probe=probe,
        mean_photons=mean_photons,
        n_measurements=int(n_measurements),
        qfi=qfi,
        generator_sd=math.sqrt(qfi) / 2.0,
        delta_theta_bound=bound,
        limit_label=label,
    )


@dataclass(frozen=True)
class LossBranchRecord:
    losses: tuple
    probability: float
    is_product: bool
    schmidt: tuple


@dataclass(frozen=True)
class NoonLossReport:
    n_photons: int
    gamma: float
    branches: tuple
    one_loss_branches: tuple
    one_loss_weight_gap: float
    one_loss_all_product: bool
    initial_entangled: bool

    @property
    def entanglement_destroyed(self):
        """Every one-photon-loss branch lost the initial entanglement."""
        return self.initial_entangled and bool(self.one_loss_branches) and self.one_loss_all_product


def run_noon_loss(n_photons, gamma) -> NoonLossReport:
    """Lose photons from both arms of a NOON state and inspect the branches."""
    n = _photon_count(n_photons)
    if not 0.0 <= gamma < 1.0:
        raise DomainError(f"gamma={gamma!r} outside [0, 1)")
    state = fock.noon_state(n)
    ensemble = fock.apply_loss(fock.apply_loss(state, gamma, 0), gamma, 1)
    records = []
    for b in ensemble.branches:
        product, coeffs = fock.product_state_check(b.state)
        records.append(
            LossBranchRecord(b.losses, float(b.probability), product, tuple(float(c) for c in coeffs[:2]))
        )
    one = tuple(r for r in records if sum(r.losses) == 1)
    weights = [r.probability for r in one]
    return NoonLossReport(
        n_photons=n,
        gamma=float(gamma),
        branches=tuple(records),
        one_loss_branches=one,
        one_loss_weight_gap=float(max(weights) - min(weights)) if weights else 0.0,
        one_loss_all_product=all(r.is_product for r in one),
        initial_entangled=not fock.product_state_check(state)[0],
    )


def lossy_coherent_counting_model(n_in, tail=1e-12) -> ParametricModel:
    """Photon counts of a coherent probe of mean ``n_in`` after loss gamma.

    Counts are Poisson with mean ``n_in (1 - gamma)``; outcomes run up to the
    point where the remaining tail mass is below ``tail``, plus one overflow bin.
    """
    kmax = int(stats.poisson.isf(tail, n_in)) + 1
    k = np.arange(kmax + 1)

    def probabilities(gamma):
        mu = n_in * (1.0 - gamma)
        return np.append(stats.poisson.pmf(k, mu), stats.poisson.sf(kmax, mu))

    def dprob(gamma):
        mu = n_in * (1.0 - gamma)
        p = stats.poisson.pmf(k, mu)
        d_mu = np.append(np.concatenate(([0.0], p[:-1])) - p, p[-1])
        return -n_in * d_mu

    return ParametricModel((0.0, 1.0), probabilities, dprob, None, "lossy-coherent")


def standard_limit_absorption(n_in, gamma, n_measurements=1):
    """Cramer-Rao bound on gamma for a coherent probe and photon counting."""
    if not n_in > 0:
        raise DomainError("n_in must be positive")
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie strictly inside (0, 1)")
    f = fisher_information(lossy_coherent_counting_model(n_in), gamma)
    return cramer_rao_bound(f, n_measurements).bound


def qfi_absorption_bound(n_in, gamma, n_measurements=1):
    """Bound from the Fock-state loss QFI ``n/(gamma (1-gamma))`` with ``n = n_in``."""
    return math.sqrt(gamma * (1.0 - gamma) / (n_measurements * n_in))


@dataclass(frozen=True)
class AbsorptionReport:
    n_in: float
    gamma: float
    n_measurements: int
    delta_gamma_eq8: float
    delta_gamma_qfi: float
    delta_gamma_standard: float
    adv_db_power: float
    adv_db_amplitude: float

    def as_row(self):
        return asdict(self)


def run_su11(config: Su11Config) -> AbsorptionReport:
    """Compare the SU(1,1) count-based precision with the QFI line and the standard limit.

    The advantage is reported as ``10 log10(ratio)`` (power) and
    ``20 log10(ratio)`` (amplitude), where ratio is the standard-limit
    uncertainty over the SU(1,1) one.
    """
    if not config.n_in > 0:
        raise DomainError("n_in must be positive")
    eq8 = delta_gamma_eq8(config)
    qfi = qfi_absorption_bound(config.n_in, config.gamma, config.n_measurements)
    standard = standard_limit_absorption(config.n_in, config.gamma, config.n_measurements)
    ratio = standard / eq8
    return AbsorptionReport(
        n_in=float(config.n_in),
        gamma=float(config.gamma),
        n_measurements=int(config.n_measurements),
        delta_gamma_eq8=eq8,
        delta_gamma_qfi=qfi,
        delta_gamma_standard=standard,
        adv_db_power=10.0 * math.log10(ratio),
        adv_db_amplitude=20.0 * math.log10(ratio),
    )


def default_grid(axis):
    if axis == "n_in":
        return list(np.logspace(-1, 2, 25))
    if axis == "gamma":
        return list(np.linspace(0.01, 0.99, 25))
    raise InvalidInputError(f"unknown sweep axis {axis!r}")


def sweep(axis, points: Optional[Iterable[float]], fixed: Su11Config, workers=1):
    """One :class:`AbsorptionReport` per point along ``n_in`` or ``gamma``, in input order."""
    axis = axis.replace("-", "_")
    if axis not in ("n_in", "gamma"):
        raise InvalidInputError(f"unknown sweep axis {axis!r}")
    pts = default_grid(axis) if points is None else [float(p) for p in points]
    configs = [replace(fixed, **{axis: p}) for p in pts]
    if workers > 1 and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_su11, configs))
    return [run_su11(c) for c in configs]
