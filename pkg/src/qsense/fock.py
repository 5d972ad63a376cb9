"""Truncated Fock-space simulation of one- and two-mode bosonic probes.

Amplitudes are stored as a dense tensor indexed by photon numbers, shape
``(cutoff + 1,)`` for one mode and ``(cutoff + 1, cutoff + 1)`` for two.
Flattened vectors and operator matrices use C order (mode 0 is the major
index). Mode indices are 0-based.

Conventions (fixed here and cross-checked against :mod:`qsense.gaussian`):

* phase shift ``U(theta) = exp(i theta n)`` on the chosen mode;
* beam splitter ``U = exp(theta (a b^dag - a^dag b))`` with
  ``cos(theta) = sqrt(transmissivity)``, so ``|1,0> -> cos|1,0> + sin|0,1>``;
* two-mode squeezer ``U = exp(xi a^dag b^dag - xi^* a b)``, ``xi = r e^{i phi}``;
* loss Kraus operators
  ``K_j = sum_n sqrt(C(n,j) gamma^j (1-gamma)^(n-j)) |n-j><n|``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import linalg, special

from .errors import (
    CapacityError,
    DomainError,
    InvalidFamilyError,
    InvalidInputError,
    TruncationError,
)
from .fisher import DifferentiationConfig, derivative, richardson

NORM_TOL = 1e-10
LEAKAGE_TOL = 1e-10
MAX_CUTOFF_SINGLE = 2000
MAX_CUTOFF_TWO = 150
MAX_DENSITY_DIM = 4096
SQUEEZER_TAIL = 1e-12

FOCK_DIFF = DifferentiationConfig(step=1e-4, richardson_levels=2)


@dataclass(frozen=True)
class FockState:
    """Pure state of one or two truncated bosonic modes.

    ``leakage`` accumulates the norm that operations pushed above the cutoff.
    """

    amplitudes: np.ndarray
    leakage: float = 0.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim not in (1, 2):
            raise InvalidInputError("only one- and two-mode states are supported")
        if amps.ndim == 2 and amps.shape[0] != amps.shape[1]:
            raise InvalidInputError("both modes must share one cutoff")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidInputError(f"state norm^2 is {norm!r}, not 1")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def modes(self):
        return self.amplitudes.ndim

    @property
    def cutoff(self):
        return self.amplitudes.shape[0] - 1

    @property
    def dim(self):
        return self.amplitudes.size

    def vector(self):
        return self.amplitudes.ravel()


@dataclass(frozen=True)
class Branch:
    """One Kraus branch: probability, normalized state, photons lost per mode."""

    probability: float
    state: FockState
    losses: tuple


@dataclass(frozen=True)
class BranchEnsemble:
    branches: tuple

    def __post_init__(self):
        branches = tuple(self.branches)
        if not branches:
            raise InvalidInputError("empty ensemble")
        total = sum(b.probability for b in branches)
        if abs(total - 1.0) > NORM_TOL:
            raise InvalidInputError(f"branch probabilities sum to {total!r}")
        shape = branches[0].state.amplitudes.shape
        if any(b.state.amplitudes.shape != shape for b in branches):
            raise InvalidInputError("branches must share modes and cutoff")
        object.__setattr__(self, "branches", branches)

    @property
    def modes(self):
        return self.branches[0].state.modes

    @property
    def cutoff(self):
        return self.branches[0].state.cutoff

    @property
    def probabilities(self):
        return np.array([b.probability for b in self.branches])

    @classmethod
    def pure(cls, state: FockState):
        return cls((Branch(1.0, state, (0,) * state.modes),))


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidInputError("density matrix must be square")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise InvalidInputError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > NORM_TOL:
            raise InvalidInputError(f"trace is {np.trace(rho).real!r}")
        object.__setattr__(self, "matrix", rho)

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def eigenvalues(self):
        return linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class UnitaryFamily:
    """Parameter-dependent unitary ``x -> U(x)`` acting on Fock states.

    ``generator`` is the Hermitian ``G`` of ``U(x) = exp(i G x)`` when known.
    """

    apply: Callable[[float, FockState], FockState]
    modes: int
    cutoff: int
    generator: Optional[np.ndarray] = None

    def matrix(self, x):
        dim = (self.cutoff + 1) ** self.modes
        shape = (self.cutoff + 1,) * self.modes
        cols = []
        for k in range(dim):
            e = np.zeros(dim, dtype=complex)
            e[k] = 1.0
            cols.append(self.apply(x, FockState(e.reshape(shape))).vector())
        return np.stack(cols, axis=1)


Probe = Union[FockState, BranchEnsemble]


def _check_cutoff(cutoff, modes):
    limit = MAX_CUTOFF_SINGLE if modes == 1 else MAX_CUTOFF_TWO
    if cutoff > limit:
        raise CapacityError(f"cutoff {cutoff} exceeds the {modes}-mode limit {limit}")
    if cutoff < 0:
        raise InvalidInputError("cutoff must be non-negative")


def _check_mode(state, mode):
    if not 0 <= mode < state.modes:
        raise InvalidInputError(f"mode {mode} invalid for a {state.modes}-mode state")


def _normalized(amps):
    return amps / math.sqrt(np.vdot(amps, amps).real)


# --- constructors ----------------------------------------------------------


def fock_state(occupations: Sequence[int] | int, cutoff) -> FockState:
    """Basis state ``|n>`` or ``|n1, n2>``."""
    occ = (occupations,) if np.isscalar(occupations) else tuple(occupations)
    cutoff = max(cutoff, *occ)
    _check_cutoff(cutoff, len(occ))
    amps = np.zeros((cutoff + 1,) * len(occ), dtype=complex)
    amps[occ] = 1.0
    return FockState(amps)


def vacuum(modes=1, cutoff=0) -> FockState:
    return fock_state((0,) * modes, cutoff)


def coherent_safe_cutoff(alpha):
    a = abs(alpha)
    return int(math.ceil(a * a + 10 * a + 20))


def coherent_state(alpha, cutoff=0) -> FockState:
    """Truncated coherent state; the cutoff is raised to ``|a|^2 + 10|a| + 20``."""
    cutoff = max(int(cutoff), coherent_safe_cutoff(alpha))
    _check_cutoff(cutoff, 1)
    n = np.arange(cutoff + 1)
    if alpha == 0:
        amps = (n == 0).astype(complex)
    else:
        # log-space avoids overflow of alpha^n / sqrt(n!) at large n
        log_mag = n * math.log(abs(alpha)) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
        log_mag -= 0.5 * abs(alpha) ** 2
        amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    return FockState(_normalized(amps))


def noon_state(n_photons, cutoff=0) -> FockState:
    """``(|N,0> + |0,N>)/sqrt(2)``."""
    if n_photons < 1:
        raise InvalidInputError("NOON state needs N >= 1")
    cutoff = max(cutoff, n_photons)
    _check_cutoff(cutoff, 2)
    amps = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    amps[n_photons, 0] = amps[0, n_photons] = 1 / math.sqrt(2)
    return FockState(amps)


def product_state(first: FockState, second: FockState) -> FockState:
    if first.modes != 1 or second.modes != 1:
        raise InvalidInputError("product_state combines two single-mode states")
    c = max(first.cutoff, second.cutoff)
    a = np.zeros(c + 1, dtype=complex)
    b = np.zeros(c + 1, dtype=complex)
    a[: first.cutoff + 1] = first.amplitudes
    b[: second.cutoff + 1] = second.amplitudes
    return FockState(np.outer(a, b))


def random_state(modes, cutoff, rng: np.random.Generator, max_photons=None) -> FockState:
    """Haar-like random superposition, optionally restricted to low photon numbers."""
    shape = (cutoff + 1,) * modes
    amps = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    if max_photons is not None:
        total = sum(np.indices(shape))
        amps[total > max_photons] = 0.0
    return FockState(_normalized(amps))


def embed(state: FockState, cutoff) -> FockState:
    """Copy ``state`` into a larger truncation."""
    if cutoff < state.cutoff:
        raise InvalidInputError("embed can only raise the cutoff")
    _check_cutoff(cutoff, state.modes)
    amps = np.zeros((cutoff + 1,) * state.modes, dtype=complex)
    amps[tuple(slice(0, state.cutoff + 1) for _ in range(state.modes))] = state.amplitudes
    return FockState(amps, state.leakage)


# --- operators -------------------------------------------------------------


def number_operator(modes, cutoff, mode=None) -> np.ndarray:
    """Photon-number matrix on ``mode``, or total number when ``mode`` is None."""
    n = np.arange(cutoff + 1, dtype=float)
    grids = np.meshgrid(*([n] * modes), indexing="ij")
    diag = sum(grids) if mode is None else grids[mode]
    return np.diag(diag.ravel()).astype(complex)


def _lower(amps, axis):
    """Apply the annihilation operator on ``axis`` to an amplitude tensor."""
    amps = np.moveaxis(amps, axis, 0)
    out = np.zeros_like(amps)
    c = amps.shape[0] - 1
    factor = np.sqrt(np.arange(1, c + 1)).reshape((-1,) + (1,) * (amps.ndim - 1))
    out[:-1] = factor * amps[1:]
    return np.moveaxis(out, 0, axis)


def _raise(amps, axis):
    """Truncated creation operator (the top level is dropped)."""
    amps = np.moveaxis(amps, axis, 0)
    out = np.zeros_like(amps)
    c = amps.shape[0] - 1
    factor = np.sqrt(np.arange(1, c + 1)).reshape((-1,) + (1,) * (amps.ndim - 1))
    out[1:] = factor * amps[:-1]
    return np.moveaxis(out, 0, axis)


# --- unitaries -------------------------------------------------------------


def apply_phase_shift(state: FockState, theta, mode=0) -> FockState:
    """Multiply the amplitude of each ``|...n...>`` by ``exp(i theta n)``."""
    _check_mode(state, mode)
    n = np.arange(state.cutoff + 1)
    shape = [1] * state.modes
    shape[mode] = -1
    phase = np.exp(1j * theta * n).reshape(shape)
    return FockState(state.amplitudes * phase, state.leakage)


def apply_beam_splitter(state: FockState, transmissivity, max_leakage=LEAKAGE_TOL) -> FockState:
    """Two-mode mixer with ``cos(theta) = sqrt(transmissivity)``.

    Total photon number is conserved, so blocks of fixed total are evolved
    exactly; only blocks whose total exceeds the cutoff can leak.
    """
    if state.modes != 2:
        raise InvalidInputError("beam splitter needs a two-mode state")
    if not 0.0 <= transmissivity <= 1.0:
        raise DomainError(f"transmissivity {transmissivity!r} outside [0, 1]")
    c = state.cutoff
    out = np.zeros_like(state.amplitudes)
    lost = 0.0
    for (n1, n2), u_full in _beam_splitter_blocks(float(transmissivity), c):
        evolved = u_full[:, n1] @ state.amplitudes[n1, n2]
        out[n1, n2] = evolved[n1]
        lost += np.vdot(evolved, evolved).real - np.vdot(evolved[n1], evolved[n1]).real
    if lost > max_leakage:
        raise TruncationError(f"beam splitter leaked {lost:.3e} above cutoff {c}")
    return FockState(_normalized(out), state.leakage + lost)


@functools.lru_cache(maxsize=64)
def _beam_splitter_blocks(transmissivity, cutoff):
    theta = math.acos(math.sqrt(transmissivity))
    blocks = []
    for total in range(2 * cutoff + 1):
        # K = theta (a b^dag - a^dag b) on |m, total - m>, indexed by m
        k = np.zeros((total + 1, total + 1))
        for m in range(total + 1):
            if m >= 1:
                k[m - 1, m] += theta * math.sqrt(m * (total - m + 1))
            if m < total:
                k[m + 1, m] -= theta * math.sqrt((m + 1) * (total - m))
        n1 = np.arange(max(0, total - cutoff), min(total, cutoff) + 1)
        blocks.append(((n1, total - n1), linalg.expm(k)))
    return blocks


def tmsv_safe_cutoff(r):
    """Smallest cutoff leaving two-mode squeezed vacuum tail mass below 1e-12."""
    t2 = math.tanh(abs(r)) ** 2
    if t2 == 0.0:
        return 0
    # tail above n is t2^(n+1)
    return max(0, int(math.ceil(math.log(SQUEEZER_TAIL) / math.log(t2))) - 1)


@functools.lru_cache(maxsize=32)
def _squeezer_blocks(r, phi, cutoff, pad):
    """Propagators of the squeezer restricted to each ``n1 - n2 = d`` chain.

    Each chain is padded by ``pad`` extra levels so that the mass an exact
    evolution would carry above the cutoff can be measured.
    """
    xi = r * np.exp(1j * phi)
    blocks = []
    for d in range(-cutoff, cutoff + 1):
        off1, off2 = max(d, 0), max(-d, 0)
        length = cutoff + 1 - abs(d)
        size = length + pad
        k = np.zeros((size, size), dtype=complex)
        for j in range(size - 1):
            coupling = math.sqrt((j + off1 + 1) * (j + off2 + 1))
            k[j + 1, j] = xi * coupling
            k[j, j + 1] = -np.conj(xi) * coupling
        u = linalg.expm(k)
        idx = (np.arange(length) + off1, np.arange(length) + off2)
        blocks.append((idx, u[:, :length], length))
    return blocks


def apply_two_mode_squeezer(state: FockState, r, phi=0.0, max_leakage=LEAKAGE_TOL) -> FockState:
    """Apply ``exp(xi a^dag b^dag - xi^* a b)`` with ``xi = r e^{i phi}``.

    The cutoff is first raised to :func:`tmsv_safe_cutoff`. Norm carried above
    the cutoff is dropped, added to ``leakage``, and the result renormalized;
    a :class:`TruncationError` is raised when it exceeds ``max_leakage``.
    """
    if state.modes != 2:
        raise InvalidInputError("two-mode squeezer needs a two-mode state")
    if r == 0:
        return state
    if state.cutoff < tmsv_safe_cutoff(r):
        state = embed(state, tmsv_safe_cutoff(r))
    c = state.cutoff
    pad = max(20, c)
    out = np.zeros_like(state.amplitudes)
    lost = 0.0
    for idx, u, length in _squeezer_blocks(float(r), float(phi), c, pad):
        evolved = u @ state.amplitudes[idx]
        out[idx] = evolved[:length]
        lost += np.vdot(evolved[length:], evolved[length:]).real
    if lost > max_leakage:
        raise TruncationError(
            f"squeezer leaked {lost:.3e} above cutoff {c}; raise the cutoff",
            required_cutoff=c + pad,
        )
    return FockState(_normalized(out), state.leakage + lost)


# --- loss ------------------------------------------------------------------

MIN_BRANCH_PROBABILITY = 1e-300


def _binomial_amplitudes(j, n, gamma):
    """``sqrt(C(n, j) gamma^j (1 - gamma)^(n - j))`` evaluated in log space."""
    log_p = (
        special.gammaln(n + 1) - special.gammaln(j + 1) - special.gammaln(n - j + 1)
        + special.xlogy(j, gamma) + special.xlog1py(n - j, -gamma)
    )
    return np.exp(0.5 * log_p)


def _loss_branches(state: FockState, gamma, mode):
    c = state.cutoff
    n = np.arange(c + 1)
    amps = np.moveaxis(state.amplitudes, mode, 0)
    for j in range(c + 1):
        coeff = _binomial_amplitudes(j, n[j:], gamma)
        coeff = coeff.reshape((-1,) + (1,) * (amps.ndim - 1))
        out = np.zeros_like(amps)
        out[: c + 1 - j] = coeff * amps[j:]
        p = np.vdot(out, out).real
        if p < MIN_BRANCH_PROBABILITY:
            continue
        yield j, p, np.moveaxis(out / math.sqrt(p), 0, mode)


def apply_loss(probe: Probe, gamma, mode=0) -> BranchEnsemble:
    """Photon loss with absorption ``gamma`` on ``mode``, as Kraus branches.

    Each branch records how many photons it removed from each mode.
    Branches with probability below 1e-300 are dropped.
    """
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"gamma={gamma!r} outside [0, 1]")
    ensemble = probe if isinstance(probe, BranchEnsemble) else BranchEnsemble.pure(probe)
    _check_mode(ensemble.branches[0].state, mode)
    branches = []
    for parent in ensemble.branches:
        for j, p, amps in _loss_branches(parent.state, gamma, mode):
            losses = list(parent.losses)
            losses[mode] += j
            branches.append(
                Branch(parent.probability * p, FockState(amps, parent.state.leakage), tuple(losses))
            )
    total = sum(b.probability for b in branches)
    branches = [Branch(b.probability / total, b.state, b.losses) for b in branches]
    return BranchEnsemble(tuple(branches))


def map_branches(ensemble: BranchEnsemble, op, max_leakage=LEAKAGE_TOL) -> BranchEnsemble:
    """Apply a state map to every branch, bounding probability-weighted leakage.

    ``op(state, max_leakage)`` must return the mapped state with its
    ``leakage`` updated.
    """
    mapped = []
    weighted = 0.0
    for b in ensemble.branches:
        new = op(b.state, math.inf)
        weighted += b.probability * (new.leakage - b.state.leakage)
        mapped.append(Branch(b.probability, new, b.losses))
    if weighted > max_leakage:
        raise TruncationError(f"ensemble leaked {weighted:.3e} above the cutoff")
    return BranchEnsemble(tuple(mapped))


def _as_ensemble(probe: Probe) -> BranchEnsemble:
    return probe if isinstance(probe, BranchEnsemble) else BranchEnsemble.pure(probe)


# --- statistics ------------------------------------------------------------


def number_statistics(probe: Probe):
    """Mean and variance of the total photon number, ensemble-weighted."""
    ens = _as_ensemble(probe)
    shape = ens.branches[0].state.amplitudes.shape
    total = sum(np.indices(shape)).astype(float)
    m1 = m2 = 0.0
    for b in ens.branches:
        pn = np.abs(b.state.amplitudes) ** 2
        m1 += b.probability * np.sum(pn * total)
        m2 += b.probability * np.sum(pn * total**2)
    return float(m1), float(max(m2 - m1 * m1, 0.0))


def mode_mean_photons(probe: Probe, mode=0):
    ens = _as_ensemble(probe)
    out = 0.0
    for b in ens.branches:
        _check_mode(b.state, mode)
        n = np.indices(b.state.amplitudes.shape)[mode]
        out += b.probability * np.sum(n * np.abs(b.state.amplitudes) ** 2)
    return float(out)


def quadrature_moments(probe: Probe):
    """Mean vector and covariance of ``(x1, p1, x2, p2, ...)``, vacuum covariance I/2.

    ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``; the
    covariance is the symmetrized second moment minus the product of means.
    """
    ens = _as_ensemble(probe)
    modes = ens.modes
    dim = 2 * modes
    first = np.zeros(dim)
    second = np.zeros((dim, dim))
    for b in ens.branches:
        psi = b.state.amplitudes
        vecs = []
        for m in range(modes):
            lo, hi = _lower(psi, m), _raise(psi, m)
            vecs.append((lo + hi) / math.sqrt(2))
            vecs.append((lo - hi) / (1j * math.sqrt(2)))
        flat = [v.ravel() for v in vecs]
        mean = np.array([np.vdot(psi.ravel(), v).real for v in flat])
        gram = np.array([[np.vdot(u, v) for v in flat] for u in flat])
        first += b.probability * mean
        second += b.probability * gram.real
    return first, second - np.outer(first, first)


# --- Schmidt / density matrices -------------------------------------------


def product_state_check(state: FockState, tol=1e-10):
    """Schmidt decomposition across the two modes.

    Returns ``(is_product, coefficients)`` with coefficients sorted
    descending; the state is a product iff the second one is <= ``tol``.
    """
    if state.modes != 2:
        raise InvalidInputError("Schmidt decomposition needs a two-mode state")
    coeffs = linalg.svdvals(state.amplitudes)
    second = coeffs[1] if coeffs.size > 1 else 0.0
    return bool(second <= tol), coeffs


def ensemble_to_density(probe: Probe) -> DensityMatrix:
    ens = _as_ensemble(probe)
    dim = ens.branches[0].state.dim
    if dim > MAX_DENSITY_DIM:
        raise CapacityError(f"density matrix dimension {dim} exceeds {MAX_DENSITY_DIM}")
    rho = np.zeros((dim, dim), dtype=complex)
    for b in ens.branches:
        v = b.state.vector()
        rho += b.probability * np.outer(v, v.conj())
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho / np.trace(rho).real)


# --- unitary families and QFI ---------------------------------------------


def phase_family(modes, cutoff, mode=0) -> UnitaryFamily:
    return UnitaryFamily(
        apply=lambda x, s: apply_phase_shift(s, x, mode),
        modes=modes,
        cutoff=cutoff,
        generator=number_operator(modes, cutoff, mode),
    )


def hamiltonian_family(generator, modes, cutoff, declare_generator=True) -> UnitaryFamily:
    """``U(x) = exp(i G x)`` for a Hermitian matrix ``G``."""
    g = np.asarray(generator, dtype=complex)
    _require_hermitian(g)
    w, v = linalg.eigh(g)
    shape = (cutoff + 1,) * modes

    def apply(x, state):
        u = (v * np.exp(1j * w * x)) @ v.conj().T
        return FockState((u @ state.vector()).reshape(shape), state.leakage)

    return UnitaryFamily(apply, modes, cutoff, g if declare_generator else None)


def _require_hermitian(op, tol=1e-8):
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise InvalidInputError("operator must be a square matrix")
    if np.max(np.abs(op - op.conj().T), initial=0.0) > tol:
        raise InvalidInputError("operator is not Hermitian")


def generator_of(family: UnitaryFamily, x, cfg: DifferentiationConfig = FOCK_DIFF):
    """Hermitian generator ``O(x) = -i (dU/dx) U^dag`` of the family at ``x``.

    With this sign ``U(x) = exp(i G x)`` gives ``O = G``. A declared
    generator is returned directly; otherwise ``U`` is differentiated
    numerically.
    """
    if family.generator is not None:
        return np.asarray(family.generator, dtype=complex)
    u = family.matrix(x)
    dim = u.shape[0]
    drift = np.max(np.abs(u @ u.conj().T - np.eye(dim)))
    if drift > 1e-8:
        raise InvalidFamilyError(f"family is not unitary at x={x!r} (drift {drift:.2e})")
    du = derivative(family.matrix, x, cfg)
    op = -1j * du @ u.conj().T
    if np.max(np.abs(op - op.conj().T)) > 1e-8:
        raise InvalidFamilyError("numerical generator is not Hermitian")
    return 0.5 * (op + op.conj().T)


def qfi_pure_variance(state0: FockState, generator) -> float:
    """Pure-state QFI ``4 Var(G)`` in the initial state."""
    g = np.asarray(generator, dtype=complex)
    _require_hermitian(g)
    psi = state0.vector()
    if g.shape[0] != psi.size:
        raise InvalidInputError("generator dimension does not match the state")
    g_psi = g @ psi
    mean = np.vdot(psi, g_psi).real
    second = np.vdot(g_psi, g_psi).real
    return float(max(4.0 * (second - mean * mean), 0.0))


def _infidelity(a, b):
    # 1 - |<a|b>|^2 for unit vectors, as the squared norm of b's orthogonal part
    return np.vdot(b - a * np.vdot(a, b), b - a * np.vdot(a, b)).real


def qfi_pure_overlap(family: UnitaryFamily, state0: FockState, x, cfg: DifferentiationConfig = FOCK_DIFF):
    """QFI from the decay of ``|<psi(x)|psi(x+-h)>|^2`` with Richardson refinement."""
    psi = family.apply(x, state0).vector()
    for probe_x in (x - cfg.step_at(x), x + cfg.step_at(x)):
        shifted = family.apply(probe_x, state0).vector()
        if abs(np.vdot(shifted, shifted).real - 1.0) > 1e-10:
            raise InvalidFamilyError("family does not preserve the norm")

    def estimate(h):
        plus = family.apply(x + h, state0).vector()
        minus = family.apply(x - h, state0).vector()
        return 2.0 * (_infidelity(psi, plus) + _infidelity(psi, minus)) / (h * h)

    return float(richardson(estimate, cfg.step_at(x), cfg.richardson_levels))


def qfi_mixed_sld(rho_fn, x, cfg: DifferentiationConfig = DifferentiationConfig(), cutoff_eigen=1e-12):
    """Mixed-state QFI ``Tr(rho L^2)`` via the symmetric logarithmic derivative.

    In the eigenbasis of ``rho``,
    ``F = sum_{ij} 2 |<i|drho|j>|^2 / (l_i + l_j)`` over pairs with
    ``l_i + l_j`` above ``cutoff_eigen``.
    """

    def matrix(t):
        rho = rho_fn(t)
        return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)

    rho = matrix(x)
    if rho.shape[0] > MAX_DENSITY_DIM:
        raise CapacityError(f"dimension {rho.shape[0]} too large for the SLD oracle")
    drho = derivative(matrix, x, cfg)
    lam, vec = linalg.eigh(rho)
    d = vec.conj().T @ drho @ vec
    denom = lam[:, None] + lam[None, :]
    keep = denom > cutoff_eigen
    return float(np.sum(2.0 * np.abs(d[keep]) ** 2 / denom[keep]))


# --- composite simulation -------------------------------------------------


def su11_fock_ensemble(r, gamma, cutoff, lossy_mode=0, phi=0.0) -> BranchEnsemble:
    """Squeeze vacuum, attenuate one arm, then undo the squeezing, in Fock space."""
    state = apply_two_mode_squeezer(vacuum(2, cutoff), r, phi)
    lossy = apply_loss(state, gamma, lossy_mode)
    return map_branches(
        lossy, lambda s, tol: apply_two_mode_squeezer(s, r, phi + math.pi, max_leakage=tol)
    )
