"""Classical estimation theory on discrete outcome sets.

Distribution fidelity, Fisher information (analytic derivative or Richardson
extrapolated central differences), Cramer-Rao bounds and the error-propagation
precision formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .errors import (
    DegenerateModelError,
    DomainError,
    InsensitiveObservableError,
    InvalidInputError,
)

NORMALIZATION_TOL = 1e-12
RENORMALIZE_LIMIT = 1e-9
TINY_PROBABILITY = 1e-300
# derivatives this small next to an underflowed probability are tail noise
TINY_DERIVATIVE = 1e-150


@dataclass(frozen=True)
class ProbabilityDistribution:
    """Probabilities over an ordered, labelled outcome set.

    Use :meth:`from_probabilities` to build one; it enforces non-negativity
    and normalization. Float drift below ``RENORMALIZE_LIMIT`` is absorbed by
    renormalizing, and the size of the correction is kept in ``adjustment``.
    """

    labels: tuple
    probabilities: np.ndarray
    adjustment: float = 0.0

    @classmethod
    def from_probabilities(cls, probabilities, labels: Optional[Sequence] = None):
        p = np.asarray(probabilities, dtype=float).ravel()
        if labels is None:
            labels = tuple(range(p.size))
        else:
            labels = tuple(labels)
        if len(labels) != p.size:
            raise InvalidInputError(
                f"{len(labels)} labels given for {p.size} probabilities"
            )
        if p.size == 0:
            raise InvalidInputError("empty outcome set")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("probabilities must be finite")
        if np.any(p < -1e-15):
            raise InvalidInputError(f"negative probability {p.min():.3e}")
        p = np.clip(p, 0.0, None)
        total = p.sum()
        deviation = total - 1.0
        if abs(deviation) > RENORMALIZE_LIMIT:
            raise InvalidInputError(f"probabilities sum to {total!r}, not 1")
        if abs(deviation) > 0.0:
            p = p / total
        p.setflags(write=False)
        return cls(labels, p, float(deviation))

    def __len__(self):
        return self.probabilities.size


@dataclass(frozen=True)
class ParametricModel:
    """A family ``x -> P_k(x)`` on a fixed outcome set.

    ``probabilities`` maps x to the probability vector; ``derivative``, when
    known, maps x to ``dP_k/dx`` in the same outcome order. ``domain`` is the
    closed interval of admissible parameter values.
    """

    domain: tuple
    probabilities: Callable[[float], np.ndarray]
    derivative: Optional[Callable[[float], np.ndarray]] = None
    labels: Optional[tuple] = None
    name: str = "model"

    def check_domain(self, x):
        lo, hi = self.domain
        if not (lo <= x <= hi) or math.isnan(x):
            raise DomainError(f"x={x!r} outside {self.name} domain [{lo}, {hi}]")

    def evaluate(self, x) -> ProbabilityDistribution:
        self.check_domain(x)
        return ProbabilityDistribution.from_probabilities(
            self.probabilities(x), self.labels
        )


@dataclass(frozen=True)
class DifferentiationConfig:
    """Central differences refined by Richardson extrapolation.

    ``step=None`` selects ``max(1e-5, 1e-5*|x|)``.
    """

    step: Optional[float] = None
    richardson_levels: int = 2

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise InvalidInputError(f"step must be positive, got {self.step!r}")
        if self.richardson_levels < 0:
            raise InvalidInputError("richardson_levels must be >= 0")

    def step_at(self, x):
        if self.step is not None:
            return self.step
        return max(1e-5, 1e-5 * abs(x))


DEFAULT_DIFF = DifferentiationConfig()


def richardson(estimate: Callable[[float], object], h, levels):
    """Extrapolate ``estimate(h) = L + c1 h^2 + c2 h^4 + ...`` to ``h -> 0``.

    ``estimate`` may return arrays. The base estimates use ``h, h/2, h/4, ...``.
    """
    rows = []
    for i in range(levels + 1):
        row = [np.asarray(estimate(h / 2**i))]
        for k in range(1, i + 1):
            prev = row[k - 1]
            row.append(prev + (prev - rows[i - 1][k - 1]) / (4**k - 1))
        rows.append(row)
    return rows[-1][-1]


def derivative(f, x, cfg: DifferentiationConfig = DEFAULT_DIFF, domain=None):
    """First derivative of ``f`` at ``x``; works for array-valued ``f``.

    If ``domain`` is given, every abscissa used must stay inside it.
    """
    h = cfg.step_at(x)
    if domain is not None:
        lo, hi = domain
        if x - h < lo or x + h > hi:
            raise DomainError(
                f"difference stencil x={x!r} +/- {h:g} leaves domain [{lo}, {hi}]"
            )

    def central(step):
        return (np.asarray(f(x + step)) - np.asarray(f(x - step))) / (2.0 * step)

    return richardson(central, h, cfg.richardson_levels)


def classical_fidelity(p: ProbabilityDistribution, q: ProbabilityDistribution):
    """Squared Bhattacharyya overlap ``[sum_k sqrt(p_k q_k)]^2``."""
    if p.labels != q.labels:
        raise InvalidInputError("distributions are over different outcome sets")
    overlap = np.sum(np.sqrt(p.probabilities * q.probabilities))
    return float(min(1.0, overlap**2))


def fisher_information(model: ParametricModel, x, cfg: DifferentiationConfig = DEFAULT_DIFF):
    """Fisher information ``4 sum_k (d sqrt(P_k)/dx)^2`` of ``model`` at ``x``.

    With an analytic derivative the equivalent form ``(dP_k/dx)^2 / P_k`` is
    used; outcomes where both ``P_k`` and its derivative vanish (to underflow
    level) contribute 0, while a vanishing ``P_k`` with a finite slope gives inf.
    Without one, ``sqrt(P_k)`` is differentiated numerically per ``cfg``.
    """
    model.check_domain(x)
    if model.derivative is not None:
        p = model.evaluate(x).probabilities
        dp = np.asarray(model.derivative(x), dtype=float)
        if dp.shape != p.shape:
            raise InvalidInputError("derivative has wrong length")
        if abs(dp.sum()) > 1e-10:
            raise InvalidInputError(
                f"derivative sums to {dp.sum():.3e}; probabilities would not stay normalized"
            )
        support = p > TINY_PROBABILITY
        if np.any(np.abs(dp[~support]) > TINY_DERIVATIVE):
            return math.inf
        return float(np.sum(dp[support] ** 2 / p[support]))

    def amplitude(t):
        return np.sqrt(model.evaluate(t).probabilities)

    d_amp = derivative(amplitude, x, cfg, domain=model.domain)
    return float(4.0 * np.sum(d_amp**2))


def fidelity_expansion_check(model: ParametricModel, x, h, cfg: DifferentiationConfig = DEFAULT_DIFF):
    """Remainder ``|Phi(x, x+h) - (1 - F(x) h^2 / 4)|`` of the fidelity expansion."""
    model.check_domain(x + h)
    if h == 0:
        return 0.0
    phi = classical_fidelity(model.evaluate(x), model.evaluate(x + h))
    f = fisher_information(model, x, cfg)
    return abs(phi - (1.0 - f * h * h / 4.0))


@dataclass(frozen=True)
class PrecisionBound:
    fisher: float
    n_measurements: int
    bound: float


def cramer_rao_bound(fisher, n_measurements=1) -> PrecisionBound:
    """Lower bound ``1/sqrt(N F)`` on the standard deviation of unbiased estimators."""
    if int(n_measurements) != n_measurements or n_measurements < 1:
        raise InvalidInputError(f"n_measurements must be a positive integer, got {n_measurements!r}")
    if not fisher > 0:
        raise DegenerateModelError(
            f"Fisher information {fisher!r} gives no finite bound"
        )
    n = int(n_measurements)
    return PrecisionBound(float(fisher), n, 1.0 / math.sqrt(n * fisher))


def error_propagation(mean_fn, sd_fn, x, cfg: DifferentiationConfig = DEFAULT_DIFF, domain=None):
    """Precision ``sd(x) / |d mean / dx|`` of an estimate read off one observable."""
    slope = float(derivative(mean_fn, x, cfg, domain=domain))
    if abs(slope) < 1e-14:
        raise InsensitiveObservableError(
            f"observable mean has slope {slope:.3e} at x={x!r}"
        )
    return float(sd_fn(x)) / abs(slope)


# --- model factories -------------------------------------------------------


def bernoulli_model() -> ParametricModel:
    """Outcomes (0, 1) with ``P(1) = x`` on ``[0, 1]``."""
    return ParametricModel(
        domain=(0.0, 1.0),
        probabilities=lambda x: np.array([1.0 - x, x]),
        derivative=lambda x: np.array([-1.0, 1.0]),
        labels=(0, 1),
        name="bernoulli",
    )


def _poisson_tail_cut(mean, tail=1e-12):
    return int(stats.poisson.isf(tail, mean)) + 1


def poisson_model(kmax=None, domain=(1e-9, 50.0), analytic=True) -> ParametricModel:
    """Poisson counts ``0..kmax`` plus an overflow outcome ``'>kmax'``.

    By default ``kmax`` leaves less than 1e-12 of tail mass in the overflow
    bin at the top of ``domain``.
    """
    if kmax is None:
        kmax = _poisson_tail_cut(domain[1])
    k = np.arange(kmax + 1)

    def probabilities(mu):
        p = stats.poisson.pmf(k, mu)
        return np.append(p, stats.poisson.sf(kmax, mu))

    def dprob(mu):
        # dP_k/dmu = P_{k-1} - P_k; the overflow bin gets P_kmax
        p = stats.poisson.pmf(k, mu)
        shifted = np.concatenate(([0.0], p[:-1]))
        return np.append(shifted - p, p[-1])

    return ParametricModel(
        domain=tuple(domain),
        probabilities=probabilities,
        derivative=dprob if analytic else None,
        labels=tuple(range(kmax + 1)) + (f">{kmax}",),
        name="poisson",
    )


def binomial_model(n) -> ParametricModel:
    """Number of successes out of ``n`` trials with success probability x."""
    k = np.arange(n + 1)

    def dprob(x):
        # d/dx C(n,k) x^k (1-x)^(n-k) = n [B(k-1; n-1) - B(k; n-1)]
        lower = stats.binom.pmf(k - 1, n - 1, x)
        upper = stats.binom.pmf(k, n - 1, x)
        return n * (lower - upper)

    return ParametricModel(
        domain=(0.0, 1.0),
        probabilities=lambda x: stats.binom.pmf(k, n, x),
        derivative=dprob if n >= 1 else (lambda x: np.zeros(1)),
        labels=tuple(range(n + 1)),
        name=f"binomial({n})",
    )


def constant_model(probabilities, domain=(-1.0, 1.0)) -> ParametricModel:
    p = np.asarray(probabilities, dtype=float)
    return ParametricModel(
        domain=tuple(domain),
        probabilities=lambda x: p,
        derivative=lambda x: np.zeros_like(p),
        name="constant",
    )


def binned_model(cdf, edges, domain, name="binned") -> ParametricModel:
    """Discretize a continuous family by integrating its density over bins.

    ``cdf(xi, x)`` is the cumulative distribution of the measured value ``xi``
    at parameter ``x``. ``edges`` are the interior bin edges; two tail bins
    ``(-inf, edges[0])`` and ``[edges[-1], inf)`` close the outcome set.
    The bin width is the caller's choice.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 1 or np.any(np.diff(edges) <= 0):
        raise InvalidInputError("edges must be strictly increasing")

    def probabilities(x):
        c = np.concatenate(([0.0], cdf(edges, x), [1.0]))
        return np.diff(c)

    labels = tuple(range(edges.size + 1))
    return ParametricModel(tuple(domain), probabilities, None, labels, name)
