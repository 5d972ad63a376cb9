"""Monte-Carlo check that maximum likelihood attains the Cramer-Rao bound.

Samples come from numpy's PCG64 bit generator. Uniform doubles are mapped to
outcomes by inverse-CDF lookup, so a seed fixes the counts on every platform.
Trial ``i`` of a run seeded with ``s`` uses the stream
``SeedSequence(s, spawn_key=(i,))``, which is what ``SeedSequence(s).spawn``
would hand out.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InvalidInputError, UnidentifiableError
from .fisher import DEFAULT_DIFF, ParametricModel, derivative, fisher_information

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MAX_GOLDEN_ITERATIONS = 200
NEWTON_STEPS = 3
X_TOL = 1e-10


class BoundaryEstimateWarning(UserWarning):
    """The likelihood maximum sits on the edge of the model domain."""


@dataclass(frozen=True)
class SampleSet:
    model: ParametricModel
    x_true: float
    counts: np.ndarray
    n_samples: int
    seed: int
    stream: Optional[int] = None


def _generator(seed, stream=None):
    if stream is None:
        ss = np.random.SeedSequence(seed)
    else:
        ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


def draw_samples(model: ParametricModel, x_true, n, seed, stream=None) -> SampleSet:
    """Draw ``n`` i.i.d. outcomes from ``model`` at ``x_true`` and tally them."""
    if n < 1:
        raise InvalidInputError("need at least one sample")
    p = model.evaluate(x_true).probabilities
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    u = _generator(seed, stream).random(int(n))
    idx = np.searchsorted(cdf, u, side="right")
    counts = np.bincount(idx, minlength=p.size)
    counts.setflags(write=False)
    return SampleSet(model, float(x_true), counts, int(n), seed, stream)


def log_likelihood(model: ParametricModel, counts, x):
    p = model.evaluate(x).probabilities
    seen = counts > 0
    if np.any(p[seen] <= 0.0):
        return -math.inf
    return float(np.sum(counts[seen] * np.log(p[seen])))


def mle(model: ParametricModel, samples: SampleSet) -> float:
    """Maximum-likelihood estimate of the parameter from tallied counts.

    Golden-section search over the whole domain (at most 200 iterations)
    followed by three Newton steps on the numerical score. Equal likelihoods
    narrow toward the domain midpoint. Emits :class:`BoundaryEstimateWarning`
    when the estimate lands on a domain edge.
    """
    counts = np.asarray(samples.counts)
    lo, hi = model.domain
    width = hi - lo

    def ll(x):
        return log_likelihood(model, counts, x)

    probes = np.linspace(lo, hi, 11)
    vals = np.array([ll(x) for x in probes])
    finite = vals[np.isfinite(vals)]
    if finite.size == vals.size and np.ptp(finite) <= 1e-12 * (1.0 + np.max(np.abs(finite))):
        raise UnidentifiableError("likelihood is flat over the domain")

    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = ll(c), ll(d)
    mid = 0.5 * (lo + hi)
    for _ in range(MAX_GOLDEN_ITERATIONS):
        if b - a <= X_TOL * max(1.0, width):
            break
        keep_left = fc > fd or (fc == fd and abs(c - mid) <= abs(d - mid))
        if keep_left:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = ll(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = ll(d)
    x = 0.5 * (a + b)

    x = _newton_polish(model, ll, x)

    for edge in (lo, hi):
        if abs(x - edge) <= 1e-6 * width and ll(edge) >= ll(x):
            warnings.warn(
                f"estimate on the domain edge {edge!r}", BoundaryEstimateWarning, stacklevel=2
            )
            return float(edge)
    return float(min(max(x, lo), hi))


def _newton_polish(model, ll, x):
    for _ in range(NEWTON_STEPS):
        try:
            score = lambda t: derivative(ll, t, DEFAULT_DIFF, domain=model.domain)
            g = float(score(x))
            curv = float(derivative(score, x, DEFAULT_DIFF, domain=model.domain))
        except DomainError:
            return x
        if not (math.isfinite(g) and math.isfinite(curv)) or curv >= 0.0:
            return x
        step = g / curv
        new = x - step
        lo, hi = model.domain
        if not lo < new < hi or ll(new) < ll(x):
            return x
        x = new
        if abs(step) < 1e-14:
            break
    return x


@dataclass(frozen=True)
class EstimationReport:
    estimates: tuple
    empirical_mean: float
    empirical_variance: float
    crb_variance: float
    ratio: float
    x_true: float
    n_samples: int
    trials: int
    seed: int
    boundary_hits: int

    @property
    def standard_error(self):
        return math.sqrt(self.crb_variance / self.trials)

    @property
    def bias(self):
        return self.empirical_mean - self.x_true

    @property
    def non_asymptotic(self):
        """Flag runs where the MLE has not settled into its large-sample regime."""
        return self.boundary_hits > 0 or not 0.95 <= self.ratio <= 1.05


def crb_saturation(model: ParametricModel, x_true, n, trials, seed) -> EstimationReport:
    """Empirical variance of the MLE over ``trials`` runs against ``1/(n F)``."""
    if trials < 100:
        raise InvalidInputError("crb_saturation needs at least 100 trials")
    estimates = []
    hits = 0
    for i in range(trials):
        samples = draw_samples(model, x_true, n, seed, stream=i)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", BoundaryEstimateWarning)
            estimates.append(mle(model, samples))
        hits += any(issubclass(w.category, BoundaryEstimateWarning) for w in caught)
    est = np.array(estimates)
    crb = 1.0 / (n * fisher_information(model, x_true))
    var = float(np.var(est, ddof=1))
    return EstimationReport(
        estimates=tuple(float(e) for e in est),
        empirical_mean=float(est.mean()),
        empirical_variance=var,
        crb_variance=crb,
        ratio=var / crb,
        x_true=float(x_true),
        n_samples=int(n),
        trials=int(trials),
        seed=seed,
        boundary_hits=hits,
    )
