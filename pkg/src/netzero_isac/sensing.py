"""Analytical sensing performance: per-antenna detection probability, the
probability that enough antennas capture the tag, and the monotonicity of the
Rayleigh detection curve."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special as _sp

from .fading import FadingSpec, product_tail
from .numerics import (
    ConvergenceError,
    SeriesTruncation,
    bessel_k,
    detection_tail_meijer,
    meijer_g_detection,
    product_gamma_tail_matrix,
)
from .results import ExperimentResult
from .scenario import Scenario

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionQuery:
    """One antenna's detection problem: P(zeta |h_f h_b|^2 >= p_th)."""

    zeta: float
    p_th: float
    forward: FadingSpec
    back: FadingSpec

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError(f"zeta must be > 0, got {self.zeta}")
        if not self.p_th > 0:
            raise ValueError(f"p_th must be > 0, got {self.p_th}")

    @property
    def ratio(self) -> float:
        """P_th / zeta, the squared envelope threshold."""
        return self.p_th / self.zeta

    @property
    def x(self) -> float:
        """Meijer-G argument P_th / (4 zeta sigma_f^2 sigma_b^2)."""
        return self.ratio / (4.0 * self.forward.sigma ** 2 * self.back.sigma ** 2)


@dataclass(frozen=True)
class LocalizationQuery:
    p: tuple[float, ...]
    required_count: int = 3

    def __post_init__(self):
        if any(not 0.0 <= q <= 1.0 for q in self.p):
            raise ValueError("probabilities must lie in [0, 1]")
        if len(self.p) < self.required_count:
            raise ValueError(f"need at least {self.required_count} antennas, got {len(self.p)}")


def detect_prob_rayleigh(q: DetectionQuery, method: str = "bessel") -> float:
    """Detection probability under Rayleigh fading on both links.

    ``method="meijer"`` evaluates 1 - x G^{2,1}_{1,3}(x | 0; 0, 0, -1) by
    Mellin-Barnes inversion; ``"bessel"`` uses the equivalent closed form
    2 sqrt(x) K_1(2 sqrt(x)).
    """
    if not (q.forward.is_rayleigh and q.back.is_rayleigh):
        raise ValueError("detect_prob_rayleigh needs K_f = K_b = 0")
    x = q.x
    if method == "bessel":
        w = 2.0 * math.sqrt(x)
        return min(1.0, w * bessel_k(1, w))
    if method == "meijer":
        return detection_tail_meijer(x, 0, 0)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class SeriesResult:
    value: float
    terms: int
    residual: float
    diagonals: int = 0


def rician_series(q: DetectionQuery, trunc: SeriesTruncation | None = None,
                  method: str = "bessel") -> SeriesResult:
    """Truncated (m, n) double series for the Rician detection probability.

    Each term is
    (A_mn / 4) (2 sigma_f sigma_b)^(m-n) (P_th/zeta)^(n+1) G(x | -n; m-n, 0, -n-1),
    which equals the Poisson weight w_mn = e^-Kf Kf^m/m! e^-Kb Kb^n/n! times
    P(U V <= x) for U ~ Gamma(m+1), V ~ Gamma(n+1). ``method="bessel"`` uses
    the closed-form Bessel sum for that probability, ``"meijer"`` the
    Mellin-Barnes evaluation of G itself.

    Diagonals m + n = d are summed until the Poisson mass not yet visited
    (which bounds the truncation error) falls below ``trunc.tail_tol``.
    """
    trunc = trunc or SeriesTruncation()
    size = trunc.max_terms_per_index
    kf, kb = q.forward.k_factor, q.back.k_factor
    x = q.x
    lwf = _log_poisson(kf, size)
    lwb = _log_poisson(kb, size)
    if method == "bessel":
        tails = product_gamma_tail_matrix(x, size)
    elif method != "meijer":
        raise ValueError(f"unknown method {method!r}")

    lx = math.log(x)
    complement = 0.0
    mass = 0.0
    terms = 0
    residual = 1.0
    for d in range(2 * size - 1):
        for m in range(max(0, d - size + 1), min(d, size - 1) + 1):
            n = d - m
            lw = lwf[m] + lwb[n]
            if lw == -np.inf:
                continue
            weight = math.exp(lw)
            if method == "bessel":
                term = weight * (1.0 - tails[m, n])
            else:
                # A_mn/4 (2 sf sb)^(m-n) (P_th/zeta)^(n+1) == w_mn x^(n+1) / (m! n!)
                la = lw + (n + 1) * lx - math.lgamma(m + 1) - math.lgamma(n + 1)
                term = math.exp(la) * meijer_g_detection(x, m, n)
            complement += term
            mass += weight
            terms += 1
        residual = max(0.0, 1.0 - mass)
        if residual < trunc.tail_tol:
            return SeriesResult(1.0 - complement, terms, residual, d + 1)
    raise ConvergenceError(
        f"Rician series not converged with {size} terms per index "
        f"(K_f={kf}, K_b={kb}); unvisited mass {residual:.3g}",
        estimate=1.0 - complement, residual=residual)


def _log_poisson(k_factor: float, count: int) -> np.ndarray:
    k = np.arange(count)
    if k_factor == 0:
        out = np.full(count, -np.inf)
        out[0] = 0.0
        return out
    return -k_factor + k * math.log(k_factor) - _sp.gammaln(k + 1)


def detect_prob_rician(q: DetectionQuery, trunc: SeriesTruncation | None = None,
                       method: str = "bessel") -> float:
    """Rician detection probability from the truncated double series.

    Raises :class:`ConvergenceError` (with the partial sum attached) when the
    truncation limit is hit first.
    """
    return float(min(1.0, max(0.0, rician_series(q, trunc, method).value)))


def detection_probability(q: DetectionQuery, trunc: SeriesTruncation | None = None,
                          fallback: bool = True) -> float:
    """Dispatch on the fading kind. If the Rician series does not converge and
    ``fallback`` is set, the Marcum-Q quadrature is used instead."""
    if q.forward.is_rayleigh and q.back.is_rayleigh:
        return detect_prob_rayleigh(q)
    try:
        return detect_prob_rician(q, trunc)
    except ConvergenceError as exc:
        if not fallback:
            raise
        log.warning("%s; using the quadrature oracle instead", exc)
        return product_tail(math.sqrt(q.ratio), q.forward, q.back)


def poisson_binomial_pmf(p: Sequence[float]) -> np.ndarray:
    """PMF of the number of successes among independent Bernoulli(p_i)."""
    pmf = np.array([1.0])
    for pi in p:
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] = pmf * (1.0 - pi)
        nxt[1:] += pmf * pi
        pmf = nxt
    return pmf


def localization_prob(q: LocalizationQuery | Sequence[float], required_count: int = 3) -> float:
    """P(at least ``required_count`` antennas capture the tag)."""
    if not isinstance(q, LocalizationQuery):
        q = LocalizationQuery(tuple(float(v) for v in q), required_count)
    pmf = poisson_binomial_pmf(q.p)
    return float(min(1.0, max(0.0, pmf[q.required_count:].sum())))


def localization_prob_enumerated(p: Sequence[float], required_count: int = 3) -> float:
    """Brute force over all 2^N capture patterns."""
    total = 0.0
    for pattern in itertools.product((0, 1), repeat=len(p)):
        if sum(pattern) >= required_count:
            total += math.prod(pi if b else 1.0 - pi for pi, b in zip(p, pattern))
    return total


# ---------------------------------------------------------------------------
# Monotonicity of the Rayleigh detection curve
# ---------------------------------------------------------------------------

def rayleigh_f(x: float) -> float:
    """f(x) = 1 - x G^{2,1}_{1,3}(x | 0; 0, 0, -1), by Mellin-Barnes inversion."""
    return detection_tail_meijer(x, 0, 0)


@dataclass
class MonotonicityReport:
    decreasing: bool
    max_rel_derivative_error: float
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def theorem1_check(x_grid: Sequence[float], rel_tol: float = 1e-4,
                   step: float = 1e-5) -> MonotonicityReport:
    """Check that f is strictly decreasing on ``x_grid`` and that its central
    finite-difference derivative matches -2 K_0(2 sqrt x) to ``rel_tol``."""
    xs = [float(v) for v in x_grid]
    if any(v <= 0 for v in xs) or any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("grid must be positive and strictly ascending")
    fx = [rayleigh_f(v) for v in xs]
    violations = []
    for a, b, fa, fb in zip(xs, xs[1:], fx, fx[1:]):
        if not fb < fa:
            violations.append(f"f({b}) = {fb} is not below f({a}) = {fa}")
    worst = 0.0
    for v in xs:
        h = step * v
        deriv = (rayleigh_f(v + h) - rayleigh_f(v - h)) / (2 * h)
        exact = -2.0 * bessel_k(0, 2.0 * math.sqrt(v))
        err = abs(deriv / exact - 1.0)
        worst = max(worst, err)
        if err > rel_tol:
            violations.append(f"f'({v}) = {deriv} vs -2K0 = {exact} (rel {err:.2e})")
    return MonotonicityReport(not any("not below" in s for s in violations), worst, violations)


# ---------------------------------------------------------------------------
# Scenario-level evaluation
# ---------------------------------------------------------------------------

def antenna_query(scenario: Scenario, i: int) -> DetectionQuery | None:
    """Detection query for antenna i, or None when nothing is backscattered."""
    zeta = scenario.zeta(i)
    if zeta == 0.0:
        return None
    return DetectionQuery(zeta, scenario.params.p_th, scenario.forward, scenario.backscatter[i])


def antenna_probabilities(scenario: Scenario, trunc: SeriesTruncation | None = None) -> list[float]:
    out = []
    for i in range(scenario.n_antennas):
        q = antenna_query(scenario, i)
        out.append(0.0 if q is None else detection_probability(q, trunc))
    return out


def sensing_sweep(scenario: Scenario, variable: str, values: Sequence[float],
                  trunc: SeriesTruncation | None = None, experiment: str = "sweep",
                  workers: int = 1) -> ExperimentResult:
    """Analytic p_i and P_Loc over a grid of one scenario variable.

    Grid points may be evaluated concurrently; rows always come out in grid
    order.
    """
    def point(v):
        sc = scenario.with_value(variable, v)
        p = antenna_probabilities(sc, trunc)
        return v, p, localization_prob(p, sc.required_count)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evaluated = list(pool.map(point, values))
    else:
        evaluated = [point(v) for v in values]

    res = ExperimentResult()
    for v, p, ploc in evaluated:
        for i, pi in enumerate(p):
            res.add(experiment, variable, float(v), f"antenna_{i}", "p_i", pi, "analytic")
        res.add(experiment, variable, float(v), "all", "p_loc", ploc, "analytic")
    return res
