"""Fading models for the forward and backscatter links.

Rician envelopes are parameterized by the K-factor and the per-dimension
scatter sigma, with line-of-sight amplitude nu = sigma * sqrt(2K). The SER
analysis instead describes each link by its power |h|^2, for which two laws are
offered: ``"gamma2"`` (shape-2 Gamma with scale Omega, the law the closed-form
MGF is derived for) and ``"exponential"`` (mean Omega).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .numerics import (
    ConvergenceError,
    DomainError,
    QuadratureSpec,
    SeriesTruncation,
    bessel_k,
    bessel_kt_scaled,
    integrate,
    marcum_q1,
)

POWER_LAWS = ("gamma2", "exponential")


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by (seed, *stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class FadingSpec:
    kind: str = "rayleigh"
    k_factor: float = 0.0
    sigma: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rician", "rayleigh"):
            raise ValueError(f"unknown fading kind {self.kind!r}")
        if self.k_factor < 0:
            raise ValueError("k_factor must be >= 0")
        if self.kind == "rayleigh" and self.k_factor != 0:
            raise ValueError("a rayleigh spec must have k_factor = 0")
        if not (self.sigma > 0 and self.omega > 0):
            raise ValueError("sigma and omega must be > 0")

    @classmethod
    def rician(cls, k_factor: float, sigma: float = 1.0, omega: float = 1.0) -> "FadingSpec":
        return cls("rician" if k_factor > 0 else "rayleigh", float(k_factor), sigma, omega)

    @classmethod
    def rayleigh(cls, sigma: float = 1.0, omega: float = 1.0) -> "FadingSpec":
        return cls("rayleigh", 0.0, sigma, omega)

    @property
    def is_rayleigh(self) -> bool:
        return self.k_factor == 0

    @property
    def los_amplitude(self) -> float:
        return self.sigma * math.sqrt(2.0 * self.k_factor)


def draw_envelope(spec: FadingSpec, size, rng: np.random.Generator) -> np.ndarray:
    x = rng.standard_normal(size) * spec.sigma + spec.los_amplitude
    y = rng.standard_normal(size) * spec.sigma
    return np.hypot(x, y)


def sample_envelope(spec: FadingSpec, count: int, seed: int) -> np.ndarray:
    """i.i.d. Rician (Rayleigh when K = 0) envelopes, reproducible from ``seed``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return draw_envelope(spec, count, make_rng(seed))


def draw_power(spec: FadingSpec, size, rng: np.random.Generator, law: str = "gamma2") -> np.ndarray:
    """Channel power |h|^2 under one of :data:`POWER_LAWS`."""
    if law == "gamma2":
        return rng.gamma(2.0, spec.omega, size)
    if law == "exponential":
        return rng.exponential(spec.omega, size)
    raise ValueError(f"unknown power law {law!r}")


def sample_power(spec: FadingSpec, count: int, seed: int, law: str = "gamma2") -> np.ndarray:
    return draw_power(spec, count, make_rng(seed), law)


def gamma2_power_pdf(x, omega: float):
    """(x / Omega^2) exp(-x / Omega): shape-2 Gamma density with scale Omega."""
    arr = np.asarray(x, dtype=float)
    if not omega > 0:
        raise DomainError("omega must be > 0")
    out = np.where(arr > 0, arr / omega ** 2 * np.exp(-np.maximum(arr, 0) / omega), 0.0)
    return float(out) if not arr.ndim else out


def _poisson_logw(k_factor: float, count: int) -> np.ndarray:
    k = np.arange(count)
    if k_factor == 0:
        out = np.full(count, -np.inf)
        out[0] = 0.0
        return out
    return -k_factor + k * math.log(k_factor) - _sp.gammaln(k + 1)


def cascaded_pdf(x, forward: FadingSpec, back: FadingSpec,
                 trunc: SeriesTruncation | None = None):
    """Density of the cascaded envelope h = h_f h_b (double Bessel-K series).

    Diagonals m + n = d are added until one contributes less than
    ``trunc.tail_tol`` of the running value at every x.

    Raises
    ------
    ConvergenceError
        If the series has not settled when an index reaches
        ``trunc.max_terms_per_index``.
    """
    trunc = trunc or SeriesTruncation()
    arr = np.asarray(x, dtype=float)
    xv = np.atleast_1d(arr)
    if np.any(~(xv > 0)):
        raise DomainError("cascaded_pdf needs x > 0")
    sf, sb = forward.sigma, back.sigma
    s = sf * sb
    if forward.is_rayleigh and back.is_rayleigh:
        out = xv / (s * s) * bessel_k(0, xv / s)
        return float(out[0]) if not arr.ndim else out.reshape(arr.shape)

    nmax = trunc.max_terms_per_index
    z = xv / s
    table = bessel_kt_scaled(nmax, z)  # exp(z) (z/2)^mu K_mu(z)
    with np.errstate(divide="ignore"):
        log_table = np.log(table)
    lx = np.log(xv)
    kf, kb = forward.k_factor, back.k_factor
    # log of (K/(2 sigma^2))^m / (m!)^2 without the exp(-K) factor
    idx = np.arange(nmax)
    with np.errstate(invalid="ignore"):  # 0 * -inf at m = 0 is replaced below
        lcf = np.where(idx == 0, 0.0, idx * (math.log(kf / (2 * sf * sf)) if kf > 0 else -np.inf)
                       - 2 * _sp.gammaln(idx + 1))
        lcb = np.where(idx == 0, 0.0, idx * (math.log(kb / (2 * sb * sb)) if kb > 0 else -np.inf)
                       - 2 * _sp.gammaln(idx + 1))
    base = -(kf + kb) - 2 * math.log(s) + lx - z
    total = np.zeros_like(xv)
    for d in range(2 * nmax - 1):
        diag = np.zeros_like(xv)
        for m in range(max(0, d - nmax + 1), min(d, nmax - 1) + 1):
            n = d - m
            if not (np.isfinite(lcf[m]) and np.isfinite(lcb[n])):
                continue
            mu = abs(m - n)
            # x^(m+n) K_mu(x/s) = x^(m+n) (2s/x)^mu exp(-z) T_mu(z)
            lt = (lcf[m] + lcb[n] + (m - n) * math.log(sf / sb) + base
                  + (m + n - mu) * lx + mu * math.log(2 * s) + log_table[mu])
            diag += np.exp(lt)
        total += diag
        if d > 0 and np.all(diag <= trunc.tail_tol * total):
            return float(total[0]) if not arr.ndim else total.reshape(arr.shape)
        if d >= nmax - 1:
            break
    raise ConvergenceError(
        f"cascaded_pdf series not converged within {nmax} terms per index",
        estimate=float(total.max()), residual=float(diag.max()))


def _rician_pdf(r, spec: FadingSpec):
    s2 = spec.sigma ** 2
    nu = spec.los_amplitude
    return r / s2 * np.exp(-(r - nu) ** 2 / (2 * s2)) * _sp.i0e(r * nu / s2)


def envelope_tail(r: float, spec: FadingSpec) -> float:
    """P(h >= r) for a single Rician envelope."""
    if r <= 0:
        return 1.0
    return marcum_q1(math.sqrt(2.0 * spec.k_factor), r / spec.sigma)


_TAIL_SPEC = QuadratureSpec(max_subdivisions=800, abs_tol=1e-13, rel_tol=1e-10)


def product_tail(threshold: float, forward: FadingSpec, back: FadingSpec,
                 spec: QuadratureSpec | None = None) -> float:
    """P(h_f h_b >= threshold).

    Rayleigh pair: closed form (c / s) K_1(c / s) with s = sigma_f sigma_b.
    Otherwise a 1-D quadrature over the forward envelope of the Rician density
    times the Marcum-Q tail of the backscatter envelope.
    """
    if threshold < 0:
        raise DomainError("threshold must be >= 0")
    if threshold == 0:
        return 1.0
    if forward.is_rayleigh and back.is_rayleigh:
        w = threshold / (forward.sigma * back.sigma)
        return min(1.0, w * bessel_k(1, w))

    def f(u):
        u = np.atleast_1d(u)
        out = np.empty_like(u)
        for j, uj in enumerate(u):
            out[j] = 0.0 if uj <= 0 else (
                _rician_pdf(uj, forward) * envelope_tail(threshold / uj, back))
        return out

    sf = forward.sigma
    nu = forward.los_amplitude
    pts = [p for p in (0.25 * sf, nu, nu + sf, nu + 3 * sf, nu + 6 * sf) if p > 0]
    pts += [threshold / (back.los_amplitude + k * back.sigma) for k in (1, 3, 6)]
    val, _ = integrate(f, 0.0, math.inf, spec or _TAIL_SPEC, points=sorted(set(pts)))
    return min(1.0, max(0.0, val))
