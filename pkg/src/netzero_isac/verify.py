"""Cross-validation of one scenario: analytic values against independent
oracles and against Monte Carlo, with the measured gap for every check."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import LoadedScenario
from .experiments import ser_query
from .fading import product_tail
from .montecarlo import MonteCarloConfig, antenna_correlation, empirical_detection, empirical_mgf, empirical_ser
from .numerics import ConvergenceError, SeriesTruncation
from .sensing import (
    antenna_probabilities,
    antenna_query,
    detect_prob_rayleigh,
    detect_prob_rician,
    localization_prob,
    localization_prob_enumerated,
    theorem1_check,
)
from .ser import chernoff_bound, mgf_product, ser
from .tag_modulation import psk_targets, qam_targets

# Monte Carlo checks allow this many standard errors
SE_MULTIPLIER = 4.0


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: measured {self.measured:.3g} vs tolerance {self.tolerance:.3g} {self.detail}".rstrip()


@dataclass
class VerifyReport:
    checks: list[Check] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, measured, tolerance, detail="", passed=None):
        ok = measured <= tolerance if passed is None else passed
        self.checks.append(Check(name, bool(ok), float(measured), float(tolerance), detail))

    def text(self) -> str:
        lines = [c.line() for c in self.checks] + [f"[WARN] {w}" for w in self.warnings]
        lines.append(f"{sum(c.passed for c in self.checks)}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def verify(loaded: LoadedScenario) -> VerifyReport:
    sc = loaded.scenario
    trunc = SeriesTruncation(*loaded.truncation)
    mc = loaded.mc or MonteCarloConfig(10 ** 5)
    rep = VerifyReport()

    # analytic detection against oracles
    for i in range(sc.n_antennas):
        q = antenna_query(sc, i)
        if q is None:
            continue
        if q.forward.is_rayleigh and q.back.is_rayleigh:
            gap = abs(detect_prob_rayleigh(q, "meijer") - detect_prob_rayleigh(q, "bessel"))
            rep.add(f"antenna {i}: Meijer-G vs Bessel closed form", gap, 1e-8)
        else:
            oracle = product_tail(math.sqrt(q.ratio), q.forward, q.back)
            try:
                gap = abs(detect_prob_rician(q, trunc) - oracle)
                rep.add(f"antenna {i}: Rician series vs Marcum-Q quadrature", gap, 1e-4)
            except ConvergenceError as exc:
                rep.warnings.append(f"antenna {i}: {exc}; the quadrature oracle is used as primary")

    # analytic against Monte Carlo
    p = antenna_probabilities(sc, trunc)
    est = empirical_detection(sc, mc)
    floor = 1.0 / mc.trials
    for i, (pa, pm, se) in enumerate(zip(p, est.p, est.se)):
        tol = SE_MULTIPLIER * max(se, floor)
        rep.add(f"antenna {i}: analytic p_i vs Monte Carlo", abs(pa - pm), tol,
                f"(analytic {pa:.5f}, MC {pm:.5f}, SE {se:.2g}, {mc.trials} trials)")
    ploc = localization_prob(p, sc.required_count)
    if sc.forward_link == "independent":
        tol = SE_MULTIPLIER * max(est.p_loc_se, floor)
        rep.add("P_Loc analytic vs Monte Carlo", abs(ploc - est.p_loc), tol,
                f"(analytic {ploc:.5f}, MC {est.p_loc:.5f})")
    if sc.n_antennas <= 16:
        gap = abs(ploc - localization_prob_enumerated(p, sc.required_count))
        rep.add("P_Loc recursion vs enumeration", gap, 1e-12)

    # monotonicity in transmit power
    grid = [0.5, 1.0, 2.0]
    series = [antenna_probabilities(sc.with_value("p_s", sc.params.p_s * f), trunc) for f in grid]
    drops = [max(0.0, a - b) for lo, hi in zip(series, series[1:]) for a, b in zip(lo, hi)]
    rep.add("p_i nondecreasing in P_s", max(drops, default=0.0), 1e-12)

    if sc.n_antennas >= 2:
        corr = antenna_correlation(sc, mc)
        off = corr.capture[~np.eye(sc.n_antennas, dtype=bool)]
        finite = off[np.isfinite(off)]
        worst = float(np.max(np.abs(finite))) if finite.size else 0.0
        if sc.forward_link == "independent":
            tol = max(0.05, SE_MULTIPLIER / math.sqrt(mc.trials))
            rep.add("capture correlation off-diagonal", worst, tol)
        if finite.size < off.size:
            rep.warnings.append("some capture correlations are undefined (constant indicators)")

    th = theorem1_check(np.logspace(-3, 2, 25))
    rep.add("f(x) strictly decreasing with derivative -2K0(2 sqrt x)",
            th.max_rel_derivative_error, 1e-4, passed=th.ok)

    s = np.logspace(-4, 0, 5)
    mgf = empirical_mgf(s, mc, sc.forward.omega, sc.receiver.omega, power_law="gamma2")
    exact = np.array([mgf_product(v, sc.forward.omega, sc.receiver.omega) for v in s])
    rel = np.abs(mgf.mean / exact - 1)
    tol = np.maximum(0.01, SE_MULTIPLIER * mgf.se / exact)
    rep.add("MGF closed form vs Monte Carlo (relative)", float(rel.max()), float(tol.min()),
            passed=bool(np.all(rel <= tol)))

    if sc.params.n0 is not None and sc.geometry.d_r is not None and sc.gamma_sq > 0:
        for modulation, order in sc.schemes:
            q = ser_query(sc, modulation, order)
            exact_ser = ser(q)
            bound, _ = chernoff_bound(q)
            rep.add(f"{modulation}{order}: Chernoff bound >= exact SER",
                    max(0.0, exact_ser - bound), 0.0)
            if exact_ser < 1e-3:
                rep.warnings.append(f"{modulation}{order}: SER {exact_ser:.2g} below 1e-3, Monte Carlo check skipped")
                continue
            pts = psk_targets(order, 1.0) if modulation == "mpsk" else qam_targets(order, 1.0)
            sim = empirical_ser(q, pts, mc, "ideal", sc.power_law)
            tol = max(0.05, SE_MULTIPLIER * sim.se / exact_ser)
            rep.add(f"{modulation}{order}: SER quadrature vs Monte Carlo (relative)",
                    abs(sim.ser / exact_ser - 1), tol,
                    f"(exact {exact_ser:.4g}, MC {sim.ser:.4g})")
    return rep
