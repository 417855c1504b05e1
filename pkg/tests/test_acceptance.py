"""Acceptance criteria, one function each. Every function returns
``(passed, detail)``; the pytest wrappers record a PASS/FAIL line per
criterion (shown in the terminal summary) and then assert.

Run directly with ``python3 tests/test_acceptance.py`` to get just the lines.
"""

import math
import sys
from itertools import product
from pathlib import Path

import numpy as np
from scipy import special as sp_special

from netzero_isac.cli import EXIT_OK, main
from netzero_isac.config import load_scenario, resolve_path
from netzero_isac.fading import FadingSpec, product_tail
from netzero_isac.montecarlo import MonteCarloConfig, antenna_correlation, empirical_detection, empirical_mgf, empirical_ser
from netzero_isac.sensing import (
    DetectionQuery,
    antenna_probabilities,
    detect_prob_rayleigh,
    detect_prob_rician,
    localization_prob,
    localization_prob_enumerated,
    theorem1_check,
)
from netzero_isac.ser import SerQuery, chernoff_bound, mgf_product, ser
from netzero_isac.tag_modulation import Impedance, normalize_impedance, psk_targets, qam_targets, reflection_coefficient


def _default():
    return load_scenario(resolve_path("default")).scenario


def criterion_1():
    g = reflection_coefficient(Impedance(100, 50), Impedance(50)).gamma
    z = normalize_impedance(Impedance(100, 50), Impedance(50))
    gap = abs(g - (0.4 + 0.2j))
    ok = gap <= 4 * np.finfo(float).eps and z == 2 + 1j
    return ok, f"Gamma = {g}, |Gamma - (0.4+0.2j)| = {gap:.1e}, normalized Z = {z}"


def criterion_2():
    sf, sb = 0.8, 1.3
    worst = 0.0
    for c in np.logspace(-2, 1, 50):
        q = DetectionQuery(1.0, c * c, FadingSpec.rayleigh(sf), FadingSpec.rayleigh(sb))
        w = c / (sf * sb)
        closed = w * sp_special.k1(w)
        worst = max(worst, abs(detect_prob_rayleigh(q, "meijer") - closed),
                    abs(detect_prob_rayleigh(q, "bessel") - closed))
    return worst < 1e-8, f"max |Meijer-G - (c/s)K1(c/s)| over 50 thresholds = {worst:.2e} (tol 1e-8)"


def criterion_3():
    ks = (0.0, 0.5, 1.0, 2.0, 5.0)
    worst = 0.0
    for kf, kb in product(ks, ks):
        for ratio in (0.1, 1.0, 6.0):
            q = DetectionQuery(1.0, ratio, FadingSpec.rician(kf), FadingSpec.rician(kb))
            oracle = product_tail(math.sqrt(ratio), q.forward, q.back)
            worst = max(worst, abs(detect_prob_rician(q) - oracle))
    return worst < 1e-4, f"max |series - Marcum-Q quadrature| over 25 K pairs x 3 thresholds = {worst:.2e} (tol 1e-4)"


def criterion_4():
    sc = _default()
    worst = 0.0
    for p_s in np.logspace(-3, 1, 9):
        s = sc.with_value("p_s", p_s)
        for i in range(s.n_antennas):
            zeta = s.zeta(i)
            a = detect_prob_rician(DetectionQuery(zeta, s.params.p_th, FadingSpec.rician(1.0), FadingSpec.rician(0.0)))
            b = detect_prob_rician(DetectionQuery(zeta, s.params.p_th, FadingSpec.rician(0.0), FadingSpec.rician(1.0)))
            worst = max(worst, abs(a - b))
    return worst < 1e-6, f"max |p(Kf=1,Kb=0) - p(Kf=0,Kb=1)| over 9 P_s x 4 antennas = {worst:.2e} (tol 1e-6)"


def criterion_5():
    rayleigh = _default()
    rician = rayleigh.with_value("p_s", 0.01).with_(forward=FadingSpec.rician(2.0),
                                                    backscatter=(FadingSpec.rician(2.0),))
    mc = MonteCarloConfig(10 ** 6, seed=20240605)
    worst = 0.0
    parts = []
    for label, sc in (("rayleigh", rayleigh), ("rician K=2", rician)):
        est = empirical_detection(sc, mc)
        for i, (pa, pm, se) in enumerate(zip(antenna_probabilities(sc), est.p, est.se)):
            worst = max(worst, abs(pa - pm) / se)
            parts.append(f"{label}[{i}] {pa:.4f}/{pm:.4f}")
    return worst <= 3.0, f"max |analytic - MC| / SE = {worst:.2f} (tol 3); " + ", ".join(parts)


def criterion_6():
    rep = theorem1_check(np.logspace(-3, 2, 100), rel_tol=1e-4, step=1e-5)
    return rep.ok, (f"strictly decreasing: {rep.decreasing}; max relative derivative error "
                    f"vs -2K0(2 sqrt x) = {rep.max_rel_derivative_error:.2e} (tol 1e-4)")


def criterion_7():
    rng = np.random.default_rng(7)
    worst = 0.0
    cases = 0
    for n in range(3, 11):
        for _ in range(25):
            p = rng.uniform(size=n)
            # include exact 0/1 entries now and then
            p[rng.uniform(size=n) < 0.1] = rng.integers(0, 2)
            worst = max(worst, abs(localization_prob(p) - localization_prob_enumerated(p)))
            cases += 1
    return worst < 1e-12, f"max |recursion - 2^N enumeration| over {cases} vectors, N=3..10: {worst:.1e} (tol 1e-12)"


def criterion_8():
    s = np.logspace(-4, 0, 9)
    est = empirical_mgf(s, MonteCarloConfig(10 ** 6, seed=8))
    exact = np.array([mgf_product(v) for v in s])
    rel = np.abs(est.mean / exact - 1)
    return bool(np.all(rel < 0.01)), f"max relative error over s in [1e-4, 1] = {rel.max():.2e} (tol 1e-2)"


def criterion_9():
    xi_grid = np.logspace(0, 3, 7)
    schemes = [("mpsk", 16), ("mqam", 16), ("mpsk", 4), ("mqam", 4), ("mpsk", 2)]
    worst_rel, mc_points, bound_ok, qam_ok = 0.0, 0, True, True
    for mod, order in schemes:
        pts = psk_targets(order, 1.0) if mod == "mpsk" else qam_targets(order, 1.0)
        for j, xi in enumerate(xi_grid):
            q = SerQuery(mod, order, float(xi))
            exact = ser(q)
            bound_ok &= chernoff_bound(q)[0] >= exact
            if exact >= 1e-3:
                trials = max(10 ** 6, int(6400 / exact))
                est = empirical_ser(q, pts, MonteCarloConfig(trials, seed=900 + j))
                worst_rel = max(worst_rel, abs(est.ser / exact - 1))
                mc_points += 1
    for xi in np.logspace(-1, 4, 20):
        qam_ok &= ser(SerQuery("mqam", 16, float(xi))) < ser(SerQuery("mpsk", 16, float(xi)))
    ok = worst_rel < 0.05 and bound_ok and qam_ok
    return ok, (f"max relative |quadrature - MC| = {worst_rel:.3f} on {mc_points} points (tol 0.05); "
                f"bound >= exact everywhere: {bound_ok}; 16-QAM < 16-PSK on 20 points: {qam_ok}")


def criterion_10():
    sc = load_scenario(resolve_path("figure5")).scenario
    p = antenna_probabilities(sc)
    ploc = localization_prob(p, sc.required_count)
    near, far = p[0], p[-1]
    ok = near > 0.8 and 0.15 <= far <= 0.45
    return ok, (f"2 m antenna p = {near:.4f} (> 0.8), 5 m antenna p = {far:.4f} (in [0.15, 0.45]); "
                f"P(>=3 antennas) = {ploc:.4f}")


def criterion_11():
    sc = load_scenario(resolve_path("figure6")).scenario
    est = antenna_correlation(sc, MonteCarloConfig(10 ** 5, seed=11))
    off = est.capture[~np.eye(sc.n_antennas, dtype=bool)]
    worst = float(np.max(np.abs(off)))
    return worst < 0.05, f"max off-diagonal |rho| of capture indicators = {worst:.4f} over 1e5 trials (tol 0.05)"


def _nondecreasing(vals):
    return all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def criterion_12():
    sc = _default()
    checks = {}
    for variable, grid, sign in (("p_s", np.logspace(-3, 1, 9), 1), ("gamma_sq", np.linspace(0.05, 1, 9), 1),
                                 ("d_b", np.linspace(2, 8, 7), -1)):
        rows = [antenna_probabilities(sc.with_value(variable, float(v))) for v in grid]
        per_antenna = [[sign * r[i] for r in rows] for i in range(sc.n_antennas)]
        ploc = [sign * localization_prob(r) for r in rows]
        checks[variable] = all(_nondecreasing(s) for s in per_antenna) and _nondecreasing(ploc)
    for mod, order in sc.schemes:
        sers = [-ser(SerQuery(mod, order, sc.with_value("gamma_sq", float(g)).xi()))
                for g in np.linspace(0.05, 1, 9)]
        checks[f"ser {mod}{order} vs gamma_sq"] = _nondecreasing(sers)
    return all(checks.values()), "; ".join(f"{k}: {'ok' if v else 'violated'}" for k, v in checks.items())


def criterion_13(tmp_dir: Path):
    outs = []
    for sub in ("first", "second"):
        code = main(["run", "default", "--out", str(tmp_dir / sub)])
        outs.append(code)
    names = sorted(p.name for p in (tmp_dir / "first").iterdir())
    identical = all((tmp_dir / "first" / n).read_bytes() == (tmp_dir / "second" / n).read_bytes() for n in names)
    verify_code = main(["verify", "default"])
    ok = outs == [EXIT_OK, EXIT_OK] and identical and verify_code == EXIT_OK
    return ok, f"rerun byte-identical over {len(names)} files: {identical}; verify exit code {verify_code}"


def _check(record, number, result):
    passed, detail = result
    record(number, passed, detail)
    assert passed, detail


def test_criterion_01(record_criterion):
    _check(record_criterion, 1, criterion_1())


def test_criterion_02(record_criterion):
    _check(record_criterion, 2, criterion_2())


def test_criterion_03(record_criterion):
    _check(record_criterion, 3, criterion_3())


def test_criterion_04(record_criterion):
    _check(record_criterion, 4, criterion_4())


def test_criterion_05(record_criterion):
    _check(record_criterion, 5, criterion_5())


def test_criterion_06(record_criterion):
    _check(record_criterion, 6, criterion_6())


def test_criterion_07(record_criterion):
    _check(record_criterion, 7, criterion_7())


def test_criterion_08(record_criterion):
    _check(record_criterion, 8, criterion_8())


def test_criterion_09(record_criterion):
    _check(record_criterion, 9, criterion_9())


def test_criterion_10(record_criterion):
    _check(record_criterion, 10, criterion_10())


def test_criterion_11(record_criterion):
    _check(record_criterion, 11, criterion_11())


def test_criterion_12(record_criterion):
    _check(record_criterion, 12, criterion_12())


def test_criterion_13(record_criterion, tmp_path, capsys):
    result = criterion_13(tmp_path)
    capsys.readouterr()  # drop the run/verify console output
    _check(record_criterion, 13, result)


if __name__ == "__main__":
    import tempfile

    failures = 0
    for number in range(1, 14):
        fn = globals()[f"criterion_{number}"]
        if number == 13:
            with tempfile.TemporaryDirectory() as tmp:
                passed, detail = fn(Path(tmp))
        else:
            passed, detail = fn()
        failures += not passed
        print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}", flush=True)
    sys.exit(1 if failures else 0)
