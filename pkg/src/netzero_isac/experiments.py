"""Experiment runners: turn a loaded scenario file into a long-format result
table, and write it out with a manifest."""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import LoadedScenario
from .montecarlo import (
    MonteCarloConfig,
    antenna_correlation,
    empirical_detection,
    empirical_ser,
    trial_records,
    write_trial_dump,
)
from .numerics import SeriesTruncation
from .plotscript import emit_plot_script
from .results import ExperimentResult
from .scenario import Scenario
from .sensing import antenna_probabilities, localization_prob
from .ser import SerQuery, chernoff_bound, ser
from .tag_modulation import (
    Impedance,
    TagModulator,
    build_constellation,
    psk_targets,
    qam_targets,
)


def _trunc(loaded: LoadedScenario) -> SeriesTruncation:
    return SeriesTruncation(*loaded.truncation)


def _detection_rows(res: ExperimentResult, experiment: str, variable: str, x: float,
                    sc: Scenario, trunc: SeriesTruncation, mc: MonteCarloConfig | None,
                    prefix: str = "") -> None:
    p = antenna_probabilities(sc, trunc)
    for i, pi in enumerate(p):
        res.add(experiment, variable, x, f"{prefix}antenna_{i}", "p_i", pi, "analytic")
    res.add(experiment, variable, x, f"{prefix}all", "p_loc",
            localization_prob(p, sc.required_count), "analytic")
    if mc is None:
        return
    est = empirical_detection(sc, mc)
    for i, (pi, se) in enumerate(zip(est.p, est.se)):
        res.add(experiment, variable, x, f"{prefix}antenna_{i}", "p_i", float(pi),
                "monte-carlo", float(se), mc.seed)
    res.add(experiment, variable, x, f"{prefix}all", "p_loc", est.p_loc, "monte-carlo",
            est.p_loc_se, mc.seed)


def ser_query(sc: Scenario, modulation: str, order: int) -> SerQuery:
    return SerQuery(modulation, order, sc.xi(), sc.forward.omega, sc.receiver.omega)


def tag_constellation(modulation: str, order: int, gamma_sq: float, antenna_ohm: float):
    """Reflection points realized by a load bank whose outermost point has
    |Gamma|^2 = gamma_sq."""
    antenna = Impedance(antenna_ohm)
    if modulation == "mpsk":
        mod = TagModulator.psk(antenna, order, math.sqrt(gamma_sq), math.pi / order)
    else:
        side = math.isqrt(order)
        mod = TagModulator.qam(antenna, order, math.sqrt(gamma_sq / 2) / (side - 1))
    return build_constellation(mod)


def _ser_rows(res: ExperimentResult, experiment: str, variable: str, x: float, sc: Scenario,
              mc: MonteCarloConfig | None, mode: str, antenna_ohm: float) -> None:
    for modulation, order in sc.schemes:
        series = f"{modulation}{order}"
        if sc.xi() == 0.0:
            # no signal: any decision is a guess
            res.add(experiment, variable, x, series, "ser", 1.0 - 1.0 / order, "analytic")
            continue
        q = ser_query(sc, modulation, order)
        res.add(experiment, variable, x, series, "ser", ser(q), "analytic")
        bound, clamped = chernoff_bound(q)
        res.add(experiment, variable, x, series, "ser", bound, "bound")
        if clamped:
            res.add(experiment, variable, x, series, "bound_clamped", 1.0, "bound")
        if mc is None:
            continue
        if mode == "tag":
            const = tag_constellation(modulation, order, sc.gamma_sq, antenna_ohm)
            est = empirical_ser(q, const, mc, "tag", sc.power_law, reference_gamma_sq=sc.gamma_sq)
            res.add(experiment, variable, x, series, "effective_xi_factor",
                    est.effective_xi_factor, "analytic")
        else:
            pts = psk_targets(order, 1.0) if modulation == "mpsk" else qam_targets(order, 1.0)
            est = empirical_ser(q, pts, mc, "ideal", sc.power_law)
        res.add(experiment, variable, x, series, "ser", est.ser, "monte-carlo", est.se, mc.seed)


def figure4(loaded: LoadedScenario) -> ExperimentResult:
    """Detection probability versus the sweep variable for several pairs of
    K-factors on the forward and backscatter links."""
    res = ExperimentResult()
    base, trunc, grid = loaded.scenario, _trunc(loaded), loaded.grid
    for setting in loaded.fading_settings:
        fwd = replace(base.forward, kind="rician" if setting["k_f"] > 0 else "rayleigh",
                      k_factor=float(setting["k_f"]))
        back = tuple(replace(b, kind="rician" if setting["k_b"] > 0 else "rayleigh",
                             k_factor=float(setting["k_b"])) for b in base.backscatter)
        sc = base.with_(forward=fwd, backscatter=back)
        for v in grid.values:
            _detection_rows(res, "figure4", grid.variable, v, sc.with_value(grid.variable, v),
                            trunc, loaded.mc, prefix=f"{setting['label']}/")
    return res


def figure5(loaded: LoadedScenario) -> ExperimentResult:
    """Per-antenna detection probability and localization probability."""
    return _sweep(loaded, "figure5", with_ser=False)


def figure6(loaded: LoadedScenario) -> ExperimentResult:
    """Inter-antenna correlation of capture indicators and log received power."""
    mc = loaded.mc or MonteCarloConfig(10 ** 5)
    est = antenna_correlation(loaded.scenario, mc)
    res = ExperimentResult()
    n = loaded.scenario.n_antennas
    for metric, mat in (("capture_correlation", est.capture), ("log_power_correlation", est.log_power)):
        for i in range(n):
            for j in range(n):
                rho = float(mat[i, j])
                se = (1.0 - rho * rho) / math.sqrt(mc.trials) if np.isfinite(rho) else math.nan
                res.add("figure6", "antenna", float(i), f"antenna_{j}", metric, rho,
                        "monte-carlo", se, mc.seed)
    return res


def figure7(loaded: LoadedScenario) -> ExperimentResult:
    """Localization probability and SER versus |Gamma|^2."""
    return _sweep(loaded, "figure7", with_ser=True)


def _sweep(loaded: LoadedScenario, experiment: str, with_ser: bool | None = None) -> ExperimentResult:
    res = ExperimentResult()
    base, trunc, grid = loaded.scenario, _trunc(loaded), loaded.grid
    if with_ser is None:
        with_ser = base.params.n0 is not None and base.geometry.d_r is not None
    for v in grid.values:
        sc = base.with_value(grid.variable, v)
        _detection_rows(res, experiment, grid.variable, v, sc, trunc, loaded.mc)
        if with_ser:
            _ser_rows(res, experiment, grid.variable, v, sc, loaded.mc, loaded.ser_mode,
                      loaded.antenna_impedance)
    return res


RUNNERS = {
    "figure4": figure4,
    "figure5": figure5,
    "figure6": figure6,
    "figure7": figure7,
    "sweep": lambda loaded: _sweep(loaded, "sweep"),
}


def run_experiment(loaded: LoadedScenario) -> ExperimentResult:
    return RUNNERS[loaded.kind](loaded)


def manifest_text(loaded: LoadedScenario, files: list[str]) -> str:
    seed = loaded.mc.seed if loaded.mc else ""
    lines = [
        f"scenario={loaded.scenario.name}",
        f"experiment={loaded.kind}",
        f"config_sha256={loaded.config_hash()}",
        f"seed={seed}",
        f"trials={loaded.mc.trials if loaded.mc else 0}",
        f"tool_version={__version__}",
    ] + [f"file={f}" for f in files]
    return "\n".join(lines) + "\n"


def write_outputs(loaded: LoadedScenario, result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write the CSV (and optional plot script / trial dump) plus manifest.txt.
    Nothing time- or host-dependent is written, so reruns are byte-identical."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name, kind = loaded.scenario.name, loaded.kind
    stem = kind if name == kind else f"{name}_{kind}"
    written = []
    csv_text = result.to_csv()
    csv_path = out / f"{stem}.csv"
    csv_path.write_bytes(csv_text.encode())
    written.append(csv_path)
    if "gnuplot" in loaded.formats:
        gp = out / f"{stem}.gp"
        gp.write_text(emit_plot_script(csv_text, csv_path.name))
        written.append(gp)
    if "trials" in loaded.formats and loaded.mc is not None:
        dump = out / f"{stem}_trials.csv.gz"
        write_trial_dump(dump, trial_records(loaded.scenario, loaded.mc), loaded.scenario.n_antennas)
        written.append(dump)
    manifest = out / "manifest.txt"
    manifest.write_text(manifest_text(loaded, [p.name for p in written]))
    written.append(manifest)
    return written
