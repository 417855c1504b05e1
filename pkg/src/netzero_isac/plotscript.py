"""Gnuplot scripts for result CSVs. The data is inlined as named blocks so a
script renders on its own; nothing is drawn here."""

from __future__ import annotations

from collections import OrderedDict

from .results import ExperimentResult

CURVE_METRICS = {
    "p_i": "detection probability",
    "p_loc": "localization probability",
    "ser": "symbol error rate",
    "effective_xi_factor": "effective SNR factor",
    "bound_clamped": "bound clamped",
}
HEATMAP_METRICS = {
    "capture_correlation": "capture indicator correlation",
    "log_power_correlation": "log received power correlation",
}
_XLABELS = {
    "p_s": "P_s (W)",
    "gamma_sq": "|Gamma|^2",
    "d_f": "d_f (m)",
    "d_r": "d_r (m)",
    "d_b": "d_b (m)",
}
_DASH = {"analytic": "lines", "bound": "lines dashtype 2", "monte-carlo": "points pointtype 7"}


class PlotError(ValueError):
    pass


def _block_name(*parts: str) -> str:
    return "$" + "_".join("".join(c if c.isalnum() else "_" for c in p) for p in parts)


def emit_plot_script(csv_text: str, source_name: str = "result.csv") -> str:
    """Gnuplot text with one panel per metric: curves for sweep metrics (one
    per series and provenance) and heatmaps for correlation metrics.

    Raises :class:`PlotError` for an empty table or an unrecognized metric.
    """
    res = ExperimentResult.from_csv(csv_text)
    if not res.rows:
        raise PlotError("result CSV has no rows")
    metrics = list(OrderedDict.fromkeys(r.metric for r in res.rows))
    unknown = [m for m in metrics if m not in CURVE_METRICS and m not in HEATMAP_METRICS]
    if unknown:
        raise PlotError(f"unknown metric(s): {', '.join(unknown)}")

    out = [f"# rendering of {source_name}", "set terminal pngcairo size 900,600",
           f"set output '{source_name.rsplit('.', 1)[0]}.png'", "set key outside right"]
    if len(metrics) > 1:
        out.append(f"set multiplot layout {len(metrics)},1")
    for metric in metrics:
        rows = res.select(metric=metric)
        if metric in HEATMAP_METRICS:
            out += _heatmap(metric, rows)
        else:
            out += _curves(metric, rows)
    if len(metrics) > 1:
        out.append("unset multiplot")
    return "\n".join(out) + "\n"


def _heatmap(metric, rows):
    n = int(max(max(r.x for r in rows), max(int(r.series.rsplit("_", 1)[1]) for r in rows))) + 1
    grid = [["NaN"] * n for _ in range(n)]
    for r in rows:
        j = int(r.series.rsplit("_", 1)[1])
        grid[int(r.x)][j] = "NaN" if r.value != r.value else repr(r.value)
    name = _block_name(metric)
    lines = [f"{name} << EOD"] + [" ".join(row) for row in grid] + ["EOD",
             f"set title '{HEATMAP_METRICS[metric]}'", "set xlabel 'antenna'", "set ylabel 'antenna'",
             "set cbrange [-1:1]", "set palette defined (-1 'blue', 0 'white', 1 'red')",
             f"plot {name} matrix with image notitle"]
    return lines


def _curves(metric, rows):
    variable = rows[0].variable
    groups: OrderedDict[tuple[str, str], list] = OrderedDict()
    for r in rows:
        groups.setdefault((r.series, r.provenance), []).append(r)
    lines = []
    plots = []
    for (series, prov), members in groups.items():
        name = _block_name(metric, series, prov)
        lines.append(f"{name} << EOD")
        lines += [f"{r.x!r} {r.value!r}" for r in sorted(members, key=lambda r: r.x)]
        lines.append("EOD")
        plots.append(f"{name} using 1:2 with {_DASH[prov]} title '{series} ({prov})'")
    lines += [f"set title '{CURVE_METRICS[metric]}'",
              f"set xlabel '{_XLABELS.get(variable.split('[')[0], variable)}'",
              f"set ylabel '{CURVE_METRICS[metric]}'"]
    lines.append("set logscale x" if variable == "p_s" else "unset logscale x")
    lines.append("set logscale y" if metric == "ser" else "unset logscale y")
    lines.append("plot " + ", \\\n     ".join(plots))
    return lines
