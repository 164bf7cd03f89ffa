"""Report assembly, JSON/CSV emission and text rendering.

All CSV and SVG output is produced from the rounded values stored in the
:class:`Report`, so every printed number traces back to ``report.json``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable

import numpy as np

from . import __version__
from .inference import CRITERIA, GapSeries, PlaceboSet, effect_pct, pseudo_p, ratio_of, rmspe
from .solver import SynthFit

SIG_DIGITS = 9


def r9(x) -> float | str:
    """Round to 9 significant digits; non-finite values become strings."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.{SIG_DIGITS}g}")


def num(x) -> float:
    """Inverse of :func:`r9` for values read back from JSON."""
    return float(x)


def _r9_list(xs: Iterable[float]) -> list:
    return [r9(x) for x in xs]


@dataclass
class Report:
    spec: dict[str, Any]
    seed: int
    donor_weights: dict[str, float]
    v_weights: dict[str, float]
    pre_mspe: float
    pre_rmspe: float
    post_rmspe: float
    rmspe_ratio: float
    inner_objective: float
    gaps: dict[str, list]
    effects: list[dict[str, Any]]
    horizon_effect: dict[str, Any]
    placebo: dict[str, Any] | None = None
    oracle_check: dict[str, Any] | None = None
    tool_version: str = __version__
    tool: str = "scmkit"

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False,
                          allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Report":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))


def gaps_dict(g: GapSeries) -> dict[str, list]:
    return {
        "time": list(g.times),
        "actual": _r9_list(g.actual),
        "synthetic": _r9_list(g.synthetic),
        "gap": _r9_list(g.gap),
        "gap_pct": _r9_list(g.gap_pct),
    }


def _effects(g: GapSeries) -> list[dict[str, Any]]:
    out = []
    for y in g.post_times:
        e = effect_pct(g, y)
        out.append({"year": y, "pct_a": r9(e.a), "pct_b": r9(e.b)})
    return out


def placebo_dict(ps: PlaceboSet, criterion: str) -> dict[str, Any]:
    summaries = {c: pseudo_p(ps, c) for c in CRITERIA}
    head = summaries[criterion]
    times = list(ps.treated.gaps.times)
    units = []
    series = {}
    for u in ps.units:
        units.append({
            "unit": u.unit,
            "treated": u.treated,
            "pre_mspe": r9(u.pre_mspe),
            "pre_rmspe": r9(u.pre_rmspe),
            "post_rmspe": r9(u.post_rmspe),
            "ratio": r9(u.ratio),
            "terminal_abs_gap": r9(u.terminal_abs_gap),
            "retained": u.retained,
            "error": u.error,
        })
        if u.gaps is not None:
            series[u.unit] = _r9_list(u.gaps.gap)
    return {
        "criterion": criterion,
        "filter_k": ps.filter_multiple,
        "pseudo_p": r9(head.pseudo_p),
        "rank": head.rank,
        "n_retained": head.n_retained,
        "by_criterion": {
            c: {
                "pseudo_p": r9(s.pseudo_p),
                "rank": s.rank,
                "treated_stat": r9(s.treated_stat),
                "exceedances": list(s.exceedances),
            }
            for c, s in summaries.items()
        },
        "units": units,
        "gaps": {"time": times, "series": series},
    }


def build_report(fit_: SynthFit, gaps: GapSeries, placebos: PlaceboSet | None = None,
                 criterion: str = "rmspe_ratio",
                 oracle_check: dict[str, Any] | None = None) -> Report:
    pre, post = rmspe(gaps, "pre"), rmspe(gaps, "post")
    effects = _effects(gaps)
    return Report(
        spec=fit_.spec.to_dict(),
        seed=fit_.spec.seed,
        donor_weights={d: r9(w) for d, w in fit_.weights().items()},
        v_weights={k: r9(v) for k, v in fit_.v_weights().items()},
        pre_mspe=r9(fit_.pre_mspe),
        pre_rmspe=r9(pre),
        post_rmspe=r9(post),
        rmspe_ratio=r9(ratio_of(pre, post)),
        inner_objective=r9(fit_.inner_objective),
        gaps=gaps_dict(gaps),
        effects=effects,
        horizon_effect=effects[-1],
        placebo=None if placebos is None else placebo_dict(placebos, criterion),
        oracle_check=oracle_check,
    )


# ------------------------------------------------------------------ CSV

def fmt6(x) -> str:
    x = num(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def weights_csv(report: Report) -> str:
    rows = sorted(report.donor_weights.items(), key=lambda kv: (-num(kv[1]), kv[0]))
    out = io.StringIO()
    out.write("donor,weight\n")
    for d, w in rows:
        out.write(f"{d},{fmt6(w)}\n")
    return out.getvalue()


def gaps_csv(report: Report) -> str:
    g = report.gaps
    out = io.StringIO()
    out.write("time,actual,synthetic,gap,gap_pct\n")
    for i, t in enumerate(g["time"]):
        cols = [fmt6(g[k][i]) for k in ("actual", "synthetic", "gap", "gap_pct")]
        out.write(f"{t}," + ",".join(cols) + "\n")
    return out.getvalue()


def placebo_gaps_csv(report: Report) -> str:
    p = report.placebo
    out = io.StringIO()
    out.write("unit,time,gap\n")
    times = p["gaps"]["time"]
    for u in p["units"]:
        series = p["gaps"]["series"].get(u["unit"])
        if series is None:
            continue
        for t, g in zip(times, series):
            out.write(f"{u['unit']},{t},{fmt6(g)}\n")
    return out.getvalue()


def placebo_summary_csv(report: Report) -> str:
    out = io.StringIO()
    out.write("unit,pre_rmspe,post_rmspe,ratio,retained\n")
    for u in report.placebo["units"]:
        cols = [fmt6(u[k]) for k in ("pre_rmspe", "post_rmspe", "ratio")]
        out.write(f"{u['unit']}," + ",".join(cols) + f",{str(u['retained']).lower()}\n")
    return out.getvalue()


# ------------------------------------------------------------------ Table 4 style

def format_mspe(x: float) -> str:
    return f"{x:.2E}"


def format_ratio(x: float) -> str:
    return f"{x:.2f}"


def format_weight(x: float) -> str:
    s = f"{x:.3f}".rstrip("0")
    return s.rstrip(".") if s.endswith(".") else s


def weight_list(weights: dict[str, float]) -> list[str]:
    """Positively weighted donors as ``"Name (0.66)"``, heaviest first."""
    pos = [(d, w) for d, w in weights.items() if w > 0]
    pos.sort(key=lambda kv: (-kv[1], kv[0]))
    return [f"{d} ({format_weight(w)})" for d, w in pos]


@dataclass
class DiagnosticsColumn:
    title: str
    mspe: float
    ratio: float
    weights: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_report(cls, title: str, report: Report) -> "DiagnosticsColumn":
        return cls(title, num(report.pre_mspe), num(report.rmspe_ratio),
                   {d: num(w) for d, w in report.donor_weights.items()})


def render_weights_table(columns: list[DiagnosticsColumn]) -> str:
    """Tab-separated weights/fit table, one column per study."""
    lists = [weight_list(c.weights) for c in columns]
    depth = max((len(x) for x in lists), default=0)
    lines = ["\t" + "\t".join(c.title for c in columns)]
    lines.append("MSPE\t" + "\t".join(format_mspe(c.mspe) for c in columns))
    lines.append("RMSPE ratio\t" + "\t".join(format_ratio(c.ratio) for c in columns))
    for i in range(depth):
        label = "Donor weights" if i == 0 else ""
        cells = [x[i] if i < len(x) else "-" for x in lists]
        lines.append(label + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"


def oracle_check_dict(resolution: float, solver_obj: float, oracle_obj: float,
                      oracle_w: np.ndarray, donors) -> dict[str, Any]:
    return {
        "resolution": resolution,
        "solver_objective": r9(solver_obj),
        "oracle_objective": r9(oracle_obj),
        "gap": r9(solver_obj - oracle_obj),
        "oracle_weights": {d: r9(x) for d, x in zip(donors, oracle_w)},
        "passed": bool(solver_obj <= oracle_obj + 1e-9),
    }


# ------------------------------------------------------------------ SVG

def _label(x) -> str:
    # same literal as in report.json
    return json.dumps(x)


def gaps_svg(report: Report) -> str:
    from .svgplot import Series, line_chart

    g = report.gaps
    t = g["time"]
    actual = [num(x) for x in g["actual"]]
    synth = [num(x) for x in g["synthetic"]]
    t0 = report.spec["treatment_time"]
    vals = g["actual"] + g["synthetic"]
    lo = min(vals, key=num)
    hi = max(vals, key=num)
    return line_chart(
        [Series(f"{report.spec['treated_unit']} (actual)", t, actual, "#000000", 2.0,
                css_class="actual"),
         Series("synthetic", t, synth, "#1f4e9c", 2.0, dash="6 4", css_class="synthetic")],
        vline=t0,
        title=f"{report.spec['treated_unit']}: actual vs synthetic {report.spec['outcome']}",
        y_label=report.spec["outcome"],
        x_labels=[str(t[0]), str(t0), str(t[-1])],
        y_labels=(_label(lo), _label(hi)),
        legend=True,
    )


def placebos_svg(report: Report) -> str:
    """Retained placebo gaps in light grey, treated gap heavy, rule at T0."""
    from .svgplot import Series, line_chart

    p = report.placebo
    t = p["gaps"]["time"]
    series = []
    treated = None
    for u in p["units"]:
        ys = p["gaps"]["series"].get(u["unit"])
        if ys is None or not u["retained"]:
            continue
        ys = [num(y) for y in ys]
        if u["treated"]:
            treated = Series(u["unit"], t, ys, "#000000", 2.5, css_class="treated")
        else:
            series.append(Series(u["unit"], t, ys, "#999999", 1.0, opacity=0.7,
                                 css_class="placebo"))
    series.append(treated)
    t0 = report.spec["treatment_time"]
    vals = [y for s in p["gaps"]["series"].values() for y in s]
    return line_chart(
        series,
        vline=t0,
        title=f"In-space placebo gaps ({report.spec['outcome']})",
        y_label="gap",
        x_labels=[str(t[0]), str(t0), str(t[-1])],
        y_labels=(_label(min(vals, key=num)), _label(max(vals, key=num))),
    )
