"""Gap series, RMSPE diagnostics and in-space placebo inference."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DonorPoolTooSmall, EmptyWindow, ScmError, YearNotInPost
from .panel import Panel
from .solver import SynthFit, fit
from .study import StudySpec, outcome_paths, resolve_spec

CRITERIA = ("rmspe_ratio", "terminal_abs_gap")


class PerfectPreFitWarning(UserWarning):
    """Pre-period RMSPE is zero, so the post/pre ratio is undefined."""


class PlaceboFailureWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class GapSeries:
    times: list[int]
    actual: np.ndarray
    synthetic: np.ndarray
    gap: np.ndarray
    gap_pct: np.ndarray
    treatment_time: int

    def mask(self, window: str) -> np.ndarray:
        t = np.asarray(self.times)
        if window == "pre":
            return t < self.treatment_time
        if window == "post":
            return t >= self.treatment_time
        raise ValueError(f"window must be 'pre' or 'post', not {window!r}")

    @property
    def post_times(self) -> list[int]:
        return [t for t in self.times if t >= self.treatment_time]


def make_gaps(times, actual, synthetic, treatment_time: int) -> GapSeries:
    actual = np.asarray(actual, dtype=float)
    synthetic = np.asarray(synthetic, dtype=float)
    gap = actual - synthetic
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(synthetic != 0.0, 100.0 * gap / synthetic, np.nan)
    return GapSeries(list(times), actual, synthetic, gap, pct, int(treatment_time))


def gap_series(fit_: SynthFit, panel: Panel) -> GapSeries:
    """Actual vs synthetic outcome over the pre and post windows."""
    years, y1, Y0 = outcome_paths(fit_.spec, panel)
    return make_gaps(years, y1, Y0 @ fit_.w, fit_.spec.treatment_time)


def rmspe(gaps: GapSeries, window: str) -> float:
    g = gaps.gap[gaps.mask(window)]
    if g.size == 0:
        raise EmptyWindow(f"EmptyWindow: no {window} periods")
    return math.sqrt(float(np.mean(g * g)))


def ratio_of(pre: float, post: float) -> float:
    if pre == 0.0:
        warnings.warn("pre-period RMSPE is 0; reporting ratio as +inf",
                      PerfectPreFitWarning, stacklevel=3)
        return math.inf
    return post / pre


def rmspe_ratio(fit_: SynthFit, panel: Panel) -> float:
    gaps = gap_series(fit_, panel)
    return ratio_of(rmspe(gaps, "pre"), rmspe(gaps, "post"))


@dataclass(frozen=True)
class EffectPct:
    year: int
    a: float  # 100 (actual - synthetic) / synthetic, the headline
    b: float  # 100 (synthetic - actual) / actual


def effect_pct(gaps: GapSeries, year: int) -> EffectPct:
    if year < gaps.treatment_time or year not in gaps.times:
        raise YearNotInPost(year)
    i = gaps.times.index(year)
    act, syn = float(gaps.actual[i]), float(gaps.synthetic[i])
    a = 100.0 * (act - syn) / syn if syn != 0.0 else math.nan
    b = 100.0 * (syn - act) / act if act != 0.0 else math.nan
    return EffectPct(year, a, b)


@dataclass(frozen=True, eq=False)
class PlaceboUnit:
    unit: str
    treated: bool
    gaps: GapSeries | None
    pre_mspe: float
    pre_rmspe: float
    post_rmspe: float
    ratio: float
    retained: bool
    error: str | None = None

    @property
    def terminal_abs_gap(self) -> float:
        return abs(float(self.gaps.gap[-1])) if self.gaps is not None else math.nan

    def stat(self, criterion: str) -> float:
        if criterion == "rmspe_ratio":
            return self.ratio
        if criterion == "terminal_abs_gap":
            return self.terminal_abs_gap
        raise ValueError(f"unknown criterion {criterion!r}")


@dataclass(frozen=True, eq=False)
class PlaceboSet:
    """Treated unit first, then each donor in pool order."""

    units: list[PlaceboUnit]
    filter_multiple: float | None = None
    treated_fit: SynthFit | None = field(default=None, repr=False)

    @property
    def treated(self) -> PlaceboUnit:
        return self.units[0]

    @property
    def retained(self) -> list[PlaceboUnit]:
        return [u for u in self.units if u.retained]


def _unit_result(unit: str, treated: bool, fit_: SynthFit, panel: Panel) -> PlaceboUnit:
    gaps = gap_series(fit_, panel)
    pre, post = rmspe(gaps, "pre"), rmspe(gaps, "post")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PerfectPreFitWarning)
        ratio = ratio_of(pre, post)
    return PlaceboUnit(unit, treated, gaps, fit_.pre_mspe, pre, post, ratio, True)


def placebo_spec(spec: StudySpec, unit: str) -> StudySpec:
    """Spec with ``unit`` as pseudo-treated; the real treated unit is never a donor."""
    donors = tuple(d for d in spec.donors if d != unit)
    return replace(spec, treated_unit=unit, donor_units=donors, exclusions=())


def thread_count() -> int:
    raw = os.environ.get("SCMKIT_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("SCMKIT_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def run_placebos(spec: StudySpec, panel: Panel, filter_k: float | None = None,
                 threads: int | None = None, treated_fit: SynthFit | None = None) -> PlaceboSet:
    """Refit with every donor as pseudo-treated.

    Failed placebo fits are kept in the set (``retained=False``, ``error``
    set) and a warning is issued. With ``filter_k``, placebos whose pre-period
    MSPE exceeds ``filter_k`` times the treated unit's are not retained.
    """
    spec = resolve_spec(spec, panel)
    tfit = treated_fit if treated_fit is not None else fit(spec, panel)
    treated = _unit_result(spec.treated_unit, True, tfit, panel)

    def one(d):
        try:
            return _unit_result(d, False, fit(placebo_spec(spec, d), panel), panel)
        except ScmError as exc:
            return PlaceboUnit(d, False, None, math.nan, math.nan, math.nan, math.nan,
                               False, str(exc))

    n = thread_count() if threads is None else max(1, threads)
    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(one, spec.donors))
    else:
        results = [one(d) for d in spec.donors]

    units = [treated]
    for r in results:
        if r.error is not None:
            warnings.warn(f"placebo for {r.unit} failed: {r.error}",
                          PlaceboFailureWarning, stacklevel=2)
        elif filter_k is not None and r.pre_mspe > filter_k * treated.pre_mspe:
            r = replace(r, retained=False)
        units.append(r)
    return PlaceboSet(units, filter_k, tfit)


@dataclass(frozen=True)
class InferenceSummary:
    criterion: str
    treated_stat: float
    rank: int
    n_retained: int
    exceedances: tuple[str, ...]
    pseudo_p: float
    effects: tuple[EffectPct, ...]
    horizon: EffectPct

    @property
    def treated_ratio(self) -> float:
        return self.treated_stat if self.criterion == "rmspe_ratio" else math.nan


def pseudo_p(placebos: PlaceboSet, criterion: str = "rmspe_ratio") -> InferenceSummary:
    """Share of retained units whose statistic strictly exceeds the treated one.

    The denominator counts every retained unit, the treated unit included.
    ``rank`` is 1 + the number of strict exceedances.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    kept = placebos.retained
    if len(kept) < 2:
        raise DonorPoolTooSmall(len(kept))
    t = placebos.treated.stat(criterion)
    over = tuple(u.unit for u in kept if not u.treated and u.stat(criterion) > t)
    gaps = placebos.treated.gaps
    effects = tuple(effect_pct(gaps, y) for y in gaps.post_times)
    return InferenceSummary(
        criterion=criterion,
        treated_stat=t,
        rank=1 + len(over),
        n_retained=len(kept),
        exceedances=over,
        pseudo_p=len(over) / len(kept),
        effects=effects,
        horizon=effects[-1],
    )
