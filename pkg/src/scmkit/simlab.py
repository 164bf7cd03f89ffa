"""Seeded synthetic panels with a planted convex combination and effect.

Data-generating process for outcome ``y`` at period index ``t``::

    donor j:  y_jt = level_j + trend_j * t + u_jt
    treated:  y_0t = (sum_j w_j y_jt) * (1 + effect_t) + e_t

where ``u_j`` is an AR(1) path (coefficient 0.5) with innovation sd
``donor_sd``, ``e`` is an AR(1) path with innovation sd ``noise_sd`` and
``effect_t`` is zero before ``T0``. Extra variables ``x1..xK`` follow the
same donor recipe around their own levels and the treated unit takes exactly
the planted combination of them, so it sits inside the donor hull.

Random draws come from SplitMix64 streams keyed off ``seed``:
key 1 planted weights, key 2 donor outcome parameters, key 3 donor outcome
AR paths (sub-keyed by donor), key 4 treated noise, key 5 + k extra
variable k (sub-keyed by donor).
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .errors import InvalidConfig, ScmError
from .inference import gap_series, pseudo_p, rmspe, run_placebos
from .panel import Panel
from .rng import SplitMix64, derive_seed
from .solver import fit
from .study import PredictorSpec, StudySpec

AR_COEF = 0.5
TREATED = "treated"


@dataclass(frozen=True)
class SimConfig:
    J: int = 14
    T: int = 31
    T0: int = 26
    K_extra: int = 2
    noise_sd: float = 0.5
    effect_path: float | tuple[float, ...] = 0.0
    true_weights: tuple[float, ...] | None = None
    level_mean: float = 100.0
    level_sd: float = 10.0
    trend_mean: float = 1.0
    trend_sd: float = 0.2
    donor_sd: float = 2.0
    first_year: int = 1985
    seed: int = 0
    outcome: str = "gdp_pc"
    unit_names: tuple[str, ...] | None = None
    treated_name: str = TREATED
    n_active: int = 4

    def __post_init__(self):
        if isinstance(self.effect_path, list):
            object.__setattr__(self, "effect_path", tuple(self.effect_path))
        if isinstance(self.true_weights, list):
            object.__setattr__(self, "true_weights", tuple(self.true_weights))
        if isinstance(self.unit_names, list):
            object.__setattr__(self, "unit_names", tuple(self.unit_names))
        self.validate()

    def validate(self):
        if self.J < 2:
            raise InvalidConfig("InvalidConfig: J must be >= 2")
        if not (2 < self.T0 < self.T):
            raise InvalidConfig(f"InvalidConfig: T0={self.T0} must lie in (2, T={self.T})")
        if self.K_extra < 0:
            raise InvalidConfig("InvalidConfig: K_extra must be >= 0")
        for name in ("noise_sd", "donor_sd", "level_sd", "trend_sd"):
            if not getattr(self, name) >= 0:
                raise InvalidConfig(f"InvalidConfig: {name} must be >= 0")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise InvalidConfig("InvalidConfig: seed must be an unsigned 64-bit integer")
        if isinstance(self.effect_path, tuple) and len(self.effect_path) != self.T - self.T0:
            raise InvalidConfig("InvalidConfig: effect_path needs one entry per post period")
        if self.true_weights is not None:
            w = np.asarray(self.true_weights, dtype=float)
            if w.shape != (self.J,) or (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
                raise InvalidConfig("InvalidConfig: true_weights must be a simplex J-vector")
        if self.unit_names is not None:
            names = list(self.unit_names)
            if len(names) != self.J or len(set(names) | {self.treated_name}) != self.J + 1:
                raise InvalidConfig("InvalidConfig: unit_names must be J distinct donor names")
        if not 1 <= self.n_active:
            raise InvalidConfig("InvalidConfig: n_active must be >= 1")

    @property
    def years(self) -> list[int]:
        return list(range(self.first_year, self.first_year + self.T))

    @property
    def treatment_year(self) -> int:
        return self.first_year + self.T0

    @property
    def donor_names(self) -> list[str]:
        if self.unit_names is not None:
            return list(self.unit_names)
        return [f"donor{j + 1:02d}" for j in range(self.J)]

    def effects(self) -> list[float]:
        n = self.T - self.T0
        if isinstance(self.effect_path, tuple):
            return [float(x) for x in self.effect_path]
        return [float(self.effect_path)] * n

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        for k in ("effect_path", "true_weights", "unit_names"):
            if isinstance(d[k], tuple):
                d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SimConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig(f"InvalidConfig: unknown keys {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidConfig(f"InvalidConfig: {exc}") from None


def load_sim_config(path) -> SimConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig(f"InvalidConfig: cannot read {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise InvalidConfig("InvalidConfig: sim config must be a JSON object")
    return SimConfig.from_dict(raw)


@dataclass(frozen=True)
class GroundTruth:
    donors: tuple[str, ...]
    true_weights: tuple[float, ...]
    effects: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "true_weights": dict(zip(self.donors, self.true_weights)),
            "effects": {str(y): e for y, e in self.effects.items()},
        }


def planted_weights(cfg: SimConfig) -> np.ndarray:
    """Given weights, or ``n_active`` random donors with Dirichlet mass floored at 0.2/m."""
    if cfg.true_weights is not None:
        return np.asarray(cfg.true_weights, dtype=float)
    gen = SplitMix64(derive_seed(cfg.seed, 1))
    m = min(cfg.n_active, cfg.J)
    chosen = gen.shuffle(list(range(cfg.J)))[:m]
    mass = 0.8 * gen.dirichlet_flat(m) + 0.2 / m
    w = np.zeros(cfg.J)
    w[chosen] = mass
    return w / w.sum()


def _ar1(gen: SplitMix64, n: int, sd: float) -> np.ndarray:
    out = np.empty(n)
    prev = gen.normal() * sd / math.sqrt(1.0 - AR_COEF**2)
    out[0] = prev
    for t in range(1, n):
        prev = AR_COEF * prev + sd * gen.normal()
        out[t] = prev
    return out


def _donor_paths(cfg: SimConfig, param_key: int, path_key: int,
                 level_mean: float) -> np.ndarray:
    params = SplitMix64(derive_seed(cfg.seed, param_key))
    t = np.arange(cfg.T, dtype=float)
    Y = np.empty((cfg.J, cfg.T))
    for j in range(cfg.J):
        level = level_mean + cfg.level_sd * params.normal()
        trend = cfg.trend_mean + cfg.trend_sd * params.normal()
        u = _ar1(SplitMix64(derive_seed(cfg.seed, path_key, j)), cfg.T, cfg.donor_sd)
        Y[j] = level + trend * t + u
    return Y


def generate_panel(cfg: SimConfig) -> tuple[Panel, GroundTruth]:
    cfg.validate()
    w = planted_weights(cfg)
    Y = _donor_paths(cfg, 2, 3, cfg.level_mean)
    eff = np.zeros(cfg.T)
    eff[cfg.T0:] = cfg.effects()
    noise = _ar1(SplitMix64(derive_seed(cfg.seed, 4)), cfg.T, cfg.noise_sd)
    y0 = (w @ Y) * (1.0 + eff) + noise

    names = cfg.donor_names
    years = cfg.years
    cells = []
    for j, u in enumerate(names):
        cells += [(u, yr, cfg.outcome, float(Y[j, i])) for i, yr in enumerate(years)]
    cells += [(cfg.treated_name, yr, cfg.outcome, float(y0[i])) for i, yr in enumerate(years)]
    for k in range(cfg.K_extra):
        X = _donor_paths(cfg, 5 + 2 * k, 6 + 2 * k, cfg.level_mean / 2)
        x0 = w @ X
        var = f"x{k + 1}"
        for j, u in enumerate(names):
            cells += [(u, yr, var, float(X[j, i])) for i, yr in enumerate(years)]
        cells += [(cfg.treated_name, yr, var, float(x0[i])) for i, yr in enumerate(years)]

    truth = GroundTruth(
        donors=tuple(names),
        true_weights=tuple(float(x) for x in w),
        effects={yr: e for yr, e in zip(years[cfg.T0:], cfg.effects())},
    )
    return Panel.from_cells(cells), truth


def default_study(cfg: SimConfig, v_strategy: str = "equal",
                  lagged: bool = True) -> StudySpec:
    """Study matching a simulated panel.

    Predictors: each pre-period outcome as a one-year window (when ``lagged``)
    or the pre-window outcome mean otherwise, followed by the pre-window mean
    of every extra variable.
    """
    pre = (cfg.first_year, cfg.treatment_year - 1)
    if lagged:
        preds = [PredictorSpec(cfg.outcome, (y, y)) for y in range(pre[0], pre[1] + 1)]
    else:
        preds = [PredictorSpec(cfg.outcome, pre)]
    preds += [PredictorSpec(f"x{k + 1}", pre) for k in range(cfg.K_extra)]
    return StudySpec(
        treated_unit=cfg.treated_name,
        treatment_time=cfg.treatment_year,
        outcome=cfg.outcome,
        predictors=tuple(preds),
        pre_window=pre,
        post_window=(cfg.treatment_year, cfg.years[-1]),
        v_strategy=v_strategy,
        seed=cfg.seed,
        name="simulated",
    )


RECOVERY_COLUMNS = (
    "rep", "seed", "weight_max_abs_err", "weight_rmse", "true_effect_pct",
    "est_effect_pct", "effect_err", "pre_rmspe", "rmspe_ratio",
    "median_placebo_ratio", "pseudo_p", "error",
)


@dataclass
class RecoveryReport:
    rows: list[dict[str, Any]]

    def summary(self) -> dict[str, float]:
        ok = [r for r in self.rows if not r["error"]]
        if not ok:
            return {"reps": len(self.rows), "failed": len(self.rows)}
        werr = [r["weight_rmse"] for r in ok]
        eerr = [r["effect_err"] for r in ok]
        out = {
            "reps": len(self.rows),
            "failed": len(self.rows) - len(ok),
            "weight_rmse_mean": statistics.fmean(werr),
            "weight_max_abs_err_mean": statistics.fmean(r["weight_max_abs_err"] for r in ok),
            "effect_bias": statistics.fmean(eerr),
            "effect_rmse": math.sqrt(statistics.fmean(e * e for e in eerr)),
            "est_effect_pct_mean": statistics.fmean(r["est_effect_pct"] for r in ok),
        }
        ps = [r["pseudo_p"] for r in ok if r["pseudo_p"] is not None and not math.isnan(r["pseudo_p"])]
        if ps:
            out["pseudo_p_mean"] = statistics.fmean(ps)
            out["share_p_zero"] = sum(p == 0.0 for p in ps) / len(ps)
            out["share_p_le_0.1"] = sum(p <= 0.1 for p in ps) / len(ps)
            out["median_treated_ratio"] = statistics.median(r["rmspe_ratio"] for r in ok)
            out["median_placebo_ratio"] = statistics.median(r["median_placebo_ratio"] for r in ok)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(RECOVERY_COLUMNS)
        for r in self.rows:
            wr.writerow([_fmt(r[c]) for c in RECOVERY_COLUMNS])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "inf" if math.isinf(x) else ("nan" if math.isnan(x) else f"{x:.6f}")
    return str(x)


def replicate(cfg: SimConfig, placebos: bool = True, study: StudySpec | None = None,
              threads: int | None = 1) -> dict[str, Any]:
    """One replication: generate, fit, and (optionally) run placebos."""
    panel, truth = generate_panel(cfg)
    spec = study if study is not None else default_study(cfg)
    spec = replace(spec, seed=cfg.seed)
    row: dict[str, Any] = {c: None for c in RECOVERY_COLUMNS}
    row.update(seed=cfg.seed, error="")
    try:
        f = fit(spec, panel)
        gaps = gap_series(f, panel)
        post = gaps.mask("post")
        est = float(np.mean(gaps.gap_pct[post]))
        true = 100.0 * float(np.mean(cfg.effects()))
        w_true = np.asarray(truth.true_weights)
        diff = f.w - w_true
        row.update(
            weight_max_abs_err=float(np.abs(diff).max()),
            weight_rmse=float(np.sqrt(np.mean(diff * diff))),
            true_effect_pct=true,
            est_effect_pct=est,
            effect_err=est - true,
            pre_rmspe=f.pre_rmspe,
            rmspe_ratio=rmspe(gaps, "post") / f.pre_rmspe if f.pre_rmspe > 0 else math.inf,
        )
        if placebos:
            ps = run_placebos(spec, panel, threads=threads, treated_fit=f)
            summary = pseudo_p(ps)
            row["pseudo_p"] = summary.pseudo_p
            row["rmspe_ratio"] = ps.treated.ratio
            row["median_placebo_ratio"] = float(np.median(
                [u.ratio for u in ps.retained if not u.treated]))
    except ScmError as exc:
        row["error"] = str(exc)
    return row


def recovery_report(cfg: SimConfig, reps: int, placebos: bool = True,
                    study: StudySpec | None = None) -> RecoveryReport:
    """Run ``reps`` replications with seeds ``cfg.seed + i``."""
    if reps < 1:
        raise InvalidConfig("InvalidConfig: reps must be >= 1")
    rows = []
    for i in range(reps):
        c = replace(cfg, seed=(cfg.seed + i) % 2**64)
        row = replicate(c, placebos=placebos, study=study)
        row["rep"] = i
        rows.append(row)
    return RecoveryReport(rows)


def noise_panel(panel: Panel, seed: int, variable: str = "noise",
                units: Sequence[str] | None = None) -> Panel:
    """Add a pure-noise variable (standard normal per cell) to ``panel``."""
    gen = SplitMix64(derive_seed(seed, 99))
    cells = [(u, t, variable, gen.normal()) for u in (units or panel.units) for t in panel.times]
    return panel.with_cells(cells)
