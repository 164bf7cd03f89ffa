"""Study configuration and predictor/outcome matrix construction."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Any, Sequence

import numpy as np

from .errors import (
    CoverageError,
    DonorPoolTooSmall,
    SpecError,
    TreatedInDonors,
    ZeroVariancePredictor,
)
from .panel import Panel, missing_cells

V_STRATEGIES = ("equal", "nested")
_U64 = 2**64


@dataclass(frozen=True)
class PredictorSpec:
    variable: str
    window: tuple[int, int]
    aggregation: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "window", (int(self.window[0]), int(self.window[1])))
        if self.aggregation != "mean":
            raise SpecError(f"unsupported aggregation {self.aggregation!r}")
        if self.window[0] > self.window[1]:
            raise SpecError(f"predictor window {self.window} is reversed")

    @property
    def label(self) -> str:
        a, b = self.window
        return f"{self.variable}[{a}]" if a == b else f"{self.variable}[{a}-{b}]"


@dataclass(frozen=True)
class StudySpec:
    """One synthetic-control study.

    ``donor_units=None`` means every panel unit except the treated unit and
    ``exclusions``; :func:`resolve_spec` expands it.
    """

    treated_unit: str
    treatment_time: int
    outcome: str
    predictors: tuple[PredictorSpec, ...]
    pre_window: tuple[int, int]
    post_window: tuple[int, int]
    donor_units: tuple[str, ...] | None = None
    exclusions: tuple[str, ...] = ()
    v_strategy: str = "equal"
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        object.__setattr__(self, "exclusions", tuple(self.exclusions))
        if self.donor_units is not None:
            object.__setattr__(self, "donor_units", tuple(self.donor_units))
        object.__setattr__(self, "pre_window", tuple(int(x) for x in self.pre_window))
        object.__setattr__(self, "post_window", tuple(int(x) for x in self.post_window))
        self._validate()

    def _validate(self):
        t0 = self.treatment_time
        if self.v_strategy not in V_STRATEGIES:
            raise SpecError(f"v_strategy must be one of {V_STRATEGIES}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < _U64):
            raise SpecError("seed must be an unsigned 64-bit integer")
        if not self.predictors:
            raise SpecError("at least one predictor is required")
        if self.pre_window[1] != t0 - 1 or self.post_window[0] != t0:
            raise SpecError(
                f"windows must split at treatment_time {t0}: "
                f"pre ends at {t0 - 1}, post starts at {t0}"
            )
        if self.pre_window[1] - self.pre_window[0] + 1 < 2:
            raise SpecError("pre_window needs at least 2 periods")
        if self.post_window[1] < self.post_window[0]:
            raise SpecError("post_window needs at least 1 period")
        for p in self.predictors:
            if p.window[1] >= t0:
                raise SpecError(f"predictor {p.label} reaches into the post period")

    @property
    def pre_years(self) -> list[int]:
        return list(range(self.pre_window[0], self.pre_window[1] + 1))

    @property
    def post_years(self) -> list[int]:
        return list(range(self.post_window[0], self.post_window[1] + 1))

    @property
    def donors(self) -> tuple[str, ...]:
        if self.donor_units is None:
            raise SpecError("spec is not resolved; call resolve_spec first")
        return self.donor_units

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["predictors"] = [
            {"variable": p.variable, "window": list(p.window), "aggregation": p.aggregation}
            for p in self.predictors
        ]
        d["pre_window"] = list(self.pre_window)
        d["post_window"] = list(self.post_window)
        d["exclusions"] = list(self.exclusions)
        d["donor_units"] = None if self.donor_units is None else list(self.donor_units)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StudySpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise SpecError(f"unknown config keys: {sorted(unknown)}")
        required = ("treated_unit", "treatment_time", "outcome", "predictors",
                    "pre_window", "post_window")
        missing = [k for k in required if k not in d]
        if missing:
            raise SpecError(f"missing config keys: {missing}")
        try:
            preds = tuple(
                PredictorSpec(p["variable"], tuple(p["window"]), p.get("aggregation", "mean"))
                for p in d["predictors"]
            )
            kw = dict(d)
            kw["predictors"] = preds
            kw["treatment_time"] = int(d["treatment_time"])
            kw["seed"] = int(d.get("seed", 0))
            return cls(**kw)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"malformed study config: {exc}") from None


def load_spec(path: str | os.PathLike) -> StudySpec:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise SpecError("config must be a JSON object")
    return StudySpec.from_dict(raw)


def dump_spec(spec: StudySpec, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def bundled_config_names() -> list[str]:
    root = resources.files("scmkit") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_config(name: str) -> StudySpec:
    """Load one of the shipped configs, e.g. ``"maule_2010"``."""
    ref = resources.files("scmkit") / "configs" / f"{name}.json"
    return StudySpec.from_dict(json.loads(ref.read_text(encoding="utf-8")))


def resolve_spec(raw: StudySpec, panel: Panel) -> StudySpec:
    """Expand the donor pool and verify every coverage requirement."""
    panel.unit_index(raw.treated_unit)
    panel.variable_index(raw.outcome)
    for u in raw.exclusions:
        panel.unit_index(u)
    if raw.donor_units is None:
        drop = {raw.treated_unit, *raw.exclusions}
        donors = tuple(u for u in panel.units if u not in drop)
    else:
        if raw.treated_unit in raw.donor_units:
            raise TreatedInDonors(raw.treated_unit)
        if len(set(raw.donor_units)) != len(raw.donor_units):
            raise SpecError("duplicate donor units")
        for u in raw.donor_units:
            panel.unit_index(u)
        donors = tuple(u for u in raw.donor_units if u not in raw.exclusions)
    if len(donors) < 2:
        raise DonorPoolTooSmall(len(donors))

    units = (raw.treated_unit, *donors)
    outcome_window = (raw.pre_window[0], raw.post_window[1])
    _require(panel, units, raw.outcome, outcome_window)
    for p in raw.predictors:
        _require(panel, units, p.variable, p.window)
    return replace(raw, donor_units=donors)


def _require(panel: Panel, units, variable: str, window) -> None:
    holes = missing_cells(panel, list(units), variable, window)
    if holes:
        unit = holes[0][0]
        years = [t for u, t in holes if u == unit]
        raise CoverageError(variable, unit, (min(years), max(years)))


@dataclass(frozen=True, eq=False)
class PredictorBlock:
    """Standardized predictors and raw pre-period outcomes.

    Columns of ``X0``/``Z0`` follow the donor order of the resolved spec.
    """

    X1: np.ndarray
    X0: np.ndarray
    Z1: np.ndarray
    Z0: np.ndarray
    scale: np.ndarray
    labels: tuple[str, ...] = field(default=())

    @property
    def K(self) -> int:
        return self.X0.shape[0]

    @property
    def J(self) -> int:
        return self.X0.shape[1]


def raw_predictors(spec: StudySpec, panel: Panel) -> np.ndarray:
    """K x (J+1) matrix of window means; column 0 is the treated unit."""
    units = [spec.treated_unit, *spec.donors]
    return np.array([panel.block(units, p.variable, p.window).mean(axis=1)
                     for p in spec.predictors])


def build_matrices(spec: StudySpec, panel: Panel) -> PredictorBlock:
    raw = raw_predictors(spec, panel)
    for k, row in enumerate(raw):
        if np.ptp(row) == 0.0:
            raise ZeroVariancePredictor(k, spec.predictors[k].label)
    scale = raw.std(axis=1, ddof=1)
    std = raw / scale[:, None]
    Z = panel.block([spec.treated_unit, *spec.donors], spec.outcome, spec.pre_window)
    block = PredictorBlock(
        X1=std[:, 0].copy(),
        X0=std[:, 1:].copy(),
        Z1=Z[0].copy(),
        Z0=Z[1:].T.copy(),
        scale=scale,
        labels=tuple(p.label for p in spec.predictors),
    )
    for name in ("X1", "X0", "Z1", "Z0"):
        if not np.isfinite(getattr(block, name)).all():
            raise CoverageError(spec.outcome, spec.treated_unit, spec.pre_window)
    return block


def outcome_paths(spec: StudySpec, panel: Panel) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Years of pre+post, treated outcome path, and donor paths (T x J)."""
    window = (spec.pre_window[0], spec.post_window[1])
    Y = panel.block([spec.treated_unit, *spec.donors], spec.outcome, window)
    years = list(range(window[0], window[1] + 1))
    return years, Y[0], Y[1:].T


def study_units(spec: StudySpec) -> Sequence[str]:
    return (spec.treated_unit, *spec.donors)
