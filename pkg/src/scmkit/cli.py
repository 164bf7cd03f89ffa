"""Command-line entry point: ``scmkit fit|placebo|simulate``.

Exit codes: 0 success, 1 configuration or I/O error, 2 data or coverage
error, 3 numerical verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .errors import ConfigError, InvalidConfig, OracleMismatch, ScmError
from .inference import CRITERIA, gap_series, run_placebos
from .panel import load_panel, write_panel
from .report import (
    build_report,
    gaps_csv,
    gaps_svg,
    oracle_check_dict,
    placebo_gaps_csv,
    placebo_summary_csv,
    placebos_svg,
    weights_csv,
)
from .simlab import default_study, generate_panel, load_sim_config, recovery_report
from .solver import brute_force_inner, fit, inner_objective, solve_inner
from .study import StudySpec, dump_spec, load_spec

log = logging.getLogger("scmkit")


def _write(out: Path, name: str, text: str) -> None:
    with open(out / name, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _outdir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def _load_inputs(args) -> tuple[StudySpec, object]:
    spec = load_spec(args.config)
    overrides = {}
    if getattr(args, "v_strategy", None):
        overrides["v_strategy"] = args.v_strategy
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        spec = replace(spec, **overrides)
    try:
        panel = load_panel(args.panel)
    except OSError as exc:
        raise ConfigError(f"cannot read panel {args.panel}: {exc}") from None
    return spec, panel


def _oracle_check(f, resolution: float) -> dict:
    b = f.block
    w = solve_inner(b.X1, b.X0, f.v)
    wo = brute_force_inner(b.X1, b.X0, f.v, resolution)
    res = oracle_check_dict(resolution, inner_objective(b.X1, b.X0, f.v, w),
                            inner_objective(b.X1, b.X0, f.v, wo), wo, f.donors)
    log.info("oracle check: solver - oracle objective = %s", res["gap"])
    return res


def cmd_fit(args) -> int:
    spec, panel = _load_inputs(args)
    out = _outdir(args.out)
    f = fit(spec, panel)
    oracle = _oracle_check(f, args.oracle_check) if args.oracle_check else None
    report = build_report(f, gap_series(f, panel), oracle_check=oracle)
    _write(out, "weights.csv", weights_csv(report))
    _write(out, "gaps.csv", gaps_csv(report))
    _write(out, "report.json", report.to_json())
    _write(out, "gaps.svg", gaps_svg(report))
    if oracle is not None and not oracle["passed"]:
        raise OracleMismatch(
            f"OracleMismatch: solver objective exceeds oracle by {oracle['gap']}")
    return 0


def cmd_placebo(args) -> int:
    spec, panel = _load_inputs(args)
    out = _outdir(args.out)
    f = fit(spec, panel)
    ps = run_placebos(f.spec, panel, filter_k=args.filter_k, treated_fit=f)
    report = build_report(f, gap_series(f, panel), placebos=ps, criterion=args.criterion)
    _write(out, "placebo_gaps.csv", placebo_gaps_csv(report))
    _write(out, "placebo_summary.csv", placebo_summary_csv(report))
    _write(out, "placebos.svg", placebos_svg(report))
    _write(out, "report.json", report.to_json())
    return 0


def cmd_simulate(args) -> int:
    if args.reps < 1:
        raise InvalidConfig("InvalidConfig: --reps must be >= 1")
    cfg = load_sim_config(args.sim_config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out = _outdir(args.out)
    panel, truth = generate_panel(cfg)
    write_panel(panel, out / "panel.csv")
    _write(out, "ground_truth.json",
           json.dumps(truth.to_dict(), sort_keys=True, indent=2) + "\n")
    dump_spec(default_study(cfg), out / "study.json")
    if args.reps > 1:
        rep = recovery_report(cfg, args.reps, placebos=not args.no_placebos)
        _write(out, "recovery.csv", rep.to_csv())
        _write(out, "recovery_summary.json",
               json.dumps(rep.summary(), sort_keys=True, indent=2) + "\n")
    return 0


def _positive_float(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return x


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scmkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"scmkit {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def study_args(sp):
        sp.add_argument("--config", required=True, help="study config JSON")
        sp.add_argument("--panel", required=True, help="long-format panel CSV")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--v-strategy", choices=("equal", "nested"))
        sp.add_argument("--seed", type=int)

    f = sub.add_parser("fit", help="fit the synthetic control")
    study_args(f)
    f.add_argument("--oracle-check", type=_positive_float, metavar="RESOLUTION",
                   help="verify the inner solver against the grid oracle")
    f.set_defaults(func=cmd_fit)

    pl = sub.add_parser("placebo", help="in-space placebo inference")
    study_args(pl)
    pl.add_argument("--filter-k", type=_positive_float,
                    help="drop placebos with pre-MSPE above k x the treated unit's")
    pl.add_argument("--criterion", choices=CRITERIA, default="rmspe_ratio")
    pl.set_defaults(func=cmd_placebo)

    s = sub.add_parser("simulate", help="generate a seeded synthetic panel")
    s.add_argument("--sim-config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--no-placebos", action="store_true",
                   help="skip placebo fits in the recovery table")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except ScmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
