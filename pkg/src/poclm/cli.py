"""Command line entry point: ``poclm fit|region|test|simulate``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 a fit did not
converge (outputs are still written), 5 experiment failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .estimation import ConvergenceError, FitOptions, Target
from .inference import (
    KINDS,
    NO_P_VALUE,
    Fits,
    RegionSpec,
    classify_case,
    cr_grid,
    test_direction,
    test_monotonicity,
    test_no_effect,
    test_non_monotonicity,
)
from .io import (
    HYPOTHESES,
    ConfigError,
    DataError,
    RunConfig,
    estimates_csv,
    fit_report,
    load_data,
    load_yaml,
    read_estimates,
)
from .simulation import ExperimentConfig, coverage_experiment, rejection_experiment

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_FIT, EXIT_EXPERIMENT = 0, 2, 3, 4, 5

log = logging.getLogger("poclm")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="YAML config file, or the name of a bundled config")
    p.add_argument("--data", help="CSV file overriding the config's data path")
    p.add_argument("--out", help="output directory (default: the config's output entry)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--level", type=float, help="confidence level (default 0.95)")
    p.add_argument("--df", type=int, help="degrees of freedom of the chi-squared reference")
    p.add_argument("--kind", choices=KINDS, help="region kind used for membership and decisions")
    p.add_argument("--mixture", action="store_true", default=None,
                   help="use the 50:50 chi-squared mixture quantile for constrained regions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poclm", description=(
        "Proportional odds cumulative logit models with monotonicity constraints on ordinal predictors."))
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit UMLE and CMLE, write report.txt and estimates.csv")
    _common(p)
    p.add_argument("--init", help="estimates CSV whose UMLE and CMLE columns seed the optimizers")

    p = sub.add_parser("region", help="evaluate a confidence region grid and write it as CSV")
    _common(p)
    p.add_argument("--variable", help="predictor whose coefficient block is the target")
    p.add_argument("--contrast", action="append", metavar="LEVEL=COEF,...",
                   help="one contrast row within --variable's block, e.g. High=1,Medium=-1 (repeatable)")

    p = sub.add_parser("test", help="run one hypothesis test and print the decision")
    _common(p)
    p.add_argument("--variable", help="predictor under test")
    p.add_argument("--hypothesis", choices=HYPOTHESES)
    p.add_argument("--direction", choices=("iso", "anti"), help="direction under the null (direction test)")

    p = sub.add_parser("simulate", help="run a coverage and/or rejection experiment")
    p.add_argument("--config", required=True, help="experiment YAML, or the name of a bundled one")
    p.add_argument("--out", help="output directory (default: the experiment name)")
    p.add_argument("--seed", type=int, help="master seed overriding the config")
    p.add_argument("--replicates", type=int, help="replicates per sample size overriding the config")
    return parser


def _run_config(args) -> RunConfig:
    doc = load_yaml(args.config)
    inf = dict(doc.get("inference") or {})
    for key in ("level", "df", "kind", "mixture"):
        val = getattr(args, key, None)
        if val is not None:
            inf[key] = val
    doc["inference"] = inf
    if args.seed is not None:
        doc["seed"] = args.seed
    cfg = RunConfig.from_dict(doc)
    if args.data is not None:
        cfg = replace(cfg, data=Path(args.data))
    if args.out is not None:
        cfg = replace(cfg, output=Path(args.out))
    if cfg.data is None:
        raise ConfigError("no data file given (config 'data' entry or --data)")
    return cfg


def _fits(cfg: RunConfig, init=None) -> Fits:
    data = load_data(cfg.data, cfg.spec)
    if np.any(data.response_counts() == 0):
        empty = [lv for lv, c in zip(cfg.spec.response_levels, data.response_counts()) if c == 0]
        raise DataError(f"response categories {empty} are never observed")
    opts = cfg.fit_options
    if init is not None:
        opts = FitOptions(**{**opts.__dict__, "init": init[0], "init_constrained": init[1]})
    log.info("fitting %d observations", data.n)
    return Fits.compute(data, opts)


def cmd_fit(args) -> int:
    cfg = _run_config(args)
    init = None if args.init is None else (read_estimates(args.init, cfg.spec),
                                           read_estimates(args.init, cfg.spec, "cmle"))
    fits = _fits(cfg, init)
    cfg.output.mkdir(parents=True, exist_ok=True)
    report = fit_report(fits.umle, fits.cmle, cfg.level)
    (cfg.output / "report.txt").write_text(report, encoding="utf-8")
    (cfg.output / "estimates.csv").write_text(estimates_csv(fits.umle, fits.cmle, cfg.level), encoding="utf-8")
    sys.stdout.write(report)
    print(f"wrote {cfg.output / 'report.txt'} and {cfg.output / 'estimates.csv'}")
    if not fits.converged:
        print("error: fit did not converge; see the flags in the report", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _parse_contrast(text: str) -> dict:
    row = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"contrast term {part!r} is not LEVEL=COEF")
        lev, coef = part.rsplit("=", 1)
        try:
            row[lev.strip()] = row.get(lev.strip(), 0.0) + float(coef)
        except ValueError:
            raise ConfigError(f"contrast coefficient {coef!r} is not a number") from None
    return row


def _target(cfg: RunConfig, variable, contrasts) -> Target:
    variable = variable or cfg.region.get("variable")
    if variable is None:
        raise ConfigError("region needs a variable (--variable or region.variable)")
    names = {p.name for p in cfg.spec.predictors}
    if variable not in names:
        raise ConfigError(f"variable {variable!r} is not a declared predictor")
    if contrasts:
        rows = [_parse_contrast(c) for c in contrasts]
    else:
        rows = cfg.region.get("contrasts")
    try:
        if rows:
            return Target.contrast(cfg.spec, variable, rows)
        return Target.block(cfg.spec, variable)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def cmd_region(args) -> int:
    cfg = _run_config(args)
    target = _target(cfg, args.variable, args.contrast)
    try:
        region = RegionSpec(target, cfg.kind or "acr", cfg.level, cfg.df, cfg.grid, cfg.mixture,
                            cfg.grid_points, cfg.grid_width)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    fits = _fits(cfg)
    try:
        grid = cr_grid(region, fits)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    cfg.output.mkdir(parents=True, exist_ok=True)
    stem = "region_" + "".join(c if c.isalnum() else "_" for c in (target.predictor or "target"))
    if target.C.shape[0] and not target.is_block_selection:
        stem += "_contrast"
    path = cfg.output / f"{stem}.csv"
    grid.to_csv(path)
    counts = grid.counts()
    print(f"target: {', '.join(target.labels)}  df={region.dof}  level={region.level}")
    print("members: " + "  ".join(f"{k}={counts[k]}" for k in (*KINDS, "points", "indeterminate")))
    ccr_only = int(np.sum(grid.members("ccr") & ~grid.members("uccr")))
    print(f"CCR outside UCCR: {ccr_only}")
    if target.is_block_selection and len(target.blocks) == 1:
        try:
            case = classify_case(fits, grid)
            print(f"case {case.case}" + ("  (low confidence: indeterminate points above 1%)"
                                         if case.low_confidence else ""))
        except ValueError:
            pass
    print(f"wrote {path}")
    return EXIT_OK if fits.converged else EXIT_FIT


def cmd_test(args) -> int:
    cfg = _run_config(args)
    variable = args.variable or cfg.test.get("variable")
    hyp = args.hypothesis or cfg.test.get("hypothesis")
    direction = args.direction or cfg.test.get("direction")
    if variable is None or hyp is None:
        raise ConfigError("test needs a variable and a hypothesis")
    if variable not in {p.name for p in cfg.spec.ordinal}:
        raise ConfigError(f"{variable!r} is not a declared ordinal predictor")
    if hyp == "direction" and direction is None:
        raise ConfigError("the direction test needs --direction iso|anti")
    fits = _fits(cfg)
    explicit_kind = cfg.kind
    if hyp == "no-effect":
        res = test_no_effect(fits, variable, cfg.level, explicit_kind or "uccr", cfg.df, cfg.mixture)
    elif hyp == "monotonicity":
        res = test_monotonicity(fits, variable, cfg.level, explicit_kind or "uccr", cfg.df)
    elif hyp == "non-monotonicity":
        res = test_non_monotonicity(fits, variable, cfg.level, cfg.df)
    else:
        res = test_direction(fits, variable, direction, cfg.level, explicit_kind or "ccr", cfg.df, cfg.mixture)
    null = hyp + (f" ({res.direction})" if hyp == "direction" else "")
    print(f"variable:   {variable}")
    print(f"hypothesis: {null}")
    print(f"decision:   {res.decision} at level {res.level}")
    print(f"statistic:  {res.statistic:.5f}")
    print(f"threshold:  {res.threshold:.5f}")
    print(f"df:         {res.df}")
    print(f"kind:       {res.kind}")
    if hyp == "no-effect" and res.p_value is not None:
        print(f"p-value:    {res.p_value:.5g}")
    else:
        print(f"p-value:    {NO_P_VALUE}")
    if res.note and res.note != NO_P_VALUE:
        print(f"note:       {res.note}")
    return EXIT_OK if fits.converged else EXIT_FIT


def cmd_simulate(args) -> int:
    doc = load_yaml(args.config)
    doc.pop("_base", None)
    experiment = str(doc.get("experiment", "both")).lower()
    if experiment not in ("coverage", "rejection", "both"):
        raise ConfigError("experiment must be coverage, rejection or both")
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.replicates is not None:
        doc["replicates"] = args.replicates
    try:
        config = ExperimentConfig.from_dict(doc)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid experiment config: {err}") from None
    out = Path(args.out or config.name)
    out.mkdir(parents=True, exist_ok=True)
    echo = {**config.to_dict(), "experiment": experiment}
    (out / "config_echo.yaml").write_text(yaml.safe_dump(echo, sort_keys=False), encoding="utf-8")
    runs = []
    if experiment in ("coverage", "both"):
        runs.append(("coverage", coverage_experiment))
    if experiment in ("rejection", "both"):
        runs.append(("rejection", rejection_experiment))
    for label, fn in runs:
        log.info("running %s experiment", label)
        try:
            report = fn(config)
        except Exception as err:  # noqa: BLE001 - any failure inside a run maps to one exit code
            print(f"error: {label} experiment failed: {err}", file=sys.stderr)
            return EXIT_EXPERIMENT
        stem = out / f"{config.name}_{label}"
        Path(f"{stem}.csv").write_text(report.to_csv(), encoding="utf-8")
        Path(f"{stem}.txt").write_text(report.to_text(), encoding="utf-8")
        Path(f"{stem}_diagnostics.csv").write_text(report.diagnostics_csv(), encoding="utf-8")
        sys.stdout.write(report.to_text())
        if all(d["used"] == 0 for d in report.diagnostics.values()):
            print(f"error: every replicate of the {label} experiment was excluded", file=sys.stderr)
            return EXIT_EXPERIMENT
    print(f"seed {config.seed}; outputs in {out}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "region": cmd_region, "test": cmd_test, "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as err:
        print(f"fit error: {err}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
