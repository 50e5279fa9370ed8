"""Command-line entry points for the analysis pipeline.

Each subcommand runs one stage against a JSON config file (flags override
individual config keys) and writes its artifacts plus a manifest into the
output directory. Exit codes: 0 success, 1 validation error, 2 runtime
error, 3 conditions not met (for example, an exhausted caliper sweep).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import pipeline as pl
from .matcher import ConditionsNotMet

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_CONDITIONS = 3


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--output-dir", help="artifact directory (overrides config)")
    parser.add_argument("--input", help="input events file (overrides config)")


def _add_treatment(parser):
    parser.add_argument("--treatment-variable", choices=("comments", "score"))
    parser.add_argument("--cutoff", type=int)
    parser.add_argument("--include-self-comments", action="store_true", default=None)


def _add_selector(parser):
    parser.add_argument("--lambda-grid", help="comma-separated penalty values")
    parser.add_argument("--cv-folds", type=int)
    parser.add_argument("--cv-seed", type=int)
    parser.add_argument("--sparsity-tolerance", type=float)


def _add_matcher(parser):
    parser.add_argument("--caliper", type=float)
    parser.add_argument("--caliper-sweep", metavar="START:STEP:STOP")
    parser.add_argument("--min-pairs", type=int)


def _add_diagnostics(parser):
    parser.add_argument("--permutations", type=int)
    parser.add_argument("--perm-seed", type=int)
    parser.add_argument("--perm-mode", choices=("global", "paired"))
    parser.add_argument("--statistic", choices=("eate", "absdiff", "median-ratio"))
    parser.add_argument("--outcome", help="cohort column used as the outcome")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="obsmatch",
        description="matched observational studies from event logs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("ingest", "validate and summarize an events file"),
        ("cohort", "build the study cohort with treatment labels and outcomes"),
        ("features", "featurize first posts (or standardize synthetic covariates)"),
        ("select", "cross-validated covariate selection"),
        ("match", "nearest-control matching at a caliper or swept caliper"),
        ("balance", "covariate balance before and after matching"),
        ("effect", "effect estimate with permutation significance"),
        ("mediate", "mediation decomposition over the matched sample"),
        ("synth", "generate a synthetic study with known ground truth"),
        ("pipeline", "run all stages in order"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name in ("cohort", "pipeline", "synth"):
            _add_treatment(p)
        if name in ("select", "pipeline"):
            _add_selector(p)
        if name in ("match", "pipeline"):
            _add_matcher(p)
        if name in ("effect", "mediate", "pipeline"):
            _add_diagnostics(p)
        if name == "pipeline":
            p.add_argument("--from", dest="from_stage", metavar="STAGE",
                           help="resume from this stage, reusing earlier artifacts")
            p.add_argument("--manifest", help="replay the config recorded in a manifest")
            p.add_argument("--cutoff-sweep", metavar="LO:HI",
                           help="additionally estimate the effect at each cutoff")
    return parser


def _apply_overrides(cfg_raw: dict, args) -> dict:
    cfg_raw = json.loads(json.dumps(cfg_raw))  # deep copy
    if getattr(args, "output_dir", None):
        cfg_raw["output_dir"] = args.output_dir
    if getattr(args, "input", None):
        cfg_raw["input"] = args.input
    sections = {
        "treatment": {
            "treatment_variable": "variable",
            "cutoff": "cutoff",
            "include_self_comments": "include_self_comments",
        },
        "selector": {
            "cv_folds": "folds",
            "cv_seed": "seed",
            "sparsity_tolerance": "sparsity_tolerance",
        },
        "matcher": {"caliper": "caliper", "min_pairs": "min_pairs"},
        "diagnostics": {
            "permutations": "permutations",
            "perm_seed": "seed",
            "perm_mode": "mode",
            "statistic": "statistic",
            "outcome": "outcome",
        },
    }
    for section, mapping in sections.items():
        for arg_name, key in mapping.items():
            value = getattr(args, arg_name, None)
            if value is not None:
                cfg_raw.setdefault(section, {})[key] = value
    if getattr(args, "lambda_grid", None):
        cfg_raw.setdefault("selector", {})["lambda_grid"] = [
            float(v) for v in args.lambda_grid.split(",")
        ]
    if getattr(args, "caliper_sweep", None):
        try:
            start, step, stop = (float(v) for v in args.caliper_sweep.split(":"))
        except ValueError:
            raise pl.ConfigError(
                "--caliper-sweep expects START:STEP:STOP"
            ) from None
        m = cfg_raw.setdefault("matcher", {})
        m.update({"sweep_start": start, "sweep_step": step, "sweep_stop": stop})
    return cfg_raw


def _load(args) -> dict:
    if getattr(args, "manifest", None):
        cfg = pl.load_manifest_config(args.manifest)
        return pl.validate_config(_apply_overrides(cfg, args))
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = {}
    return pl.validate_config(_apply_overrides(raw, args))


def _parse_cutoff_range(text):
    lo, _, hi = text.partition(":")
    try:
        return range(int(lo), int(hi) + 1)
    except ValueError:
        raise pl.ConfigError("--cutoff-sweep expects LO:HI integers") from None


def _dispatch(args) -> int:
    cfg = _load(args)
    command = args.command
    if command == "ingest":
        summary = pl.run_ingest(cfg)
        print(f"ingest: {summary['events']} events from {summary['users']} users")
    elif command == "cohort":
        cohort = pl.run_cohort(cfg)
        treated = len(cohort.treated())
        print(f"cohort: {len(cohort)} units ({treated} treated)")
    elif command == "features":
        schema = pl.run_features(cfg)
        print(f"features: {len(schema)} columns ({len(schema.dropped)} dropped)")
    elif command == "select":
        cv, selection = pl.run_select(cfg)
        print(
            f"select: lambda={cv.chosen_lambda:.6g} "
            f"keeps {len(selection.names)} covariates"
        )
    elif command == "match":
        match_set = pl.run_match(cfg)
        print(f"match: {match_set.n_pairs} pairs at caliper {match_set.caliper}")
    elif command == "balance":
        rows = pl.run_balance(cfg)
        print(f"balance: all {len(rows)} covariates balanced")
    elif command == "effect":
        report = pl.run_effect(cfg)
        print(
            f"effect: {report.estimator}={report.point_estimate:.4g} "
            f"p={report.p_value:.4g}{report.stars}"
        )
    elif command == "mediate":
        reports = pl.run_mediate(cfg)
        for r in reports:
            print(
                f"mediate: {r.mediator} z={r.sobel_z:.3f} p={r.sobel_p:.4g} "
                f"proportion={r.proportion_mediated:.4g}"
            )
    elif command == "synth":
        study = pl.run_synth(cfg)
        print(
            f"synth: {study.n_units} units, "
            f"{int(study.treatment.sum())} treated, seed {study.config.seed}"
        )
    elif command == "pipeline":
        sweep = None
        if getattr(args, "cutoff_sweep", None):
            sweep = _parse_cutoff_range(args.cutoff_sweep)
        ran = pl.run_pipeline(cfg, from_stage=args.from_stage, cutoff_sweep=sweep)
        print(f"pipeline: ran {', '.join(ran)}")
    else:  # pragma: no cover - argparse enforces choices
        raise pl.ConfigError(f"unknown command {command!r}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except pl.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConditionsNotMet as exc:
        print(f"conditions not met: {exc}", file=sys.stderr)
        return EXIT_CONDITIONS
    except Exception as exc:  # noqa: BLE001 - boundary: map to exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
