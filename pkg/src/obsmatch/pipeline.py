"""Stage orchestration: configs, on-disk artifacts and manifests.

Each stage reads its upstream artifacts from the output directory, writes
its own, and records a manifest with the resolved config, a config hash
and input hashes. All randomness flows through seeds in the config, so
re-running a stage with unchanged inputs reproduces its artifacts byte for
byte (manifests record a timestamp, which is the one excluded field).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import corpus as corpus_mod
from . import diagnostics as diag
from . import selector as sel
from . import synthgen
from .matcher import (
    ConditionsNotMet,
    MatchedPair,
    MatchSet,
    SweepConditions,
    match_one_to_many,
    sweep_caliper,
)
from .textfeat import (
    Lexicon,
    build_feature_matrix,
    lda_fit,
    save_topic_model,
    tokenize,
)
from .textfeat.features import FeatureFrame, standardize_matrix

STAGES = ("ingest", "cohort", "features", "select", "match", "balance",
          "effect", "mediate")

_COHORT_COLUMNS = (
    "user", "first_post_id", "treatment", "comment_count", "score",
    "returned", "weight_loss_lb", "lifespan_days", "activity_count",
    "loss_rate_lb_per_day", "badge_update_count", "outcome", "intensity",
    "mediator",
)


class ConfigError(ValueError):
    """Invalid or incomplete configuration; nothing was run."""


class MissingArtifactError(ConfigError):
    """A stage was invoked before the stage that produces its input."""


# ---------------------------------------------------------------------------
# config handling

_DEFAULTS = {
    "treatment": {
        "variable": "comments", "cutoff": 4, "include_self_comments": False,
        "group": "G2", "weight_mode": "last",
    },
    "features": {
        "source": "auto", "topics": 20, "iterations": 2000, "alpha": 0.4,
        "beta": 0.1, "seed": 7, "infer_iterations": 64, "lexicon": None,
        "question_mode": "aggregate",
    },
    "selector": {
        "lambda_grid": None, "grid_size": 50, "grid_ratio": 1e-3,
        "folds": 10, "seed": 11, "sparsity_tolerance": 0.01,
        "tolerance": 1e-7, "max_iterations": 10_000,
    },
    "matcher": {
        "caliper": None, "sweep_start": 0.9, "sweep_step": 0.005,
        "sweep_stop": 0.995, "min_pairs": 1, "smd_threshold": 0.1,
        "require_significance": False, "alpha": 0.05,
    },
    "diagnostics": {
        "permutations": 10_000, "seed": 13, "mode": "paired",
        "statistic": "absdiff", "outcome": "weight_loss_lb",
        "mediators": [],
    },
    "synth": {},
}


def _merged(config: dict) -> dict:
    out = {"input": config.get("input"), "output_dir": config.get("output_dir")}
    for section, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        extra = config.get(section, {})
        if not isinstance(extra, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        unknown = set(extra) - set(defaults) if defaults else set()
        if unknown and section != "synth":
            raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
        merged.update(extra)
        out[section] = merged
    return out


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    return validate_config(raw)


def validate_config(config: dict) -> dict:
    cfg = _merged(config)
    if not cfg.get("output_dir"):
        raise ConfigError("config must set output_dir")
    t = cfg["treatment"]
    if t["variable"] not in ("comments", "score"):
        raise ConfigError("treatment.variable must be 'comments' or 'score'")
    if int(t["cutoff"]) < 1:
        raise ConfigError("treatment.cutoff must be at least 1")
    if cfg["features"]["source"] not in ("auto", "text", "covariates"):
        raise ConfigError("features.source must be auto, text or covariates")
    d = cfg["diagnostics"]
    if d["mode"] not in ("paired", "global"):
        raise ConfigError("diagnostics.mode must be 'paired' or 'global'")
    if d["statistic"] not in diag.STATISTICS:
        raise ConfigError(f"diagnostics.statistic must be one of {diag.STATISTICS}")
    for path_key, where in (("input", cfg.get("input")),
                            ("features.lexicon", cfg["features"]["lexicon"])):
        if where is not None and not os.path.exists(where):
            raise ConfigError(f"{path_key} path does not exist: {where}")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


# ---------------------------------------------------------------------------
# deterministic readers/writers

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_table(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_table(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _artifact(cfg, name):
    return os.path.join(cfg["output_dir"], name)


def _require(cfg, name, produced_by):
    path = _artifact(cfg, name)
    if not os.path.exists(path):
        raise MissingArtifactError(
            f"{name} not found in {cfg['output_dir']}; run the {produced_by!r} stage first"
        )
    return path


def write_manifest(cfg, stage, inputs, outputs):
    manifest = {
        "stage": stage,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "inputs": {os.path.basename(p): _sha256_file(p) for p in inputs},
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seeds": {
            "features": cfg["features"]["seed"],
            "selector": cfg["selector"]["seed"],
            "diagnostics": cfg["diagnostics"]["seed"],
            "synth": cfg["synth"].get("seed"),
        },
    }
    path = _artifact(cfg, f"manifest_{stage}.json")
    write_json(path, manifest)
    return path


def load_manifest_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if "config" not in manifest:
        raise ConfigError(f"{path} does not look like a manifest")
    return validate_config(manifest["config"])


# ---------------------------------------------------------------------------
# corpus-backed stages

def _parse_optional_float(text):
    return float(text) if text != "" else None


def run_ingest(cfg):
    if not cfg.get("input"):
        raise ConfigError("ingest needs an input events file")
    corpus = corpus_mod.load_events(cfg["input"])
    os.makedirs(cfg["output_dir"], exist_ok=True)
    summary = {
        "events": len(corpus),
        "users": len(corpus.by_user),
        "self_posts": corpus.counts["self_post"],
        "link_posts": corpus.counts["link_post"],
        "comments": corpus.counts["comment"],
    }
    out = _artifact(cfg, "corpus_summary.json")
    write_json(out, summary)
    write_manifest(cfg, "ingest", [cfg["input"]], [out])
    return summary


def run_cohort(cfg):
    if not cfg.get("input"):
        raise ConfigError("cohort needs an input events file")
    corpus = corpus_mod.load_events(cfg["input"])
    t = cfg["treatment"]
    variable = "comment_count" if t["variable"] == "comments" else "score"
    cohort = corpus_mod.build_cohort(
        corpus,
        group=t["group"],
        variable=variable,
        cutoff=int(t["cutoff"]),
        include_self_comments=bool(t["include_self_comments"]),
        weight_mode=t["weight_mode"],
    )
    os.makedirs(cfg["output_dir"], exist_ok=True)
    rows = []
    for u in cohort.units:
        rows.append([
            u.user, u.first_post.event_id, u.treatment, u.comment_count,
            u.score, u.returned, u.weight_loss_lb, u.lifespan_days,
            u.activity_count, u.loss_rate_lb_per_day, u.badge_update_count,
            u.weight_loss_lb, None, None,
        ])
    out = _artifact(cfg, "cohort.csv")
    write_table(out, _COHORT_COLUMNS, rows)
    write_manifest(cfg, "cohort", [cfg["input"]], [out])
    return cohort


@dataclass
class CohortTable:
    users: list
    treatment: dict
    columns: dict  # name -> {user: value or None}

    def outcome_map(self, name):
        col = self.columns[name]
        return dict(col)


def load_cohort_table(cfg) -> CohortTable:
    path = _require(cfg, "cohort.csv", "cohort")
    header, rows = read_table(path)
    idx = {name: i for i, name in enumerate(header)}
    users = [r[idx["user"]] for r in rows]
    treatment = {r[idx["user"]]: int(r[idx["treatment"]]) for r in rows}
    columns = {}
    for name in header:
        if name in ("user", "first_post_id"):
            continue
        col = {}
        for r in rows:
            raw = r[idx[name]]
            if name in ("returned",):
                col[r[idx["user"]]] = raw == "true"
            else:
                col[r[idx["user"]]] = _parse_optional_float(raw)
        columns[name] = col
    return CohortTable(users=users, treatment=treatment, columns=columns)


def _first_post_texts(cfg, users):
    corpus = corpus_mod.load_events(cfg["input"])
    texts = []
    for user in users:
        events = corpus.user_events(user)
        if not events:
            raise ConfigError(f"user {user!r} from cohort.csv is absent from the input")
        texts.append(events[0].text())
    return texts


def run_features(cfg):
    table = load_cohort_table(cfg)
    os.makedirs(cfg["output_dir"], exist_ok=True)
    f = cfg["features"]
    source = f["source"]
    covariates_path = _artifact(cfg, "covariates.csv")
    if source == "auto":
        source = "covariates" if os.path.exists(covariates_path) else "text"

    inputs = [_artifact(cfg, "cohort.csv")]
    outputs = []
    if source == "covariates":
        header, rows = read_table(covariates_path)
        users = [r[0] for r in rows]
        if users != table.users:
            raise ConfigError("covariates.csv rows do not align with cohort.csv")
        raw = np.array([[float(v) for v in r[1:]] for r in rows])
        names = header[1:]
        schema, matrix = standardize_matrix(raw, names, ["covariate"] * len(names))
        inputs.append(covariates_path)
    else:
        if not cfg.get("input"):
            raise ConfigError("text featurization needs an input events file")
        if not f["lexicon"]:
            raise ConfigError("text featurization needs features.lexicon")
        texts = _first_post_texts(cfg, table.users)
        lexicon = Lexicon.from_file(f["lexicon"])
        model = lda_fit(
            [tokenize(t) for t in texts],
            n_topics=int(f["topics"]),
            iterations=int(f["iterations"]),
            alpha=float(f["alpha"]),
            beta=float(f["beta"]),
            seed=int(f["seed"]),
        )
        model_path = _artifact(cfg, "topic_model.json")
        save_topic_model(model, model_path)
        outputs.append(model_path)
        schema, matrix = build_feature_matrix(
            texts, model, lexicon,
            infer_iterations=int(f["infer_iterations"]),
            question_mode=f["question_mode"],
        )
        inputs.extend([cfg["input"], f["lexicon"]])

    features_path = _artifact(cfg, "features.csv")
    write_table(
        features_path,
        ["user"] + schema.names,
        [[user] + list(matrix[i]) for i, user in enumerate(table.users)],
    )
    schema_path = _artifact(cfg, "feature_schema.json")
    write_json(schema_path, {
        "source": source,
        "columns": [
            {"name": c.name, "kind": c.kind, "mean": c.mean, "sd": c.sd}
            for c in schema.columns
        ],
        "dropped": schema.dropped,
    })
    outputs.extend([features_path, schema_path])
    write_manifest(cfg, "features", inputs, outputs)
    return schema


def load_feature_frame(cfg) -> FeatureFrame:
    path = _require(cfg, "features.csv", "features")
    header, rows = read_table(path)
    ids = [r[0] for r in rows]
    matrix = np.array([[float(v) for v in r[1:]] for r in rows])
    return FeatureFrame(ids=ids, names=header[1:], matrix=matrix)


def run_select(cfg):
    table = load_cohort_table(cfg)
    frame = load_feature_frame(cfg)
    s = cfg["selector"]
    y = np.array([table.treatment[u] for u in frame.ids], dtype=np.float64)
    grid = s["lambda_grid"]
    if grid is None:
        grid = sel.default_lambda_grid(
            frame.matrix, y, size=int(s["grid_size"]), ratio=float(s["grid_ratio"])
        )
    cv = sel.cross_validate(
        frame.matrix, y,
        lambda_grid=np.asarray(grid, dtype=np.float64),
        folds=int(s["folds"]),
        seed=int(s["seed"]),
        sparsity_tolerance=float(s["sparsity_tolerance"]),
        tol=float(s["tolerance"]),
        max_iterations=int(s["max_iterations"]),
        feature_names=frame.names,
    )
    selection = sel.select_covariates(cv.model)
    coef_path = _artifact(cfg, "coefficients.csv")
    write_table(
        coef_path,
        ["covariate", "coefficient", "selected"],
        [
            [name, float(cv.model.coefficients[j]),
             abs(cv.model.coefficients[j]) > 1e-12]
            for j, name in enumerate(frame.names)
        ],
    )
    selection_path = _artifact(cfg, "selection.json")
    write_json(selection_path, {
        "chosen_lambda": cv.chosen_lambda,
        "mean_auc_at_chosen": float(cv.mean_auc[cv.chosen_index]),
        "best_mean_auc": float(cv.mean_auc.max()),
        "folds": cv.folds,
        "seed": cv.seed,
        "intercept": cv.model.intercept,
        "converged": cv.model.converged,
        "iterations_used": cv.model.iterations_used,
        "grid": [float(v) for v in cv.lambdas],
        "mean_auc": [float(v) for v in cv.mean_auc],
        "nonzero_counts": [int(v) for v in cv.nonzero_counts],
        "selected": {
            name: float(w) for name, w in zip(selection.names, selection.weights)
        },
    })
    write_manifest(
        cfg, "select",
        [_artifact(cfg, "cohort.csv"), _artifact(cfg, "features.csv")],
        [coef_path, selection_path],
    )
    return cv, selection


def load_selection(cfg) -> sel.CovariateSelection:
    path = _require(cfg, "selection.json", "select")
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    items = sorted(payload["selected"].items())
    return sel.CovariateSelection(
        names=[k for k, _ in items],
        weights=np.array([v for _, v in items]),
    )


def _split_frame(frame: FeatureFrame, treatment: dict, selection):
    cols = [frame.names.index(n) for n in selection.names]
    sub = frame.matrix[:, cols]
    t_rows = [i for i, u in enumerate(frame.ids) if treatment[u] == 1]
    c_rows = [i for i, u in enumerate(frame.ids) if treatment[u] == 0]
    treated_ids = [frame.ids[i] for i in t_rows]
    control_ids = [frame.ids[i] for i in c_rows]
    return treated_ids, sub[t_rows], control_ids, sub[c_rows]


def run_match(cfg):
    table = load_cohort_table(cfg)
    frame = load_feature_frame(cfg)
    selection = load_selection(cfg)
    m = cfg["matcher"]
    d = cfg["diagnostics"]
    treated_ids, tX, control_ids, cX = _split_frame(frame, table.treatment, selection)

    p_value_fn = None
    if m["require_significance"]:
        outcomes = _outcome_map(cfg, table)

        def p_value_fn(ms):
            return diag.permutation_test(
                ms, outcomes, statistic=d["statistic"],
                n_permutations=int(d["permutations"]), seed=int(d["seed"]),
                mode=d["mode"],
            ).p_value

    trace = []
    if m["caliper"] is not None:
        match_set = match_one_to_many(
            treated_ids, tX, control_ids, cX, selection.weights,
            float(m["caliper"]),
        )
        chosen = float(m["caliper"])
    else:
        result = sweep_caliper(
            treated_ids, tX, control_ids, cX, selection.weights,
            names=selection.names,
            start=float(m["sweep_start"]),
            step=float(m["sweep_step"]),
            stop=float(m["sweep_stop"]),
            conditions=SweepConditions(
                smd_threshold=float(m["smd_threshold"]),
                min_pairs=int(m["min_pairs"]),
                require_significance=bool(m["require_significance"]),
                alpha=float(m["alpha"]),
                p_value_fn=p_value_fn,
            ),
        )
        trace = result.trace
        trace_path = _artifact(cfg, "caliper_trace.csv")
        write_table(
            trace_path,
            ["caliper", "n_pairs", "max_abs_smd", "balanced", "enough_pairs"],
            [
                [d.caliper, d.n_pairs, d.max_abs_smd, d.balanced, d.enough_pairs]
                for d in trace
            ],
        )
        if not result.ok:
            raise ConditionsNotMet(
                "caliper sweep exhausted without meeting balance and size "
                f"conditions; see {trace_path}"
            )
        match_set = result.match_set
        chosen = result.caliper

    match_path = _artifact(cfg, "matchset.csv")
    write_table(
        match_path,
        ["treated_id", "control_id", "similarity"],
        [[p.treated_unit, p.control_unit, p.similarity] for p in match_set.pairs],
    )
    summary_path = _artifact(cfg, "match_summary.json")
    write_json(summary_path, {
        "caliper": chosen,
        "n_pairs": match_set.n_pairs,
        "n_unmatched_treated": len(match_set.unmatched_treated),
        "unmatched_treated": match_set.unmatched_treated,
        "unique_controls": len(set(match_set.control_ids())),
    })
    write_manifest(
        cfg, "match",
        [_artifact(cfg, "features.csv"), _artifact(cfg, "selection.json")],
        [match_path, summary_path],
    )
    return match_set


def load_match_set(cfg) -> MatchSet:
    path = _require(cfg, "matchset.csv", "match")
    with open(_require(cfg, "match_summary.json", "match"), "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    _, rows = read_table(path)
    pairs = [MatchedPair(r[0], r[1], float(r[2])) for r in rows]
    return MatchSet(
        caliper=float(summary["caliper"]),
        pairs=pairs,
        unmatched_treated=list(summary["unmatched_treated"]),
    )


def run_balance(cfg):
    table = load_cohort_table(cfg)
    frame = load_feature_frame(cfg)
    selection = load_selection(cfg)
    match_set = load_match_set(cfg)
    treated_ids = [u for u in frame.ids if table.treatment[u] == 1]
    control_ids = [u for u in frame.ids if table.treatment[u] == 0]
    rows = diag.balance_report(match_set, frame, selection, treated_ids, control_ids)
    out = _artifact(cfg, "balance.csv")
    write_table(
        out,
        ["covariate", "smd_before", "smd_after", "balanced"],
        [[r.covariate, r.smd_before, r.smd_after, r.balanced] for r in rows],
    )
    write_manifest(
        cfg, "balance",
        [_artifact(cfg, "matchset.csv"), _artifact(cfg, "features.csv")],
        [out],
    )
    if not all(r.balanced for r in rows):
        worst = max(rows, key=lambda r: abs(r.smd_after))
        raise ConditionsNotMet(
            f"matched sample is not balanced: {worst.covariate} has "
            f"|SMD| = {abs(worst.smd_after):.3f}"
        )
    return rows


def _outcome_map(cfg, table: CohortTable):
    name = cfg["diagnostics"]["outcome"]
    if name not in table.columns:
        raise ConfigError(f"cohort table has no outcome column {name!r}")
    return {u: v for u, v in table.columns[name].items()}


def run_effect(cfg):
    table = load_cohort_table(cfg)
    match_set = load_match_set(cfg)
    d = cfg["diagnostics"]
    report = diag.effect_report(
        match_set, _outcome_map(cfg, table),
        statistic=d["statistic"],
        n_permutations=int(d["permutations"]),
        seed=int(d["seed"]),
        mode=d["mode"],
    )
    out = _artifact(cfg, "effect.json")
    write_json(out, {
        "estimator": report.estimator,
        "outcome": d["outcome"],
        "point_estimate": report.point_estimate,
        "p_value": report.p_value,
        "stars": report.stars,
        "permutations": report.permutations,
        "exact": report.exact,
        "seed": report.seed,
        "mode": report.mode,
        "n_pairs": report.n_pairs,
    })
    write_manifest(
        cfg, "effect",
        [_artifact(cfg, "matchset.csv"), _artifact(cfg, "cohort.csv")],
        [out],
    )
    return report


def run_mediate(cfg):
    table = load_cohort_table(cfg)
    match_set = load_match_set(cfg)
    d = cfg["diagnostics"]
    mediators = d["mediators"]
    if not mediators:
        raise ConfigError("diagnostics.mediators is empty; nothing to test")
    outcomes = _outcome_map(cfg, table)
    reports = []
    for name in mediators:
        if name not in table.columns:
            raise ConfigError(f"cohort table has no mediator column {name!r}")
        med = table.columns[name]
        t_vals, m_vals, y_vals = [], [], []
        for pair in match_set.pairs:
            for uid, t in ((pair.treated_unit, 1.0), (pair.control_unit, 0.0)):
                if med.get(uid) is None or outcomes.get(uid) is None:
                    raise diag.DiagnosticsError(
                        f"missing mediator or outcome for unit {uid!r}"
                    )
                t_vals.append(t)
                m_vals.append(med[uid])
                y_vals.append(outcomes[uid])
        reports.append(diag.sobel_test(t_vals, m_vals, y_vals, mediator_name=name))
    out = _artifact(cfg, "mediation.json")
    write_json(out, {
        "outcome": d["outcome"],
        "mediators": [
            {
                "mediator": r.mediator,
                "path_a": r.path_a,
                "se_a": r.se_a,
                "path_b": r.path_b,
                "se_b": r.se_b,
                "sobel_z": r.sobel_z,
                "sobel_p": r.sobel_p,
                "total_effect": r.total_effect,
                "proportion_mediated":
                    None if math.isnan(r.proportion_mediated) else r.proportion_mediated,
                "n": r.n,
            }
            for r in reports
        ],
    })
    write_manifest(
        cfg, "mediate",
        [_artifact(cfg, "matchset.csv"), _artifact(cfg, "cohort.csv")],
        [out],
    )
    return reports


# ---------------------------------------------------------------------------
# synthetic studies

def synth_config_from_dict(raw: dict) -> synthgen.SynthConfig:
    mediation = raw.get("mediation")
    intensity = raw.get("intensity")
    return synthgen.SynthConfig(
        n_units=int(raw.get("n_units", 1000)),
        n_covariates=int(raw.get("n_covariates", 1)),
        treatment_weights=tuple(raw.get("treatment_weights", (1.0,))),
        outcome_weights=tuple(raw.get("outcome_weights", (1.0,))),
        true_effect=float(raw.get("true_effect", 0.0)),
        effect_sd=float(raw.get("effect_sd", 0.0)),
        outcome_noise_sd=float(raw.get("outcome_noise_sd", 1.0)),
        outcome_baseline=float(raw.get("outcome_baseline", 0.0)),
        mediation=synthgen.MediationPlan(**mediation) if mediation else None,
        intensity=synthgen.IntensityPlan(**intensity) if intensity else None,
        seed=int(raw.get("seed", 0)),
    )


def run_synth(cfg):
    """Generate a study and write it as downstream-stage artifacts.

    Emits cohort.csv and covariates.csv (so `--from features` continues the
    pipeline on the study's own covariates), the ground truth, and
    optionally an events file for the full text route.
    """
    if not cfg["synth"]:
        raise ConfigError("synth stage needs a 'synth' config section")
    study = synthgen.generate_study(synth_config_from_dict(cfg["synth"]))
    os.makedirs(cfg["output_dir"], exist_ok=True)

    rows = []
    for i, uid in enumerate(study.unit_ids):
        intensity = int(study.intensity[i]) if study.intensity is not None else None
        mediator = float(study.mediator[i]) if study.mediator is not None else None
        rows.append([
            uid, f"{uid}-post", int(study.treatment[i]),
            intensity if intensity is not None else 0, 0,
            True, None, 0, 1, None, 0,
            float(study.outcome[i]), intensity, mediator,
        ])
    cohort_path = _artifact(cfg, "cohort.csv")
    write_table(cohort_path, _COHORT_COLUMNS, rows)

    cov_path = _artifact(cfg, "covariates.csv")
    write_table(
        cov_path,
        ["user"] + study.covariate_names,
        [[uid] + list(study.covariates[i]) for i, uid in enumerate(study.unit_ids)],
    )
    truth_path = _artifact(cfg, "ground_truth.json")
    write_json(truth_path, {
        "true_effect": study.config.true_effect,
        "naive_difference": study.naive_difference(),
        "oracle_average_effect_on_treated": synthgen.oracle_true_effect(study),
        "n_treated": int(study.treatment.sum()),
        "n_control": int((1 - study.treatment).sum()),
        "seed": study.config.seed,
    })
    outputs = [cohort_path, cov_path, truth_path]
    if cfg["synth"].get("export_events"):
        events_path = _artifact(cfg, "events.jsonl")
        synthgen.export_events(
            study, events_path, cutoff=int(cfg["treatment"]["cutoff"])
        )
        outputs.append(events_path)
    write_manifest(cfg, "synth", [], outputs)
    return study


# ---------------------------------------------------------------------------
# in-memory study pipeline (covariates -> selection -> matching -> effect)

@dataclass
class StudyPipelineResult:
    cv: sel.CrossValidationResult
    selection: sel.CovariateSelection
    sweep: object
    match_set: MatchSet
    balance: list
    effect: diag.EffectReport
    naive_difference: float
    frame: FeatureFrame


def run_study_pipeline(study: synthgen.SynthStudy, *, treatment=None,
                       folds=10, cv_seed=11, sparsity_tolerance=0.01,
                       grid_size=50, grid_ratio=1e-3,
                       sweep_start=0.9, sweep_step=0.005, sweep_stop=0.995,
                       min_pairs=1, smd_threshold=0.1,
                       statistic="absdiff", permutations=10_000,
                       perm_seed=13, perm_mode="paired") -> StudyPipelineResult:
    """Standardize covariates, select, match at the swept caliper, estimate.

    `treatment` overrides the study's stored labels (used by cutoff sweeps).
    Raises ConditionsNotMet when no caliper satisfies the sweep conditions.
    """
    T = study.treatment if treatment is None else np.asarray(treatment, dtype=np.int64)
    if T.min() == T.max():
        raise ConfigError("treatment labels are all identical")
    names = study.covariate_names
    schema, Z = standardize_matrix(
        study.covariates, names, ["covariate"] * len(names)
    )
    frame = FeatureFrame(ids=study.unit_ids, names=schema.names, matrix=Z)
    y = T.astype(np.float64)
    cv = sel.cross_validate(
        Z, y,
        lambda_grid=sel.default_lambda_grid(Z, y, size=grid_size, ratio=grid_ratio),
        folds=folds, seed=cv_seed, sparsity_tolerance=sparsity_tolerance,
        feature_names=schema.names,
    )
    selection = sel.select_covariates(cv.model)
    treatment_map = {uid: int(T[i]) for i, uid in enumerate(study.unit_ids)}
    treated_ids, tX, control_ids, cX = _split_frame(frame, treatment_map, selection)
    sweep = sweep_caliper(
        treated_ids, tX, control_ids, cX, selection.weights,
        names=selection.names, start=sweep_start, step=sweep_step,
        stop=sweep_stop,
        conditions=SweepConditions(smd_threshold=smd_threshold, min_pairs=min_pairs),
    )
    if not sweep.ok:
        raise ConditionsNotMet("caliper sweep exhausted without balance")
    match_set = sweep.match_set
    balance = diag.balance_report(match_set, frame, selection, treated_ids, control_ids)
    outcomes = study.outcomes_by_id()
    effect = diag.effect_report(
        match_set, outcomes, statistic=statistic,
        n_permutations=permutations, seed=perm_seed, mode=perm_mode,
    )
    naive = float(
        study.outcome[T == 1].mean() - study.outcome[T == 0].mean()
    )
    return StudyPipelineResult(
        cv=cv, selection=selection, sweep=sweep, match_set=match_set,
        balance=balance, effect=effect, naive_difference=naive, frame=frame,
    )


@dataclass
class CutoffSweepRow:
    cutoff: int
    n_treated: int
    n_pairs: int
    estimate: float
    p_value: float
    band_halfwidth: float


def run_cutoff_sweep(study: synthgen.SynthStudy, cutoffs, *, band_q=0.975,
                     band_permutations=2000, **pipeline_kwargs):
    """Re-run the study pipeline at each feedback cutoff.

    The study must carry feedback intensities. Each row reports the effect
    estimate, its permutation p-value, and the permutation noise band
    half-width around the estimate.
    """
    if study.intensity is None:
        raise ConfigError("cutoff sweep needs a study with feedback intensities")
    rows = []
    for cutoff in cutoffs:
        T = (study.intensity >= cutoff).astype(np.int64)
        result = run_study_pipeline(study, treatment=T, **pipeline_kwargs)
        band = diag.permutation_null_quantile(
            result.match_set, study.outcomes_by_id(),
            statistic=result.effect.estimator,
            n_permutations=band_permutations,
            seed=result.effect.seed + 1,
            mode=result.effect.mode,
            q=band_q,
        )
        rows.append(CutoffSweepRow(
            cutoff=int(cutoff),
            n_treated=int(T.sum()),
            n_pairs=result.match_set.n_pairs,
            estimate=result.effect.point_estimate,
            p_value=result.effect.p_value,
            band_halfwidth=band,
        ))
    return rows


# ---------------------------------------------------------------------------
# full pipeline

def run_pipeline(cfg, from_stage=None, cutoff_sweep=None):
    """Chain the stages, optionally resuming after earlier artifacts."""
    order = list(STAGES)
    if from_stage is not None:
        if from_stage not in order:
            raise ConfigError(f"unknown stage {from_stage!r}")
        order = order[order.index(from_stage):]
    ran = []
    for stage in order:
        if stage == "ingest":
            run_ingest(cfg)
        elif stage == "cohort":
            run_cohort(cfg)
        elif stage == "features":
            run_features(cfg)
        elif stage == "select":
            run_select(cfg)
        elif stage == "match":
            run_match(cfg)
        elif stage == "balance":
            run_balance(cfg)
        elif stage == "effect":
            run_effect(cfg)
        elif stage == "mediate":
            if not cfg["diagnostics"]["mediators"]:
                continue
            run_mediate(cfg)
        ran.append(stage)
    if cutoff_sweep is not None:
        rows = run_cutoff_sweep_from_artifacts(cfg, cutoff_sweep)
        out = _artifact(cfg, "cutoff_sweep.csv")
        write_table(
            out,
            ["cutoff", "n_treated", "n_pairs", "estimate", "p_value",
             "band_halfwidth"],
            [[r.cutoff, r.n_treated, r.n_pairs, r.estimate, r.p_value,
              r.band_halfwidth] for r in rows],
        )
    write_manifest(cfg, "pipeline", [], [])
    return ran


def run_cutoff_sweep_from_artifacts(cfg, cutoffs):
    """Cutoff sweep over the on-disk cohort/features artifacts."""
    table = load_cohort_table(cfg)
    frame = load_feature_frame(cfg)
    d = cfg["diagnostics"]
    m = cfg["matcher"]
    s = cfg["selector"]
    variable = "comment_count" if cfg["treatment"]["variable"] == "comments" else "score"
    values = table.columns[variable]
    outcomes = table.columns[d["outcome"]]
    rows = []
    for cutoff in cutoffs:
        treatment = {u: 1 if (values[u] or 0) >= cutoff else 0 for u in frame.ids}
        y = np.array([treatment[u] for u in frame.ids], dtype=np.float64)
        if y.min() == y.max():
            raise ConditionsNotMet(f"cutoff {cutoff} leaves one group empty")
        cv = sel.cross_validate(
            frame.matrix, y,
            lambda_grid=sel.default_lambda_grid(
                frame.matrix, y, size=int(s["grid_size"]), ratio=float(s["grid_ratio"])),
            folds=int(s["folds"]), seed=int(s["seed"]),
            sparsity_tolerance=float(s["sparsity_tolerance"]),
            feature_names=frame.names,
        )
        selection = sel.select_covariates(cv.model)
        treated_ids, tX, control_ids, cX = _split_frame(frame, treatment, selection)
        sweep = sweep_caliper(
            treated_ids, tX, control_ids, cX, selection.weights,
            names=selection.names,
            start=float(m["sweep_start"]), step=float(m["sweep_step"]),
            stop=float(m["sweep_stop"]),
            conditions=SweepConditions(
                smd_threshold=float(m["smd_threshold"]),
                min_pairs=int(m["min_pairs"]),
            ),
        )
        if not sweep.ok:
            raise ConditionsNotMet(f"cutoff {cutoff}: caliper sweep exhausted")
        report = diag.effect_report(
            sweep.match_set, outcomes, statistic=d["statistic"],
            n_permutations=int(d["permutations"]), seed=int(d["seed"]),
            mode=d["mode"],
        )
        band = diag.permutation_null_quantile(
            sweep.match_set, outcomes, statistic=d["statistic"],
            n_permutations=min(int(d["permutations"]), 2000),
            seed=int(d["seed"]) + 1, mode=d["mode"],
        )
        rows.append(CutoffSweepRow(
            cutoff=int(cutoff),
            n_treated=int(y.sum()),
            n_pairs=sweep.match_set.n_pairs,
            estimate=report.point_estimate,
            p_value=report.p_value,
            band_halfwidth=band,
        ))
    return rows
