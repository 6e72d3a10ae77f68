"""Config-file-driven command line: the whole pipeline behind one binary.

Every subcommand reads one JSON config (``--config``), validates every
section before any work starts, and writes its artifacts atomically into
the configured output directory (overridable via ``CAPMOTION_OUT_DIR``).
A root ``seed`` is mandatory everywhere; all stage randomness flows from
it through named substreams, so identical config + seed reproduces every
output byte for byte (timestamps live only in ``provenance.json``).

Exit codes: 0 success, 2 invalid config, 3 data error, 4 numerical
failure.  Failures print one machine-readable JSON object to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .balance import SmoteConfig
from .errors import (
    CapmotionError,
    ConfigError,
    DataError,
    DomainError,
    NumericalError,
)
from .evaluation import EvalReport
from .features import WindowingConfig, features_matrix, slide_windows
from .ingest import PreprocessConfig, atomic_write_text, load_session, save_session
from .models import ForestConfig, LogRegConfig, save_model
from .pipeline import (
    RunConfig,
    count_sessions,
    run_fold_evaluation,
    run_pair_evaluation,
    run_random_split_evaluation,
    train_on_sessions,
)
from .report import (
    confusion_heatmap_svg,
    counting_summary_svg,
    provenance_record,
    text_summary,
    write_count_artifacts,
    write_eval_artifacts,
)
from .rng import substream
from .simulate import (
    default_gym_segments,
    default_leg7_segments,
    generate_collab_pair,
    generate_session,
)
from .types import Session

SUBCOMMANDS = ("simulate", "featurize", "train", "evaluate", "count",
               "pair-eval", "report")


# ---------------------------------------------------------------------------
# config plumbing

def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}", key="config")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}", key="config") from None
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object", key="config")
    return doc


def _check_keys(doc: Mapping, section: str, required: set[str],
                optional: set[str]) -> None:
    for k in sorted(required - doc.keys()):
        raise ConfigError(f"missing required key {k!r}",
                          key=f"{section}.{k}" if section else k)
    for k in sorted(doc.keys() - required - optional):
        raise ConfigError(f"unknown key {k!r}",
                          key=f"{section}.{k}" if section else k)


def _seed_of(doc: Mapping) -> int:
    if "seed" not in doc:
        raise ConfigError("a root seed is mandatory", key="seed")
    seed = doc["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer", key="seed")
    return seed


def _out_dir(doc: Mapping) -> Path:
    override = os.environ.get("CAPMOTION_OUT_DIR")
    if override:
        return Path(override)
    if "out_dir" not in doc:
        raise ConfigError("out_dir is required (or set CAPMOTION_OUT_DIR)",
                          key="out_dir")
    return Path(str(doc["out_dir"]))


def _section(doc: Mapping, name: str) -> Mapping:
    sec = doc.get(name, {})
    if not isinstance(sec, Mapping):
        raise ConfigError(f"section {name!r} must be an object", key=name)
    return sec


def _cfg(build: Callable[[], Any], section: str) -> Any:
    """Construct a config object, converting value errors to ConfigError."""
    try:
        return build()
    except DomainError as e:
        raise ConfigError(str(e), key=section) from None


def _windowing_from(doc: Mapping) -> WindowingConfig:
    sec = _section(doc, "windowing")
    _check_keys(sec, "windowing", set(), {"window_s", "step_s"})
    return _cfg(lambda: WindowingConfig(
        window_s=float(sec.get("window_s", 4.0)),
        step_s=float(sec.get("step_s", 2.0)),
    ), "windowing")


def _preprocess_from(doc: Mapping) -> PreprocessConfig | None:
    if "preprocess" not in doc:
        return None
    sec = _section(doc, "preprocess")
    _check_keys(sec, "preprocess", set(),
                {"detrend_mode", "hbc_anchor_class", "hbc_range_uv", "clip_quantiles"})
    return _cfg(lambda: PreprocessConfig(
        detrend_mode=sec.get("detrend_mode", "none"),
        hbc_anchor_class=sec.get("hbc_anchor_class"),
        hbc_range_uv=tuple(sec.get("hbc_range_uv", (-500.0, 500.0))),
        clip_quantiles=tuple(sec.get("clip_quantiles", (0.01, 0.99))),
    ), "preprocess")


def _balance_from(doc: Mapping, seed: int) -> tuple[SmoteConfig | None, bool]:
    sec = _section(doc, "balance")
    _check_keys(sec, "balance", set(), {"smote", "window_weights"})
    smote_cfg = None
    if "smote" in sec:
        sm = sec["smote"]
        if not isinstance(sm, Mapping):
            raise ConfigError("balance.smote must be an object", key="balance.smote")
        _check_keys(sm, "balance.smote", set(), {"k_neighbors"})
        smote_cfg = _cfg(lambda: SmoteConfig(
            k_neighbors=int(sm.get("k_neighbors", 5)), seed=seed), "balance.smote")
    weights = bool(sec.get("window_weights", False))
    return smote_cfg, weights


def _model_from(doc: Mapping, seed: int) -> tuple[str, ForestConfig, LogRegConfig]:
    sec = _section(doc, "model")
    _check_keys(sec, "model", set(),
                {"kind", "n_trees", "max_depth", "features_per_split",
                 "min_samples_split", "bootstrap",
                 "learning_rate", "max_iters", "l2_penalty", "tol"})
    kind = sec.get("kind", "random_forest")
    if kind not in ("random_forest", "ovr_logistic"):
        raise ConfigError(f"unknown model kind {kind!r}", key="model.kind")
    forest = _cfg(lambda: ForestConfig(
        n_trees=int(sec.get("n_trees", 20)),
        max_depth=int(sec.get("max_depth", 15)),
        features_per_split=sec.get("features_per_split"),
        min_samples_split=int(sec.get("min_samples_split", 2)),
        bootstrap=bool(sec.get("bootstrap", True)),
        seed=seed,
    ), "model")
    logreg = _cfg(lambda: LogRegConfig(
        learning_rate=float(sec.get("learning_rate", 0.5)),
        max_iters=int(sec.get("max_iters", 3000)),
        l2_penalty=float(sec.get("l2_penalty", 1e-4)),
        tol=float(sec.get("tol", 1e-7)),
    ), "model")
    return kind, forest, logreg


def _run_config_from(doc: Mapping, seed: int) -> RunConfig:
    kind, forest, logreg = _model_from(doc, seed)
    smote_cfg, weights = _balance_from(doc, seed)
    try:
        return RunConfig(
            pipeline=str(doc.get("pipeline", "leg")),
            subset=str(doc.get("subset", "all")),
            model_kind=kind,
            target=str(doc.get("target", "activity")),
            windowing=_windowing_from(doc),
            forest=forest,
            logreg=logreg,
            smote=smote_cfg,
            use_window_weights=weights,
            soft_vote_radius=int(doc.get("soft_vote_radius", 0)),
            normalize=bool(doc.get("normalize", True)),
            preprocess=_preprocess_from(doc),
            seed=seed,
        )
    except DomainError as e:
        raise ConfigError(str(e)) from None


def _sessions_from_dir(data_dir: str | Path) -> list[Session]:
    d = Path(data_dir)
    if not d.is_dir():
        raise DataError(f"data directory not found: {d}")
    files = sorted(d.glob("*.csv"))
    if not files:
        raise DataError(f"no session CSV files in {d}")
    return [load_session(f) for f in files]


# ---------------------------------------------------------------------------
# subcommand handlers

def _handle_simulate(doc: dict) -> None:
    _check_keys(doc, "", {"seed", "scenario"},
                {"out_dir", "n_users", "sessions_per_user", "repetitions",
                 "snr_db", "n_pairs", "amplitude_drift"})
    seed = _seed_of(doc)
    out = _out_dir(doc)
    scenario = doc["scenario"]
    if scenario not in ("leg7", "gym11", "collab"):
        raise ConfigError(f"unknown scenario {scenario!r}", key="scenario")
    n_users = int(doc.get("n_users", 5))
    per_user = int(doc.get("sessions_per_user", 2))
    reps = int(doc.get("repetitions", 12))
    snr_db = float(doc.get("snr_db", 20.0))
    drift = float(doc.get("amplitude_drift", 0.06))
    n_pairs = int(doc.get("n_pairs", 3))
    if n_users < 1 or per_user < 1 or reps < 1 or n_pairs < 1:
        raise ConfigError("counts must be positive", key="n_users")

    out.mkdir(parents=True, exist_ok=True)
    ids: list[str] = []
    if scenario == "collab":
        for g in range(n_pairs):
            a, b = generate_collab_pair(
                seed=seed + g, group_id=f"group{g:02d}",
                user_a=f"user{2 * g:02d}", user_b=f"user{2 * g + 1:02d}",
                session_index=0)
            for s in (a, b):
                save_session(s, out / f"{s.id}.csv")
                ids.append(s.id)
    else:
        make = default_leg7_segments if scenario == "leg7" else default_gym_segments
        label_set = "LEG7" if scenario == "leg7" else "GYM12"
        rng = substream(seed, "simulate-users")
        for u in range(n_users):
            user_scale = float(rng.uniform(0.85, 1.15))
            for k in range(per_user):
                period_scale = float(rng.uniform(0.9, 1.1))
                segs = make(repetitions=reps, snr_db=snr_db,
                            user_scale=user_scale, period_scale=period_scale,
                            amplitude_drift=drift)
                s = generate_session(
                    segs, seed=seed + 1000 * u + k, label_set_id=label_set,
                    session_id=f"user{u:02d}-s{k:02d}", user_id=f"user{u:02d}",
                    session_index=k)
                save_session(s, out / f"{s.id}.csv")
                ids.append(s.id)
    manifest = {"scenario": scenario, "seed": seed, "session_ids": sorted(ids)}
    atomic_write_text(out / "sessions.json",
                      json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"wrote {len(ids)} sessions to {out}")


def _handle_featurize(doc: dict) -> None:
    _check_keys(doc, "", {"seed", "data_dir"},
                {"out_dir", "pipeline", "subset", "windowing"})
    seed = _seed_of(doc)
    out = _out_dir(doc)
    pipeline = str(doc.get("pipeline", "leg"))
    subset = str(doc.get("subset", "all"))
    if pipeline not in ("leg", "gym"):
        raise ConfigError(f"unknown feature pipeline {pipeline!r}", key="pipeline")
    if subset not in ("all", "hbc", "imu"):
        raise ConfigError(f"unknown feature subset {subset!r}", key="subset")
    windowing = _windowing_from(doc)

    sessions = _sessions_from_dir(doc["data_dir"])
    windows = [w for s in sessions for w in slide_windows(s, windowing)]
    if not windows:
        raise DataError("no windows produced; sessions too short for the window size")
    X, labels, weights, names = features_matrix(windows, pipeline, subset)

    out.mkdir(parents=True, exist_ok=True)
    final = out / "features.npz"
    fd, tmp = tempfile.mkstemp(dir=out, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, X=X, labels=np.asarray(labels), weights=weights,
                     names=np.asarray(names))
        os.replace(tmp, final)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    from .features import manifest_hash

    atomic_write_text(out / "features.manifest.json", json.dumps({
        "pipeline": pipeline, "subset": subset, "n_windows": int(X.shape[0]),
        "n_features": int(X.shape[1]), "names": list(names),
        "manifest_hash": manifest_hash(names), "seed": seed,
    }, sort_keys=True, indent=2) + "\n")
    print(f"wrote {X.shape[0]} x {X.shape[1]} feature matrix to {final}")


def _handle_train(doc: dict) -> None:
    _check_keys(doc, "", {"seed", "data_dir"},
                {"out_dir", "pipeline", "subset", "windowing", "model",
                 "balance", "preprocess", "target", "normalize",
                 "soft_vote_radius"})
    seed = _seed_of(doc)
    out = _out_dir(doc)
    cfg = _run_config_from(doc, seed)

    sessions = _sessions_from_dir(doc["data_dir"])
    model, norm = train_on_sessions(sessions, cfg)

    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.json")
    if norm is not None:
        atomic_write_text(out / "normalizer.json",
                          json.dumps(norm.to_dict(), sort_keys=True) + "\n")
    atomic_write_text(out / "provenance.json", json.dumps(
        provenance_record(doc, seed), sort_keys=True, indent=2) + "\n")
    print(f"trained {model.kind} ({len(model.classes)} classes) "
          f"-> {out / 'model.json'}")


def _handle_evaluate(doc: dict) -> None:
    _check_keys(doc, "", {"seed", "data_dir", "scheme"},
                {"out_dir", "pipeline", "subset", "windowing", "model",
                 "balance", "preprocess", "target", "normalize",
                 "soft_vote_radius", "grid"})
    seed = _seed_of(doc)
    out = _out_dir(doc)
    scheme = doc["scheme"]
    if scheme not in ("louo", "loso", "leave_one_group_out", "random_split"):
        raise ConfigError(f"unknown scheme {scheme!r}", key="scheme")
    cfg = _run_config_from(doc, seed)
    grid = doc.get("grid")
    if grid is not None:
        if not isinstance(grid, Mapping):
            raise ConfigError("grid must be an object", key="grid")
        _check_keys(grid, "grid", set(), {"n_trees", "max_depth"})

    sessions = _sessions_from_dir(doc["data_dir"])

    def run_one(one_cfg: RunConfig) -> EvalReport:
        if scheme == "random_split":
            return run_random_split_evaluation(sessions, one_cfg)
        return run_fold_evaluation(sessions, scheme, one_cfg)

    if grid:
        import dataclasses

        results = []
        best = None
        for nt in grid.get("n_trees", [cfg.forest.n_trees]):
            for md in grid.get("max_depth", [cfg.forest.max_depth]):
                gcfg = dataclasses.replace(
                    cfg, forest=dataclasses.replace(
                        cfg.forest, n_trees=int(nt), max_depth=int(md)))
                rep = run_one(gcfg)
                row = {"n_trees": int(nt), "max_depth": int(md),
                       "macro_f": rep.macro_f, "hamming": rep.hamming}
                results.append(row)
                if best is None or rep.macro_f > best[0].macro_f:
                    best = (rep, row)
        report, best_row = best
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "grid.json", json.dumps(
            {"results": results, "best": best_row}, sort_keys=True, indent=2) + "\n")
    else:
        report = run_one(cfg)

    write_eval_artifacts(report, out, doc)
    sys.stdout.write(text_summary(report))


def _handle_count(doc: dict) -> None:
    _check_keys(doc, "", {"seed", "data_dir"}, {"out_dir", "source", "fuse"})
    seed = _seed_of(doc)
    out = _out_dir(doc)
    source = str(doc.get("source", "cap_raw"))
    fuse = doc.get("fuse")
    if fuse is not None and fuse not in ("imu_mean", "closest_two_mean"):
        raise ConfigError(f"unknown fuse strategy {fuse!r}", key="fuse")

    sessions = _sessions_from_dir(doc["data_dir"])
    summary = count_sessions(sessions, source=source, fuse=fuse)
    write_count_artifacts(summary, out, doc, seed)
    line = f"counted {summary['n_segments']} segments: mean accuracy " \
           f"{summary['mean_accuracy']:.4f}"
    if "per_source_mean_accuracy" in summary:
        per = summary["per_source_mean_accuracy"]
        line += "  (" + ", ".join(f"{k} {v:.3f}" for k, v in sorted(per.items())) + ")"
    print(line)


def _handle_pair_eval(doc: dict) -> None:
    _check_keys(doc, "", {"seed", "data_dir"},
                {"out_dir", "pipeline", "subset", "windowing", "model",
                 "balance", "normalize", "soft_vote_radius",
                 "hard_lift_drop", "pairs"})
    seed = _seed_of(doc)
    out = _out_dir(doc)
    hard = bool(doc.get("hard_lift_drop", True))
    cfg = _run_config_from(doc, seed)

    sessions = _sessions_from_dir(doc["data_dir"])
    by_id = {s.id: s for s in sessions}
    pairs: list[tuple[Session, Session]] = []
    if "pairs" in doc:
        if not isinstance(doc["pairs"], list):
            raise ConfigError("pairs must be a list of [id_a, id_b]", key="pairs")
        for row in doc["pairs"]:
            if (not isinstance(row, list)) or len(row) != 2:
                raise ConfigError("each pair must be [id_a, id_b]", key="pairs")
            for sid in row:
                if sid not in by_id:
                    raise DataError(f"pair references unknown session {sid!r}")
            pairs.append((by_id[row[0]], by_id[row[1]]))
    else:
        by_group: dict[str, list[Session]] = {}
        for s in sessions:
            if s.group_id is not None:
                by_group.setdefault(s.group_id, []).append(s)
        for g in sorted(by_group):
            members = sorted(by_group[g], key=lambda s: s.id)
            if len(members) != 2:
                raise DataError(
                    f"group {g!r} has {len(members)} sessions; expected exactly 2")
            pairs.append((members[0], members[1]))
        if not pairs:
            raise DataError("no grouped session pairs found (set group_id or pairs)")

    report = run_pair_evaluation(pairs, cfg, hard_lift_drop=hard)
    write_eval_artifacts(report, out, doc)
    sys.stdout.write(text_summary(report))


def _handle_report(doc: dict) -> None:
    _check_keys(doc, "", {"seed"}, {"out_dir", "eval_json", "count_json"})
    seed = _seed_of(doc)
    out = _out_dir(doc)
    if "eval_json" not in doc and "count_json" not in doc:
        raise ConfigError("need eval_json and/or count_json to render",
                          key="eval_json")
    out.mkdir(parents=True, exist_ok=True)
    wrote = []
    if "eval_json" in doc:
        p = Path(str(doc["eval_json"]))
        if not p.exists():
            raise DataError(f"eval report not found: {p}")
        report = EvalReport.from_json(p.read_text(encoding="utf-8"))
        target = out / "confusion.svg"
        atomic_write_text(target,
                          confusion_heatmap_svg(report.confusion, report.classes))
        wrote.append(target)
    if "count_json" in doc:
        p = Path(str(doc["count_json"]))
        if not p.exists():
            raise DataError(f"count report not found: {p}")
        try:
            count_doc = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataError(f"count report is not valid JSON: {e}") from None
        target = out / "counting.svg"
        atomic_write_text(target, counting_summary_svg(count_doc))
        wrote.append(target)
    atomic_write_text(out / "provenance.json", json.dumps(
        provenance_record(doc, seed), sort_keys=True, indent=2) + "\n")
    print("rendered " + ", ".join(str(w) for w in wrote))


_HANDLERS: dict[str, Callable[[dict], None]] = {
    "simulate": _handle_simulate,
    "featurize": _handle_featurize,
    "train": _handle_train,
    "evaluate": _handle_evaluate,
    "count": _handle_count,
    "pair-eval": _handle_pair_eval,
    "report": _handle_report,
}


def _fail(code: int, err: Exception) -> int:
    doc = {"error": type(err).__name__, "message": str(err)}
    for attr in ("key", "line"):
        v = getattr(err, attr, None)
        if v is not None:
            doc[attr] = v
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="capmotion",
        description="Body-capacitance + IMU activity pipeline: simulate, "
                    "featurize, train, evaluate, count, pair-eval, report.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage from a JSON config")
        p.add_argument("--config", required=True,
                       help="path to the JSON config for this stage")
    args = parser.parse_args(argv)
    try:
        doc = _load_config(args.config)
        _seed_of(doc)
        _HANDLERS[args.command](doc)
        return 0
    except ConfigError as e:
        return _fail(2, e)
    except (DataError, DomainError) as e:
        return _fail(3, e)
    except NumericalError as e:
        return _fail(4, e)
    except CapmotionError as e:
        return _fail(3, e)


if __name__ == "__main__":
    sys.exit(main())
