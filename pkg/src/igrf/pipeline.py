"""Config-driven orchestration of the whole method, stage by stage.

Configuration is a sectioned ``key = value`` file (``configparser`` INI
dialect).  Any key can be overridden from the environment as
``IGRF_<SECTION>_<KEY>``, e.g. ``IGRF_RF_N_TREES=200``.  Every stage records
content hashes of what it read and wrote in ``manifest.json`` under the output
directory; wall-clock times are kept there too but are excluded from
:func:`manifest_fingerprint`.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from . import __version__
from .ensemble import FeatureSubset, apply_threshold, combine
from .errors import ConfigError, DataError, SchemaError
from .forest import ForestConfig, rank_rf
from .forest import write_ranking_csv as write_rf_csv
from .info_gain import Discretizer, rank_ig
from .info_gain import write_ranking_csv as write_ig_csv
from .metrics import evaluate
from .mlp import MlpConfig, fit, load_model, predict_proba, save_model
from .rfe import MlpEvaluator, StubEvaluator, rfe
from .synthetic import flow_schema
from .tabular import (
    UNSW_NB15_MINORITY, Schema, Table, EncodedMatrix, clean, deduplicate, export_csv, load_csv,
    minmax_fit_transform, one_hot, oversample_normal, remove_minority, split_holdout,
    unsw_nb15_schema,
)

MODES = ("igrf_rfe", "ig_only", "rf_only", "union", "intersection", "all_features")

DEFAULTS = {
    "data": {"train": "", "test": ""},
    "schema": {"preset": "unsw_nb15", "columns": "", "classes": "", "ignored": ""},
    "preprocess": {
        "drop_classes": ", ".join(UNSW_NB15_MINORITY),
        "drop_columns": "label",
        "oversample_class": "Normal",
        "oversample_factor": "2",
        "split_ratio": "0.5",
        "split_seed": "0",
    },
    "ig": {"bins": "10", "threshold": "0.25"},
    "rf": {"n_trees": "1000", "threshold": "0.02", "seed": "0", "max_depth": "none",
           "min_samples_split": "2", "features_per_split": "auto", "n_jobs": "1"},
    "rfe": {"patience": "5", "seeds": "2022-2031", "epochs": "full", "n_jobs": "1",
            "evaluator": "mlp"},
    "mlp": {"hidden_sizes": "128, 128", "learning_rate": "0.0003", "batch_size": "64",
            "max_epochs": "300", "early_stop_patience": "30", "loss": "cross_entropy",
            "seed": "0"},
    "output": {"dir": "runs/default"},
}


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def _parse_seeds(text: str) -> list[int]:
    seeds = []
    for part in _split_list(text):
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("rfe.seeds is empty")
    return seeds


def _opt_int(text: str, none_words=("none", "auto", "full", "")) -> Optional[int]:
    return None if text.strip().lower() in none_words else int(text)


@dataclass
class PipelineConfig:
    train_path: Optional[Path]
    test_path: Optional[Path]
    schema: Schema
    drop_classes: list
    drop_columns: list
    oversample_class: str
    oversample_factor: int
    split_ratio: float
    split_seed: int
    ig_bins: int
    ig_threshold: float
    rf: ForestConfig
    rf_threshold: float
    rfe_patience: int
    rfe_seeds: list
    rfe_epochs: Optional[int]
    rfe_n_jobs: int
    evaluator: str
    mlp: MlpConfig
    out_dir: Path
    source: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Flat section -> key -> value record of the effective settings."""
        return self.source


def _schema_from(section: Mapping[str, str]) -> Schema:
    preset = section.get("preset", "").strip()
    if section.get("columns", "").strip():
        pairs = []
        for item in _split_list(section["columns"]):
            name, _, kind = item.partition(":")
            pairs.append((name.strip(), (kind or "numeric").strip()))
        return Schema.from_pairs(pairs, _split_list(section.get("classes", "")),
                                 _split_list(section.get("ignored", "")))
    if preset == "unsw_nb15":
        return unsw_nb15_schema()
    if preset == "synthetic_flow":
        return flow_schema()
    raise ConfigError(f"unknown schema preset {preset!r}")


def load_config(path=None, env: Optional[Mapping[str, str]] = None,
                overrides: Optional[Mapping[str, Mapping[str, str]]] = None) -> PipelineConfig:
    """Read ``path`` (or only defaults), then environment, then ``overrides``."""
    env = os.environ if env is None else env
    cp = configparser.ConfigParser(interpolation=None)
    cp.read_dict(DEFAULTS)
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        base = path.resolve().parent
    for key, value in env.items():
        if not key.startswith("IGRF_"):
            continue
        for section in cp.sections():
            prefix = f"IGRF_{section.upper()}_"
            if key.startswith(prefix):
                cp.set(section, key[len(prefix):].lower(), value)
    for section, values in (overrides or {}).items():
        for k, v in values.items():
            cp.set(section, k, str(v))
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(cp[section]) - set(DEFAULTS[section])
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")

    def resolve(p):
        p = p.strip()
        if not p:
            return None
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        s = {sec: dict(cp[sec]) for sec in cp.sections()}
        rf_cfg = ForestConfig(
            n_trees=int(s["rf"]["n_trees"]), max_depth=_opt_int(s["rf"]["max_depth"]),
            min_samples_split=int(s["rf"]["min_samples_split"]),
            features_per_split=_opt_int(s["rf"]["features_per_split"]),
            seed=int(s["rf"]["seed"]), n_jobs=int(s["rf"]["n_jobs"]))
        mlp_cfg = MlpConfig(
            hidden_sizes=tuple(int(h) for h in _split_list(s["mlp"]["hidden_sizes"])),
            learning_rate=float(s["mlp"]["learning_rate"]),
            batch_size=int(s["mlp"]["batch_size"]), max_epochs=int(s["mlp"]["max_epochs"]),
            early_stop_patience=int(s["mlp"]["early_stop_patience"]),
            loss=s["mlp"]["loss"].strip(), seed=int(s["mlp"]["seed"]))
        cfg = PipelineConfig(
            train_path=resolve(s["data"]["train"]), test_path=resolve(s["data"]["test"]),
            schema=_schema_from(s["schema"]),
            drop_classes=_split_list(s["preprocess"]["drop_classes"]),
            drop_columns=_split_list(s["preprocess"]["drop_columns"]),
            oversample_class=s["preprocess"]["oversample_class"].strip(),
            oversample_factor=int(s["preprocess"]["oversample_factor"]),
            split_ratio=float(s["preprocess"]["split_ratio"]),
            split_seed=int(s["preprocess"]["split_seed"]),
            ig_bins=int(s["ig"]["bins"]), ig_threshold=float(s["ig"]["threshold"]),
            rf=rf_cfg, rf_threshold=float(s["rf"]["threshold"]),
            rfe_patience=int(s["rfe"]["patience"]), rfe_seeds=_parse_seeds(s["rfe"]["seeds"]),
            rfe_epochs=_opt_int(s["rfe"]["epochs"]), rfe_n_jobs=int(s["rfe"]["n_jobs"]),
            evaluator=s["rfe"]["evaluator"].strip(), mlp=mlp_cfg,
            out_dir=resolve(s["output"]["dir"]), source=s)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError, SchemaError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    return cfg


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_matrix(m: EncodedMatrix) -> str:
    """Content hash independent of the npz container's zip metadata."""
    h = hashlib.sha256()
    h.update(json.dumps([list(m.feature_names), list(m.class_names),
                         {k: list(v) for k, v in m.group_map.items()}]).encode())
    h.update(np.ascontiguousarray(m.values).tobytes())
    h.update(np.ascontiguousarray(m.labels).tobytes())
    return h.hexdigest()


class Manifest:
    """Accumulates per-stage records and rewrites ``manifest.json`` after each."""

    def __init__(self, cfg: PipelineConfig):
        self.path = cfg.out_dir / "manifest.json"
        self.data = {"tool": "igrf", "version": __version__, "config": cfg.echo(),
                     "stages": {}, "selected": {}}
        if self.path.exists():
            old = json.loads(self.path.read_text(encoding="utf-8"))
            if old.get("config") == self.data["config"]:
                self.data["stages"] = old.get("stages", {})
                self.data["selected"] = old.get("selected", {})

    def _hash(self, p: Path) -> str:
        if p.suffix == ".npz":
            return sha256_matrix(EncodedMatrix.load(p))
        return sha256_file(p)

    def record(self, stage, inputs, outputs, seconds, **extra):
        root = self.path.parent

        def rel(p):
            p = Path(p).resolve()
            return str(p.relative_to(root.resolve())) if p.is_relative_to(root.resolve()) else str(p)

        self.data["stages"][stage] = {
            "inputs": {rel(p): self._hash(Path(p)) for p in inputs},
            "outputs": {rel(p): self._hash(Path(p)) for p in outputs},
            "seconds": round(seconds, 3),
            **extra,
        }
        self.save()

    def save(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")


def manifest_fingerprint(manifest: dict) -> str:
    """Hash of a manifest with wall-clock fields removed."""
    def strip(obj):
        if isinstance(obj, dict):
            return {k: strip(v) for k, v in obj.items() if k != "seconds"}
        if isinstance(obj, list):
            return [strip(v) for v in obj]
        return obj
    return hashlib.sha256(json.dumps(strip(manifest), sort_keys=True).encode()).hexdigest()


def _paths(cfg: PipelineConfig) -> dict[str, Path]:
    o = cfg.out_dir
    return {
        "train": o / "preprocess" / "train.npz",
        "val": o / "preprocess" / "val.npz",
        "test": o / "preprocess" / "test.npz",
        "ranking_table": o / "preprocess" / "ranking_table.csv",
        "proportions": o / "preprocess" / "class_proportions.csv",
        "ig": o / "rank" / "ig_ranking.csv",
        "rf": o / "rank" / "rf_ranking.csv",
    }


def _require(*paths: Path):
    for p in paths:
        if not p.exists():
            raise DataError(f"missing artifact {p}; run the earlier stage first")


def cmd_preprocess(cfg: PipelineConfig) -> dict:
    """Raw CSVs -> encoded/normalized train/val/test plus the deduplicated
    ranking table and a before/after-oversampling class-proportion report."""
    t0 = time.perf_counter()
    if cfg.train_path is None or cfg.test_path is None:
        raise ConfigError("data.train and data.test must be set")
    for p in (cfg.train_path, cfg.test_path):
        if not p.exists():
            raise DataError(f"missing input file {p}")
    paths = _paths(cfg)
    paths["train"].parent.mkdir(parents=True, exist_ok=True)

    raw_train = load_csv(cfg.train_path, cfg.schema)
    raw_test = load_csv(cfg.test_path, cfg.schema)
    train = clean(raw_train, cfg.drop_columns)
    test = clean(raw_test, cfg.drop_columns)
    removed = {"train": raw_train.row_count - train.row_count,
               "test": raw_test.row_count - test.row_count}
    train = remove_minority(train, cfg.drop_classes)
    test = remove_minority(test, cfg.drop_classes)

    ranking = deduplicate(train)
    export_csv(ranking, paths["ranking_table"])

    before = train.class_counts()
    if cfg.oversample_factor > 1:
        train = oversample_normal(train, cfg.oversample_factor, cfg.oversample_class)
    after = train.class_counts()
    val, test = split_holdout(test, cfg.split_ratio, cfg.split_seed)

    enc = [one_hot(t, train) for t in (train, val, test)]
    tr, (va, te) = minmax_fit_transform(enc[0], enc[1:])
    tr.save(paths["train"])
    va.save(paths["val"])
    te.save(paths["test"])

    with open(paths["proportions"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "train_before", "train_after", "proportion_before",
                    "proportion_after"])
        nb, na = sum(before.values()), sum(after.values())
        for c in before:
            w.writerow([c, before[c], after[c], repr(before[c] / nb), repr(after[c] / na)])

    counts = {"train": after, "validation": val.class_counts(), "test": test.class_counts(),
              "train_before_oversampling": before}
    summary = {"rows_removed_by_cleaning": removed, "class_counts": counts,
               "ranking_rows": ranking.row_count, "encoded_width": len(tr.feature_names)}
    Manifest(cfg).record("preprocess", [cfg.train_path, cfg.test_path],
                         [paths[k] for k in ("train", "val", "test", "ranking_table",
                                             "proportions")],
                         time.perf_counter() - t0, summary=summary)
    return summary


def _ranking_table(cfg) -> Table:
    p = _paths(cfg)["ranking_table"]
    _require(p)
    return load_csv(p, cfg.schema.drop_columns(cfg.drop_columns).with_classes(
        [c for c in cfg.schema.label_classes if c not in set(cfg.drop_classes)]))


def cmd_rank_ig(cfg: PipelineConfig):
    t0 = time.perf_counter()
    paths = _paths(cfg)
    scores = rank_ig(_ranking_table(cfg), Discretizer(cfg.ig_bins))
    paths["ig"].parent.mkdir(parents=True, exist_ok=True)
    write_ig_csv(scores, paths["ig"])
    Manifest(cfg).record("rank-ig", [paths["ranking_table"]], [paths["ig"]],
                         time.perf_counter() - t0)
    return scores


def cmd_rank_rf(cfg: PipelineConfig):
    t0 = time.perf_counter()
    paths = _paths(cfg)
    scores = rank_rf(_ranking_table(cfg), cfg.rf)
    paths["rf"].parent.mkdir(parents=True, exist_ok=True)
    write_rf_csv(scores, paths["rf"])
    Manifest(cfg).record("rank-rf", [paths["ranking_table"]], [paths["rf"]],
                         time.perf_counter() - t0)
    return scores


def _read_scores(path: Path, column: str) -> dict[str, float]:
    _require(path)
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["feature"]: float(row[column]) for row in csv.DictReader(fh)}


def _subset_path(cfg, mode):
    return cfg.out_dir / "select" / f"{mode}.json"


def cmd_filter(cfg: PipelineConfig, mode: str = "union") -> FeatureSubset:
    """Stage-1 selections: ``ig_only``, ``rf_only``, ``union``, ``intersection``
    or ``all_features``.  Rankings are computed first if missing."""
    t0 = time.perf_counter()
    if mode not in MODES or mode == "igrf_rfe":
        raise ConfigError(f"filter mode must be one of {MODES[1:]}, got {mode!r}")
    paths = _paths(cfg)
    schema = cfg.schema.drop_columns(cfg.drop_columns)
    if mode == "all_features":
        subset = FeatureSubset(tuple(schema.feature_names), {"mode": mode})
        inputs = []
    else:
        if not paths["ig"].exists():
            cmd_rank_ig(cfg)
        if not paths["rf"].exists():
            cmd_rank_rf(cfg)
        ig = apply_threshold(_read_scores(paths["ig"], "normalized"), cfg.ig_threshold)
        rf = apply_threshold(_read_scores(paths["rf"], "mdi"), cfg.rf_threshold)
        if mode == "ig_only":
            rf = set()
        elif mode == "rf_only":
            ig = set()
        how = "intersection" if mode == "intersection" else "union"
        subset = combine(ig, rf, schema, how, cfg.ig_threshold, cfg.rf_threshold)
        subset.provenance["mode"] = mode
        inputs = [paths["ig"], paths["rf"]]
    out = _subset_path(cfg, mode)
    out.parent.mkdir(parents=True, exist_ok=True)
    subset.write_json(out)
    m = Manifest(cfg)
    m.data["selected"][mode] = list(subset.retained)
    m.record(f"filter:{mode}", inputs, [out], time.perf_counter() - t0)
    return subset


def make_evaluator(cfg: PipelineConfig, spec: Optional[str] = None, universe=()):
    spec = spec or cfg.evaluator
    if spec.startswith("stub:"):
        return StubEvaluator(spec[len("stub:"):], universe)
    if spec != "mlp":
        raise ConfigError(f"unknown evaluator {spec!r}")
    paths = _paths(cfg)
    _require(paths["train"], paths["val"])
    return MlpEvaluator(EncodedMatrix.load(paths["train"]), EncodedMatrix.load(paths["val"]),
                        cfg.mlp, cfg.rfe_epochs)


def cmd_rfe(cfg: PipelineConfig, evaluator: Optional[str] = None) -> FeatureSubset:
    """Union filter followed by recursive elimination (mode ``igrf_rfe``)."""
    t0 = time.perf_counter()
    stage1 = _subset_path(cfg, "union")
    if not stage1.exists():
        cmd_filter(cfg, "union")
    first = FeatureSubset.read_json(stage1)
    ev = make_evaluator(cfg, evaluator, first.retained)
    selected, trace = rfe(ev, first.retained, cfg.rfe_patience, cfg.rfe_seeds, cfg.rfe_n_jobs)
    subset = FeatureSubset(tuple(selected), {"mode": "igrf_rfe", "stage1": first.provenance,
                                            "stage1_retained": list(first.retained),
                                            "rfe_epochs": cfg.rfe_epochs,
                                            "evaluator": evaluator or cfg.evaluator})
    out = _subset_path(cfg, "igrf_rfe")
    trace_path = cfg.out_dir / "select" / "rfe_trace.json"
    subset.write_json(out)
    trace_path.write_text(trace.to_json() + "\n", encoding="utf-8")
    m = Manifest(cfg)
    m.data["selected"]["igrf_rfe"] = list(selected)
    m.record("rfe", [stage1], [out, trace_path], time.perf_counter() - t0,
             evaluator_calls=trace.evaluator_calls)
    return subset


def cmd_select(cfg: PipelineConfig, mode: str, evaluator: Optional[str] = None) -> FeatureSubset:
    if mode == "igrf_rfe":
        return cmd_rfe(cfg, evaluator)
    return cmd_filter(cfg, mode)


def _model_path(cfg, mode):
    return cfg.out_dir / "model" / f"{mode}.json"


def cmd_train(cfg: PipelineConfig, mode: str = "igrf_rfe"):
    t0 = time.perf_counter()
    paths = _paths(cfg)
    sub_path = _subset_path(cfg, mode)
    _require(paths["train"], paths["val"], sub_path)
    subset = FeatureSubset.read_json(sub_path)
    if not subset.retained:
        raise DataError("cannot train on an empty feature subset")
    train = EncodedMatrix.load(paths["train"]).select(subset.retained)
    val = EncodedMatrix.load(paths["val"]).select(subset.retained)
    model = fit(cfg.mlp, train, val)
    out = _model_path(cfg, mode)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    Manifest(cfg).record(f"train:{mode}", [paths["train"], paths["val"], sub_path], [out],
                         time.perf_counter() - t0, epochs_run=model.trace.epochs_run,
                         best_epoch=model.trace.best_epoch)
    return model


def cmd_evaluate(cfg: PipelineConfig, mode: str = "igrf_rfe"):
    t0 = time.perf_counter()
    paths = _paths(cfg)
    model_path = _model_path(cfg, mode)
    sub_path = _subset_path(cfg, mode)
    _require(paths["test"], model_path, sub_path)
    model = load_model(model_path)
    test = EncodedMatrix.load(paths["test"]).select(FeatureSubset.read_json(sub_path).retained)
    if test.feature_names != model.feature_names:
        raise DataError("test matrix columns do not match the trained model")
    report = evaluate(test.labels, predict_proba(model, test.values), test.class_names)
    out = cfg.out_dir / "eval" / mode
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "report.json")
    report.write_confusion_csv(out / "confusion.csv")
    roc = report.write_roc_csvs(out)
    Manifest(cfg).record(f"evaluate:{mode}", [paths["test"], model_path],
                         [out / "report.json", out / "confusion.csv", *roc],
                         time.perf_counter() - t0, accuracy=report.accuracy,
                         weighted_f1=report.weighted["f1"])
    return report


def igrf_rfe_select(train: EncodedMatrix, val: EncodedMatrix, *,
                    ig_threshold: float = 0.25, rf_threshold: float = 0.02,
                    bins: int = 10, forest: ForestConfig = ForestConfig(),
                    mlp: MlpConfig = MlpConfig(), patience: int = 5, seeds=tuple(range(2022, 2032)),
                    rfe_epochs: Optional[int] = None, n_jobs: int = 1):
    """Both stages on in-memory matrices whose features are all numeric.

    Returns ``(selected, stage1_subset, rfe_trace)``.
    """
    names = train.features
    cols = [train.group_map[f][0] for f in names]
    if any(len(train.group_map[f]) != 1 for f in names):
        raise SchemaError("igrf_rfe_select expects one column per feature")
    schema = Schema.from_pairs([(f, "numeric") for f in names] + [("__y", "label")],
                               train.class_names or [str(c) for c in range(train.n_classes)])
    table = Table(schema, train.values[:, cols], np.zeros((train.n_rows, 0), dtype=object),
                  train.labels)
    ig = rank_ig(deduplicate(table), Discretizer(bins))
    rf = rank_rf(deduplicate(table), forest)
    stage1 = combine(apply_threshold(ig, ig_threshold), apply_threshold(rf, rf_threshold),
                     schema, "union", ig_threshold, rf_threshold)
    ev = MlpEvaluator(train, val, mlp, rfe_epochs)
    selected, trace = rfe(ev, stage1.retained, patience, seeds, n_jobs)
    return selected, stage1, trace


def cmd_pipeline(cfg: PipelineConfig, mode: str = "igrf_rfe", evaluator: Optional[str] = None):
    cmd_preprocess(cfg)
    cmd_select(cfg, mode, evaluator)
    cmd_train(cfg, mode)
    return cmd_evaluate(cfg, mode)


# Reference values for the UNSW-NB15 run: (target, tolerance)
STAGE1_REFERENCE = {"ig_survivors": (22, 3), "rf_survivors": (19, 3), "union_size": (24, 4)}


def stage1_analysis(provenance: dict) -> list[str]:
    lines = []
    for key, (target, tol) in STAGE1_REFERENCE.items():
        got = provenance.get(key)
        got = len(got) if isinstance(got, list) else got
        if got is None:
            continue
        ok = abs(got - target) <= tol
        lines.append(f"- {key}: {got} (reference {target} ± {tol}) "
                     f"{'within tolerance' if ok else 'OUTSIDE tolerance'}")
        if not ok:
            lines.append("  The discretization and forest settings behind the reference "
                         "counts are unknown; compare the ranking CSVs against the "
                         "thresholds before drawing conclusions.")
    return lines


def cmd_report(cfg: PipelineConfig) -> str:
    """Markdown summary of whatever stages have run, written to report.md."""
    mpath = cfg.out_dir / "manifest.json"
    _require(mpath)
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    lines = ["# igrf run report", "", f"version {manifest['version']}", ""]
    pre = manifest["stages"].get("preprocess", {}).get("summary")
    if pre:
        lines += ["## Preprocessing", "",
                  f"rows removed by cleaning: {pre['rows_removed_by_cleaning']}", "",
                  "| class | train | validation | test |", "|---|---|---|---|"]
        cc = pre["class_counts"]
        for c in cc["train"]:
            lines.append(f"| {c} | {cc['train'][c]} | {cc['validation'][c]} | {cc['test'][c]} |")
        lines.append("")
    union = _subset_path(cfg, "union")
    if union.exists():
        prov = FeatureSubset.read_json(union).provenance
        lines += ["## Stage 1 (IG/RF filter)", ""]
        lines += [f"- ig_survivors: {len(prov['ig_survivors'])}",
                  f"- rf_survivors: {len(prov['rf_survivors'])}",
                  f"- common: {len(prov['common'])}",
                  f"- union_size: {prov['union_size']}", ""]
        if cfg.source.get("schema", {}).get("preset") == "unsw_nb15":
            lines += ["Against the published UNSW-NB15 counts:", ""]
            lines += stage1_analysis({"ig_survivors": len(prov["ig_survivors"]),
                                      "rf_survivors": len(prov["rf_survivors"]),
                                      "union_size": prov["union_size"]}) + [""]
    for mode, feats in sorted(manifest.get("selected", {}).items()):
        lines += [f"## Selection `{mode}` ({len(feats)} features)", "", ", ".join(feats), ""]
    for mode in MODES:
        rp = cfg.out_dir / "eval" / mode / "report.json"
        if rp.exists():
            r = json.loads(rp.read_text(encoding="utf-8"))
            w = r["weighted_avg"]
            lines += [f"## Evaluation `{mode}`", "",
                      f"accuracy {r['accuracy']:.4%}, weighted precision {w['precision']:.4f}, "
                      f"recall {w['recall']:.4f}, F1 {w['f1']:.4f}, FPR {w['fpr']:.4f}", ""]
    text = "\n".join(lines)
    (cfg.out_dir / "report.md").write_text(text, encoding="utf-8")
    return text


def with_overrides(cfg: PipelineConfig, *, seed=None, out_dir=None, rfe_epochs=None):
    """Copy of ``cfg`` with CLI-level overrides applied (and echoed)."""
    source = {k: dict(v) for k, v in cfg.source.items()}
    if seed is not None:
        cfg = replace(cfg, split_seed=seed, rf=replace(cfg.rf, seed=seed),
                      mlp=replace(cfg.mlp, seed=seed))
        for sec, key in (("preprocess", "split_seed"), ("rf", "seed"), ("mlp", "seed")):
            source[sec][key] = str(seed)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=Path(out_dir))
        source["output"]["dir"] = str(out_dir)
    if rfe_epochs is not None:
        cfg = replace(cfg, rfe_epochs=int(rfe_epochs))
        source["rfe"]["epochs"] = str(rfe_epochs)
    return replace(cfg, source=source)
