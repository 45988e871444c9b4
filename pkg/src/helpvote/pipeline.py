"""End-to-end orchestration behind the CLI subcommands.

Every ``cmd_*`` function takes a :class:`RunConfig`, writes its outputs into
``config.out`` and returns the list of files written. Each run also writes
``config_echo.json`` (the resolved config minus the output directory), so
two runs with equal echoes produce equal files.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from . import evaluation
from .errors import ConfigError
from .features import (
    ALL_FEATURES,
    FeatureSpec,
    build_features,
    load_lexicon,
    standardize_apply,
    standardize_fit,
)
from .ingest import IngestFilter, generate_synthetic, load_dataset, write_jsonl
from .models import MODEL_KINDS, ModelConfig, init_model, load_checkpoint, save_checkpoint
from .optim import TrainConfig, evaluate_model, split_dataset, train
from .seeding import derive_seed
from .selection import correlation_matrix, retain_features

log = logging.getLogger(__name__)

DEFAULT_HISTOGRAMS = (
    {"x": "text_length", "y": "rating", "width": 70},
    {"x": "text_length", "y": "log10_count", "width": 70},
    {"x": "image_count", "y": "log10_count", "width": 1},
    {"x": "image_count", "y": "rating", "width": 1},
    {"x": "image_count", "y": "helpful_vote", "width": 1},
    {"x": "helpful_vote", "y": "count", "width": 10},
    {"x": "rating", "y": "helpful_vote", "width": 1},
    {"x": "rating", "y": "count", "width": 1},
)
DEFAULT_MODELS = ("linear", "logistic", "mlp64", "mlp128", "mlp64deep", "mlp64deep:adamw")


@dataclass
class RunConfig:
    data: str | None = None
    lexicon: str | None = None
    out: str = "out"
    seed: int = 0
    max_text_length: int | None = None
    require_fields: bool = False
    features: tuple[str, ...] = ALL_FEATURES
    leave_one_out_user_avg: bool = False
    threshold: float = 0.1
    whitelist: tuple[str, ...] = ()
    train_features: tuple[str, ...] | None = None
    models: tuple[str, ...] = DEFAULT_MODELS
    dropout_rate: float = 0.2
    train: dict = field(default_factory=dict)
    histograms: tuple[dict, ...] = DEFAULT_HISTOGRAMS
    synth_n: int = 10000
    synth_signal: float = 0.9
    threads: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        cfg = cls(**data)
        return cfg.normalized()

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None

    def normalized(self) -> "RunConfig":
        cfg = replace(
            self,
            features=tuple(self.features),
            whitelist=tuple(self.whitelist),
            train_features=tuple(self.train_features) if self.train_features is not None else None,
            models=tuple(self.models),
            histograms=tuple(dict(h) for h in self.histograms),
            train=dict(self.train),
        )
        for name in cfg.models:
            parse_model_name(name)
        cfg.train_config()
        return cfg

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("threads")  # parallel paths are result-identical
        return d

    def ingest_filter(self) -> IngestFilter:
        return IngestFilter(self.max_text_length, self.require_fields)

    def feature_spec(self, names=None) -> FeatureSpec:
        return FeatureSpec(tuple(names or self.features), self.leave_one_out_user_avg)

    def train_config(self, optimizer: str | None = None) -> TrainConfig:
        opts = {k: v for k, v in self.train.items() if k != "seed"}
        if optimizer is not None:
            opts["optimizer"] = optimizer
        try:
            return TrainConfig(seed=self.seed, **opts)
        except TypeError as exc:
            raise ConfigError(f"bad train config: {exc}") from None


def parse_model_name(name: str) -> tuple[str, str | None]:
    """``"mlp64deep:adamw"`` -> ``("mlp64deep", "adamw")``; plain kinds carry no override."""
    kind, _, opt = name.partition(":")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model {name!r}; kinds are {', '.join(MODEL_KINDS)}")
    if opt and opt not in ("adam", "adamw"):
        raise ConfigError(f"unknown optimizer suffix in {name!r}")
    return kind, opt or None


def _file_tag(name: str) -> str:
    return name.replace(":", "_")


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _write_json(path: Path, obj) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _write_echo(cfg: RunConfig, out: Path) -> Path:
    return _write_json(out / "config_echo.json", cfg.echo())


def _load(cfg: RunConfig):
    if not cfg.data:
        raise ConfigError("no input data: pass --data or set 'data' in the config")
    return load_dataset(cfg.data, cfg.ingest_filter(), workers=cfg.threads)


def _lexicon(cfg: RunConfig):
    return load_lexicon(cfg.lexicon)


def cmd_eda(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    dataset, stats = _load(cfg)
    written = [_write_echo(cfg, out), _write_json(out / "ingest_stats.json", stats.to_dict())]
    path = out / "star_summary.csv"
    evaluation.write_star_summary(evaluation.star_summary(dataset), path)
    written.append(path)
    for spec in cfg.histograms:
        hist = evaluation.bucketed_mean(dataset, spec["x"], spec["y"], spec["width"])
        path = out / f"hist_{spec['x']}__{spec['y']}.csv"
        hist.to_csv(path)
        written.append(path)
    return written


def cmd_correlate(cfg: RunConfig, dataset=None) -> list[Path]:
    out = _outdir(cfg)
    if dataset is None:
        dataset, _ = _load(cfg)
    matrix = build_features(dataset, cfg.feature_spec(), _lexicon(cfg))
    corr = correlation_matrix(matrix)
    retained = retain_features(corr, cfg.threshold, cfg.whitelist)
    path = out / "correlation_matrix.csv"
    corr.to_csv(path)
    doc = {
        "features": list(retained),
        "threshold": cfg.threshold,
        "whitelist": list(cfg.whitelist),
        "target_correlations": {n: corr.get(n, "helpful") for n in matrix.columns},
        "seed": cfg.seed,
    }
    return [_write_echo(cfg, out), path, _write_json(out / "retained_features.json", doc)]


def resolve_train_features(cfg: RunConfig) -> tuple[str, ...]:
    """Explicit list first, then ``retained_features.json`` left by correlate."""
    if cfg.train_features:
        return tuple(cfg.train_features)
    path = Path(cfg.out) / "retained_features.json"
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            names = tuple(json.load(fh)["features"])
        if not names:
            raise ConfigError(f"{path} retains no features; lower the threshold or whitelist some")
        return names
    raise ConfigError("no training features: run 'correlate' first or pass --features")


def prepare_matrices(cfg: RunConfig, dataset=None):
    """Features, split and standardized matrix exactly as training sees them."""
    if dataset is None:
        dataset, _ = _load(cfg)
    names = resolve_train_features(cfg)
    needs_lexicon = "polarity" in names or "subjectivity" in names
    raw = build_features(dataset, cfg.feature_spec(names), _lexicon(cfg) if needs_lexicon else None)
    split = split_dataset(raw, cfg.train_config())
    stats = standardize_fit(raw, split.train)
    return raw, standardize_apply(raw, stats), stats, split


def cmd_train(cfg: RunConfig, dataset=None) -> list[Path]:
    out = _outdir(cfg)
    raw, matrix, stats, split = prepare_matrices(cfg, dataset)
    written = [_write_echo(cfg, out)]
    for name in cfg.models:
        kind, opt = parse_model_name(name)
        tcfg = cfg.train_config(opt)
        mcfg = ModelConfig(kind, matrix.d, cfg.dropout_rate, derive_seed(cfg.seed, "init", MODEL_KINDS.index(kind)))
        log.info("training %s on %d rows (%s)", name, split.train.shape[0], ", ".join(matrix.columns))
        model, report = train(init_model(mcfg), matrix, tcfg, split)
        tag = _file_tag(name)
        ckpt = out / f"checkpoint_{tag}.json"
        save_checkpoint(ckpt, model, stats, matrix.columns)
        rpath = out / f"train_report_{tag}.json"
        doc = report.to_dict()
        doc["name"] = name
        doc["global_seed"] = cfg.seed
        _write_json(rpath, doc)
        written += [ckpt, rpath]
    return written


def cmd_evaluate(cfg: RunConfig, dataset=None) -> list[Path]:
    out = _outdir(cfg)
    raw, _, _, split = prepare_matrices(cfg, dataset)
    test_raw = raw.take(split.test)
    results = []
    for name in cfg.models:
        ckpt = out / f"checkpoint_{_file_tag(name)}.json"
        if not ckpt.exists():
            raise ConfigError(f"missing checkpoint {ckpt}; run 'train' first")
        model, stats, names = load_checkpoint(ckpt)
        if names != raw.columns:
            raise ConfigError(f"{ckpt} was trained on {names}, not {raw.columns}")
        results.append((name, evaluate_model(model, standardize_apply(test_raw, stats))))
    rows = evaluation.model_comparison(results)
    path = out / "model_comparison.csv"
    evaluation.write_comparison(rows, path)
    return [_write_echo(cfg, out), path, _write_json(out / "model_comparison.json", {"rows": rows, "seed": cfg.seed})]


def cmd_synth(cfg: RunConfig) -> list[Path]:
    out = _outdir(cfg)
    dataset = generate_synthetic(cfg.synth_n, cfg.seed, cfg.synth_signal)
    path = out / "synthetic.jsonl"
    write_jsonl(dataset, path)
    return [_write_echo(cfg, out), path]


def cmd_report(cfg: RunConfig) -> list[Path]:
    """Run eda, correlate, train and evaluate, then bundle everything into report.json."""
    written = cmd_eda(cfg)
    dataset, _ = _load(cfg)
    written += cmd_correlate(cfg, dataset)
    written += cmd_train(cfg, dataset)
    written += cmd_evaluate(cfg, dataset)
    out = Path(cfg.out)

    def read_json(name):
        with open(out / name, encoding="utf-8") as fh:
            return json.load(fh)

    histograms = {}
    for spec in cfg.histograms:
        key = f"{spec['x']}__{spec['y']}"
        histograms[key] = evaluation.bucketed_mean(dataset, spec["x"], spec["y"], spec["width"]).to_dict()
    bundle = {
        "config": cfg.echo(),
        "ingest_stats": read_json("ingest_stats.json"),
        "star_summary": [asdict(r) for r in evaluation.star_summary(dataset)],
        "histograms": histograms,
        "retained_features": read_json("retained_features.json"),
        "train_reports": {name: read_json(f"train_report_{_file_tag(name)}.json") for name in cfg.models},
        "model_comparison": read_json("model_comparison.json")["rows"],
    }
    with open(out / "correlation_matrix.csv", encoding="utf-8") as fh:
        bundle["correlation_matrix_csv"] = fh.read()
    written.append(_write_json(out / "report.json", bundle))
    return sorted(set(written))
