"""Command-line pipeline: generate -> fit -> discover -> evaluate (+ bench, export-dot).

Every command reads one JSON config.  Values are resolved in this order,
later winning: built-in defaults, the config file, command-line flags.
Relative paths in the config are relative to the config file.

Exit codes: 0 ok, 2 configuration error, 3 runtime error.  Failures print a
JSON object ``{"error": ..., "messages": [...]}`` on stderr.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bench import linear_fit, runtime_vs_batch, runtime_vs_particles
from .core import (
    LabelCatalog,
    EventVocabulary,
    MarkovBoundarySet,
    OscarError,
    read_sequences,
    read_string_list,
    write_sequences,
    write_string_list,
)
from .density import NGramDensity, oracle_pair
from .engine import BatchItemError, DiscoveryResult, ThresholdConfig, discover_batch, results_to_jsonl
from .evaluation import MbScore, aggregate, fold_report, report_json, score_instance, strata_csv
from .graph import edges_from_json, render_dot, to_dot
from .sampling import SamplingConfig
from .synthgen import GeneratorModel, random_model, sample_dataset, true_markov_boundary

logger = logging.getLogger("oscar_kit")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULTS = {
    "seed": None,
    "out": "out",
    "model": None,
    "paths": {},
    "generate": {"n_train": 2000, "n_test": 100},
    "backend": "ngram",
    "ngram": {"order": 2, "alpha": 0.5, "window": None},
    "sampling": asdict(SamplingConfig()),
    "threshold": asdict(ThresholdConfig()),
    "parallelism": 1,
    "evaluate": {"positive_only": True, "restrict_to_sequence": False, "folds": 0},
    "bench": {"n_particles": [16, 32, 64, 128, 256], "batch_sizes": [1, 2, 4, 8], "n_sequences": 8,
              "repeats": 3},
}


class ConfigError(OscarError):
    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    """Defaults < file < overrides; relative paths resolved against the file."""
    cfg = copy.deepcopy(DEFAULTS)
    base = Path.cwd()
    if path:
        p = Path(path)
        try:
            with open(p, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from None
        if not isinstance(data, dict):
            raise ConfigError([f"config {path} must be a JSON object"])
        cfg = _merge(cfg, data)
        base = p.resolve().parent
    cfg = _merge(cfg, overrides)
    cfg["_base"] = str(base)
    return cfg


def _path(cfg: dict, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else Path(cfg["_base"]) / p


def _out(cfg: dict) -> Path:
    return _path(cfg, cfg["out"])


def artifact(cfg: dict, key: str, default_name: str) -> Path:
    value = cfg["paths"].get(key)
    return _path(cfg, value) if value else _out(cfg) / default_name


def validate_config(cfg: dict, command: str) -> list[str]:
    """Every problem with the config, not just the first."""
    errors = []
    if cfg.get("seed") is None:
        errors.append("seed is mandatory (set it in the config or pass --seed)")
    elif not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        errors.append("seed must be an integer")
    if cfg["backend"] not in ("oracle", "ngram"):
        errors.append(f"backend must be 'oracle' or 'ngram', got {cfg['backend']!r}")
    par = cfg["parallelism"]
    if not isinstance(par, int) or par == 0:
        errors.append("parallelism must be a nonzero integer")
    try:
        SamplingConfig(**cfg["sampling"])
    except (TypeError, ValueError) as exc:
        errors.append(f"sampling: {exc}")
    try:
        ThresholdConfig(**cfg["threshold"])
    except (TypeError, ValueError) as exc:
        errors.append(f"threshold: {exc}")
    ng = cfg["ngram"]
    if not isinstance(ng.get("order"), int) or ng["order"] < 1:
        errors.append("ngram.order must be an integer >= 1")
    if not isinstance(ng.get("alpha"), (int, float)) or not ng["alpha"] > 0:
        errors.append("ngram.alpha must be > 0")

    needs_model = command == "generate" or (command in ("discover", "bench") and cfg["backend"] == "oracle")
    model = cfg.get("model")
    if needs_model:
        if model is None:
            errors.append("model is required (a path to a model JSON or an object of random-model settings)")
        elif isinstance(model, str) and not _path(cfg, model).exists():
            errors.append(f"model file {model} does not exist")
        elif not isinstance(model, (str, dict)):
            errors.append("model must be a path or an object")
    required = {
        "fit": [("corpus", "corpus.jsonl")],
        "discover": [("dataset", "dataset.jsonl"), ("vocab", "vocab.json"), ("labels", "labels.json")],
        "evaluate": [("discovery", "discovery.jsonl"), ("dataset", "dataset.jsonl"),
                     ("truth", "truth.json"), ("vocab", "vocab.json"), ("labels", "labels.json")],
        "bench": [("dataset", "dataset.jsonl"), ("vocab", "vocab.json"), ("labels", "labels.json")],
        "export-dot": [("discovery", "discovery.jsonl"), ("dataset", "dataset.jsonl"),
                       ("vocab", "vocab.json"), ("labels", "labels.json")],
    }
    if command == "fit":
        required["fit"] += [("vocab", "vocab.json"), ("labels", "labels.json")]
    if command in ("discover", "bench") and cfg["backend"] == "ngram":
        required[command] = required[command] + [("estimator", "estimator.json")]
    for key, name in required.get(command, []):
        p = artifact(cfg, key, name)
        if not p.exists():
            errors.append(f"{key} file {p} does not exist (run the upstream command first)")
    return errors


def build_model(cfg: dict) -> GeneratorModel:
    model = cfg["model"]
    if isinstance(model, str):
        return GeneratorModel.load(_path(cfg, model))
    kwargs = dict(model)
    kwargs.setdefault("seed", cfg["seed"])
    length = kwargs.pop("length")
    if isinstance(length, dict):
        length = {int(k): float(v) for k, v in length.items()}
    literals = tuple(kwargs.pop("literals", (1, 4)))
    return random_model(length=length, literals=literals, **kwargs)


def load_vocab(cfg) -> tuple[EventVocabulary, LabelCatalog]:
    vocab = EventVocabulary(read_string_list(artifact(cfg, "vocab", "vocab.json")))
    catalog = LabelCatalog(read_string_list(artifact(cfg, "labels", "labels.json")))
    return vocab, catalog


def load_density(cfg, vocab, catalog):
    if cfg["backend"] == "oracle":
        model = build_model(cfg)
        if model.vocab != vocab or model.catalog != catalog:
            raise ConfigError(["model vocabulary/labels differ from the dataset's"])
        return oracle_pair(model)
    return NGramDensity.load(artifact(cfg, "estimator", "estimator.json"))


def sampling_cfg(cfg) -> SamplingConfig:
    s = dict(cfg["sampling"])
    s["seed"] = cfg["seed"]
    return SamplingConfig(**s)


def config_hash(cfg: dict) -> str:
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(cfg: dict, command: str, outputs: list[Path]) -> None:
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    manifest = {
        "command": command,
        "config": clean,
        "config_sha256": config_hash(cfg),
        "seed": cfg["seed"],
        "versions": {
            "oscar_kit": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "outputs": sorted(os.path.relpath(p, out) for p in outputs),
    }
    with open(out / f"manifest.{command}.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- commands -------------------------------------------------------------


def cmd_generate(cfg: dict) -> list[Path]:
    model = build_model(cfg)
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    gen = cfg["generate"]
    train = sample_dataset(model, int(gen["n_train"]))
    test = sample_dataset(model, int(gen["n_test"]), start=int(gen["n_train"]))
    paths = {
        "model": out / "model.json",
        "vocab": out / "vocab.json",
        "labels": out / "labels.json",
        "corpus": out / "corpus.jsonl",
        "dataset": out / "dataset.jsonl",
        "truth": out / "truth.json",
    }
    model.save(paths["model"])
    write_string_list(paths["vocab"], model.vocab.symbols)
    write_string_list(paths["labels"], model.catalog.names)
    write_sequences(paths["corpus"], train, model.vocab, model.catalog)
    write_sequences(paths["dataset"], test, model.vocab, model.catalog)
    truth = true_markov_boundary(model.rules, len(model.catalog))
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(truth.to_json(model.vocab, model.catalog), fh, indent=1, sort_keys=True)
    logger.info("generated %d training and %d test sequences", len(train), len(test))
    return list(paths.values())


def cmd_fit(cfg: dict) -> list[Path]:
    vocab, catalog = load_vocab(cfg)
    corpus = read_sequences(artifact(cfg, "corpus", "corpus.jsonl"), vocab, catalog)
    ng = cfg["ngram"]
    est = NGramDensity(order=ng["order"], alpha=ng["alpha"], window=ng.get("window"))
    est.fit(corpus, n_symbols=len(vocab))
    path = _out(cfg) / "estimator.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    est.save(path)
    logger.info("fitted %s on %d sequences", est.backend, len(corpus))
    return [path]


def cmd_discover(cfg: dict) -> list[Path]:
    vocab, catalog = load_vocab(cfg)
    seqs = read_sequences(artifact(cfg, "dataset", "dataset.jsonl"), vocab, catalog)
    pair = load_density(cfg, vocab, catalog)
    t0 = time.perf_counter()
    results = discover_batch(pair, seqs, sampling_cfg(cfg), ThresholdConfig(**cfg["threshold"]),
                             n_jobs=cfg["parallelism"])
    elapsed = time.perf_counter() - t0
    out = _out(cfg)
    graphs = out / "graphs"
    graphs.mkdir(parents=True, exist_ok=True)
    path = out / "discovery.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(results_to_jsonl(results, vocab, catalog))
    written = [path]
    for i, res in enumerate(results):
        if isinstance(res, DiscoveryResult):
            g = graphs / f"seq_{i:05d}.dot"
            g.write_text(to_dot(res, vocab, catalog, name=f"seq_{i:05d}"), encoding="utf-8")
            written.append(g)
    failed = sum(isinstance(r, BatchItemError) for r in results)
    runtime = {"seconds": elapsed, "n_sequences": len(seqs), "failed": failed,
               "seconds_per_sequence": elapsed / max(len(seqs), 1)}
    with open(out / "runtime.json", "w", encoding="utf-8") as fh:
        json.dump(runtime, fh, indent=1)
    logger.info("discovered %d sequences in %.2fs (%d failed)", len(seqs), elapsed, failed)
    return written


def cmd_evaluate(cfg: dict) -> list[Path]:
    vocab, catalog = load_vocab(cfg)
    seqs = read_sequences(artifact(cfg, "dataset", "dataset.jsonl"), vocab, catalog)
    with open(artifact(cfg, "truth", "truth.json"), encoding="utf-8") as fh:
        truth = MarkovBoundarySet.from_json(json.load(fh), vocab, catalog)
    ev = cfg["evaluate"]
    scores: list[MbScore] = []
    with open(artifact(cfg, "discovery", "discovery.jsonl"), encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if len(records) != len(seqs):
        raise ConfigError([f"discovery has {len(records)} records but dataset has {len(seqs)}"])
    for i, (rec, seq) in enumerate(zip(records, seqs)):
        if "error" in rec:
            continue
        present = seq.presence()
        for j, name in enumerate(catalog.names):
            on = bool(seq.labels[j])
            if ev["positive_only"] and not on:
                continue
            inferred = {vocab.encode(s) for s in rec[name]["events"]}
            t = truth[j] & present if ev["restrict_to_sequence"] else truth[j]
            scores.append(score_instance(i, j, inferred, t, on))
    report = aggregate(scores)
    report.per_label = {catalog.names[j]: v for j, v in report.per_label.items()}
    runtime_path = _out(cfg) / "runtime.json"
    if runtime_path.exists():
        report.runtime = json.loads(runtime_path.read_text())
    extra = {}
    if int(ev.get("folds") or 0) > 1:
        extra["folds"] = fold_report(scores, int(ev["folds"]), cfg["seed"])
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json", out / "report.txt", out / "strata.csv"]
    paths[0].write_text(report_json(report, **extra) + "\n", encoding="utf-8")
    paths[1].write_text(report.table(), encoding="utf-8")
    paths[2].write_text(strata_csv(report), encoding="utf-8")
    click.echo(report.table(), nl=False)
    return paths


def cmd_bench(cfg: dict) -> list[Path]:
    vocab, catalog = load_vocab(cfg)
    seqs = read_sequences(artifact(cfg, "dataset", "dataset.jsonl"), vocab, catalog)
    pair = load_density(cfg, vocab, catalog)
    b = cfg["bench"]
    base = sampling_cfg(cfg)
    batch = seqs[: int(b["n_sequences"])]
    kw = {"repeats": int(b["repeats"]), "n_jobs": cfg["parallelism"]}
    rows = [("n_particles", n, len(batch), t)
            for n, t in runtime_vs_particles(pair, batch, base, b["n_particles"], **kw)]
    rows += [("batch_size", size, base.n_particles, t)
             for size, t in runtime_vs_batch(pair, seqs, base, b["batch_sizes"], **kw)]
    _, _, r2 = linear_fit([r[1] for r in rows if r[0] == "n_particles"],
                          [r[3] for r in rows if r[0] == "n_particles"])
    out = _out(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "bench.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "value", "fixed", "seconds"])
        w.writerows(rows)
    click.echo(f"runtime vs N: R^2 = {r2:.4f}")
    return [path]


def cmd_export_dot(cfg: dict) -> list[Path]:
    vocab, catalog = load_vocab(cfg)
    seqs = read_sequences(artifact(cfg, "dataset", "dataset.jsonl"), vocab, catalog)
    out = _out(cfg) / "graphs"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with open(artifact(cfg, "discovery", "discovery.jsonl"), encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            rec = json.loads(line)
            if "error" in rec:
                continue
            p = out / f"seq_{i:05d}.dot"
            p.write_text(render_dot(seqs[i], edges_from_json(rec, vocab, catalog), vocab, catalog,
                                    name=f"seq_{i:05d}"), encoding="utf-8")
            written.append(p)
    return written


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "discover": cmd_discover,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
    "export-dot": cmd_export_dot,
}


def run(command: str, config_path: str | None, overrides: dict) -> int:
    """Execute one command; returns the process exit code."""
    try:
        cfg = load_config(config_path, overrides)
        errors = validate_config(cfg, command)
        if errors:
            raise ConfigError(errors)
        outputs = COMMANDS[command](cfg)
        write_manifest(cfg, command, outputs)
        return 0
    except ConfigError as exc:
        click.echo(json.dumps({"error": "ConfigError", "messages": exc.messages}), err=True)
        return EXIT_CONFIG
    except (OscarError, OSError, ValueError, KeyError) as exc:
        click.echo(json.dumps({"error": type(exc).__name__, "messages": [str(exc)]}), err=True)
        return EXIT_RUNTIME


def _overrides(**flags) -> dict:
    o: dict = {"sampling": {}, "threshold": {}}
    mapping = {
        "n_particles": ("sampling", "n_particles"),
        "strategy": ("sampling", "strategy"),
        "k": ("sampling", "top_k"),
        "p": ("sampling", "top_p"),
        "temperature": ("sampling", "temperature"),
        "context_floor": ("sampling", "context_floor"),
        "z_coeff": ("threshold", "z_coeff"),
    }
    for name, value in flags.items():
        if value is None:
            continue
        if name in mapping:
            sect, key = mapping[name]
            o[sect][key] = value
        else:
            o[name] = value
    return {k: v for k, v in o.items() if v != {}}


def _common(f):
    options = [
        click.option("--config", "config_path", type=click.Path(), help="JSON run config."),
        click.option("--seed", type=int),
        click.option("--n-particles", type=int),
        click.option("--strategy", type=str),
        click.option("--k", type=int, help="top-k cut-off."),
        click.option("--p", type=float, help="nucleus mass."),
        click.option("--temperature", type=float),
        click.option("--context-floor", type=int),
        click.option("--z-coeff", type=float, help="threshold = mean + z * std."),
        click.option("--backend", type=str),
        click.option("--parallelism", type=int),
        click.option("--out", type=click.Path()),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


@click.group()
@click.version_option(__version__)
def main():
    """Per-sequence Markov boundary discovery for multi-label event sequences."""
    level = os.environ.get("OSCAR_KIT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _make(name: str, doc: str):
    @main.command(name=name, help=doc)
    @_common
    def command(config_path, **flags):
        code = run(name, config_path, _overrides(**flags))
        sys.exit(code)

    return command


_make("generate", "Sample train/test datasets and ground-truth boundaries from a generator model.")
_make("fit", "Fit the n-gram density on the training corpus.")
_make("discover", "Recover Markov boundaries for every test sequence; writes JSONL and DOT graphs.")
_make("evaluate", "Score discovered boundaries against ground truth.")
_make("bench", "Time discovery against particle count and batch size.")
_make("export-dot", "Re-render DOT graphs from a discovery JSONL file.")


if __name__ == "__main__":  # pragma: no cover
    main()
