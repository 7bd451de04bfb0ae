"""Experiment config files: strict parsing, defaults, and resolution.

Configs are JSON. Unknown keys anywhere are rejected, so a typo in a
hyperparameter name fails loudly instead of silently running defaults.
The fully-defaulted dict ("resolved config") is written next to the run's
outputs and is itself a valid config that reproduces the run exactly.

Top-level schema (defaults in parentheses):

    name            experiment name ("experiment")
    output_dir      artifact directory ("out/<name>")
    dataset         exactly one of:
                      {"synthetic": {"n_train" (5000), "n_test" (2000),
                                     "n_features" (20), "n_classes" (10),
                                     "class_sep" (1.0), "seed" (0)}}
                      {"idx": {"train_images", "train_labels",
                               "test_images", "test_labels"}}
    clients         {"k" (100), "participation_rate" (0.1)}
    partition       {"alpha" (0.2), "seed" (0)}
    model           {"kind" (logreg), "hidden" (32), "init_seed" (0)}
    strategy        {"kind" (feddpc), "lambda" (1.0), "eps" (1e-12)}
    local           {"lr" (0.05), "batch_size" (32), "epochs" (1)}
    server_lr       global step size (1.0)
    rounds          communication rounds (50)
    eval_every      test-set evaluation cadence (1)
    run_seed        master seed for sampling and shuffling (0)
"""

from __future__ import annotations

import json

from .client import ClientConfig
from .data import Dataset, PartitionSpec, load_idx, synth_classification
from .model import MODEL_KINDS, ModelSpec
from .orchestrator import RunConfig
from .server import STRATEGY_KINDS, Strategy


class ConfigError(ValueError):
    """Invalid config file, key, or value."""


_SYNTH_DEFAULTS = {
    "n_train": 5000,
    "n_test": 2000,
    "n_features": 20,
    "n_classes": 10,
    "class_sep": 1.0,
    "seed": 0,
}
_IDX_KEYS = ("train_images", "train_labels", "test_images", "test_labels")

_DEFAULTS = {
    "name": "experiment",
    "output_dir": None,  # derived from name when absent
    "dataset": {"synthetic": dict(_SYNTH_DEFAULTS)},
    "clients": {"k": 100, "participation_rate": 0.1},
    "partition": {"alpha": 0.2, "seed": 0},
    "model": {"kind": "logreg", "hidden": 32, "init_seed": 0},
    "strategy": {"kind": "feddpc", "lambda": 1.0, "eps": 1e-12},
    "local": {"lr": 0.05, "batch_size": 32, "epochs": 1},
    "server_lr": 1.0,
    "rounds": 50,
    "eval_every": 1,
    "run_seed": 0,
}

# fields that must match across configs handed to `compare`
FAIRNESS_FIELDS = ("dataset", "clients", "partition", "model", "local", "server_lr", "rounds", "eval_every", "run_seed")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply `a.b.c=value` overrides; values parse as JSON, else strings."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        dotted, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} descends into non-object key {part!r}")
        node[parts[-1]] = value
    return raw


def _reject_unknown(raw: dict, allowed: dict | tuple, path: str) -> None:
    keys = allowed.keys() if isinstance(allowed, dict) else allowed
    for key in raw:
        if key not in keys:
            raise ConfigError(f"unknown config key {path}{key!r}")


def _expect(value, types, path: str):
    if isinstance(value, bool) or not isinstance(value, types):
        want = types[0].__name__ if isinstance(types, tuple) else types.__name__
        raise ConfigError(f"config key {path} must be a {want}, got {value!r}")
    return value


def _number(value, path: str) -> float:
    return float(_expect(value, (int, float), path))


def _integer(value, path: str) -> int:
    return _expect(value, (int,), path)


def _string(value, path: str) -> str:
    return _expect(value, (str,), path)


def _merge_section(raw: dict, section: str, defaults: dict) -> dict:
    given = raw.get(section, {})
    if not isinstance(given, dict):
        raise ConfigError(f"config key {section!r} must be an object")
    _reject_unknown(given, defaults, f"{section}.")
    return {key: given.get(key, default) for key, default in defaults.items()}


def resolve(raw: dict) -> dict:
    """Validate a raw config dict and fill every default.

    Returns a plain dict in canonical key order, suitable both for running
    and for serialising as resolved_config.json.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _DEFAULTS, "")

    out: dict = {}
    out["name"] = _string(raw.get("name", _DEFAULTS["name"]), "name")
    out["output_dir"] = _string(raw.get("output_dir", f"out/{out['name']}"), "output_dir")
    out["dataset"] = _resolve_dataset_section(raw.get("dataset", _DEFAULTS["dataset"]))
    for section in ("clients", "partition", "model", "strategy", "local"):
        out[section] = _merge_section(raw, section, _DEFAULTS[section])
    out["server_lr"] = _number(raw.get("server_lr", _DEFAULTS["server_lr"]), "server_lr")
    out["rounds"] = _integer(raw.get("rounds", _DEFAULTS["rounds"]), "rounds")
    out["eval_every"] = _integer(raw.get("eval_every", _DEFAULTS["eval_every"]), "eval_every")
    out["run_seed"] = _integer(raw.get("run_seed", _DEFAULTS["run_seed"]), "run_seed")

    _integer(out["clients"]["k"], "clients.k")
    _number(out["clients"]["participation_rate"], "clients.participation_rate")
    _number(out["partition"]["alpha"], "partition.alpha")
    _integer(out["partition"]["seed"], "partition.seed")
    if out["model"]["kind"] not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {out['model']['kind']!r}")
    _integer(out["model"]["hidden"], "model.hidden")
    _integer(out["model"]["init_seed"], "model.init_seed")
    if out["strategy"]["kind"] not in STRATEGY_KINDS:
        raise ConfigError(
            f"strategy.kind must be one of {STRATEGY_KINDS}, got {out['strategy']['kind']!r}"
        )
    out["strategy"]["lambda"] = _number(out["strategy"]["lambda"], "strategy.lambda")
    out["strategy"]["eps"] = _number(out["strategy"]["eps"], "strategy.eps")
    out["local"]["lr"] = _number(out["local"]["lr"], "local.lr")
    _integer(out["local"]["batch_size"], "local.batch_size")
    _integer(out["local"]["epochs"], "local.epochs")
    return out


def _resolve_dataset_section(given) -> dict:
    if not isinstance(given, dict):
        raise ConfigError("config key 'dataset' must be an object")
    _reject_unknown(given, ("synthetic", "idx"), "dataset.")
    if len(given) != 1:
        raise ConfigError("dataset must contain exactly one of 'synthetic' or 'idx'")
    if "synthetic" in given:
        section = given["synthetic"]
        if not isinstance(section, dict):
            raise ConfigError("dataset.synthetic must be an object")
        _reject_unknown(section, _SYNTH_DEFAULTS, "dataset.synthetic.")
        merged = {key: section.get(key, default) for key, default in _SYNTH_DEFAULTS.items()}
        for key in ("n_train", "n_test", "n_features", "n_classes", "seed"):
            _integer(merged[key], f"dataset.synthetic.{key}")
        merged["class_sep"] = _number(merged["class_sep"], "dataset.synthetic.class_sep")
        return {"synthetic": merged}
    section = given["idx"]
    if not isinstance(section, dict):
        raise ConfigError("dataset.idx must be an object")
    _reject_unknown(section, _IDX_KEYS, "dataset.idx.")
    for key in _IDX_KEYS:
        if key not in section:
            raise ConfigError(f"dataset.idx.{key} is required")
        _string(section[key], f"dataset.idx.{key}")
    return {"idx": {key: section[key] for key in _IDX_KEYS}}


def load_datasets(resolved: dict) -> tuple[Dataset, Dataset]:
    """Materialise (train, test) from the resolved dataset section.

    Synthetic data draws train and test jointly (shared class means) and
    splits by position.
    """
    source = resolved["dataset"]
    if "synthetic" in source:
        p = source["synthetic"]
        full = synth_classification(
            p["n_train"] + p["n_test"], p["n_features"], p["n_classes"], p["class_sep"], p["seed"]
        )
        train = Dataset(full.features[: p["n_train"]], full.labels[: p["n_train"]], full.n_classes)
        test = Dataset(full.features[p["n_train"] :], full.labels[p["n_train"] :], full.n_classes)
        return train, test
    p = source["idx"]
    train = load_idx(p["train_images"], p["train_labels"])
    test = load_idx(p["test_images"], p["test_labels"])
    if test.n_classes > train.n_classes:
        raise ConfigError(
            f"test labels reach class {test.n_classes - 1} but train has only {train.n_classes} classes"
        )
    test = Dataset(test.features, test.labels, train.n_classes)
    return train, test


def build_run_config(resolved: dict, train: Dataset) -> RunConfig:
    """Assemble the typed run configuration; model dims come from the data."""
    return RunConfig(
        k=resolved["clients"]["k"],
        participation_rate=resolved["clients"]["participation_rate"],
        rounds=resolved["rounds"],
        strategy=Strategy(
            kind=resolved["strategy"]["kind"],
            lam=resolved["strategy"]["lambda"],
            eps=resolved["strategy"]["eps"],
        ),
        client_cfg=ClientConfig(
            local_lr=resolved["local"]["lr"],
            batch_size=resolved["local"]["batch_size"],
            local_epochs=resolved["local"]["epochs"],
        ),
        server_lr=resolved["server_lr"],
        model=ModelSpec(
            kind=resolved["model"]["kind"],
            n_features=train.n_features,
            n_classes=train.n_classes,
            hidden=resolved["model"]["hidden"],
            init_seed=resolved["model"]["init_seed"],
        ),
        partition=PartitionSpec(
            k=resolved["clients"]["k"],
            alpha=resolved["partition"]["alpha"],
            seed=resolved["partition"]["seed"],
        ),
        run_seed=resolved["run_seed"],
        eval_every=resolved["eval_every"],
    )
