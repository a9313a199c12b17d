"""Experiment configuration: INI-style files plus command-line overrides.

Every value has an explicit key; the master seed is mandatory (runs never
fall back to wall-clock seeding) and all effective settings echo into the
report so runs are self-describing.

Example::

    [run]
    seed = 42
    output = out

    [data]
    paths = data/iris.arff, data/blobs.csv
    class_attribute = last
    csv_header = false

    [pool]
    classifiers = naive_bayes_kde, nearest_centroid, knn(k=5), lda, qda

    [preprocess]
    variance_threshold = 0.95
    scope = fold

    [cv]
    folds = 2
    repeats = 5
    split = 2:1

    [methods]
    compare = bootstrap, rrc_beta, rrc_gaussian
    k_bootstrap = 31
    mc_samples = 100000
    sigma_scale = 1.0
    alpha = auto

    [report]
    significance_level = 0.05
    mcp = bergman-hommel
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, replace

from .classifiers import DEFAULT_POOL, ClassifierSpec
from .competence import METHODS, MethodParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    dataset_paths: tuple[str, ...] = ()
    class_attribute: str = "last"
    csv_header: bool = False
    pool: tuple[ClassifierSpec, ...] = DEFAULT_POOL
    methods: tuple[str, ...] = ("bootstrap", "rrc_beta", "rrc_gaussian")
    k_bootstrap: int = 31
    mc_samples: int = 100000
    sigma_scale: float = 1.0
    alpha: float | None = None  # None = 1/M
    variance_threshold: float = 0.95
    preprocess_scope: str = "fold"
    folds: int = 2
    repeats: int = 5
    split: str = "2:1"
    significance_level: float = 0.05
    mcp: str = "bergman-hommel"
    output: str = "out"
    workers: int = 1

    @property
    def method_params(self) -> MethodParams:
        return MethodParams(k_bootstrap=self.k_bootstrap,
                            mc_samples=self.mc_samples,
                            sigma_scale=self.sigma_scale)

    @property
    def train_fraction(self) -> float:
        try:
            a, b = (float(part) for part in self.split.split(":"))
        except ValueError:
            raise ConfigError(f"bad split ratio {self.split!r} (expected A:B)") from None
        if a <= 0 or b <= 0:
            raise ConfigError(f"bad split ratio {self.split!r}: parts must be positive")
        return a / (a + b)

    def validate(self) -> None:
        for method in self.methods:
            if method not in METHODS:
                raise ConfigError(f"unknown competence method {method!r}")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if not self.pool:
            raise ConfigError("classifier pool is empty")
        if self.k_bootstrap < 1:
            raise ConfigError("k_bootstrap must be >= 1")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")
        if self.sigma_scale <= 0:
            raise ConfigError("sigma_scale must be > 0")
        if not 0.0 < self.variance_threshold <= 1.0:
            raise ConfigError("variance_threshold must be in (0, 1]")
        if self.alpha is not None and not 0.0 <= self.alpha < 1.0:
            raise ConfigError("alpha must lie in [0, 1)")
        if self.preprocess_scope not in ("fold", "global"):
            raise ConfigError("preprocess scope must be 'fold' or 'global'")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.mcp not in ("bergman-hommel", "holm"):
            raise ConfigError("mcp must be 'bergman-hommel' or 'holm'")
        if not 0.0 < self.significance_level < 1.0:
            raise ConfigError("significance_level must be in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.train_fraction  # noqa: B018 - raises on a malformed ratio

    def echo_items(self) -> tuple[tuple[str, str], ...]:
        """All effective settings, for the self-describing report."""
        items = [
            ("seed", str(self.seed)),
            ("datasets", ", ".join(self.dataset_paths)),
            ("class_attribute", self.class_attribute),
            ("pool", ", ".join(spec.name for spec in self.pool)),
            ("methods", ", ".join(self.methods)),
            ("k_bootstrap", str(self.k_bootstrap)),
            ("mc_samples", str(self.mc_samples)),
            ("sigma_scale", repr(self.sigma_scale)),
            ("alpha", "1/M" if self.alpha is None else repr(self.alpha)),
            ("variance_threshold", repr(self.variance_threshold)),
            ("preprocess_scope", self.preprocess_scope),
            ("cv", f"{self.repeats}x{self.folds}-fold stratified, split {self.split}"),
            ("significance_level", repr(self.significance_level)),
            ("multiplicity_control", self.mcp),
        ]
        return tuple(items)


def _expand_dataset_paths(raw: str) -> tuple[str, ...]:
    paths = []
    for token in (part.strip() for part in raw.split(",")):
        if not token:
            continue
        if os.path.isdir(token):
            entries = sorted(
                os.path.join(token, name) for name in os.listdir(token)
                if name.lower().endswith((".arff", ".csv")))
            if not entries:
                raise ConfigError(f"directory {token!r} holds no .arff/.csv files")
            paths.extend(entries)
        else:
            paths.append(token)
    return tuple(paths)


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"bad boolean for {key}: {raw!r}")


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key)
        return default

    try:
        seed_raw = get("run", "seed")
        if seed_raw is None:
            raise ConfigError("missing required key: [run] seed")
        kwargs = {"seed": int(seed_raw)}
        if get("run", "output") is not None:
            kwargs["output"] = get("run", "output")
        if get("run", "workers") is not None:
            kwargs["workers"] = int(get("run", "workers"))
        if get("data", "paths") is not None:
            kwargs["dataset_paths"] = _expand_dataset_paths(get("data", "paths"))
        if get("data", "class_attribute") is not None:
            kwargs["class_attribute"] = get("data", "class_attribute")
        if get("data", "csv_header") is not None:
            kwargs["csv_header"] = _parse_bool(get("data", "csv_header"), "csv_header")
        if get("pool", "classifiers") is not None:
            kwargs["pool"] = tuple(
                ClassifierSpec.parse(token)
                for token in get("pool", "classifiers").split(",") if token.strip())
        if get("preprocess", "variance_threshold") is not None:
            kwargs["variance_threshold"] = float(get("preprocess", "variance_threshold"))
        if get("preprocess", "scope") is not None:
            kwargs["preprocess_scope"] = get("preprocess", "scope").strip()
        if get("cv", "folds") is not None:
            kwargs["folds"] = int(get("cv", "folds"))
        if get("cv", "repeats") is not None:
            kwargs["repeats"] = int(get("cv", "repeats"))
        if get("cv", "split") is not None:
            kwargs["split"] = get("cv", "split").strip()
        if get("methods", "compare") is not None:
            kwargs["methods"] = tuple(
                token.strip() for token in get("methods", "compare").split(",")
                if token.strip())
        if get("methods", "k_bootstrap") is not None:
            kwargs["k_bootstrap"] = int(get("methods", "k_bootstrap"))
        if get("methods", "mc_samples") is not None:
            kwargs["mc_samples"] = int(get("methods", "mc_samples"))
        if get("methods", "sigma_scale") is not None:
            kwargs["sigma_scale"] = float(get("methods", "sigma_scale"))
        if get("methods", "alpha") is not None:
            raw_alpha = get("methods", "alpha").strip().lower()
            kwargs["alpha"] = None if raw_alpha == "auto" else float(raw_alpha)
        if get("report", "significance_level") is not None:
            kwargs["significance_level"] = float(get("report", "significance_level"))
        if get("report", "mcp") is not None:
            kwargs["mcp"] = get("report", "mcp").strip()
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from exc

    config = ExperimentConfig(**kwargs)
    config.validate()
    return config


def apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    """Fold parsed CLI flags into a config (flags win)."""
    updates = {}
    mapping = {
        "seed": "seed", "out": "output", "workers": "workers",
        "method": None,  # handled below
        "alpha": "alpha", "k_bootstrap": "k_bootstrap",
        "mc_samples": "mc_samples", "sigma_scale": "sigma_scale",
        "variance_threshold": "variance_threshold",
        "folds": "folds", "repeats": "repeats", "mcp": "mcp",
    }
    for flag, attr in mapping.items():
        value = getattr(args, flag, None)
        if value is None or attr is None:
            continue
        updates[attr] = value
    method = getattr(args, "method", None)
    if method:
        updates["methods"] = tuple(token.strip() for token in method.split(","))
    config = replace(config, **updates)
    config.validate()
    return config
