"""Run configuration: ``key = value`` text files with validated fields."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # model / optimization
    tau: float = 1.0
    lr_pretrain: float = 1e-3
    lr_tune: float = 1e-2
    epochs_pretrain: int = 100
    epochs_tune: int = 200
    delta: int = 1
    hidden_dim: int = 64
    num_layers: int = 3
    negatives_per_positive: int = 1
    mode: str = "plain"
    seed: int = 0
    num_triplets: int = 1000
    batch_size: int = 128
    pretrain_val_fraction: float = 0.1
    # downstream episodes
    task: str = "nc"
    shots: int = 1
    num_tasks: int = 100
    val_fraction: float = 0.5
    eval_every: int = 20
    prompt_mode: str = "dual"
    ego_delta: int = -1  # -1: same as delta
    lp_negatives: int = 10
    lp_queries: int = 10
    lp_holdout_fraction: float = 0.0
    # synthetic data
    num_types: int = 2
    nodes_per_type: int = 50
    num_classes: int = 3
    intra_edge_prob: float = 0.1
    inter_edge_prob: float = 0.05
    feature_dim: int = 8
    class_signal: float = 2.0
    # paths and process
    node_file: str = ""
    edge_file: str = ""
    label_file: str = ""
    checkpoint: str = ""
    out: str = ""
    threads: int = 1

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        positive = ["tau", "lr_pretrain", "lr_tune", "hidden_dim", "num_layers",
                    "negatives_per_positive", "num_triplets", "shots", "num_tasks", "eval_every",
                    "lp_negatives", "lp_queries", "num_types", "nodes_per_type", "num_classes",
                    "feature_dim", "threads"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("epochs_pretrain", "epochs_tune", "delta", "batch_size"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("pretrain_val_fraction", "val_fraction", "lp_holdout_fraction",
                     "intra_edge_prob", "inter_edge_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {getattr(self, name)}")
        if self.pretrain_val_fraction >= 1.0 or self.val_fraction >= 1.0:
            raise ConfigError("validation fractions must leave some data for training/testing")
        if self.ego_delta < -1:
            raise ConfigError("ego_delta must be >= 0, or -1 to reuse delta")
        choices = {"mode": ("plain", "templated"), "task": ("nc", "gc", "lp"),
                   "prompt_mode": ("dual", "feat", "het", "identity")}
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

    @property
    def effective_ego_delta(self) -> int:
        return self.delta if self.ego_delta < 0 else self.ego_delta

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, pairs: dict[str, str]) -> "RunConfig":
        return self.replace(**_coerce_all(pairs))

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n" for f in fields(self))

    def digest(self) -> str:
        """Hash of the settings that can change results (not threads or output paths)."""
        settings = {k: v for k, v in dataclasses.asdict(self).items() if k not in _PROCESS_KEYS}
        blob = json.dumps(settings, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


_PROCESS_KEYS = frozenset({"threads", "out", "checkpoint"})
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _TYPES[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None
    return raw


def _coerce_all(pairs: dict[str, str]) -> dict:
    return {k: _coerce(k, v) for k, v in pairs.items()}


def parse_config_text(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def load_config(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read a config file (optional) then apply string overrides."""
    pairs = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                pairs = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    pairs.update(overrides or {})
    try:
        return RunConfig(**_coerce_all(pairs))
    except TypeError as exc:  # pragma: no cover - guarded by _coerce
        raise ConfigError(str(exc)) from None
