"""Application-wide constants and the JSON run configuration."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

from molguide.utils.errors import ConfigError


# ─── Diffusion ──────────────────────────────────────────────────────
DIFFUSION_STEPS = int(os.getenv("MOLGUIDE_DIFFUSION_STEPS", "500"))
COSINE_OFFSET = 0.008           # s of the cosine cumulative schedule
MAX_NODES = 38                  # largest heavy-atom count kept for training

# ─── Model ──────────────────────────────────────────────────────────
N_LAYERS = 4
HIDDEN_NODE = 64
HIDDEN_EDGE = 32
HIDDEN_GLOBAL = 32
N_HEADS = 4
DIAGONAL_NONE_LOGIT = 30.0      # margin given to "none" on self-pairs

# ─── Training ───────────────────────────────────────────────────────
LAMBDA_EDGE = 5.0
LEARNING_RATE = 3e-4
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
BATCH_SIZE = 32
TRAIN_STEPS = 2000
LOG_EVERY = 50
CHECKPOINT_EVERY = 500
LOSS_HISTORY_SIZE = 1000        # rolling loss window kept by the monitor

# ─── Guidance ───────────────────────────────────────────────────────
LAMBDA_GUIDANCE = 1000.0
GUIDANCE_SIGN = 1
BALANCE_TOLERANCE = 0.1         # |minority| within ±10% of |majority|
AUC_STEPS = (1, 100, 250, 500)  # noise steps for stratified held-out AUC

# ─── Fingerprints / screening ───────────────────────────────────────
SCREEN_RADIUS = 2
SCREEN_WIDTH = 2048
CLUSTER_RADIUS = 10
CLUSTER_WIDTH = 2048
SIMILARITY_THRESHOLD = 0.5

# ─── Analysis ───────────────────────────────────────────────────────
N_CLUSTERS = 30
KMEANS_MAX_ITER = 100

# ─── Dataset filter ─────────────────────────────────────────────────
WEIGHT_RANGE = (250.0, 350.0)   # daltons, implicit H included
MAX_RING_SIZE = 8

# ─── Paths ──────────────────────────────────────────────────────────
LOG_FILE = os.getenv(
    "MOLGUIDE_LOG_FILE", os.path.join(os.path.expanduser("~"), ".molguide.log")
)
LOG_LEVEL = os.getenv("MOLGUIDE_LOG_LEVEL", "INFO")
OUTPUT_DIR = os.getenv("MOLGUIDE_OUTPUT_DIR", "runs")


# ─── Run configuration ─────────────────────────────────────────────


@dataclass
class ModelConfig:
    """Graph transformer sizes (shared by denoiser and classifier)."""
    n_layers: int = N_LAYERS
    hidden_node: int = HIDDEN_NODE
    hidden_edge: int = HIDDEN_EDGE
    hidden_global: int = HIDDEN_GLOBAL
    n_heads: int = N_HEADS
    dropout: float = 0.0


@dataclass
class RunConfig:
    """Everything a run depends on; echoed into every artifact."""
    seed: int = 0
    diffusion_steps: int = DIFFUSION_STEPS
    model: ModelConfig = field(default_factory=ModelConfig)
    dtype: str = "float32"

    # training
    lambda_edge: float = LAMBDA_EDGE
    learning_rate: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    train_steps: int = TRAIN_STEPS
    log_every: int = LOG_EVERY
    checkpoint_every: int = CHECKPOINT_EVERY
    max_nodes: int = MAX_NODES

    # guidance
    lambda_guidance: float = LAMBDA_GUIDANCE
    guidance_sign: int = GUIDANCE_SIGN
    target_label: int = 1
    classifier_loss: str = "bce"
    held_out_fraction: float = 0.1

    # fingerprints
    screen_radius: int = SCREEN_RADIUS
    screen_width: int = SCREEN_WIDTH
    cluster_radius: int = CLUSTER_RADIUS
    cluster_width: int = CLUSTER_WIDTH
    similarity_threshold: float = SIMILARITY_THRESHOLD
    n_clusters: int = N_CLUSTERS

    # data
    train_path: str = ""
    classifier_path: str = ""
    smiles_column: str = "smiles"
    label_column: str = "HIV_active"
    apply_filter: bool = True
    output_dir: str = OUTPUT_DIR

    def __post_init__(self) -> None:
        if isinstance(self.model, dict):
            self.model = _build(ModelConfig, self.model, "model")
        self.validate()

    def validate(self) -> None:
        """Raise ConfigError on out-of-range values."""
        if self.diffusion_steps < 1:
            raise ConfigError("diffusion_steps must be >= 1")
        if self.guidance_sign not in (1, -1):
            raise ConfigError("guidance_sign must be +1 or -1")
        if self.target_label not in (0, 1):
            raise ConfigError("target_label must be 0 or 1")
        if self.lambda_guidance < 0:
            raise ConfigError("lambda_guidance must be >= 0")
        if self.classifier_loss not in ("bce", "mse"):
            raise ConfigError("classifier_loss must be 'bce' or 'mse'")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be 'float32' or 'float64'")
        if self.model.hidden_node % self.model.n_heads:
            raise ConfigError("model.hidden_node must be divisible by model.n_heads")
        if not 0.0 <= self.held_out_fraction < 1.0:
            raise ConfigError("held_out_fraction must be in [0, 1)")
        for name in ("screen_width", "cluster_width"):
            width = getattr(self, name)
            if width < 64 or width & (width - 1):
                raise ConfigError(f"{name} must be a power of two >= 64")

    def to_dict(self) -> dict:
        return asdict(self)

    def echo(self) -> str:
        """Canonical one-line JSON used in artifact headers."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a copy with the non-None overrides applied."""
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in data:
                raise ConfigError(f"Unknown config field: {key}")
            data[key] = value
        return _build(RunConfig, data, "")


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"Expected an object for '{prefix or 'config'}'")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"Unknown config field: {prefix + '.' if prefix else ''}{key}")
    kwargs = {}
    for key, value in data.items():
        default = getattr(cls(), key) if cls is ModelConfig else None
        if key == "model":
            kwargs[key] = _build(ModelConfig, value, "model")
            continue
        kwargs[key] = value
        if default is not None and not _type_ok(default, value):
            raise ConfigError(f"Bad type for model.{key}: {value!r}")
    try:
        obj = cls(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    if cls is RunConfig:
        _check_types(obj)
    return obj


def _type_ok(default: Any, value: Any) -> bool:
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, str):
        return isinstance(value, str)
    return True


def _check_types(cfg: RunConfig) -> None:
    reference = RunConfig()
    for f in fields(RunConfig):
        default = getattr(reference, f.name)
        if is_dataclass(default):
            continue
        if not _type_ok(default, getattr(cfg, f.name)):
            raise ConfigError(f"Bad type for {f.name}: {getattr(cfg, f.name)!r}")


def load_config(path: str | os.PathLike | None) -> RunConfig:
    """Load a RunConfig from JSON; ``None`` gives the defaults.

    Raises:
        ConfigError: unreadable file, invalid JSON, unknown or ill-typed fields.
    """
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path}: {e}") from e
    return _build(RunConfig, data, "")
