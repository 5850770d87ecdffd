"""Run configuration: flat ``section.key = value`` text files.

Unknown keys are rejected, every value is validated before any command
touches data, and serialize_config emits a canonical form (sorted keys) used
for the model-artifact snapshot and the ablation ledger.
"""

from dataclasses import dataclass, field

from .dataio import RESAMPLE_STRATEGIES, LabelMap
from .encoder import EncoderConfig
from .errors import ConfigError
from .spectral import WINDOW_KINDS, WindowSpec
from .training import ModelSettings, TrainSettings


@dataclass(frozen=True)
class DataConfig:
    path: str = ""
    delimiter: str = ","
    label_column: str = "label"
    positive_labels: tuple = ()
    negative_labels: tuple = ()

    def label_map(self):
        if not self.positive_labels or not self.negative_labels:
            raise ConfigError(
                "data.positive_labels and data.negative_labels must both be set"
            )
        return LabelMap(frozenset(self.positive_labels), frozenset(self.negative_labels))


@dataclass(frozen=True)
class PrepConfig:
    zero_fraction_threshold: float = 0.5
    resample: str = "undersample-majority"
    test_fraction: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.zero_fraction_threshold <= 1.0:
            raise ConfigError(
                f"prep.zero_fraction_threshold must be in [0, 1], got "
                f"{self.zero_fraction_threshold}"
            )
        if self.resample != "none" and self.resample not in RESAMPLE_STRATEGIES:
            raise ConfigError(
                f"prep.resample must be 'none' or one of {RESAMPLE_STRATEGIES}, "
                f"got {self.resample!r}"
            )
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(
                f"prep.test_fraction must be in (0, 1), got {self.test_fraction}"
            )


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    prep: PrepConfig = field(default_factory=PrepConfig)
    model: ModelSettings = field(default_factory=ModelSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    out_dir: str = "runs/latest"
    log_file: str = ""


def _parse_bool(text):
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_labels(text):
    return tuple(part.strip() for part in text.split("|") if part.strip())


# key -> (converter, default-producing attribute path)
_SCHEMA = {
    "data.path": str,
    "data.delimiter": str,
    "data.label_column": str,
    "data.positive_labels": _parse_labels,
    "data.negative_labels": _parse_labels,
    "prep.zero_fraction_threshold": float,
    "prep.resample": str,
    "prep.test_fraction": float,
    "window.frame_length": int,
    "window.hop": int,
    "window.kind": str,
    "window.pre_emphasis": float,
    "mel.n_filters": int,
    "mel.n_coeffs": int,
    "mel.sample_rate": float,
    "mel.f_min": float,
    "mel.f_max": float,
    "mel.log_floor": float,
    "mel.lambda_orth": float,
    "encoder.n_blocks": int,
    "encoder.hidden_width": int,
    "encoder.embedding_dim": int,
    "pca.components": int,
    "pipeline.variant": str,
    "train.lr": float,
    "train.epochs": int,
    "train.batch_size": int,
    "train.seed": int,
    "train.clip_norm": float,
    "train.psd_projection": _parse_bool,
    "train.early_stop_patience": int,
    "out.dir": str,
    "out.log": str,
}

_DEFAULTS = {
    "data.path": "",
    "data.delimiter": ",",
    "data.label_column": "label",
    "data.positive_labels": (),
    "data.negative_labels": (),
    "prep.zero_fraction_threshold": 0.5,
    "prep.resample": "undersample-majority",
    "prep.test_fraction": 0.2,
    "window.frame_length": 64,
    "window.hop": 32,
    "window.kind": "hamming",
    "window.pre_emphasis": 0.97,
    "mel.n_filters": 20,
    "mel.n_coeffs": 12,
    "mel.sample_rate": 100.0,
    "mel.f_min": 0.0,
    "mel.f_max": 50.0,
    "mel.log_floor": 1e-10,
    "mel.lambda_orth": 0.01,
    "encoder.n_blocks": 3,
    "encoder.hidden_width": 64,
    "encoder.embedding_dim": 16,
    "pca.components": 0,
    "pipeline.variant": "mfcc",
    "train.lr": 1e-3,
    "train.epochs": 100,
    "train.batch_size": 64,
    "train.seed": 7,
    "train.clip_norm": 0.0,
    "train.psd_projection": False,
    "train.early_stop_patience": 0,
    "out.dir": "runs/latest",
    "out.log": "",
}


def parse_config(text):
    """RunConfig from config text; unknown keys and bad values raise ConfigError."""
    values = dict(_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value': {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _SCHEMA[key](value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(
                f"config line {lineno}: bad value for {key!r}: {exc}"
            ) from exc
    return _build(values)


def _build(v):
    if v["window.kind"] not in WINDOW_KINDS:
        raise ConfigError(f"window.kind must be one of {WINDOW_KINDS}")
    window = WindowSpec(
        v["window.frame_length"], v["window.hop"], v["window.kind"],
        v["window.pre_emphasis"],
    )
    if v["pipeline.variant"] == "mfcc" and window.n_bins < v["mel.n_filters"] + 2:
        raise ConfigError(
            f"window.frame_length={window.frame_length} gives {window.n_bins} "
            f"spectrum bins but mel.n_filters={v['mel.n_filters']} needs at "
            f"least {v['mel.n_filters'] + 2}"
        )
    encoder = EncoderConfig(
        v["encoder.n_blocks"], v["encoder.hidden_width"], v["encoder.embedding_dim"]
    )
    model = ModelSettings(
        variant=v["pipeline.variant"],
        window=window,
        n_filters=v["mel.n_filters"],
        n_coeffs=v["mel.n_coeffs"],
        sample_rate=v["mel.sample_rate"],
        f_min=v["mel.f_min"],
        f_max=v["mel.f_max"],
        log_floor=v["mel.log_floor"],
        lambda_orth=v["mel.lambda_orth"],
        encoder=encoder,
        pca_components=v["pca.components"],
    )
    train = TrainSettings(
        lr=v["train.lr"],
        epochs=v["train.epochs"],
        batch_size=v["train.batch_size"],
        seed=v["train.seed"],
        clip_norm=v["train.clip_norm"],
        psd_safeguard=v["train.psd_projection"],
        early_stop_patience=v["train.early_stop_patience"],
    )
    data = DataConfig(
        v["data.path"], v["data.delimiter"], v["data.label_column"],
        v["data.positive_labels"], v["data.negative_labels"],
    )
    prep = PrepConfig(
        v["prep.zero_fraction_threshold"], v["prep.resample"], v["prep.test_fraction"]
    )
    return RunConfig(data, prep, model, train, v["out.dir"], v["out.log"])


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def config_values(cfg):
    """The flat key -> value mapping for a RunConfig."""
    return {
        "data.path": cfg.data.path,
        "data.delimiter": cfg.data.delimiter,
        "data.label_column": cfg.data.label_column,
        "data.positive_labels": cfg.data.positive_labels,
        "data.negative_labels": cfg.data.negative_labels,
        "prep.zero_fraction_threshold": cfg.prep.zero_fraction_threshold,
        "prep.resample": cfg.prep.resample,
        "prep.test_fraction": cfg.prep.test_fraction,
        "window.frame_length": cfg.model.window.frame_length,
        "window.hop": cfg.model.window.hop,
        "window.kind": cfg.model.window.window_kind,
        "window.pre_emphasis": cfg.model.window.pre_emphasis_alpha,
        "mel.n_filters": cfg.model.n_filters,
        "mel.n_coeffs": cfg.model.n_coeffs,
        "mel.sample_rate": cfg.model.sample_rate,
        "mel.f_min": cfg.model.f_min,
        "mel.f_max": cfg.model.f_max,
        "mel.log_floor": cfg.model.log_floor,
        "mel.lambda_orth": cfg.model.lambda_orth,
        "encoder.n_blocks": cfg.model.encoder.n_blocks,
        "encoder.hidden_width": cfg.model.encoder.hidden_width,
        "encoder.embedding_dim": cfg.model.encoder.embedding_dim,
        "pca.components": cfg.model.pca_components,
        "pipeline.variant": cfg.model.variant,
        "train.lr": cfg.train.lr,
        "train.epochs": cfg.train.epochs,
        "train.batch_size": cfg.train.batch_size,
        "train.seed": cfg.train.seed,
        "train.clip_norm": cfg.train.clip_norm,
        "train.psd_projection": cfg.train.psd_safeguard,
        "train.early_stop_patience": cfg.train.early_stop_patience,
        "out.dir": cfg.out_dir,
        "out.log": cfg.log_file,
    }


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return "|".join(value)
    return str(value)


def serialize_config(cfg):
    """Canonical config text: sorted keys, one per line, round-trips exactly."""
    values = config_values(cfg)
    return "\n".join(f"{key} = {_format_value(values[key])}" for key in sorted(values))
