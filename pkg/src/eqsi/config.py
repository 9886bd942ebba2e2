"""One-document run configuration with per-module sections.

The whole experiment is described by a single JSON document so a run
can be reproduced from one artifact.  Sections mirror the package
modules (channel, data, ae, a2c, ...); command-line flags override
dotted paths inside the document, e.g. `channel.noise_sigma=10`.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .a2c import A2CConfig
from .channel import ChannelConfig
from .equalizer import ParamRanges
from .errors import ConfigError, EqsiError
from .io import config_hash
from .latent import AeConfig
from .signal import EyeMask

EQUALIZER_KINDS = ("dfe", "ctle-dfe")


@dataclass
class DataConfig:
    """Segmentation, labeling, and split sizes."""

    n_x: int = 10000
    stride: int = 11
    # Cap on dataset size after extraction; None keeps every segment.
    n_segments: int | None = None
    test_segments: int = 100
    a2c_segments: int = 500
    split_seed: int = 0
    mask_width: float = 35.0
    mask_height: float = 80.0
    mask_center_v: float = 0.0
    # None centers the mask at ui/2.
    mask_center_t: float | None = None

    def __post_init__(self):
        if self.n_x < 2:
            raise ConfigError(f"n_x must be >= 2, got {self.n_x}")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.n_segments is not None and self.n_segments < 1:
            raise ConfigError("n_segments cap must be >= 1 or None")
        if self.test_segments < 1 or self.a2c_segments < 1:
            raise ConfigError("segment split sizes must be >= 1")

    def mask(self, ui: float) -> EyeMask:
        center_t = ui / 2.0 if self.mask_center_t is None else self.mask_center_t
        return EyeMask(
            width=self.mask_width,
            height=self.mask_height,
            center_t=center_t,
            center_v=self.mask_center_v,
        )


@dataclass
class GridSearchConfig:
    """Exhaustive-search budget and the shared baseline objective size."""

    levels: int = 5
    objective_segments: int = 48

    def __post_init__(self):
        if self.objective_segments < 1:
            raise ConfigError("objective_segments must be >= 1")


@dataclass
class CompareConfig:
    """Latent-vs-eye objective comparison (repeated small PSO runs)."""

    trials: int = 10
    swarm_size: int = 12
    iterations: int = 15
    objective_segments: int = 8

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if min(self.swarm_size, self.iterations, self.objective_segments) < 1:
            raise ConfigError("swarm_size, iterations, objective_segments must be >= 1")


@dataclass
class GeneralizeConfig:
    """Cross-unit train/test protocol over perturbed channel variants."""

    train_units: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    heldout_units: tuple[int, ...] = (6, 7)
    unit_bits: int = 300
    eval_segments: int = 25
    a2c_segments: int = 400

    def __post_init__(self):
        self.train_units = tuple(int(u) for u in self.train_units)
        self.heldout_units = tuple(int(u) for u in self.heldout_units)
        if len(self.train_units) < 1 or len(self.heldout_units) < 1:
            raise ConfigError("need at least one training and one held-out unit")
        if len(self.train_units) + len(self.heldout_units) < 2:
            raise ConfigError("generalization needs at least 2 units")
        if self.unit_bits < 100:
            raise ConfigError("unit_bits too small to segment")


@dataclass
class RunConfig:
    """Top-level experiment description; one JSON document end to end."""

    channel: ChannelConfig = field(default_factory=ChannelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    ae: AeConfig = field(default_factory=AeConfig)
    a2c: A2CConfig = field(default_factory=A2CConfig)
    grid: GridSearchConfig = field(default_factory=GridSearchConfig)
    compare: CompareConfig = field(default_factory=CompareConfig)
    generalize: GeneralizeConfig = field(default_factory=GeneralizeConfig)
    kind: str = "dfe"
    seed: int = 0
    outdir: str = "runs/out"

    def __post_init__(self):
        if self.kind not in EQUALIZER_KINDS:
            raise ConfigError(f"kind must be one of {EQUALIZER_KINDS}, got {self.kind!r}")
        if not self.outdir:
            raise ConfigError("outdir must be non-empty")

    def mask(self) -> EyeMask:
        return self.data.mask(self.channel.ui)

    def ranges(self) -> ParamRanges:
        return ParamRanges.dfe_only() if self.kind == "dfe" else ParamRanges.ctle_dfe()

    def to_dict(self) -> dict:
        doc = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            doc[f.name] = dataclasses.asdict(value) if dataclasses.is_dataclass(value) else value
        return doc

    @property
    def hash(self) -> str:
        doc = self.to_dict()
        del doc["outdir"]  # where artifacts land does not identify the experiment
        return config_hash(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        sections = {
            "channel": ChannelConfig,
            "data": DataConfig,
            "ae": AeConfig,
            "a2c": A2CConfig,
            "grid": GridSearchConfig,
            "compare": CompareConfig,
            "generalize": GeneralizeConfig,
        }
        known = set(sections) | {"kind", "seed", "outdir"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, section_cls in sections.items():
            if name in doc:
                kwargs[name] = _build_section(section_cls, doc[name], name)
        for name in ("kind", "seed", "outdir"):
            if name in doc:
                kwargs[name] = doc[name]
        try:
            return cls(**kwargs)
        except EqsiError:
            raise
        except TypeError as exc:
            raise ConfigError(f"bad config value: {exc}") from exc


def _build_section(section_cls, payload, name: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"section {name!r} must be an object, got {type(payload).__name__}")
    field_names = {f.name for f in dataclasses.fields(section_cls)}
    unknown = set(payload) - field_names
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {sorted(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in payload.items()}
    try:
        return section_cls(**kwargs)
    except ConfigError:
        raise
    except (EqsiError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} config: {exc}") from exc


def preset(name: str) -> dict:
    """Named starting documents; `desk` keeps the full pipeline fast.

    Both presets turn on the invalid-repulsion classification term: on the
    synthetic channel the anchor distance only ranks over-equalized
    waveforms below good ones when invalid latents are pushed away, not
    merely left unattracted.
    """
    if name == "desk":
        return {
            "channel": {"n_bits": 1500},
            "data": {"n_x": 1000, "n_segments": 2000},
            "ae": {"epochs": 40, "penalize_invalid": True},
            "a2c": {"epochs": 60, "batch": 16, "lr": 1e-3},
        }
    if name == "full":
        return {"ae": {"penalize_invalid": True}}
    raise ConfigError(f"unknown preset {name!r}; choose desk or full")


def _deep_merge(base: dict, extra: dict) -> dict:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def apply_overrides(doc: dict, assignments) -> dict:
    """Apply `dotted.path=value` assignments; values parse as JSON first."""
    doc = json.loads(json.dumps(doc))  # deep copy, JSON types only
    for assignment in assignments:
        if "=" not in assignment:
            raise ConfigError(f"override must look like path=value, got {assignment!r}")
        path, raw = assignment.split("=", 1)
        keys = path.strip().split(".")
        if not all(keys):
            raise ConfigError(f"bad override path {path!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {path!r} crosses a non-object value")
        node[keys[-1]] = value
    return doc


def load_config(path: str | None = None, preset_name: str = "desk", overrides=()) -> RunConfig:
    """Preset document, then the config file, then dotted overrides."""
    doc = preset(preset_name)
    if path is not None:
        with open(path) as fh:
            file_doc = json.load(fh)
        if not isinstance(file_doc, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        doc = _deep_merge(doc, file_doc)
    doc = apply_overrides(doc, overrides)
    return RunConfig.from_dict(doc)
