"""Run configuration: a flat key/value text format with documented defaults.

Config files contain one ``key = value`` assignment per line; ``#`` starts a
comment.  Unknown keys are rejected.  Integer tuples are written as
comma-separated lists (``encoder_channels = 8,16,32``).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

from .errors import ConfigError

# key -> (default, help). Order here is the canonical serialization order.
DEFAULTS = {
    "seed": (0, "global RNG seed for all stages and sampling"),
    "threads": (0, "torch CPU threads; 0 = single-threaded (bit-reproducible runs)"),
    "scene_extent": (1.0, "half-size of the axis-aligned scene cube [-e, e]^3"),
    "grid_resolution": (32, "nodes per axis of the factorized grid"),
    "grid_rank": (4, "rank of the plane/line factorization"),
    "basic_channels": (48, "channel count of basic point features"),
    "near": (0.6, "ray sampling start distance"),
    "far": (4.2, "ray sampling end distance"),
    "samples_per_ray": (32, "samples per camera ray"),
    "chunk_rays": (4096, "rays per rendering chunk (memory bound)"),
    "encoder_mode": ("tiny", "perceptual encoder source: 'tiny' or 'file'"),
    "encoder_path": ("", "encoder weights checkpoint (encoder_mode = file)"),
    "encoder_channels": ((8, 16, 32), "tap widths of the tiny random encoder"),
    "encoder_seed": (7, "seed for tiny random encoder weights"),
    "resize_policy": ("error", "non /4-divisible images: 'error' or 'resize'"),
    "mlfa_depth": (2, "linear layers per level in the feature adaptor"),
    "dsi_spatial_depth": (3, "conv+pool blocks in the injection generators"),
    "dsi_se_reduction": (4, "bottleneck ratio of the channel-gating branch"),
    "mlcd_stage_convs": (2, "fusion convolutions per decoder cascade stage"),
    "mlcd_dilations": ((4, 2, 1), "dilation rates: high+mid stage, +low stage, RGB conv"),
    "stage0_iters": (800, "photometric pre-training iterations (base field)"),
    "stage0_lr_grid": (0.1, "pre-training learning rate for grid tensors"),
    "stage0_lr_net": (5e-3, "pre-training learning rate for projection/RGB head"),
    "stage0_rays_per_batch": (4096, "rays per pre-training step"),
    "stage1_iters": (500, "feature-grid reconstruction iterations"),
    "stage1_lr": (1e-3, "learning rate for adaptor + decoder in stage1"),
    "stage2_iters": (1000, "stylization training iterations"),
    "stage2_lr_style": (1e-3, "learning rate for LIN + injection generators"),
    "stage2_lr_decoder": (1e-5, "learning rate for the decoder in stage2"),
    "style_weight": (30.0, "lambda balancing style loss against content loss"),
    "injection": ("dsi", "style injection mode: 'dsi' or 'adain'"),
    "levels": ("multi", "injection level set: 'multi' or 'single' (high only)"),
    "jitter": (False, "stratified jitter of ray samples during pre-training"),
    "views_dir": ("", "directory with posed training views (camera manifest)"),
    "styles_dir": ("", "directory of style reference images"),
}

_CHOICES = {
    "encoder_mode": ("tiny", "file"),
    "resize_policy": ("error", "resize"),
    "injection": ("dsi", "adain"),
    "levels": ("multi", "single"),
}


@dataclass
class RunConfig:
    seed: int = DEFAULTS["seed"][0]
    threads: int = DEFAULTS["threads"][0]
    scene_extent: float = DEFAULTS["scene_extent"][0]
    grid_resolution: int = DEFAULTS["grid_resolution"][0]
    grid_rank: int = DEFAULTS["grid_rank"][0]
    basic_channels: int = DEFAULTS["basic_channels"][0]
    near: float = DEFAULTS["near"][0]
    far: float = DEFAULTS["far"][0]
    samples_per_ray: int = DEFAULTS["samples_per_ray"][0]
    chunk_rays: int = DEFAULTS["chunk_rays"][0]
    encoder_mode: str = DEFAULTS["encoder_mode"][0]
    encoder_path: str = DEFAULTS["encoder_path"][0]
    encoder_channels: tuple = DEFAULTS["encoder_channels"][0]
    encoder_seed: int = DEFAULTS["encoder_seed"][0]
    resize_policy: str = DEFAULTS["resize_policy"][0]
    mlfa_depth: int = DEFAULTS["mlfa_depth"][0]
    dsi_spatial_depth: int = DEFAULTS["dsi_spatial_depth"][0]
    dsi_se_reduction: int = DEFAULTS["dsi_se_reduction"][0]
    mlcd_stage_convs: int = DEFAULTS["mlcd_stage_convs"][0]
    mlcd_dilations: tuple = DEFAULTS["mlcd_dilations"][0]
    stage0_iters: int = DEFAULTS["stage0_iters"][0]
    stage0_lr_grid: float = DEFAULTS["stage0_lr_grid"][0]
    stage0_lr_net: float = DEFAULTS["stage0_lr_net"][0]
    stage0_rays_per_batch: int = DEFAULTS["stage0_rays_per_batch"][0]
    stage1_iters: int = DEFAULTS["stage1_iters"][0]
    stage1_lr: float = DEFAULTS["stage1_lr"][0]
    stage2_iters: int = DEFAULTS["stage2_iters"][0]
    stage2_lr_style: float = DEFAULTS["stage2_lr_style"][0]
    stage2_lr_decoder: float = DEFAULTS["stage2_lr_decoder"][0]
    style_weight: float = DEFAULTS["style_weight"][0]
    injection: str = DEFAULTS["injection"][0]
    levels: str = DEFAULTS["levels"][0]
    jitter: bool = DEFAULTS["jitter"][0]
    views_dir: str = DEFAULTS["views_dir"][0]
    styles_dir: str = DEFAULTS["styles_dir"][0]

    def __post_init__(self):
        self.validate()

    def validate(self):
        for key, choices in _CHOICES.items():
            if getattr(self, key) not in choices:
                raise ConfigError(f"{key} must be one of {choices}, got {getattr(self, key)!r}")
        for key in ("stage0_iters", "stage1_iters", "stage2_iters"):
            if getattr(self, key) < 0:
                raise ConfigError(f"{key} must be >= 0")
        for key in ("stage0_lr_grid", "stage0_lr_net", "stage1_lr",
                    "stage2_lr_style", "stage2_lr_decoder"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be > 0")
        if self.style_weight < 0:
            raise ConfigError("style_weight must be >= 0")
        if self.near < 0 or self.near >= self.far:
            raise ConfigError("require 0 <= near < far")
        if len(self.encoder_channels) != 3:
            raise ConfigError("encoder_channels must list three tap widths")
        if len(self.mlcd_dilations) != 3:
            raise ConfigError("mlcd_dilations must list three rates")

    def with_overrides(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)


def _parse_value(key: str, text: str):
    default = DEFAULTS[key][0]
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(p) for p in text.split(","))
        return text
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key}: {text!r}") from exc


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key}")
        values[key] = _parse_value(key, value)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config_text(handle.read())


def config_text(cfg: RunConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def save_config(cfg: RunConfig, path):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(config_text(cfg))


def config_hash(cfg: RunConfig) -> str:
    """16-hex-digit digest identifying a configuration."""
    return hashlib.sha256(config_text(cfg).encode("utf-8")).hexdigest()[:16]


def apply_overrides(cfg: RunConfig, assignments) -> RunConfig:
    """Apply 'key=value' strings (CLI --set) on top of a config."""
    values = {}
    for item in assignments:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key}")
        values[key] = _parse_value(key, value)
    return cfg.with_overrides(**values)
