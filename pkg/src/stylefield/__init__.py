"""Zero-shot 3D style transfer on factorized radiance fields.

The pipeline renders a pre-trained scene into multi-level feature maps at
full view resolution, injects style through per-channel weights and biases
generated from a reference, and decodes the result with a dilated cascade
decoder.  Training happens in two stages (feature-grid reconstruction, then
stylization); references may be 2D images or posed 3D objects rendered
synchronously with the content camera.
"""

from .cameras import Camera, ViewSet, look_at, orbit_cameras
from .checkpoint import Checkpoint
from .config import RunConfig, load_config
from .dsi import (InjectionGenerators, InjectionParams, adain_inject, inject,
                  inject_levels, mask_amplify)
from .encoder import (PerceptualEncoder, StyleFeatures, feature_supervision_loss,
                      upsample_to)
from .errors import (CheckpointError, ConfigError, StyleObjectNotVisibleError,
                     ValidationError)
from .mlcd import CascadeDecoder
from .mlfa import LEVELS, FeatureAdaptor
from .pipeline import StylePipeline
from .reference3d import StyleReference, align_poses, stylize_omniview, synchronized_style_view
from .renderer import (LevelFeatureMaps, compositing_weights, render_pixel_feature,
                       render_rgb_view, render_view)
from .scene_field import (STAGE1, STAGE2, FactorizedGrid, OpacityField, Ray,
                          SampleBatch, SceneField, query_basic_feature, query_density,
                          sample_ray)
from .trainer import (LossReport, rgb_recovery_loss, style_content_loss,
                      train_stage0, train_stage1, train_stage2)

__version__ = "0.1.0"

__all__ = [
    "Camera", "ViewSet", "look_at", "orbit_cameras",
    "Checkpoint", "RunConfig", "load_config",
    "InjectionGenerators", "InjectionParams", "adain_inject", "inject",
    "inject_levels", "mask_amplify",
    "PerceptualEncoder", "StyleFeatures", "feature_supervision_loss", "upsample_to",
    "CheckpointError", "ConfigError", "StyleObjectNotVisibleError", "ValidationError",
    "CascadeDecoder", "LEVELS", "FeatureAdaptor", "StylePipeline",
    "StyleReference", "align_poses", "stylize_omniview", "synchronized_style_view",
    "LevelFeatureMaps", "compositing_weights", "render_pixel_feature",
    "render_rgb_view", "render_view",
    "STAGE1", "STAGE2", "FactorizedGrid", "OpacityField", "Ray", "SampleBatch",
    "SceneField", "query_basic_feature", "query_density", "sample_ray",
    "LossReport", "rgb_recovery_loss", "style_content_loss",
    "train_stage0", "train_stage1", "train_stage2",
]
