"""Learned relevance masks and baseline saliency maps for a small image classifier."""

from ._core import (
    Error,
    ExplainConfig,
    Explanation,
    Heatmap,
    Model,
    apply_mask,
    explain,
    generate_shapes,
    load_image,
    load_model,
    mass_inside_bbox,
    occlusion,
    pred_cost,
    refine_defaults,
    relevance_mask,
    saliency,
    save_image,
    save_mask,
    smooth_cost,
    smoothgrad,
    sparse_cost,
    train_tiny_cnn,
)

__all__ = [
    "Error",
    "ExplainConfig",
    "Explanation",
    "Heatmap",
    "Model",
    "apply_mask",
    "explain",
    "generate_shapes",
    "load_image",
    "load_model",
    "mass_inside_bbox",
    "occlusion",
    "pred_cost",
    "refine_defaults",
    "relevance_mask",
    "saliency",
    "save_image",
    "save_mask",
    "smooth_cost",
    "smoothgrad",
    "sparse_cost",
    "train_tiny_cnn",
]
