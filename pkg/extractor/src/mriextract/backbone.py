"""Truncated 50-layer residual backbone used as a fixed feature extractor.

The network is cut before its global average pooling and fully connected
layers, so a 224x224 input yields a 7x7x2048 activation block; flattening
in (channel, row, column) order gives the 100,352-value feature vector.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torchvision import models

FEATURE_DIM = 2048 * 7 * 7  # 100,352


class ExtractorError(RuntimeError):
    """Backbone unavailable or output shape mismatch."""


def load_backbone(weights: str = "pretrained", seed: int = 0) -> nn.Module:
    """Build the truncated backbone in inference mode.

    weights="pretrained" loads the ImageNet checkpoint (from the local
    torch hub cache or by download) and raises ExtractorError when it is
    unavailable. weights="seeded" builds a deterministic randomly
    initialized network, which keeps the full pipeline runnable where the
    checkpoint cannot be fetched; features are then not transferable.
    """
    if weights == "pretrained":
        try:
            net = models.resnet50(weights=models.ResNet50_Weights.IMAGENET1K_V1)
        except Exception as exc:
            raise ExtractorError(f"backbone weights unavailable: {exc}") from exc
    elif weights == "seeded":
        torch.manual_seed(seed)
        net = models.resnet50(weights=None)
    else:
        raise ExtractorError(f"unknown weights mode {weights!r}")
    trunk = nn.Sequential(*list(net.children())[:-2])  # drop avgpool + fc
    trunk.eval()
    for param in trunk.parameters():
        param.requires_grad_(False)
    return trunk


def extract_batch(backbone: nn.Module, images: np.ndarray,
                  expected_dim: int = FEATURE_DIM) -> np.ndarray:
    """Forward a (n, 3, 224, 224) batch; returns (n, expected_dim) float32."""
    batch = np.asarray(images, dtype=np.float32)
    if batch.ndim != 4 or batch.shape[1] != 3:
        raise ExtractorError(f"expected (n, 3, H, W) input, got {batch.shape}")
    with torch.no_grad():
        out = backbone(torch.from_numpy(batch))
    flat = out.reshape(out.shape[0], -1).numpy().astype(np.float32)
    if flat.shape[1] != expected_dim:
        raise ExtractorError(
            f"backbone produced {flat.shape[1]} values per image, expected {expected_dim}"
        )
    if not np.all(np.isfinite(flat)):
        raise ExtractorError("backbone produced non-finite activations")
    return flat


def extract(backbone: nn.Module, image: np.ndarray,
            expected_dim: int = FEATURE_DIM) -> np.ndarray:
    """Feature vector for one preprocessed image, length expected_dim."""
    return extract_batch(backbone, np.asarray(image)[None, ...], expected_dim)[0]
