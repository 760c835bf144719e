"""Slice preprocessing: resize to the backbone's input and normalize."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

IMAGE_SIZE = 224
# channel statistics the backbone was pretrained with
CHANNEL_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
CHANNEL_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


class PreprocessError(ValueError):
    """Unreadable or degenerate input image."""


def preprocess(image_path) -> np.ndarray:
    """Image file -> float32 array of shape (3, 224, 224).

    Grayscale inputs are replicated across the three channels; resizing is
    bilinear; values are scaled to [0, 1] then normalized per channel.
    """
    path = Path(image_path)
    try:
        with Image.open(path) as img:
            if img.width == 0 or img.height == 0:
                raise PreprocessError(f"{path}: zero-sized image")
            rgb = img.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE), Image.BILINEAR)
    except FileNotFoundError:
        raise PreprocessError(f"{path}: file not found") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise PreprocessError(f"{path}: unreadable image ({exc})") from exc
    arr = np.asarray(rgb, dtype=np.float32) / 255.0  # (H, W, 3)
    arr = (arr - CHANNEL_MEAN) / CHANNEL_STD
    return np.ascontiguousarray(arr.transpose(2, 0, 1))
