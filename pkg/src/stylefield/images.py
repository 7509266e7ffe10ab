"""8-bit RGB image I/O. Images cross the API as H x W x 3 float tensors in [0,1]."""

from __future__ import annotations

import numpy as np
import torch
from PIL import Image


def load_image(path, dtype=torch.float32) -> torch.Tensor:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).to(dtype)


def save_image(image: torch.Tensor, path):
    arr = image.detach().cpu().numpy()
    arr = np.clip(arr, 0.0, 1.0)
    quantized = (arr * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(quantized, mode="RGB").save(path)


def load_mask(path) -> torch.Tensor:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr > 0.5)


def save_mask(mask: torch.Tensor, path):
    arr = (mask.detach().cpu().numpy() > 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)
