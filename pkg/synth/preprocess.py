"""Train/eval image processors: bicubic resize, random resized crop, flip, normalize."""

import math
from typing import Sequence, Tuple

import numpy as np
from PIL import Image

from autograd.rng import Rng
from autograd.tensor import Tensor
from config.app_config import CROP_RATIO, CROP_SCALE, NORM_MEAN, NORM_STD

Box = Tuple[float, float, float, float]


def _as_array(img) -> np.ndarray:
    data = img.data if isinstance(img, Tensor) else np.asarray(img)
    if data.ndim != 3:
        raise ValueError(f"Expected a [C, H, W] image, got shape {data.shape}")
    return data.astype(np.float32, copy=False)


def _resize_plane(plane: np.ndarray, size: int, box: Box = None) -> np.ndarray:
    # Mode "F" keeps 32-bit float pixels through Pillow's bicubic filter.
    image = Image.fromarray(np.ascontiguousarray(plane, dtype=np.float32))
    resized = image.resize((size, size), resample=Image.Resampling.BICUBIC, box=box)
    return np.asarray(resized, dtype=np.float32)


def resize(img, size: int, box: Box = None) -> np.ndarray:
    """Bicubic resize of every channel (optionally of the crop box) to size x size."""
    data = _as_array(img)
    return np.stack([_resize_plane(data[c], size, box) for c in range(data.shape[0])])


def normalize(data: np.ndarray) -> np.ndarray:
    """
    Per-channel (x - mean) / std with the CLIP constants.

    Single-channel images use the channel-0 constants. Arithmetic stays in float32
    so a pixel equal to the mean maps to exactly 0.
    """
    channels = data.shape[0]
    if channels == 1:
        mean = np.asarray(NORM_MEAN[:1], dtype=np.float32)
        std = np.asarray(NORM_STD[:1], dtype=np.float32)
    elif channels == 3:
        mean = np.asarray(NORM_MEAN, dtype=np.float32)
        std = np.asarray(NORM_STD, dtype=np.float32)
    else:
        raise ValueError(f"normalize supports 1 or 3 channels, got {channels}")
    return (data.astype(np.float32) - mean[:, None, None]) / std[:, None, None]


def sample_crop_box(height: int, width: int, rng: Rng,
                    scale: Sequence[float] = CROP_SCALE,
                    ratio: Sequence[float] = CROP_RATIO,
                    attempts: int = 10) -> Box:
    """
    Draw a random-resized-crop window.

    Tries area fractions in scale and log-uniform aspect ratios in ratio; the
    integer window must keep its area fraction inside scale. Falls back to the
    largest centred window with a clamped aspect ratio.

    Returns:
        (left, top, right, bottom) in pixels
    """
    area = height * width
    log_lo, log_hi = math.log(ratio[0]), math.log(ratio[1])
    for _ in range(attempts):
        target_area = area * (scale[0] + (scale[1] - scale[0]) * rng.uniform())
        aspect = math.exp(log_lo + (log_hi - log_lo) * rng.uniform())
        w = int(round(math.sqrt(target_area * aspect)))
        h = int(round(math.sqrt(target_area / aspect)))
        if 0 < w <= width and 0 < h <= height and scale[0] * area <= w * h <= scale[1] * area:
            top = rng.randint(0, height - h + 1)
            left = rng.randint(0, width - w + 1)
            return (left, top, left + w, top + h)

    in_ratio = width / height
    if in_ratio < ratio[0]:
        w, h = width, int(round(width / ratio[0]))
    elif in_ratio > ratio[1]:
        h, w = height, int(round(height * ratio[1]))
    else:
        w, h = width, height
    top = (height - h) // 2
    left = (width - w) // 2
    return (left, top, left + w, top + h)


def preprocess_train(img, size: int, rng: Rng, flip: bool = False,
                     scale: Sequence[float] = CROP_SCALE,
                     ratio: Sequence[float] = CROP_RATIO) -> Tensor:
    """
    Training processor: random resized crop (bicubic), optional horizontal flip, normalize.

    Args:
        img: [C, H, W] pixels in [0, 1]
        size: output side length
        rng: stream for crop and flip draws
        flip: enable the 50% horizontal flip (off for glyph scenes: mirrored text
            no longer matches its label)
        scale: crop area fraction range
        ratio: crop aspect ratio range

    Returns:
        Normalized [C, size, size] tensor
    """
    data = _as_array(img)
    _, height, width = data.shape
    box = sample_crop_box(height, width, rng, scale, ratio)
    out = resize(data, size, box)
    if flip and rng.uniform() < 0.5:
        out = out[:, :, ::-1]
    return Tensor(normalize(np.ascontiguousarray(out)), dtype=np.float32)


def preprocess_eval(img, size: int) -> Tensor:
    """Evaluation processor: deterministic bicubic resize to size x size, then normalize."""
    return Tensor(normalize(resize(img, size)), dtype=np.float32)
