"""ViT-style patch encoder whose second-to-last block output feeds both visual branches."""

from typing import List, Optional

import numpy as np

from autograd import ops
from autograd.tensor import Tensor
from config.run_config import EncoderConfig
from model.errors import ModelConfigError
from model.layers import Linear, TransformerBlock
from model.params import ParamStore


def patchify(img: Tensor, patch_size: int, image_size: Optional[int] = None) -> Tensor:
    """
    Split a [C, H, W] image into non-overlapping p x p patches.

    Returns:
        [N, C*p*p], patches in row-major grid order, each flattened channel-first

    Raises:
        ModelConfigError: If the image is not square image_size x image_size or
            not divisible into patches
    """
    if img.data.ndim != 3:
        raise ModelConfigError(f"patchify expects [C, H, W], got {img.shape}")
    c, h, w = img.shape
    if h != w or (image_size is not None and h != image_size) or h % patch_size != 0:
        raise ModelConfigError(f"patchify: image {img.shape} does not match "
                               f"image_size={image_size}, patch_size={patch_size}")
    g = h // patch_size
    p = patch_size

    def _forward(x: np.ndarray) -> np.ndarray:
        return x.reshape(c, g, p, g, p).transpose(1, 3, 0, 2, 4).reshape(g * g, c * p * p)

    def _backward(grad: np.ndarray):
        return (grad.reshape(g, g, c, p, p).transpose(2, 0, 3, 1, 4).reshape(c, h, w),)

    return Tensor._from_op(_forward(img.data), (img,), _backward, "patchify")


class VisionEncoder:
    """Patch embedding, learned positions and pre-norm blocks; no CLS token."""

    def __init__(self, cfg: EncoderConfig, store: ParamStore):
        if cfg.depth < 2:
            raise ModelConfigError(f"encoder depth {cfg.depth} < 2: second-to-last layer undefined")
        self.cfg = cfg
        scope = store.scope("encoder")
        self.patch_embed = Linear(scope, "patch_embed", cfg.patch_dim, cfg.d_v)
        self.pos = scope.normal("pos", (cfg.num_patches, cfg.d_v))
        self.blocks: List[TransformerBlock] = [
            TransformerBlock(scope.scope(f"blocks.{i}"), cfg.d_v, cfg.heads)
            for i in range(cfg.depth)
        ]

    def encode(self, img: Tensor) -> Tensor:
        """
        Patch features from the second-to-last block.

        Blocks 1..L-1 run; block L is never computed.

        Args:
            img: preprocessed [C, image_size, image_size] image

        Returns:
            [N, d_v] patch features
        """
        x = patchify(img, self.cfg.patch_size, self.cfg.image_size)
        x = ops.add(self.patch_embed(x), self.pos)
        for block in self.blocks[:-1]:
            x = block(x)
        return x
