"""On-disk dataset: JSON-lines manifest plus raw BIMG image files."""

import json
import logging
import os
import struct
from typing import Dict, List, Optional, Sequence

import numpy as np

from autograd.tensor import Tensor
from config.app_config import IMAGE_MAGIC, IMAGE_VERSION, MANIFEST_NAME
from synth.errors import ImageFormatError
from synth.samples import Sample
from synth.vocab import DEFAULT_VOCAB, Vocab

logger = logging.getLogger(__name__)

_IMAGE_HEADER = struct.Struct("<4sIIII")


def write_image(path: str, image) -> None:
    """Write a [C, H, W] float image as magic, u32 version, u32 C/H/W, f32 pixels (LE)."""
    data = image.data if isinstance(image, Tensor) else np.asarray(image)
    c, h, w = data.shape
    with open(path, "wb") as f:
        f.write(_IMAGE_HEADER.pack(IMAGE_MAGIC, IMAGE_VERSION, c, h, w))
        f.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_image(path: str) -> Tensor:
    """
    Read a BIMG file.

    Raises:
        ImageFormatError: On bad magic, unknown version or truncated payload
    """
    with open(path, "rb") as f:
        header = f.read(_IMAGE_HEADER.size)
        if len(header) != _IMAGE_HEADER.size:
            raise ImageFormatError(f"{path}: truncated header")
        magic, version, c, h, w = _IMAGE_HEADER.unpack(header)
        if magic != IMAGE_MAGIC:
            raise ImageFormatError(f"{path}: bad magic {magic!r}")
        if version != IMAGE_VERSION:
            raise ImageFormatError(f"{path}: unsupported version {version}")
        payload = f.read()
    expected = c * h * w * 4
    if len(payload) != expected:
        raise ImageFormatError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    return Tensor(np.frombuffer(payload, dtype="<f4").reshape(c, h, w), dtype=np.float32)


def _record(sample: Sample, image_path: str, split: str, vocab: Vocab) -> Dict:
    return {
        "id": sample.id,
        "image_path": image_path,
        "question": vocab.decode(sample.question_ids),
        "answer": vocab.decode(sample.answer_ids),
        "candidates": (None if sample.candidates is None
                       else [vocab.decode(c) for c in sample.candidates]),
        "kind": sample.kind,
        "split": split,
        "meta": sample.meta,
    }


def write_split(samples: Sequence[Sample], root: str, split: str,
                vocab: Vocab = DEFAULT_VOCAB) -> str:
    """
    Write samples under root/split/ (images/ + manifest.jsonl).

    Returns:
        Path of the manifest file
    """
    split_dir = os.path.join(root, split)
    image_dir = os.path.join(split_dir, "images")
    os.makedirs(image_dir, exist_ok=True)
    manifest = os.path.join(split_dir, MANIFEST_NAME)
    with open(manifest, "w", encoding="utf-8") as f:
        for sample in samples:
            rel = os.path.join("images", f"{sample.id}.bimg")
            write_image(os.path.join(split_dir, rel), sample.image)
            f.write(json.dumps(_record(sample, rel, split, vocab), sort_keys=True) + "\n")
    logger.info("Wrote %d samples to %s", len(samples), manifest)
    return manifest


def read_split(root: str, split: str, vocab: Vocab = DEFAULT_VOCAB,
               limit: Optional[int] = None) -> List[Sample]:
    """
    Load a split written by write_split.

    Raises:
        FileNotFoundError: If the manifest doesn't exist
    """
    split_dir = os.path.join(root, split)
    manifest = os.path.join(split_dir, MANIFEST_NAME)
    if not os.path.exists(manifest):
        raise FileNotFoundError(f"Manifest not found: {manifest}")
    samples = []
    with open(manifest, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            candidates = rec.get("candidates")
            samples.append(Sample(
                image=read_image(os.path.join(split_dir, rec["image_path"])),
                question_ids=vocab.encode(rec["question"]),
                answer_ids=vocab.encode_answer(rec["answer"]),
                kind=rec["kind"],
                candidates=None if candidates is None else [vocab.encode_answer(c)
                                                            for c in candidates],
                meta=rec.get("meta", {}),
                id=rec["id"],
            ))
            if limit is not None and len(samples) >= limit:
                break
    return samples
