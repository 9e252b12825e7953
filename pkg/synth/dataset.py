"""Seeded generation of caption and VQA splits."""

from typing import Dict, List

from autograd.rng import Rng
from config.app_config import KIND_COUNT_WORDS
from config.run_config import DataConfig
from synth.samples import Sample, make_caption_sample, make_vqa_sample
from synth.scene import random_scene
from synth.vocab import DEFAULT_VOCAB, Vocab

CAPTION_SPLIT = "caption"
TRAIN_SPLIT = "train"
TEST_SPLIT = "test"


def _scene(rng: Rng, cfg: DataConfig, min_words: int):
    return random_scene(rng, cfg.grid, min_words=min_words, max_words=max(cfg.max_words, min_words),
                        min_len=cfg.min_word_len, max_len=cfg.max_word_len)


def generate_captions(n: int, seed: int, cfg: DataConfig, vocab: Vocab = DEFAULT_VOCAB,
                      split: str = CAPTION_SPLIT) -> List[Sample]:
    """Caption samples; sample i draws only from the substream "<split>/<i>"."""
    samples = []
    for i in range(n):
        rng = Rng.for_name(seed, f"{split}/{i}")
        scene = _scene(rng, cfg, cfg.min_words)
        samples.append(make_caption_sample(scene, rng, vocab, channels=cfg.channels,
                                           sample_id=f"{split}-{i:06d}"))
    return samples


def generate_vqa(n: int, seed: int, cfg: DataConfig, split: str,
                 vocab: Vocab = DEFAULT_VOCAB) -> List[Sample]:
    """
    VQA samples with kinds drawn uniformly from cfg.kinds.

    Read kinds always get a scene with at least one word.
    """
    samples = []
    for i in range(n):
        rng = Rng.for_name(seed, f"{split}/{i}")
        kind = rng.choice(cfg.kinds)
        min_words = cfg.min_words if kind == KIND_COUNT_WORDS else max(1, cfg.min_words)
        scene = _scene(rng, cfg, min_words)
        if not scene.words and kind != KIND_COUNT_WORDS:
            kind = KIND_COUNT_WORDS
        samples.append(make_vqa_sample(scene, kind, rng, vocab,
                                       n_distractors=cfg.n_distractors, channels=cfg.channels,
                                       sample_id=f"{split}-{i:06d}"))
    return samples


def generate_all(cfg: DataConfig, seed: int, vocab: Vocab = DEFAULT_VOCAB) -> Dict[str, List[Sample]]:
    """Caption, train and held-out test splits for one data seed."""
    return {
        CAPTION_SPLIT: generate_captions(cfg.n_caption, seed, cfg, vocab),
        TRAIN_SPLIT: generate_vqa(cfg.n_train, seed, cfg, TRAIN_SPLIT, vocab),
        TEST_SPLIT: generate_vqa(cfg.n_test, seed, cfg, TEST_SPLIT, vocab),
    }
