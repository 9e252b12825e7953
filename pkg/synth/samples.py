"""Question/answer sample construction over glyph scenes."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from autograd.rng import Rng
from autograd.tensor import Tensor
from config.app_config import (EOS_ID, GLYPH_CHARSET, KIND_CAPTION, KIND_COUNT_WORDS,
                               KIND_READ_CELL, KIND_READ_WORD, SPACE, VQA_KINDS)
from synth.errors import SampleKindError
from synth.scene import Scene, random_word, render_image
from synth.vocab import DEFAULT_VOCAB, Vocab


@dataclass
class Sample:
    """One (image, question, answer) item; candidates are EOS-terminated id lists."""

    image: Tensor
    question_ids: List[int]
    answer_ids: List[int]
    kind: str
    candidates: Optional[List[List[int]]] = None
    meta: Dict[str, Any] = field(default_factory=dict)
    id: str = ""

    def __post_init__(self):
        if not self.answer_ids or self.answer_ids[-1] != EOS_ID:
            raise ValueError(f"Sample {self.id!r}: answer must be non-empty and end with EOS")
        if self.candidates is not None and not self.candidates:
            raise ValueError(f"Sample {self.id!r}: empty candidate list")

    @property
    def target_index(self) -> Optional[int]:
        """Index of the ground-truth answer among the candidates."""
        if self.candidates is None:
            return None
        for i, cand in enumerate(self.candidates):
            if list(cand) == list(self.answer_ids):
                return i
        return None


def _render(scene: Scene, channels: int) -> Tensor:
    return render_image(scene.placements(), scene.grid, channels=channels)


def make_vqa_sample(scene: Scene, kind: str, rng: Rng, vocab: Vocab = DEFAULT_VOCAB,
                    target: Optional[Tuple[int, ...]] = None, n_distractors: int = 3,
                    channels: int = 1, sample_id: str = "") -> Sample:
    """
    Ask one question about a scene.

    Args:
        scene: rendered scene
        kind: read_cell | read_word | count_words
        rng: stream for the target choice and candidate construction
        vocab: vocabulary for ids
        target: explicit (row, col) for read_cell or (index,) for read_word;
            drawn from rng when None
        n_distractors: wrong candidates added for read_word
        channels: image channels

    Returns:
        Sample with candidates (full glyph charset plus space for read_cell,
        ground truth plus same-length distractors for read_word, digits for count_words)

    Raises:
        SampleKindError: If the kind is unknown, the scene has no words for a read
            kind, or the target lies outside the scene
    """
    if kind not in VQA_KINDS:
        raise SampleKindError(f"Unknown question kind {kind!r}")
    words = scene.reading_order()
    if kind in (KIND_READ_CELL, KIND_READ_WORD) and not words:
        raise SampleKindError(f"Question kind {kind!r} needs a non-empty scene")

    if kind == KIND_READ_CELL:
        row, col = target if target is not None else rng.choice(scene.occupied_cells())
        answer = scene.char_at(row, col)
        question = f"READ {row} {col}"
        candidates = [vocab.encode_answer(c) for c in GLYPH_CHARSET + SPACE]
        meta = {"kind": kind, "row": row, "col": col}
    elif kind == KIND_READ_WORD:
        index = target[0] if target is not None else rng.randint(0, len(words))
        if not 0 <= index < len(words):
            raise SampleKindError(f"WORD {index}: scene has {len(words)} words")
        answer = words[index].text
        question = f"WORD {index}"
        options = [answer]
        while len(options) < n_distractors + 1:
            distractor = random_word(rng, len(answer))
            if distractor not in options:
                options.append(distractor)
        rng.shuffle(options)
        candidates = [vocab.encode_answer(w) for w in options]
        meta = {"kind": kind, "index": index, "row": words[index].row, "col": words[index].col}
    else:
        answer = str(len(words))
        question = "COUNT"
        candidates = [vocab.encode_answer(str(n)) for n in range(max(10, len(words) + 1))]
        meta = {"kind": kind}

    return Sample(image=_render(scene, channels), question_ids=vocab.encode(question),
                  answer_ids=vocab.encode_answer(answer), kind=kind, candidates=candidates,
                  meta=meta, id=sample_id)


def caption_text(scene: Scene) -> str:
    """All words in reading order, space-joined."""
    return " ".join(w.text for w in scene.reading_order())


def make_caption_sample(scene: Scene, rng: Optional[Rng] = None, vocab: Vocab = DEFAULT_VOCAB,
                        channels: int = 1, sample_id: str = "") -> Sample:
    """
    Caption sample: empty question, answer = words in reading order + EOS.

    An empty scene yields the answer [EOS].
    """
    return Sample(image=_render(scene, channels), question_ids=[],
                  answer_ids=vocab.encode_answer(caption_text(scene)), kind=KIND_CAPTION,
                  candidates=None, meta={"kind": KIND_CAPTION}, id=sample_id)

