"""The full parameter bundle: encoder, Q-Former, connectors and LM, with freeze flags."""

import logging
from collections import OrderedDict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from autograd.tensor import Tensor
from config.app_config import MODE_DUAL, MODE_PATCH_ONLY, MODE_QUERY_ONLY, MODES
from config.run_config import ModelConfig
from model import llm_decoder
from model.connectors import Connectors
from model.errors import ModeError
from model.llm_decoder import AssembledInput, LanguageModel
from model.params import ParamStore
from model.qformer import QFormer
from model.vision_encoder import VisionEncoder

logger = logging.getLogger(__name__)

BRANCH_QUERY = "query"
BRANCH_PATCH = "patch"

GROUP_ENCODER = "encoder."
GROUP_QFORMER = "qformer."
GROUP_QUERY_PROJ = "connector.query_proj."
GROUP_PATCH_PROJ = "connector.patch_proj."
GROUP_LM = "lm."

# Visual blocks each mode assembles, in sequence order.
MODE_BRANCHES = {
    MODE_QUERY_ONLY: (BRANCH_QUERY,),
    MODE_PATCH_ONLY: (BRANCH_PATCH,),
    MODE_DUAL: (BRANCH_QUERY, BRANCH_PATCH),
}


class BlivaModel:
    """
    Dual-branch visual soft-prompt model.

    Parameters are held in one ParamStore; a parameter is frozen exactly when its
    requires_grad flag is False.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.store = ParamStore(seed)
        branches = set(config.branches)
        enc, qf, lm = config.encoder, config.qformer, config.lm
        self.encoder = VisionEncoder(enc, self.store)
        self.qformer: Optional[QFormer] = (QFormer(qf, enc.d_v, lm.vocab_size, self.store)
                                           if BRANCH_QUERY in branches else None)
        self.connectors = Connectors(config.connector, qf.d_q, enc.d_v, lm.d_llm, self.store,
                                     with_query=BRANCH_QUERY in branches,
                                     with_patch=BRANCH_PATCH in branches)
        self.lm = LanguageModel(lm, self.store)
        logger.debug("Built model with %d parameter arrays (%d values)",
                     len(self.store.tensors), self.num_values())

    # -- parameters -------------------------------------------------------

    def parameters(self) -> "OrderedDict[str, Tensor]":
        return self.store.tensors

    def num_values(self) -> int:
        return sum(t.data.size for t in self.store.tensors.values())

    def has_branch(self, branch: str) -> bool:
        return branch in self.config.branches

    def set_trainable(self, prefixes: Iterable[str]) -> List[str]:
        """
        Make exactly the parameters whose names start with one of prefixes trainable.

        Returns:
            Sorted trainable parameter names
        """
        prefixes = tuple(prefixes)
        trainable = []
        for name, t in self.store.items():
            t.requires_grad = name.startswith(prefixes)
            if t.requires_grad:
                trainable.append(name)
        return sorted(trainable)

    def zero_grads(self) -> None:
        for t in self.store.tensors.values():
            t.grad = None

    # -- forward pieces ---------------------------------------------------

    def check_mode(self, mode: str) -> Tuple[str, ...]:
        """
        Branches a mode needs.

        Raises:
            ModeError: If the mode is unknown or a needed branch is missing
        """
        if mode not in MODES:
            raise ModeError(f"Unknown mode {mode!r}; expected one of {', '.join(MODES)}")
        needed = MODE_BRANCHES[mode]
        missing = [b for b in needed if not self.has_branch(b)]
        if missing:
            raise ModeError(f"Mode {mode!r} needs branch(es) {missing}, model has "
                            f"{self.config.branches}")
        return needed

    def encode_image(self, image: Tensor) -> Tensor:
        return self.encoder.encode(image)

    def visual_prompts(self, feats: Tensor, instruction_ids: Sequence[int],
                       mode: str) -> Tuple[Optional[Tensor], Optional[Tensor]]:
        """
        Project encoder features into LM space for the branches a mode uses.

        Returns:
            (query prompts [K, d_llm] or None, patch prompts [N, d_llm] or None)
        """
        needed = self.check_mode(mode)
        vq = vp = None
        if BRANCH_QUERY in needed:
            vq = self.connectors.project_queries(self.qformer(feats, instruction_ids))
        if BRANCH_PATCH in needed:
            vp = self.connectors.project_patches(feats)
        return vq, vp

    def assemble(self, feats: Tensor, question_ids: Sequence[int], answer_ids: Sequence[int],
                 mode: str) -> AssembledInput:
        vq, vp = self.visual_prompts(feats, question_ids, mode)
        return llm_decoder.assemble_input(self.lm, question_ids, vq, vp, answer_ids)

    def loss(self, feats: Tensor, question_ids: Sequence[int], answer_ids: Sequence[int],
             mode: str) -> Tensor:
        """LM loss on the answer given question and visual prompts."""
        a = self.assemble(feats, question_ids, answer_ids, mode)
        return llm_decoder.lm_loss(self.lm, a, answer_ids)

    def text_loss(self, answer_ids: Sequence[int]) -> Tensor:
        """LM loss on text alone (BOS + answer, no visual prompts)."""
        a = llm_decoder.assemble_input(self.lm, [], None, None, answer_ids)
        return llm_decoder.lm_loss(self.lm, a, answer_ids)


def parameter_shapes(model: BlivaModel) -> Dict[str, Tuple[int, ...]]:
    return {name: t.shape for name, t in model.parameters().items()}
