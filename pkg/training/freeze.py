"""Which parameter groups each training stage may update."""

from typing import Dict, List, Optional, Tuple

from model.bliva import (BRANCH_PATCH, BRANCH_QUERY, GROUP_ENCODER, GROUP_LM, GROUP_PATCH_PROJ,
                         GROUP_QFORMER, GROUP_QUERY_PROJ, MODE_BRANCHES, BlivaModel)

STAGE_LM_PRETRAIN = "lm_pretrain"
STAGE_ENCODER_PRETRAIN = "encoder_pretrain"
STAGE_1 = "stage1"
STAGE_2 = "stage2"

STAGE_TRAINABLE: Dict[str, Tuple[str, ...]] = {
    STAGE_LM_PRETRAIN: (GROUP_LM,),
    STAGE_ENCODER_PRETRAIN: (GROUP_ENCODER, GROUP_PATCH_PROJ),
    STAGE_1: (GROUP_PATCH_PROJ,),
    STAGE_2: (GROUP_QFORMER, GROUP_QUERY_PROJ, GROUP_PATCH_PROJ),
}

# Groups that only receive gradients when their branch is in the loss.
BRANCH_GROUPS: Dict[str, Tuple[str, ...]] = {
    BRANCH_QUERY: (GROUP_QFORMER, GROUP_QUERY_PROJ),
    BRANCH_PATCH: (GROUP_PATCH_PROJ,),
}


def trainable_prefixes(stage: str, mode: Optional[str] = None) -> Tuple[str, ...]:
    """
    Parameter-name prefixes a stage updates.

    With a mode, stage-2 prefixes are narrowed to the branches that mode runs,
    so an unused branch is neither stepped nor decayed.
    """
    try:
        prefixes = STAGE_TRAINABLE[stage]
    except KeyError:
        raise ValueError(f"Unknown training stage {stage!r}") from None
    if mode is None or stage != STAGE_2:
        return prefixes
    used = {g for branch in MODE_BRANCHES[mode] for g in BRANCH_GROUPS[branch]}
    return tuple(p for p in prefixes if p in used)


def apply_stage(model: BlivaModel, stage: str, mode: Optional[str] = None) -> List[str]:
    """Set requires_grad for a stage; returns the trainable names."""
    if mode is not None:
        model.check_mode(mode)
    return model.set_trainable(trainable_prefixes(stage, mode))


def frozen_names(model: BlivaModel, stage: str, mode: Optional[str] = None) -> List[str]:
    prefixes = trainable_prefixes(stage, mode)
    return sorted(n for n in model.parameters() if not n.startswith(prefixes))
