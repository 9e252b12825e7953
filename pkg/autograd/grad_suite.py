"""
Gradient suite: grad_check over every differentiable op and the composite
forwards (encoder block, Q-Former block, LM block, end-to-end loss).

All checks run in float64 on seeded inputs. Each objective is a random
projection sum(out * R) so that every output element carries gradient.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from autograd import ops
from autograd.gradcheck import grad_check
from autograd.rng import Rng
from autograd.tensor import Tensor, precision

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
PARAM_JITTER = 0.3


@dataclass
class CheckResult:
    name: str
    error: float
    passed: bool


def _projection(out: Tensor, rng: Rng) -> Tensor:
    return Tensor(rng.normal(out.shape))


def _projected(fn: Callable[[Tensor], Tensor], seed: int, name: str) -> Callable[[Tensor], Tensor]:
    cache = {}

    def objective(x: Tensor) -> Tensor:
        out = fn(x)
        if "r" not in cache:
            cache["r"] = _projection(out, Rng.for_name(seed, f"proj/{name}"))
        return ops.sum_all(ops.mul(out, cache["r"]))

    return objective


def _jitter(store, seed: int) -> None:
    """Move every parameter away from its structured init (ones/zeros/small std)."""
    for name, t in store.items():
        t.data = t.data + Rng.for_name(seed, f"jitter/{name}").normal(t.shape, PARAM_JITTER)


def _op_checks(seed: int) -> List[Tuple[str, Callable[[Tensor], Tensor], Tensor]]:
    r = lambda name: Rng.for_name(seed, name)
    x23 = lambda name: Tensor(r(name).normal((2, 3)), requires_grad=True)
    b34 = Tensor(r("b34").normal((3, 4)))
    a23 = Tensor(r("a23").normal((2, 3)))
    bias = Tensor(r("bias").normal((3,)))
    gain = Tensor(r("gain").normal((3,)))
    other = Tensor(r("other").normal((2, 3)))
    table = Tensor(r("table").normal((5, 3)), requires_grad=True)
    mask = np.array([[False, True, True], [False, False, True]])
    return [
        ("matmul/a", lambda x: ops.matmul(x, b34), x23("matmul_a")),
        ("matmul/b", lambda x: ops.matmul(a23, x), Tensor(r("matmul_b").normal((3, 4)))),
        ("add/bias", lambda x: ops.add(x, bias), x23("add")),
        ("mul", lambda x: ops.mul(x, other), x23("mul")),
        ("transpose", ops.transpose, x23("transpose")),
        ("reshape", lambda x: ops.reshape(x, (3, 2)), x23("reshape")),
        ("slice_axis", lambda x: ops.slice_axis(x, 1, 1, 3), x23("slice")),
        ("concat", lambda x: ops.concat([x, other, x], axis=0), x23("concat")),
        ("softmax", ops.softmax, x23("softmax")),
        ("log_softmax", ops.log_softmax, x23("log_softmax")),
        ("masked_softmax", lambda x: ops.softmax(ops.masked_fill(x, mask, -np.inf)),
         x23("masked")),
        ("layer_norm/x", lambda x: ops.layer_norm(x, gain, bias), x23("ln_x")),
        ("layer_norm/gain", lambda g: ops.layer_norm(a23, g, bias),
         Tensor(r("ln_gain").normal((3,)))),
        ("gelu", ops.gelu, x23("gelu")),
        ("embedding_lookup", lambda t: ops.embedding_lookup(t, [2, 0, 2, 4]), table),
        ("cross_entropy", lambda x: ops.cross_entropy(x, [2, 0]), x23("ce")),
    ]


def _composite_checks(seed: int) -> List[Tuple[str, Callable[[Tensor], Tensor], Tensor]]:
    # Imported here: the model package depends on autograd.
    from config.run_config import (EncoderConfig, LMConfig, ModelConfig, QFormerConfig)
    from model.bliva import BlivaModel
    from model.layers import TransformerBlock
    from model.params import ParamStore
    from model.qformer import QFormerBlock

    d, heads = 8, 2
    store = ParamStore(seed)
    enc_block = TransformerBlock(store.scope("check.encoder_block"), d, heads)
    lm_block = TransformerBlock(store.scope("check.lm_block"), d, heads)
    qf_block = QFormerBlock(store.scope("check.qformer_block"), d, 6, heads)
    _jitter(store, seed)

    rng = lambda name: Rng.for_name(seed, name)
    patches = Tensor(rng("patches").normal((5, 6)))
    instruction = Tensor(rng("instruction").normal((3, d)))

    config = ModelConfig(
        encoder=EncoderConfig(image_size=8, patch_size=4, d_v=8, depth=2, heads=2),
        qformer=QFormerConfig(num_queries=2, d_q=8, depth=1, heads=2, max_instruction=4),
        lm=LMConfig(d_llm=8, depth=1, heads=2, max_seq=16),
    )
    model = BlivaModel(config, seed)
    _jitter(model.store, seed)
    image = Tensor(rng("image").uniform_array(64).reshape(1, 8, 8))
    question, answer = [5, 6], [7, 2]

    def end_to_end(feats_input: Tensor) -> Tensor:
        return model.loss(model.encode_image(feats_input), question, answer, "dual")

    return [
        ("encoder_block", lambda x: enc_block(x), Tensor(rng("enc_x").normal((4, d)))),
        ("encoder_block/param", lambda w: enc_block(Tensor(rng("enc_x").normal((4, d)))),
         enc_block.attn.q.weight),
        ("qformer_block/queries", lambda q: qf_block(q, instruction, patches)[0],
         Tensor(rng("queries").normal((2, d)))),
        ("qformer_block/patches", lambda p: qf_block(Tensor(rng("queries").normal((2, d))),
                                                     instruction, p)[0],
         Tensor(rng("patches").normal((5, 6)))),
        ("lm_block/causal", lambda x: lm_block(x, causal=True), Tensor(rng("lm_x").normal((5, d)))),
        ("end_to_end/image", end_to_end, image),
        ("end_to_end/query_table", lambda q: end_to_end(image), model.qformer.queries),
        ("end_to_end/patch_proj", lambda w: end_to_end(image),
         model.store["connector.patch_proj.weight"]),
    ]


def run_grad_suite(seed: int = 0, tolerance: float = TOLERANCE,
                   include_composites: bool = True) -> List[CheckResult]:
    """
    Run every check in float64.

    Scalar-valued checks (cross_entropy, the end-to-end loss) are used as is;
    every other output is reduced by a fixed random projection.
    """
    results = []
    with precision(np.float64):
        checks = _op_checks(seed)
        if include_composites:
            checks += _composite_checks(seed)
        for name, fn, x in checks:
            objective = fn if name.startswith(("cross_entropy", "end_to_end")) \
                else _projected(fn, seed, name)
            error = grad_check(objective, x)
            results.append(CheckResult(name=name, error=error, passed=error <= tolerance))
            logger.debug("grad_check %s: %.3e", name, error)
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning("Gradient checks failed: %s", ", ".join(failed))
    return results


def format_results(results: List[CheckResult]) -> List[str]:
    lines = [f"{'✓' if r.passed else '✗'} {r.name:<28} max rel err {r.error:.3e}" for r in results]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} gradient checks passed")
    return lines
