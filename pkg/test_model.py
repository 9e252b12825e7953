"""Tests for the encoder, Q-Former, connectors, LM assembly, ranking and beam search."""

import sys
import unittest
from pathlib import Path

import numpy as np

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from autograd.rng import Rng
from autograd.tensor import Tensor, no_grad, precision
from config.app_config import EOS_ID, MODE_DUAL, MODE_PATCH_ONLY, MODE_QUERY_ONLY
from config.config_loader import RunConfigLoader
from config.run_config import ConnectorConfig
from model import llm_decoder
from model.bliva import BlivaModel, parameter_shapes
from model.connectors import Connectors
from model.errors import ModeError, ModelConfigError, SequenceLengthError
from model.params import ParamStore
from model.qformer import new_attention_record
from model.vision_encoder import patchify
from synth.dataset import generate_vqa
from synth.preprocess import preprocess_eval


def tiny_config():
    return RunConfigLoader().build(preset="tiny")


def random_image(cfg, seed=0):
    side = cfg.model.encoder.image_size
    return Tensor(Rng(seed).uniform_array(side * side).reshape(1, side, side))


class TestVisionEncoder(unittest.TestCase):

    def setUp(self):
        self.cfg = tiny_config()
        self.model = BlivaModel(self.cfg.model, seed=0)

    def test_patchify_order(self):
        img = Tensor(np.arange(2 * 4 * 4, dtype=np.float32).reshape(2, 4, 4))
        patches = patchify(img, 2).data
        self.assertEqual(patches.shape, (4, 8))
        np.testing.assert_array_equal(patches[0], np.concatenate([img.data[0, :2, :2].ravel(),
                                                                  img.data[1, :2, :2].ravel()]))
        np.testing.assert_array_equal(patches[1, :4], img.data[0, :2, 2:4].ravel())
        np.testing.assert_array_equal(patches[2, :4], img.data[0, 2:4, :2].ravel())

    def test_patchify_rejects_bad_size(self):
        with self.assertRaises(ModelConfigError):
            patchify(Tensor(np.zeros((1, 6, 6))), 4)

    def test_output_shape(self):
        feats = self.model.encode_image(random_image(self.cfg))
        enc = self.cfg.model.encoder
        self.assertEqual(feats.shape, (enc.num_patches, enc.d_v))

    def test_last_block_is_skipped(self):
        img = random_image(self.cfg)
        before = self.model.encode_image(img).data.copy()
        last = self.cfg.model.encoder.depth - 1
        for name, t in self.model.parameters().items():
            if name.startswith(f"encoder.blocks.{last}."):
                t.data = t.data + 1.0
        np.testing.assert_array_equal(self.model.encode_image(img).data, before)
        self.model.store["encoder.blocks.0.ffn.fc1.weight"].data += 1.0
        self.assertFalse(np.array_equal(self.model.encode_image(img).data, before))

    def test_permutation_equivariant_without_positions(self):
        enc = self.cfg.model.encoder
        g, p = enc.image_size // enc.patch_size, enc.patch_size
        perm = np.roll(np.arange(g * g)[::-1], 1)
        with precision(np.float64):
            model = BlivaModel(self.cfg.model, seed=1)
            model.encoder.pos.data = np.zeros_like(model.encoder.pos.data)
            img = random_image(self.cfg, seed=2)
            patches = patchify(img, p).data[perm]
            shuffled = Tensor(patches.reshape(g, g, 1, p, p).transpose(2, 0, 3, 1, 4)
                              .reshape(1, g * p, g * p))
            np.testing.assert_allclose(model.encode_image(shuffled).data,
                                       model.encode_image(img).data[perm], atol=1e-10)


class TestQFormer(unittest.TestCase):

    def setUp(self):
        self.cfg = tiny_config()
        self.model = BlivaModel(self.cfg.model, seed=0)
        self.feats = self.model.encode_image(random_image(self.cfg))

    def test_output_shape(self):
        out = self.model.qformer(self.feats, [5, 6, 7])
        qf = self.cfg.model.qformer
        self.assertEqual(out.shape, (qf.num_queries, qf.d_q))

    def test_instruction_aware(self):
        a = self.model.qformer(self.feats, [5, 6, 7]).data
        b = self.model.qformer(self.feats, [8, 9, 10]).data
        self.assertFalse(np.allclose(a, b))

    def test_instruction_ignored_when_not_aware(self):
        model_cfg = self.cfg.model.model_copy(deep=True)
        model_cfg.qformer.instruction_aware = False
        model = BlivaModel(model_cfg, seed=0)
        feats = model.encode_image(random_image(self.cfg))
        np.testing.assert_array_equal(model.qformer(feats, [5, 6]).data,
                                      model.qformer(feats, [9]).data)

    def test_cross_attention_record(self):
        record = new_attention_record()
        self.model.qformer(self.feats, [5], record=record)
        qf = self.cfg.model.qformer
        self.assertEqual(len(record["cross"]), qf.depth * qf.heads)
        for weights in record["cross"]:
            self.assertEqual(weights.shape, (qf.num_queries, self.cfg.model.encoder.num_patches))
            np.testing.assert_allclose(weights.sum(axis=-1), 1.0, atol=1e-5)

    def test_missing_features(self):
        with self.assertRaises(ModelConfigError):
            self.model.qformer(None, [5])

    def test_zero_cross_values_ignore_patches(self):
        qformer = BlivaModel(self.cfg.model, seed=0).qformer
        for block in qformer.blocks:
            block.cross_attn.v.weight.data = np.zeros_like(block.cross_attn.v.weight.data)
            block.cross_attn.v.bias.data = np.zeros_like(block.cross_attn.v.bias.data)
        other = self.model.encode_image(random_image(self.cfg, seed=9))
        np.testing.assert_allclose(qformer(self.feats, [5, 6]).data,
                                   qformer(other, [5, 6]).data, atol=1e-6)

    def test_empty_instruction_when_aware(self):
        self.assertTrue(self.cfg.model.qformer.instruction_aware)
        out = self.model.qformer(self.feats, [])
        qf = self.cfg.model.qformer
        self.assertEqual(out.shape, (qf.num_queries, qf.d_q))
        self.assertTrue(np.all(np.isfinite(out.data)))
        model_cfg = self.cfg.model.model_copy(deep=True)
        model_cfg.qformer.instruction_aware = False
        unaware = BlivaModel(model_cfg, seed=0)
        np.testing.assert_array_equal(out.data, unaware.qformer(self.feats, [5, 6]).data)

    def test_instruction_too_long(self):
        too_long = [5] * (self.cfg.model.qformer.max_instruction + 1)
        with self.assertRaises(SequenceLengthError):
            self.model.qformer(self.feats, too_long)


class TestConnectors(unittest.TestCase):

    def test_projection_shapes(self):
        cfg = tiny_config()
        model = BlivaModel(cfg.model, seed=0)
        feats = model.encode_image(random_image(cfg))
        vq, vp = model.visual_prompts(feats, [5], MODE_DUAL)
        d = cfg.model.lm.d_llm
        self.assertEqual(vq.shape, (cfg.model.qformer.num_queries, d))
        self.assertEqual(vp.shape, (cfg.model.encoder.num_patches, d))

    def test_mlp_variant_names(self):
        cfg = tiny_config()
        model_cfg = cfg.model.model_copy(deep=True)
        model_cfg.connector.patch_kind = "mlp"
        shapes = parameter_shapes(BlivaModel(model_cfg, seed=0))
        self.assertIn("connector.patch_proj.fc1.weight", shapes)
        self.assertIn("connector.patch_proj.fc2.weight", shapes)
        self.assertNotIn("connector.patch_proj.weight", shapes)

    def test_shared_values_across_branch_sets(self):
        cfg = tiny_config()
        dual = BlivaModel(cfg.model, seed=3)
        query_only = BlivaModel(cfg.model.model_copy(update={"branches": ["query"]}), seed=3)
        self.assertNotIn("connector.patch_proj.weight", query_only.parameters())
        for name, t in query_only.parameters().items():
            np.testing.assert_array_equal(t.data, dual.parameters()[name].data)

    def _connectors(self, kind="linear", d=6):
        with precision(np.float64):
            return Connectors(ConnectorConfig(patch_kind=kind), d, d, d, ParamStore(0))

    def _patches(self, seed=0, n=5, d=6):
        with precision(np.float64):
            return Tensor(Rng(seed).normal((n, d), 1.0))

    def test_zero_weight_gives_bias_rows(self):
        conn = self._connectors()
        conn.patch_proj.weight.data = np.zeros_like(conn.patch_proj.weight.data)
        conn.patch_proj.bias.data = np.arange(6, dtype=np.float64)
        out = conn.project_patches(self._patches()).data
        np.testing.assert_array_equal(out, np.tile(np.arange(6.0), (5, 1)))

    def test_mlp_zero_second_layer_is_constant(self):
        conn = self._connectors(kind="mlp")
        fc2 = conn.patch_proj.fc2
        fc2.weight.data = np.zeros_like(fc2.weight.data)
        fc2.bias.data = np.linspace(-1.0, 1.0, 6)
        for seed in (0, 1):
            out = conn.project_patches(self._patches(seed)).data
            np.testing.assert_array_equal(out, np.tile(np.linspace(-1.0, 1.0, 6), (5, 1)))

    def test_identity_passthrough(self):
        conn = self._connectors()
        conn.patch_proj.weight.data = np.eye(6)
        conn.patch_proj.bias.data = np.zeros(6)
        x = self._patches()
        np.testing.assert_allclose(conn.project_patches(x).data, x.data, atol=1e-15)

    def test_linear_projection_is_affine(self):
        conn = self._connectors()
        conn.patch_proj.bias.data = Rng(4).normal((6,), 1.0)
        x = self._patches(2)
        with precision(np.float64):
            zero = conn.project_patches(Tensor(np.zeros((5, 6)))).data
            fx = conn.project_patches(x).data
            for alpha in (-2.0, 0.5, 3.0):
                f_ax = conn.project_patches(Tensor(alpha * x.data)).data
                np.testing.assert_allclose(f_ax - zero, alpha * (fx - zero), atol=1e-12)


class TestAssembly(unittest.TestCase):

    def setUp(self):
        self.cfg = tiny_config()
        self.model = BlivaModel(self.cfg.model, seed=0)
        self.feats = self.model.encode_image(random_image(self.cfg))

    def test_segment_order(self):
        a = self.model.assemble(self.feats, [5, 6], [7, EOS_ID], MODE_DUAL)
        k = self.cfg.model.qformer.num_queries
        n = self.cfg.model.encoder.num_patches
        expected = (["question"] * 3 + ["visual_query"] * k + ["visual_patch"] * n
                    + ["answer"] * 2)
        self.assertEqual(a.segments, expected)
        self.assertEqual(a.loss_mask, [s == "answer" for s in expected])

    def test_dual_exceeds_query_only_by_n(self):
        dual = self.model.assemble(self.feats, [5], [7, EOS_ID], MODE_DUAL)
        query = self.model.assemble(self.feats, [5], [7, EOS_ID], MODE_QUERY_ONLY)
        self.assertEqual(dual.length - query.length, self.cfg.model.encoder.num_patches)

    def test_length_property_sweep(self):
        rng = Rng(17)
        k = self.cfg.model.qformer.num_queries
        n = self.cfg.model.encoder.num_patches
        for _ in range(200):
            q = [rng.randint(3, 40) for _ in range(rng.randint(0, 8))]
            ans = [rng.randint(3, 40) for _ in range(rng.randint(0, 6))] + [EOS_ID]
            mode = rng.choice([MODE_QUERY_ONLY, MODE_PATCH_ONLY, MODE_DUAL])
            a = self.model.assemble(self.feats, q, ans, mode)
            visual = {MODE_QUERY_ONLY: k, MODE_PATCH_ONLY: n, MODE_DUAL: k + n}[mode]
            self.assertEqual(a.length, len(q) + 1 + visual + len(ans))
            self.assertEqual(a.embeddings.shape[0], a.length)

    def test_too_long(self):
        ans = [5] * self.cfg.model.lm.max_seq + [EOS_ID]
        with self.assertRaises(SequenceLengthError):
            self.model.assemble(self.feats, [], ans, MODE_DUAL)

    def test_mode_needs_branch(self):
        model = BlivaModel(self.cfg.model.model_copy(update={"branches": ["query"]}), seed=0)
        with self.assertRaises(ModeError):
            model.check_mode(MODE_DUAL)
        with self.assertRaises(ModeError):
            model.check_mode("triple")

    def test_causal(self):
        base = self.model.assemble(self.feats, [5], [7, 8, EOS_ID], MODE_DUAL)
        changed = self.model.assemble(self.feats, [5], [7, 9, EOS_ID], MODE_DUAL)
        with no_grad():
            a = llm_decoder.lm_forward(self.model.lm, base).data
            b = llm_decoder.lm_forward(self.model.lm, changed).data
        position = base.answer_start() + 1
        np.testing.assert_array_equal(a[:position], b[:position])
        self.assertFalse(np.array_equal(a[position:], b[position:]))

    def test_loss_covers_answer_rows_only(self):
        answer = [7, 8, EOS_ID]
        with precision(np.float64):
            model = BlivaModel(self.cfg.model, seed=0)
            feats = model.encode_image(random_image(self.cfg))
            a = model.assemble(feats, [5], answer, MODE_DUAL)
            logits = llm_decoder.lm_forward(model.lm, a).data
            loss = model.loss(feats, [5], answer, MODE_DUAL).item()
        start = a.answer_start()
        z = logits - logits.max(axis=-1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
        expected = -np.mean([logp[start - 1 + i, t] for i, t in enumerate(answer)])
        self.assertAlmostEqual(loss, expected, places=10)


def _oracle_score(lm, question, vq, vp, candidate):
    # Token by token: log p(c_i | prefix c_<i), each from its own forward pass.
    return sum(llm_decoder.next_token_logprobs(lm, question, vq, vp, candidate[:i])[token]
               for i, token in enumerate(candidate))


def _reference_beam_history(lm, question, vq, vp, beam_width, max_len):
    """Enumerate every one-token extension, score each full sequence, keep the top B."""
    live = [[]]
    history = []
    for _ in range(max_len):
        scored = []
        for parent, tokens in enumerate(live):
            for token in range(lm.cfg.vocab_size):
                seq = tokens + [token]
                scored.append((llm_decoder.score_candidate(lm, question, vq, vp, seq), token,
                               parent, tuple(seq)))
        scored.sort(key=lambda e: (-e[0], e[1], e[2]))
        chosen = scored[:beam_width]
        history.append([seq for _, _, _, seq in chosen])
        live = [list(seq) for _, _, _, seq in chosen if seq[-1] != EOS_ID]
        if not live:
            break
    return history


class TestRankingAndDecoding(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.cfg = tiny_config()
        with precision(np.float64):
            cls.model = BlivaModel(cls.cfg.model, seed=0)
        cls.samples = generate_vqa(30, 4, cls.cfg.data, "test")

    def _prompts(self, sample):
        with no_grad():
            feats = self.model.encode_image(
                preprocess_eval(sample.image, self.cfg.model.encoder.image_size))
            return self.model.visual_prompts(feats, sample.question_ids, MODE_DUAL)

    def test_rank_matches_token_oracle(self):
        lm = self.model.lm
        for s in self.samples:
            vq, vp = self._prompts(s)
            oracle = [_oracle_score(lm, s.question_ids, vq, vp, c) for c in s.candidates]
            self.assertEqual(
                llm_decoder.rank_candidates(lm, s.question_ids, vq, vp, s.candidates),
                int(np.argmax(oracle)), s.id)

    def test_score_candidate_errors(self):
        with self.assertRaises(ValueError):
            llm_decoder.rank_candidates(self.model.lm, [5], None, None, [])
        with self.assertRaises(ValueError):
            llm_decoder.score_candidate(self.model.lm, [5], None, None, [])

    def test_length_normalized_score(self):
        lm = self.model.lm
        total = llm_decoder.score_candidate(lm, [5], None, None, [7, 8, EOS_ID])
        mean = llm_decoder.score_candidate(lm, [5], None, None, [7, 8, EOS_ID],
                                           length_normalize=True)
        self.assertAlmostEqual(mean, total / 3, places=12)

    def test_beam_width_one_is_greedy(self):
        lm = self.model.lm
        rng = Rng(23)
        for _ in range(20):
            q = [rng.randint(3, 40) for _ in range(rng.randint(1, 6))]
            greedy = llm_decoder.greedy_decode(lm, q, None, None, max_len=5)
            beam = llm_decoder.beam_search(lm, q, None, None, beam_width=1, max_len=5)
            self.assertEqual(beam.tokens, greedy)

    def test_beam_matches_brute_force_extensions(self):
        lm = self.model.lm
        rng = Rng(29)
        for _ in range(5):
            q = [rng.randint(3, 40) for _ in range(rng.randint(1, 6))]
            result = llm_decoder.beam_search(lm, q, None, None, beam_width=3, max_len=3)
            reference = _reference_beam_history(lm, q, None, None, 3, 3)
            self.assertEqual([[seq for seq, _ in step] for step in result.history], reference)

    def test_beam_arguments(self):
        with self.assertRaises(ValueError):
            llm_decoder.beam_search(self.model.lm, [5], None, None, beam_width=0, max_len=3)


if __name__ == '__main__':
    unittest.main(verbosity=2)
