"""Tests for AdamW, the schedule, freeze discipline, stage loops and checkpoints."""

import math
import os
import struct
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from autograd.tensor import Tensor, backward, precision
from config.app_config import CHECKPOINT_VERSION, MODE_DUAL, MODE_PATCH_ONLY, MODE_QUERY_ONLY
from config.config_loader import RunConfigLoader
from model.bliva import BlivaModel
from model.params import snapshot
from synth.dataset import generate_all
from training.checkpoint import load_checkpoint, read_header, save_checkpoint
from training.errors import (CheckpointFormatError, CheckpointMagicError, CheckpointShapeError,
                             CheckpointVersionError, EmptyDatasetError, NonFiniteGradientError)
from training.freeze import STAGE_1, STAGE_2, apply_stage, frozen_names
from training.metrics_log import MetricsLog
from training.optimizer import OptimState, adamw_step, clip_grad_norm, global_grad_norm
from training.schedule import Schedule, lr_at, full_scale_schedule
from training.stages import pretrain_lm, train_stage1, train_stage2


def _param(value, grad=None, requires_grad=True):
    with precision(np.float64):
        p = Tensor(np.atleast_1d(np.asarray(value, dtype=np.float64)), requires_grad=requires_grad)
    if grad is not None:
        p.grad = np.atleast_1d(np.asarray(grad, dtype=np.float64))
    return p


class TestAdamW(unittest.TestCase):

    def test_first_step_hand_computed(self):
        p = _param(1.0, grad=1.0)
        adamw_step({"p": p}, OptimState(eps=1e-12), lr=0.1)
        self.assertAlmostEqual(float(p.data[0]), 0.895, places=9)

    def test_decay_only(self):
        p = _param(2.0, grad=0.0)
        adamw_step({"p": p}, OptimState(), lr=0.1)
        self.assertAlmostEqual(float(p.data[0]), 2.0 * (1 - 0.1 * 0.05), places=15)

    def test_frozen_untouched(self):
        frozen = _param(3.0, grad=1.0, requires_grad=False)
        state = OptimState()
        adamw_step({"frozen": frozen}, state, lr=0.1)
        self.assertEqual(float(frozen.data[0]), 3.0)
        self.assertNotIn("frozen", state.m)

    def test_non_finite_names_parameter(self):
        good = _param(1.0, grad=1.0)
        bad = _param(1.0, grad=np.nan)
        with self.assertRaises(NonFiniteGradientError) as ctx:
            adamw_step({"good": good, "bad": bad}, OptimState(), lr=0.1)
        self.assertIn("bad", str(ctx.exception))
        self.assertEqual(float(good.data[0]), 1.0)

    def test_matches_scalar_recurrence(self):
        b1, b2, eps, lr, g = 0.9, 0.999, 1e-8, 0.01, 0.3
        p = _param(0.5, grad=g)
        state = OptimState(beta1=b1, beta2=b2, eps=eps, weight_decay=0.0)
        ref, m, v = 0.5, 0.0, 0.0
        for t in range(1, 11):
            p.grad = np.array([g])
            adamw_step({"p": p}, state, lr)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            ref -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
            self.assertAlmostEqual(float(p.data[0]), ref, delta=1e-7)

    def test_clip(self):
        p = _param([3.0, 4.0], grad=[3.0, 4.0])
        self.assertAlmostEqual(global_grad_norm({"p": p}), 5.0)
        clip_grad_norm({"p": p}, 1.0)
        self.assertAlmostEqual(global_grad_norm({"p": p}), 1.0, places=6)


class TestSchedule(unittest.TestCase):

    def setUp(self):
        self.s = full_scale_schedule(total_steps=5000)

    def test_full_scale_endpoints(self):
        self.assertEqual(lr_at(self.s, 0), 1e-8)
        self.assertAlmostEqual(lr_at(self.s, 1000), 1e-5, delta=1e-20)

    def test_cosine_midpoint(self):
        expected = 0.0 + (1e-5 - 0.0) * 0.5 * (1 + math.cos(math.pi * 0.5))
        self.assertLessEqual(abs(lr_at(self.s, 3000) - expected) / expected, 1e-12)

    def test_continuous_at_warmup(self):
        s = Schedule(warmup_steps=10, lr_start=0.0, lr_peak=1.0, total_steps=20)
        self.assertAlmostEqual(lr_at(s, 10), 1.0)
        self.assertAlmostEqual(lr_at(s, 9), 0.9)
        self.assertAlmostEqual(lr_at(s, 20), 0.0)

    def test_out_of_range(self):
        with self.assertRaises(ValueError):
            lr_at(self.s, 5001)
        with self.assertRaises(ValueError):
            lr_at(self.s, -1)

    def test_invalid_schedule(self):
        with self.assertRaises(ValueError):
            Schedule(warmup_steps=10, lr_start=1.0, lr_peak=0.5, total_steps=20)
        with self.assertRaises(ValueError):
            Schedule(warmup_steps=30, lr_start=0.0, lr_peak=1.0, total_steps=20)


class TestStages(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.cfg = RunConfigLoader().build(preset="tiny")
        cls.data = generate_all(cls.cfg.data, cls.cfg.data_seed)

    def test_stage1_freeze_discipline(self):
        model = BlivaModel(self.cfg.model, seed=0)
        before = snapshot(model.parameters())
        metrics = train_stage1(model, self.data["caption"], self.cfg)
        after = snapshot(model.parameters())
        for name in frozen_names(model, STAGE_1):
            self.assertEqual(before[name], after[name], name)
        self.assertNotEqual(before["connector.patch_proj.weight"],
                            after["connector.patch_proj.weight"])
        self.assertEqual(metrics.trainable, ["connector.patch_proj.bias",
                                             "connector.patch_proj.weight"])
        self.assertEqual(len(metrics.losses), self.cfg.stage1.steps)

    def test_stage2_freeze_discipline(self):
        model = BlivaModel(self.cfg.model, seed=0)
        before = snapshot(model.parameters())
        train_stage2(model, self.data["train"], self.cfg, mode=MODE_DUAL)
        after = snapshot(model.parameters())
        for name in before:
            if name.startswith(("encoder.", "lm.")):
                self.assertEqual(before[name], after[name], name)
        self.assertNotEqual(before["qformer.queries"], after["qformer.queries"])

    def test_stage2_leaves_unused_branch_untouched(self):
        model = BlivaModel(self.cfg.model, seed=0)
        train_stage1(model, self.data["caption"], self.cfg)
        before = snapshot(model.parameters())
        metrics = train_stage2(model, self.data["train"], self.cfg, mode=MODE_QUERY_ONLY)
        after = snapshot(model.parameters())
        for name in ("connector.patch_proj.weight", "connector.patch_proj.bias"):
            self.assertEqual(before[name], after[name], name)
            self.assertNotIn(name, metrics.trainable)
        self.assertNotEqual(before["qformer.queries"], after["qformer.queries"])

    def test_stage2_patch_only_freezes_query_branch(self):
        model = BlivaModel(self.cfg.model, seed=0)
        self.assertEqual(frozen_names(model, STAGE_2, MODE_PATCH_ONLY),
                         sorted(n for n in model.parameters()
                                if not n.startswith("connector.patch_proj.")))
        trainable = apply_stage(model, STAGE_2, MODE_PATCH_ONLY)
        self.assertEqual(trainable, ["connector.patch_proj.bias", "connector.patch_proj.weight"])

    def test_query_table_receives_gradient(self):
        model = BlivaModel(self.cfg.model, seed=0)
        apply_stage(model, STAGE_2)
        s = self.data["train"][0]
        from synth.preprocess import preprocess_eval
        feats = model.encode_image(preprocess_eval(s.image, self.cfg.model.encoder.image_size))
        backward(model.loss(feats, s.question_ids, s.answer_ids, MODE_DUAL))
        self.assertGreater(float(np.abs(model.qformer.queries.grad).sum()), 0.0)
        self.assertIsNone(model.lm.embed.grad)

    def test_zero_steps_keeps_loss(self):
        cfg = self.cfg.model_copy(deep=True)
        cfg.stage1.steps = 0
        cfg.stage1.optim.warmup_steps = 0
        metrics = train_stage1(BlivaModel(cfg.model, seed=0), self.data["caption"], cfg)
        self.assertEqual(metrics.initial_loss, metrics.final_loss)
        self.assertEqual(metrics.losses, [])

    def test_lm_pretrain_touches_lm_only(self):
        model = BlivaModel(self.cfg.model, seed=0)
        before = snapshot(model.parameters())
        log = MetricsLog()
        pretrain_lm(model, self.data["caption"], self.cfg, metrics_log=log)
        after = snapshot(model.parameters())
        for name in before:
            if not name.startswith("lm."):
                self.assertEqual(before[name], after[name], name)
        self.assertEqual(len(log.records), self.cfg.lm_pretrain.steps)
        self.assertEqual(set(log.records[0]), {"step", "stage", "lr", "loss", "wall_ms"})

    def test_empty_dataset(self):
        with self.assertRaises(EmptyDatasetError):
            train_stage1(BlivaModel(self.cfg.model, seed=0), [], self.cfg)
        with self.assertRaises(EmptyDatasetError):
            train_stage2(BlivaModel(self.cfg.model, seed=0), [], self.cfg)

    def test_runs_are_deterministic(self):
        with tempfile.TemporaryDirectory() as tmp:
            blobs = []
            for run in range(2):
                model = BlivaModel(self.cfg.model, seed=0)
                train_stage1(model, self.data["caption"], self.cfg)
                path = os.path.join(tmp, f"run{run}.ckpt")
                train_stage2(model, self.data["train"], self.cfg, checkpoint_path=path)
                with open(path, "rb") as f:
                    blobs.append(f.read())
            self.assertEqual(blobs[0], blobs[1])


class TestCheckpoint(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.cfg = RunConfigLoader().build(preset="tiny")
        self.model = BlivaModel(self.cfg.model, seed=5)
        self.path = os.path.join(self.tmp.name, "model.ckpt")
        self.checkpoint_id = save_checkpoint(self.model, self.path)

    def tearDown(self):
        self.tmp.cleanup()

    def _corrupt(self, offset, data):
        with open(self.path, "r+b") as f:
            f.seek(offset)
            f.write(data)

    def test_roundtrip_bit_exact(self):
        loaded = load_checkpoint(self.path)
        self.assertEqual(snapshot(loaded.parameters()), snapshot(self.model.parameters()))
        self.assertEqual(loaded.config, self.model.config)
        self.assertEqual(len(self.checkpoint_id), 16)

    def test_header(self):
        header = read_header(self.path)
        self.assertEqual(set(header["tensors"]), set(self.model.parameters()))
        offsets = [header["tensors"][n]["offset"] for n in sorted(header["tensors"])]
        self.assertEqual(offsets, sorted(offsets))
        self.assertEqual(header["steps"], 0)
        save_checkpoint(self.model, self.path, steps=7)
        self.assertEqual(read_header(self.path)["steps"], 7)

    def test_bad_magic_no_partial_load(self):
        self._corrupt(0, b"XXXX")
        target = BlivaModel(self.cfg.model, seed=9)
        before = snapshot(target.parameters())
        with self.assertRaises(CheckpointMagicError):
            load_checkpoint(self.path, model=target)
        self.assertEqual(snapshot(target.parameters()), before)

    def test_bad_version(self):
        self._corrupt(4, struct.pack("<I", CHECKPOINT_VERSION + 1))
        with self.assertRaises(CheckpointVersionError):
            load_checkpoint(self.path)

    def test_shape_mismatch_names_parameter(self):
        other = self.cfg.model.model_copy(deep=True)
        other.lm.d_llm = 32
        with self.assertRaises(CheckpointShapeError) as ctx:
            load_checkpoint(self.path, config=other)
        message = str(ctx.exception)
        self.assertIn("lm.embed", message)
        self.assertIn("connector.query_proj.weight", message)
        self.assertIn("(40, 16)", message)

    def test_truncated(self):
        with open(self.path, "r+b") as f:
            f.truncate(os.path.getsize(self.path) - 8)
        with self.assertRaises(CheckpointFormatError):
            load_checkpoint(self.path)


if __name__ == '__main__':
    unittest.main(verbosity=2)
