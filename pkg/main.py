"""Main entry point for the BLIVA desk command-line tool."""

import argparse
import json
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional

from config.app_config import APP_NAME, APP_VERSION, DEFAULT_PRESET, MODES
from config.config_loader import RunConfigLoader
from config.run_config import RunConfig
from utils.log_setup import configure_logging
from utils.resource_path import ensure_parent_dir

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

LM_CKPT = "lm.ckpt"
STAGE1_CKPT = "stage1.ckpt"
STAGE2_CKPT = "stage2.ckpt"


class UsageError(Exception):
    """Bad command line; the parser has already printed help."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        sys.stderr.write(f"\n{self.prog}: error: {message}\n")
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run-config JSON file")
    common.add_argument("--preset", default=DEFAULT_PRESET,
                        help=f"named preset from configurations.json (default {DEFAULT_PRESET})")
    common.add_argument("--seed", type=int, help="model/training seed override")
    common.add_argument("--mode", choices=MODES, help="visual branches to assemble")
    common.add_argument("--out", metavar="PATH", help="report / output path override")
    common.add_argument("--data-dir", metavar="DIR", help="dataset directory override")
    common.add_argument("--checkpoint", metavar="PATH", help="checkpoint to start from / inspect")
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = _Parser(prog="main.py", description=f"{APP_NAME} {APP_VERSION}: dual-branch "
                     "visual soft prompts on synthetic text-rich VQA")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("gen-data", parents=[common], help="generate caption/train/test splits")
    sub.add_parser("pretrain-lm", parents=[common], help="pre-train the LM on caption text")
    sub.add_parser("train-stage1", parents=[common], help="align the patch projection on captions")
    sub.add_parser("train-stage2", parents=[common], help="instruction-tune on VQA samples")
    sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on the test split")
    sub.add_parser("ablate", parents=[common], help="run the three-arm branch ablation")
    sub.add_parser("grad-check", parents=[common], help="run the float64 gradient suite")
    sub.add_parser("inspect-ckpt", parents=[common], help="list a checkpoint's contents")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    paths = {}
    if args.data_dir is not None:
        paths["data_dir"] = args.data_dir
    if args.out is not None:
        paths["out"] = args.out
    if paths:
        overrides["paths"] = paths
    return overrides


def _checkpoint_path(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.paths.checkpoint_dir, name)


def _load_split(cfg: RunConfig, split: str):
    from synth.dataset import CAPTION_SPLIT, generate_captions, generate_vqa
    from synth.dataset_io import read_split

    try:
        return read_split(cfg.paths.data_dir, split)
    except FileNotFoundError:
        logger.info("No %s split under %s; generating it in memory", split, cfg.paths.data_dir)
    sizes = {"caption": cfg.data.n_caption, "train": cfg.data.n_train, "test": cfg.data.n_test}
    if split == CAPTION_SPLIT:
        return generate_captions(sizes[split], cfg.data_seed, cfg.data)
    return generate_vqa(sizes[split], cfg.data_seed, cfg.data, split)


def _start_model(cfg: RunConfig, explicit: Optional[str], fallback: Optional[str]):
    """Model from an explicit checkpoint, else the previous stage's checkpoint, else fresh."""
    from model.bliva import BlivaModel
    from training.checkpoint import load_checkpoint

    path = explicit or (fallback if fallback and os.path.exists(fallback) else None)
    if path:
        logger.info("Starting from checkpoint %s", path)
        return load_checkpoint(path, config=cfg.model)
    logger.info("Starting from fresh initialization (seed %d)", cfg.seed)
    return BlivaModel(cfg.model, cfg.seed)


def cmd_gen_data(cfg: RunConfig, args) -> int:
    from synth.dataset import generate_all
    from synth.dataset_io import write_split

    for split, samples in generate_all(cfg.data, cfg.data_seed).items():
        manifest = write_split(samples, cfg.paths.data_dir, split)
        print(f"{split:<8} {len(samples):>6} samples -> {manifest}")
    return EXIT_OK


def _train(cfg: RunConfig, args, stage: str) -> int:
    from synth.dataset import CAPTION_SPLIT, TRAIN_SPLIT
    from training import stages
    from training.metrics_log import MetricsLog

    log = MetricsLog(cfg.paths.metrics_log)
    if stage == "lm_pretrain":
        model = _start_model(cfg, args.checkpoint, None)
        out = _checkpoint_path(cfg, LM_CKPT)
        metrics = stages.pretrain_lm(model, _load_split(cfg, CAPTION_SPLIT), cfg, log, out)
    elif stage == "stage1":
        model = _start_model(cfg, args.checkpoint, _checkpoint_path(cfg, LM_CKPT))
        captions = _load_split(cfg, CAPTION_SPLIT)
        if cfg.encoder_pretrain.enabled:
            stages.pretrain_encoder(model, captions, cfg, log)
        out = _checkpoint_path(cfg, STAGE1_CKPT)
        metrics = stages.train_stage1(model, captions, cfg, log, out)
    else:
        model = _start_model(cfg, args.checkpoint, _checkpoint_path(cfg, STAGE1_CKPT))
        out = _checkpoint_path(cfg, STAGE2_CKPT)
        metrics = stages.train_stage2(model, _load_split(cfg, TRAIN_SPLIT), cfg,
                                      metrics_log=log, checkpoint_path=out)
    print(f"{metrics.stage}: {metrics.steps} steps, probe loss "
          f"{metrics.initial_loss:.4f} -> {metrics.final_loss:.4f}")
    print(f"checkpoint {out} (id {metrics.checkpoint_id})")
    if args.out:
        with open(ensure_parent_dir(args.out), "w", encoding="utf-8") as f:
            json.dump(metrics.to_dict(), f, indent=2)
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    from evaluation.evaluate import evaluate
    from evaluation.report import csv_path_for, eval_rows, write_csv, write_json
    from synth.dataset import TEST_SPLIT
    from training.checkpoint import checkpoint_id, read_header

    path = args.checkpoint or _checkpoint_path(cfg, STAGE2_CKPT)
    model = _start_model(cfg, path, None)
    steps = int(read_header(path).get("steps", 0))
    report = evaluate(model, _load_split(cfg, TEST_SPLIT), cfg.mode, cfg.eval, split=TEST_SPLIT,
                      seed=cfg.seed, checkpoint_id=checkpoint_id(path), steps=steps)
    write_json(report, cfg.paths.out)
    write_csv(eval_rows(report), csv_path_for(cfg.paths.out))
    print(f"{report.mode}/{report.split}: accuracy {report.accuracy:.4f} "
          f"over {report.n_samples} samples, mean answer loss {report.mean_answer_loss:.4f}")
    for kind, acc in report.per_kind.items():
        print(f"  {kind:<12} {acc:.4f}")
    print(f"report -> {cfg.paths.out}")
    return EXIT_OK


def cmd_ablate(cfg: RunConfig, args) -> int:
    from evaluation.ablation import run_ablation
    from evaluation.report import ablation_rows, csv_path_for, write_csv, write_json
    from training.metrics_log import MetricsLog

    report = run_ablation(cfg, metrics_log=MetricsLog(cfg.paths.metrics_log))
    write_json(report, cfg.paths.out)
    write_csv(ablation_rows(report), csv_path_for(cfg.paths.out))
    print(f"{'arm':<20} {'accuracy':>9} {'start loss':>11} {'improvement':>12}")
    for arm in report.arms:
        improvement = "n/a" if arm.improvement is None else f"{arm.improvement:+.2%}"
        print(f"{arm.arm:<20} {arm.report.accuracy:>9.4f} "
              f"{arm.stage2_start_caption_loss:>11.4f} {improvement:>12}")
    print(f"report -> {cfg.paths.out}")
    return EXIT_OK


def cmd_grad_check(cfg: RunConfig, args) -> int:
    from autograd.grad_suite import format_results, run_grad_suite

    results = run_grad_suite(seed=cfg.seed)
    for line in format_results(results):
        print(line)
    if args.out:
        with open(ensure_parent_dir(args.out), "w", encoding="utf-8") as f:
            json.dump([r.__dict__ for r in results], f, indent=2)
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def cmd_inspect_ckpt(cfg: RunConfig, args) -> int:
    from model.bliva import (GROUP_ENCODER, GROUP_LM, GROUP_PATCH_PROJ, GROUP_QFORMER,
                             GROUP_QUERY_PROJ)
    from training.checkpoint import checkpoint_id, read_header

    path = args.checkpoint or _checkpoint_path(cfg, STAGE2_CKPT)
    header = read_header(path)
    tensors = header["tensors"]
    print(f"{path} (id {checkpoint_id(path)}, seed {header.get('seed')}, "
          f"steps {header.get('steps', 0)})")
    print(f"config {json.dumps(header.get('config', {}), sort_keys=True)}")
    for group in (GROUP_ENCODER, GROUP_QFORMER, GROUP_QUERY_PROJ, GROUP_PATCH_PROJ, GROUP_LM):
        names = [n for n in sorted(tensors) if n.startswith(group)]
        values = sum(math.prod(tensors[n]["shape"]) for n in names)
        print(f"{group:<24} {len(names):>4} arrays {values:>10} values")
    for name in sorted(tensors):
        print(f"  {name:<48} {tuple(tensors[name]['shape'])}")
    if args.out:
        with open(ensure_parent_dir(args.out), "w", encoding="utf-8") as f:
            json.dump(header, f, indent=2)
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "pretrain-lm": lambda cfg, args: _train(cfg, args, "lm_pretrain"),
    "train-stage1": lambda cfg, args: _train(cfg, args, "stage1"),
    "train-stage2": lambda cfg, args: _train(cfg, args, "stage2"),
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "grad-check": cmd_grad_check,
    "inspect-ckpt": cmd_inspect_ckpt,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on a usage error, 2 on a runtime error
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_help()
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_USAGE
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE

    configure_logging(args.log_level)
    try:
        cfg = RunConfigLoader().build(preset=args.preset, config_path=args.config,
                                      overrides=_overrides(args))
        return COMMANDS[args.command](cfg, args)
    except Exception as e:
        logger.debug("Command %s failed", args.command, exc_info=True)
        sys.stderr.write(f"error: {type(e).__name__}: {e}\n")
        return EXIT_RUNTIME


def main():
    """Main application entry point."""
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
