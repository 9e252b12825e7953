"""Evaluation metrics, the ablation harness and report writers."""

from evaluation.ablation import run_ablation
from evaluation.evaluate import evaluate
from evaluation.report import AblationReport, EvalReport

__all__ = ["evaluate", "run_ablation", "EvalReport", "AblationReport"]
