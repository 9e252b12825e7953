#!/usr/bin/env python3
"""
Gradient suite test.

Runs grad_check in float64 over every differentiable op and the composite
forwards (encoder block, Q-Former block, LM block, end-to-end loss).
"""

import sys
import time
import unittest
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from autograd.grad_suite import TOLERANCE, format_results, run_grad_suite


def run_tests():
    """Run the gradient suite and print a ✓/✗ line per check."""
    print("=" * 70)
    print("GRADIENT SUITE (float64, max relative error <= %.0e)" % TOLERANCE)
    print("=" * 70)
    start = time.perf_counter()
    results = run_grad_suite(seed=0)
    for line in format_results(results):
        print(line)
    print(f"\nRuntime: {time.perf_counter() - start:.1f}s")
    return all(r.passed for r in results)


class TestGradSuite(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.results = run_grad_suite(seed=0)

    def test_all_checks_pass(self):
        failed = {r.name: r.error for r in self.results if not r.passed}
        self.assertEqual(failed, {})

    def test_covers_composites(self):
        names = {r.name.split("/")[0] for r in self.results}
        for expected in ("encoder_block", "qformer_block", "lm_block", "end_to_end",
                         "matmul", "softmax", "layer_norm", "gelu", "embedding_lookup",
                         "concat", "cross_entropy"):
            self.assertIn(expected, names)


if __name__ == "__main__":
    sys.exit(0 if run_tests() else 1)
