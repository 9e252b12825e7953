"""Test application constants and project-relative resource resolution."""

import os
import sys
import tempfile
import unittest
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.app_config import (APP_NAME, APP_VERSION, BOS_ID, EOS_ID, GLYPH_CELL, GLYPH_CHARSET,
                               MODES, NORM_MEAN, NORM_STD, PAD_ID, PRESETS_FILE)
from config.run_config import DEFAULT_VOCAB_SIZE, EncoderConfig
from utils.resource_path import ensure_parent_dir, resource_path


class TestAppConfig(unittest.TestCase):
    """Test application configuration."""

    def test_app_name_defined(self):
        self.assertIsInstance(APP_NAME, str)
        self.assertGreater(len(APP_NAME), 0)
        self.assertRegex(APP_VERSION, r"^\d+\.\d+\.\d+$")

    def test_specials_are_distinct_and_first(self):
        self.assertEqual(sorted({PAD_ID, BOS_ID, EOS_ID}), [0, 1, 2])
        self.assertEqual(DEFAULT_VOCAB_SIZE, 3 + len(GLYPH_CHARSET) + 1)

    def test_charset_has_no_duplicates(self):
        self.assertEqual(len(set(GLYPH_CHARSET)), len(GLYPH_CHARSET))

    def test_glyph_cell_matches_default_patch(self):
        """One glyph per encoder patch at the default scale."""
        self.assertEqual(GLYPH_CELL, EncoderConfig().patch_size)

    def test_normalization_channels(self):
        self.assertEqual(len(NORM_MEAN), 3)
        self.assertEqual(len(NORM_STD), 3)
        self.assertTrue(all(s > 0 for s in NORM_STD))

    def test_modes(self):
        self.assertEqual(set(MODES), {"query_only", "patch_only", "dual"})


class TestResourcePath(unittest.TestCase):

    def test_presets_file_resolves(self):
        path = resource_path(PRESETS_FILE)
        self.assertTrue(os.path.isabs(path))
        self.assertTrue(os.path.exists(path), f"Preset file not found at {path}")

    def test_resolves_from_other_working_directory(self):
        cwd = os.getcwd()
        with tempfile.TemporaryDirectory() as tmp:
            try:
                os.chdir(tmp)
                self.assertTrue(os.path.exists(resource_path(PRESETS_FILE)))
            finally:
                os.chdir(cwd)

    def test_absolute_path_unchanged(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(resource_path(tmp), os.path.abspath(tmp))

    def test_ensure_parent_dir(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = os.path.join(tmp, "a", "b", "file.bin")
            self.assertEqual(ensure_parent_dir(target), target)
            self.assertTrue(os.path.isdir(os.path.join(tmp, "a", "b")))


if __name__ == '__main__':
    unittest.main(verbosity=2)
