"""Synthetic text-rich VQA data: vocabulary, glyph scenes, samples, processors, storage."""
