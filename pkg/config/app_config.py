"""Application configuration constants."""

# Application metadata
APP_NAME = "BLIVA Desk"
APP_VERSION = "1.0.0"

# Preset file (relative to project root)
PRESETS_FILE = "configurations.json"
DEFAULT_PRESET = "desk"

# Vocabulary specials
PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
GLYPH_CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
SPACE = " "

# Glyph rendering
GLYPH_CELL = 8  # pixels per glyph side; equals the encoder patch size

# Image normalization (CLIP statistics used by the BLIP processors)
NORM_MEAN = (0.48145466, 0.4578275, 0.40821073)
NORM_STD = (0.26862954, 0.26130258, 0.27577711)
CROP_SCALE = (0.5, 1.0)
CROP_RATIO = (3.0 / 4.0, 4.0 / 3.0)

# On-disk formats
IMAGE_MAGIC = b"BIMG"
IMAGE_VERSION = 1
CHECKPOINT_MAGIC = b"BLVA"
CHECKPOINT_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"

# Optimizer / schedule values reported for the full-scale runs
FULL_SCALE_BETA1 = 0.9
FULL_SCALE_BETA2 = 0.999
FULL_SCALE_WEIGHT_DECAY = 0.05
FULL_SCALE_WARMUP_STEPS = 1000
FULL_SCALE_LR_START = 1e-8
FULL_SCALE_LR_PEAK = 1e-5
FULL_SCALE_LR_MIN = 0.0
ADAMW_EPS = 1e-8

# Visual branches / evaluation modes
MODE_QUERY_ONLY = "query_only"
MODE_PATCH_ONLY = "patch_only"
MODE_DUAL = "dual"
MODES = (MODE_QUERY_ONLY, MODE_PATCH_ONLY, MODE_DUAL)

# Sample kinds
KIND_READ_CELL = "read_cell"
KIND_READ_WORD = "read_word"
KIND_COUNT_WORDS = "count_words"
KIND_CAPTION = "caption"
VQA_KINDS = (KIND_READ_CELL, KIND_READ_WORD, KIND_COUNT_WORDS)
