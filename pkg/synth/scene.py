"""Glyph-grid scenes and their rendering to images."""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from autograd.rng import Rng
from autograd.tensor import Tensor
from config.app_config import GLYPH_CELL, GLYPH_CHARSET, SPACE
from synth.errors import PlacementError
from synth.glyphs import DEFAULT_FONT, GlyphFont


@dataclass(frozen=True)
class PlacedWord:
    """A word written left-to-right starting at grid cell (row, col)."""

    text: str
    row: int
    col: int

    def cells(self) -> List[Tuple[int, int]]:
        return [(self.row, self.col + k) for k in range(len(self.text))]


@dataclass
class Scene:
    """Words placed on a G x G grid of glyph cells."""

    grid: int
    words: List[PlacedWord] = field(default_factory=list)

    def __post_init__(self):
        self._cells = _occupy(self.words, self.grid)

    def reading_order(self) -> List[PlacedWord]:
        """Words sorted top-to-bottom, then left-to-right."""
        return sorted(self.words, key=lambda w: (w.row, w.col))

    def char_at(self, row: int, col: int) -> str:
        """Character at a cell; blank cells read as a space."""
        if not (0 <= row < self.grid and 0 <= col < self.grid):
            raise PlacementError(f"Cell ({row}, {col}) outside {self.grid}x{self.grid} grid")
        return self._cells.get((row, col), SPACE)

    def occupied_cells(self) -> List[Tuple[int, int]]:
        return sorted(cell for cell, char in self._cells.items() if char != SPACE)

    def placements(self) -> List[Tuple[str, int, int]]:
        return [(w.text, w.row, w.col) for w in self.words]


def _occupy(words: Sequence[PlacedWord], grid: int) -> Dict[Tuple[int, int], str]:
    cells: Dict[Tuple[int, int], str] = {}
    for word in words:
        if not word.text:
            raise PlacementError("Cannot place an empty word")
        for k, (r, c) in enumerate(word.cells()):
            if not (0 <= r < grid and 0 <= c < grid):
                raise PlacementError(f"Word {word.text!r} at ({word.row}, {word.col}) "
                                     f"leaves the {grid}x{grid} grid")
            if (r, c) in cells:
                raise PlacementError(f"Word {word.text!r} overlaps cell ({r}, {c})")
            cells[(r, c)] = word.text[k]
    return cells


def render_image(words: Sequence[Tuple[str, int, int]], grid: int, cell: int = GLYPH_CELL,
                 channels: int = 1, font: GlyphFont = DEFAULT_FONT) -> Tensor:
    """
    Render placed words into a [channels, cell*grid, cell*grid] image in [0, 1].

    Each character fills one cell with its glyph bitmap (foreground 1.0,
    background 0.0), so with patch size == cell, grid cell (r, c) is exactly
    encoder patch (r, c).

    Args:
        words: (text, row, col) triples
        grid: cells per side
        cell: pixels per cell side
        channels: 1 or 3 (glyph replicated across channels)

    Raises:
        PlacementError: If words overlap or leave the grid
    """
    if cell != GLYPH_CELL:
        raise PlacementError(f"Glyph bitmaps are {GLYPH_CELL}x{GLYPH_CELL}, cell={cell}")
    cells = _occupy([PlacedWord(t, r, c) for t, r, c in words], grid)
    side = cell * grid
    plane = np.zeros((side, side), dtype=np.float32)
    for (r, c), char in cells.items():
        if char == SPACE:
            continue
        plane[r * cell:(r + 1) * cell, c * cell:(c + 1) * cell] = font.bitmap(char)
    return Tensor(np.repeat(plane[None, :, :], channels, axis=0), dtype=np.float32)


def random_word(rng: Rng, length: int, charset: str = GLYPH_CHARSET) -> str:
    return "".join(rng.choice(charset) for _ in range(length))


def random_scene(rng: Rng, grid: int, min_words: int = 1, max_words: int = 4,
                 min_len: int = 2, max_len: int = 5, attempts: int = 50) -> Scene:
    """
    Place random words without overlap, keeping a blank cell between words on a row.

    Args:
        rng: random stream
        grid: cells per side
        min_words / max_words: inclusive word-count range
        min_len / max_len: inclusive word-length range (clamped to the grid)
        attempts: placement tries per word before it is dropped

    Returns:
        Scene with at least min(min_words, what fits) words
    """
    n_words = rng.randint(min_words, max_words + 1)
    placed: List[PlacedWord] = []
    blocked = set()
    for _ in range(n_words):
        length = rng.randint(min(min_len, grid), min(max_len, grid) + 1)
        text = random_word(rng, length)
        for _ in range(attempts):
            row = rng.randint(0, grid)
            col = rng.randint(0, grid - length + 1)
            span = [(row, c) for c in range(col, col + length)]
            if any(cell in blocked for cell in span):
                continue
            placed.append(PlacedWord(text, row, col))
            blocked.update((row, c) for c in range(col - 1, col + length + 1))
            break
    return Scene(grid=grid, words=placed)
