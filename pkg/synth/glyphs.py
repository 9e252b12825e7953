"""Built-in 8x8 glyph bitmaps for the 36-character charset."""

from typing import Dict

import numpy as np

from config.app_config import GLYPH_CELL, GLYPH_CHARSET

# '#' = foreground, '.' = background; one 8-row block per character.
_GLYPH_ROWS = {
    "A": ["..###...", ".#...#..", ".#...#..", ".#####..", ".#...#..", ".#...#..", ".#...#..", "........"],
    "B": [".####...", ".#...#..", ".#...#..", ".####...", ".#...#..", ".#...#..", ".####...", "........"],
    "C": ["..###...", ".#...#..", ".#......", ".#......", ".#......", ".#...#..", "..###...", "........"],
    "D": [".###....", ".#..#...", ".#...#..", ".#...#..", ".#...#..", ".#..#...", ".###....", "........"],
    "E": [".#####..", ".#......", ".#......", ".####...", ".#......", ".#......", ".#####..", "........"],
    "F": [".#####..", ".#......", ".#......", ".####...", ".#......", ".#......", ".#......", "........"],
    "G": ["..###...", ".#...#..", ".#......", ".#.###..", ".#...#..", ".#...#..", "..####..", "........"],
    "H": [".#...#..", ".#...#..", ".#...#..", ".#####..", ".#...#..", ".#...#..", ".#...#..", "........"],
    "I": ["..###...", "...#....", "...#....", "...#....", "...#....", "...#....", "..###...", "........"],
    "J": ["....###.", ".....#..", ".....#..", ".....#..", ".#...#..", ".#...#..", "..###...", "........"],
    "K": [".#...#..", ".#..#...", ".#.#....", ".##.....", ".#.#....", ".#..#...", ".#...#..", "........"],
    "L": [".#......", ".#......", ".#......", ".#......", ".#......", ".#......", ".#####..", "........"],
    "M": [".#...#..", ".##.##..", ".#.#.#..", ".#.#.#..", ".#...#..", ".#...#..", ".#...#..", "........"],
    "N": [".#...#..", ".#...#..", ".##..#..", ".#.#.#..", ".#..##..", ".#...#..", ".#...#..", "........"],
    "O": ["..###...", ".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#...#..", "..###...", "........"],
    "P": [".####...", ".#...#..", ".#...#..", ".####...", ".#......", ".#......", ".#......", "........"],
    "Q": ["..###...", ".#...#..", ".#...#..", ".#...#..", ".#.#.#..", ".#..#...", "..##.#..", "........"],
    "R": [".####...", ".#...#..", ".#...#..", ".####...", ".#.#....", ".#..#...", ".#...#..", "........"],
    "S": ["..####..", ".#......", ".#......", "..###...", ".....#..", ".....#..", ".####...", "........"],
    "T": [".#####..", "...#....", "...#....", "...#....", "...#....", "...#....", "...#....", "........"],
    "U": [".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#...#..", "..###...", "........"],
    "V": [".#...#..", ".#...#..", ".#...#..", ".#...#..", ".#...#..", "..#.#...", "...#....", "........"],
    "W": [".#...#..", ".#...#..", ".#...#..", ".#.#.#..", ".#.#.#..", ".#.#.#..", "..#.#...", "........"],
    "X": [".#...#..", ".#...#..", "..#.#...", "...#....", "..#.#...", ".#...#..", ".#...#..", "........"],
    "Y": [".#...#..", ".#...#..", "..#.#...", "...#....", "...#....", "...#....", "...#....", "........"],
    "Z": [".#####..", ".....#..", "....#...", "...#....", "..#.....", ".#......", ".#####..", "........"],
    "0": ["..###...", ".#...#..", ".#..##..", ".#.#.#..", ".##..#..", ".#...#..", "..###...", "........"],
    "1": ["...#....", "..##....", "...#....", "...#....", "...#....", "...#....", "..###...", "........"],
    "2": ["..###...", ".#...#..", ".....#..", "....#...", "...#....", "..#.....", ".#####..", "........"],
    "3": [".#####..", "....#...", "...#....", "....#...", ".....#..", ".#...#..", "..###...", "........"],
    "4": ["....#...", "...##...", "..#.#...", ".#..#...", ".#####..", "....#...", "....#...", "........"],
    "5": [".#####..", ".#......", ".####...", ".....#..", ".....#..", ".#...#..", "..###...", "........"],
    "6": ["...##...", "..#.....", ".#......", ".####...", ".#...#..", ".#...#..", "..###...", "........"],
    "7": [".#####..", ".....#..", "....#...", "...#....", "..#.....", "..#.....", "..#.....", "........"],
    "8": ["..###...", ".#...#..", ".#...#..", "..###...", ".#...#..", ".#...#..", "..###...", "........"],
    "9": ["..###...", ".#...#..", ".#...#..", "..####..", ".....#..", "....#...", "..##....", "........"],
}


class GlyphFont:
    """Maps every charset character to an 8x8 binary bitmap."""

    def __init__(self, rows: Dict[str, list] = None):
        rows = rows if rows is not None else _GLYPH_ROWS
        self.bitmaps: Dict[str, np.ndarray] = {}
        for char, pattern in rows.items():
            if len(pattern) != GLYPH_CELL or any(len(r) != GLYPH_CELL for r in pattern):
                raise ValueError(f"Glyph '{char}' is not {GLYPH_CELL}x{GLYPH_CELL}")
            self.bitmaps[char] = np.array([[1.0 if c == "#" else 0.0 for c in r]
                                           for r in pattern], dtype=np.float32)

    def bitmap(self, char: str) -> np.ndarray:
        """
        Get the bitmap of a character.

        Raises:
            KeyError: If the character has no glyph
        """
        if char not in self.bitmaps:
            raise KeyError(f"No glyph for character {char!r}")
        return self.bitmaps[char]

    def covers(self, charset: str = GLYPH_CHARSET) -> bool:
        return all(c in self.bitmaps for c in charset)


DEFAULT_FONT = GlyphFont()
