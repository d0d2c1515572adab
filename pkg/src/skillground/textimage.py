"""Deterministic text-to-image rendering for text-as-image queries.

Vision encoders trained on image-text pairs often ground a query better
when it arrives as pixels, so text queries can be rasterized onto a fixed
white canvas with black glyphs. The font is an embedded 5x7 bitmap (no
system fonts), which makes identical text produce byte-identical PNGs on
any machine. The source string is also stored in a tEXt chunk so that
in-process mock backends can recover it without OCR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pngio

TEXT_CHUNK_KEY = "source-text"

# 5x7 glyphs as row strings, '#' = ink. Lowercase input is rendered with the
# uppercase glyph; anything unmapped renders as a filled box.
_GLYPHS_RAW = {
    " ": (".....", ".....", ".....", ".....", ".....", ".....", "....."),
    "A": (".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"),
    "B": ("####.", "#...#", "####.", "#...#", "#...#", "#...#", "####."),
    "C": (".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."),
    "D": ("####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."),
    "E": ("#####", "#....", "####.", "#....", "#....", "#....", "#####"),
    "F": ("#####", "#....", "####.", "#....", "#....", "#....", "#...."),
    "G": (".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."),
    "H": ("#...#", "#...#", "#####", "#...#", "#...#", "#...#", "#...#"),
    "I": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"),
    "J": ("..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."),
    "K": ("#...#", "#..#.", "###..", "#.#..", "#..#.", "#...#", "#...#"),
    "L": ("#....", "#....", "#....", "#....", "#....", "#....", "#####"),
    "M": ("#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"),
    "N": ("#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"),
    "O": (".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "P": ("####.", "#...#", "#...#", "####.", "#....", "#....", "#...."),
    "Q": (".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"),
    "R": ("####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"),
    "S": (".####", "#....", "#....", ".###.", "....#", "....#", "####."),
    "T": ("#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."),
    "U": ("#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."),
    "V": ("#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."),
    "W": ("#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"),
    "X": ("#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"),
    "Y": ("#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."),
    "Z": ("#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"),
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", "#####"),
    "2": (".###.", "#...#", "....#", "..##.", ".#...", "#....", "#####"),
    "3": (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": (".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."),
    ".": (".....", ".....", ".....", ".....", ".....", ".##..", ".##.."),
    ",": (".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."),
    "!": ("..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."),
    "?": (".###.", "#...#", "....#", "..##.", "..#..", ".....", "..#.."),
    "'": ("..#..", "..#..", ".#...", ".....", ".....", ".....", "....."),
    '"': (".#.#.", ".#.#.", ".....", ".....", ".....", ".....", "....."),
    "-": (".....", ".....", ".....", "#####", ".....", ".....", "....."),
    "_": (".....", ".....", ".....", ".....", ".....", ".....", "#####"),
    ":": (".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."),
    ";": (".....", ".##..", ".##..", ".....", ".##..", "..#..", ".#..."),
    "(": ("...#.", "..#..", ".#...", ".#...", ".#...", "..#..", "...#."),
    ")": (".#...", "..#..", "...#.", "...#.", "...#.", "..#..", ".#..."),
    "/": ("....#", "....#", "...#.", "..#..", ".#...", "#....", "#...."),
    "+": (".....", "..#..", "..#..", "#####", "..#..", "..#..", "....."),
    "=": (".....", ".....", "#####", ".....", "#####", ".....", "....."),
    "*": (".....", "#.#.#", ".###.", "#####", ".###.", "#.#.#", "....."),
    "&": (".##..", "#..#.", "#..#.", ".##..", "#.#.#", "#..#.", ".##.#"),
    "%": ("##..#", "##..#", "...#.", "..#..", ".#...", "#..##", "#..##"),
    "#": (".#.#.", ".#.#.", "#####", ".#.#.", "#####", ".#.#.", ".#.#."),
    "@": (".###.", "#...#", "#.###", "#.#.#", "#.###", "#....", ".###."),
    "<": ("...#.", "..#..", ".#...", "#....", ".#...", "..#..", "...#."),
    ">": (".#...", "..#..", "...#.", "....#", "...#.", "..#..", ".#..."),
    "[": (".###.", ".#...", ".#...", ".#...", ".#...", ".#...", ".###."),
    "]": (".###.", "...#.", "...#.", "...#.", "...#.", "...#.", ".###."),
}
_FALLBACK = ("#####", "#####", "#####", "#####", "#####", "#####", "#####")

GLYPH_W = 5
GLYPH_H = 7


def _glyph(ch: str) -> tuple[str, ...]:
    return _GLYPHS_RAW.get(ch.upper(), _FALLBACK)


class TextOverflowError(ValueError):
    """Text does not fit on the canvas even after wrapping."""


@dataclass(frozen=True)
class RenderConfig:
    """Fixed canvas and font metrics for deterministic rendering."""

    width: int = 384
    height: int = 160
    scale: int = 2
    margin: int = 8
    char_spacing: int = 1
    line_spacing: int = 3

    @property
    def cell_w(self) -> int:
        return (GLYPH_W + self.char_spacing) * self.scale

    @property
    def cell_h(self) -> int:
        return (GLYPH_H + self.line_spacing) * self.scale

    @property
    def chars_per_line(self) -> int:
        return max(1, (self.width - 2 * self.margin) // self.cell_w)

    @property
    def max_lines(self) -> int:
        return max(1, (self.height - 2 * self.margin) // self.cell_h)


def _wrap(text: str, per_line: int) -> list[str]:
    lines: list[str] = []
    for raw_line in text.split("\n"):
        current = ""
        for word in raw_line.split(" "):
            # hard-split words longer than a full line
            while len(word) > per_line:
                if current:
                    lines.append(current)
                    current = ""
                lines.append(word[:per_line])
                word = word[per_line:]
            if not current:
                current = word
            elif len(current) + 1 + len(word) <= per_line:
                current += " " + word
            else:
                lines.append(current)
                current = word
        lines.append(current)
    return lines


def rasterize(text: str, cfg: RenderConfig = RenderConfig()) -> np.ndarray:
    """Render text to a 2D uint8 array (255 background, 0 glyphs)."""
    if not text:
        raise ValueError("text must be nonempty")
    lines = _wrap(text, cfg.chars_per_line)
    if len(lines) > cfg.max_lines:
        raise TextOverflowError(
            f"text needs {len(lines)} lines, canvas fits {cfg.max_lines}"
        )
    canvas = np.full((cfg.height, cfg.width), 255, dtype=np.uint8)
    for row_i, line in enumerate(lines):
        y0 = cfg.margin + row_i * cfg.cell_h
        for col_i, ch in enumerate(line):
            x0 = cfg.margin + col_i * cfg.cell_w
            glyph = _glyph(ch)
            for gy in range(GLYPH_H):
                for gx in range(GLYPH_W):
                    if glyph[gy][gx] == "#":
                        ys = y0 + gy * cfg.scale
                        xs = x0 + gx * cfg.scale
                        canvas[ys : ys + cfg.scale, xs : xs + cfg.scale] = 0
    return canvas


def render_text_image(text: str, cfg: RenderConfig = RenderConfig()) -> bytes:
    """Render text to PNG bytes; identical text yields identical bytes.

    The source string rides along in a tEXt chunk so deterministic mock
    backends can treat the image as ground truth for its text.
    """
    pixels = rasterize(text, cfg)
    return pngio.encode_gray(pixels, texts={TEXT_CHUNK_KEY: text})


def extract_source_text(png_bytes: bytes) -> str | None:
    """Source string of a rendered text image, if the metadata is present."""
    try:
        info = pngio.read_info(png_bytes)
    except pngio.PngFormatError:
        return None
    return info.texts.get(TEXT_CHUNK_KEY)
