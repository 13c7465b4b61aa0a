"""Equally spaced HSV hues converted to 8-bit RGB."""

from __future__ import annotations

import colorsys


def palette(n: int, offset: float = 0.0) -> list[tuple[int, int, int]]:
    """``n`` colors with hues {offset + i/n mod 1}, full saturation/value.

    The offset wraps modulo 1, so ``offset`` and ``offset + 1`` yield the
    same palette.
    """
    if n < 1:
        raise ValueError(f"palette needs at least one color, got n={n}")
    offset = offset % 1.0
    colors = []
    for i in range(n):
        hue = (offset + i / n) % 1.0
        r, g, b = colorsys.hsv_to_rgb(hue, 1.0, 1.0)
        colors.append((round(r * 255), round(g * 255), round(b * 255)))
    return colors
