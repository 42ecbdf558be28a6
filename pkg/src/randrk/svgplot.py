"""Minimal deterministic SVG builder for complex-plane contour figures.

Pure string assembly with fixed number formatting, so identical inputs give
byte-identical documents.
"""

from __future__ import annotations

import math

import numpy as np


def _tick_positions(lo: float, hi: float):
    span = hi - lo
    raw = span / 6.0
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if mult * mag >= raw:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(v) < 1e-12 * span else v)
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def svg_document(groups, rect, title: str = "", width: int = 640, height: int = 560) -> str:
    """Render polyline groups over [re_min, re_max] x [im_min, im_max].

    `groups` is a list of (label, css_color, polylines) with each polyline a
    (k, 2) array of (re, im) vertices.  Axes, tick labels, and a legend are
    included; an empty group list yields axes only.
    """
    re_min, re_max, im_min, im_max = (float(v) for v in rect)
    ml, mr, mt, mb = 55, 15, 30, 45
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + (x - re_min) / (re_max - re_min) * pw

    def sy(y):
        return mt + (im_max - y) / (im_max - im_min) * ph

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
               f'viewBox="0 0 {width} {height}">')
    out.append(f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>')
    if title:
        out.append(f'<text x="{_fmt(width / 2)}" y="20" font-family="monospace" font-size="13" '
                   f'text-anchor="middle">{title}</text>')

    # zero axes (dashed) when inside the window
    if re_min < 0.0 < re_max:
        out.append(f'<line x1="{_fmt(sx(0))}" y1="{_fmt(mt)}" x2="{_fmt(sx(0))}" '
                   f'y2="{_fmt(mt + ph)}" stroke="#bbbbbb" stroke-dasharray="4,3"/>')
    if im_min < 0.0 < im_max:
        out.append(f'<line x1="{_fmt(ml)}" y1="{_fmt(sy(0))}" x2="{_fmt(ml + pw)}" '
                   f'y2="{_fmt(sy(0))}" stroke="#bbbbbb" stroke-dasharray="4,3"/>')

    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#000000"/>')
    for tx in _tick_positions(re_min, re_max):
        out.append(f'<line x1="{_fmt(sx(tx))}" y1="{_fmt(mt + ph)}" x2="{_fmt(sx(tx))}" '
                   f'y2="{_fmt(mt + ph + 5)}" stroke="#000000"/>')
        out.append(f'<text x="{_fmt(sx(tx))}" y="{_fmt(mt + ph + 18)}" font-family="monospace" '
                   f'font-size="11" text-anchor="middle">{tx:g}</text>')
    for ty in _tick_positions(im_min, im_max):
        out.append(f'<line x1="{_fmt(ml - 5)}" y1="{_fmt(sy(ty))}" x2="{_fmt(ml)}" '
                   f'y2="{_fmt(sy(ty))}" stroke="#000000"/>')
        out.append(f'<text x="{_fmt(ml - 8)}" y="{_fmt(sy(ty) + 4)}" font-family="monospace" '
                   f'font-size="11" text-anchor="end">{ty:g}</text>')
    out.append(f'<text x="{_fmt(ml + pw / 2)}" y="{_fmt(height - 8)}" font-family="monospace" '
               f'font-size="12" text-anchor="middle">Re z</text>')
    out.append(f'<text x="14" y="{_fmt(mt + ph / 2)}" font-family="monospace" font-size="12" '
               f'text-anchor="middle" transform="rotate(-90 14 {_fmt(mt + ph / 2)})">Im z</text>')

    for label, color, polylines in groups:
        out.append(f'<g stroke="{color}" fill="none" stroke-width="1.5">')
        for line in polylines:
            pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in np.asarray(line))
            out.append(f'<polyline points="{pts}"/>')
        out.append("</g>")

    ly = mt + 16
    for label, color, _ in groups:
        out.append(f'<line x1="{_fmt(ml + 10)}" y1="{_fmt(ly - 4)}" x2="{_fmt(ml + 34)}" '
                   f'y2="{_fmt(ly - 4)}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{_fmt(ml + 40)}" y="{_fmt(ly)}" font-family="monospace" '
                   f'font-size="11">{label}</text>')
        ly += 16

    out.append("</svg>")
    return "\n".join(out) + "\n"
