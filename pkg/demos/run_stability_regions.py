#!/usr/bin/env python3
"""Map the probabilistic stability regions of the randomized implicit pair.

The mean-square region (gain E|1 + z/(1-z*tau)|^2 below 1) is a bounded open
subset of the left half-plane whose real-axis section is (-x0, 0); the
almost-sure region (log-gain below 0) is the entire left half-plane.  This
script computes x0, rasterizes both functionals, writes the boundary
contours as CSV + SVG, and renders a matplotlib figure when available.
"""

import os

import numpy as np

from randrk import (classify_point, contour_extract, find_ms_interval_endpoint,
                    ms_interval_gap, scan_region)
from randrk.svgplot import svg_document

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)
WINDOW = (-6.0, 1.0, -4.0, 4.0)

x0 = find_ms_interval_endpoint()
print(f"real-axis mean-square interval: (-{x0:.12f}, 0)")
print(f"  gap at the endpoint: {ms_interval_gap(-x0):+.2e}")

print("\nsample points:")
for z in (-1 + 0j, -3 + 1j, -5 + 0j, 0.5 + 0.5j):
    v = classify_point(z)
    print(f"  z = {z}: ms gain {v.ms_value:8.4f} (stable: {v.in_ms}),  "
          f"log-gain {v.as_value:+8.4f} (stable: {v.in_as_sp})")

print("\nscanning 701 x 801 lattice over [-6,1] x [-4,4] ...")
ms_grid = scan_region(WINDOW, 701, 801, "ms")
as_grid = scan_region(WINDOW, 701, 801, "as")
ms_lines = contour_extract(ms_grid, 1.0)
as_lines = contour_extract(as_grid, 0.0)
print(f"  mean-square boundary: {len(ms_lines)} polyline(s), "
      f"{sum(len(l) for l in ms_lines)} vertices")
print(f"  log-gain boundary:    {len(as_lines)} polyline(s) hugging the imaginary axis")

svg_path = os.path.join(OUT, "stability_regions.svg")
doc = svg_document([("mean-square gain = 1", "#1f4e9c", ms_lines),
                    ("log-gain = 0", "#999999", as_lines)], WINDOW,
                   title="stability region boundaries, z = lam*h")
with open(svg_path, "w") as fh:
    fh.write(doc)
print(f"wrote {svg_path}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the filled-region figure")
else:
    fig, ax = plt.subplots(figsize=(7, 6))
    re, im = ms_grid.re_axis, ms_grid.im_axis
    ax.contourf(re, im, ms_grid.values.T, levels=[0.0, 1.0], colors=["#9fb8e0"])
    for line in ms_lines:
        ax.plot(line[:, 0], line[:, 1], color="#1f4e9c", lw=1.5,
                label="mean-square boundary")
    ax.axvline(0.0, color="#777777", lw=1.5, label="almost-sure boundary (Re z = 0)")
    ax.plot([-x0], [0.0], "ko", ms=5)
    ax.annotate(f"-x0 = {-x0:.3f}", (-x0, 0.1))
    ax.set_xlabel("Re z")
    ax.set_ylabel("Im z")
    ax.grid(True, alpha=0.3)
    handles, labels = ax.get_legend_handles_labels()
    uniq = dict(zip(labels, handles))
    ax.legend(uniq.values(), uniq.keys(), loc="upper left")
    png = os.path.join(OUT, "stability_regions.png")
    fig.savefig(png, dpi=130, bbox_inches="tight")
    print(f"wrote {png}")
