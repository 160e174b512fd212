"""Deterministic SVG scatter of a fitted latent space.

One circle per node: position from the aligned posterior means, radius a
monotone map of degree (or of the sociality effect when present), fill
color keyed by the hard cluster partition when one is available. The
output is plain text so golden-file comparisons work.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError

__all__ = ["render_layout_svg"]

_SIZE = 640.0
_MARGIN = 48.0
_R_MIN, _R_MAX = 4.0, 16.0

_PALETTE = (
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
    "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd", "#4f6228", "#77216f",
)


def _scale_coords(means):
    xy = np.asarray(means, dtype=np.float64)
    if xy.shape[1] == 1:
        xy = np.column_stack([xy[:, 0], np.zeros(xy.shape[0])])
    xy = xy[:, :2]
    lo = xy.min(axis=0)
    span = xy.max(axis=0) - lo
    span[span == 0.0] = 1.0
    unit = (xy - lo) / span
    pix = _MARGIN + unit * (_SIZE - 2.0 * _MARGIN)
    pix[:, 1] = _SIZE - pix[:, 1]  # latent y axis points up
    return pix


def _scale_radii(values):
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full(v.shape, 0.5 * (_R_MIN + _R_MAX))
    return _R_MIN + (v - lo) / (hi - lo) * (_R_MAX - _R_MIN)


def render_layout_svg(means, degrees, sociality=None, clusters=None,
                      seed=0, config_hash=""):
    """Render the layout as an SVG string (one <circle> per node)."""
    means = np.asarray(means, dtype=np.float64)
    if means.ndim != 2 or means.shape[0] < 1:
        raise DataError("means must be a nonempty (n, d) array")
    n = means.shape[0]
    coords = _scale_coords(means)
    radius_source = sociality if sociality is not None else np.asarray(degrees)
    if radius_source is None or len(radius_source) != n:
        raise DataError("radius source column missing or wrong length")
    radii = _scale_radii(radius_source)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- seed={seed} config_sha256={config_hash} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE:.0f}" '
        f'height="{_SIZE:.0f}" viewBox="0 0 {_SIZE:.0f} {_SIZE:.0f}">',
        f'<rect width="{_SIZE:.0f}" height="{_SIZE:.0f}" fill="white"/>',
    ]
    for i in range(n):
        if clusters is not None and clusters[i] >= 0:
            fill = _PALETTE[int(clusters[i]) % len(_PALETTE)]
        else:
            fill = _PALETTE[0]
        lines.append(
            f'<circle cx="{coords[i, 0]:.3f}" cy="{coords[i, 1]:.3f}" '
            f'r="{radii[i]:.3f}" fill="{fill}" fill-opacity="0.85" '
            f'stroke="#333333" stroke-width="0.6"><title>node {i}</title></circle>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
