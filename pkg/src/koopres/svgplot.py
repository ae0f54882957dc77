"""Standalone SVG rendering of spectra and pseudospectra.

No plotting dependency: the emitters write a fixed-size canvas with the
unit circle overlaid.  Spectrum points are colored by residual;
pseudospectrum cells are shaded monotonically in tau (darker = smaller).
"""

from __future__ import annotations

import numpy as np

CANVAS = 640
MARGIN = 60
LOG_FLOOR = 1e-16


class _Frame:
    """Affine map from complex-plane coordinates to SVG pixels."""

    def __init__(self, half_width):
        self.scale = (CANVAS - 2 * MARGIN) / (2.0 * half_width)
        self.cx = CANVAS / 2.0
        self.cy = CANVAS / 2.0

    def x(self, re):
        return self.cx + self.scale * re

    def y(self, im):
        # SVG y grows downward
        return self.cy - self.scale * im


def _shade(t):
    """Grayscale fill, t in [0, 1]; t = 0 is black."""
    level = int(round(255 * min(1.0, max(0.0, t))))
    return f"rgb({level},{level},{level})"


def _residual_color(t):
    """Dark blue (small residual) to amber (large)."""
    t = min(1.0, max(0.0, t))
    lo = (26, 35, 126)
    hi = (255, 143, 0)
    rgb = tuple(int(round(a + t * (b - a))) for a, b in zip(lo, hi))
    return f"rgb({rgb[0]},{rgb[1]},{rgb[2]})"


def _log_normalize(values):
    vals = np.log10(np.asarray(values, dtype=float) + LOG_FLOOR)
    lo, hi = vals.min(), vals.max()
    if hi - lo < 1e-12:
        return np.full(vals.shape, 0.5)
    return (vals - lo) / (hi - lo)


def _header(parts):
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}">'
    )
    parts.append(f'<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>')


def _axes_and_circle(parts, frame):
    x0, y0 = frame.x(0.0), frame.y(0.0)
    parts.append(
        f'<line x1="0" y1="{y0:.6g}" x2="{CANVAS}" y2="{y0:.6g}" stroke="#cccccc" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{x0:.6g}" y1="0" x2="{x0:.6g}" y2="{CANVAS}" stroke="#cccccc" stroke-width="1"/>'
    )
    parts.append(
        f'<circle class="unit-circle" cx="{frame.x(0.0)!r}" cy="{frame.y(0.0)!r}" r="{frame.scale!r}" '
        f'fill="none" stroke="black" stroke-dasharray="6,4" stroke-width="1.5"/>'
    )


def render_spectrum_svg(path, eigenvalues, residuals=None):
    """Eigenvalues against the unit circle, points colored by residual."""
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    if residuals is None:
        residuals = np.full(eigenvalues.shape, np.nan)
    residuals = np.asarray(residuals, dtype=float)
    extent = 1.15
    if eigenvalues.size:
        extent = max(extent, float(np.max(np.abs(eigenvalues.real))) * 1.05,
                     float(np.max(np.abs(eigenvalues.imag))) * 1.05)
    frame = _Frame(extent)
    parts = []
    _header(parts)
    _axes_and_circle(parts, frame)
    finite = np.isfinite(residuals)
    t = np.full(residuals.shape, np.nan)
    if finite.any():
        t[finite] = _log_normalize(residuals[finite])
    for lam, ti in zip(eigenvalues, t):
        color = _residual_color(ti) if np.isfinite(ti) else "#546e7a"
        parts.append(
            f'<circle class="eig" cx="{frame.x(lam.real)!r}" cy="{frame.y(lam.imag)!r}" '
            f'r="4" fill="{color}" fill-opacity="0.85"/>'
        )
    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def render_pseudospectrum_svg(path, grid):
    """Pseudospectrum heat map; shading monotone in tau, darker = smaller."""
    pts = np.asarray(grid.points, dtype=complex)
    tau = np.asarray(grid.tau, dtype=float)
    if pts.size == 0:
        raise ValueError("empty pseudospectrum grid")
    extent = max(
        1.15,
        float(np.max(np.abs(pts.real))) * 1.05,
        float(np.max(np.abs(pts.imag))) * 1.05,
    )
    frame = _Frame(extent)
    re_vals = np.unique(pts.real)
    im_vals = np.unique(pts.imag)
    dre = np.min(np.diff(re_vals)) if re_vals.size > 1 else 0.1
    dim = np.min(np.diff(im_vals)) if im_vals.size > 1 else 0.1
    w = max(1.0, frame.scale * dre)
    h = max(1.0, frame.scale * dim)
    t = _log_normalize(tau)
    parts = []
    _header(parts)
    for z, ti, tv in zip(pts, t, tau):
        parts.append(
            f'<rect class="tau" x="{frame.x(z.real) - w / 2:.6g}" y="{frame.y(z.imag) - h / 2:.6g}" '
            f'width="{w:.6g}" height="{h:.6g}" fill="{_shade(ti)}" data-tau="{tv:.6g}"/>'
        )
    _axes_and_circle(parts, frame)
    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
