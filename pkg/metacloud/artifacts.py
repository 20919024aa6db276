"""
Report and figure output: CSV tables, SVG scatter plots, binary cloud dumps.
All writers produce identical bytes for identical inputs.
"""
import csv
import logging
import math
import struct

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.colors import ListedColormap
import numpy as np

from .partitions import classify_points
from .utils import DomainError, UnsupportedError, as_points

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MAX_PLOT_POINTS = 50000
CLOUD_MAGIC = b"MCLOUD01"
REGION_COLORS = {'C': '#4c72b0', 'D': '#dd8452', 'O': '#eeeeee'}

matplotlib.rcParams['svg.hashsalt'] = 'metacloud'
matplotlib.rcParams['svg.fonttype'] = 'none'


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.10g" % v
    return str(v)


def write_csv(path, header, rows):
    """
    :param header: column names
    :param rows: iterable of tuples, written in the given order
    """
    count = 0
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise DomainError(f"row {row!r} does not match header {header}")
            writer.writerow([format_value(v) for v in row])
            count += 1
    logger.debug(f"wrote {path} ({count} rows)")
    return path


def emit_report(report, path):
    """Write any report exposing HEADER and rows()."""
    return write_csv(path, report.HEADER, report.rows())


def subsample(points, seed, max_points=MAX_PLOT_POINTS):
    """Every ceil(n/max_points)-th row of a seed-shuffled index."""
    n = points.shape[0]
    if n <= max_points:
        return points
    stride = math.ceil(n / max_points)
    idx = np.random.default_rng(seed).permutation(n)[::stride]
    return points[idx]


def _new_axes(title):
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.set_aspect('equal')
    ax.set_title(title, fontsize=10)
    ax.axhline(0.0, color='#999999', lw=0.4)
    ax.axvline(0.0, color='#999999', lw=0.4)
    return fig, ax


def _save(fig, path):
    fig.savefig(path, format='svg', bbox_inches='tight', metadata={'Date': None})
    plt.close(fig)
    logger.debug(f"wrote {path}")
    return path


def partition_lines(P, rings):
    """Polylines of the cube boundaries and division planes of the first rings (d=2)."""
    lines = []
    for n in range(1, min(rings, P.n_rings) + 1):
        s = math.exp(P.log_radii[n - 1])
        lines.append(np.array([[s, s], [-s, s], [-s, -s], [s, -s], [s, s]]))
        top = math.exp(P.log_radii[n])
        for v in np.exp(P.divisions[n - 1][:-1]):
            for sgn in (1.0, -1.0):
                lines.append(np.array([[sgn * v, s], [sgn * v, top]]))
                lines.append(np.array([[sgn * v, -s], [sgn * v, -top]]))
                lines.append(np.array([[s, sgn * v], [top, sgn * v]]))
                lines.append(np.array([[-s, sgn * v], [-top, sgn * v]]))
    return lines


def render_svg(points, path, overlays=(), title='', seed=0, max_points=MAX_PLOT_POINTS, limit=None):
    """
    Scatter of a d=2 cloud with overlay polylines, axis-equal.

    :param points: (n, 2), may be empty
    :param overlays: iterable of (k, 2) polylines
    :param limit: half-width of the plotted square, None for automatic
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        pts = np.empty((0, 2))
    elif pts.ndim != 2 or pts.shape[1] != 2:
        raise UnsupportedError("SVG scatter plots need d=2")
    fig, ax = _new_axes(title)
    shown = subsample(pts, seed, max_points)
    if shown.shape[0]:
        ax.scatter(shown[:, 0], shown[:, 1], s=0.5, c='#222222', linewidths=0, rasterized=False)
    for line in overlays:
        line = np.asarray(line, dtype=float)
        ax.plot(line[:, 0], line[:, 1], color='#c44e52', lw=0.8)
    if limit is not None:
        ax.set_xlim(-limit, limit)
        ax.set_ylim(-limit, limit)
    return _save(fig, path)


def render_regions(P, path, rings=8, resolution=401, title=''):
    """C/D/O region map of a d=2 partition over its first rings."""
    if P.d != 2:
        raise UnsupportedError("region maps need d=2")
    rings = min(rings, P.n_rings)
    top = math.exp(P.log_radii[rings])
    axis = np.linspace(-top, top, resolution)
    xx, yy = np.meshgrid(axis, axis)
    labels = classify_points(P, np.column_stack([xx.ravel(), yy.ravel()]))
    codes = np.array([{'C': 0, 'D': 1}.get(lb[0], 2) for lb in labels], dtype=float).reshape(xx.shape)
    cmap = ListedColormap([REGION_COLORS['C'], REGION_COLORS['D'], REGION_COLORS['O']])
    fig, ax = _new_axes(title)
    ax.imshow(codes, origin='lower', extent=(-top, top, -top, top), cmap=cmap, vmin=0, vmax=2,
              interpolation='nearest')
    for line in partition_lines(P, rings):
        ax.plot(line[:, 0], line[:, 1], color='#333333', lw=0.3)
    return _save(fig, path)


def dump_cloud(points, path):
    """16-byte header (magic, uint32 d, uint32 n, little-endian), then float64 rows."""
    pts = as_points(points)
    n, d = pts.shape
    with open(path, 'wb') as fh:
        fh.write(CLOUD_MAGIC + struct.pack('<II', d, n))
        fh.write(np.ascontiguousarray(pts, dtype='<f8').tobytes())
    return path


def load_cloud(path):
    with open(path, 'rb') as fh:
        head = fh.read(16)
        if len(head) != 16 or head[:8] != CLOUD_MAGIC:
            raise DomainError(f"{path}: not a metacloud cloud dump")
        d, n = struct.unpack('<II', head[8:])
        data = np.frombuffer(fh.read(), dtype='<f8')
    if data.size != n * d:
        raise DomainError(f"{path}: expected {n * d} values, found {data.size}")
    return data.reshape(n, d).astype(float)
