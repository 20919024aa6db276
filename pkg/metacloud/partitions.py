"""
Block partitions of R^d into cube rings.

Ring n (n >= 1) is the set s_{n+1}C minus s_nC, C = [-1, 1]^d.  It is cut by the
hyperplanes x_i = +-s_{nj}, j = 1..m_n, with s_{n m_n} = s_n, so along each
coordinate a point falls in cell 0 (|x_i| <= s_{n1}), cell k (s_{nk} < |x_i| <= s_{n,k+1})
or the outer cell m_n (s_n < |x_i| <= s_{n+1}).  Ring 0 is the central cube s_1C.
All radii and division points are stored as logs.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .utils import LOG_HALF, DomainError, NumericError, UnsupportedError, as_points

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

HEADER = "# metacloud partition v1 d={d} space={space}"
COMPASS = {(1, 0): 'C_E', (-1, 0): 'C_W', (0, 1): 'C_N', (0, -1): 'C_S'}
DIAGONALS = {(1, 1): 'D_NE', (1, -1): 'D_SE', (-1, -1): 'D_SW', (-1, 1): 'D_NW'}
LABELS = ('C_E', 'C_N', 'C_W', 'C_S', 'D_NE', 'D_SE', 'D_SW', 'D_NW', 'O')


class BlockPartition:
    """
    :param d: dimension
    :param space: 'x' (light side) or 'z' (heavy side)
    :param log_radii: log s_1 < ... < log s_N
    :param divisions: list of N-1 arrays, divisions[n-1] = log s_{n1} < ... < log s_{n m_n} = log s_n
    :param strips: None, or N-1 arrays of log division points inside the central cell of ring n
    """

    def __init__(self, d, space, log_radii, divisions, strips=None, rule='custom', levels=None, n0=10):
        self.d = int(d)
        if space not in ('x', 'z'):
            raise DomainError(f"space must be 'x' or 'z', got '{space}'")
        self.space = space
        self.log_radii = np.asarray(log_radii, dtype=float)
        self.divisions = [np.asarray(v, dtype=float) for v in divisions]
        self.strips = None if strips is None else [np.asarray(v, dtype=float) for v in strips]
        self.rule = rule
        self.levels = levels
        self.n0 = int(n0)
        self._validate()

    def __repr__(self):
        refined = ", refined" if self.strips is not None else ""
        return f"BlockPartition(d={self.d}, space='{self.space}', rings={self.n_rings}, rule='{self.rule}'{refined})"

    def _validate(self):
        r = self.log_radii
        if r.ndim != 1 or r.size < 2:
            raise DomainError("a partition needs at least two cube radii")
        if np.any(~np.isfinite(r)):
            raise NumericError("partition radius outside the representable log range")
        if np.any(np.diff(r) <= 0):
            raise DomainError("cube radii must be strictly increasing")
        if len(self.divisions) != r.size - 1:
            raise DomainError(f"need {r.size - 1} division lists, got {len(self.divisions)}")
        for n, div in enumerate(self.divisions, start=1):
            if div.size == 0 or np.any(np.diff(div) <= 0):
                raise DomainError(f"ring {n}: division points must be strictly increasing")
            if not math.isclose(div[-1], r[n - 1], rel_tol=1e-12, abs_tol=1e-12):
                raise DomainError(f"ring {n}: last division point must equal the inner radius")
        if self.strips is not None and len(self.strips) != len(self.divisions):
            raise DomainError("strip list does not match the rings")

    @property
    def n_rings(self):
        return len(self.divisions)

    def ring_divisions(self, n):
        return self.divisions[n - 1]

    def j_n(self, n):
        return math.isqrt(n)


def build_quantile_partition(marginal, N, d=2, space=None):
    """
    Quantile partition: m_n = n, p_n = e^-sqrt(n), 1 - F(s_nj) = n p_n / j.
    Levels at or above 1/2 have no positive quantile and are dropped.

    :param marginal: HeavyMarginal (z side) or LightMarginal (x side)
    :param N: number of cube radii, >= 2
    :return: BlockPartition
    """
    if N < 2:
        raise DomainError(f"need N >= 2, got {N}")
    space = space or ('z' if marginal.is_heavy else 'x')
    ns = np.arange(1, N + 1, dtype=float)
    log_radii = np.asarray(marginal.log_tail_quantile(-np.sqrt(ns)), dtype=float)
    divisions = []
    levels = []
    for n in range(1, N):
        j = np.arange(1, n + 1, dtype=float)
        lv = math.log(n) - math.sqrt(n) - np.log(j)
        lv = lv[lv < LOG_HALF]
        divisions.append(np.asarray(marginal.log_tail_quantile(lv), dtype=float))
        levels.append(lv)
    for n, div in enumerate(divisions, start=1):
        if np.any(~np.isfinite(div)):
            raise NumericError(f"ring {n}: quantile of level {levels[n - 1][0]:.4g} is not finite")
    P = BlockPartition(d, space, log_radii, divisions, rule='quantile', levels=levels)
    logger.debug(f"quantile partition {space}: {N} radii, log s_N={log_radii[-1]:.6g}")
    return P


def with_dimension(P, d):
    """Same radii and divisions, used in d dimensions."""
    return BlockPartition(d, P.space, P.log_radii, P.divisions, P.strips, P.rule, P.levels, P.n0)


def cube_partition(log_radii, m_rule='uniform', d=2, space='x'):
    """
    Partition from a sequence of cube radii.
    m_rule 'uniform': m_n = n points k s_n / n; 'none': a single division at s_n.
    """
    log_radii = np.asarray(log_radii, dtype=float)
    divisions = []
    for n in range(1, log_radii.size):
        top = log_radii[n - 1]
        if m_rule == 'uniform':
            k = np.arange(1, n + 1, dtype=float)
            divisions.append(np.log(k / n) + top)
        elif m_rule == 'none':
            divisions.append(np.array([top]))
        else:
            raise DomainError(f"unknown m rule '{m_rule}'")
    return BlockPartition(d, space, log_radii, divisions, rule=f"cube-{m_rule}")


def fig1_log_radii(N):
    """log s_n for s_n = n^sqrt(n) log n, n = 2..N+1."""
    n = np.arange(2, N + 2, dtype=float)
    return np.sqrt(n) * np.log(n) + np.log(np.log(n))


def fig2_log_radii(N):
    """log s_n for s_n = sqrt(n), n = 1..N."""
    n = np.arange(1, N + 1, dtype=float)
    return 0.5 * np.log(n)


@dataclass(frozen=True)
class RegularityReport:
    space: str
    ns: tuple
    radius_ratio: tuple
    delta_rel: tuple
    verdict: str

    @property
    def regular(self):
        return self.verdict == 'regular-trending'


def _block_widths_rel(P, n):
    """Largest division increment of ring n relative to s_n."""
    div = np.exp(P.divisions[n - 1] - P.log_radii[n - 1])
    steps = np.diff(div) if div.size > 1 else np.zeros(1)
    if P.strips is not None:
        central = div[0] / n
    else:
        central = 2.0 * div[0]
    return float(max(central, float(np.max(steps))))


def regularity_report(P, window=None, tol=1e-12):
    """
    s_{n+1}/s_n and Delta_n/s_n over a window of rings, Delta_n the largest
    increment between division points.  Verdict 'regular-trending' when both
    sequences are non-increasing over the second half of the window.

    :param window: (first, last) ring indices, inclusive
    """
    first, last = window or (1, P.n_rings)
    if first < 1 or last > P.n_rings or first > last:
        raise DomainError(f"window {first}..{last} outside rings 1..{P.n_rings}")
    ns = np.arange(first, last + 1)
    with np.errstate(over='ignore'):
        ratio = np.exp(P.log_radii[ns] - P.log_radii[ns - 1])
    delta = np.array([_block_widths_rel(P, n) for n in ns])
    half = max(len(ns) // 2, 0)
    tail_ratio = ratio[half:]
    tail_delta = delta[half:]
    trending = (np.all(np.diff(tail_ratio) <= tol * tail_ratio[:-1])
                and np.all(np.diff(tail_delta) <= tol * np.maximum(tail_delta[:-1], 1.0)))
    verdict = 'regular-trending' if trending else 'non-regular'
    return RegularityReport(P.space, tuple(int(n) for n in ns), tuple(ratio), tuple(delta), verdict)


def biregular_refine(P):
    """
    Split the central cell of every axis block of ring n into 2n congruent cells
    with division points k s_{n1}/n, k = -(n-1)..(n-1).
    """
    if P.d != 2:
        raise UnsupportedError("biregular refinement is defined for d=2")
    strips = []
    for n, div in enumerate(P.divisions, start=1):
        k = np.arange(1, n, dtype=float)
        strips.append(np.log(k / n) + div[0])
    return BlockPartition(P.d, P.space, P.log_radii, P.divisions, strips, P.rule, P.levels, P.n0)


def image_under_k(P, M):
    """
    Map all radii, division points and strips by K0 (x -> z) or K0^-1 (z -> x).
    :param M: MetaMap
    """
    if P.space == 'x':
        def fn(lv):
            return M.forward_log(np.exp(lv))
        space = 'z'
    else:
        def fn(lv):
            with np.errstate(divide='ignore'):
                return np.log(M.inverse_log(lv))
        space = 'x'
    with np.errstate(over='ignore', invalid='ignore'):
        radii = fn(P.log_radii)
        divisions = [fn(v) for v in P.divisions]
        strips = None if P.strips is None else [fn(v) if v.size else v for v in P.strips]
    bad = ~np.isfinite(radii)
    if np.any(bad):
        raise NumericError(f"image of ring radius {int(np.argmax(bad)) + 1} leaves the representable log range")
    for n, v in enumerate(divisions, start=1):
        if np.any(~np.isfinite(v)):
            raise NumericError(f"image of a ring {n} division point leaves the representable log range")
    # the last division point is the inner radius by definition
    for n, v in enumerate(divisions, start=1):
        v[-1] = radii[n - 1]
    return BlockPartition(P.d, space, radii, divisions, strips, P.rule, P.levels, P.n0)


def locate(P, points):
    """
    Block ids of points: rows (ring, cell_1, ..., cell_d, sub).
    Cells are signed (0 for the central cell), sub is the signed strip index of
    the central coordinate in refined axis blocks, 0 otherwise.  Points on a
    division plane go to the lower-index block; ring -1 marks points beyond s_N.
    """
    pts = as_points(points, P.d)
    k = pts.shape[0]
    with np.errstate(divide='ignore'):
        la = np.log(np.abs(pts))
    top = la.max(axis=1)
    ring = np.searchsorted(P.log_radii, top, side='left')
    out = np.zeros((k, P.d + 2), dtype=np.int64)
    beyond = ring >= P.log_radii.size
    ring = np.where(beyond, -1, ring)
    out[:, 0] = ring
    order = np.argsort(ring, kind='stable')
    sorted_ring = ring[order]
    rings, starts = np.unique(sorted_ring, return_index=True)
    ends = np.append(starts[1:], k)
    sign = np.where(pts > 0, 1, -1)
    for r, a, b in zip(rings, starts, ends):
        if r <= 0:
            continue
        rows = order[a:b]
        div = P.divisions[r - 1]
        cells = np.searchsorted(div, la[rows], side='left')
        out[rows, 1:P.d + 1] = np.where(cells > 0, cells * sign[rows], 0)
        if P.strips is not None and P.d == 2:
            central = cells == 0
            axis = central.sum(axis=1) == 1
            if np.any(axis):
                sel = rows[axis]
                col = np.argmax(central[axis], axis=1)
                lc = la[sel, col]
                q = np.searchsorted(P.strips[r - 1], lc, side='left') + 1
                yc = pts[sel, col]
                out[sel, P.d + 1] = np.where(yc > 0, q, -q)
    return out


def locate_one(P, point):
    row = locate(P, point)[0]
    if row[0] < 0:
        return None
    return tuple(int(v) for v in row)


def classify_regions(P, ids=None):
    """
    Region labels for d=2 block ids.

    C: axis blocks (one coordinate in the central cell, the other in the outer
    cell) of rings n >= n0, by half-axis.  D: blocks of ring n with every cell
    index above j_n = floor(sqrt(n)), by quadrant.  O: everything else, including
    the central block.

    :param ids: block ids as returned by locate; None labels every block id of P's rings
    :return: list of labels aligned with ids
    """
    if P.d != 2:
        raise UnsupportedError("region classification is defined for d=2")
    ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
    labels = []
    for row in ids:
        labels.append(_label(P, row))
    return labels


def _label(P, row):
    n = int(row[0])
    if n <= 0:
        return 'O'
    c = row[1:3]
    m = P.divisions[n - 1].size
    outer = np.abs(c) == m
    if n >= P.n0 and np.count_nonzero(c == 0) == 1 and np.any(outer):
        key = tuple(int(np.sign(v)) if abs(v) == m else 0 for v in c)
        return COMPASS.get(key, 'O')
    # cell k lies above the division point j = k + (n - m) when low levels were dropped
    if np.all(c != 0) and np.all(np.abs(c) + (n - m) > P.j_n(n)):
        return DIAGONALS[(int(np.sign(c[0])), int(np.sign(c[1])))]
    return 'O'


def classify_points(P, points):
    return classify_regions(P, locate(P, points))


@dataclass(frozen=True)
class Prs4Sequence:
    epsilon: float
    ns: tuple
    log_t: tuple
    log_s: tuple

    def s_ratio(self):
        s = np.exp(np.asarray(self.log_s))
        return s[1:] / s[:-1]


def prs4_sequence(epsilon, N, meta=None, start=1):
    """
    log t_n = n^(n^(1-eps)) log n, i.e. log log t_n = n^(1-eps) log n + log log n; t_1 = 1.

    :param meta: MetaMap for s_n = K0^-1(t_n); None leaves log_s empty
    :param start: first n of the window
    """
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    ns = np.arange(start, N + 1, dtype=float)
    log_t = np.zeros_like(ns)
    big = ns >= 2
    nb = ns[big]
    loglog = nb ** (1.0 - epsilon) * np.log(nb) + np.log(np.log(nb))
    if np.any(loglog > 709.0):
        raise NumericError(f"log t_n overflows past n={int(nb[np.argmax(loglog > 709.0)]) - 1}; use a lower window")
    log_t[big] = np.exp(loglog)
    log_s = ()
    if meta is not None:
        with np.errstate(divide='ignore'):
            log_s = tuple(np.log(meta.inverse_log(log_t)))
    return Prs4Sequence(float(epsilon), tuple(int(n) for n in ns), tuple(log_t), log_s)


def d_region_edges(P):
    """
    Per ring n: (n, log s_n, log s_{n j_n}), the inner edge of the diagonal region.
    """
    rows = []
    for n, div in enumerate(P.divisions, start=1):
        j = P.j_n(n)
        # the division list may be shortened by dropped levels; count from the top
        idx = div.size - (n - j) - 1
        edge = div[idx] if 0 <= idx < div.size else div[0]
        rows.append((n, float(P.log_radii[n - 1]), float(edge)))
    return rows


def thinned_radii(log_t):
    """Figure thinning log of (ceil(sqrt n)/n) t_n, n = 1.."""
    log_t = np.asarray(log_t, dtype=float)
    n = np.arange(1, log_t.size + 1, dtype=float)
    return np.log(np.ceil(np.sqrt(n)) / n) + log_t


def block_masses(P, points):
    """
    :return: dict block id -> count, out-of-range points under ring -1
    """
    ids = locate(P, points)
    uniq, counts = np.unique(ids, axis=0, return_counts=True)
    return {tuple(int(v) for v in u): int(c) for u, c in zip(uniq, counts)}


def dump_partition(P, path):
    with open(path, 'w') as fh:
        fh.write(HEADER.format(d=P.d, space=P.space) + "\n")
        for n in range(1, P.log_radii.size + 1):
            fields = [str(n), repr(float(P.log_radii[n - 1]))]
            if n <= P.n_rings:
                fields += [repr(float(v)) for v in P.divisions[n - 1]]
            fh.write(" ".join(fields) + "\n")
        if P.strips is not None:
            for n, strip in enumerate(P.strips, start=1):
                fh.write(" ".join(["strip", str(n)] + [repr(float(v)) for v in strip]) + "\n")


def load_partition(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("# metacloud partition v1"):
        raise DomainError(f"{path}: not a metacloud partition file")
    meta = dict(tok.split("=", 1) for tok in lines[0].split()[4:])
    radii, divisions, strips = [], [], []
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == 'strip':
            strips.append(np.array([float(v) for v in parts[2:]]))
            continue
        radii.append(float(parts[1]))
        if len(parts) > 2:
            divisions.append(np.array([float(v) for v in parts[2:]]))
    return BlockPartition(int(meta['d']), meta['space'], radii, divisions, strips or None, rule='loaded')
