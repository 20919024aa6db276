"""
Modified samplers that keep the marginal tails of a base model but move its
sample-cloud limit: axis-block deletion, diagonal concentration and mixing
with a light component.  All models expose `d`, `space`, `name` and
`sample(n, rng)`; z-space models also expose `density_at` where it is defined.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .partitions import locate, prs4_sequence
from .star_sets import unit_directions
from .utils import LOG_HALF, DomainError, SamplerError, as_points, chunked_draw

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MASS_DRAWS = 200000
MASS_SEED = 20240


class DiagonalLaw:
    """
    Image of F0 on the diagonals: |T| delta with T ~ F0.
    orthants='main' puts mass on +-e only, 'all' spreads it over every delta in {-1, 1}^d.
    """
    space = 'z'

    def __init__(self, marginal, d=2, orthants='main'):
        if orthants not in ('main', 'all'):
            raise DomainError(f"orthants must be 'main' or 'all', got '{orthants}'")
        self.marginal = marginal
        self.d = int(d)
        self.orthants = orthants
        self.name = f"diagonal-{orthants}"

    def __repr__(self):
        return f"DiagonalLaw({self.marginal!r}, d={self.d}, orthants='{self.orthants}')"

    def radii(self, n, rng, log_floor=None):
        """|T|, optionally conditioned on |T| >= exp(log_floor)."""
        u = rng.random(n)
        u = np.where(u == 0.0, np.finfo(float).tiny, u)
        top = 0.0 if log_floor is None else float(self.marginal.log_tail_from_log(log_floor)) - LOG_HALF
        return self.marginal.tail_quantile(np.log(u) + top + LOG_HALF)

    def signs(self, n, rng):
        if self.orthants == 'main':
            s = rng.choice([-1.0, 1.0], size=n)
            return np.repeat(s[:, None], self.d, axis=1)
        return rng.choice([-1.0, 1.0], size=(n, self.d))

    def sample(self, n, rng, log_floor=None):
        r = self.radii(n, rng, log_floor)
        return r[:, None] * self.signs(n, rng)

    def sample_halfplane(self, t, n, rng, axis=-1):
        """Exact draws conditioned on {z[axis] >= t}, t > 0."""
        if not t > 0:
            raise DomainError(f"halfplane level must be positive, got {t}")
        pts = self.sample(n, rng, log_floor=math.log(t))
        return pts * np.sign(pts[:, [axis]])


class MetaModel:
    """
    x-space model X = K^-1(Z) for a z-space sampler and a MetaMap.
    """
    space = 'x'

    def __init__(self, model, meta):
        self.model = model
        self.meta = meta
        self.d = model.d
        self.name = f"meta({model.name})"

    def __repr__(self):
        return f"MetaModel({self.model!r}, {self.meta!r})"

    def sample(self, n, rng):
        return self.meta.push(self.model.sample(n, rng), 'inverse')

    def sample_z(self, n, rng):
        return self.model.sample(n, rng)

    def sample_halfplane(self, s, n, rng, axis=-1):
        """x draws conditioned on {x[axis] >= s}, i.e. {z[axis] >= K0(s)}."""
        t = float(self.meta.forward(s))
        return self.meta.push(self.model.sample_halfplane(t, n, rng, axis=axis), 'inverse')


class ThinnedModel:
    """
    Base law with the mass of every block that meets a coordinate hyperplane
    deleted, ring by ring, and moved into the central block s_1 C by
    conditional resampling.  Points beyond the partition window are kept.
    """
    space = 'z'

    def __init__(self, base, partition, min_acceptance=1e-3):
        if partition.d != base.d:
            raise DomainError(f"partition has d={partition.d}, model has d={base.d}")
        self.base = base
        self.partition = partition
        self.d = base.d
        self.min_acceptance = min_acceptance
        self.name = f"thinned({base.name})"
        self._boost = None

    def __repr__(self):
        return f"ThinnedModel({self.base!r}, rings={self.partition.n_rings})"

    def deleted(self, points):
        ids = locate(self.partition, points)
        return (ids[:, 0] >= 1) & np.any(ids[:, 1:self.d + 1] == 0, axis=1)

    def central(self, points):
        return locate(self.partition, points)[:, 0] == 0

    def _central_draws(self, k, rng):
        out = []
        have = drawn = 0
        while have < k:
            m = max(4 * (k - have), 1024)
            pts = self.base.sample(m, rng)
            keep = pts[self.central(pts)]
            drawn += m
            have += keep.shape[0]
            out.append(keep)
            if drawn >= 10000 and have / drawn < self.min_acceptance:
                raise SamplerError(f"central block acceptance {have / drawn:.2e} below {self.min_acceptance:g}")
        return np.concatenate(out, axis=0)[:k]

    def sample(self, n, rng):
        pts = self.base.sample(n, rng)
        gone = self.deleted(pts)
        k = int(np.count_nonzero(gone))
        if k:
            pts[gone] = self._central_draws(k, rng)
        return pts

    @property
    def boost(self):
        """Density factor c > 1 on the central block."""
        if self._boost is None:
            rng = np.random.default_rng(MASS_SEED)
            pts = self.base.sample(MASS_DRAWS, rng)
            p_del = float(np.mean(self.deleted(pts)))
            p_cen = float(np.mean(self.central(pts)))
            if p_cen < self.min_acceptance:
                raise SamplerError(f"central block mass {p_cen:.2e} below {self.min_acceptance:g}")
            self._boost = 1.0 + p_del / p_cen
        return self._boost

    def density_at(self, x):
        pts = as_points(x, self.d)
        f = np.atleast_1d(self.base.density_at(pts))
        factor = np.where(self.deleted(pts), 0.0, np.where(self.central(pts), self.boost, 1.0))
        out = f * factor
        return float(out[0]) if np.ndim(x) == 1 else out


def delete_axis_blocks(base, partition):
    return ThinnedModel(base, partition)


class DiagonalConcentratedModel:
    """
    f off U, the diagonal law on U, where U is the union over n > first of the
    cubes [t_{n-1}, t_{n+1}]^d reflected into every orthant and log t_n comes
    from prs4_sequence.  The mass balance is restored on B0 = [-t_first, t_first]^d.
    """
    space = 'z'

    def __init__(self, base, diagonal, epsilon=0.5, window=400, first=2):
        if diagonal.d != base.d:
            raise DomainError("diagonal law and base differ in dimension")
        if not 1 <= first < window - 2:
            raise DomainError(f"first cube index {first} outside the window 1..{window - 3}")
        self.base = base
        self.diagonal = diagonal
        self.d = base.d
        self.sequence = prs4_sequence(epsilon, window)
        self.log_t = np.asarray(self.sequence.log_t)
        self.first = int(first)
        self.log_b0 = float(self.log_t[first - 1])
        self.name = f"concentrated({base.name})"
        # f-hat(U) = P(|T| >= t_first)
        self.mass_diag = math.exp(float(diagonal.marginal.log_tail_from_log(self.log_b0)) - LOG_HALF)
        rng = np.random.default_rng(MASS_SEED)
        pts = base.sample(MASS_DRAWS, rng)
        in_u = self.in_u(pts)
        in_b0 = self.in_b0(pts)
        f_b0 = float(np.mean(in_b0))
        f_rest = float(np.mean(~in_u & ~in_b0))
        c0 = (1.0 - self.mass_diag - f_rest) / f_b0
        if c0 < 0:
            raise DomainError(f"diagonal mass {self.mass_diag:.4g} exceeds what B0 can give back (c0={c0:.4g})")
        self.c0 = c0
        self.ceiling = max(1.0, c0)
        logger.debug(f"{self.name}: f-hat(U)={self.mass_diag:.4g}, f(B0)={f_b0:.4g}, c0={c0:.4g}")

    def __repr__(self):
        return f"DiagonalConcentratedModel({self.base!r}, {self.diagonal!r}, first={self.first})"

    def _position(self, points):
        pts = as_points(points, self.d)
        with np.errstate(divide='ignore'):
            la = np.log(np.abs(pts))
        k = np.searchsorted(self.log_t, la.min(axis=1), side='right') - 1
        return k, la.max(axis=1)

    def in_u(self, points):
        k, hi = self._position(points)
        top = k + 2
        inside = (k >= self.first - 1) & (top < self.log_t.size)
        bound = self.log_t[np.clip(top, 0, self.log_t.size - 1)]
        return inside & (hi <= bound)

    def beyond_window(self, points):
        k, _ = self._position(points)
        return k + 2 >= self.log_t.size

    def in_b0(self, points):
        pts = as_points(points, self.d)
        return np.max(np.abs(pts), axis=1) <= math.exp(self.log_b0)

    def _rest(self, k, rng):
        if k == 0:
            return np.empty((0, self.d))
        out = []
        have = drawn = 0
        while have < k:
            m = max(int(1.5 * (k - have) * self.ceiling), 1024)
            pts = self.base.sample(m, rng)
            far = self.beyond_window(pts)
            if np.any(far):
                logger.warning(f"{int(far.sum())} draws beyond the ring window; resampled from the base")
                pts = pts[~far]
            accept = np.where(self.in_u(pts), 0.0, np.where(self.in_b0(pts), self.c0, 1.0)) / self.ceiling
            keep = pts[rng.random(pts.shape[0]) < accept]
            drawn += m
            have += keep.shape[0]
            out.append(keep)
            if drawn >= 10000 and have / drawn < 1e-3:
                raise SamplerError(f"acceptance {have / drawn:.2e} off the diagonal cubes")
        return np.concatenate(out, axis=0)[:k]

    def sample(self, n, rng):
        on_diag = rng.random(n) < self.mass_diag
        k = int(on_diag.sum())
        pts = np.empty((n, self.d))
        pts[on_diag] = self.diagonal.sample(k, rng, log_floor=self.log_b0)
        pts[~on_diag] = self._rest(n - k, rng)
        return pts


def concentrate_diagonal(base, diagonal, epsilon=0.5, window=400, first=2):
    return DiagonalConcentratedModel(base, diagonal, epsilon=epsilon, window=window, first=first)


class LightMixtureModel:
    """
    x-space mixture: with probability `weight` a draw from g_*(n_A)/c_A, else a
    draw from the base meta model.  `sample_z` is the K-image.
    """
    space = 'x'

    def __init__(self, base_meta, component, weight):
        if not 0 < weight < 1:
            raise DomainError(f"mixture weight must lie in (0, 1), got {weight}")
        check_inside_cube(component.shape)
        self.base = base_meta
        self.component = component
        self.weight = float(weight)
        self.meta = base_meta.meta
        self.d = base_meta.d
        self.name = f"mix({base_meta.name}, {component.name}, w={weight:g})"

    def __repr__(self):
        return f"LightMixtureModel({self.base!r}, {self.component!r}, weight={self.weight:g})"

    def sample(self, n, rng):
        k = int(rng.binomial(n, self.weight))
        pts = np.concatenate([self.component.sample(k, rng), self.base.sample(n - k, rng)], axis=0)
        rng.shuffle(pts, axis=0)
        return pts

    def sample_z(self, n, rng):
        return self.meta.push(self.sample(n, rng), 'forward')


class ZView:
    """The z-space image of a mixture, as a sampler."""
    space = 'z'

    def __init__(self, model):
        self.model = model
        self.d = model.d
        self.name = f"z({model.name})"

    def sample(self, n, rng):
        return self.model.sample_z(n, rng)


def check_inside_cube(A, k=2048):
    dirs = unit_directions(A.d, k)
    pts = A.boundary_point(dirs)
    worst = float(np.max(np.abs(pts)))
    if worst > 1.0 + 1e-9:
        raise DomainError(f"set {A!r} leaves the cube [-1, 1]^{A.d} (reaches {worst:.6g})")


def mix_with_light(base_meta, component, weight):
    """
    :param base_meta: MetaModel
    :param component: HomotheticDensity g_*(n_A) with A inside [-1, 1]^d
    :param weight: mixture probability of the component
    """
    return LightMixtureModel(base_meta, component, weight)


@dataclass(frozen=True)
class TailRatioRow:
    axis: int
    level: float
    threshold: float
    count: int
    ratio: float
    stderr: float
    sparse: bool


def marginal_tail_ratio_check(model, reference, levels, n=None, seed=0, points=None, threads=None):
    """
    (1 - F_j)(q_ref(level)) / (1 - level) per coordinate with binomial standard errors.

    :param model: sampler, or None when `points` are given
    :param reference: MarginalModel
    :param levels: iterable of levels in (0, 1)
    :return: list of TailRatioRow
    """
    if points is None:
        points = chunked_draw(model.sample, n, seed, threads=threads)
    pts = as_points(points)
    m = pts.shape[0]
    rows = []
    for level in levels:
        if not 0 < level < 1:
            raise DomainError(f"level must lie in (0, 1), got {level}")
        q = 1.0 - level
        t = float(reference.tail_quantile(math.log(q)))
        for j in range(pts.shape[1]):
            k = int(np.count_nonzero(pts[:, j] > t))
            p = k / m
            se = math.sqrt(max(p * (1.0 - p), 1.0 / m) / m) / q
            sparse = k < 100
            if sparse:
                logger.warning(f"only {k} samples beyond the {level:g} level on axis {j}; interval widened")
                se *= 2.0
            rows.append(TailRatioRow(j, float(level), t, k, p / q, se, sparse))
    return rows


def lighter_marginal_check(component, reference, levels, n=200000, seed=0):
    """
    Tail ratios of the component's marginal against the reference; a lighter
    marginal gives ratios that fall toward 0 as the level rises.
    :return: (rows, decreasing flag)
    """
    rows = [r for r in marginal_tail_ratio_check(component, reference, levels, n=n, seed=seed) if r.axis == 0]
    ratios = np.array([r.ratio for r in rows])
    decreasing = bool(np.all(np.diff(ratios) <= 0) and ratios[-1] < 1.0)
    return rows, decreasing


def vertex_persistence(model, n, seeds, scale, radius=0.15, threads=None):
    """
    Fraction of seeds whose scaled cloud puts a point within `radius` of the
    vertex e = (1, ..., 1).
    """
    e = np.ones(model.d)
    hits = 0
    for seed in seeds:
        pts = chunked_draw(model.sample, n, seed, threads=threads) / scale
        if np.any(np.linalg.norm(pts - e, axis=1) <= radius):
            hits += 1
    return hits / len(seeds)


@dataclass(frozen=True)
class DualityReport:
    ns: tuple
    z_ratio: tuple
    x_ratio: tuple
    z_decreasing: bool
    x_increasing: bool


def duality_report(Pz, Px, window=None):
    """
    Relative width of the deleted strips: t_{n1}/t_n shrinks in z-space while
    s_{n1}/s_n grows toward 1 in x-space.  Trends are judged over the second
    half of the window; the z ratio still rises over the first rings.
    """
    first, last = window or (1, min(Pz.n_rings, Px.n_rings))
    ns = np.arange(first, last + 1)
    z = np.array([math.exp(Pz.divisions[n - 1][0] - Pz.log_radii[n - 1]) for n in ns])
    x = np.array([math.exp(Px.divisions[n - 1][0] - Px.log_radii[n - 1]) for n in ns])
    half = len(ns) // 2
    return DualityReport(tuple(int(n) for n in ns), tuple(z), tuple(x),
                         bool(np.all(np.diff(z[half:]) <= 0)), bool(np.all(np.diff(x[half:]) >= 0)))
