"""
Sample clouds and the diagnostics run on them.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats
from scipy.spatial import cKDTree

from .marginals import ScalingSchedule
from .star_sets import coverage_counts
from .utils import (CHUNK_SIZE, DomainError, InsufficientDataError, UnsupportedError, as_points,
                    chunked_draw)

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

EULER_GAMMA = float(np.euler_gamma)
DEFAULT_RADIAL_EDGES = (0.02, 0.05, 0.1, 0.2, 0.5, math.inf)


@dataclass(frozen=True)
class SampleCloud:
    points: np.ndarray = field(repr=False)
    scale: float
    model: str
    seed: int
    space: str

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]


def generate_cloud(model, n, scaling, seed, threads=None):
    """
    n iid draws divided by the scale at n.

    :param model: sampler with `sample(size, rng)`
    :param scaling: ScalingSchedule or a positive number
    :return: SampleCloud
    """
    scale = scaling.scale_at(n) if isinstance(scaling, ScalingSchedule) else float(scaling)
    if not scale > 0:
        raise DomainError(f"scale must be positive, got {scale}")
    pts = chunked_draw(model.sample, n, seed, threads=threads) / scale
    return SampleCloud(pts, scale, getattr(model, 'name', type(model).__name__), int(seed),
                       getattr(model, 'space', 'z'))


def _points(cloud):
    return cloud.points if isinstance(cloud, SampleCloud) else as_points(cloud)


@dataclass(frozen=True)
class OntoSetReport:
    HEADER = ("eps", "outside_frac", "min_coverage")
    target: str
    eps: tuple
    outside_frac: tuple
    coverage: tuple = field(repr=False)
    gate_eps: float
    max_outside: float

    @property
    def min_coverage(self):
        return tuple(int(np.min(c)) for c in self.coverage)

    def at(self, eps):
        i = self.eps.index(eps)
        return self.outside_frac[i], self.min_coverage[i]

    @property
    def passed(self):
        outside, cover = self.at(self.gate_eps)
        return outside <= self.max_outside and cover >= 1

    def rows(self):
        return [(e, o, c) for e, o, c in zip(self.eps, self.outside_frac, self.min_coverage)]


def onto_set_report(cloud, target, eps_grid, n_directions=64, gate_eps=0.15, max_outside=1e-3, interior=True):
    """
    Outside fraction and coverage of a target grid, per eps.

    :param target: SetTarget, CrossTarget or UnionTarget
    :param eps_grid: increasing eps values; gate_eps is added when missing
    :param interior: also cover the half-gauge points of positive-volume targets
    """
    pts = _points(cloud)
    eps = sorted(set(float(e) for e in eps_grid) | {float(gate_eps)})
    grid = target.grid(n_directions, interior)
    tree = cKDTree(pts) if pts.shape[0] else None
    outside, cover = [], []
    for e in eps:
        outside.append(float(np.mean(target.outside(pts, e))) if pts.shape[0] else 0.0)
        if tree is None:
            cover.append(np.zeros(grid.shape[0], dtype=np.int64))
        else:
            cover.append(coverage_counts(pts, grid, e, tree))
    return OntoSetReport(target.name, tuple(eps), tuple(outside), tuple(cover), float(gate_eps), float(max_outside))


@dataclass(frozen=True)
class IntensityReport:
    HEADER = ("bin_lo", "bin_hi", "sector", "observed", "expected", "chi2")
    bins: tuple
    statistic: float
    dof: int
    p_value: float

    @property
    def passed(self):
        return self.p_value > 0.01

    def rows(self):
        return list(self.bins)

    def sector_totals(self):
        obs, exp = {}, {}
        for lo, hi, sec, o, e, _ in self.bins:
            obs[sec] = obs.get(sec, 0) + o
            exp[sec] = exp.get(sec, 0.0) + e
        return obs, exp


def sector_mass(shape, lam, phi_lo, phi_hi):
    """Integral of n_D(omega)^-(lam+2) over an angular sector."""
    def fn(phi):
        return float(shape.gauge(np.array([math.cos(phi), math.sin(phi)]))) ** -(lam + 2.0)

    pts = [p for p in (k * math.pi / 4.0 for k in range(-8, 9)) if phi_lo < p < phi_hi]
    edges = [phi_lo] + pts + [phi_hi]
    return sum(integrate.quad(fn, a, b, epsabs=0.0, epsrel=1e-10, limit=200)[0] for a, b in zip(edges, edges[1:]))


def intensity_report(cloud, H, n, scale, radial_edges=DEFAULT_RADIAL_EDGES, sectors=8):
    """
    Binned counts of a heavy cloud against the Poisson limit with intensity
    n kappa c^-lam h(w): Euclidean annuli times angular sectors, radially merged
    until every expected count is at least 5.

    :param cloud: SampleCloud or points already divided by `scale`
    :param H: z-space HomotheticDensity of the model
    :param n: number of points that generated the cloud
    :param scale: the scaling constant used
    """
    if H.d != 2:
        raise UnsupportedError("intensity reports are binned in d=2")
    pts = _points(cloud)
    lam = H.generator.lam
    edges = [float(e) for e in radial_edges]
    if edges[0] <= 0 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise DomainError("radial edges must be positive and increasing")
    factor = n * H.tail_constant * scale ** -lam
    r = np.hypot(pts[:, 0], pts[:, 1])
    phi = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * math.pi)
    width = 2.0 * math.pi / sectors
    sec = np.minimum((phi // width).astype(np.int64), sectors - 1)
    rbin = np.searchsorted(edges, r, side='right') - 1
    valid = (rbin >= 0) & (rbin < len(edges) - 1)
    counts = np.zeros((sectors, len(edges) - 1), dtype=np.int64)
    np.add.at(counts, (sec[valid], rbin[valid]), 1)
    radial = np.array([(lo ** -lam - (0.0 if math.isinf(hi) else hi ** -lam)) / lam
                       for lo, hi in zip(edges, edges[1:])])
    bins = []
    merged = 0
    for s in range(sectors):
        ang = sector_mass(H.shape, lam, s * width, (s + 1) * width)
        expected = factor * ang * radial
        groups = []
        acc_o, acc_e, hi_edge = 0, 0.0, None
        for k in range(len(radial) - 1, -1, -1):
            if hi_edge is None:
                hi_edge = edges[k + 1]
            acc_o += int(counts[s, k])
            acc_e += float(expected[k])
            if acc_e >= 5.0:
                groups.append([edges[k], hi_edge, acc_o, acc_e])
                acc_o, acc_e, hi_edge = 0, 0.0, None
        if acc_e > 0.0:
            if groups:
                groups[-1][0] = edges[0]
                groups[-1][2] += acc_o
                groups[-1][3] += acc_e
            else:
                groups.append([edges[0], hi_edge, acc_o, acc_e])
        merged += len(radial) - len(groups)
        for lo, hi, o, e in reversed(groups):
            bins.append((lo, hi, s, o, e, (o - e) ** 2 / e))
    if merged:
        logger.warning(f"merged {merged} radial bins with expected count below 5")
    stat = float(sum(b[5] for b in bins))
    dof = len(bins)
    return IntensityReport(tuple(bins), stat, dof, float(stats.chi2.sf(stat, dof)))


def poisson_dispersion(model, n, scale, annulus, reps, seed, threads=None):
    """
    Counts in the annulus lo <= |w| < hi over independent clouds.
    :return: (counts, dispersion index var/mean)
    """
    lo, hi = annulus
    seqs = np.random.SeedSequence(seed).spawn(reps)
    counts = np.empty(reps, dtype=np.int64)
    for i, s in enumerate(seqs):
        pts = chunked_draw(model.sample, n, s, threads=threads) / scale
        r = np.linalg.norm(pts, axis=1)
        counts[i] = np.count_nonzero((r >= lo) & (r < hi))
    mean = counts.mean()
    if mean == 0:
        raise InsufficientDataError("annulus never hit", suggestion="move the annulus closer to the origin")
    return counts, float(counts.var(ddof=1) / mean)


def gumbel_pwm(sample):
    """Gumbel location and scale from the first two probability-weighted moments."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    b0 = x.mean()
    b1 = np.sum(np.arange(n) / (n - 1) * x) / n
    beta = (2.0 * b1 - b0) / math.log(2.0)
    return b0 - EULER_GAMMA * beta, beta


def max_commutes(meta, x):
    """
    Exact check that the coordinatewise maximum passes through the monotone map:
    K evaluated once, its column maxima must sit at the rows where x peaks.
    """
    fx = meta.forward(x)
    cols = np.arange(x.shape[1])
    return bool(np.array_equal(fx[x.argmax(axis=0), cols], fx.max(axis=0)))


@dataclass(frozen=True)
class MaximaReport:
    reps: int
    n: int
    commutes: bool
    ranks_equal: bool
    frechet_p: tuple
    frechet_index: tuple
    gumbel_p: tuple

    @property
    def passed(self):
        return self.commutes and self.ranks_equal and min(self.frechet_p + self.gumbel_p) > 0.01


def coordinatewise_maxima(z_model, meta, n, reps, seed, scale_z, light=None, threads=None):
    """
    Componentwise maxima of z-samples and of their x-preimages.

    The z-maxima over c_n are fitted by a Frechet law through a Gumbel PWM fit
    of log M; the x-maxima, normalized by (M - b_n)/a(b_n), by a Gumbel law.
    """
    if reps < 1:
        raise DomainError("need at least one repetition")
    seqs = np.random.SeedSequence(seed).spawn(reps)
    mz = np.empty((reps, z_model.d))
    mx = np.empty((reps, z_model.d))
    commutes = True
    for i, s in enumerate(seqs):
        z = chunked_draw(z_model.sample, n, s, threads=threads)
        x = meta.push(z, 'inverse')
        top = x.max(axis=0)
        commutes &= max_commutes(meta, x)
        mz[i] = z.max(axis=0)
        mx[i] = top
    ranks_equal = all(np.array_equal(np.argsort(mz[:, j], kind='stable'), np.argsort(mx[:, j], kind='stable'))
                      for j in range(z_model.d))
    light = light or meta.light
    b_n = float(light.tail_quantile(-math.log(n)))
    a_n = float(light.scale(b_n))
    frechet_p, frechet_index, gumbel_p = [], [], []
    for j in range(z_model.d):
        lz = np.log(mz[:, j] / scale_z)
        mu, beta = gumbel_pwm(lz)
        frechet_p.append(float(stats.kstest(lz, 'gumbel_r', args=(mu, beta)).pvalue))
        frechet_index.append(1.0 / beta)
        gx = (mx[:, j] - b_n) / a_n
        mu, beta = gumbel_pwm(gx)
        gumbel_p.append(float(stats.kstest(gx, 'gumbel_r', args=(mu, beta)).pvalue))
    if not commutes:
        logger.warning("componentwise maxima do not commute with K")
    return MaximaReport(reps, n, commutes, ranks_equal, tuple(frechet_p), tuple(frechet_index), tuple(gumbel_p))


def sample_exceedances(sampler, t, count, rng, axis=-1, batch=CHUNK_SIZE, max_draws=10 ** 9):
    """
    `count` draws with x[axis] >= t, exact halfplane sampling when the sampler
    offers it, chunked streaming otherwise.
    """
    if hasattr(sampler, 'sample_halfplane'):
        return sampler.sample_halfplane(t, count, rng, axis=axis)
    out = []
    have = drawn = 0
    while have < count:
        pts = sampler.sample(batch, rng)
        keep = pts[pts[:, axis] >= t]
        out.append(keep)
        have += keep.shape[0]
        drawn += batch
        if drawn >= max_draws:
            raise InsufficientDataError(f"{have} exceedances of {t:g} in {drawn} draws",
                                        suggestion="lower the threshold")
    return np.concatenate(out, axis=0)[:count]


@dataclass(frozen=True)
class HighRiskSample:
    """
    Exceedances of {y >= t} mapped by u = x/t, v = (y - t)/a(t).
    """
    t: float
    a: float
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    ratio: np.ndarray = field(repr=False)

    @property
    def count(self):
        return self.u.size

    def mass_near(self, center, window=0.1, drift_corrected=False):
        """
        Fraction of exceedances with |u - center| < window and its standard error.
        drift_corrected uses x/y, which removes the a(t) v / t drift of x/t.
        """
        u = self.ratio if drift_corrected else self.u
        p = float(np.mean(np.abs(u - center) < window))
        return p, math.sqrt(max(p * (1.0 - p), 1.0 / self.count) / self.count)

    def ks_exponential(self):
        return float(stats.kstest(self.v, 'expon').pvalue)


def extract_high_risk(points, t, light, min_exceedances=500, axis=-1):
    """
    :param points: raw x-space samples
    :param t: threshold on the `axis` coordinate
    :param light: LightMarginal supplying a(t)
    :return: HighRiskSample
    """
    pts = as_points(points)
    if pts.shape[1] != 2:
        raise UnsupportedError("high-risk scenarios use horizontal halfplanes in d=2")
    y = pts[:, axis]
    x = pts[:, 1 - (axis % 2)]
    keep = y >= t
    k = int(np.count_nonzero(keep))
    if k < min_exceedances:
        n = pts.shape[0]
        lower = float(light.tail_quantile(math.log(min(0.5, 2.0 * min_exceedances / n))))
        raise InsufficientDataError(f"{k} exceedances of t={t:g}, need {min_exceedances}",
                                    suggestion=f"lower t to about {lower:.4g} or draw more points")
    a = float(light.scale_function_at(t))
    xs, ys = x[keep], y[keep]
    return HighRiskSample(float(t), a, xs / t, (ys - t) / a, xs / ys)


@dataclass(frozen=True)
class SpectralWeights:
    HEADER = ("class", "weight", "stderr", "count")
    p_minus: float
    p_zero: float
    p_plus: float
    stderr: tuple
    count: int

    def rows(self):
        counts = [round(p * self.count) for p in (self.p_minus, self.p_zero, self.p_plus)]
        return [(name, p, se, c) for name, p, se, c in
                zip(("minus", "zero", "plus"), (self.p_minus, self.p_zero, self.p_plus), self.stderr, counts)]


def spectral_weights(points, t, delta=0.05, axis=-1):
    """
    Directional weights of heavy exceedances over {y >= t}: x < -delta y,
    |x| <= delta y and x > delta y.
    """
    pts = as_points(points)
    y = pts[:, axis]
    x = pts[:, 1 - (axis % 2)]
    keep = y >= t
    k = int(np.count_nonzero(keep))
    if k == 0:
        raise InsufficientDataError(f"no exceedances of t={t:g}", suggestion="lower the threshold")
    xs, ys = x[keep], y[keep]
    classes = (xs < -delta * ys, np.abs(xs) <= delta * ys, xs > delta * ys)
    weights, errs = [], []
    for c in classes:
        m = int(np.count_nonzero(c))
        p = m / k
        se = math.sqrt(max(p * (1.0 - p), 1.0 / k) / k)
        if m < 10:
            logger.warning(f"sparse spectral class ({m} of {k}); interval widened")
            se = math.sqrt((m + 1.0) * (k - m + 1.0) / (k + 2.0) ** 3) * 2.0
        weights.append(p)
        errs.append(se)
    return SpectralWeights(weights[0], weights[1], weights[2], tuple(errs), k)


@dataclass(frozen=True)
class CombinedSpectral:
    p_minus: float
    p_zero: float
    p_plus: float
    total: float
    stderr: float

    @property
    def passed(self):
        return self.total >= 1.0 - 3.0 * self.stderr


def combined_spectral_check(high_risk, heavy, window=0.1, drift_corrected=True):
    """
    Light-side p_- and p_+ (mass near u = -1 and u = +1) with the heavy-side p_0.
    """
    pm, sm = high_risk.mass_near(-1.0, window, drift_corrected)
    pp, sp = high_risk.mass_near(1.0, window, drift_corrected)
    se = math.sqrt(sm ** 2 + sp ** 2 + heavy.stderr[1] ** 2)
    total = pm + heavy.p_zero + pp
    return CombinedSpectral(pm, heavy.p_zero, pp, total, se)


class ThreeDensityMixture:
    """
    Disk, square and diamond densities with Gaussian-type generators
    e^(-r^2/2), e^(-r^2/2)/r and r e^(-r^2/2), weighted so that each carries a
    third of the vertical tail above the working threshold t.
    """
    space = 'x'

    def __init__(self, t):
        from .homothetic import LightGenerator, HomotheticDensity
        from .marginals import GaussianMarginal
        from .star_sets import Ball, Cube, Diamond
        psi = GaussianMarginal().psi
        self.t = float(t)
        self.d = 2
        self.components = [
            HomotheticDensity(LightGenerator(psi, 0.0, 'gauss'), Ball(2), space='x'),
            HomotheticDensity(LightGenerator(psi, -1.0, 'gauss/r'), Cube(2), space='x'),
            HomotheticDensity(LightGenerator(psi, 1.0, 'r*gauss'), Diamond(2), space='x'),
        ]
        log_p = np.array([c.halfplane_log_probability(self.t) for c in self.components])
        self.log_tail = log_p
        w = -log_p - special.logsumexp(-log_p)
        self.weights = np.exp(w)
        self.name = f"three-density(t={self.t:g})"

    def __repr__(self):
        return f"ThreeDensityMixture(t={self.t:g})"

    def sample(self, n, rng):
        k = rng.multinomial(n, self.weights)
        pts = np.concatenate([c.sample(int(m), rng) for c, m in zip(self.components, k)], axis=0)
        rng.shuffle(pts, axis=0)
        return pts

    def sample_halfplane(self, t, n, rng, axis=-1):
        """Given y >= t the components are equally likely when t is the working threshold."""
        log_w = np.log(self.weights) + np.array([c.halfplane_log_probability(t, axis) for c in self.components])
        probs = np.exp(log_w - special.logsumexp(log_w))
        k = rng.multinomial(n, probs)
        pts = np.concatenate([c.sample_halfplane(t, int(m), rng, axis=axis, min_acceptance=1e-5)
                              for c, m in zip(self.components, k)], axis=0)
        rng.shuffle(pts, axis=0)
        return pts


def three_density_mixture(t):
    return ThreeDensityMixture(t)


@dataclass(frozen=True)
class LinkCheck:
    level: float
    p_values: tuple
    counts: tuple

    @property
    def passed(self):
        return min(self.p_values) > 0.01


def exponent_link_check(z_model, meta, n, level, lam, seed, threads=None):
    """
    Two independent clouds, one in z and one in x.  Above matched-probability
    thresholds, x-excesses u = (x - s)/a(s) mapped by u -> e^(u/lam) must follow
    the law of z/t; compared per coordinate by a two-sample KS test.
    :param level: tail probability P(Z_j > t) = P(X_j > s) in (0, 1/2)
    """
    from .meta import exp_link_map
    if not 0.0 < level < 0.5:
        raise DomainError(f"link level is a tail probability in (0, 1/2), got {level}")
    link = exp_link_map(lam)
    seq_z, seq_x = np.random.SeedSequence(seed).spawn(2)
    z = chunked_draw(z_model.sample, n, seq_z, threads=threads)
    x = meta.push(chunked_draw(z_model.sample, n, seq_x, threads=threads), 'inverse')
    log_q = math.log(level)
    t = float(meta.heavy.tail_quantile(log_q))
    s = float(meta.light.tail_quantile(log_q))
    a = float(meta.light.scale(s))
    p_values, counts = [], []
    for j in range(z.shape[1]):
        wz = z[z[:, j] > t, j] / t
        wx = link.forward((x[x[:, j] > s, j] - s) / a)
        if wz.size < 20 or wx.size < 20:
            raise InsufficientDataError(f"too few exceedances on axis {j} ({wz.size}, {wx.size})",
                                        suggestion="lower the level or raise n")
        p_values.append(float(stats.ks_2samp(wz, wx).pvalue))
        counts.append((int(wz.size), int(wx.size)))
    return LinkCheck(float(level), tuple(p_values), tuple(counts))
