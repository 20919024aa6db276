"""
Homothetic densities z -> g(n_D(z)) / Z with exact samplers.

The gauge radius R = n_D(Z) and the direction Z / R are independent: R has density
proportional to r^(d-1) g(r) and the direction follows the cone measure of D,
realized as W / n_D(W) for W uniform in D.
"""
import logging
import math

import numpy as np
from scipy import integrate, special

from .star_sets import ScaledSet, uniform_in
from .utils import DomainError, NumericError, SamplerError, UnsupportedError, as_points

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

STEP = 0.01
MAX_LOG_STEP = 0.05
SPAN_NATS = 745.0
X_CEILING = 700.0


class HeavyGenerator:
    """
    f_*(r) = (1 + r)^-(lam + d)  ('shifted')  or  max(r, r0)^-(lam + d)  ('pure').
    """
    is_heavy = True

    def __init__(self, lam, d, kind='shifted', r0=1.0):
        if lam <= 0:
            raise DomainError(f"tail index must be positive, got {lam}")
        if kind not in ('shifted', 'pure'):
            raise DomainError(f"unknown heavy generator '{kind}'")
        self.lam = float(lam)
        self.d = int(d)
        self.kind = kind
        self.r0 = float(r0)
        self.kappa = 0.0
        self.name = f"heavy-{kind}"

    def __repr__(self):
        return f"HeavyGenerator(lam={self.lam:g}, d={self.d}, kind='{self.kind}')"

    @property
    def exponent(self):
        return self.lam + self.d

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == 'shifted':
            return -self.exponent * np.log1p(r)
        return -self.exponent * np.log(np.maximum(r, self.r0))


class LightGenerator:
    """
    g_*(r) = r^kappa exp(-psi(r)).
    :param psi: vectorized callable, e.g. LightMarginal.psi
    """
    is_heavy = False

    def __init__(self, psi, kappa=0.0, name='light'):
        self.psi = psi
        self.kappa = float(kappa)
        self.name = name

    def __repr__(self):
        return f"LightGenerator({self.name}, kappa={self.kappa:g})"

    def log_value(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide='ignore'):
            return self.kappa * np.log(r) - self.psi(r)


class RadialTable:
    """
    Log-space table of the radial law with density proportional to r^(d-1) g(r).

    Works in x = log r, where the integrand is exp(d x + log g(e^x)).  Cells are
    subdivided until log I changes by at most MAX_LOG_STEP per cell and integrated
    exactly for log-linear pieces; the head below the grid and the tail above it
    are closed-form power/exponential pieces.
    """

    def __init__(self, generator, d):
        self.generator = generator
        self.d = int(d)
        head_slope = self.d + generator.kappa
        if head_slope <= 0:
            raise DomainError(f"radial law is not integrable at 0: d + kappa = {head_slope}")
        x_lo = -30.0 / head_slope
        x = np.arange(x_lo, X_CEILING + STEP, STEP)
        log_i = self._log_integrand(x)
        peak = int(np.argmax(log_i))
        below = np.nonzero(log_i[peak:] < log_i[peak] - SPAN_NATS)[0]
        if below.size:
            x = x[:peak + below[0] + 1]
            log_i = log_i[:peak + below[0] + 1]
        x, log_i = self._refine(x, log_i)
        slope_top = -(log_i[-1] - log_i[-2]) / (x[-1] - x[-2])
        if not slope_top > 0:
            raise NumericError(f"radial integrand does not decay at log r = {x[-1]:.3g}")
        dx = np.diff(x)
        with np.errstate(divide='ignore'):
            seg = log_i[:-1] + np.log(dx) + np.log(special.exprel(np.diff(log_i)))
        tail = log_i[-1] - math.log(slope_top)
        head = log_i[0] - math.log(head_slope)
        log_s = np.logaddexp.accumulate(np.concatenate([[tail], seg[::-1]]))[::-1]
        self.x = x
        self.log_i = log_i
        self.log_s = log_s
        self.head = head
        self.head_slope = head_slope
        self.slope_top = slope_top
        self.log_total = float(np.logaddexp(head, log_s[0]))

    def _log_integrand(self, x):
        return self.d * x + self.generator.log_value(np.exp(x))

    def _refine(self, x, log_i):
        k = np.maximum(np.ceil(np.abs(np.diff(log_i)) / MAX_LOG_STEP).astype(np.int64), 1)
        if np.all(k == 1):
            return x, log_i
        starts = np.repeat(x[:-1], k)
        widths = np.repeat(np.diff(x) / k, k)
        offsets = np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)
        fine = np.concatenate([starts + widths * offsets, x[-1:]])
        return fine, self._log_integrand(fine)

    def log_sf(self, r):
        """log P(R > r) under the normalized radial law."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide='ignore'):
            xr = np.log(r)
        inside = np.interp(xr, self.x, self.log_s)
        above = self.log_s[-1] - self.slope_top * (xr - self.x[-1])
        head_mass = self.head + self.head_slope * (xr - self.x[0])
        with np.errstate(over='ignore'):
            below = np.log1p(-np.exp(np.minimum(head_mass - self.log_total, 0.0)))
        out = np.where(xr > self.x[-1], above - self.log_total, inside - self.log_total)
        return np.where(xr < self.x[0], below, out)

    def cdf(self, r):
        return -np.expm1(self.log_sf(r))

    def log_radius_for(self, log_s_target):
        """Invert log S(x) = log_s_target, S the unnormalized upper mass."""
        t = np.asarray(log_s_target, dtype=float)
        inside = np.interp(-t, -self.log_s, self.x)
        above = self.x[-1] + (self.log_s[-1] - t) / self.slope_top
        with np.errstate(divide='ignore', invalid='ignore'):
            log_below = np.log(-np.expm1(t - self.log_total)) + self.log_total
        below = self.x[0] + (log_below - self.head) / self.head_slope
        out = np.where(t < self.log_s[-1], above, inside)
        return np.where(t > self.log_s[0], below, out)

    def sample(self, n, rng, r_min=None):
        """
        Radii from the radial law, optionally conditioned on R >= r_min.
        """
        u = rng.random(n)
        u = np.where(u == 0.0, np.finfo(float).tiny, u)
        if r_min is None or r_min <= 0:
            top = self.log_total
        else:
            top = float(self.log_sf(r_min)) + self.log_total
        return np.exp(self.log_radius_for(top + np.log(u)))


class HomotheticDensity:
    """
    Density g(n_D(x)) / Z on R^d.

    :param generator: HeavyGenerator or LightGenerator
    :param shape: StarSet
    """

    def __init__(self, generator, shape, space=None):
        if generator.is_heavy and generator.d != shape.d:
            raise DomainError(f"generator built for d={generator.d}, shape has d={shape.d}")
        self.generator = generator
        self.shape = shape
        self.d = shape.d
        self.space = space or ('z' if generator.is_heavy else 'x')
        self.table = RadialTable(generator, self.d)
        self.log_norm = math.log(self.d * shape.volume) + self._log_radial_integral()
        self.name = f"{generator.name}/{getattr(shape, 'name', 'set')}"

    def __repr__(self):
        return f"HomotheticDensity({self.generator!r}, {self.shape!r})"

    def _log_radial_integral(self):
        g = self.generator
        d = self.d
        center = math.exp(self.table.x[int(np.argmax(self.table.log_i))])
        shift = float(np.max(self.table.log_i)) - math.log(center)

        def integrand(r):
            if r <= 0.0:
                return 0.0
            return math.exp((d - 1) * math.log(r) + float(g.log_value(r)) - shift)

        total = 0.0
        edges = [0.0, center, 4.0 * center, math.inf]
        for a, b in zip(edges, edges[1:]):
            res = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-11, limit=400, full_output=1)
            if len(res) == 4 and res[0] > 0 and res[1] > 1e-8 * res[0]:
                raise NumericError(f"radial normalization did not converge on [{a}, {b}]: {res[3]}")
            total += res[0]
        return math.log(total) + shift

    @property
    def normalization(self):
        return math.exp(self.log_norm)

    def log_density_at(self, x):
        return self.generator.log_value(self.shape.gauge(x)) - self.log_norm

    def density_at(self, x):
        """
        :param x: (d,) point or (k, d) points
        :return: g(n_D(x)) / Z
        """
        return np.exp(self.log_density_at(x))

    def radial_cdf(self, r):
        return self.table.cdf(r)

    def radial_logsf(self, r):
        return self.table.log_sf(r)

    def directions(self, n, rng):
        w = uniform_in(self.shape, n, rng)
        return w / self.shape.gauge(w)[:, None]

    def sample(self, n, rng):
        """
        :param n: int
        :param rng: numpy Generator
        :return: (n, d) points
        """
        theta = self.directions(n, rng)
        r = self.table.sample(n, rng)
        return r[:, None] * theta

    def sample_halfplane(self, t, n, rng, axis=-1, min_acceptance=1e-4):
        """
        Exact draws conditioned on {x[axis] >= t}, t > 0.
        Since x[axis] <= R * support, R is first conditioned on R >= t / support.
        """
        if not t > 0:
            raise DomainError(f"halfplane level must be positive, got {t}")
        r_min = t / self.shape.support(axis)
        out = []
        have = drawn = 0
        rate = 0.1
        while have < n:
            k = int(min(max((n - have) / max(rate, min_acceptance) * 1.2 + 64, 256), 1 << 20))
            pts = self.table.sample(k, rng, r_min=r_min)[:, None] * self.directions(k, rng)
            keep = pts[pts[:, axis] >= t]
            drawn += k
            have += keep.shape[0]
            rate = max(have, 1) / drawn
            if drawn > 200000 and have / drawn < min_acceptance:
                raise SamplerError(f"halfplane acceptance {have / drawn:.2e} below {min_acceptance:g} at t={t:g}")
            out.append(keep)
        return np.concatenate(out, axis=0)[:n]

    def halfplane_log_probability(self, t, axis=-1):
        """
        log P(X[axis] >= t) for d=2 by quadrature over the boundary angle.
        """
        if self.d != 2:
            raise UnsupportedError("halfplane probabilities are computed for d=2 only")
        support = self.shape.support(axis)
        ref = float(self.table.log_sf(t / support)) if t > 0 else 0.0
        area = self.shape.volume
        other = 1 - (axis % 2)

        def integrand(phi):
            u = np.zeros(2)
            u[axis % 2] = math.cos(phi)
            u[other] = math.sin(phi)
            rho = 1.0 / float(self.shape.gauge(u))
            reach = rho * u[axis % 2]
            if reach <= 0:
                return 0.0
            if t <= 0:
                return rho * rho / (2.0 * area)
            return math.exp(float(self.table.log_sf(t / reach)) - ref) * rho * rho / (2.0 * area)

        pts = [k * math.pi / 8.0 for k in range(-4, 5)]
        total = 0.0
        for a, b in zip(pts, pts[1:]):
            total += integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-9, limit=200)[0]
        if not total > 0:
            raise NumericError(f"halfplane probability underflows at t={t:g}")
        return math.log(total) + ref

    @property
    def tail_constant(self):
        """lim r^(lam+d) f_*(r) / Z; both heavy kinds have lim r^(lam+d) f_*(r) = 1."""
        if not self.generator.is_heavy:
            raise DomainError("tail constants exist for heavy generators only")
        return math.exp(-self.log_norm)

    def marginal_tail_constant(self, axis=0):
        """
        C = lim t^lam P(X[axis] > t) = (kappa / lam) * integral of h over the slice {x[axis] = 1}.
        """
        lam = self.generator.lam
        expo = lam + self.d

        def h_slice(*y):
            w = np.empty(self.d)
            w[axis] = 1.0
            w[[i for i in range(self.d) if i != axis]] = y
            return float(self.shape.gauge(w)) ** -expo

        if self.d == 2:
            val = sum(integrate.quad(h_slice, a, b, epsabs=0.0, epsrel=1e-10, limit=200)[0]
                      for a, b in ((-math.inf, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, math.inf)))
        elif self.d == 3:
            val = integrate.nquad(h_slice, [[-math.inf, math.inf]] * 2, opts={'limit': 100, 'epsrel': 1e-8})[0]
        else:
            raise UnsupportedError("marginal tail constants are computed for d <= 3")
        return self.tail_constant * val / lam

    def calibrate(self, marginal):
        """
        Rescale the shape so the marginal tail constant equals the marginal's.
        Scaling D by sigma multiplies C by sigma^lam.
        """
        sigma = (marginal.tail_constant / self.marginal_tail_constant()) ** (1.0 / self.generator.lam)
        logger.debug(f"calibrating {self.name}: sigma={sigma:.6g}")
        return HomotheticDensity(self.generator, ScaledSet(self.shape, sigma), space=self.space)


def limit_intensity_h(lam, d, shape, w):
    """
    h(w) = 1 / n_D(w)^(lam + d).
    :param w: (d,) or (k, d), nonzero
    """
    g = shape.gauge(as_points(w, d))
    if np.any(g == 0):
        raise DomainError("limit intensity has a pole at the origin")
    h = g ** -(lam + d)
    return float(h[0]) if np.ndim(w) == 1 else h


def numeric_marginal(H, axis, t):
    """
    Density of X[axis] at t by adaptive quadrature over the slice {x[axis] = t}.
    """
    d = H.d
    others = [i for i in range(d) if i != axis]
    log_norm = H.log_norm

    def dens(*y):
        w = np.empty(d)
        w[axis] = t
        w[others] = y
        return math.exp(float(H.generator.log_value(H.shape.gauge(w))) - log_norm)

    if d == 2:
        a = abs(t) if t != 0 else 1.0
        total = 0.0
        for lo, hi in ((-math.inf, -a), (-a, 0.0), (0.0, a), (a, math.inf)):
            res = integrate.quad(dens, lo, hi, epsabs=0.0, epsrel=1e-10, limit=400, full_output=1)
            if len(res) == 4 and res[1] > 1e-6 * max(res[0], 1e-300):
                raise NumericError(f"marginal quadrature did not converge at t={t}: {res[3]}")
            total += res[0]
        return total
    if d == 3:
        return integrate.nquad(dens, [[-math.inf, math.inf]] * 2, opts={'limit': 100, 'epsrel': 1e-7})[0]
    raise UnsupportedError("numeric marginals are computed for d <= 3")


def cubic_density_for(marginal, d):
    """
    Generator g_*(r) = (2r)^(1-d) g1(r) of the cube-shaped density whose marginals
    follow g1; constant factors are absorbed by the normalization.
    """
    return LightGenerator(marginal.psi, kappa=1.0 - d, name=f"cubic-{marginal.name}")


def set_density(shape, generator):
    """g_*(n_E) / c_E as a HomotheticDensity (c_E absorbed into Z)."""
    return HomotheticDensity(generator, shape, space='x')


def heavy_density(lam, shape, kind='shifted'):
    return HomotheticDensity(HeavyGenerator(lam, shape.d, kind=kind), shape)
