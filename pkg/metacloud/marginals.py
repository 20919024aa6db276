"""
Univariate marginal laws.

Heavy laws (Pareto-type, Student-t) carry a tail index `lam`; light laws
(exponential-power, Gaussian, tabulated) carry a von Mises exponent `psi` with
scale a(s) = 1/psi'(s).  Every law is symmetric, so all evaluators work from
the log upper tail log(1 - F(t)), t >= 0, which keeps probabilities of order
e^-700 and below representable.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from scipy.optimize import brentq

from .utils import DomainError, NumericError, LOG_HALF

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


class MarginalModel:
    """
    Base class of the symmetric marginal laws.

    Subclasses implement `log_tail` (t >= 0), `tail_quantile` and `log_density`;
    cdf, sf, quantile and density follow by symmetry.  The tail level of
    quantile(p) comes from log1p(-p) above the median and log(p) below it, so
    quantile(1 - p) and -quantile(p) agree to rounding, not bit for bit.
    """
    is_heavy = False
    name = 'marginal'

    def log_tail(self, t):
        raise NotImplementedError

    def log_density(self, t):
        raise NotImplementedError

    def tail_quantile(self, log_p):
        raise NotImplementedError

    def log_tail_quantile(self, log_p):
        """log of tail_quantile(log_p)."""
        with np.errstate(divide='ignore'):
            return np.log(self.tail_quantile(log_p))

    def log_tail_from_log(self, log_t):
        """log_tail(exp(log_t)); overridden where log_t may exceed double range."""
        return self.log_tail(np.exp(np.asarray(log_t, dtype=float)))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        lt = self.log_tail(np.abs(t))
        return np.where(t >= 0, -np.expm1(lt), np.exp(lt))

    def sf(self, t):
        return self.cdf(-np.asarray(t, dtype=float))

    def density(self, t):
        return np.exp(self.log_density(np.abs(np.asarray(t, dtype=float))))

    def quantile(self, p):
        """F^-1(p) through the upper-tail quantile of min(p, 1 - p), sign by side of the median."""
        p = np.asarray(p, dtype=float)
        upper = p >= 0.5
        with np.errstate(divide='ignore'):
            log_p = np.where(upper, np.log1p(-p), np.log(p))
        t = self.tail_quantile(log_p)
        return np.where(upper, t, -t)

    def _check_log_p(self, log_p):
        log_p = np.asarray(log_p, dtype=float)
        if np.any(np.isnan(log_p)):
            raise DomainError("tail level is NaN")
        return np.minimum(log_p, LOG_HALF)

    def _newton(self, x, log_p, steps=6, log_scale=False):
        """
        Polish x so that log_tail(x) = log_p, using d/dx log_tail = -f/(1-F).
        With log_scale the iteration runs on log x (heavy tails).
        """
        x = np.array(x, dtype=float, copy=True)
        active = (x > 0) & np.isfinite(x)
        if not np.any(active):
            return x
        xa, lp = x[active], log_p[active]
        for _ in range(steps):
            lt = self.log_tail(xa)
            ratio = np.exp(self.log_density(xa) - lt)
            f = lt - lp
            if log_scale:
                u = np.log(xa) + f / (xa * ratio)
                xa = np.exp(u)
            else:
                xa = np.maximum(xa + f / ratio, 0.5 * xa)
        x[active] = xa
        return x


class HeavyMarginal(MarginalModel):
    is_heavy = True

    def __init__(self, lam):
        if not (lam > 0 and math.isfinite(lam)):
            raise DomainError(f"tail index must be positive, got {lam}")
        self.lam = float(lam)

    @property
    def tail_constant(self):
        """lim t^lam (1 - F(t))."""
        raise NotImplementedError


class ParetoMarginal(HeavyMarginal):
    """
    Symmetric Pareto-type law.

    core='shifted':   1 - F(t) = 1/2 (1 + t)^-lam
    core='quadratic': 1 - F(t) = 1/2 (1 + t + t^2)^(-lam/2), same tail constant 1/2
    """
    name = 'pareto'

    def __init__(self, lam, core='shifted'):
        super().__init__(lam)
        if core not in ('shifted', 'quadratic'):
            raise DomainError(f"unknown Pareto core '{core}'")
        self.core = core

    def __repr__(self):
        return f"ParetoMarginal(lam={self.lam:g}, core='{self.core}')"

    @property
    def tail_constant(self):
        return 0.5

    def log_tail(self, t):
        t = np.asarray(t, dtype=float)
        if self.core == 'shifted':
            return LOG_HALF - self.lam * np.log1p(t)
        return LOG_HALF - 0.5 * self.lam * np.log1p(t + t * t)

    def log_tail_from_log(self, log_t):
        lt = np.asarray(log_t, dtype=float)
        if self.core == 'shifted':
            return LOG_HALF - self.lam * np.logaddexp(0.0, lt)
        return LOG_HALF - 0.5 * self.lam * np.logaddexp(0.0, np.logaddexp(lt, 2.0 * lt))

    def log_density(self, t):
        t = np.asarray(t, dtype=float)
        if self.core == 'shifted':
            return math.log(0.5 * self.lam) - (self.lam + 1.0) * np.log1p(t)
        return (math.log(0.25 * self.lam) + np.log1p(2.0 * t)
                - (0.5 * self.lam + 1.0) * np.log1p(t + t * t))

    def _excess(self, log_p):
        return (LOG_HALF - self._check_log_p(log_p)) / self.lam

    def tail_quantile(self, log_p):
        x = self._excess(log_p)
        if self.core == 'shifted':
            return np.expm1(x)
        y1 = np.expm1(2.0 * x)
        return 2.0 * y1 / (1.0 + np.sqrt(1.0 + 4.0 * y1))

    def log_tail_quantile(self, log_p):
        x = self._excess(log_p)
        with np.errstate(divide='ignore', over='ignore'):
            if self.core == 'shifted':
                # log(e^x - 1) without overflow
                return np.where(x > 30.0, x + np.log1p(-np.exp(-x)), np.log(np.expm1(x)))
            return np.where(x > 30.0, x + 0.5 * np.log1p(-np.exp(-2.0 * x)) - 0.5 * np.exp(-x),
                            np.log(self.tail_quantile(np.minimum(np.asarray(log_p, dtype=float), LOG_HALF))))


class StudentTMarginal(HeavyMarginal):
    """
    Student-t law with `df` degrees of freedom; the tail index is df.
    """
    name = 'student_t'

    def __init__(self, df):
        super().__init__(df)
        self.df = float(df)
        nu = self.df
        self._log_c = (special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu)
                       - 0.5 * math.log(nu * math.pi) + 0.5 * (nu + 1.0) * math.log(nu) - math.log(nu))

    def __repr__(self):
        return f"StudentTMarginal(df={self.df:g})"

    @property
    def tail_constant(self):
        return math.exp(self._log_c)

    def log_tail(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide='ignore'):
            exact = stats.t.logsf(t, self.df)
            asym = self._log_c - self.df * np.log(np.maximum(t, 1e-300))
        return np.where(np.isfinite(exact) & (t < 1e12), exact, asym)

    def log_tail_from_log(self, log_t):
        lt = np.asarray(log_t, dtype=float)
        big = lt > 27.0
        safe = np.where(big, 0.0, lt)
        return np.where(big, self._log_c - self.df * lt, self.log_tail(np.exp(safe)))

    def log_density(self, t):
        return stats.t.logpdf(np.asarray(t, dtype=float), self.df)

    def tail_quantile(self, log_p):
        lp = self._check_log_p(log_p)
        p = np.exp(lp)
        with np.errstate(over='ignore'):
            start = np.where(p > 1e-280, stats.t.isf(np.maximum(p, 1e-300), self.df),
                             np.exp((self._log_c - lp) / self.df))
        start = np.where(lp >= LOG_HALF, 0.0, start)
        return self._newton(start, lp, log_scale=True)

    def log_tail_quantile(self, log_p):
        lp = self._check_log_p(log_p)
        asym = (self._log_c - lp) / self.df
        deep = asym > 600.0
        with np.errstate(divide='ignore'):
            near = np.log(self.tail_quantile(np.where(deep, LOG_HALF, lp)))
        return np.where(deep, asym, near)


class CustomHeavyMarginal(HeavyMarginal):
    """
    Heavy law from a user tail evaluator `log_tail_fn(t)` (t >= 0, vectorized).
    Quantiles by bracketing; only constant slowly varying parts are exercised.
    """
    name = 'custom'

    def __init__(self, lam, log_tail_fn, log_density_fn, tail_constant):
        super().__init__(lam)
        self._log_tail_fn = log_tail_fn
        self._log_density_fn = log_density_fn
        self._tail_constant = float(tail_constant)

    @property
    def tail_constant(self):
        return self._tail_constant

    def log_tail(self, t):
        return np.asarray(self._log_tail_fn(np.asarray(t, dtype=float)), dtype=float)

    def log_density(self, t):
        return np.asarray(self._log_density_fn(np.asarray(t, dtype=float)), dtype=float)

    def tail_quantile(self, log_p):
        lp = np.atleast_1d(self._check_log_p(log_p))
        out = np.empty_like(lp)
        for i, target in enumerate(lp.flat):
            if target >= LOG_HALF:
                out.flat[i] = 0.0
                continue
            hi = 1.0
            while self.log_tail(hi) > target:
                hi *= 2.0
                if hi > 1e300:
                    raise NumericError(f"cannot bracket tail level {target}")
            out.flat[i] = brentq(lambda x: float(self.log_tail(x)) - target, 0.0, hi, xtol=1e-14, rtol=1e-14)
        return out.reshape(np.shape(log_p)) if np.ndim(log_p) else out[0]


class LightMarginal(MarginalModel):
    """
    Light tail with density proportional to exp(-psi(|s|)) times polynomial factors.
    """

    def psi(self, s):
        raise NotImplementedError

    def psi_prime(self, s):
        raise NotImplementedError

    def psi_inverse(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.empty_like(y)
        for i, target in enumerate(y.flat):
            hi = 1.0
            while float(self.psi(hi)) < target:
                hi *= 2.0
            out.flat[i] = brentq(lambda s: float(self.psi(s)) - target, 0.0, hi, xtol=1e-14)
        return out

    def scale(self, s):
        """a(s) = 1/psi'(s), vectorized, no validation."""
        return 1.0 / self.psi_prime(np.asarray(s, dtype=float))

    def scale_function_at(self, s):
        """
        :param s: real, point where psi' > 0
        :return: 1/psi'(s)
        """
        d = np.asarray(self.psi_prime(np.asarray(s, dtype=float)), dtype=float)
        if np.any(~np.isfinite(d)) or np.any(d <= 0):
            raise DomainError(f"psi' must be positive and finite at s={s}, got {d}")
        return 1.0 / d

    def von_mises_report(self, grid):
        """
        a'(s) and -log(1-G(s))/psi(s) on a grid; both should tend to 0 and 1.
        :param grid: increasing positive reals
        :return: VonMisesReport
        """
        s = np.asarray(grid, dtype=float)
        h = 1e-5 * np.maximum(s, 1.0)
        a_prime = (self.scale(s + h) - self.scale(s - h)) / (2.0 * h)
        ratio = -self.log_tail(s) / self.psi(s)
        return VonMisesReport(tuple(s), tuple(a_prime), tuple(ratio))


@dataclass(frozen=True)
class VonMisesReport:
    grid: tuple
    a_prime: tuple
    tail_over_psi: tuple


class ExpPowerMarginal(LightMarginal):
    """
    Exponential-power law g(s) = theta / (2 Gamma(1/theta)) exp(-|s|^theta).
    theta = 1 is the Laplace law with 1 - G(s) = exp(-s)/2.
    """
    name = 'exppower'

    def __init__(self, theta):
        if not (theta > 0 and math.isfinite(theta)):
            raise DomainError(f"theta must be positive, got {theta}")
        self.theta = float(theta)
        self._a = 1.0 / self.theta
        self._log_norm = math.log(self.theta / 2.0) - special.gammaln(self._a)

    def __repr__(self):
        return f"ExpPowerMarginal(theta={self.theta:g})"

    def psi(self, s):
        return np.abs(np.asarray(s, dtype=float)) ** self.theta

    def psi_prime(self, s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide='ignore'):
            return self.theta * s ** (self.theta - 1.0)

    def psi_inverse(self, y):
        return np.asarray(y, dtype=float) ** self._a

    def log_density(self, s):
        return self._log_norm - self.psi(s)

    def _log_q(self, x):
        """log of the regularized upper incomplete gamma Q(1/theta, x)."""
        a = self._a
        x = np.asarray(x, dtype=float)
        with np.errstate(divide='ignore'):
            direct = np.log(special.gammaincc(a, x))
        big = x > 600.0
        if np.any(big):
            xb = x[big]
            series = np.ones_like(xb)
            term = np.ones_like(xb)
            for k in range(1, 8):
                term = term * (a - k) / xb
                series = series + term
            direct = np.array(direct, copy=True)
            direct[big] = (a - 1.0) * np.log(xb) - xb - special.gammaln(a) + np.log(series)
        return direct

    def log_tail(self, s):
        s = np.asarray(s, dtype=float)
        if self.theta == 1.0:
            return LOG_HALF - s
        return LOG_HALF + self._log_q(s ** self.theta)

    def tail_quantile(self, log_p):
        lp = self._check_log_p(log_p)
        if self.theta == 1.0:
            return LOG_HALF - lp
        q = np.exp(lp - LOG_HALF)
        with np.errstate(over='ignore'):
            x = np.where(q > 1e-280, special.gammainccinv(self._a, np.maximum(q, 1e-300)), -lp)
        for _ in range(3):
            # asymptotic refinement where gammainccinv is out of range
            x = np.where(q > 1e-280, x, -(lp - LOG_HALF) + (self._a - 1.0) * np.log(np.maximum(x, 1.0))
                         - special.gammaln(self._a))
        s = np.maximum(x, 0.0) ** self._a
        s = np.where(lp >= LOG_HALF, 0.0, s)
        return self._newton(s, lp)


class GaussianMarginal(LightMarginal):
    """Standard normal law, psi(s) = s^2/2, a(s) = 1/s."""
    name = 'gaussian'

    def __repr__(self):
        return "GaussianMarginal()"

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        return 0.5 * s * s

    def psi_prime(self, s):
        return np.abs(np.asarray(s, dtype=float))

    def psi_inverse(self, y):
        return np.sqrt(2.0 * np.asarray(y, dtype=float))

    def log_density(self, s):
        return stats.norm.logpdf(np.asarray(s, dtype=float))

    def log_tail(self, s):
        return special.log_ndtr(-np.asarray(s, dtype=float))

    def tail_quantile(self, log_p):
        lp = self._check_log_p(log_p)
        s = -special.ndtri_exp(lp)
        s = np.where(lp >= LOG_HALF, 0.0, np.maximum(s, 0.0))
        return self._newton(s, lp, steps=2)


class TabulatedLightMarginal(LightMarginal):
    """
    Light law with psi_1 = psi + b, b tabulated on a grid (constant below the grid,
    linearly extrapolated above).  Normalization and tails from log-space tables.
    """
    name = 'tabulated'

    def __init__(self, base, grid, b_values, table_size=20001):
        self.base = base
        self.grid = np.asarray(grid, dtype=float)
        self.b_values = np.asarray(b_values, dtype=float)
        if self.grid.shape != self.b_values.shape or self.grid.size < 2:
            raise DomainError("grid and b values must be matching arrays of length >= 2")
        self._b_slope = (self.b_values[-1] - self.b_values[-2]) / (self.grid[-1] - self.grid[-2])
        top = self.grid[-1]
        s = np.linspace(0.0, top, table_size)
        log_g = -self.psi(s)
        ds = s[1] - s[0]
        seg = np.logaddexp(log_g[:-1], log_g[1:]) + math.log(0.5 * ds)
        tail_top = log_g[-1] + np.log(self.scale(top))
        cells = np.concatenate([seg, [tail_top]])
        log_upper = np.logaddexp.accumulate(cells[::-1])[::-1]
        # log of twice the half-line integral is the log normalization
        self._log_norm = -(log_upper[0] + math.log(2.0))
        self._s = s
        self._log_tail_table = log_upper + self._log_norm
        self._top = top

    def __repr__(self):
        return f"TabulatedLightMarginal(base={self.base!r}, grid=[{self.grid[0]:g}..{self.grid[-1]:g}])"

    def b(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        inside = np.interp(s, self.grid, self.b_values)
        return np.where(s > self.grid[-1], self.b_values[-1] + self._b_slope * (s - self.grid[-1]), inside)

    def b_prime(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        slopes = np.gradient(self.b_values, self.grid)
        inside = np.interp(s, self.grid, slopes, left=0.0)
        return np.where(s > self.grid[-1], self._b_slope, inside)

    def psi(self, s):
        return self.base.psi(s) + self.b(s)

    def psi_prime(self, s):
        return self.base.psi_prime(s) + self.b_prime(s)

    def log_density(self, s):
        return self._log_norm - self.psi(s)

    def log_tail(self, s):
        s = np.asarray(s, dtype=float)
        inside = np.interp(s, self._s, self._log_tail_table)
        with np.errstate(divide='ignore'):
            beyond = self._log_norm - self.psi(s) + np.log(self.scale(np.maximum(s, self._top)))
        return np.where(s > self._top, beyond, inside)

    def tail_quantile(self, log_p):
        lp = self._check_log_p(log_p)
        # the table is decreasing in s; interpolate on its negation
        inside = np.interp(-lp, -self._log_tail_table, self._s)
        lo_top = self._log_tail_table[-1]
        start = np.where(lp < lo_top, np.maximum(self.base.tail_quantile(lp), self._top), inside)
        return np.where(lp < lo_top, self._newton(start, lp), inside)


def eval_cdf(m, t):
    """
    :param m: MarginalModel
    :param t: real or array, finite
    :return: F(t)
    """
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)):
        raise DomainError(f"cdf argument must be finite, got {t}")
    return m.cdf(t)


def eval_quantile(m, p):
    """
    :param m: MarginalModel
    :param p: probability or array in (0, 1)
    :return: F^-1(p)
    """
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0) & (p < 1))):
        raise DomainError(f"quantile level must lie in (0, 1), got {p}")
    return m.quantile(p)


@dataclass(frozen=True)
class ScalingSchedule:
    """
    Scaling constants c_n (heavy) or r_n (light) at the requested sample sizes.
    """
    kind: str
    ns: tuple
    values: tuple

    def scale_at(self, n):
        try:
            return self.values[self.ns.index(n)]
        except ValueError:
            raise DomainError(f"no scale computed for n={n}; have {self.ns}")

    def pairs(self):
        return list(zip(self.ns, self.values))


def scaling_constants(m, ns, mode='exact'):
    """
    Solve 1 - F(c_n) = 1/n (heavy) or -log(1 - G(r_n)) = log n (light).

    :param m: MarginalModel
    :param ns: increasing sample sizes, each >= 2
    :param mode: 'exact' tail solve, or 'psi' for psi(r_n) = log n (light only)
    :return: ScalingSchedule
    """
    ns = [int(n) for n in np.atleast_1d(ns)]
    if not ns or min(ns) < 2:
        raise DomainError(f"sample sizes must be >= 2, got {ns}")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise DomainError(f"sample sizes must be strictly increasing, got {ns}")
    log_n = np.log(np.asarray(ns, dtype=float))
    if mode == 'exact':
        values = m.tail_quantile(-log_n)
    elif mode == 'psi':
        if m.is_heavy:
            raise DomainError("psi scaling applies to light marginals only")
        values = m.psi_inverse(log_n)
    else:
        raise DomainError(f"unknown scaling mode '{mode}'")
    kind = 'heavy' if m.is_heavy else 'light'
    return ScalingSchedule(kind, tuple(ns), tuple(float(v) for v in np.atleast_1d(values)))


def build_lighter_marginal(m, grid, max_bands=100000):
    """
    Lighter marginal g1 = exp(-psi - b) with g1(s)/g(s) -> 0 and g1(cs)/g(s) -> inf, c < 1.

    b = M*/2 where M_n(s) = psi(s) - psi(s - s/n), M_n* is its running minimum over
    t >= s on the grid, n(s) is the largest n with M_n*(s) >= n and
    M*(s) = min(M*_{n(s)}(s), n(s) + 1).  Below the first band M* = M_2*.

    :param m: LightMarginal
    :param grid: increasing positive grid
    :param max_bands: cap on the number of level bands scanned
    :return: TabulatedLightMarginal
    """
    s = np.asarray(grid, dtype=float)
    if s.ndim != 1 or s.size < 8 or np.any(np.diff(s) <= 0) or s[0] <= 0:
        raise DomainError("grid must be an increasing positive array of at least 8 points")

    def running_min(n):
        mn = m.psi(s) - m.psi(s - s / n)
        return np.minimum.accumulate(mn[::-1])[::-1]

    m2 = running_min(2)
    if m2[-1] < 2.0:
        raise NumericError(f"grid too coarse to bracket level bands: M_2*(top)={m2[-1]:.3g} < 2")
    band = np.where(m2 >= 2.0, 2, 0)
    m_at = m2.copy()
    n = 3
    while True:
        mn = running_min(n)
        hit = mn >= n
        if not np.any(hit):
            break
        band = np.where(hit, n, band)
        m_at = np.where(hit, mn, m_at)
        n += 1
        if n > max_bands:
            raise NumericError(f"more than {max_bands} level bands; grid top {s[-1]:g} too large")
    m_star = np.where(band > 0, np.minimum(m_at, band + 1.0), m2)
    b = 0.5 * m_star
    logger.debug(f"lighter marginal: {n - 2} level bands, b in [{b[0]:.3g}, {b[-1]:.3g}]")
    return TabulatedLightMarginal(m, s, b)


def make_heavy(family, lam, core='shifted'):
    if family == 'pareto':
        return ParetoMarginal(lam, core=core)
    if family == 'student_t':
        return StudentTMarginal(lam)
    raise DomainError(f"unknown heavy family '{family}'")


def make_light(family, theta):
    if family == 'exppower':
        return ExpPowerMarginal(theta)
    if family == 'gaussian':
        return GaussianMarginal()
    raise DomainError(f"unknown light family '{family}'")
