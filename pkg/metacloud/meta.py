"""
Componentwise meta maps between light-tailed (x) and heavy-tailed (z) coordinates.

K0 = F0^-1 o G0 carries a light coordinate s to the heavy coordinate t with the
same upper tail probability.  Both laws are symmetric, so
K0(s) = sign(s) * F0.tail_quantile(G0.log_tail(|s|)) and every evaluation runs on
log tails.
"""
import logging

import numpy as np

from .marginals import ExpPowerMarginal, ParetoMarginal
from .utils import DomainError, MetacloudError, NumericError, as_points

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


def tail_transfer(src, dst, x):
    """
    Quantile transform dst^-1 o src for symmetric laws, through the log tail.
    :param src: MarginalModel of x
    :param dst: MarginalModel of the result
    :param x: array
    """
    x = np.asarray(x, dtype=float)
    return np.sign(x) * dst.tail_quantile(src.log_tail(np.abs(x)))


class ClosedForm:
    def __init__(self, forward, inverse, forward_log=None, inverse_log=None, name='closed'):
        self.forward = forward
        self.inverse = inverse
        self.forward_log = forward_log
        self.inverse_log = inverse_log
        self.name = name


def closed_form_for(heavy, light):
    """
    Registered closed forms.  Pareto(lam, shifted) against Laplace gives
    (1 + t)^lam = e^s, so K0(s) = expm1(s / lam).
    """
    if (isinstance(heavy, ParetoMarginal) and heavy.core == 'shifted'
            and isinstance(light, ExpPowerMarginal) and light.theta == 1.0):
        lam = heavy.lam

        def fwd_log(s):
            x = np.asarray(s, dtype=float) / lam
            with np.errstate(divide='ignore', over='ignore'):
                return np.where(x > 30.0, x + np.log1p(-np.exp(-x)), np.log(np.expm1(x)))

        return ClosedForm(forward=lambda s: np.sign(s) * np.expm1(np.abs(s) / lam),
                          inverse=lambda t: np.sign(t) * lam * np.log1p(np.abs(t)),
                          forward_log=fwd_log,
                          inverse_log=lambda lt: lam * np.logaddexp(0.0, np.asarray(lt, dtype=float)),
                          name=f"expm1(s/{lam:g})")
    return None


class MetaMap:
    """
    K0 = quantile(F0) o cdf(G0) applied to every coordinate, with inverse
    quantile(G0) o cdf(F0).

    :param heavy: HeavyMarginal F0 (z side)
    :param light: LightMarginal G0 (x side)
    :param closed_form: ClosedForm, None to look one up, False to disable
    """
    is_link = False
    odd = True

    def __init__(self, heavy, light, closed_form=None, d=2):
        self.heavy = heavy
        self.light = light
        self.d = int(d)
        self.closed_form = closed_form_for(heavy, light) if closed_form is None else (closed_form or None)

    def __repr__(self):
        cf = f", closed={self.closed_form.name}" if self.closed_form else ""
        return f"MetaMap({self.heavy!r} <- {self.light!r}{cf})"

    def forward(self, s, numeric=False):
        """K0(s), elementwise."""
        if self.closed_form is not None and not numeric:
            return self.closed_form.forward(np.asarray(s, dtype=float))
        return tail_transfer(self.light, self.heavy, s)

    def inverse(self, t, numeric=False):
        """K0^-1(t), elementwise."""
        if self.closed_form is not None and not numeric:
            return self.closed_form.inverse(np.asarray(t, dtype=float))
        return tail_transfer(self.heavy, self.light, t)

    def forward_log(self, s):
        """log K0(s) for s > 0, valid where K0(s) overflows."""
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            raise DomainError("forward_log needs positive arguments")
        if self.closed_form is not None and self.closed_form.forward_log is not None:
            return self.closed_form.forward_log(s)
        return self.heavy.log_tail_quantile(self.light.log_tail(s))

    def inverse_log(self, log_t):
        """K0^-1(exp(log_t)), with log_t beyond double range allowed."""
        lt = np.asarray(log_t, dtype=float)
        if self.closed_form is not None and self.closed_form.inverse_log is not None:
            return self.closed_form.inverse_log(lt)
        return self.light.tail_quantile(self.heavy.log_tail_from_log(lt))

    def cross_check(self, grid):
        """Largest relative gap between numeric and closed-form K0 on a grid."""
        if self.closed_form is None:
            raise DomainError("no closed form registered")
        s = np.asarray(grid, dtype=float)
        num = self.forward(s, numeric=True)
        ref = self.forward(s)
        scale = np.maximum(np.abs(ref), np.finfo(float).tiny)
        return float(np.max(np.abs(num - ref) / scale)) if s.size else 0.0

    def push(self, points, direction='forward'):
        """
        Apply K (forward) or K^-1 (inverse) to every coordinate of a cloud.
        :param points: (n, d)
        :param direction: 'forward' | 'inverse'
        :return: (n, d)
        """
        if direction not in ('forward', 'inverse'):
            raise DomainError(f"unknown direction '{direction}'")
        pts = as_points(points)
        bad = ~np.all(np.isfinite(pts), axis=1)
        if np.any(bad):
            raise DomainError(f"point {int(np.argmax(bad))}: non-finite coordinates")
        fn = self.forward if direction == 'forward' else self.inverse
        try:
            out = fn(pts)
        except MetacloudError as err:
            for i, row in enumerate(pts):
                try:
                    fn(row)
                except MetacloudError:
                    raise type(err)(f"point {i}: {err}") from err
            raise
        bad = ~np.all(np.isfinite(out), axis=1)
        if np.any(bad):
            raise NumericError(f"point {int(np.argmax(bad))}: {direction} map overflows")
        return out


class ExponentialMap(MetaMap):
    """Figure map K0(s) = sign(s) (e^|s| - 1); log K0(s) = s up to e^-s."""

    def __init__(self, d=2):
        self.heavy = None
        self.light = None
        self.d = int(d)
        self.closed_form = ClosedForm(
            forward=lambda s: np.sign(s) * np.expm1(np.abs(s)),
            inverse=lambda t: np.sign(t) * np.log1p(np.abs(t)),
            forward_log=lambda s: s + np.log1p(-np.exp(-s)),
            inverse_log=lambda lt: np.logaddexp(0.0, lt),
            name='exp')

    def __repr__(self):
        return "ExponentialMap()"

    def forward(self, s, numeric=False):
        return self.closed_form.forward(np.asarray(s, dtype=float))

    def inverse(self, t, numeric=False):
        return self.closed_form.inverse(np.asarray(t, dtype=float))


class IdentityMap(MetaMap):
    def __init__(self, d=2):
        self.heavy = None
        self.light = None
        self.d = int(d)
        self.closed_form = ClosedForm(forward=lambda s: s, inverse=lambda t: t,
                                      forward_log=np.log, inverse_log=np.exp, name='identity')

    def __repr__(self):
        return "IdentityMap()"

    def forward(self, s, numeric=False):
        return np.array(s, dtype=float, copy=True)

    def inverse(self, t, numeric=False):
        return np.array(t, dtype=float, copy=True)


class LinkMap(MetaMap):
    """
    Exponent-measure link u -> e^(u/lam).  Acts on exponent-measure coordinates,
    not on data; it is increasing but not odd.
    """
    is_link = True
    odd = False

    def __init__(self, lam, d=2):
        if not lam > 0:
            raise DomainError(f"tail index must be positive, got {lam}")
        self.lam = float(lam)
        self.heavy = None
        self.light = None
        self.d = int(d)
        self.closed_form = None

    def __repr__(self):
        return f"LinkMap(lam={self.lam:g})"

    def forward(self, u, numeric=False):
        return np.exp(np.asarray(u, dtype=float) / self.lam)

    def inverse(self, w, numeric=False):
        w = np.asarray(w, dtype=float)
        if np.any(w <= 0):
            raise DomainError("link inverse needs positive arguments")
        return self.lam * np.log(w)

    def forward_log(self, u):
        return np.asarray(u, dtype=float) / self.lam

    def inverse_log(self, log_w):
        return self.lam * np.asarray(log_w, dtype=float)


def k0_forward(M, s):
    """
    :param M: MetaMap
    :param s: real or array
    :return: K0(s)
    """
    out = M.forward(s)
    return float(out) if np.ndim(out) == 0 else out


def push_cloud(M, pts, direction='forward'):
    return M.push(pts, direction)


def exp_link_map(lam):
    return LinkMap(lam)


def standardize_marginals(pts, achieved, target):
    """
    Quantile transform target^-1 o achieved_j on every coordinate j.

    :param pts: (n, d)
    :param achieved: MarginalModel, or one per axis
    :param target: MarginalModel
    :return: (n, d), ranks unchanged
    """
    pts = as_points(pts)
    d = pts.shape[1]
    laws = list(achieved) if isinstance(achieved, (list, tuple)) else [achieved] * d
    if len(laws) != d:
        raise DomainError(f"need {d} achieved marginals, got {len(laws)}")
    out = np.empty_like(pts)
    for j, law in enumerate(laws):
        out[:, j] = tail_transfer(law, target, pts[:, j])
    return out
