"""
Bounded star-shaped sets given by gauge functions, the limit sets E(lam, theta)
and the diagonal cross, plus the onto-set targets used by cloud diagnostics.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .utils import DomainError, UnsupportedError, SamplerError, sign_vectors

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MC_VOLUME_POINTS = 1000000


def _flatten(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise DomainError(f"dimension mismatch: got points with d={x.shape[-1]}, expected {d}")
    return x.reshape(-1, d), x.shape[:-1]


def unit_directions(d, k, seed=0):
    """
    k unit vectors: equispaced angles for d=2, a Fibonacci lattice for d=3,
    seeded Gaussian directions otherwise.
    """
    if d == 2:
        phi = 2.0 * np.pi * np.arange(k) / k
        return np.column_stack([np.cos(phi), np.sin(phi)])
    if d == 3:
        i = np.arange(k) + 0.5
        z = 1.0 - 2.0 * i / k
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + 5.0 ** 0.5) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    g = np.random.default_rng(seed).standard_normal((k, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


class StarSet:
    """
    Bounded star-shaped set D = {x : gauge(x) <= 1} with 0 in its interior.

    :param d: int, dimension
    :param radius: float, D lies in the cube [-radius, radius]^d
    """
    positive_volume = True

    def __init__(self, d, radius):
        if d < 1:
            raise DomainError(f"dimension must be positive, got {d}")
        self.d = int(d)
        self.radius = float(radius)

    def _gauge(self, pts):
        raise NotImplementedError

    def gauge(self, x):
        pts, shape = _flatten(x, self.d)
        return self._gauge(pts).reshape(shape)

    def contains(self, x):
        return self.gauge(x) <= 1.0

    def boundary_point(self, direction):
        """
        :param direction: (d,) or (k, d) directions, not necessarily unit
        :return: direction / gauge(direction)
        """
        u = np.asarray(direction, dtype=float)
        g = self.gauge(u)
        if np.any(~(g > 0)):
            raise DomainError("gauge vanishes along a direction; the set is unbounded there")
        return u / np.asarray(g)[..., None]

    def support(self, axis=-1):
        """Upper bound on max x[axis] over the set."""
        return self.radius

    def exact_volume(self):
        return None

    @cached_property
    def volume(self):
        exact = self.exact_volume()
        if exact is not None:
            return exact
        if self.d == 2:
            return polar_area(self)
        est = mc_volume_fraction(self, MC_VOLUME_POINTS, seed=0)
        return est.fraction * (2.0 * self.radius) ** self.d

    def boundary_polyline(self, k=512):
        if self.d != 2:
            raise UnsupportedError("boundary polylines are drawn for d=2 only")
        pts = self.boundary_point(unit_directions(2, k))
        return np.vstack([pts, pts[:1]])


class Cube(StarSet):
    name = 'cube'

    def __init__(self, d=2, half=1.0):
        super().__init__(d, half)
        self.half = float(half)

    def __repr__(self):
        return f"Cube(d={self.d}, half={self.half:g})"

    def _gauge(self, pts):
        return np.max(np.abs(pts), axis=1) / self.half

    def exact_volume(self):
        return (2.0 * self.half) ** self.d


class Ball(StarSet):
    name = 'disk'

    def __init__(self, d=2, r=1.0):
        super().__init__(d, r)
        self.r = float(r)

    def __repr__(self):
        return f"Ball(d={self.d}, r={self.r:g})"

    def _gauge(self, pts):
        return np.linalg.norm(pts, axis=1) / self.r

    def exact_volume(self):
        return math.pi ** (self.d / 2.0) / math.gamma(self.d / 2.0 + 1.0) * self.r ** self.d


class Diamond(StarSet):
    name = 'diamond'

    def __init__(self, d=2):
        super().__init__(d, 1.0)

    def __repr__(self):
        return f"Diamond(d={self.d})"

    def _gauge(self, pts):
        return np.sum(np.abs(pts), axis=1)

    def exact_volume(self):
        return 2.0 ** self.d / math.factorial(self.d)


class Ellipse(StarSet):
    """Axis-aligned ellipsoid with semi-axes `axes`."""
    name = 'ellipse'

    def __init__(self, axes):
        axes = np.asarray(axes, dtype=float)
        if axes.ndim != 1 or np.any(axes <= 0):
            raise DomainError(f"semi-axes must be positive, got {axes}")
        super().__init__(axes.size, float(axes.max()))
        self.axes = axes

    def __repr__(self):
        return f"Ellipse(axes={self.axes.tolist()})"

    def _gauge(self, pts):
        return np.linalg.norm(pts / self.axes, axis=1)

    def support(self, axis=-1):
        return float(self.axes[axis])

    def exact_volume(self):
        return Ball(self.d).exact_volume() * float(np.prod(self.axes))


class LimitSet(StarSet):
    """
    E(lam, theta) = {u : |u_1|^theta + ... + |u_d|^theta + lam >= (lam + d) ||u||_inf^theta}.

    The gauge is found by bisection on each ray; `closed_form_gauge` is the
    algebraic inversion of the same inequality, kept as a cross-check.
    """
    name = 'limit_set'

    def __init__(self, lam, theta, d=2, tol=1e-15, max_iter=200):
        if lam <= 0 or theta <= 0:
            raise DomainError(f"lam and theta must be positive, got {lam}, {theta}")
        super().__init__(d, 1.0)
        self.lam = float(lam)
        self.theta = float(theta)
        self.tol = tol
        self.max_iter = max_iter

    def __repr__(self):
        return f"LimitSet(lam={self.lam:g}, theta={self.theta:g}, d={self.d})"

    def member(self, x):
        """Direct test of the defining inequality."""
        pts, shape = _flatten(x, self.d)
        a = np.abs(pts) ** self.theta
        return (a.sum(axis=1) + self.lam >= (self.lam + self.d) * a.max(axis=1)).reshape(shape)

    def _gauge(self, pts):
        m = np.max(np.abs(pts), axis=1)
        out = np.zeros_like(m)
        nz = m > 0
        if not np.any(nz):
            return out
        u = pts[nz] / m[nz, None]
        su = np.sum(np.abs(u) ** self.theta, axis=1)
        lo = np.zeros(u.shape[0])
        hi = np.full(u.shape[0], 2.0)
        for _ in range(self.max_iter):
            mid = 0.5 * (lo + hi)
            inside = mid ** self.theta * su + self.lam >= (self.lam + self.d) * mid ** self.theta
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
            if np.all(hi - lo <= self.tol * hi):
                break
        out[nz] = m[nz] / (0.5 * (lo + hi))
        return out

    def closed_form_gauge(self, x):
        pts, shape = _flatten(x, self.d)
        a = np.abs(pts) ** self.theta
        val = ((self.lam + self.d) * a.max(axis=1) - a.sum(axis=1)) / self.lam
        return (val ** (1.0 / self.theta)).reshape(shape)

    def support(self, axis=-1):
        return 1.0


class ScaledSet(StarSet):
    """sigma * D."""

    def __init__(self, base, sigma):
        if not sigma > 0:
            raise DomainError(f"scale must be positive, got {sigma}")
        super().__init__(base.d, base.radius * sigma)
        self.base = base
        self.sigma = float(sigma)
        self.name = getattr(base, 'name', 'set')

    def __repr__(self):
        return f"ScaledSet({self.base!r}, sigma={self.sigma:.6g})"

    def _gauge(self, pts):
        return self.base.gauge(pts) / self.sigma

    def support(self, axis=-1):
        return self.base.support(axis) * self.sigma

    def exact_volume(self):
        v = self.base.exact_volume()
        return None if v is None else v * self.sigma ** self.d


def scaled(S, sigma):
    return ScaledSet(S, sigma)


class UnionSet(StarSet):
    name = 'union'

    def __init__(self, first, second):
        super().__init__(first.d, max(first.radius, second.radius))
        self.first = first
        self.second = second

    def __repr__(self):
        return f"UnionSet({self.first!r}, {self.second!r})"

    def _gauge(self, pts):
        return np.minimum(self.first.gauge(pts), self.second.gauge(pts))

    def support(self, axis=-1):
        return max(self.first.support(axis), self.second.support(axis))


class GaugeSet(StarSet):
    """
    Star set from a user gauge `fn(points (k, d)) -> (k,)`.
    Homogeneity and positivity are checked on random rays unless check=False.
    """
    name = 'gauge'

    def __init__(self, fn, d, radius, volume=None, check=True, seed=0):
        super().__init__(d, radius)
        self._fn = fn
        self._volume = volume
        if check:
            self.validate(seed=seed)

    def _gauge(self, pts):
        return np.asarray(self._fn(pts), dtype=float)

    def exact_volume(self):
        return self._volume

    def validate(self, k=1000, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((k, self.d))
        c = rng.uniform(0.0, 10.0, size=k)
        gx = self._gauge(x)
        if np.any(~(gx > 0)):
            raise DomainError("user gauge is not positive away from the origin")
        gcx = self._gauge(c[:, None] * x)
        if np.any(np.abs(gcx - c * gx) > 1e-9 * (1.0 + gcx)):
            raise DomainError("user gauge is not positively homogeneous of degree 1")
        u = unit_directions(self.d, 256, seed=seed)
        corners = self.radius * 1.0000001 * u / np.max(np.abs(u), axis=1, keepdims=True)
        if np.any(self._gauge(corners) <= 1.0):
            raise DomainError(f"user set is not contained in the cube of radius {self.radius}")


def union_gauge(first, second):
    """
    :param first: StarSet
    :param second: StarSet
    :return: StarSet whose gauge is the pointwise minimum
    """
    if first.d != second.d:
        raise DomainError(f"dimension mismatch: {first.d} vs {second.d}")
    if not (first.positive_volume and second.positive_volume):
        raise UnsupportedError("union with a zero-volume set has no gauge; use UnionTarget (distance-based membership)")
    return UnionSet(first, second)


class DiagonalCross:
    """
    Union of the segments [0, delta], delta in {-1, 1}^d.
    Zero volume, so it offers a distance instead of a gauge.
    """
    positive_volume = False
    name = 'cross'

    def __init__(self, d=2):
        self.d = int(d)
        self.radius = 1.0
        self.vertices = sign_vectors(self.d)

    def __repr__(self):
        return f"DiagonalCross(d={self.d})"

    def distance(self, x, block=65536):
        pts, shape = _flatten(x, self.d)
        out = np.empty(pts.shape[0])
        delta = self.vertices
        for start in range(0, pts.shape[0], block):
            p = pts[start:start + block]
            tau = np.clip(p @ delta.T / self.d, 0.0, 1.0)
            diff = p[:, None, :] - tau[:, :, None] * delta[None, :, :]
            out[start:start + block] = np.min(np.linalg.norm(diff, axis=2), axis=1)
        return out.reshape(shape)

    def contains(self, x, tol=0.0):
        return self.distance(x) <= tol


def distance_to_cross(X, x):
    return X.distance(x)


def polar_area(S):
    """Area of a planar star set, 1/2 * integral of rho(phi)^2 dphi."""
    def integrand(phi):
        g = float(S.gauge(np.array([math.cos(phi), math.sin(phi)])))
        return 0.5 / (g * g)

    kinks = [k * math.pi / 4.0 for k in range(9)]
    total = 0.0
    for a, b in zip(kinks, kinks[1:]):
        total += integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-10, limit=200)[0]
    return total


@dataclass(frozen=True)
class VolumeEstimate:
    fraction: float
    stderr: float
    n: int


def mc_volume_fraction(S, n, seed):
    """
    Monte Carlo estimate of |S| / (2R)^d over the bounding cube.

    :param S: StarSet or DiagonalCross
    :param n: int, number of uniform points
    :param seed: int
    :return: VolumeEstimate
    """
    if n <= 0:
        raise DomainError("need at least one point for a volume estimate")
    rng = np.random.default_rng(seed)
    hits = 0
    left = int(n)
    while left:
        k = min(left, 1 << 18)
        pts = rng.uniform(-S.radius, S.radius, size=(k, S.d))
        hits += int(np.count_nonzero(S.contains(pts)))
        left -= k
    p = hits / n
    return VolumeEstimate(p, math.sqrt(p * (1.0 - p) / n), int(n))


def uniform_in(S, n, rng, min_acceptance=1e-4):
    """
    n points uniform in S by rejection from its bounding cube.
    """
    out = []
    have = 0
    drawn = 0
    accepted = 0
    rate = 0.5
    while have < n:
        k = int(min(max((n - have) / max(rate, min_acceptance) * 1.2 + 16, 64), 1 << 20))
        pts = rng.uniform(-S.radius, S.radius, size=(k, S.d))
        keep = pts[S.contains(pts)]
        drawn += k
        accepted += keep.shape[0]
        rate = accepted / drawn
        if drawn > 100000 and rate < min_acceptance:
            raise SamplerError(f"acceptance {rate:.2e} inside the bounding box of {S!r}; shape and box mismatch")
        out.append(keep)
        have += keep.shape[0]
    return np.concatenate(out, axis=0)[:n]


class SetTarget:
    """Positive-volume target: a point is outside at eps when gauge > 1 + eps."""

    def __init__(self, S, name=None):
        self.S = S
        self.d = S.d
        self.name = name or getattr(S, 'name', 'set')

    def __repr__(self):
        return f"SetTarget({self.S!r})"

    def outside(self, points, eps):
        return self.S.gauge(points) > 1.0 + eps

    def grid(self, n_directions=64, interior=True):
        b = self.S.boundary_point(unit_directions(self.d, n_directions))
        return np.vstack([b, 0.5 * b]) if interior else b

    def overlays(self):
        return [self.S.boundary_polyline()]


class CrossTarget:
    """Diagonal cross target: outside at eps when the distance exceeds eps."""

    def __init__(self, X, name='cross'):
        self.X = X
        self.d = X.d
        self.name = name

    def __repr__(self):
        return f"CrossTarget({self.X!r})"

    def outside(self, points, eps):
        return self.X.distance(points) > eps

    def grid(self, n_directions=64, interior=True):
        v = self.X.vertices
        return np.vstack([0.5 * v, v])

    def overlays(self):
        return [np.vstack([np.zeros(self.d), v]) for v in self.X.vertices]


class UnionTarget:
    """Outside only when outside both parts."""

    def __init__(self, first, second, name=None):
        if first.d != second.d:
            raise DomainError("union target parts differ in dimension")
        self.first = first
        self.second = second
        self.d = first.d
        self.name = name or f"{first.name}+{second.name}"

    def __repr__(self):
        return f"UnionTarget({self.first!r}, {self.second!r})"

    def outside(self, points, eps):
        return self.first.outside(points, eps) & self.second.outside(points, eps)

    def grid(self, n_directions=64, interior=True):
        return np.vstack([self.first.grid(n_directions, interior), self.second.grid(n_directions, interior)])

    def overlays(self):
        return self.first.overlays() + self.second.overlays()


def coverage_counts(points, grid, eps, tree=None):
    """
    Number of points within closed distance eps of each grid point.
    """
    tree = tree if tree is not None else cKDTree(points)
    return np.asarray(tree.query_ball_point(grid, r=eps, return_length=True), dtype=np.int64)


def make_shape(kind, d=2, axes=None, lam=1.0, theta=1.0):
    if kind == 'disk':
        return Ball(d)
    if kind == 'cube':
        return Cube(d)
    if kind == 'diamond':
        return Diamond(d)
    if kind == 'ellipse':
        return Ellipse(axes if axes is not None else [1.0, 2.0][:d] + [1.0] * max(0, d - 2))
    if kind == 'limit_set':
        return LimitSet(lam, theta, d)
    raise DomainError(f"unknown shape '{kind}'")
