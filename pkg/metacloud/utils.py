import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

CHUNK_SIZE = 65536
LOG_HALF = math.log(0.5)


class MetacloudError(Exception):
    pass


class DomainError(MetacloudError, ValueError):
    pass


class NumericError(MetacloudError, ArithmeticError):
    pass


class UnsupportedError(MetacloudError, NotImplementedError):
    pass


class SamplerError(MetacloudError, RuntimeError):
    pass


class InsufficientDataError(MetacloudError):
    """
    Too few exceedances or tail samples for a diagnostic.
    `suggestion` carries a concrete way out, e.g. a lower threshold.
    """

    def __init__(self, msg, suggestion=None):
        super().__init__(msg)
        self.suggestion = suggestion

    def __str__(self):
        msg = super().__str__()
        if self.suggestion:
            msg += f" (suggestion: {self.suggestion})"
        return msg


class ConfigError(MetacloudError, ValueError):
    def __init__(self, msg, line=None, key=None):
        super().__init__(msg)
        self.line = line
        self.key = key

    def __str__(self):
        prefix = ""
        if self.line is not None:
            prefix += f"line {self.line}: "
        if self.key is not None:
            prefix += f"key '{self.key}': "
        return prefix + super().__str__()


class GateFailure(MetacloudError):
    def __init__(self, gates):
        self.gates = list(gates)
        names = ", ".join(g.name for g in self.gates)
        super().__init__(f"{len(self.gates)} strict gate(s) failed: {names}")


class MultilineFormatter(logging.Formatter):
    """Repeat the record prefix on each line of a multi-line message (gate tables, result listings)."""

    def format(self, record: logging.LogRecord):
        original = record.msg
        lines = str(original).splitlines() or [""]
        formatted = []
        for line in lines:
            record.msg = line
            formatted.append(super().format(record))
        record.msg = original
        record.message = "\n".join(formatted)
        return record.message


def thread_count(threads=None):
    """
    Worker count for chunked generation.
    :param threads: int or None, explicit count; None reads METACLOUD_THREADS
    :return: int >= 1
    """
    if threads is None:
        raw = os.environ.get('METACLOUD_THREADS', '1')
        try:
            threads = int(raw)
        except ValueError:
            raise DomainError(f"METACLOUD_THREADS must be a positive integer, got '{raw}'")
    if threads < 1:
        raise DomainError(f"thread count must be positive, got {threads}")
    return threads


def chunk_sizes(n, chunk=CHUNK_SIZE):
    full, rest = divmod(int(n), chunk)
    sizes = [chunk] * full
    if rest:
        sizes.append(rest)
    return sizes


def chunked_draw(draw, n, seed, threads=None, chunk=CHUNK_SIZE):
    """
    Draw n rows with `draw(size, rng)` in fixed-size chunks, one RNG stream per chunk.
    Chunks are mapped in order, so the result does not depend on the thread count.

    :param draw: callable(size, rng) -> ndarray (size, d)
    :param n: int, rows to draw
    :param seed: int or SeedSequence
    :param threads: int or None (METACLOUD_THREADS)
    :return: ndarray (n, d)
    """
    sizes = chunk_sizes(n, chunk)
    if not sizes:
        raise DomainError("cannot draw an empty cloud")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = seq.spawn(len(sizes))
    jobs = list(zip(sizes, streams))

    def run(job):
        size, stream = job
        return draw(size, np.random.default_rng(stream))

    workers = min(thread_count(threads), len(jobs))
    if workers == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    return np.concatenate(parts, axis=0)


def as_points(x, d=None):
    """
    Coerce to a float (k, d) array; a single point becomes (1, d).
    """
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise DomainError(f"expected points of shape (k, d), got {pts.shape}")
    if d is not None and pts.shape[1] != d:
        raise DomainError(f"dimension mismatch: points have d={pts.shape[1]}, expected {d}")
    return pts


def log_diff_exp(a, b):
    """log(e^a - e^b) for a > b, elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a + np.log(-np.expm1(b - a))


def sign_vectors(d):
    """All 2^d vectors in {-1, 1}^d, in a fixed order."""
    grid = np.array(np.meshgrid(*([[1.0, -1.0]] * d), indexing='ij'))
    return grid.reshape(d, -1).T.copy()
