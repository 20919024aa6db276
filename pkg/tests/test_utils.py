import logging

import numpy as np
import pytest

from metacloud.utils import (ConfigError, DomainError, GateFailure, InsufficientDataError, MultilineFormatter,
                             chunk_sizes, chunked_draw, log_diff_exp, sign_vectors, thread_count)


def normal_pairs(size, rng):
    return rng.standard_normal((size, 2))


class TestChunkedDraw:
    """Cloud generation must not depend on the worker count."""

    def test_chunk_sizes(self):
        assert chunk_sizes(10, 4) == [4, 4, 2]
        assert chunk_sizes(8, 4) == [4, 4]
        assert chunk_sizes(0, 4) == []

    def test_same_rows_for_any_thread_count(self):
        one = chunked_draw(normal_pairs, 1000, 7, threads=1, chunk=128)
        many = chunked_draw(normal_pairs, 1000, 7, threads=4, chunk=128)
        assert one.shape == (1000, 2)
        assert np.array_equal(one, many)

    def test_seed_changes_rows(self):
        a = chunked_draw(normal_pairs, 100, 1, chunk=64)
        b = chunked_draw(normal_pairs, 100, 2, chunk=64)
        assert not np.array_equal(a, b)

    def test_seed_sequence_accepted(self):
        seq = np.random.SeedSequence(3)
        a = chunked_draw(normal_pairs, 50, seq, chunk=16)
        b = chunked_draw(normal_pairs, 50, np.random.SeedSequence(3), chunk=16)
        assert np.array_equal(a, b)

    def test_empty_cloud_rejected(self):
        with pytest.raises(DomainError):
            chunked_draw(normal_pairs, 0, 1)


class TestThreadCount:
    def test_env(self, monkeypatch):
        monkeypatch.setenv('METACLOUD_THREADS', '3')
        assert thread_count() == 3
        assert thread_count(2) == 2

    def test_default_is_one(self):
        assert thread_count() == 1

    @pytest.mark.parametrize('raw', ['zero', '0', '-2'])
    def test_bad_env(self, monkeypatch, raw):
        monkeypatch.setenv('METACLOUD_THREADS', raw)
        with pytest.raises(DomainError):
            thread_count()


class TestHelpers:
    def test_log_diff_exp(self):
        np.testing.assert_allclose(log_diff_exp(np.log(5.0), np.log(2.0)), np.log(3.0), rtol=1e-14)
        # far below double range
        np.testing.assert_allclose(log_diff_exp(-2000.0, -2001.0), -2000.0 + np.log1p(-np.exp(-1.0)), rtol=1e-14)

    def test_sign_vectors(self):
        s = sign_vectors(3)
        assert s.shape == (8, 3)
        assert len({tuple(v) for v in s}) == 8
        assert np.all(np.abs(s) == 1)


class TestErrors:
    def test_config_error_message(self):
        err = ConfigError("must be positive", line=4, key='lam')
        assert str(err) == "line 4: key 'lam': must be positive"
        assert isinstance(err, ValueError)

    def test_suggestion(self):
        err = InsufficientDataError("only 3 exceedances", suggestion="lower t to 12.5")
        assert "lower t to 12.5" in str(err)

    def test_gate_failure_names(self):
        class G:
            name = 'outside_frac'
        err = GateFailure([G()])
        assert 'outside_frac' in str(err)
        assert len(err.gates) == 1


class TestMultilineFormatter:
    def test_every_line_prefixed(self):
        record = logging.LogRecord('metacloud', logging.INFO, __file__, 1, "first\nsecond", None, None)
        out = MultilineFormatter("> %(message)s").format(record)
        assert out == "> first\n> second"
        assert record.msg == "first\nsecond"
