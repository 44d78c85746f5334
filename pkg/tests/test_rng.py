import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from discerr import InvalidArgumentError, RngStream


def test_same_key_reproduces_bits():
    a = RngStream(7, 3).normals(1000)
    b = RngStream(7, 3).normals(1000)
    assert np.array_equal(a, b)


def test_counter_addresses_blocks():
    s = RngStream(11)
    full = s.raw(40)
    assert np.array_equal(RngStream(11, counter=3).raw(28), full[12:])
    assert np.array_equal(s.raw(10, offset=13), full[13:23])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9), st.integers(1, 13), st.integers(0, 20))
def test_path_rows_do_not_depend_on_batching(n_paths, per_path, offset):
    s = RngStream(5, 2)
    whole = s.path_normals(n_paths + 3, per_path, offset)
    for j in range(n_paths + 3):
        row = s.path_normals(1, per_path, offset + j)[0]
        assert np.array_equal(row, whole[j])


def test_distinct_streams_are_uncorrelated():
    a = RngStream(1, 0).normals(200000)
    b = RngStream(1, 1).normals(200000)
    c = RngStream(2, 0).normals(200000)
    for x, y in ((a, b), (a, c)):
        r = np.corrcoef(x, y)[0, 1]
        assert abs(r) < 4.0 / np.sqrt(x.size)


def test_normals_are_standard():
    z = RngStream(99).normals(200000)
    assert stats.kstest(z, "norm").pvalue > 1e-3
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * np.sqrt(2 / z.size)


def test_spawn_gives_distinct_children():
    s = RngStream(3)
    kids = {s.spawn(k).stream_id for k in range(100)}
    assert len(kids) == 100
    assert s.spawn(4) == s.spawn(4)
    assert not s.spawn(1).same_key(s)


@pytest.mark.parametrize("kw", [dict(seed=-1), dict(seed=2 ** 64), dict(seed=1, stream_id=-2)])
def test_invalid_addresses(kw):
    with pytest.raises(InvalidArgumentError):
        RngStream(**kw)
