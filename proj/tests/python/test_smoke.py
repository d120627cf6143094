import numpy as np
import pytest

import psyduck

SMALL = "sample.shape = 8x16\nprotocol.r = 4\nprotocol.d = 2\n"


def test_round_trip():
    s = psyduck.Session()
    key = psyduck.generate_key()
    assert s.capacity == 512
    blob = s.encode(b"hello", key)
    assert blob[:4] == b"PSYD"
    assert s.decode(blob, key) == b"hello"


def test_encode_is_deterministic():
    s = psyduck.Session(SMALL)
    key = bytes(range(32))
    assert s.encode(b"quack", key) == s.encode(b"quack", key)


def test_wrong_key_raises_framing_error():
    s = psyduck.Session()
    blob = s.encode(b"secret", bytes(32 * [1]))
    with pytest.raises(psyduck.FramingError):
        s.decode(blob, bytes(32 * [2]))


def test_capacity_error():
    s = psyduck.Session(SMALL)
    with pytest.raises(psyduck.CapacityError):
        s.encode(bytes(s.capacity + 1), bytes(range(32)))


def test_config_and_key_errors():
    with pytest.raises(psyduck.ConfigError):
        psyduck.Session("protocol.d = 99")
    with pytest.raises(psyduck.ConfigError):
        psyduck.Session("backend.kind = bridge:/bin/true")
    with pytest.raises(psyduck.ParameterError):
        psyduck.Session().encode(b"x", b"short")
    assert issubclass(psyduck.FramingError, psyduck.Error)


def test_container_array_matches_cover_statistics():
    s = psyduck.Session()
    key = bytes(range(32))
    x = psyduck.read_container(s.encode(b"abc", key))
    c = s.cover(key)
    assert x.shape == c.shape == (43, 96)
    assert x.dtype == np.float64
    assert abs(x.std() - c.std()) < 0.05
    assert 0 < np.linalg.norm(x - c) < np.linalg.norm(c)


def test_sigma():
    assert psyduck.sigma("linear-50", 1) == 0.0
    assert psyduck.sigma("linear-50", 2) == pytest.approx(0.009581269300372108646, rel=1e-14)
