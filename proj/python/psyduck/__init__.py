"""Keyed diffusion steganography.

    >>> import psyduck
    >>> key = psyduck.generate_key()
    >>> s = psyduck.Session("protocol.d = 2")
    >>> blob = s.encode(b"hello", key)
    >>> s.decode(blob, key)
    b'hello'
"""
from ._psyduck import (
    BackendError,
    CapacityError,
    ConfigError,
    Error,
    FramingError,
    IoError,
    ParameterError,
    Session,
    ShapeError,
    generate_key,
    read_container,
    sigma,
)

__all__ = [
    "BackendError",
    "CapacityError",
    "ConfigError",
    "Error",
    "FramingError",
    "IoError",
    "ParameterError",
    "Session",
    "ShapeError",
    "generate_key",
    "read_container",
    "sigma",
]
