"""Spectral flow of boundary-value problems on the annulus and the Chern
number of their boundary data, computed by two independent pipelines."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("sflab")
except PackageNotFoundError:  # running from a source checkout
    __version__ = "0.1.0"
