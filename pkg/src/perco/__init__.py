"""Correlated percolation on Z^d: samplers, cluster analysis, multi-scale
renormalization with explicit short paths, and Monte Carlo estimators."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .lattice import Config, FormatError, PreconditionError, Window  # noqa: E402
from .samplers import ModelSpec, sample  # noqa: E402

__all__ = ["Config", "FormatError", "ModelSpec", "PreconditionError", "Window", "sample",
           "__version__"]
