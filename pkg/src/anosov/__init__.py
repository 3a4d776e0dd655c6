"""Numerical and combinatorial toolkit for Anosov representations and their
domains of discontinuity in flag varieties."""

__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402,F401
from .errors import AnosovError  # noqa: E402,F401
