"""Profiles of random m-ary search trees."""

import os

if "TREEPROFILE_CACHE_DIR" in os.environ:
    os.environ.setdefault("NUMBA_CACHE_DIR", os.environ["TREEPROFILE_CACHE_DIR"])

from .model import ModelParams  # noqa: E402

__version__ = "0.1.0"
__all__ = ["ModelParams", "__version__"]
