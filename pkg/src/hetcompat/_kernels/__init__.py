"""Hot loops with two interchangeable implementations.

``_numba`` holds ``@njit`` versions, ``_numpy`` holds vectorised pure-numpy
versions with identical signatures. Setting ``HETCOMPAT_DISABLE_NUMBA=1``
(or running without numba installed) selects the numpy path; numba is
then never imported.
"""
from __future__ import annotations

import importlib
import os

DISABLE_ENV = "HETCOMPAT_DISABLE_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in ("", "0", "false", "no")


def numba_available() -> bool:
    if not numba_requested():
        return False
    return importlib.util.find_spec("numba") is not None


def default_backend_name() -> str:
    return "numba" if numba_available() else "numpy"


def backend(name: str | None = None):
    """Return the kernel module for ``name`` ("numba", "numpy" or None = default)."""
    name = name or default_backend_name()
    if name == "numba":
        from . import _numba

        return _numba
    if name == "numpy":
        from . import _numpy

        return _numpy
    raise ValueError(f"unknown kernel backend {name!r}")


def set_threads(n: int | None) -> None:
    """Cap worker threads of the numba backend (no-op for numpy)."""
    if n is None or default_backend_name() != "numba":
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
