"""Kernel backend selection.

Hot numerical kernels (swing-equation integration, conv1d, LSTM) exist in
two functionally identical implementations: a numba ``@njit`` version and
a vectorised pure-numpy version.  The environment variable

    GRIDINERTIA_BACKEND = auto | numba | numpy

picks one at import time.  ``auto`` (the default) uses numba when it is
importable and falls back to numpy otherwise; ``numba`` demands numba and
fails loudly if it is missing; ``numpy`` forces the fallback, which is
handy for debugging and for the backend-agreement tests.
"""

import os

from .errors import ConfigError

ENV_VAR = "GRIDINERTIA_BACKEND"
_CHOICES = ("auto", "numba", "numpy")


def _resolve():
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice not in _CHOICES:
        raise ConfigError(
            f"{ENV_VAR} must be one of {_CHOICES}, got {choice!r}"
        )
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        if choice == "numba":
            raise ConfigError(
                f"{ENV_VAR}=numba requested but numba is not importable"
            ) from None
        return "numpy"


BACKEND = _resolve()


def backend_name():
    return BACKEND


def using_numba():
    return BACKEND == "numba"
