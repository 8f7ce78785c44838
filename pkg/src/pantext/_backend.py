"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when importable, otherwise
``_pykernels``. Both expose the same functions; :func:`kernels` returns the
active module. :func:`set_backend` switches at runtime (tests, benchmarks).
"""

import logging

from pantext import _pykernels

log = logging.getLogger(__name__)

try:
    from pantext import _ckernels
except ImportError:  # extension not built
    _ckernels = None
    log.debug("compiled kernels unavailable, using pure-Python fallback")

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["native"] = _ckernels

_active = _ckernels if _ckernels is not None else _pykernels


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    """Select ``"native"`` or ``"python"`` kernels for subsequent calls."""
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}") from None


def backend_name():
    return "native" if _active is _ckernels and _ckernels is not None else "python"


def kernels():
    return _active
