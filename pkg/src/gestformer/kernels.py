"""Backend selection for the sliding-window kernels.

The compiled extension is used when it imports; otherwise the numpy fallback.
``use_backend`` switches at runtime (tests and the benchmark run both).
"""

import logging

from . import _pykernels

logger = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
    logger.debug("compiled kernels unavailable; using numpy fallback")

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = _BACKENDS.get("cython", _pykernels)


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def use_backend(name):
    """Select the kernel backend by name; returns the previously active name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; have {available_backends()}")
    previous = backend_name()
    _active = _BACKENDS[name]
    return previous


def dwconv2d_forward(x, w):
    return _active.dwconv2d_forward(x, w)


def dwconv2d_backward(x, w, g):
    return _active.dwconv2d_backward(x, w, g)


def avgpool2d_forward(x, k):
    return _active.avgpool2d_forward(x, k)


def avgpool2d_backward(g, k):
    return _active.avgpool2d_backward(g, k)


def haar_forward(x):
    return _active.haar_forward(x)


def haar_inverse(s):
    return _active.haar_inverse(s)
