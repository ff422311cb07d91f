"""Hot loops, backed by a Cython extension when it is built.

Set ``STAIRCASE_PURE_PYTHON=1`` to force the numpy fallback. ``BACKEND``
names whichever implementation was selected.
"""
import os

from . import _fallback

BACKEND = "python"
if not os.environ.get("STAIRCASE_PURE_PYTHON"):
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

fwht = _impl.fwht
neuron_sgd_weighted = _impl.neuron_sgd_weighted
neuron_sgd_batched = _impl.neuron_sgd_batched
resnet_sgd = _impl.resnet_sgd


def get_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend {name!r}")
