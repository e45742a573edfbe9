"""Convolution kernel backend selection.

Prefers the compiled extension when it imported cleanly; falls back to the
NumPy implementation otherwise.  Set ECHOFORM_NO_EXT=1 to force the fallback
(used by the parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import conv_numpy

if os.environ.get("ECHOFORM_NO_EXT") == "1":
    _impl = conv_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _conv_cy as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = conv_numpy
        BACKEND = "numpy"

conv2d_forward = _impl.conv2d_forward
conv2d_grad_weight = _impl.conv2d_grad_weight
conv2d_grad_input = _impl.conv2d_grad_input

__all__ = ["BACKEND", "conv_numpy", "conv2d_forward", "conv2d_grad_weight",
           "conv2d_grad_input"]
