"""NumPy reference implementation of the 2D convolution kernels.

Forward and both gradients are expressed as strided window views contracted
with einsum, which dispatches to BLAS; on many shapes this fallback is
competitive with (or faster than) the compiled loops.  See
benchmarks/bench_conv.py for measured numbers.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _out_size(size: int, k: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - k) // stride + 1


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """View of shape [B, C, OH, OW, kh, kw] over an already padded input."""
    b, c, h, w = x.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    sb, sc, sh, sw = x.strides
    return as_strided(
        x,
        shape=(b, c, oh, ow, kh, kw),
        strides=(sb, sc, sh * stride, sw * stride, sh, sw),
        writeable=False,
    )


def _pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d_forward(x: np.ndarray, w: np.ndarray, stride: int = 1, pad: int = 0) -> np.ndarray:
    """Cross-correlate x [B,Ci,H,W] with w [Co,Ci,kh,kw] -> [B,Co,OH,OW]."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    win = _windows(_pad(x, pad), w.shape[2], w.shape[3], stride)
    return np.einsum("bihwkl,oikl->bohw", win, w, optimize=True)


def conv2d_grad_weight(x: np.ndarray, gout: np.ndarray, kh: int, kw: int,
                       stride: int = 1, pad: int = 0) -> np.ndarray:
    """d(loss)/d(w) given upstream gradient gout [B,Co,OH,OW]."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    gout = np.ascontiguousarray(gout, dtype=np.float64)
    win = _windows(_pad(x, pad), kh, kw, stride)
    return np.einsum("bihwkl,bohw->oikl", win, gout, optimize=True)


def conv2d_grad_input(w: np.ndarray, gout: np.ndarray, h: int, wd: int,
                      stride: int = 1, pad: int = 0) -> np.ndarray:
    """d(loss)/d(x) for an input of spatial size h x wd.

    Implemented as the transposed convolution: dilate gout by the stride,
    pad by (k-1-pad) plus the stride remainder on the far edges, and
    cross-correlate with the spatially flipped kernel (channels swapped).
    """
    w = np.ascontiguousarray(w, dtype=np.float64)
    gout = np.ascontiguousarray(gout, dtype=np.float64)
    b, co, oh, ow = gout.shape
    kh, kw = w.shape[2], w.shape[3]
    if pad > kh - 1 or pad > kw - 1:
        raise ValueError(f"pad {pad} larger than kernel allows ({kh}x{kw})")
    extra_h = (h + 2 * pad - kh) % stride
    extra_w = (wd + 2 * pad - kw) % stride
    dh = (oh - 1) * stride + 1
    dw = (ow - 1) * stride + 1
    dil = np.zeros((b, co, dh + extra_h, dw + extra_w), dtype=np.float64)
    dil[:, :, 0:dh:stride, 0:dw:stride] = gout
    dil = np.pad(dil, ((0, 0), (0, 0),
                       (kh - 1 - pad, kh - 1 - pad),
                       (kw - 1 - pad, kw - 1 - pad)))
    w_flip = w[:, :, ::-1, ::-1]
    win = _windows(dil, kh, kw, 1)
    return np.einsum("bohwkl,oikl->bihw", win, w_flip, optimize=True)
