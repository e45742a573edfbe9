"""Network building blocks on top of the autodiff primitives."""

from __future__ import annotations

import math

import numpy as np

from ..core import ShapeError
from . import autodiff as ad


def split_complex(x: np.ndarray) -> np.ndarray:
    """Complex (H,W) or (B,H,W) -> real feature map [B,2,H,W]."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ShapeError(f"expected 2D or 3D complex input, got shape {arr.shape}")
    return np.stack([arr.real, arr.imag], axis=1)


def merge_complex(f: np.ndarray) -> np.ndarray:
    """Feature map [B,2,H,W] (or [2,H,W]) -> complex (B,H,W) or (H,W)."""
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim == 3:
        if arr.shape[0] != 2:
            raise ShapeError(f"expected 2 channels, got {arr.shape[0]}")
        return arr[0] + 1j * arr[1]
    if arr.ndim != 4 or arr.shape[1] != 2:
        raise ShapeError(f"expected [B,2,H,W], got shape {arr.shape}")
    out = arr[:, 0] + 1j * arr[:, 1]
    return out[0] if out.shape[0] == 1 else out


def glorot_uniform(shape: tuple[int, ...], gen: np.random.Generator) -> np.ndarray:
    """Variance-scaled uniform init for conv kernels [Co,Ci,kh,kw]."""
    fan_in = int(np.prod(shape[1:]))
    fan_out = shape[0] * int(np.prod(shape[2:]))
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-bound, bound, size=shape)


def batch_norm(x: ad.Tensor, gamma: ad.Tensor, beta: ad.Tensor,
               running: dict | None, train: bool,
               momentum: float = 0.1, eps: float = 1e-5,
               instance: bool = False) -> ad.Tensor:
    """Per-channel normalization with learnable affine.

    Batch mode normalizes over (B,H,W) with batch statistics in training and
    the stored running averages at evaluation; instance mode normalizes each
    sample over (H,W) regardless of phase.  `running` holds float64 arrays
    under keys "mean"/"var"; it is mutated (numpy-side, outside the graph)
    only in batch training mode.
    """
    c = x.value.shape[1]
    if instance:
        axes: tuple[int, ...] = (2, 3)
        stat_shape = (x.value.shape[0], c, 1, 1)
    else:
        axes = (0, 2, 3)
        stat_shape = (1, c, 1, 1)

    if instance or train:
        mu = ad.mean(x, axis=axes, keepdims=True)
        centered = ad.sub(x, mu)
        var = ad.mean(ad.mul(centered, centered), axis=axes, keepdims=True)
        if train and not instance and running is not None:
            n = float(np.prod([x.value.shape[i] for i in axes]))
            unbiased = var.value.reshape(c) * (n / max(n - 1.0, 1.0))
            running["mean"] *= 1.0 - momentum
            running["mean"] += momentum * mu.value.reshape(c)
            running["var"] *= 1.0 - momentum
            running["var"] += momentum * unbiased
    else:
        if running is None:
            raise ValueError("evaluation-mode batch norm needs running statistics")
        mu = ad.constant(running["mean"].reshape(stat_shape))
        var = ad.constant(running["var"].reshape(stat_shape))
        centered = ad.sub(x, mu)

    inv_std = ad.power(ad.add(var, ad.constant(eps)), -0.5)
    xhat = ad.mul(centered, inv_std)
    gamma4 = ad.reshape(gamma, (1, c, 1, 1))
    beta4 = ad.reshape(beta, (1, c, 1, 1))
    return ad.add(ad.mul(xhat, gamma4), beta4)
