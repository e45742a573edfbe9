"""The two learnable regularizer architectures.

Both map a [B,2,H,W] feature pair to the same shape.  The pyramid variant
(swift) trades resolution for speed: stride-2 downsampling stages, 1x1
channel doubling, then top-down fusion of bilinearly upsampled coarse maps
with same-scale maps.  The full-resolution variant (pro) keeps spatial size
fixed: K channel-doubling conv cells, K mirrored halving cells, and an
identity skip around the whole stack so zero weights give an exact identity.
"""

from __future__ import annotations

import numpy as np

from ..core import ShapeError
from . import autodiff as ad
from .layers import batch_norm

WEIGHT, BIAS, GAMMA, BETA = "weight", "bias", "gamma", "beta"


def swift_plan(base_channels: int, pyramid_levels: int) -> tuple[list, list]:
    """(parameter plan, norm-buffer plan) for one swift regularizer.

    The parameter plan is a list of (name, shape, kind) in declaration
    order; the buffer plan lists (name, channels) for running statistics.
    """
    c = base_channels
    params: list[tuple[str, tuple[int, ...], str]] = [
        ("lift.w", (c, 2, 3, 3), WEIGHT),
        ("lift.b", (c,), BIAS),
    ]
    buffers: list[tuple[str, int]] = []
    for i in range(1, pyramid_levels):
        ci = c * 2 ** (i - 1)
        params += [
            (f"down{i}.c1.w", (ci, ci, 3, 3), WEIGHT),
            (f"down{i}.c1.b", (ci,), BIAS),
            (f"down{i}.bn.gamma", (ci,), GAMMA),
            (f"down{i}.bn.beta", (ci,), BETA),
            (f"down{i}.c2.w", (2 * ci, ci, 1, 1), WEIGHT),
            (f"down{i}.c2.b", (2 * ci,), BIAS),
        ]
        buffers.append((f"down{i}.bn", ci))
    for i in range(pyramid_levels - 1, 0, -1):
        ci = c * 2 ** (i - 1)
        params += [
            (f"fuse{i}.w", (ci, 3 * ci, 3, 3), WEIGHT),
            (f"fuse{i}.b", (ci,), BIAS),
        ]
    params += [
        ("proj.w", (2, c, 3, 3), WEIGHT),
        ("proj.b", (2,), BIAS),
    ]
    return params, buffers


def swift_forward(tensors: dict[str, ad.Tensor], buffers: dict[str, dict],
                  x: ad.Tensor, pyramid_levels: int, train: bool,
                  instance_norm: bool = False) -> ad.Tensor:
    h, w = x.value.shape[2], x.value.shape[3]
    div = 2**pyramid_levels
    if h % div or w % div:
        raise ShapeError(
            f"spatial dims {h}x{w} not divisible by 2^{pyramid_levels}"
        )
    feats = [ad.relu(ad.conv2d(x, tensors["lift.w"], tensors["lift.b"], 1, 1))]
    for i in range(1, pyramid_levels):
        d = ad.conv2d(feats[-1], tensors[f"down{i}.c1.w"],
                      tensors[f"down{i}.c1.b"], stride=2, pad=1)
        d = batch_norm(d, tensors[f"down{i}.bn.gamma"], tensors[f"down{i}.bn.beta"],
                       buffers.get(f"down{i}.bn"), train, instance=instance_norm)
        d = ad.relu(d)
        d = ad.conv2d(d, tensors[f"down{i}.c2.w"], tensors[f"down{i}.c2.b"], 1, 0)
        feats.append(d)
    u = feats[-1]
    for i in range(pyramid_levels - 1, 0, -1):
        up = ad.upsample2x(u)
        cat = ad.concat_channels(feats[i - 1], up)
        u = ad.relu(ad.conv2d(cat, tensors[f"fuse{i}.w"], tensors[f"fuse{i}.b"], 1, 1))
    return ad.conv2d(u, tensors["proj.w"], tensors["proj.b"], 1, 1)


def pro_plan(base_channels: int, pair_count: int) -> tuple[list, list]:
    """(parameter plan, empty buffer plan) for one pro regularizer."""
    c = base_channels
    params: list[tuple[str, tuple[int, ...], str]] = [
        ("lift.w", (c, 2, 3, 3), WEIGHT),
        ("lift.b", (c,), BIAS),
    ]
    for i in range(1, pair_count + 1):
        params += [
            (f"double{i}.w", (c * 2**i, c * 2 ** (i - 1), 3, 3), WEIGHT),
            (f"double{i}.b", (c * 2**i,), BIAS),
        ]
    for i in range(pair_count, 0, -1):
        params += [
            (f"halve{i}.w", (c * 2 ** (i - 1), c * 2**i, 3, 3), WEIGHT),
            (f"halve{i}.b", (c * 2 ** (i - 1),), BIAS),
        ]
    params += [
        ("proj.w", (2, c, 3, 3), WEIGHT),
        ("proj.b", (2,), BIAS),
    ]
    return params, []


def pro_forward(tensors: dict[str, ad.Tensor], x: ad.Tensor,
                pair_count: int) -> ad.Tensor:
    h = ad.relu(ad.conv2d(x, tensors["lift.w"], tensors["lift.b"], 1, 1))
    for i in range(1, pair_count + 1):
        h = ad.relu(ad.conv2d(h, tensors[f"double{i}.w"], tensors[f"double{i}.b"], 1, 1))
    for i in range(pair_count, 0, -1):
        h = ad.relu(ad.conv2d(h, tensors[f"halve{i}.w"], tensors[f"halve{i}.b"], 1, 1))
    out = ad.conv2d(h, tensors["proj.w"], tensors["proj.b"], 1, 1)
    # Identity skip around the whole stack, at the 2-channel level.
    return ad.add(x, out)
