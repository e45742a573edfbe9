"""Magnitude-domain training loss.

The loss compares magnitudes only (phase-invariant): per sample, the mean
over pixels of the squared magnitude difference, divided by the l2 norm of
the ground truth, then averaged over the batch.  Magnitudes are smoothed as
sqrt(re^2 + im^2 + eps) so the graph stays differentiable at zero.
"""

from __future__ import annotations

import numpy as np

from ..core import ShapeError
from . import autodiff as ad
from .layers import split_complex

EPS = 1e-12


def _gt_norms(gt: np.ndarray) -> np.ndarray:
    norms = np.sqrt((np.abs(gt) ** 2).sum(axis=(1, 2)))
    if np.any(norms == 0.0):
        raise ValueError("ground truth with zero norm; loss undefined")
    return norms


def nmpe(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Plain-array evaluation; accepts (H,W) or (B,H,W) complex arrays."""
    est = np.asarray(estimate, dtype=np.complex128)
    gt = np.asarray(truth, dtype=np.complex128)
    if est.ndim == 2:
        est, gt = est[None], gt[None]
    if est.shape != gt.shape:
        raise ShapeError(f"shape mismatch: {est.shape} vs {gt.shape}")
    norms = _gt_norms(gt)
    mag_e = np.sqrt(est.real**2 + est.imag**2 + EPS)
    mag_g = np.sqrt(gt.real**2 + gt.imag**2 + EPS)
    per = ((mag_e - mag_g) ** 2).mean(axis=(1, 2)) / norms
    return float(per.mean())


def nmpe_graph(output: ad.Tensor, truth: np.ndarray) -> ad.Tensor:
    """In-graph loss on a [B,2,H,W] output tensor vs complex ground truth."""
    gt = np.asarray(truth, dtype=np.complex128)
    if gt.ndim == 2:
        gt = gt[None]
    if (gt.shape[0],) + gt.shape[1:] != (output.value.shape[0],) + tuple(output.value.shape[2:]):
        raise ShapeError(
            f"truth shape {gt.shape} does not match output {output.value.shape}"
        )
    norms = _gt_norms(gt)
    gt2 = split_complex(gt)
    mag_g = np.sqrt(gt2[:, 0] ** 2 + gt2[:, 1] ** 2 + EPS)

    re = ad.slice_channels(output, 0, 1)
    im = ad.slice_channels(output, 1, 2)
    mag_sq = ad.add(ad.add(ad.mul(re, re), ad.mul(im, im)), ad.constant(EPS))
    mag = ad.reshape(ad.sqrt(mag_sq), mag_g.shape)
    diff = ad.sub(mag, ad.constant(mag_g))
    per = ad.mean(ad.mul(diff, diff), axis=(1, 2))
    weighted = ad.mul(per, ad.constant(1.0 / norms))
    return ad.mean(weighted)
