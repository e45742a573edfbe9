"""Image-quality metrics on magnitude images.

All three metrics compare magnitudes, never complex values.  PSNR and SSIM
first map the ground-truth magnitude range onto 0..255 and apply the same
affine map to the estimate, mirroring 8-bit evaluation; NRMSE works on raw
magnitudes.  The PSNR numerator uses the peak value itself (not its square)
to match the convention these numbers are reported in; pass
`convention="squared"` for the textbook definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ShapeError

PSNR_CONVENTIONS = ("literal", "squared")


def _magnitude(a, name: str) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.size == 0:
        raise ShapeError(f"{name} must be a non-empty 2D array, got shape {arr.shape}")
    mag = np.abs(arr).astype(np.float64)
    if not np.all(np.isfinite(mag)):
        raise ValueError(f"{name} contains non-finite entries")
    return mag


def _check_pair(estimate, reference) -> tuple[np.ndarray, np.ndarray]:
    est = _magnitude(estimate, "estimate")
    ref = _magnitude(reference, "reference")
    if est.shape != ref.shape:
        raise ShapeError(f"shape mismatch: estimate {est.shape} vs reference {ref.shape}")
    return est, ref


def _normalize_pair(est: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Affine map sending the reference min/max to 0/255, applied to both
    # images.  A constant reference has no range to map, so both pass through
    # unchanged rather than dividing by zero.
    lo = float(ref.min())
    hi = float(ref.max())
    if hi == lo:
        return est, ref
    scale = 255.0 / (hi - lo)
    return (est - lo) * scale, (ref - lo) * scale


def nrmse(estimate, reference) -> float:
    """Sum of absolute magnitude errors over the sum of reference magnitudes."""
    est, ref = _check_pair(estimate, reference)
    denom = float(ref.sum())
    if denom == 0.0:
        raise ValueError("reference magnitude sums to zero; NRMSE undefined")
    return float(np.abs(ref - est).sum()) / denom


def psnr(estimate, reference, convention: str = "literal") -> float:
    """Peak signal-to-noise ratio in dB on 0..255-normalized magnitudes.

    Returns `math.inf` for an exact match.  `convention="literal"` puts the
    peak itself in the numerator; `"squared"` uses peak**2.
    """
    if convention not in PSNR_CONVENTIONS:
        raise ValueError(f"convention must be one of {PSNR_CONVENTIONS}, got {convention!r}")
    est, ref = _check_pair(estimate, reference)
    est, ref = _normalize_pair(est, ref)
    mse = float(np.mean((ref - est) ** 2))
    if mse == 0.0:
        return math.inf
    peak = float(ref.max())
    if peak <= 0.0:
        raise ValueError("reference peak is not positive; PSNR undefined")
    num = peak if convention == "literal" else peak**2
    return 10.0 * math.log10(num / mse)


def ssim(estimate, reference) -> float:
    """Single-window structural similarity over the whole image.

    Global means/variances/covariance (unbiased, 1/(N-1)) with the standard
    stabilizers C1 = (0.01*255)^2 and C2 = (0.03*255)^2.
    """
    est, ref = _check_pair(estimate, reference)
    if est.size < 2:
        raise ShapeError("SSIM needs at least 2 pixels")
    est, ref = _normalize_pair(est, ref)
    mu_e = float(est.mean())
    mu_r = float(ref.mean())
    n = est.size
    de = est - mu_e
    dr = ref - mu_r
    var_e = float((de * de).sum()) / (n - 1)
    var_r = float((dr * dr).sum()) / (n - 1)
    cov = float((de * dr).sum()) / (n - 1)
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    return ((2.0 * mu_e * mu_r + c1) * (2.0 * cov + c2)) / (
        (mu_e**2 + mu_r**2 + c1) * (var_e + var_r + c2)
    )


@dataclass(frozen=True)
class MetricReport:
    """One evaluated reconstruction, serializable as a CSV row."""

    name: str
    nrmse: float
    psnr_db: float           # math.inf encodes an exact match
    ssim: float
    items_per_s: float = 0.0  # 0 means "not measured"

    @staticmethod
    def header(with_rate: bool = False) -> str:
        base = "name,nrmse,psnr_db,ssim"
        return base + ",items_per_s" if with_rate else base

    def csv_row(self, with_rate: bool | None = None) -> str:
        """One CSV row; `with_rate=None` appends the rate only if measured.
        Pass an explicit bool to keep columns aligned across a table."""
        psnr_txt = "perfect" if math.isinf(self.psnr_db) else f"{self.psnr_db:.6f}"
        row = f"{self.name},{self.nrmse:.6f},{psnr_txt},{self.ssim:.6f}"
        if self.items_per_s > 0.0 if with_rate is None else with_rate:
            row += f",{self.items_per_s:.6f}"
        return row


def evaluate(name: str, estimate, reference, convention: str = "literal",
             items_per_s: float = 0.0) -> MetricReport:
    """Compute all three metrics for one estimate/reference pair."""
    return MetricReport(
        name=name,
        nrmse=nrmse(estimate, reference),
        psnr_db=psnr(estimate, reference, convention=convention),
        ssim=ssim(estimate, reference),
        items_per_s=items_per_s,
    )
