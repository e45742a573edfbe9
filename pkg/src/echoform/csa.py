"""Chirp-scaling image formation and its exact adjoint.

The imaging operator runs a fixed chain of unitary FFTs and three unit-modulus
phase masks: chirp scaling in the range-Doppler domain, range compression plus
bulk migration correction in the 2D frequency domain, then azimuth compression
with a residual phase term back in the range-Doppler domain.  Because every
stage is unitary, the echo-synthesis operator (conjugate masks, reversed
order) is simultaneously the exact inverse and the exact adjoint of image
formation.  Composing with row/column sampling gives the forward observation
map and its adjoint used by the reconstructions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    AZIMUTH,
    C_LIGHT,
    RANGE,
    Rng,
    SamplingScheme,
    SarSystemParams,
    ShapeError,
    adjoint_sampling,
    apply_sampling,
    as_image,
    full_sampling,
)


def fft_order_index(n: int) -> np.ndarray:
    """Integer harmonics [0..n/2-1, -n/2..-1] in FFT bin order."""
    k = np.arange(n, dtype=np.int64)
    k[k >= (n + 1) // 2] -= n
    return k


@dataclass(frozen=True, eq=False)
class PhasePlan:
    """The three precomputed masks for one parameter block.

    All masks are rows x cols complex128 with unit modulus; theta_s and
    theta_a apply in the range-Doppler domain, theta_r in the 2D frequency
    domain.
    """

    params: SarSystemParams
    theta_s: np.ndarray
    theta_r: np.ndarray
    theta_a: np.ndarray


def build_phase_plan(params: SarSystemParams) -> PhasePlan:
    p = params
    m, n = p.rows, p.cols
    f0 = p.carrier_freq
    v = p.velocity
    kr = p.chirp_rate
    r_ref = p.slant_range_ref
    fs = p.range_sample_rate

    # Azimuth frequency bins are exact integer multiples of prf/n, so plans
    # built for n and 2n share bitwise-identical values on the common bins.
    f_eta = fft_order_index(n).astype(np.float64)[None, :] * (p.prf / n)
    f_tau = fft_order_index(m).astype(np.float64)[:, None] * (fs / m)
    # Fast time centered on the reference range.
    tau = 2.0 * r_ref / C_LIGHT + (np.arange(m, dtype=np.float64)[:, None] - m / 2.0) / fs

    d_sq = 1.0 - (C_LIGHT * f_eta / (2.0 * v * f0)) ** 2
    if np.min(d_sq) <= 0.0:
        raise ValueError("migration factor not positive over the azimuth grid")
    d = np.sqrt(d_sq)

    km_den = 1.0 - kr * C_LIGHT * r_ref * f_eta**2 / (2.0 * v**2 * f0**3 * d**3)
    if np.any(km_den == 0.0):
        raise ValueError("modified chirp rate is singular on this grid")
    km = kr / km_den
    cs = 1.0 / d - 1.0

    theta_s = np.exp(1j * np.pi * km * cs * (tau - 2.0 * r_ref / (C_LIGHT * d)) ** 2)
    theta_r = np.exp(
        1j * np.pi * f_tau**2 / (km * (1.0 + cs))
        + 1j * 4.0 * np.pi * r_ref * cs * f_tau / C_LIGHT
    )
    r_tau = C_LIGHT * tau / 2.0
    theta_a_col = np.exp(
        1j * 4.0 * np.pi * r_tau * f0 * d / C_LIGHT
        - 1j * 4.0 * np.pi * km * (1.0 + cs) * cs * (r_tau - r_ref) ** 2 / C_LIGHT**2
    )
    theta_a = np.broadcast_to(theta_a_col, (m, n)).copy() if theta_a_col.shape != (m, n) else theta_a_col

    for name, mask in (("theta_s", theta_s), ("theta_r", theta_r), ("theta_a", theta_a)):
        if not np.all(np.isfinite(mask)):
            raise ValueError(f"{name} has non-finite entries for these parameters")
    return PhasePlan(params=p, theta_s=theta_s, theta_r=theta_r, theta_a=theta_a)


def _check_grid(plan: PhasePlan, a: np.ndarray, name: str) -> np.ndarray:
    arr = as_image(a, name)
    want = (plan.params.rows, plan.params.cols)
    if arr.shape != want:
        raise ShapeError(f"{name} shape {arr.shape} does not match plan grid {want}")
    return arr


def form_image(plan: PhasePlan, echo: np.ndarray) -> np.ndarray:
    """Focus a full-grid echo into a scattering image (unitary FFT chain)."""
    w = _check_grid(plan, echo, "echo")
    w = np.fft.fft(w, axis=1, norm="ortho")
    w = w * plan.theta_s
    w = np.fft.fft(w, axis=0, norm="ortho")
    w = w * plan.theta_r
    w = np.fft.ifft(w, axis=0, norm="ortho")
    w = w * plan.theta_a
    return np.fft.ifft(w, axis=1, norm="ortho")


def form_echo(plan: PhasePlan, image: np.ndarray) -> np.ndarray:
    """Synthesize the echo a scene would produce: exact inverse and adjoint
    of `form_image` (conjugate masks, reversed order)."""
    w = _check_grid(plan, image, "image")
    w = np.fft.fft(w, axis=1, norm="ortho")
    w = w * np.conj(plan.theta_a)
    w = np.fft.fft(w, axis=0, norm="ortho")
    w = w * np.conj(plan.theta_r)
    w = np.fft.ifft(w, axis=0, norm="ortho")
    w = w * np.conj(plan.theta_s)
    return np.fft.ifft(w, axis=1, norm="ortho")


@dataclass(frozen=True, eq=False)
class OperatorContext:
    """A phase plan plus the row/column sampling used for observation."""

    plan: PhasePlan
    s_range: SamplingScheme
    s_azimuth: SamplingScheme

    def __post_init__(self):
        p = self.plan.params
        if self.s_range.axis != RANGE or self.s_range.full_size != p.rows:
            raise ShapeError("range scheme does not match the plan's row count")
        if self.s_azimuth.axis != AZIMUTH or self.s_azimuth.full_size != p.cols:
            raise ShapeError("azimuth scheme does not match the plan's column count")

    @property
    def image_shape(self) -> tuple[int, int]:
        return (self.plan.params.rows, self.plan.params.cols)

    @property
    def echo_shape(self) -> tuple[int, int]:
        return (self.s_range.kept_size, self.s_azimuth.kept_size)

    @classmethod
    def full(cls, plan: PhasePlan) -> "OperatorContext":
        p = plan.params
        return cls(plan=plan,
                   s_range=full_sampling(RANGE, p.rows),
                   s_azimuth=full_sampling(AZIMUTH, p.cols))


def observe(ctx: OperatorContext, image: np.ndarray) -> np.ndarray:
    """Scene -> downsampled echo: synthesize then keep sampled rows/columns."""
    echo = form_echo(ctx.plan, image)
    return apply_sampling(ctx.s_azimuth, apply_sampling(ctx.s_range, echo))


def backproject(ctx: OperatorContext, echo_down: np.ndarray) -> np.ndarray:
    """Adjoint of `observe`: zero-fill to the full grid, then focus."""
    arr = as_image(echo_down, "downsampled echo")
    if arr.shape != ctx.echo_shape:
        raise ShapeError(
            f"downsampled echo shape {arr.shape} does not match context {ctx.echo_shape}"
        )
    full = adjoint_sampling(ctx.s_range, adjoint_sampling(ctx.s_azimuth, arr))
    return form_image(ctx.plan, full)


def estimate_lipschitz(ctx: OperatorContext, iters: int = 30, rng: Rng = Rng(0)) -> float:
    """Largest eigenvalue of X -> 2 * backproject(observe(X)) by power iteration.

    The operator is Hermitian positive semidefinite (twice a projection), so
    the Rayleigh quotient converges monotonically from a random start; at full
    sampling it equals 2 after the first iteration.
    """
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    gen = rng.split("lipschitz").generator()
    shape = ctx.image_shape
    v = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    lam = 0.0
    for _ in range(iters):
        w = 2.0 * backproject(ctx, observe(ctx, v))
        lam = float(np.vdot(v, w).real)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return max(lam, 0.0)
