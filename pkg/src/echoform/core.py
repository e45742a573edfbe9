"""Shared value types for the imaging pipeline.

Complex images are plain 2D ``numpy`` arrays of ``complex128``; this module
provides the validation helpers plus the radar parameter block, the seeded
random-stream handle, and the row/column sampling schemes used to model
reduced acquisition.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

C_LIGHT = 299792458.0  # speed of light [m/s]

RANGE = "range"
AZIMUTH = "azimuth"


class ShapeError(ValueError):
    """An array does not have the shape an operation requires."""


class NumericError(ArithmeticError):
    """A numeric invariant broke (NaN/Inf reached the pipeline)."""


class FormatError(ValueError):
    """A binary/text file does not match its declared format."""


def as_image(a, name: str = "image") -> np.ndarray:
    """Validate and coerce `a` to a finite 2D complex128 array."""
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.size == 0:
        raise ShapeError(f"{name} must be non-empty, got shape {arr.shape}")
    arr = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Rng:
    """Deterministic random stream handle.

    Wraps a 64-bit seed feeding numpy's PCG64; `generator()` returns a fresh
    stream each call, so everything drawn from one `Rng` value is a pure
    function of its seed.  `split(*keys)` derives an independent child stream
    via `SeedSequence` spawn keys (string keys are hashed with BLAKE2s), which
    keeps unrelated consumers decorrelated without shared state.
    """

    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def split(self, *keys: int | str) -> "Rng":
        ints = tuple(_key_to_int(k) for k in keys)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=ints)
        return Rng(int(seq.generate_state(1, np.uint64)[0]))


def _key_to_int(key: int | str) -> int:
    if isinstance(key, str):
        return int.from_bytes(hashlib.blake2s(key.encode(), digest_size=8).digest(), "little")
    return int(key)


@dataclass(frozen=True)
class SarSystemParams:
    """Radar constants plus grid sizes; source of all phase masks."""

    bandwidth: float          # transmitted chirp bandwidth [Hz]
    pulse_width: float        # pulse duration [s]
    prf: float                # pulse repetition frequency [Hz]
    carrier_freq: float       # [Hz]
    slant_range_ref: float    # reference slant range [m]
    velocity: float           # equivalent platform velocity [m/s]
    rows: int                 # range bins M
    cols: int                 # azimuth bins N
    range_sample_rate: float = 0.0  # [Hz]; 0 means "use 1.1 x bandwidth"

    def __post_init__(self):
        if self.range_sample_rate == 0.0:
            object.__setattr__(self, "range_sample_rate", 1.1 * self.bandwidth)
        for name in ("bandwidth", "pulse_width", "prf", "carrier_freq",
                     "slant_range_ref", "velocity", "range_sample_rate"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.range_sample_rate < self.bandwidth:
            raise ValueError(
                f"range_sample_rate {self.range_sample_rate:g} below bandwidth "
                f"{self.bandwidth:g} (range Nyquist violated)"
            )
        # Migration factor must stay real and positive over the whole azimuth
        # frequency grid, which spans +-prf/2.
        if C_LIGHT * (self.prf / 2.0) >= 2.0 * self.velocity * self.carrier_freq:
            raise ValueError(
                "PRF too high for velocity/carrier: migration factor leaves (0,1]"
            )

    @property
    def chirp_rate(self) -> float:
        """Range chirp rate K_r [Hz/s]."""
        return self.bandwidth / self.pulse_width

    @classmethod
    def spaceborne_c_band(cls, rows: int, cols: int, **overrides) -> "SarSystemParams":
        """Canonical C-band strip-map constants used by the CLI and tests."""
        base = dict(
            bandwidth=60e6,
            pulse_width=45e-6,
            prf=1420.0,
            carrier_freq=5.4e9,
            slant_range_ref=850e3,
            velocity=7500.0,
        )
        base.update(overrides)
        return cls(rows=rows, cols=cols, **base)


@dataclass(frozen=True, eq=False)
class SamplingScheme:
    """Seeded selection of rows (range) or columns (azimuth) of an image."""

    axis: str                 # RANGE or AZIMUTH
    full_size: int
    kept_indices: np.ndarray  # sorted distinct int64, all < full_size
    rate: float
    seed: int

    def __post_init__(self):
        if self.axis not in (RANGE, AZIMUTH):
            raise ValueError(f"axis must be '{RANGE}' or '{AZIMUTH}', got {self.axis!r}")
        idx = np.asarray(self.kept_indices, dtype=np.int64)
        object.__setattr__(self, "kept_indices", idx)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("kept_indices must be a non-empty 1D index list")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("kept_indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.full_size:
            raise ValueError("kept_indices out of range")

    @property
    def kept_size(self) -> int:
        return int(self.kept_indices.size)

    @property
    def is_identity(self) -> bool:
        return self.kept_size == self.full_size


def make_sampling(axis: str, full_size: int, rate: float, rng: Rng) -> SamplingScheme:
    """Draw ceil(rate*full_size) distinct indices uniformly, then sort.

    Pure function of (axis, full_size, rate, rng.seed): regenerating with the
    same arguments yields the identical scheme.
    """
    if full_size < 1:
        raise ValueError(f"full_size must be >= 1, got {full_size}")
    if not (0.0 < rate <= 1.0):
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    # Tiny backoff so 10 * 0.1 rounding up to 1.0000000000000002 keeps ceil at 1.
    k = max(1, min(full_size, math.ceil(rate * full_size - 1e-9)))
    gen = rng.split("sampling", axis).generator()
    kept = np.sort(gen.choice(full_size, size=k, replace=False))
    return SamplingScheme(axis=axis, full_size=full_size, kept_indices=kept,
                          rate=rate, seed=rng.seed)


def full_sampling(axis: str, full_size: int) -> SamplingScheme:
    """Rate-1.0 scheme keeping every index (identity)."""
    return SamplingScheme(axis=axis, full_size=full_size,
                          kept_indices=np.arange(full_size, dtype=np.int64),
                          rate=1.0, seed=0)


def apply_sampling(scheme: SamplingScheme, a: np.ndarray) -> np.ndarray:
    """Select the kept rows (range axis) or columns (azimuth axis) of `a`."""
    arr = as_image(a, "sampling input")
    ax = 0 if scheme.axis == RANGE else 1
    if arr.shape[ax] != scheme.full_size:
        raise ShapeError(
            f"{scheme.axis} size {arr.shape[ax]} does not match scheme "
            f"full_size {scheme.full_size}"
        )
    return arr[scheme.kept_indices, :] if ax == 0 else arr[:, scheme.kept_indices]


def adjoint_sampling(scheme: SamplingScheme, b: np.ndarray) -> np.ndarray:
    """Zero-fill upsampling: adjoint of `apply_sampling` under <.,.>."""
    arr = as_image(b, "sampling adjoint input")
    ax = 0 if scheme.axis == RANGE else 1
    if arr.shape[ax] != scheme.kept_size:
        raise ShapeError(
            f"{scheme.axis} size {arr.shape[ax]} does not match scheme "
            f"kept size {scheme.kept_size}"
        )
    if ax == 0:
        out = np.zeros((scheme.full_size, arr.shape[1]), dtype=np.complex128)
        out[scheme.kept_indices, :] = arr
    else:
        out = np.zeros((arr.shape[0], scheme.full_size), dtype=np.complex128)
        out[:, scheme.kept_indices] = arr
    return out
