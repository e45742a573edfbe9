"""Scene generation, echo synthesis, and the on-disk formats.

Scenes are complex reflectivity maps: isolated point scatterers with random
phase, or smooth-textured distributed scenes thresholded to a target support
fraction.  Synthesis runs the scene through echo formation, optionally adds
complex white noise scaled to an exact SNR, and records the sampling schemes
so a manifest regenerates the identical sample end to end.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .core import (
    AZIMUTH,
    RANGE,
    FormatError,
    Rng,
    SamplingScheme,
    SarSystemParams,
    ShapeError,
    as_image,
    full_sampling,
    make_sampling,
)
from .csa import OperatorContext, build_phase_plan, form_echo

SCENE_KINDS = ("point_targets", "distributed", "from_file")


@dataclass(frozen=True, eq=False)
class Scene:
    """Ground-truth reflectivity plus the settings that regenerate it."""

    image: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        img = as_image(self.image, "scene")
        object.__setattr__(self, "image", img)
        if self.kind not in SCENE_KINDS:
            raise ValueError(f"kind must be one of {SCENE_KINDS}, got {self.kind!r}")
        if not np.any(img):
            raise ValueError("scene must have nonzero norm")


@dataclass(frozen=True, eq=False)
class Sample:
    """One synthesized observation and everything needed to reproduce it."""

    scene: Scene
    echo_full: np.ndarray
    echo_down: np.ndarray
    scheme_range: SamplingScheme
    scheme_azimuth: SamplingScheme
    noise_snr_db: float | None = None


def gen_point_targets(rows: int, cols: int, count: int, rng: Rng,
                      amp_lo: float = 0.5, amp_hi: float = 1.5) -> Scene:
    """Distinct random pixels with uniform magnitudes and uniform phases."""
    if rows < 1 or cols < 1:
        raise ValueError(f"grid must be at least 1x1, got {rows}x{cols}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if count > rows * cols // 4:
        raise ValueError(
            f"count {count} exceeds a quarter of the grid ({rows * cols // 4})"
        )
    if not (0.0 < amp_lo <= amp_hi):
        raise ValueError(f"amplitude range must satisfy 0 < lo <= hi, got ({amp_lo}, {amp_hi})")
    gen = rng.split("point").generator()
    flat = gen.choice(rows * cols, size=count, replace=False)
    mags = gen.uniform(amp_lo, amp_hi, size=count)
    phases = gen.uniform(0.0, 2.0 * np.pi, size=count)
    img = np.zeros((rows, cols), dtype=np.complex128)
    img.flat[flat] = mags * np.exp(1j * phases)
    return Scene(image=img, kind="point_targets",
                 meta={"count": count, "amp_lo": amp_lo, "amp_hi": amp_hi,
                       "seed": rng.seed})


def gen_distributed(rows: int, cols: int, sparsity: float, rng: Rng,
                    smooth_sigma: float = 2.0) -> Scene:
    """Smoothed-noise texture kept on its top `sparsity` fraction of pixels.

    The support size is exactly round(sparsity * rows * cols); magnitudes are
    the normalized texture values (offset so every kept pixel is nonzero) and
    phases are uniform.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"grid must be at least 1x1, got {rows}x{cols}")
    if not (0.0 < sparsity <= 1.0):
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")
    k = int(round(sparsity * rows * cols))
    if k < 1:
        raise ValueError(f"sparsity {sparsity} keeps zero pixels on {rows}x{cols}")
    gen = rng.split("distributed").generator()
    noise = gen.standard_normal((rows, cols))
    tex = ndimage.gaussian_filter(noise, sigma=smooth_sigma)
    lo, hi = float(tex.min()), float(tex.max())
    tex = (tex - lo) / (hi - lo) if hi > lo else np.ones_like(tex)
    order = np.argsort(tex.ravel())[::-1][:k]
    phases = gen.uniform(0.0, 2.0 * np.pi, size=k)
    img = np.zeros((rows, cols), dtype=np.complex128)
    img.flat[order] = (0.05 + 0.95 * tex.ravel()[order]) * np.exp(1j * phases)
    return Scene(image=img, kind="distributed",
                 meta={"sparsity": sparsity, "smooth_sigma": smooth_sigma,
                       "seed": rng.seed})


def synthesize(ctx: OperatorContext, scene: Scene, snr_db: float | None = None,
               rng: Rng | None = None) -> Sample:
    """Scene -> (full echo, downsampled echo), with optional exact-SNR noise.

    Noise is complex white Gaussian rescaled so that
    10*log10(||echo||^2 / ||noise||^2) equals `snr_db` exactly.
    """
    img = as_image(scene.image, "scene")
    if img.shape != ctx.image_shape:
        raise ShapeError(
            f"scene shape {img.shape} does not match context grid {ctx.image_shape}"
        )
    echo = form_echo(ctx.plan, img)
    if snr_db is not None:
        if rng is None:
            raise ValueError("snr_db given but no rng to draw noise from")
        signal_energy = float(np.vdot(echo, echo).real)
        if signal_energy == 0.0:
            raise ValueError("cannot set an SNR on a zero echo")
        gen = rng.split("noise").generator()
        raw = gen.standard_normal(echo.shape) + 1j * gen.standard_normal(echo.shape)
        raw_energy = float(np.vdot(raw, raw).real)
        target = signal_energy / 10.0 ** (snr_db / 10.0)
        echo = echo + raw * math.sqrt(target / raw_energy)
    down = echo[ctx.s_range.kept_indices, :][:, ctx.s_azimuth.kept_indices]
    return Sample(scene=scene, echo_full=echo, echo_down=down,
                  scheme_range=ctx.s_range, scheme_azimuth=ctx.s_azimuth,
                  noise_snr_db=snr_db)


# --- complex raster file (magic "ARSN") ---

_ARSN_MAGIC = b"ARSN"
_ARSN_VERSION = 1
_ARSN_HEADER = struct.Struct("<4sHBBII")  # magic, version, dtype, reserved, rows, cols


def save_arsn(path, a: np.ndarray) -> None:
    """Write a complex image: 16-byte header then row-major interleaved
    little-endian float64 re/im pairs."""
    arr = as_image(a, "image")
    header = _ARSN_HEADER.pack(_ARSN_MAGIC, _ARSN_VERSION, 0, 0,
                               arr.shape[0], arr.shape[1])
    payload = np.ascontiguousarray(arr).astype("<c16").tobytes()
    Path(path).write_bytes(header + payload)


def load_arsn(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _ARSN_HEADER.size:
        raise FormatError(
            f"{path}: file is {len(raw)} bytes, header needs {_ARSN_HEADER.size}"
        )
    magic, version, dtype, _, rows, cols = _ARSN_HEADER.unpack_from(raw, 0)
    if magic != _ARSN_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != _ARSN_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    if dtype != 0:
        raise FormatError(f"{path}: unsupported dtype tag {dtype} at offset 6")
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: degenerate image {rows}x{cols} in header")
    want = _ARSN_HEADER.size + rows * cols * 16
    if len(raw) != want:
        raise FormatError(
            f"{path}: payload is {len(raw) - _ARSN_HEADER.size} bytes from offset "
            f"{_ARSN_HEADER.size}, expected {rows}x{cols}x16 = {want - _ARSN_HEADER.size}"
        )
    flat = np.frombuffer(raw, dtype="<c16", offset=_ARSN_HEADER.size)
    return flat.reshape(rows, cols).astype(np.complex128)


def export_magnitude_png(path, a: np.ndarray, db_floor: float = -60.0) -> None:
    """8-bit grayscale of the magnitude in dB relative to the image peak.

    The peak maps to 255 and `db_floor` (a negative dB value) to 0; zeros
    clip to the floor.  An all-zero image exports as black.
    """
    if not (db_floor < 0.0):
        raise ValueError(f"db_floor must be negative, got {db_floor}")
    arr = as_image(a, "image")
    mag = np.abs(arr)
    peak = float(mag.max())
    if peak == 0.0:
        gray = np.zeros(arr.shape, dtype=np.uint8)
    else:
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(mag / peak)
        db = np.maximum(db, db_floor)
        gray = np.round((db - db_floor) * (255.0 / -db_floor)).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(Path(path))


# --- key = value manifests ---

def write_manifest(path, entries: dict) -> None:
    lines = [f"{k} = {v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment, blanks are skipped."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise FormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = text.split("=", 1)
        key = key.strip()
        if not key:
            raise FormatError(f"{path}:{lineno}: empty key")
        out[key] = value.strip()
    return out


# --- deterministic datasets ---

@dataclass(frozen=True)
class DatasetSpec:
    """Everything needed to regenerate a dataset bit for bit."""

    rows: int = 16
    cols: int = 16
    seed: int = 0
    rate_range: float = 1.0
    rate_azimuth: float = 1.0
    snr_db: float | None = None
    count_point: int = 16
    count_sparse: int = 8
    count_dense: int = 8
    point_targets: int = 5
    sparsity_sparse: float = 0.1
    sparsity_dense: float = 0.6

    def validate(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        for name in ("count_point", "count_sparse", "count_dense"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.count_point + self.count_sparse + self.count_dense < 1:
            raise ValueError("dataset must contain at least one sample")

    def to_manifest(self) -> dict:
        entries = {
            "rows": self.rows, "cols": self.cols, "seed": self.seed,
            "rate_range": self.rate_range, "rate_azimuth": self.rate_azimuth,
            "count_point": self.count_point, "count_sparse": self.count_sparse,
            "count_dense": self.count_dense, "point_targets": self.point_targets,
            "sparsity_sparse": self.sparsity_sparse,
            "sparsity_dense": self.sparsity_dense,
        }
        if self.snr_db is not None:
            entries["snr_db"] = self.snr_db
        return entries

    @classmethod
    def from_manifest(cls, entries: dict[str, str]) -> "DatasetSpec":
        def get(key, cast, default):
            return cast(entries[key]) if key in entries else default
        try:
            return cls(
                rows=get("rows", int, 16),
                cols=get("cols", int, 16),
                seed=get("seed", int, 0),
                rate_range=get("rate_range", float, 1.0),
                rate_azimuth=get("rate_azimuth", float, 1.0),
                snr_db=get("snr_db", float, None),
                count_point=get("count_point", int, 16),
                count_sparse=get("count_sparse", int, 8),
                count_dense=get("count_dense", int, 8),
                point_targets=get("point_targets", int, 5),
                sparsity_sparse=get("sparsity_sparse", float, 0.1),
                sparsity_dense=get("sparsity_dense", float, 0.6),
            )
        except (TypeError, ValueError) as exc:
            raise FormatError(f"bad dataset manifest value: {exc}") from exc


def make_context(params: SarSystemParams, rate_range: float, rate_azimuth: float,
                 rng: Rng) -> OperatorContext:
    """Build the operator context for a parameter block and sampling rates."""
    for name, rate in (("rate_range", rate_range), ("rate_azimuth", rate_azimuth)):
        if not (0.0 < rate <= 1.0):
            raise ValueError(f"{name} must lie in (0, 1], got {rate}")
    plan = build_phase_plan(params)
    s_rg = (full_sampling(RANGE, params.rows) if rate_range == 1.0
            else make_sampling(RANGE, params.rows, rate_range, rng.split("range")))
    s_az = (full_sampling(AZIMUTH, params.cols) if rate_azimuth == 1.0
            else make_sampling(AZIMUTH, params.cols, rate_azimuth, rng.split("azimuth")))
    return OperatorContext(plan=plan, s_range=s_rg, s_azimuth=s_az)


def build_dataset(ctx: OperatorContext, spec: DatasetSpec) -> list[Sample]:
    """Point and distributed scenes in the proportions `spec` asks for, all
    sharing `ctx`'s grid and sampling.  Deterministic given `spec.seed`."""
    spec.validate()
    rows, cols = ctx.image_shape
    if (rows, cols) != (spec.rows, spec.cols):
        raise ShapeError(
            f"context grid {ctx.image_shape} does not match the dataset grid "
            f"{spec.rows}x{spec.cols}"
        )
    root = Rng(spec.seed)
    samples: list[Sample] = []
    for i in range(spec.count_point):
        scene = gen_point_targets(rows, cols, spec.point_targets,
                                  root.split("scene", "point", i))
        samples.append(synthesize(ctx, scene, spec.snr_db, root.split("noise", "point", i)))
    for i in range(spec.count_sparse):
        scene = gen_distributed(rows, cols, spec.sparsity_sparse,
                                root.split("scene", "sparse", i))
        samples.append(synthesize(ctx, scene, spec.snr_db, root.split("noise", "sparse", i)))
    for i in range(spec.count_dense):
        scene = gen_distributed(rows, cols, spec.sparsity_dense,
                                root.split("scene", "dense", i))
        samples.append(synthesize(ctx, scene, spec.snr_db, root.split("noise", "dense", i)))
    return samples
