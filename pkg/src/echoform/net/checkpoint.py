"""Checkpoint file for trained network parameters.

Layout: magic "ARSW", u16 version, u8 variant tag, u8 flags, then the config
block (u32 num_layers, base_channels, pyramid_levels, pair_count, rows, cols;
u64 seed), then every parameter as little-endian float64 in declaration
order: rho_t, mu_t, eta_t, the per-layer weight arrays, and finally the
normalization running statistics (mean then variance per norm).  The loader
rebuilds the shape plan from the config and rejects any size mismatch.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..core import FormatError
from .model import NetConfig, NetParams

_MAGIC = b"ARSW"
_VERSION = 1
_HEADER = struct.Struct("<4sHBB")
_CONFIG = struct.Struct("<IIIIIIQ")
_VARIANT_TAGS = {"swift": 0, "pro": 1}
_TAG_VARIANTS = {v: k for k, v in _VARIANT_TAGS.items()}
_FLAG_SHARED = 1
_FLAG_INSTANCE = 2


def _ordered_buffers(cfg: NetConfig) -> list[str]:
    _, buffer_plan = cfg.regularizer_plan()
    return [f"{prefix}.{name}"
            for prefix in cfg.layer_prefixes()
            for name, _ in buffer_plan]


def save_checkpoint(path, cfg: NetConfig, params: NetParams) -> None:
    cfg.validate()
    params.check_finite()
    flags = (_FLAG_SHARED if cfg.share_weights else 0) \
        | (_FLAG_INSTANCE if cfg.norm_mode == "instance" else 0)
    blob = bytearray()
    blob += _HEADER.pack(_MAGIC, _VERSION, _VARIANT_TAGS[cfg.variant], flags)
    blob += _CONFIG.pack(cfg.num_layers, cfg.base_channels, cfg.pyramid_levels,
                         cfg.pair_count, cfg.rows, cfg.cols, cfg.seed)
    blob += np.asarray([params.rho_t, params.mu_t, params.eta_t],
                       dtype="<f8").tobytes()
    for name in params.weight_names:
        blob += np.ascontiguousarray(params.weights[name], dtype="<f8").tobytes()
    for name in _ordered_buffers(cfg):
        blob += np.ascontiguousarray(params.buffers[name]["mean"], dtype="<f8").tobytes()
        blob += np.ascontiguousarray(params.buffers[name]["var"], dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path) -> tuple[NetConfig, NetParams]:
    raw = Path(path).read_bytes()
    need = _HEADER.size + _CONFIG.size
    if len(raw) < need:
        raise FormatError(f"{path}: file is {len(raw)} bytes, header needs {need}")
    magic, version, tag, flags = _HEADER.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    if tag not in _TAG_VARIANTS:
        raise FormatError(f"{path}: unknown variant tag {tag} at offset 6")
    num_layers, base_c, levels, pairs, rows, cols, seed = \
        _CONFIG.unpack_from(raw, _HEADER.size)
    cfg = NetConfig(
        variant=_TAG_VARIANTS[tag], num_layers=num_layers, rows=rows, cols=cols,
        base_channels=base_c, pyramid_levels=levels, pair_count=pairs, seed=seed,
        share_weights=bool(flags & _FLAG_SHARED),
        norm_mode="instance" if flags & _FLAG_INSTANCE else "batch",
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise FormatError(f"{path}: invalid config block: {exc}") from exc

    plan, buffer_plan = cfg.regularizer_plan()
    names: list[tuple[str, tuple[int, ...]]] = []
    for prefix in cfg.layer_prefixes():
        for name, shape, _ in plan:
            names.append((f"{prefix}.{name}", shape))
    buffer_names = _ordered_buffers(cfg)
    buffer_sizes = {f"{prefix}.{bname}": ch
                    for prefix in cfg.layer_prefixes()
                    for bname, ch in buffer_plan}

    count = 3 + sum(int(np.prod(s)) for _, s in names) \
        + 2 * sum(buffer_sizes[n] for n in buffer_names)
    want = need + 8 * count
    if len(raw) != want:
        raise FormatError(
            f"{path}: payload is {len(raw) - need} bytes from offset {need}, "
            f"config implies {8 * count}"
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=need)
    pos = 3
    weights: dict[str, np.ndarray] = {}
    for name, shape in names:
        n = int(np.prod(shape))
        weights[name] = flat[pos:pos + n].reshape(shape).copy()
        pos += n
    buffers: dict[str, dict[str, np.ndarray]] = {}
    for name in buffer_names:
        ch = buffer_sizes[name]
        buffers[name] = {"mean": flat[pos:pos + ch].copy(),
                         "var": flat[pos + ch:pos + 2 * ch].copy()}
        pos += 2 * ch
    params = NetParams(
        rho_t=np.array(flat[0]), mu_t=np.array(flat[1]), eta_t=np.array(flat[2]),
        weights=weights, weight_names=[n for n, _ in names], buffers=buffers,
    )
    params.check_finite()
    return cfg, params
