"""The unfolded reconstruction network.

Each layer repeats one solver iteration with learnable pieces: a data step
with learnable scalars (rho_t, mu_t), a learnable regularizer replacing the
proximal map (input X + V), and a multiplier update with learnable rate
eta_t.  The scalars are shared across layers; regularizer weights are
per-layer unless `share_weights` ties them.  The network input is the
downsampled echo; X0 = backproject(Yd), Z0 = X0, V0 = 0, and the output is
the final data-step estimate X^(num_layers).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import NumericError, Rng, ShapeError, as_image
from ..csa import OperatorContext, backproject, estimate_lipschitz, observe
from . import autodiff as ad
from .layers import glorot_uniform, merge_complex, split_complex
from .regularizers import (
    GAMMA,
    WEIGHT,
    pro_forward,
    pro_plan,
    swift_forward,
    swift_plan,
)

VARIANTS = ("swift", "pro")
NORM_MODES = ("batch", "instance")


@dataclass(frozen=True)
class NetConfig:
    variant: str
    num_layers: int
    rows: int
    cols: int
    base_channels: int = 4
    pyramid_levels: int = 2      # swift only
    pair_count: int = 2          # pro only
    seed: int = 0
    share_weights: bool = False
    norm_mode: str = "batch"

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.base_channels < 2:
            raise ValueError(f"base_channels must be >= 2, got {self.base_channels}")
        if self.variant == "swift":
            if self.pyramid_levels < 1:
                raise ValueError(f"pyramid_levels must be >= 1, got {self.pyramid_levels}")
            div = 2**self.pyramid_levels
            if self.rows % div or self.cols % div:
                raise ValueError(
                    f"swift needs rows/cols divisible by {div}, got {self.rows}x{self.cols}"
                )
        if self.variant == "pro" and self.pair_count < 1:
            raise ValueError(f"pair_count must be >= 1, got {self.pair_count}")
        if self.norm_mode not in NORM_MODES:
            raise ValueError(f"norm_mode must be one of {NORM_MODES}, got {self.norm_mode!r}")

    def layer_prefixes(self) -> list[str]:
        if self.share_weights:
            return ["shared"]
        return [f"layer{k:02d}" for k in range(self.num_layers)]

    def regularizer_plan(self) -> tuple[list, list]:
        if self.variant == "swift":
            return swift_plan(self.base_channels, self.pyramid_levels)
        return pro_plan(self.base_channels, self.pair_count)


@dataclass
class NetParams:
    """Learnable scalars and weights plus normalization running statistics.

    `weight_names` pins the declaration order used by the checkpoint format;
    `buffers` maps a norm name to {"mean", "var"} float64 arrays.
    """

    rho_t: np.ndarray
    mu_t: np.ndarray
    eta_t: np.ndarray
    weights: dict[str, np.ndarray]
    weight_names: list[str]
    buffers: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def check_finite(self) -> None:
        for name in ("rho_t", "mu_t", "eta_t"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"{name} is not finite")
        for name, arr in self.weights.items():
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"weight {name} is not finite")

    def copy(self) -> "NetParams":
        return NetParams(
            rho_t=self.rho_t.copy(), mu_t=self.mu_t.copy(), eta_t=self.eta_t.copy(),
            weights={k: v.copy() for k, v in self.weights.items()},
            weight_names=list(self.weight_names),
            buffers={k: {s: a.copy() for s, a in d.items()}
                     for k, d in self.buffers.items()},
        )


def init_params(ctx: OperatorContext, cfg: NetConfig) -> NetParams:
    """Seeded initialization: rho_t=0.1, mu_t=2/L (measured), eta_t=1.0;
    kernels variance-scaled uniform, biases zero, norm affine identity."""
    cfg.validate()
    if ctx.image_shape != (cfg.rows, cfg.cols):
        raise ShapeError(
            f"config grid {cfg.rows}x{cfg.cols} does not match context {ctx.image_shape}"
        )
    gen = Rng(cfg.seed).split("init").generator()
    plan, buffer_plan = cfg.regularizer_plan()
    weights: dict[str, np.ndarray] = {}
    buffers: dict[str, dict[str, np.ndarray]] = {}
    for prefix in cfg.layer_prefixes():
        for name, shape, kind in plan:
            full = f"{prefix}.{name}"
            if kind == WEIGHT:
                weights[full] = glorot_uniform(shape, gen)
            elif kind == GAMMA:
                weights[full] = np.ones(shape)
            else:  # bias or beta
                weights[full] = np.zeros(shape)
        for name, channels in buffer_plan:
            buffers[f"{prefix}.{name}"] = {
                "mean": np.zeros(channels),
                "var": np.ones(channels),
            }
    lips = estimate_lipschitz(ctx, iters=30, rng=Rng(cfg.seed).split("lipschitz"))
    if lips <= 0.0:
        raise NumericError("estimated Lipschitz constant is not positive")
    return NetParams(
        rho_t=np.array(0.1, dtype=np.float64),
        mu_t=np.array(2.0 / lips, dtype=np.float64),
        eta_t=np.array(1.0, dtype=np.float64),
        weights=weights,
        weight_names=list(weights),
        buffers=buffers,
    )


@dataclass
class Tape:
    """Forward-pass record: the output node plus parameter tensors by name."""

    output: ad.Tensor
    param_tensors: dict[str, ad.Tensor]
    consumed: bool = False


def _wrap_params(params: NetParams) -> dict[str, ad.Tensor]:
    tensors = {
        "rho_t": ad.parameter(params.rho_t),
        "mu_t": ad.parameter(params.mu_t),
        "eta_t": ad.parameter(params.eta_t),
    }
    for name, arr in params.weights.items():
        tensors[name] = ad.parameter(arr)
    return tensors


def forward_batch(ctx: OperatorContext, cfg: NetConfig, params: NetParams,
                  yd_batch: np.ndarray, train: bool = False) -> Tape:
    """Unfold the network over a batch of downsampled echoes [B,M',N']."""
    cfg.validate()
    params.check_finite()
    if ctx.image_shape != (cfg.rows, cfg.cols):
        raise ShapeError(
            f"config grid {cfg.rows}x{cfg.cols} does not match context {ctx.image_shape}"
        )
    yds = np.asarray(yd_batch, dtype=np.complex128)
    if yds.ndim == 2:
        yds = yds[None]
    if yds.ndim != 3 or yds.shape[1:] != ctx.echo_shape:
        raise ShapeError(
            f"echo batch shape {yds.shape} does not match context {ctx.echo_shape}"
        )

    x0 = np.stack([backproject(ctx, yd) for yd in yds])
    x = ad.constant(split_complex(x0))
    z: ad.Tensor = x
    v = ad.constant(np.zeros_like(x.value))
    yd_const = ad.constant(split_complex(yds))

    tensors = _wrap_params(params)
    rho, mu, eta = tensors["rho_t"], tensors["mu_t"], tensors["eta_t"]
    one = ad.constant(1.0)
    prefixes = cfg.layer_prefixes()
    instance = cfg.norm_mode == "instance"
    plan, buffer_plan = cfg.regularizer_plan()

    for k in range(cfg.num_layers):
        prefix = prefixes[0] if cfg.share_weights else prefixes[k]
        try:
            gx = ad.linear_complex(x, lambda c: observe(ctx, c),
                                   lambda c: backproject(ctx, c), ctx.echo_shape)
            resid = ad.sub(yd_const, gx)
            tr = ad.linear_complex(resid, lambda c: backproject(ctx, c),
                                   lambda c: observe(ctx, c), ctx.image_shape)
            x = ad.add(
                ad.add(ad.mul(ad.sub(one, rho), x), ad.mul(mu, tr)),
                ad.mul(rho, ad.sub(z, v)),
            )
            # The loop returns the estimate produced above; z/v computed in
            # the final repetition could never reach it, so skip them there.
            if k < cfg.num_layers - 1:
                w_in = ad.add(x, v)
                layer_tensors = {name: tensors[f"{prefix}.{name}"]
                                 for name, _, _ in plan}
                if cfg.variant == "swift":
                    layer_buffers = {name: params.buffers[f"{prefix}.{name}"]
                                     for name, _ in buffer_plan}
                    z = swift_forward(layer_tensors, layer_buffers, w_in,
                                      cfg.pyramid_levels, train, instance)
                else:
                    z = pro_forward(layer_tensors, w_in, cfg.pair_count)
                v = ad.add(v, ad.mul(eta, ad.sub(x, z)))
        except (ShapeError, NumericError) as exc:
            raise type(exc)(f"layer {k + 1}: {exc}") from exc
        if not np.all(np.isfinite(x.value)):
            raise NumericError(f"layer {k + 1}: estimate became non-finite")

    return Tape(output=x, param_tensors=tensors)


def forward(ctx: OperatorContext, cfg: NetConfig, params: NetParams,
            yd: np.ndarray, train: bool = False) -> tuple[np.ndarray, Tape]:
    """Single-echo forward pass; returns the complex image and the tape."""
    arr = as_image(yd, "downsampled echo")
    tape = forward_batch(ctx, cfg, params, arr[None], train=train)
    return merge_complex(tape.output.value), tape


def backward(tape: Tape, seed: np.ndarray) -> dict[str, np.ndarray]:
    """Pull a loss gradient seed (complex, matching the output image) back to
    every parameter; returns gradients keyed like NetParams entries."""
    if tape.consumed:
        raise RuntimeError("tape already consumed; rerun forward")
    tape.consumed = True
    seed = np.asarray(seed)
    if np.iscomplexobj(seed):
        seed = split_complex(seed)
    if seed.shape != tape.output.value.shape:
        raise ShapeError(
            f"seed shape {seed.shape} does not match output {tape.output.value.shape}"
        )
    ad.backward(tape.output, seed)
    grads: dict[str, np.ndarray] = {}
    for name, tensor in tape.param_tensors.items():
        grads[name] = (np.zeros_like(tensor.value) if tensor.grad is None
                       else tensor.grad)
    return grads


def reconstruct(ctx: OperatorContext, cfg: NetConfig, params: NetParams,
                yd: np.ndarray) -> np.ndarray:
    """Evaluation-mode reconstruction of one downsampled echo."""
    image, _ = forward(ctx, cfg, params, yd, train=False)
    return image
