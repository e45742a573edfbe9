"""Mini-batch training with adaptive-moment updates, plus the finite-
difference gradient checker used to certify the reverse-mode engine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import NumericError, Rng
from ..csa import OperatorContext
from . import autodiff as ad
from .loss import nmpe_graph
from .model import NetConfig, NetParams, Tape, forward_batch, init_params


class TrainingDiverged(NumericError):
    """Loss became non-finite; `step` is the 0-based step that produced it."""

    def __init__(self, step: int):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    lr: float = 1e-3
    batch_size: int = 4
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    max_steps: int = 0           # 0 means "run all epochs"

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not (self.lr >= 0.0 and np.isfinite(self.lr)):
            raise ValueError(f"lr must be finite and >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("moment decay rates must lie in [0, 1)")
        if self.adam_eps <= 0.0:
            raise ValueError(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.max_steps < 0:
            raise ValueError(f"max_steps must be >= 0, got {self.max_steps}")


def _param_items(params: NetParams):
    yield "rho_t", params.rho_t
    yield "mu_t", params.mu_t
    yield "eta_t", params.eta_t
    yield from params.weights.items()


def _assign(params: NetParams, name: str, value: np.ndarray) -> None:
    if name == "rho_t":
        params.rho_t = value
    elif name == "mu_t":
        params.mu_t = value
    elif name == "eta_t":
        params.eta_t = value
    else:
        params.weights[name] = value


# Stability projection: the data step is a contraction only for rho_t in
# [0, 1) and mu_t >= 0, so updates are clipped back into a safe box.
_SCALAR_BOUNDS = {"rho_t": (0.0, 0.99), "mu_t": (1e-6, 10.0), "eta_t": (0.0, 2.0)}


def train(ctx: OperatorContext, cfg: NetConfig, dataset: list, tcfg: TrainConfig,
          params: NetParams | None = None) -> tuple[NetParams, list[float]]:
    """Train on (echo_down, scene) pairs from simdata Samples.

    Returns the trained parameters and one loss value per step.  Determinism:
    the batch order stream and all initialization derive from fixed seeds.
    """
    cfg.validate()
    tcfg.validate()
    if not dataset:
        raise ValueError("dataset is empty")
    echoes = np.stack([s.echo_down for s in dataset])
    truths = np.stack([s.scene.image for s in dataset])
    if echoes.shape[1:] != ctx.echo_shape:
        raise ValueError(
            f"dataset echo shape {echoes.shape[1:]} does not match context "
            f"{ctx.echo_shape}"
        )

    if params is None:
        params = init_params(ctx, cfg)
    else:
        params = params.copy()
    moments = {name: (np.zeros_like(arr), np.zeros_like(arr))
               for name, arr in _param_items(params)}
    order_gen = Rng(tcfg.seed).split("batch-order").generator()
    history: list[float] = []
    step = 0
    done = False

    for _epoch in range(tcfg.epochs):
        perm = order_gen.permutation(len(dataset))
        for lo in range(0, len(dataset), tcfg.batch_size):
            idx = perm[lo:lo + tcfg.batch_size]
            tape = forward_batch(ctx, cfg, params, echoes[idx], train=True)
            loss = nmpe_graph(tape.output, truths[idx])
            value = float(loss.value)
            if not np.isfinite(value):
                raise TrainingDiverged(step)
            history.append(value)
            ad.backward(loss, np.array(1.0))

            t = step + 1
            for name, arr in list(_param_items(params)):
                tensor = tape.param_tensors[name]
                g = np.zeros_like(arr) if tensor.grad is None else tensor.grad
                m, v = moments[name]
                m = tcfg.beta1 * m + (1.0 - tcfg.beta1) * g
                v = tcfg.beta2 * v + (1.0 - tcfg.beta2) * g * g
                moments[name] = (m, v)
                m_hat = m / (1.0 - tcfg.beta1**t)
                v_hat = v / (1.0 - tcfg.beta2**t)
                new = arr - tcfg.lr * m_hat / (np.sqrt(v_hat) + tcfg.adam_eps)
                bounds = _SCALAR_BOUNDS.get(name)
                if bounds is not None:
                    new = np.clip(new, bounds[0], bounds[1])
                _assign(params, name, new)

            step += 1
            if tcfg.max_steps and step >= tcfg.max_steps:
                done = True
                break
        if done:
            break

    params.check_finite()
    return params, history


def relu_margin(ctx: OperatorContext, cfg: NetConfig, params: NetParams,
               yd_batch: np.ndarray) -> float:
    """Smallest rectifier-input magnitude in a training-mode forward pass.

    A central difference probes the loss at +/- step; it only measures a
    derivative if no rectifier input lies within the step of zero.  Callers
    should require margin > a few multiples of the step before trusting the
    check.
    """
    ad.relu_trace = []
    try:
        forward_batch(ctx, cfg, params, yd_batch, train=True)
        return min(ad.relu_trace, default=float("inf"))
    finally:
        ad.relu_trace = None


def check_point(params: NetParams, bias_shift: float = 0.05,
                weight_scale: float = 1.0) -> NetParams:
    """Copy of `params` displaced to a generic point for gradient checks.

    Freshly initialized biases are zero, which, combined with the small
    dynamic range of backprojected echoes, piles rectifier inputs up against
    zero and invalidates finite differences.  Shifting every convolution bias
    by `bias_shift` (and optionally rescaling kernels) moves the network to a
    generic point where the difference quotient is trustworthy; gradient
    correctness at such a point certifies the same pullback code that runs
    everywhere else.
    """
    out = params.copy()
    for name, arr in out.weights.items():
        if name.endswith(".b"):
            arr += bias_shift
        elif name.endswith(".w") and weight_scale != 1.0:
            arr *= weight_scale
    return out


def gradient_check(ctx: OperatorContext, cfg: NetConfig, params: NetParams,
                   yd_batch: np.ndarray, truth: np.ndarray,
                   fd_step: float = 1e-5, mutate_analytic=None) -> dict[str, float]:
    """Max relative error between reverse-mode and central-difference
    gradients, per parameter array.

    Relative error uses max(|g_fd|, 1e-8) as the denominator.  Runs norms in
    training mode so batch statistics (pure functions of the batch) stay
    consistent between analytic and displaced evaluations.  `mutate_analytic`
    is a fault-injection hook for exercising failure paths in tests: it gets
    the analytic-gradient dict to corrupt in place before comparison.
    """
    tape = forward_batch(ctx, cfg, params, yd_batch, train=True)
    loss = nmpe_graph(tape.output, truth)
    ad.backward(loss, np.array(1.0))
    analytic = {name: (np.zeros_like(arr) if tape.param_tensors[name].grad is None
                       else tape.param_tensors[name].grad.copy())
                for name, arr in _param_items(params)}
    if mutate_analytic is not None:
        mutate_analytic(analytic)

    def loss_at(p: NetParams) -> float:
        t = forward_batch(ctx, cfg, p, yd_batch, train=True)
        return float(nmpe_graph(t.output, truth).value)

    report: dict[str, float] = {}
    for name, arr in _param_items(params):
        worst = 0.0
        flat = arr.reshape(-1)
        for i in range(flat.size):
            probe = params.copy()
            pf = (probe.rho_t if name == "rho_t" else
                  probe.mu_t if name == "mu_t" else
                  probe.eta_t if name == "eta_t" else
                  probe.weights[name]).reshape(-1)
            orig = pf[i]
            pf[i] = orig + fd_step
            up = loss_at(probe)
            pf[i] = orig - fd_step
            down = loss_at(probe)
            pf[i] = orig
            g_fd = (up - down) / (2.0 * fd_step)
            g_an = analytic[name].reshape(-1)[i]
            rel = abs(g_an - g_fd) / max(abs(g_fd), 1e-8)
            worst = max(worst, rel)
        report[name] = worst
    return report
