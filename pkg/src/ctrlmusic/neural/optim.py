from __future__ import annotations

from dataclasses import asdict, dataclass

import torch


@dataclass(frozen=True)
class OptimizerConfig:
    lr0: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    decay_steps: int = 100_000
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.lr0 <= 0:
            raise ValueError("lr0 must be positive")
        if self.decay_steps < 1:
            raise ValueError("decay_steps must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def lr_at(step: int, opt: OptimizerConfig) -> float:
    """Linear decay from ``lr0`` to ``0.1 * lr0`` over ``decay_steps``, then flat."""
    if step < 0:
        raise ValueError("step must be non-negative")
    if step >= opt.decay_steps:
        return 0.1 * opt.lr0
    return opt.lr0 * (1.0 - 0.9 * step / opt.decay_steps)


class AdamW(torch.optim.Optimizer):
    """Adam with decoupled weight decay.

    Decay multiplies weights by ``1 - lr * weight_decay`` before the Adam
    update; groups with ``weight_decay=0`` (biases, norm gains) are skipped.
    The bias-correction step is the group's ``step`` count, shared by all
    parameters so it can be restored from a checkpoint counter.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        defaults = dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay, step=0)
        super().__init__(params, defaults)

    @torch.no_grad()
    def step(self, closure=None):
        for group in self.param_groups:
            group["step"] += 1
            t = group["step"]
            beta1, beta2 = group["betas"]
            lr, wd = group["lr"], group["weight_decay"]
            bc1 = 1 - beta1 ** t
            bc2 = 1 - beta2 ** t
            for p in group["params"]:
                if p.grad is None:
                    continue
                state = self.state[p]
                if not state:
                    state["exp_avg"] = torch.zeros_like(p)
                    state["exp_avg_sq"] = torch.zeros_like(p)
                m, v = state["exp_avg"], state["exp_avg_sq"]
                m.mul_(beta1).add_(p.grad, alpha=1 - beta1)
                v.mul_(beta2).addcmul_(p.grad, p.grad, value=1 - beta2)
                if wd:
                    p.mul_(1 - lr * wd)
                denom = (v / bc2).sqrt_().add_(group["eps"])
                p.addcdiv_(m, denom, value=-lr / bc1)


def decays(name: str, param: torch.Tensor) -> bool:
    """Weight decay applies to matrices; biases and LayerNorm gains are exempt."""
    return param.dim() >= 2
