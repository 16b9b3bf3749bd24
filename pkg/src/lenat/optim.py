"""Adam with bias correction and an inverse-sqrt warmup schedule.

Defaults follow the usual NAT training recipe scaled down to desk size:
beta1=0.9, beta2=0.98, eps=1e-9, 400 warmup steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor


@dataclass
class AdamConfig:
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-9
    warmup: int = 400


class Adam:
    def __init__(self, params: list[Tensor], cfg: AdamConfig | None = None):
        self.cfg = cfg or AdamConfig()
        self.params = list(params)
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.step_count = 0

    def current_lr(self) -> float:
        """Linear warmup to cfg.lr, then decay proportional to 1/sqrt(step)."""
        t = max(self.step_count, 1)
        w = self.cfg.warmup
        if w <= 0:
            return self.cfg.lr
        return self.cfg.lr * min(t / w, (w / t) ** 0.5)

    def step(self):
        self.step_count += 1
        lr = self.current_lr()
        c = self.cfg
        bc1 = 1.0 - c.beta1**self.step_count
        bc2 = 1.0 - c.beta2**self.step_count
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
