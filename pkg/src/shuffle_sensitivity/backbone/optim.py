from __future__ import annotations

from collections.abc import Iterable
from typing import Any

import numpy as np

from ..config import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, ADAM_LR
from ..diffcore import Array, Tensor


class Adam:
    """
    Adam with bias-corrected moments.

    Backbone weights and gate logits share one instance and one step size.
    Moments and step counts are keyed by parameter name and created on first
    sight, so a parameter that starts updating late (gates after warm-up) gets
    the same bias correction as one updated from step 1. Parameters without a
    gradient this step are left untouched.

    ``t`` counts calls to ``step``; ``counts`` holds the per-parameter updates.
    """

    def __init__(
        self,
        lr: float = ADAM_LR,
        beta1: float = ADAM_BETA1,
        beta2: float = ADAM_BETA2,
        eps: float = ADAM_EPS,
    ) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, Array] = {}
        self.v: dict[str, Array] = {}
        self.counts: dict[str, int] = {}
        self.t = 0

    def step(self, named_params: Iterable[tuple[str, Tensor]]) -> None:
        self.t += 1
        for name, p in named_params:
            g = p.grad
            if g is None:
                continue
            if name not in self.m:
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
                self.counts[name] = 0
            self.counts[name] += 1
            k = self.counts[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[name] / (1.0 - self.beta1**k)
            v_hat = self.v[name] / (1.0 - self.beta2**k)
            p.data = (p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)

    def hyperparameters(self) -> dict[str, Any]:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}
