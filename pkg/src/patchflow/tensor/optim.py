"""Adam with bias correction and linear warmup."""

import numpy as np

from ..errors import PoisonedUpdateError, ShapeError


class Adam:
    """Deterministic Adam over a name -> Tensor parameter dict.

    A NaN or Inf in any gradient refuses the whole step, leaving params and
    state untouched.
    """

    def __init__(self, params, lr=3e-4, beta1=0.9, beta2=0.95, eps=1e-8, warmup_steps=1000):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.warmup_steps = warmup_steps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def current_lr(self) -> float:
        if self.warmup_steps > 0 and self.step_count < self.warmup_steps:
            return self.lr * (self.step_count + 1) / self.warmup_steps
        return self.lr

    def step(self) -> None:
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if g.shape != p.data.shape:
                raise ShapeError(f"grad shape {g.shape} != param shape {p.data.shape} for {name}")
            if not np.all(np.isfinite(g)):
                raise PoisonedUpdateError(f"non-finite gradient in {name}; step refused")
        lr = self.current_lr()
        t = self.step_count + 1
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            mhat = m / c1
            vhat = v / c2
            p.data -= (lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.data.dtype)
        self.step_count = t

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self):
        """Optimizer state as flat name -> array pairs (for checkpointing)."""
        out = {"adam.step": np.array([self.step_count], dtype=np.float64)}
        for k in self.params:
            out[f"adam.m.{k}"] = self.m[k]
            out[f"adam.v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, arrays) -> None:
        self.step_count = int(arrays["adam.step"][0])
        for k in self.params:
            self.m[k] = arrays[f"adam.m.{k}"].copy()
            self.v[k] = arrays[f"adam.v.{k}"].copy()
