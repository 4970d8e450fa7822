"""Adam optimizer over a ParamSet and a central-difference gradient checker."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import MissingGrad
from .tensor import Tensor, backward, no_grad


class Adam:
    """Bias-corrected Adam. Holds per-parameter moment buffers and the step
    counter; ``step`` applies the update in place and zero-fills grads."""

    def __init__(self, params, lr: float = 2e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is None:
                raise MissingGrad(f"parameter '{name}' has no gradient buffer")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            g.fill(0.0)


def grad_check(fn: Callable[[], Tensor], points: Sequence[Tensor] | Tensor,
               h: float = 1e-5, tol: float | None = None) -> float:
    """Max relative error between taped gradients and central differences.

    ``fn`` must recompute a scalar Tensor from the current values of
    ``points``. Never raises; callers compare the returned magnitude against
    ``tol`` themselves (the parameter documents the intended threshold).
    """
    del tol
    if isinstance(points, Tensor):
        points = [points]
    for p in points:
        p.grad = None
    loss = fn()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in points]

    worst = 0.0
    with no_grad():
        for p, ana in zip(points, analytic):
            flat = p.data.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = fn().item()
                flat[i] = orig - h
                down = fn().item()
                flat[i] = orig
                num = (up - down) / (2.0 * h)
                a = ana.reshape(-1)[i]
                err = abs(a - num) / max(1.0, abs(a), abs(num))
                if err > worst:
                    worst = err
    return worst
