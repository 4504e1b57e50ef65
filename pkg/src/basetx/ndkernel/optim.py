"""SGD with momentum."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .tensor import ShapeError, Tensor


def sgd_step(
    param: Tensor,
    grad: np.ndarray | Tensor,
    velocity: np.ndarray,
    lr: float,
    momentum: float,
) -> None:
    """One in-place update: v <- momentum*v + grad; p <- p - lr*v."""
    g = grad.data if isinstance(grad, Tensor) else np.asarray(grad)
    if g.shape != param.data.shape:
        raise ShapeError(
            f"sgd_step shape mismatch: param {param.data.shape} vs grad {g.shape}"
        )
    if velocity.shape != param.data.shape:
        raise ShapeError(
            f"sgd_step shape mismatch: param {param.data.shape} vs velocity {velocity.shape}"
        )
    velocity *= momentum
    velocity += g
    param.data = param.data - lr * velocity


class SGD:
    """Momentum SGD over a named parameter dict.

    ``step`` consumes a gradient map keyed by leaf tensor id, as returned
    by GradTape.backward; parameters with no gradient entry and zero
    velocity are left untouched.
    """

    def __init__(self, params: dict[str, Tensor], lr: float, momentum: float = 0.9):
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self._velocity = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, grads: Mapping[int, Tensor | np.ndarray]) -> None:
        for name, p in self.params.items():
            g = grads.get(id(p))
            v = self._velocity[name]
            if g is None:
                if self.momentum == 0.0 or not v.any():
                    continue
                g = np.zeros_like(p.data)
            sgd_step(p, g, v, self.lr, self.momentum)

    def decay_lr(self, factor: float) -> None:
        self.lr *= factor
