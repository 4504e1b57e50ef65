from __future__ import annotations

import numpy as np

from basetx.ndkernel import GradTape, Tensor


def finite_diff(f, arrays: list[np.ndarray], h: float = 1e-5) -> list[np.ndarray]:
    """Central finite differences of a scalar function of numpy arrays.

    Independent oracle for gradient checks: perturbs every element of
    every array by +-h and differences the scalar outputs. Must stay
    autodiff-free.
    """
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + h
            hi = f()
            arr[idx] = orig - h
            lo = f()
            arr[idx] = orig
            g[idx] = (hi - lo) / (2.0 * h)
            it.iternext()
        grads.append(g)
    return grads


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check(build_loss, params: list[Tensor], h: float = 1e-5) -> float:
    """Compare tape gradients of build_loss() against finite differences.

    build_loss must construct the loss from ``params`` from scratch on
    every call (it is re-run for each perturbed evaluation).
    """
    with GradTape() as tape:
        loss = build_loss()
    grads = tape.backward(loss)
    analytic = [grads[id(p)].data if id(p) in grads else np.zeros_like(p.data) for p in params]

    def scalar() -> float:
        return float(build_loss().data)

    numeric = finite_diff(scalar, [p.data for p in params], h=h)
    return max(max_rel_err(a, n) for a, n in zip(analytic, numeric))
