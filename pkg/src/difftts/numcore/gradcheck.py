"""Finite-difference validation of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import NumericError, Tensor, no_grad


def grad_check(f: Callable[[], Tensor], tensors: Sequence[Tensor],
               epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` re-evaluates a scalar-valued forward pass that reads ``tensors``
    (params and/or inputs); each tensor is perturbed entry by entry.  The
    relative error is |analytic - fd| / max(1, |analytic|).
    """
    if not (1e-7 <= epsilon <= 1e-3):
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    for t in tensors:
        t.zero_grad()
    out = f()
    if out.data.size != 1:
        raise ValueError("grad_check target must be scalar-valued")
    out.backward()
    analytic = []
    for t in tensors:
        if t.grad is None:
            analytic.append(np.zeros_like(t.data))
        else:
            analytic.append(t.grad.astype(np.float64).copy())

    worst = 0.0
    with no_grad():
        for t, a in zip(tensors, analytic):
            flat = t.data.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + epsilon
                fp = float(f().data)
                flat[i] = orig - epsilon
                fm = float(f().data)
                flat[i] = orig
                fd = (fp - fm) / (2.0 * epsilon)
                if not np.isfinite(fd):
                    raise NumericError("non-finite finite-difference value")
                err = abs(a.reshape(-1)[i] - fd) / max(1.0, abs(a.reshape(-1)[i]))
                if err > worst:
                    worst = err
    return float(worst)
