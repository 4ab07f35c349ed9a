"""
Finite-difference verification of reverse-mode gradients.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np

from .ops import StopGradPins, pinned_stop_grads
from .tensor import Tape, Tensor, backward

logger = logging.getLogger(__name__)

# Denominator floor of the per-tensor relative error.
REL_ERROR_FLOOR = 1e-6


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    epsilon: float = 1e-5,
) -> float:
    """
    Compare reverse-mode gradients of ``f`` against central differences.

    ``f`` must rebuild its graph from ``params`` on every call and be
    deterministic (seed any PRNG inside it). stop_grad outputs are pinned to
    the values of the reference evaluation, so both sides differentiate the
    same surrogate objective. The ``grad`` slots of ``params`` are restored
    before returning.

    Returns:
        Worst per-tensor relative error max|a - n| / max(max|a|, max|n|, 1e-6).
    """
    saved = [p.grad for p in params]
    for p in params:
        p.zero_grad()

    try:
        pins = StopGradPins()
        with pinned_stop_grads(pins, "record"), Tape() as tape:
            loss = f()
            backward(loss, tape)
        analytic = [
            p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params
        ]
    finally:
        for p, grad in zip(params, saved, strict=True):
            p.grad = grad

    def evaluate() -> float:
        with pinned_stop_grads(pins, "replay"):
            return f().item()

    worst = 0.0
    for p, grad in zip(params, analytic, strict=True):
        numeric = np.zeros(p.data.shape, dtype=np.float64)
        for idx in np.ndindex(p.data.shape):
            original = p.data[idx]
            p.data[idx] = original + epsilon
            f_plus = evaluate()
            p.data[idx] = original - epsilon
            f_minus = evaluate()
            p.data[idx] = original
            numeric[idx] = (f_plus - f_minus) / (2 * epsilon)

        if not numeric.size:
            continue
        scale = max(float(np.abs(grad).max()), float(np.abs(numeric).max()), REL_ERROR_FLOOR)
        worst = max(worst, float(np.abs(grad - numeric).max()) / scale)

    logger.debug(f"grad_check over {len(params)} tensors: worst relative error {worst:.3e}")
    return worst
