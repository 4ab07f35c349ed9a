from __future__ import annotations

import logging

import numpy as np

from ..diffcore import Tape, add, backward, bce_mean
from ..errors import ContractError, NumericError
from ..gates import GateSet, sparsity_penalty
from ..schema import StepLosses
from .model import BackboneParams, forward
from .optim import Adam

logger = logging.getLogger(__name__)


def train_step(
    params: BackboneParams,
    adam: Adam,
    gates: GateSet | None,
    batch: tuple[np.ndarray, np.ndarray],
    rng: np.random.Generator | None,
    step: int | None = None,
) -> StepLosses:
    """
    One joint update of the backbone and the gates.

    During warm-up (``step < gates.warmup_steps``) phi receives no update at
    all. ``step`` defaults to the optimizer's step counter.

    Raises:
        ContractError: If the batch is empty.
        NumericError: If the loss is not finite; nothing is updated.
    """
    X, y = batch
    if len(y) == 0:
        raise ContractError("train_step needs a non-empty batch")
    step = adam.t if step is None else step

    params.zero_grad()
    if gates is not None:
        for _, phi in gates.parameters():
            phi.zero_grad()

    with Tape() as tape:
        logits = forward(params, X, gates, rng)
        task = bce_mean(logits, y)
        if gates is not None:
            penalty = sparsity_penalty(gates)
            total = add(task, penalty)
            penalty_value = penalty.item()
        else:
            total = task
            penalty_value = 0.0

        if not np.isfinite(total.item()):
            details = {
                "step": step,
                "task_loss": task.item(),
                "penalty": penalty_value,
                "max_abs_logit": float(np.nanmax(np.abs(logits.data))),
            }
            logger.error(f"non-finite loss at step {step}: {details}")
            raise NumericError(f"non-finite loss at step {step}", details)
        backward(total, tape)

    named = params.named_parameters()
    if gates is not None:
        if gates.frozen_at(step):
            for _, phi in gates.parameters():
                phi.zero_grad()
        else:
            named.extend(gates.parameters())
    adam.step(named)
    params.apply_masks()

    return StepLosses(task_loss=task.item(), penalty=penalty_value, total_loss=total.item())
