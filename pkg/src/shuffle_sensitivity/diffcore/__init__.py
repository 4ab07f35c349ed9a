from .gradcheck import grad_check
from .ops import (
    StopGradPins,
    add,
    add_bias,
    bce_mean,
    broadcast_mul,
    concat_cols,
    custom_op,
    gather_rows,
    matmul,
    mean_all,
    one_minus,
    pinned_stop_grads,
    relu,
    reshape,
    scale,
    sigmoid,
    stop_grad,
)
from .tensor import Array, Tape, TapeNode, Tensor, backward, current_tape

__all__ = [
    "Array",
    "StopGradPins",
    "Tape",
    "TapeNode",
    "Tensor",
    "add",
    "add_bias",
    "backward",
    "bce_mean",
    "broadcast_mul",
    "concat_cols",
    "current_tape",
    "custom_op",
    "gather_rows",
    "grad_check",
    "matmul",
    "mean_all",
    "one_minus",
    "pinned_stop_grads",
    "relu",
    "reshape",
    "scale",
    "sigmoid",
    "stop_grad",
]
