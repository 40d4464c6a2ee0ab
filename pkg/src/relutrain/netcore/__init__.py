"""ReLU networks: parameters, initialization, life-state classification and training."""
from .network import Architecture, NetworkParams, forward, forward_trace, relu_net
from .schemes import InitScheme, SchemeKind, draw_layer, init_network
from .status import (
    LifeState,
    NeuronStatus,
    PiecewiseLinear,
    StackStatus,
    classify_stack,
    eval_piecewise_1d,
    neuron_status,
    status_counts,
)
from .training import (
    Method,
    OptimizerConfig,
    TrainHistory,
    loss_grad,
    mse_loss,
    stack_params,
    train,
    train_replicates,
    unstack_params,
)

__all__ = [
    "Architecture",
    "InitScheme",
    "LifeState",
    "Method",
    "NetworkParams",
    "NeuronStatus",
    "OptimizerConfig",
    "PiecewiseLinear",
    "SchemeKind",
    "StackStatus",
    "TrainHistory",
    "classify_stack",
    "draw_layer",
    "eval_piecewise_1d",
    "forward",
    "forward_trace",
    "init_network",
    "loss_grad",
    "mse_loss",
    "neuron_status",
    "relu_net",
    "stack_params",
    "status_counts",
    "train",
    "train_replicates",
    "unstack_params",
]
