"""Neural-ODE engine: a small MLP as the latent right-hand side, explicit
Runge-Kutta solvers to roll it out, and reverse-mode training."""

from .network import (
    ACTIVATIONS,
    PRESETS,
    DynamicsNet,
    NodePreset,
    ScaleMap,
    TimeMap,
    build_net,
    load_net,
    net_eval,
    net_init,
    preset_net,
    save_net,
    scale_apply,
    scale_fit,
    scale_invert,
)
from .solvers import SolverSpec, ode_solve
from .gradients import AdjointState, grad, loss_mse
from .training import (
    LrSchedule,
    TrainConfig,
    TrainingHistory,
    lr_at,
    node_forecast,
    normalize_times,
    train,
)

__all__ = [
    "ACTIVATIONS",
    "PRESETS",
    "AdjointState",
    "DynamicsNet",
    "LrSchedule",
    "NodePreset",
    "ScaleMap",
    "SolverSpec",
    "TimeMap",
    "TrainConfig",
    "TrainingHistory",
    "build_net",
    "grad",
    "load_net",
    "loss_mse",
    "lr_at",
    "net_eval",
    "net_init",
    "node_forecast",
    "normalize_times",
    "ode_solve",
    "preset_net",
    "save_net",
    "scale_apply",
    "scale_fit",
    "scale_invert",
    "train",
]
