import numpy as np
import pytest

from nirom import rbf as rbf_mod
from nirom.node import SolverSpec, TrainConfig, build_net, grad
from nirom.node.training import train
from nirom.pod import LatentTrajectory


@pytest.fixture(autouse=True, scope="session")
def _warm_compiled_kernels():
    """First use of the jitted kernels pays the compile cost; spend it here
    so timed tests measure steady-state speed."""
    times = np.linspace(0.0, 1.0, 3)
    traj = LatentTrajectory(np.vstack([np.cos(times), np.sin(times)]), times)
    model = rbf_mod.fit(traj, 0.1)
    rbf_mod.forecast(model, traj.coeffs[:, 0], times)
    net = build_net(2, [4], "tanh", seed=0, time_input=False)
    train(net, traj, TrainConfig(epochs=1))
    grad(net, traj.coeffs[:, 0], times, traj.coeffs,
         SolverSpec("rk4", step=0.1), mode="adjoint")
