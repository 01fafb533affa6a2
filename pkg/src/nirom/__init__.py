"""Non-intrusive reduced-order modeling of time-series snapshot data.

Compresses full-field snapshots with a truncated POD basis and propagates
the latent coefficients with one of three interchangeable engines: radial
basis function interpolation of the latent time derivative, a neural ODE
trained by backpropagation through the integrator, or exact dynamic mode
decomposition.
"""

__version__ = "0.1.0"
