"""Stationary GP kernels of random convolutional networks and desk-scale
reconstruction experiments built on them.

The package is organised around a small set of layers:

* ``ops`` / ``backend`` -- dense tensor primitives (convolution,
  activations, resampling) with exact reverse-mode gradients.  The hot
  correlation loops have a compiled core with a pure-numpy fallback.
* ``stationary`` / ``calculus`` -- stationary covariance functions on
  integer lag grids and the layer-by-layer transfer rules that compile a
  network description into its limiting kernel.
* ``empirics`` -- Monte Carlo estimation of the output covariance of
  random networks, for validating the analytic kernels.
* ``gp`` -- exact Gaussian-process prior sampling and posterior inference.
* ``network`` / ``inference`` -- trainable realisation of a network
  description and the SGD/SGLD estimation schemes.
* ``signalio`` / ``cli`` -- codecs, metrics and the command-line driver.
"""

__version__ = "0.1.0"

from .backend import BACKEND
from .rng import make_rng

__all__ = ["BACKEND", "make_rng", "__version__"]
