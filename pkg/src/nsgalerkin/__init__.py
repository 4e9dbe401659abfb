"""Spectral Galerkin Navier-Stokes solver on a periodic box."""
# galerkin must load before lift: lift reuses the convolution kernel and the
# galerkin systems consume lift data
from . import spectral  # noqa: F401
from . import galerkin  # noqa: F401
from . import lift  # noqa: F401

__version__ = "0.1.0"
