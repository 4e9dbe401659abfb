from .basis import BasisSpec, polarizations
from .field import FORMAT_VERSION, RealGridField, SpectralField, random_field
from .ops import (
    divergence,
    enstrophy,
    gradient_decompose,
    inner_product,
    is_solenoidal,
    l2_norm,
    laplacian,
    leray_project,
    palinstrophy,
    stokes_solve,
)
from .oracle import GNProbeResult, gn_constant_probe, gn_terms, lq_norm, nonlinear_grid_oracle
from .torus import TorusSpec, ball_modes, decode, encode, is_canonical, lookup

__all__ = [
    "BasisSpec", "FORMAT_VERSION", "GNProbeResult", "RealGridField", "SpectralField", "TorusSpec",
    "ball_modes", "decode", "divergence", "encode", "enstrophy", "gn_constant_probe", "gn_terms",
    "gradient_decompose", "inner_product", "is_canonical", "is_solenoidal", "l2_norm", "laplacian",
    "leray_project", "lookup", "lq_norm", "nonlinear_grid_oracle", "palinstrophy", "polarizations",
    "random_field", "stokes_solve",
]
